//! Rotary position encodings.
//!
//! A `RotationPlan` assigns each token one position per encoded axis and
//! partitions the head channels into contiguous even-sized chunks, one chunk
//! per axis. Inside a chunk, consecutive channel pairs `(x_{2i}, x_{2i+1})`
//! are rotated by `p * theta_i` with `theta_i = base^(-2i / chunk_dim)` and
//! `p` the token's position on that axis. Rotations preserve token norms, so
//! attention logits between rotated queries and keys depend on relative
//! positions along shared axes.
//!
//! Two plan builders cover this crate's needs: a single-axis temporal plan
//! (positions = frame indices) and a three-axis plan over (t, h, w) for video
//! tokens. Query-side tokens that carry no spatial location use position 0 on
//! the spatial axes, which leaves those chunks unrotated.

use crate::error::{CoreError, Result};
use crate::numerics::Tensor;

#[derive(Debug, Clone)]
struct Axis {
    positions: Vec<i64>,
    chunk: usize,
}

#[derive(Debug, Clone)]
pub struct RotationPlan {
    axes: Vec<Axis>,
    head_dim: usize,
    base: f64,
}

impl RotationPlan {
    /// Single-axis plan over the whole head dimension.
    pub fn temporal(frame_positions: &[i64], head_dim: usize, base: f64) -> Result<Self> {
        if !head_dim.is_multiple_of(2) {
            return Err(CoreError::Config(format!(
                "temporal rotation plan requires an even head_dim, got {head_dim}"
            )));
        }
        Ok(Self {
            axes: vec![Axis {
                positions: frame_positions.to_vec(),
                chunk: head_dim,
            }],
            head_dim,
            base,
        })
    }

    /// Three-axis plan ordered (t, h, w) over `split_three_even(head_dim)`.
    pub fn three_axis(positions: &[(i64, i64, i64)], head_dim: usize, base: f64) -> Result<Self> {
        let chunks = split_three_even(head_dim)?;
        let t: Vec<i64> = positions.iter().map(|p| p.0).collect();
        let h: Vec<i64> = positions.iter().map(|p| p.1).collect();
        let w: Vec<i64> = positions.iter().map(|p| p.2).collect();
        Ok(Self {
            axes: vec![
                Axis {
                    positions: t,
                    chunk: chunks[0],
                },
                Axis {
                    positions: h,
                    chunk: chunks[1],
                },
                Axis {
                    positions: w,
                    chunk: chunks[2],
                },
            ],
            head_dim,
            base,
        })
    }

    /// All-zero positions: acts as the identity on every token.
    pub fn identity(n_tokens: usize, head_dim: usize, base: f64) -> Result<Self> {
        Self::temporal(&vec![0; n_tokens], head_dim, base)
    }

    pub fn token_count(&self) -> usize {
        self.axes.first().map_or(0, |a| a.positions.len())
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    /// Copy of the plan with every position on `axis` shifted by `delta`.
    /// Used by the relative-invariance tests.
    pub fn shifted(&self, axis: usize, delta: i64) -> Self {
        let mut plan = self.clone();
        for p in &mut plan.axes[axis].positions {
            *p += delta;
        }
        plan
    }

    fn validate_for(&self, tokens: usize, head_dim: usize) -> Result<()> {
        let total: usize = self.axes.iter().map(|a| a.chunk).sum();
        if total > head_dim || head_dim != self.head_dim {
            return Err(CoreError::Config(format!(
                "rotation plan covers {total} of head_dim {head_dim} (plan built for {})",
                self.head_dim
            )));
        }
        for axis in &self.axes {
            if axis.chunk % 2 != 0 {
                return Err(CoreError::Config(format!(
                    "rotation chunk {} is odd",
                    axis.chunk
                )));
            }
            if axis.positions.len() != tokens {
                return Err(CoreError::Config(format!(
                    "rotation plan has positions for {} tokens, input has {tokens}",
                    axis.positions.len()
                )));
            }
        }
        Ok(())
    }
}

/// Partition `head_dim` into three near-equal even chunks ordered (t, h, w).
/// `head_dim` must be even and at least 6 so every axis receives a nonzero
/// chunk; leftover channels go to the leading chunks two at a time, keeping
/// the cover exact.
pub fn split_three_even(head_dim: usize) -> Result<[usize; 3]> {
    if !head_dim.is_multiple_of(2) || head_dim < 6 {
        return Err(CoreError::Config(format!(
            "3-axis rotation needs an even head_dim >= 6, got {head_dim}"
        )));
    }
    let base = head_dim / 3 / 2 * 2;
    let mut chunks = [base, base, base];
    let mut rem = head_dim - 3 * base;
    let mut i = 0;
    while rem > 0 {
        chunks[i] += 2;
        rem -= 2;
        i += 1;
    }
    Ok(chunks)
}

/// Rotate every token of `x` (`[tokens, head_dim]`) per the plan. Zero-angle
/// pairs are copied verbatim so position 0 is the exact identity.
pub fn apply_rope(x: &Tensor, plan: &RotationPlan) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(CoreError::ShapeMismatch {
            op: "apply_rope",
            left: x.shape().to_vec(),
            right: vec![plan.head_dim],
        });
    }
    let tokens = x.shape()[0];
    let head_dim = x.shape()[1];
    plan.validate_for(tokens, head_dim)?;

    let mut out = x.clone();
    for tok in 0..tokens {
        let row = out.row_mut(tok);
        let mut offset = 0usize;
        for axis in &plan.axes {
            let p = axis.positions[tok];
            if p != 0 {
                let half = axis.chunk / 2;
                for i in 0..half {
                    let theta = plan.base.powf(-2.0 * i as f64 / axis.chunk as f64);
                    let angle = p as f64 * theta;
                    let (sin, cos) = angle.sin_cos();
                    let a = row[offset + 2 * i];
                    let b = row[offset + 2 * i + 1];
                    row[offset + 2 * i] = a * cos - b * sin;
                    row[offset + 2 * i + 1] = a * sin + b * cos;
                }
            }
            offset += axis.chunk;
        }
    }
    Ok(out)
}

/// Frequencies `theta_i` for a chunk, exposed for tests and diagnostics.
pub fn chunk_frequencies(chunk_dim: usize, base: f64) -> Vec<f64> {
    (0..chunk_dim / 2)
        .map(|i| base.powf(-2.0 * i as f64 / chunk_dim as f64))
        .collect()
}

/// Positions for `n_tokens` replicated over `t_seg` frames, frame-major:
/// `[0,0,...,1,1,...,t_seg-1]`.
pub fn expanded_frame_positions(n_tokens: usize, t_seg: usize) -> Vec<i64> {
    let mut out = Vec::with_capacity(n_tokens * t_seg);
    for t in 0..t_seg {
        out.extend(std::iter::repeat_n(t as i64, n_tokens));
    }
    out
}
