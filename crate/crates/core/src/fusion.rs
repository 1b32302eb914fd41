//! Two-stage prompt fusion.
//!
//! Stage one fuses learnable query tokens with the merged video tokens by
//! cross-attention. The result passes through a pluggable semantic transform
//! (a seeded residual perceptron standing in for a language backbone, or the
//! identity for isolation tests), is broadcast over the clip's frames, and a
//! second cross-attention against rotary-encoded video tokens produces one
//! segmentation prompt per frame.
//!
//! Query-side tokens carry no spatial location, so in the second stage their
//! (h, w) rotation chunks sit at position 0 while the temporal chunk carries
//! the frame index; video keys rotate on all three axes. Attention logits
//! therefore depend on relative time and absolute key location, and shifting
//! every frame index by a constant leaves the output unchanged.

use crate::attention::{cross_attention, AttentionParams};
use crate::error::{CoreError, Result};
use crate::numerics::{derived_seed, LinearMap, SeededRng, Tensor};
use crate::rope::RotationPlan;
use crate::tokenizer::TokenSequence;

/// Learnable query token set, `[N, D]`.
#[derive(Debug, Clone)]
pub struct QueryTokens {
    pub embed: Tensor,
    pub seed: u64,
}

impl QueryTokens {
    /// Unconditioned seeded init, uniform in `±1/sqrt(D)`.
    pub fn seeded(n: usize, d: usize, seed: u64) -> Self {
        assert!(n >= 1);
        let bound = 1.0 / (d as f64).sqrt();
        let mut rng = SeededRng::new(seed);
        Self {
            embed: Tensor::seeded_uniform(&[n, d], -bound, bound, &mut rng),
            seed,
        }
    }

    /// Rows supplied by the caller (query-conditioned initialization).
    pub fn from_rows(rows: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(CoreError::Config("query token set must be nonempty".into()));
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(n * d);
        for r in &rows {
            if r.len() != d {
                return Err(CoreError::ShapeMismatch {
                    op: "QueryTokens::from_rows",
                    left: vec![d],
                    right: vec![r.len()],
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            embed: Tensor::new(vec![n, d], data)?,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.embed.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.embed.shape()[1]
    }
}

/// Fused per-frame prompts, `[N, T, D]`.
#[derive(Debug, Clone)]
pub struct FramePrompts {
    pub data: Tensor,
}

impl FramePrompts {
    pub fn n(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn t_seg(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.data.shape()[2]
    }

    /// Frame `k`'s prompt slice, `[N, 1, D]`.
    pub fn slice_frame(&self, k: usize) -> Result<Tensor> {
        let (n, t, d) = (self.n(), self.t_seg(), self.dim());
        if k >= t {
            return Err(CoreError::IndexOutOfRange {
                what: "prompt frame",
                index: k,
                len: t,
            });
        }
        let mut out = Tensor::zeros(&[n, 1, d]);
        for i in 0..n {
            for c in 0..d {
                out.set(&[i, 0, c], self.data.at(&[i, k, c]));
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Semantic transform
// ---------------------------------------------------------------------------

/// Shape-preserving transform applied between the two fusion stages.
#[derive(Debug, Clone)]
pub enum SemanticTransform {
    Identity,
    /// Residual two-layer perceptron: `x + W2 relu(W1 x)` with `W1: D -> 4D`.
    Mlp {
        expand: LinearMap,
        contract: LinearMap,
    },
}

impl SemanticTransform {
    pub fn mlp(d: usize, seed: u64) -> Self {
        Self::Mlp {
            expand: LinearMap::seeded(4 * d, d, derived_seed(seed, "semantic.expand")),
            contract: LinearMap::seeded(d, 4 * d, derived_seed(seed, "semantic.contract")),
        }
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            Self::Identity => Ok(x.clone()),
            Self::Mlp { expand, contract } => {
                let mut hidden = expand.apply(x)?;
                for v in hidden.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                let delta = contract.apply(&hidden)?;
                let mut out = x.clone();
                for (o, d) in out.data_mut().iter_mut().zip(delta.data()) {
                    *o += d;
                }
                Ok(out)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Fusion stages
// ---------------------------------------------------------------------------

/// Stage one: query tokens attend over the merged video tokens; no rotary
/// encoding at this stage. Output `[N, D]`.
pub fn context_fusion(
    queries: &QueryTokens,
    tokens: &TokenSequence,
    params: &AttentionParams,
) -> Result<Tensor> {
    let merged = tokens.merged();
    if merged.shape()[0] == 0 {
        return Err(CoreError::EmptyKeys);
    }
    cross_attention(&queries.embed, &merged, params, None, None)
}

/// Broadcast copy of `[N, D]` tokens over `t_seg` frame slots plus the frame
/// index per flattened token (frame-major order).
#[derive(Debug, Clone)]
pub struct ExpandedTokens {
    /// `[N, T, D]`; the temporal slices are bitwise equal copies.
    pub data: Tensor,
    /// Frame index per flattened `(t, n)` token: `[0,0,...,1,1,...,T-1]`.
    pub frame_positions: Vec<i64>,
}

impl ExpandedTokens {
    pub fn n(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn t_seg(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.data.shape()[2]
    }

    /// Single-axis temporal rotation plan over the emitted frame positions.
    pub fn temporal_plan(&self, head_dim: usize, base: f64) -> Result<RotationPlan> {
        RotationPlan::temporal(&self.frame_positions, head_dim, base)
    }

    /// Flattened `[T*N, D]` query matrix in frame-major order.
    fn flattened(&self) -> Tensor {
        let (n, t, d) = (self.n(), self.t_seg(), self.dim());
        let mut out = Tensor::zeros(&[t * n, d]);
        for ti in 0..t {
            for i in 0..n {
                let row = out.row_mut(ti * n + i);
                for c in 0..d {
                    row[c] = self.data.at(&[i, ti, c]);
                }
            }
        }
        out
    }
}

pub fn expand_over_frames(f_st: &Tensor, t_seg: usize) -> Result<ExpandedTokens> {
    if f_st.rank() != 2 {
        return Err(CoreError::ShapeMismatch {
            op: "expand_over_frames",
            left: f_st.shape().to_vec(),
            right: vec![2],
        });
    }
    let (n, d) = (f_st.shape()[0], f_st.shape()[1]);
    let mut data = Tensor::zeros(&[n, t_seg, d]);
    for i in 0..n {
        for t in 0..t_seg {
            for c in 0..d {
                data.set(&[i, t, c], f_st.at(&[i, c]));
            }
        }
    }
    Ok(ExpandedTokens {
        data,
        frame_positions: crate::rope::expanded_frame_positions(n, t_seg),
    })
}

/// Stage two with explicit rotation plans (tests force identities here).
pub fn temporal_fusion_with_plans(
    expanded: &ExpandedTokens,
    tokens: &TokenSequence,
    params: &AttentionParams,
    plan_q: Option<&RotationPlan>,
    plan_k: Option<&RotationPlan>,
) -> Result<FramePrompts> {
    let (n, t, d) = (expanded.n(), expanded.t_seg(), expanded.dim());
    if tokens.dim() != d {
        return Err(CoreError::ShapeMismatch {
            op: "temporal_fusion",
            left: vec![d],
            right: vec![tokens.dim()],
        });
    }
    let queries = expanded.flattened();
    let merged = tokens.merged();
    let fused = cross_attention(&queries, &merged, params, plan_q, plan_k)?;
    let mut out = Tensor::zeros(&[n, t, d]);
    for ti in 0..t {
        for i in 0..n {
            let row = fused.row(ti * n + i);
            for c in 0..d {
                out.set(&[i, ti, c], row[c]);
            }
        }
    }
    Ok(FramePrompts { data: out })
}

/// Stage two: queries rotate on the temporal axis only (spatial chunks at
/// position 0), video keys rotate on (t, h, w). `frame_shift` offsets every
/// frame index on both sides; the output is invariant to it.
pub fn temporal_fusion(
    expanded: &ExpandedTokens,
    tokens: &TokenSequence,
    params: &AttentionParams,
    base: f64,
    frame_shift: i64,
) -> Result<FramePrompts> {
    let head_dim = params.head_dim()?;
    let q_positions: Vec<(i64, i64, i64)> = expanded
        .frame_positions
        .iter()
        .map(|&t| (t + frame_shift, 0, 0))
        .collect();
    let k_positions: Vec<(i64, i64, i64)> = tokens
        .positions
        .iter()
        .map(|&(t, h, w)| (t as i64 + frame_shift, h as i64, w as i64))
        .collect();
    let plan_q = RotationPlan::three_axis(&q_positions, head_dim, base)?;
    let plan_k = RotationPlan::three_axis(&k_positions, head_dim, base)?;
    temporal_fusion_with_plans(expanded, tokens, params, Some(&plan_q), Some(&plan_k))
}
