//! Scaled dot-product cross-attention.
//!
//! Single head by default; multi-head splits the projected channels into
//! contiguous per-head slices. No layer normalization and no residual path:
//! the output is exactly `O(softmax(Q K^T / sqrt(head_dim)) V)`. Rotation
//! plans, when supplied, are applied to the projected queries and keys per
//! head before the logits.

use crate::error::{CoreError, Result};
use crate::numerics::{softmax_rows, LinearMap, Tensor};
use crate::rope::{apply_rope, RotationPlan};

/// Projection bundle for one cross-attention site.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub query: LinearMap,
    pub key: LinearMap,
    pub value: LinearMap,
    pub output: LinearMap,
    pub heads: usize,
}

impl AttentionParams {
    /// Independent seeded projections (query/key/value/output streams are
    /// derived from `seed` by role).
    pub fn seeded(dim: usize, heads: usize, seed: u64) -> Self {
        use crate::numerics::derived_seed;
        Self {
            query: LinearMap::seeded(dim, dim, derived_seed(seed, "attn.query")),
            key: LinearMap::seeded(dim, dim, derived_seed(seed, "attn.key")),
            value: LinearMap::seeded(dim, dim, derived_seed(seed, "attn.value")),
            output: LinearMap::seeded(dim, dim, derived_seed(seed, "attn.output")),
            heads,
        }
    }

    /// Identity projections everywhere; attention reduces to content-matching
    /// on the raw token space.
    pub fn identity(dim: usize) -> Self {
        Self {
            query: LinearMap::identity(dim),
            key: LinearMap::identity(dim),
            value: LinearMap::identity(dim),
            output: LinearMap::identity(dim),
            heads: 1,
        }
    }

    /// Identity projections with a gain on the query side. The gain sets the
    /// softmax sharpness of content matches.
    pub fn identity_with_gain(dim: usize, gain: f64) -> Self {
        Self {
            query: LinearMap::scaled_identity(dim, gain),
            ..Self::identity(dim)
        }
    }

    pub fn dim(&self) -> usize {
        self.query.d_out()
    }

    pub fn head_dim(&self) -> Result<usize> {
        let dim = self.dim();
        if self.heads == 0 || !dim.is_multiple_of(self.heads) {
            return Err(CoreError::Config(format!(
                "attention dim {dim} not divisible into {} heads",
                self.heads
            )));
        }
        Ok(dim / self.heads)
    }

    fn validate(&self, q_in: &Tensor, kv_in: &Tensor) -> Result<usize> {
        if q_in.rank() != 2 || kv_in.rank() != 2 {
            return Err(CoreError::ShapeMismatch {
                op: "cross_attention",
                left: q_in.shape().to_vec(),
                right: kv_in.shape().to_vec(),
            });
        }
        if kv_in.shape()[0] == 0 {
            return Err(CoreError::EmptyKeys);
        }
        if q_in.shape()[1] != self.query.d_in() || kv_in.shape()[1] != self.key.d_in() {
            return Err(CoreError::ShapeMismatch {
                op: "cross_attention",
                left: q_in.shape().to_vec(),
                right: vec![self.query.d_in(), self.key.d_in()],
            });
        }
        self.head_dim()
    }
}

fn head_slice(x: &Tensor, head: usize, head_dim: usize) -> Tensor {
    let rows = x.shape()[0];
    let dim = x.shape()[1];
    let mut out = Tensor::zeros(&[rows, head_dim]);
    for r in 0..rows {
        let src = &x.row(r)[head * head_dim..(head + 1) * head_dim];
        out.row_mut(r).copy_from_slice(src);
        let _ = dim;
    }
    out
}

fn rotate_if(x: Tensor, plan: Option<&RotationPlan>) -> Result<Tensor> {
    match plan {
        Some(p) => apply_rope(&x, p),
        None => Ok(x),
    }
}

/// Per-head attention logits `Q K^T / sqrt(head_dim)`, shape
/// `[heads, Nq, Nk]`. Exposed so invariance tests can inspect logits
/// directly.
pub fn attention_scores(
    q_in: &Tensor,
    kv_in: &Tensor,
    params: &AttentionParams,
    rope_q: Option<&RotationPlan>,
    rope_k: Option<&RotationPlan>,
) -> Result<Tensor> {
    let head_dim = params.validate(q_in, kv_in)?;
    if (rope_q.is_some() || rope_k.is_some()) && head_dim % 2 != 0 {
        return Err(CoreError::Config(format!(
            "rotation plans require an even head_dim, got {head_dim}"
        )));
    }
    let nq = q_in.shape()[0];
    let nk = kv_in.shape()[0];
    let q = params.query.apply(q_in)?;
    let k = params.key.apply(kv_in)?;
    let scale = 1.0 / (head_dim as f64).sqrt();

    let mut scores = Tensor::zeros(&[params.heads, nq, nk]);
    for h in 0..params.heads {
        let qh = rotate_if(head_slice(&q, h, head_dim), rope_q)?;
        let kh = rotate_if(head_slice(&k, h, head_dim), rope_k)?;
        for i in 0..nq {
            for j in 0..nk {
                let dot: f64 = qh.row(i).iter().zip(kh.row(j)).map(|(a, b)| a * b).sum();
                scores.set(&[h, i, j], dot * scale);
            }
        }
    }
    Ok(scores)
}

/// Scaled dot-product cross-attention: project, optionally rotate queries and
/// keys, softmax over keys, weighted value sum, output projection.
/// Output shape `[Nq, dim]`.
pub fn cross_attention(
    q_in: &Tensor,
    kv_in: &Tensor,
    params: &AttentionParams,
    rope_q: Option<&RotationPlan>,
    rope_k: Option<&RotationPlan>,
) -> Result<Tensor> {
    let head_dim = params.validate(q_in, kv_in)?;
    let nq = q_in.shape()[0];
    let nk = kv_in.shape()[0];
    let scores = attention_scores(q_in, kv_in, params, rope_q, rope_k)?;
    let v = params.value.apply(kv_in)?;

    let mut context = Tensor::zeros(&[nq, params.dim()]);
    for h in 0..params.heads {
        let vh = head_slice(&v, h, head_dim);
        // Softmax per query row over the keys of this head.
        let mut logits = Tensor::zeros(&[nq, nk]);
        for i in 0..nq {
            for j in 0..nk {
                logits.set(&[i, j], scores.at(&[h, i, j]));
            }
        }
        let weights = softmax_rows(&logits);
        for i in 0..nq {
            let wrow = weights.row(i);
            let crow = context.row_mut(i);
            for (j, &w) in wrow.iter().enumerate() {
                let vrow = vh.row(j);
                for (d, &vv) in vrow.iter().enumerate() {
                    crow[h * head_dim + d] += w * vv;
                }
            }
        }
    }
    let out = params.output.apply(&context)?;
    if !out.all_finite() {
        return Err(CoreError::NonFinite {
            op: "cross_attention",
        });
    }
    Ok(out)
}
