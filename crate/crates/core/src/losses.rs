//! Five-term training objective with closed-form gradients.
//!
//! Each loss returns `(value, gradient)` where the gradient is taken with
//! respect to the logits (or the predicted scalar for the IoU term). All of
//! them are checked against central finite differences in the test suite.

use crate::error::{CoreError, Result};
use crate::mask::Mask;
use crate::numerics::Tensor;

/// Weights of the composite objective. Defaults follow the training recipe:
/// bce/dice/token at 1.0, occlusion and IoU at 0.05.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub bce: f64,
    pub dice: f64,
    pub token: f64,
    pub occ: f64,
    pub iou: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            bce: 1.0,
            dice: 1.0,
            token: 1.0,
            occ: 0.05,
            iou: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LossComponents {
    pub bce: f64,
    pub dice: f64,
    pub token: f64,
    pub occ: f64,
    pub iou: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Stable `-[g ln(sigma(z)) + (1-g) ln(1-sigma(z))]` for one logit.
fn bce_term(z: f64, g: f64) -> f64 {
    // max(z,0) - z*g + ln(1 + e^{-|z|})
    z.max(0.0) - z * g + (-z.abs()).exp().ln_1p()
}

fn check_same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(CoreError::ShapeMismatch {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// Mean binary cross-entropy over pixels, gradient `(sigma(z) - g) / HW`.
pub fn bce_loss(logits: &Tensor, gt: &Tensor) -> Result<(f64, Tensor)> {
    check_same_shape("bce_loss", logits, gt)?;
    let n = logits.len() as f64;
    let mut value = 0.0;
    let mut grad = Tensor::zeros(logits.shape());
    for (i, (&z, &g)) in logits.data().iter().zip(gt.data()).enumerate() {
        value += bce_term(z, g);
        grad.data_mut()[i] = (sigmoid(z) - g) / n;
    }
    Ok((value / n, grad))
}

/// Soft dice on `p = sigma(z)`: `1 - (2*sum(pg) + eps) / (sum(p) + sum(g) + eps)`.
/// Gradient via the quotient rule chained through the sigmoid.
pub fn dice_loss(logits: &Tensor, gt: &Tensor, eps: f64) -> Result<(f64, Tensor)> {
    check_same_shape("dice_loss", logits, gt)?;
    let p: Vec<f64> = logits.data().iter().map(|&z| sigmoid(z)).collect();
    let inter: f64 = p.iter().zip(gt.data()).map(|(a, b)| a * b).sum();
    let sum_p: f64 = p.iter().sum();
    let sum_g: f64 = gt.data().iter().sum();
    let num = 2.0 * inter + eps;
    let den = sum_p + sum_g + eps;
    let value = 1.0 - num / den;
    let mut grad = Tensor::zeros(logits.shape());
    for i in 0..p.len() {
        let g = gt.data()[i];
        // d(value)/dp_i = -(2 g den - num) / den^2
        let dv_dp = -(2.0 * g * den - num) / (den * den);
        let dp_dz = p[i] * (1.0 - p[i]);
        grad.data_mut()[i] = dv_dp * dp_dz;
    }
    Ok((value, grad))
}

/// Mean token cross-entropy over `[L, V]` logits against integer targets.
pub fn token_ce(token_logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    if token_logits.rank() != 2 || token_logits.shape()[0] != targets.len() {
        return Err(CoreError::ShapeMismatch {
            op: "token_ce",
            left: token_logits.shape().to_vec(),
            right: vec![targets.len()],
        });
    }
    let (l, v) = (token_logits.shape()[0], token_logits.shape()[1]);
    for &t in targets {
        if t >= v {
            return Err(CoreError::IndexOutOfRange {
                what: "token id",
                index: t,
                len: v,
            });
        }
    }
    let probs = crate::numerics::softmax_rows(token_logits);
    let mut value = 0.0;
    let mut grad = Tensor::zeros(&[l, v]);
    for (i, &t) in targets.iter().enumerate() {
        value -= probs.at(&[i, t]).ln();
        for j in 0..v {
            let onehot = if j == t { 1.0 } else { 0.0 };
            grad.set(&[i, j], (probs.at(&[i, j]) - onehot) / l as f64);
        }
    }
    Ok((value / l as f64, grad))
}

/// Binary cross-entropy of a visibility logit against `gt_visible`
/// (1 = visible, i.e. the ground-truth mask is nonempty).
pub fn occ_loss(occ_logit: f64, gt_visible: bool) -> (f64, f64) {
    let g = gt_visible as u8 as f64;
    (bce_term(occ_logit, g), sigmoid(occ_logit) - g)
}

/// Realized IoU of two masks, with the both-empty convention of 1.
pub fn mask_iou(pred: &Mask, gt: &Mask) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (a, b) in pred.pixels().iter().zip(gt.pixels()) {
        let (a, b) = (*a != 0, *b != 0);
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// L1 calibration of the predicted-IoU head against the realized IoU.
/// Returns the subgradient with respect to `predicted_iou` (sign; 0 at the
/// kink).
pub fn iou_loss(predicted_iou: f64, pred_mask: &Mask, gt_mask: &Mask) -> (f64, f64) {
    let actual = mask_iou(pred_mask, gt_mask);
    let diff = predicted_iou - actual;
    let sub = if diff == 0.0 { 0.0 } else { diff.signum() };
    (diff.abs(), sub)
}

/// Weighted sum of the five components.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> f64 {
    w.bce * c.bce + w.dice * c.dice + w.token * c.token + w.occ * c.occ + w.iou * c.iou
}
