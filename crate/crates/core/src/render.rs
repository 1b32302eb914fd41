//! Overlay rendering: alpha-blend a mask tint over a frame.

use crate::error::{CoreError, Result};
use crate::mask::Mask;
use crate::numerics::Tensor;

/// Blend `tint` over the masked pixels at the given alpha; unmasked pixels
/// pass through unchanged.
pub fn blend_overlay(frame: &Tensor, mask: &Mask, tint: [f64; 3], alpha: f64) -> Result<Tensor> {
    if frame.rank() != 3
        || frame.shape()[2] != 3
        || frame.shape()[0] != mask.height
        || frame.shape()[1] != mask.width
    {
        return Err(CoreError::ShapeMismatch {
            op: "blend_overlay",
            left: frame.shape().to_vec(),
            right: vec![mask.height, mask.width, 3],
        });
    }
    let mut out = frame.clone();
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                for c in 0..3 {
                    let v = frame.at(&[y, x, c]);
                    out.set(&[y, x, c], (1.0 - alpha) * v + alpha * tint[c]);
                }
            }
        }
    }
    Ok(out)
}
