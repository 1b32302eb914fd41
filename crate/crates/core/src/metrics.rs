//! Evaluation: region similarity J, boundary accuracy F, their mean, and
//! multi-object OR aggregation.
//!
//! Boundaries are 1-px sets under 4-connectivity with out-of-frame treated as
//! background. A boundary pixel of one mask counts as matched when some
//! boundary pixel of the other mask lies within the tolerance radius
//! `r = ceil(tol_fraction * sqrt(H^2 + W^2))`; precision and recall are the
//! matched fractions of each side and F is their harmonic mean. This is the
//! dilated-overlap form of the contour measure; the test suite pins it
//! against an exhaustive pairwise-distance matcher on small grids.

use crate::error::{CoreError, Result};
use crate::mask::Mask;

/// Default boundary tolerance as a fraction of the image diagonal.
pub const DEFAULT_BOUNDARY_TOL: f64 = 0.008;

/// Per-frame binary masks of one object (or of an OR-aggregated object set).
#[derive(Debug, Clone)]
pub struct MaskSequence {
    pub masks: Vec<Mask>,
    pub frame_indices: Vec<usize>,
    /// Object id, or `None` for an aggregate.
    pub object_id: Option<usize>,
}

impl MaskSequence {
    pub fn new(masks: Vec<Mask>, object_id: Option<usize>) -> Self {
        let frame_indices = (0..masks.len()).collect();
        Self {
            masks,
            frame_indices,
            object_id,
        }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

/// Pixelwise logical OR across objects, frame by frame.
pub fn aggregate_or(per_object: &[MaskSequence]) -> Result<MaskSequence> {
    if per_object.is_empty() {
        return Err(CoreError::Config("aggregate_or needs at least one sequence".into()));
    }
    let t = per_object[0].len();
    for seq in per_object {
        if seq.len() != t
            || (t > 0 && !seq.masks[0].same_extents(&per_object[0].masks[0]))
        {
            return Err(CoreError::ShapeMismatch {
                op: "aggregate_or",
                left: vec![per_object[0].len()],
                right: vec![seq.len()],
            });
        }
    }
    let mut out = Vec::with_capacity(t);
    for ti in 0..t {
        let base = &per_object[0].masks[ti];
        let mut m = base.clone();
        for seq in &per_object[1..] {
            let other = &seq.masks[ti];
            for y in 0..m.height {
                for x in 0..m.width {
                    if other.get(x, y) {
                        m.set(x, y, true);
                    }
                }
            }
        }
        out.push(m);
    }
    Ok(MaskSequence::new(out, None))
}

/// Intersection over union; both-empty pairs score 1.
pub fn region_j(pred: &Mask, gt: &Mask) -> Result<f64> {
    if !pred.same_extents(gt) {
        return Err(CoreError::ShapeMismatch {
            op: "region_j",
            left: vec![pred.height, pred.width],
            right: vec![gt.height, gt.width],
        });
    }
    Ok(crate::losses::mask_iou(pred, gt))
}

/// 1-px boundary under 4-connectivity; frame edges count as background.
pub fn boundary_pixels(mask: &Mask) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..mask.height {
        for x in 0..mask.width {
            if !mask.get(x, y) {
                continue;
            }
            let edge = x == 0
                || y == 0
                || x == mask.width - 1
                || y == mask.height - 1
                || !mask.get(x - 1, y)
                || !mask.get(x + 1, y)
                || !mask.get(x, y - 1)
                || !mask.get(x, y + 1);
            if edge {
                out.push((x, y));
            }
        }
    }
    out
}

/// Tolerance radius in pixels for the given extents.
pub fn boundary_radius(width: usize, height: usize, tol_fraction: f64) -> usize {
    let diag = ((width * width + height * height) as f64).sqrt();
    (tol_fraction * diag).ceil() as usize
}

/// Boundary F-measure. Both boundaries empty scores 1; exactly one empty
/// scores 0.
pub fn boundary_f(pred: &Mask, gt: &Mask, tol_fraction: f64) -> Result<f64> {
    if !pred.same_extents(gt) {
        return Err(CoreError::ShapeMismatch {
            op: "boundary_f",
            left: vec![pred.height, pred.width],
            right: vec![gt.height, gt.width],
        });
    }
    let pb = boundary_pixels(pred);
    let gb = boundary_pixels(gt);
    match (pb.is_empty(), gb.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let r = boundary_radius(pred.width, pred.height, tol_fraction);
    let gt_dilated = dilate_set(&gb, pred.width, pred.height, r);
    let pred_dilated = dilate_set(&pb, pred.width, pred.height, r);
    let matched_pred = pb.iter().filter(|&&(x, y)| gt_dilated[y * pred.width + x]).count();
    let matched_gt = gb.iter().filter(|&&(x, y)| pred_dilated[y * pred.width + x]).count();
    let precision = matched_pred as f64 / pb.len() as f64;
    let recall = matched_gt as f64 / gb.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Pixels within Euclidean distance `r` of any point in `set`.
fn dilate_set(set: &[(usize, usize)], width: usize, height: usize, r: usize) -> Vec<bool> {
    let mut out = vec![false; width * height];
    let ri = r as isize;
    let r2 = (r * r) as isize;
    for &(x, y) in set {
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if dx * dx + dy * dy > r2 {
                    continue;
                }
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height {
                    out[ny as usize * width + nx as usize] = true;
                }
            }
        }
    }
    out
}

/// Dataset-level means in percentage points: `(J, F, (J+F)/2) * 100`.
/// Inputs are per-sequence means in `[0, 1]`.
pub fn jf_mean(per_sequence_j: &[f64], per_sequence_f: &[f64]) -> Result<(f64, f64, f64)> {
    if per_sequence_j.is_empty() || per_sequence_j.len() != per_sequence_f.len() {
        return Err(CoreError::Config(
            "jf_mean needs aligned, nonempty J and F lists".into(),
        ));
    }
    let n = per_sequence_j.len() as f64;
    let j = per_sequence_j.iter().sum::<f64>() / n * 100.0;
    let f = per_sequence_f.iter().sum::<f64>() / n * 100.0;
    Ok((j, f, (j + f) / 2.0))
}

/// Per-frame J and F of a predicted sequence against ground truth, averaged
/// over frames.
pub fn sequence_jf(pred: &MaskSequence, gt: &MaskSequence, tol_fraction: f64) -> Result<(f64, f64)> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(CoreError::ShapeMismatch {
            op: "sequence_jf",
            left: vec![pred.len()],
            right: vec![gt.len()],
        });
    }
    let mut j_sum = 0.0;
    let mut f_sum = 0.0;
    for (p, g) in pred.masks.iter().zip(&gt.masks) {
        j_sum += region_j(p, g)?;
        f_sum += boundary_f(p, g, tol_fraction)?;
    }
    let n = pred.len() as f64;
    Ok((j_sum / n, f_sum / n))
}
