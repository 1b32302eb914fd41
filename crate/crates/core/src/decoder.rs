//! Pluggable decoder boundary: a stub vision encoder producing per-frame
//! feature grids, a prompt-conditioned mask head, a propagation head for
//! memory-conditioned tokens, and auxiliary occlusion / IoU readouts.
//!
//! The prompted head is deliberately simple: per-pixel feature embeddings
//! score against each prompt token by a scaled dot product, the max over
//! tokens is the logit, and logits are bilinearly upsampled to the frame
//! size. The propagation head reads a single learned vector against
//! memory-conditioned tokens on the 8x8 grid. Both are thresholded at zero
//! by default.

use crate::conv::Conv2d;
use crate::error::{CoreError, Result};
use crate::mask::Mask;
use crate::numerics::{derived_seed, LinearMap, SeededRng, Tensor};

/// Stub segmentation-aware vision encoder: a fixed seeded conv pyramid from
/// RGB to a `C`-channel grid at half resolution.
#[derive(Debug, Clone)]
pub struct VisionEncoder {
    conv1: Conv2d,
    conv2: Conv2d,
    conv3: Conv2d,
    pub channels: usize,
}

impl VisionEncoder {
    pub fn seeded(channels: usize, seed: u64) -> Self {
        // Replicate padding keeps uniform regions uniform to the border, so
        // the frame edge carries no spurious feature content.
        Self {
            conv1: Conv2d::seeded(3, 8, 3, 2, 1, derived_seed(seed, "encoder.conv1"))
                .with_replicate_pad(),
            conv2: Conv2d::seeded(8, 8, 3, 1, 1, derived_seed(seed, "encoder.conv2"))
                .with_replicate_pad(),
            conv3: Conv2d::seeded(8, channels, 1, 1, 0, derived_seed(seed, "encoder.conv3")),
            channels,
        }
    }

    /// `[H, W, 3]` frame to `[H/2, W/2, C]` features. Extents must halve to a
    /// multiple of 8 so the tokenizer grid works out.
    pub fn encode(&self, frame: &Tensor) -> Result<Tensor> {
        if frame.rank() != 3 || frame.shape()[2] != 3 {
            return Err(CoreError::ShapeMismatch {
                op: "VisionEncoder::encode",
                left: frame.shape().to_vec(),
                right: vec![3],
            });
        }
        let (h, w) = (frame.shape()[0], frame.shape()[1]);
        if h % 16 != 0 || w % 16 != 0 {
            return Err(CoreError::ShapeMismatch {
                op: "VisionEncoder::encode",
                left: vec![h, w],
                right: vec![16, 16],
            });
        }
        let x = self.conv1.apply(frame)?;
        let x = self.conv2.apply(&x)?;
        self.conv3.apply(&x)
    }

    /// Feature vector of a uniform-color region's interior: encode a small
    /// constant canvas and read the center cell. Used to center projections
    /// on the canonical background.
    pub fn uniform_feature(&self, rgb: [f64; 3]) -> Result<Vec<f64>> {
        let mut canvas = Tensor::zeros(&[16, 16, 3]);
        for y in 0..16 {
            for x in 0..16 {
                for c in 0..3 {
                    canvas.set(&[y, x, c], rgb[c]);
                }
            }
        }
        let feat = self.encode(&canvas)?;
        let mut out = Vec::with_capacity(self.channels);
        for c in 0..self.channels {
            out.push(feat.at(&[4, 4, c]));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct DecoderOutput {
    /// Mask logits at frame resolution.
    pub logits: Tensor,
    pub occlusion_logit: f64,
    /// In [0, 1] after the logistic squash.
    pub predicted_iou: f64,
}

/// Reference mask head plus auxiliary readouts.
#[derive(Debug, Clone)]
pub struct MaskHead {
    /// Per-pixel feature projection C -> D (bias carries the background
    /// centering when the pipeline installs it).
    pub pixel_proj: LinearMap,
    pub occ_readout: Vec<f64>,
    pub iou_readout: Vec<f64>,
    /// Readout over memory-conditioned tokens (`d_mem` long). The default
    /// reads the occupancy channel.
    pub propagate_readout: Vec<f64>,
    pub threshold: f64,
    pub out_height: usize,
    pub out_width: usize,
}

impl MaskHead {
    pub fn seeded(
        channels: usize,
        d: usize,
        d_mem: usize,
        seed: u64,
        threshold: f64,
        out_height: usize,
        out_width: usize,
    ) -> Self {
        let mut occ_rng = SeededRng::derive(seed, "head.occ");
        let mut iou_rng = SeededRng::derive(seed, "head.iou");
        let bound = 1.0 / (d as f64).sqrt();
        let occ_readout = (0..d).map(|_| occ_rng.uniform(-bound, bound)).collect();
        let iou_readout = (0..d).map(|_| iou_rng.uniform(-bound, bound)).collect();
        let mut propagate_readout = vec![0.0; d_mem];
        propagate_readout[d_mem - 1] = (d_mem as f64).sqrt();
        Self {
            pixel_proj: LinearMap::seeded(d, channels, derived_seed(seed, "head.pixel_proj")),
            occ_readout,
            iou_readout,
            propagate_readout,
            threshold,
            out_height,
            out_width,
        }
    }

    /// Project a `[Hf, Wf, C]` feature grid to `[Hf, Wf, D]` embeddings.
    pub fn project_pixels(&self, features: &Tensor) -> Result<Tensor> {
        self.pixel_proj.apply(features)
    }

    /// Prompted decode over projected pixel embeddings (`[Hf, Wf, D]`) and a
    /// frame prompt (`[N, 1, D]`): per-pixel max over prompt tokens of the
    /// scaled dot product, upsampled to frame size.
    pub fn decode_prompted(&self, pixel_embed: &Tensor, prompt: &Tensor) -> Result<DecoderOutput> {
        if pixel_embed.rank() != 3 || prompt.rank() != 3 || prompt.shape()[1] != 1 {
            return Err(CoreError::ShapeMismatch {
                op: "decode_prompted",
                left: pixel_embed.shape().to_vec(),
                right: prompt.shape().to_vec(),
            });
        }
        let d = pixel_embed.shape()[2];
        if prompt.shape()[2] != d {
            return Err(CoreError::ShapeMismatch {
                op: "decode_prompted",
                left: vec![d],
                right: vec![prompt.shape()[2]],
            });
        }
        let (hf, wf) = (pixel_embed.shape()[0], pixel_embed.shape()[1]);
        let n = prompt.shape()[0];
        let scale = 1.0 / (d as f64).sqrt();
        let mut grid = Tensor::zeros(&[hf, wf]);
        let mut mean = vec![0.0; d];
        for y in 0..hf {
            for x in 0..wf {
                let base = (y * wf + x) * d;
                let feat = &pixel_embed.data()[base..base + d];
                for (m, f) in mean.iter_mut().zip(feat) {
                    *m += f;
                }
                let mut best = f64::NEG_INFINITY;
                for i in 0..n {
                    let mut dot = 0.0;
                    for c in 0..d {
                        dot += feat[c] * prompt.at(&[i, 0, c]);
                    }
                    best = best.max(dot * scale);
                }
                grid.set(&[y, x], best);
            }
        }
        let inv = 1.0 / (hf * wf) as f64;
        for m in &mut mean {
            *m *= inv;
        }
        let occlusion_logit: f64 = mean.iter().zip(&self.occ_readout).map(|(a, b)| a * b).sum();
        let iou_raw: f64 = mean.iter().zip(&self.iou_readout).map(|(a, b)| a * b).sum();
        let logits = upsample_bilinear(&grid, self.out_height, self.out_width);
        Ok(DecoderOutput {
            logits,
            occlusion_logit,
            predicted_iou: logistic(iou_raw),
        })
    }

    /// Propagation decode over memory-conditioned tokens (`[64, d_mem]`, an
    /// 8x8 grid): the learned readout scores each token, upsampled to frame
    /// size. Occlusion and IoU readouts consume the feature part of the mean
    /// token.
    pub fn decode_propagated(&self, conditioned: &Tensor) -> Result<DecoderOutput> {
        if conditioned.rank() != 2
            || conditioned.shape()[0] != 64
            || conditioned.shape()[1] != self.propagate_readout.len()
        {
            return Err(CoreError::ShapeMismatch {
                op: "decode_propagated",
                left: conditioned.shape().to_vec(),
                right: vec![64, self.propagate_readout.len()],
            });
        }
        let d_mem = conditioned.shape()[1];
        let scale = 1.0 / (d_mem as f64).sqrt();
        let mut grid = Tensor::zeros(&[8, 8]);
        let mut mean = vec![0.0; d_mem];
        for cell in 0..64 {
            let row = conditioned.row(cell);
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            let dot: f64 = row
                .iter()
                .zip(&self.propagate_readout)
                .map(|(a, b)| a * b)
                .sum();
            grid.set(&[cell / 8, cell % 8], dot * scale);
        }
        for m in &mut mean {
            *m /= 64.0;
        }
        let d = self.occ_readout.len().min(d_mem);
        let occlusion_logit: f64 = mean[..d]
            .iter()
            .zip(&self.occ_readout)
            .map(|(a, b)| a * b)
            .sum();
        let iou_raw: f64 = mean[..d]
            .iter()
            .zip(&self.iou_readout)
            .map(|(a, b)| a * b)
            .sum();
        let logits = upsample_bilinear(&grid, self.out_height, self.out_width);
        Ok(DecoderOutput {
            logits,
            occlusion_logit,
            predicted_iou: logistic(iou_raw),
        })
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `mask[y, x] = logits[y, x] > threshold` (strictly greater).
pub fn binarize(logits: &Tensor, threshold: f64) -> Mask {
    assert_eq!(logits.rank(), 2);
    let (h, w) = (logits.shape()[0], logits.shape()[1]);
    Mask::from_fn(w, h, |x, y| logits.at(&[y, x]) > threshold)
}

/// Bilinear upsampling with half-pixel centers; identity when extents match.
pub fn upsample_bilinear(grid: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    assert_eq!(grid.rank(), 2);
    let (h, w) = (grid.shape()[0], grid.shape()[1]);
    if h == out_h && w == out_w {
        return grid.clone();
    }
    let mut out = Tensor::zeros(&[out_h, out_w]);
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    for oy in 0..out_h {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(h - 1);
        let dy = fy - y0 as f64;
        for ox in 0..out_w {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let dx = fx - x0 as f64;
            let v = grid.at(&[y0, x0]) * (1.0 - dy) * (1.0 - dx)
                + grid.at(&[y0, x1]) * (1.0 - dy) * dx
                + grid.at(&[y1, x0]) * dy * (1.0 - dx)
                + grid.at(&[y1, x1]) * dy * dx;
            out.set(&[oy, ox], v);
        }
    }
    out
}
