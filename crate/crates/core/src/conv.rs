//! 2-D convolution over channels-last `[H, W, C]` feature grids.

use crate::error::{CoreError, Result};
use crate::numerics::{SeededRng, Tensor};

/// Border handling. `Replicate` clamps reads to the nearest edge pixel, so a
/// uniform field stays uniform all the way to the border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    Zero,
    Replicate,
}

/// Dense 2-D convolution. Weights are laid out `[c_out][ky][kx][c_in]` so the
/// inner accumulation runs over contiguous input channels.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub pad_mode: PadMode,
}

impl Conv2d {
    /// Seeded init, uniform in `±1/sqrt(k*k*c_in)`, zero bias.
    pub fn seeded(c_in: usize, c_out: usize, kernel: usize, stride: usize, pad: usize, seed: u64) -> Self {
        let fan_in = kernel * kernel * c_in;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut rng = SeededRng::new(seed);
        let weight = (0..c_out * kernel * kernel * c_in)
            .map(|_| rng.uniform(-bound, bound))
            .collect();
        Self {
            weight,
            bias: vec![0.0; c_out],
            c_in,
            c_out,
            kernel,
            stride,
            pad,
            pad_mode: PadMode::Zero,
        }
    }

    /// Channel-preserving smoothing kernel: each output channel is the 3x3
    /// (or kxk) box average of the same input channel, plus seeded jitter.
    /// Keeps downsampled cells in the same feature space as the per-pixel
    /// grid, so content comparisons across scales stay meaningful.
    pub fn smoothing(channels: usize, kernel: usize, stride: usize, pad: usize, jitter: f64, seed: u64) -> Self {
        let mut conv = Self::seeded(channels, channels, kernel, stride, pad, seed);
        let taps = (kernel * kernel) as f64;
        let mut rng = SeededRng::new(seed);
        for (idx, w) in conv.weight.iter_mut().enumerate() {
            let co = idx / (kernel * kernel * channels);
            let ci = idx % channels;
            let base = if co == ci { 1.0 / taps } else { 0.0 };
            *w = base + jitter * rng.uniform(-1.0, 1.0);
        }
        conv
    }

    pub fn from_weights(
        weight: Vec<f64>,
        bias: Vec<f64>,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        assert_eq!(weight.len(), c_out * kernel * kernel * c_in);
        assert_eq!(bias.len(), c_out);
        Self {
            weight,
            bias,
            c_in,
            c_out,
            kernel,
            stride,
            pad,
            pad_mode: PadMode::Zero,
        }
    }

    pub fn with_replicate_pad(mut self) -> Self {
        self.pad_mode = PadMode::Replicate;
        self
    }

    pub fn output_extent(&self, input: usize) -> usize {
        (input + 2 * self.pad - self.kernel) / self.stride + 1
    }

    /// Apply to an `[H, W, C_in]` grid, producing `[H', W', C_out]`.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 3 || x.shape()[2] != self.c_in {
            return Err(CoreError::ShapeMismatch {
                op: "Conv2d::apply",
                left: x.shape().to_vec(),
                right: vec![self.kernel, self.kernel, self.c_in],
            });
        }
        let (h, w) = (x.shape()[0], x.shape()[1]);
        if h + 2 * self.pad < self.kernel || w + 2 * self.pad < self.kernel {
            return Err(CoreError::ShapeMismatch {
                op: "Conv2d::apply",
                left: x.shape().to_vec(),
                right: vec![self.kernel, self.kernel],
            });
        }
        let oh = self.output_extent(h);
        let ow = self.output_extent(w);
        let mut out = vec![0.0; oh * ow * self.c_out];
        let kk = self.kernel;
        let cin = self.c_in;
        let data = x.data();
        for oy in 0..oh {
            for ox in 0..ow {
                let obase = (oy * ow + ox) * self.c_out;
                for ky in 0..kk {
                    let mut iy = (oy * self.stride + ky) as isize - self.pad as isize;
                    if iy < 0 || iy >= h as isize {
                        match self.pad_mode {
                            PadMode::Zero => continue,
                            PadMode::Replicate => iy = iy.clamp(0, h as isize - 1),
                        }
                    }
                    for kx in 0..kk {
                        let mut ix = (ox * self.stride + kx) as isize - self.pad as isize;
                        if ix < 0 || ix >= w as isize {
                            match self.pad_mode {
                                PadMode::Zero => continue,
                                PadMode::Replicate => ix = ix.clamp(0, w as isize - 1),
                            }
                        }
                        let irow = &data[((iy as usize) * w + ix as usize) * cin..][..cin];
                        for co in 0..self.c_out {
                            let wrow =
                                &self.weight[((co * kk + ky) * kk + kx) * cin..][..cin];
                            let mut acc = 0.0;
                            for (wv, xv) in wrow.iter().zip(irow) {
                                acc += wv * xv;
                            }
                            out[obase + co] += acc;
                        }
                    }
                }
                for co in 0..self.c_out {
                    out[obase + co] += self.bias[co];
                }
            }
        }
        Tensor::new(vec![oh, ow, self.c_out], out)
    }
}

/// Integer-factor area-mean downsampling of an `[H, W, C]` grid.
pub fn area_mean_downsample(x: &Tensor, factor: usize) -> Result<Tensor> {
    if x.rank() != 3 || !x.shape()[0].is_multiple_of(factor) || !x.shape()[1].is_multiple_of(factor) {
        return Err(CoreError::ShapeMismatch {
            op: "area_mean_downsample",
            left: x.shape().to_vec(),
            right: vec![factor, factor],
        });
    }
    let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (oh, ow) = (h / factor, w / factor);
    let inv = 1.0 / (factor * factor) as f64;
    let mut out = vec![0.0; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for dy in 0..factor {
                for dx in 0..factor {
                    let iy = oy * factor + dy;
                    let ix = ox * factor + dx;
                    let irow = &x.data()[(iy * w + ix) * c..][..c];
                    let orow = &mut out[(oy * ow + ox) * c..][..c];
                    for (o, v) in orow.iter_mut().zip(irow) {
                        *o += v;
                    }
                }
            }
        }
    }
    for v in &mut out {
        *v *= inv;
    }
    Tensor::new(vec![oh, ow, c], out)
}
