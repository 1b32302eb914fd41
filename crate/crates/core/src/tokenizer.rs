//! Frame-aware video tokenizer: three stride-2 convolutions downsample each
//! frame's feature grid 8x, the 8x8 result is flattened into 64 spatial
//! tokens per frame and projected to D dimensions.
//!
//! Token order is row-major within the 8x8 grid and frame-major overall, so
//! merged token `t*64 + h*8 + w` carries position `(t, h, w)`.

use std::path::Path;

use crate::conv::Conv2d;
use crate::error::{CoreError, Result};
use crate::numerics::{derived_seed, LinearMap, Tensor};

/// Per-frame feature grids from the vision encoder, all `[H, W, C]` with the
/// same extents. The reference configuration is 64x64x256 with at most 32
/// frames.
#[derive(Debug, Clone)]
pub struct FeatureVolume {
    frames: Vec<Tensor>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl FeatureVolume {
    pub fn new(frames: Vec<Tensor>) -> Result<Self> {
        if frames.is_empty() || frames.len() > 32 {
            return Err(CoreError::Config(format!(
                "feature volume must hold 1..=32 frames, got {}",
                frames.len()
            )));
        }
        let shape = frames[0].shape().to_vec();
        if shape.len() != 3 {
            return Err(CoreError::ShapeMismatch {
                op: "FeatureVolume::new",
                left: shape,
                right: vec![3],
            });
        }
        for f in &frames {
            if f.shape() != shape.as_slice() {
                return Err(CoreError::ShapeMismatch {
                    op: "FeatureVolume::new",
                    left: shape,
                    right: f.shape().to_vec(),
                });
            }
        }
        Ok(Self {
            height: shape[0],
            width: shape[1],
            channels: shape[2],
            frames,
        })
    }

    pub fn t_seg(&self) -> usize {
        self.frames.len()
    }

    pub fn frame(&self, t: usize) -> &Tensor {
        &self.frames[t]
    }

    /// Read from the tensor file format with logical shape `[H, W, T, C]`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let t = crate::numerics::read_tensor_file(path)?;
        if t.rank() != 4 {
            return Err(CoreError::ShapeMismatch {
                op: "FeatureVolume::from_file",
                left: t.shape().to_vec(),
                right: vec![4],
            });
        }
        let (h, w, tt, c) = (t.shape()[0], t.shape()[1], t.shape()[2], t.shape()[3]);
        let mut frames = vec![Tensor::zeros(&[h, w, c]); tt];
        for y in 0..h {
            for x in 0..w {
                for ti in 0..tt {
                    for ch in 0..c {
                        let v = t.at(&[y, x, ti, ch]);
                        frames[ti].set(&[y, x, ch], v);
                    }
                }
            }
        }
        Self::new(frames)
    }

    /// Write in the tensor file format with logical shape `[H, W, T, C]`.
    pub fn to_file(&self, path: &Path) -> Result<()> {
        let (h, w, tt, c) = (self.height, self.width, self.t_seg(), self.channels);
        let mut out = Tensor::zeros(&[h, w, tt, c]);
        for (ti, frame) in self.frames.iter().enumerate() {
            for y in 0..h {
                for x in 0..w {
                    for ch in 0..c {
                        out.set(&[y, x, ti, ch], frame.at(&[y, x, ch]));
                    }
                }
            }
        }
        crate::numerics::write_tensor_file(path, &out)
    }
}

/// Tokenizer output: `[T, 64, D]` tokens plus a `(t, h, w)` triple per merged
/// token.
#[derive(Debug, Clone)]
pub struct TokenSequence {
    pub tokens: Tensor,
    pub positions: Vec<(usize, usize, usize)>,
}

impl TokenSequence {
    pub fn t_seg(&self) -> usize {
        self.tokens.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.tokens.shape()[2]
    }

    fn per_frame(&self) -> usize {
        self.tokens.shape()[1]
    }

    /// Merged `[(T*64), D]` view used as attention keys/values.
    pub fn merged(&self) -> Tensor {
        let rows = self.t_seg() * self.per_frame();
        let d = self.dim();
        self.tokens
            .clone()
            .reshape(vec![rows, d])
            .expect("merge reshape")
    }

    /// Tokens of one frame, `[64, D]`.
    pub fn frame_tokens(&self, t: usize) -> Result<Tensor> {
        if t >= self.t_seg() {
            return Err(CoreError::IndexOutOfRange {
                what: "frame",
                index: t,
                len: self.t_seg(),
            });
        }
        let per = self.per_frame();
        let d = self.dim();
        let start = t * per * d;
        Tensor::new(
            vec![per, d],
            self.tokens.data()[start..start + per * d].to_vec(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
}

/// How the three downsampling convolutions are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvInit {
    /// Box-average kernels routed channel-to-channel plus seeded jitter, so a
    /// downsampled cell stays comparable to the pixels it covers. Uses
    /// replicate padding so uniform fields stay uniform to the grid border.
    Smoothing,
    /// Plain seeded uniform init with zero padding.
    Random,
}

#[derive(Debug, Clone)]
pub struct Tokenizer {
    convs: Vec<Conv2d>,
    pub projection: LinearMap,
    pub activation: Activation,
    pub channels: usize,
}

const SMOOTHING_JITTER: f64 = 0.01;

impl Tokenizer {
    pub fn new(channels: usize, d: usize, seed: u64, activation: Activation, init: ConvInit) -> Self {
        let convs = (0..3)
            .map(|i| {
                let s = derived_seed(seed, &format!("tokenizer.conv{i}"));
                match init {
                    ConvInit::Smoothing => {
                        Conv2d::smoothing(channels, 3, 2, 1, SMOOTHING_JITTER, s)
                            .with_replicate_pad()
                    }
                    ConvInit::Random => Conv2d::seeded(channels, channels, 3, 2, 1, s),
                }
            })
            .collect();
        let projection = LinearMap::seeded(d, channels, derived_seed(seed, "tokenizer.proj"));
        Self {
            convs,
            projection,
            activation,
            channels,
        }
    }

    pub fn dim(&self) -> usize {
        self.projection.d_out()
    }

    /// Three-stage 8x reduction of one `[H, W, C]` frame.
    pub fn downsample_frame(&self, frame: &Tensor) -> Result<Tensor> {
        if frame.rank() != 3
            || !frame.shape()[0].is_multiple_of(8)
            || !frame.shape()[1].is_multiple_of(8)
            || frame.shape()[2] != self.channels
        {
            return Err(CoreError::ShapeMismatch {
                op: "downsample_frame",
                left: frame.shape().to_vec(),
                right: vec![8, 8, self.channels],
            });
        }
        let mut x = frame.clone();
        for conv in &self.convs {
            x = conv.apply(&x)?;
            if self.activation == Activation::Relu {
                for v in x.data_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
        }
        Ok(x)
    }

    /// Whole-volume downsampling, output shape `[H/8, W/8, T, C]`.
    pub fn downsample8(&self, volume: &FeatureVolume) -> Result<Tensor> {
        let t_seg = volume.t_seg();
        let mut per_frame = Vec::with_capacity(t_seg);
        for t in 0..t_seg {
            per_frame.push(self.downsample_frame(volume.frame(t))?);
        }
        let (oh, ow, c) = (
            per_frame[0].shape()[0],
            per_frame[0].shape()[1],
            per_frame[0].shape()[2],
        );
        let mut out = Tensor::zeros(&[oh, ow, t_seg, c]);
        for (t, f) in per_frame.iter().enumerate() {
            for y in 0..oh {
                for x in 0..ow {
                    for ch in 0..c {
                        out.set(&[y, x, t, ch], f.at(&[y, x, ch]));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Flatten an `[8, 8, T, C]` grid into `[T, 64, D]` tokens with the
    /// documented (t, h, w) enumeration.
    pub fn flatten_project(&self, down: &Tensor) -> Result<TokenSequence> {
        if down.rank() != 4 || down.shape()[0] != 8 || down.shape()[1] != 8 {
            return Err(CoreError::ShapeMismatch {
                op: "flatten_project",
                left: down.shape().to_vec(),
                right: vec![8, 8, 0, self.projection.d_in()],
            });
        }
        let t_seg = down.shape()[2];
        let c = down.shape()[3];
        if c != self.projection.d_in() {
            return Err(CoreError::ShapeMismatch {
                op: "flatten_project",
                left: vec![c],
                right: vec![self.projection.d_in()],
            });
        }
        let mut cells = Tensor::zeros(&[t_seg * 64, c]);
        let mut positions = Vec::with_capacity(t_seg * 64);
        for t in 0..t_seg {
            for h in 0..8 {
                for w in 0..8 {
                    positions.push((t, h, w));
                    let row = cells.row_mut((t * 8 + h) * 8 + w);
                    for ch in 0..c {
                        row[ch] = down.at(&[h, w, t, ch]);
                    }
                }
            }
        }
        let projected = self.projection.apply(&cells)?;
        let d = self.dim();
        Ok(TokenSequence {
            tokens: projected.reshape(vec![t_seg, 64, d])?,
            positions,
        })
    }

    /// Downsample + flatten + project for a whole volume.
    pub fn tokenize(&self, volume: &FeatureVolume) -> Result<TokenSequence> {
        let down = self.downsample8(volume)?;
        self.flatten_project(&down)
    }

    /// Per-frame fast path: `[64, D]` tokens for one frame, bit-identical to
    /// the corresponding slice of `tokenize`.
    pub fn tokenize_frame(&self, frame: &Tensor) -> Result<Tensor> {
        let down = self.downsample_frame(frame)?;
        let (oh, ow, c) = (down.shape()[0], down.shape()[1], down.shape()[2]);
        let mut cells = Tensor::zeros(&[oh * ow, c]);
        for h in 0..oh {
            for w in 0..ow {
                let row = cells.row_mut(h * ow + w);
                for ch in 0..c {
                    row[ch] = down.at(&[h, w, ch]);
                }
            }
        }
        self.projection.apply(&cells)
    }
}
