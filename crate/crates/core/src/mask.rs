//! Binary masks and the P5/P6 netpbm formats used on disk.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::numerics::Tensor;

/// Binary mask over an `height x width` pixel grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![1; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.data[y * width + x] = 1;
                }
            }
        }
        m
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v as u8;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_blank(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn same_extents(&self, other: &Mask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Fraction of set pixels inside each `factor x factor` block.
    pub fn occupancy_grid(&self, factor: usize) -> Result<Tensor> {
        if !self.width.is_multiple_of(factor) || !self.height.is_multiple_of(factor) {
            return Err(CoreError::ShapeMismatch {
                op: "occupancy_grid",
                left: vec![self.height, self.width],
                right: vec![factor],
            });
        }
        let oh = self.height / factor;
        let ow = self.width / factor;
        let inv = 1.0 / (factor * factor) as f64;
        let mut out = Tensor::zeros(&[oh, ow]);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    let v = out.at(&[y / factor, x / factor]) + inv;
                    out.set(&[y / factor, x / factor], v);
                }
            }
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// netpbm io
// ---------------------------------------------------------------------------

/// P5 with 0/255 payload.
pub fn write_pgm(path: &Path, mask: &Mask) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", mask.width, mask.height)?;
    let bytes: Vec<u8> = mask.data.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<Mask> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let (magic, rest) = split_token(&bytes)?;
    if magic != b"P5" {
        return Err(CoreError::Parse(format!(
            "{}: not a P5 pgm",
            path.display()
        )));
    }
    let (w, rest) = parse_number(rest)?;
    let (h, rest) = parse_number(rest)?;
    let (maxv, rest) = parse_number(rest)?;
    if maxv != 255 {
        return Err(CoreError::Parse("pgm maxval must be 255".into()));
    }
    if rest.len() < w * h {
        return Err(CoreError::Parse("pgm payload truncated".into()));
    }
    let mut mask = Mask::empty(w, h);
    for (i, &b) in rest[..w * h].iter().enumerate() {
        mask.data[i] = (b >= 128) as u8;
    }
    Ok(mask)
}

/// P6 from an `[H, W, 3]` tensor with values in `[0, 1]`.
pub fn write_ppm(path: &Path, frame: &Tensor) -> Result<()> {
    if frame.rank() != 3 || frame.shape()[2] != 3 {
        return Err(CoreError::ShapeMismatch {
            op: "write_ppm",
            left: frame.shape().to_vec(),
            right: vec![3],
        });
    }
    let (h, w) = (frame.shape()[0], frame.shape()[1]);
    let mut f = std::fs::File::create(path)?;
    write!(f, "P6\n{w} {h}\n255\n")?;
    let bytes: Vec<u8> = frame
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let (magic, rest) = split_token(&bytes)?;
    if magic != b"P6" {
        return Err(CoreError::Parse(format!(
            "{}: not a P6 ppm",
            path.display()
        )));
    }
    let (w, rest) = parse_number(rest)?;
    let (h, rest) = parse_number(rest)?;
    let (maxv, rest) = parse_number(rest)?;
    if maxv != 255 {
        return Err(CoreError::Parse("ppm maxval must be 255".into()));
    }
    if rest.len() < w * h * 3 {
        return Err(CoreError::Parse("ppm payload truncated".into()));
    }
    let data: Vec<f64> = rest[..w * h * 3].iter().map(|&b| b as f64 / 255.0).collect();
    Tensor::new(vec![h, w, 3], data)
}

fn split_token(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    let start = bytes
        .iter()
        .position(|b| !b.is_ascii_whitespace())
        .ok_or_else(|| CoreError::Parse("netpbm: empty file".into()))?;
    let end = bytes[start..]
        .iter()
        .position(|b| b.is_ascii_whitespace())
        .map(|p| start + p)
        .unwrap_or(bytes.len());
    Ok((&bytes[start..end], &bytes[end..]))
}

fn parse_number(bytes: &[u8]) -> Result<(usize, &[u8])> {
    let (tok, rest) = split_token(bytes)?;
    let s = std::str::from_utf8(tok).map_err(|_| CoreError::Parse("netpbm header".into()))?;
    let v = s
        .parse::<usize>()
        .map_err(|_| CoreError::Parse(format!("netpbm header field {s:?}")))?;
    // Exactly one whitespace byte separates the last header field from the
    // payload; skip it here so callers see raw pixel bytes.
    Ok((v, &rest[1..]))
}
