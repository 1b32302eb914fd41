//! Dense f64 tensor primitives: row-major tensors, seeded generators,
//! linear maps, matmul and row softmax, plus the on-disk tensor format.
//!
//! Everything here is pure and deterministic: identical inputs and seeds
//! produce bit-identical outputs across runs and platforms.

use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

/// Dense row-major tensor of 64-bit floats.
///
/// Invariants: `product(shape) == data.len()` and all values are finite.
/// Constructors and the operations in this module re-check finiteness so a
/// NaN/Inf can never propagate silently.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(CoreError::ShapeMismatch {
                op: "Tensor::new",
                left: shape.clone(),
                right: vec![data.len()],
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite { op: "Tensor::new" });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    /// 2-D identity matrix.
    pub fn eye(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Seeded uniform tensor with entries in `[lo, hi)`.
    pub fn seeded_uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut SeededRng) -> Self {
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| rng.uniform(lo, hi)).collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Element by multi-index (row-major).
    pub fn at(&self, index: &[usize]) -> f64 {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut flat = 0usize;
        for (i, &ix) in index.iter().enumerate() {
            debug_assert!(ix < self.shape[i]);
            flat = flat * self.shape[i] + ix;
        }
        self.data[flat]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut flat = 0usize;
        for (i, &ix) in index.iter().enumerate() {
            flat = flat * self.shape[i] + ix;
        }
        self.data[flat] = value;
    }

    /// Contiguous row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        assert_eq!(self.rank(), 2, "row() requires a rank-2 tensor");
        let n = self.shape[1];
        &self.data[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        assert_eq!(self.rank(), 2, "row_mut() requires a rank-2 tensor");
        let n = self.shape[1];
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(CoreError::ShapeMismatch {
                op: "reshape",
                left: self.shape,
                right: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Largest absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Seeded generator
// ---------------------------------------------------------------------------

/// Deterministic random source. The uniform and index samplers are built
/// directly on the ChaCha8 word stream so their output never depends on a
/// distribution crate's internals.
pub struct SeededRng(ChaCha8Rng);

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Named sub-generator: one master seed fans out to independent,
    /// reproducible streams per component.
    pub fn derive(master: u64, label: &str) -> Self {
        Self::new(master ^ fnv1a64(label.as_bytes()))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` via widening multiply (no modulo bias
    /// worth caring about at desk scale).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// `k` distinct indices from `[0, n)` by partial Fisher-Yates; output is
    /// in draw order, not sorted.
    pub fn sample_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Stable per-component seed derived from a master seed and a label.
pub fn derived_seed(master: u64, label: &str) -> u64 {
    master ^ fnv1a64(label.as_bytes())
}

// ---------------------------------------------------------------------------
// LinearMap
// ---------------------------------------------------------------------------

/// Affine map applied to the last dimension: `y = W x + b`.
///
/// `weight` has shape `[d_out, d_in]`. Identical seed and dims reproduce
/// bit-identical weights.
#[derive(Debug, Clone)]
pub struct LinearMap {
    pub weight: Tensor,
    pub bias: Option<Tensor>,
    pub seed: u64,
}

impl LinearMap {
    /// Seeded init, uniform in `±1/sqrt(d_in)`, no bias.
    pub fn seeded(d_out: usize, d_in: usize, seed: u64) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        let mut rng = SeededRng::new(seed);
        let weight = Tensor::seeded_uniform(&[d_out, d_in], -bound, bound, &mut rng);
        Self {
            weight,
            bias: None,
            seed,
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            weight: Tensor::eye(d),
            bias: None,
            seed: 0,
        }
    }

    /// `gain * I`; used for attention bundles whose sharpness is tuned by a
    /// single scalar.
    pub fn scaled_identity(d: usize, gain: f64) -> Self {
        Self {
            weight: Tensor::eye(d).scaled(gain),
            bias: None,
            seed: 0,
        }
    }

    pub fn from_weight(weight: Tensor) -> Self {
        assert_eq!(weight.rank(), 2);
        Self {
            weight,
            bias: None,
            seed: 0,
        }
    }

    pub fn with_bias(mut self, bias: Tensor) -> Self {
        assert_eq!(bias.rank(), 1);
        assert_eq!(bias.shape()[0], self.d_out());
        self.bias = Some(bias);
        self
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape()[1]
    }

    /// Whether this map is exactly the identity (square eye weight, no
    /// bias); `apply` short-circuits to a copy in that case.
    fn is_identity(&self) -> bool {
        if self.bias.is_some() || self.d_in() != self.d_out() {
            return false;
        }
        let n = self.d_in();
        self.weight
            .data()
            .iter()
            .enumerate()
            .all(|(idx, &v)| v == if idx / n == idx % n { 1.0 } else { 0.0 })
    }

    /// Apply to every slice along the last dimension of `x`.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let d_in = self.d_in();
        let d_out = self.d_out();
        if x.rank() == 0 || *x.shape().last().unwrap() != d_in {
            return Err(CoreError::ShapeMismatch {
                op: "LinearMap::apply",
                left: x.shape().to_vec(),
                right: self.weight.shape().to_vec(),
            });
        }
        if self.is_identity() {
            return Ok(x.clone());
        }
        let rows = x.len() / d_in;
        let mut out = vec![0.0; rows * d_out];
        let w = self.weight.data();
        for r in 0..rows {
            let xin = &x.data()[r * d_in..(r + 1) * d_in];
            let yout = &mut out[r * d_out..(r + 1) * d_out];
            for (o, y) in yout.iter_mut().enumerate() {
                let wrow = &w[o * d_in..(o + 1) * d_in];
                let mut acc = 0.0;
                for (wv, xv) in wrow.iter().zip(xin) {
                    acc += wv * xv;
                }
                *y = acc;
            }
            if let Some(b) = &self.bias {
                for (y, bv) in yout.iter_mut().zip(b.data()) {
                    *y += bv;
                }
            }
        }
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = d_out;
        let t = Tensor {
            shape,
            data: out,
        };
        if !t.all_finite() {
            return Err(CoreError::NonFinite {
                op: "LinearMap::apply",
            });
        }
        Ok(t)
    }
}

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------

/// `c[i,j] = sum_k a[i,k] * b[k,j]` for rank-2 operands.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(CoreError::ShapeMismatch {
            op: "matmul",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = a.row(i);
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            let brow = &b.data()[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
        let _ = k;
    }
    let t = Tensor {
        shape: vec![m, n],
        data: out,
    };
    if !t.all_finite() {
        return Err(CoreError::NonFinite { op: "matmul" });
    }
    Ok(t)
}

/// Row-wise softmax with max subtraction. Total on finite rank-2 input.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    assert_eq!(x.rank(), 2, "softmax_rows requires a rank-2 tensor");
    let (m, n) = (x.shape()[0], x.shape()[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = x.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let orow = &mut out[i * n..(i + 1) * n];
        let mut sum = 0.0;
        for (o, &v) in orow.iter_mut().zip(row) {
            let e = (v - max).exp();
            *o = e;
            sum += e;
        }
        for o in orow.iter_mut() {
            *o /= sum;
        }
    }
    Tensor {
        shape: vec![m, n],
        data: out,
    }
}

// ---------------------------------------------------------------------------
// Tensor file format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TensorHeader {
    dtype: String,
    shape: Vec<usize>,
}

/// Write the on-disk tensor format: a one-line UTF-8 JSON header
/// `{"dtype":"f64","shape":[...]}`, a newline, then the little-endian raw
/// payload of exactly `product(shape) * 8` bytes.
pub fn write_tensor_file(path: &Path, t: &Tensor) -> Result<()> {
    let header = TensorHeader {
        dtype: "f64".to_string(),
        shape: t.shape().to_vec(),
    };
    let mut file = std::fs::File::create(path)?;
    let head = serde_json::to_string(&header).expect("header serialization");
    file.write_all(head.as_bytes())?;
    file.write_all(b"\n")?;
    let mut payload = Vec::with_capacity(t.len() * 8);
    for v in t.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&payload)?;
    Ok(())
}

pub fn read_tensor_file(path: &Path) -> Result<Tensor> {
    let mut file = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CoreError::Parse("tensor file: missing header newline".into()))?;
    let header: TensorHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| CoreError::Parse(format!("tensor file header: {e}")))?;
    if header.dtype != "f64" {
        return Err(CoreError::Parse(format!(
            "tensor file dtype {:?} unsupported",
            header.dtype
        )));
    }
    let count: usize = header.shape.iter().product();
    let payload = &bytes[nl + 1..];
    if payload.len() != count * 8 {
        return Err(CoreError::Parse(format!(
            "tensor file payload is {} bytes, expected {}",
            payload.len(),
            count * 8
        )));
    }
    let mut data = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Tensor::new(header.shape, data)
}
