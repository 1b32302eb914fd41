//! Dual-track frame memory: anchor entries plus a bounded FIFO of recent
//! frames, a learned temporal positional table, and the memory attention that
//! conditions a frame's tokens on both tracks.
//!
//! An entry encodes the predicted mask together with the frame's features:
//! the frame's token grid (8x8, D channels) is joined with the mask's
//! occupancy at the same grid as one extra channel, projected by a 1x1 map to
//! `D_mem = D + 1`, and average-pooled to `m_tokens` tokens. The default
//! projection routes the token channels through unchanged and gains/centers
//! the occupancy channel, which keeps memory tokens comparable to query
//! tokens while the last channel carries signed mask evidence; a fully
//! seeded map drops in for oracle tests.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use crate::attention::{cross_attention, AttentionParams};
use crate::error::{CoreError, Result};
use crate::mask::Mask;
use crate::numerics::{LinearMap, SeededRng, Tensor};

/// Scale of the occupancy channel inside memory tokens.
pub const OCC_GAIN: f64 = 2.0;
/// Init scale of the learned temporal positional table.
pub const PE_SCALE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Anchor,
    Fifo,
}

#[derive(Debug, Clone)]
pub struct MemoryEntry {
    pub frame_index: usize,
    pub kind: EntryKind,
    /// `[m_tokens, d_mem]` encoded mask + feature tokens.
    pub tokens: Tensor,
}

/// 1x1 projection for memory encoding: identity on the D token channels, the
/// occupancy channel scaled by `OCC_GAIN` and centered at `occ_center` via
/// the bias. Output dim is `d + 1`.
pub fn memory_projection(d: usize, occ_center: f64) -> LinearMap {
    let d_mem = d + 1;
    let mut weight = Tensor::zeros(&[d_mem, d_mem]);
    for i in 0..d {
        weight.set(&[i, i], 1.0);
    }
    weight.set(&[d, d], OCC_GAIN);
    let mut bias = Tensor::zeros(&[d_mem]);
    bias.data_mut()[d] = -OCC_GAIN * occ_center;
    LinearMap::from_weight(weight).with_bias(bias)
}

/// Encode one frame's memory from its precomputed token grid (`[64, D]`) and
/// a binary mask at frame resolution. The mask is area-mean reduced to the
/// 8x8 token grid, appended as an extra channel, projected, then average
/// pooled to `m_tokens` tokens (16 by default, i.e. a 4x4 grid).
pub fn encode_memory_tokens(
    proj: &LinearMap,
    frame_tokens: &Tensor,
    mask: &Mask,
    m_tokens: usize,
    frame_index: usize,
    kind: EntryKind,
) -> Result<MemoryEntry> {
    if frame_tokens.rank() != 2 || frame_tokens.shape()[0] != 64 {
        return Err(CoreError::ShapeMismatch {
            op: "encode_memory",
            left: frame_tokens.shape().to_vec(),
            right: vec![64],
        });
    }
    if !mask.width.is_multiple_of(8) || !mask.height.is_multiple_of(8) || mask.width / 8 != mask.height / 8 {
        return Err(CoreError::ShapeMismatch {
            op: "encode_memory",
            left: vec![mask.height, mask.width],
            right: vec![8, 8],
        });
    }
    let side = grid_side(m_tokens)?;
    let d = frame_tokens.shape()[1];
    if proj.d_in() != d + 1 {
        return Err(CoreError::ShapeMismatch {
            op: "encode_memory",
            left: vec![d + 1],
            right: vec![proj.d_in()],
        });
    }
    let occ = mask.occupancy_grid(mask.height / 8)?;
    let mut joined = Tensor::zeros(&[64, d + 1]);
    for h in 0..8 {
        for w in 0..8 {
            let row = joined.row_mut(h * 8 + w);
            row[..d].copy_from_slice(frame_tokens.row(h * 8 + w));
            row[d] = occ.at(&[h, w]);
        }
    }
    let projected = proj.apply(&joined)?;
    let d_mem = projected.shape()[1];

    // Average-pool the 8x8 grid down to side x side.
    let block = 8 / side;
    let inv = 1.0 / (block * block) as f64;
    let mut tokens = Tensor::zeros(&[m_tokens, d_mem]);
    for oy in 0..side {
        for ox in 0..side {
            let out_row_idx = oy * side + ox;
            for dy in 0..block {
                for dx in 0..block {
                    let src = projected.row((oy * block + dy) * 8 + (ox * block + dx));
                    let dst = tokens.row_mut(out_row_idx);
                    for (o, v) in dst.iter_mut().zip(src) {
                        *o += v * inv;
                    }
                }
            }
        }
    }
    Ok(MemoryEntry {
        frame_index,
        kind,
        tokens,
    })
}

fn grid_side(m_tokens: usize) -> Result<usize> {
    match m_tokens {
        64 => Ok(8),
        16 => Ok(4),
        4 => Ok(2),
        1 => Ok(1),
        other => Err(CoreError::Config(format!(
            "m_tokens must be one of 1|4|16|64, got {other}"
        ))),
    }
}

/// Anchor store plus bounded FIFO queue with a learned temporal positional
/// table of `capacity + 1` rows (row 0 is reserved for anchors).
#[derive(Debug, Clone)]
pub struct MemoryBank {
    anchors: BTreeMap<usize, MemoryEntry>,
    fifo: VecDeque<MemoryEntry>,
    pub capacity: usize,
    pub pe_table: Tensor,
}

impl MemoryBank {
    pub fn new(capacity: usize, d_mem: usize, seed: u64) -> Self {
        let mut rng = SeededRng::derive(seed, "memory.pe_table");
        let pe_table =
            Tensor::seeded_uniform(&[capacity + 1, d_mem], -PE_SCALE, PE_SCALE, &mut rng);
        Self {
            anchors: BTreeMap::new(),
            fifo: VecDeque::new(),
            capacity,
            pe_table,
        }
    }

    pub fn insert_anchor(&mut self, entry: MemoryEntry) {
        self.anchors.insert(entry.frame_index, entry);
    }

    /// Push a frame entry; evicts the oldest when past capacity. Frame
    /// indices must arrive strictly increasing.
    pub fn push_fifo(&mut self, entry: MemoryEntry) {
        if let Some(last) = self.fifo.back() {
            assert!(
                entry.frame_index > last.frame_index,
                "fifo pushes must be in ascending frame order"
            );
        }
        self.fifo.push_back(entry);
        while self.fifo.len() > self.capacity {
            self.fifo.pop_front();
        }
    }

    pub fn anchor(&self, frame: usize) -> Option<&MemoryEntry> {
        self.anchors.get(&frame)
    }

    pub fn fifo_entry(&self, frame: usize) -> Option<&MemoryEntry> {
        self.fifo.iter().find(|e| e.frame_index == frame)
    }

    pub fn fifo_len(&self) -> usize {
        self.fifo.len()
    }

    /// The queue's frames strictly before `t`, most recent first. This is
    /// the FIFO conditioning window: the at-most-P most recently predicted
    /// frames.
    pub fn fifo_window(&self, t: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .fifo
            .iter()
            .map(|e| e.frame_index)
            .filter(|&k| k < t)
            .collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }
}

/// Concatenated memory token sequence for frame `t`: anchor entries first (in
/// the given retrieval order, temporal index 0), then FIFO entries most
/// recent first with temporal index `t - k`; each entry's tokens receive the
/// positional row for its temporal index.
pub fn build_memory_tokens(bank: &MemoryBank, t: usize, anchor_set: &[usize]) -> Result<Tensor> {
    let d_mem = bank.pe_table.shape()[1];
    let mut rows: Vec<f64> = Vec::new();
    let mut count = 0usize;
    let mut add_entry = |entry: &MemoryEntry, tau: usize| {
        let pe = bank.pe_table.row(tau);
        for r in 0..entry.tokens.shape()[0] {
            for (v, p) in entry.tokens.row(r).iter().zip(pe) {
                rows.push(v + p);
            }
            count += 1;
        }
    };
    for &k in anchor_set {
        let entry = bank
            .anchor(k)
            .ok_or(CoreError::BankMissingEntry {
                frame: k,
                track: "anchor",
            })?;
        add_entry(entry, 0);
    }
    for k in bank.fifo_window(t) {
        let entry = bank
            .fifo_entry(k)
            .ok_or(CoreError::BankMissingEntry {
                frame: k,
                track: "fifo",
            })?;
        let tau = (t - k).min(bank.capacity);
        add_entry(entry, tau);
    }
    Tensor::new(vec![count, d_mem], rows)
}

/// Memory attention: the frame's token grid (zero-padded on the occupancy
/// channel) attends over the concatenated memory tokens. Output has the same
/// token count as the query grid, `[64, d_mem]`.
pub fn memory_attention(
    params: &AttentionParams,
    frame_tokens: &Tensor,
    memory_tokens: &Tensor,
) -> Result<Tensor> {
    if memory_tokens.shape()[0] == 0 {
        return Err(CoreError::EmptyKeys);
    }
    let d = frame_tokens.shape()[1];
    let d_mem = memory_tokens.shape()[1];
    if d_mem != d + 1 {
        return Err(CoreError::ShapeMismatch {
            op: "memory_attention",
            left: vec![d + 1],
            right: vec![d_mem],
        });
    }
    let n = frame_tokens.shape()[0];
    let mut q = Tensor::zeros(&[n, d_mem]);
    for i in 0..n {
        q.row_mut(i)[..d].copy_from_slice(frame_tokens.row(i));
    }
    cross_attention(&q, memory_tokens, params, None, None)
}
