//! Anchor-frame candidate selection, per-frame nearest-anchor retrieval and
//! training-plan sampling.
//!
//! Inference candidates default to deterministic even spacing,
//! `k_i = floor(i * T / K)` with `K = max(1, floor(T/4))`, which reproduces a
//! stride of 4 at T = 32; a seeded random mode draws K distinct indices
//! instead. Per-frame conditioning uses the `min(alpha, |candidates|)`
//! candidates closest to the frame, ties broken toward the smaller index.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::numerics::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorMode {
    Spaced,
    Random,
}

/// Candidate-set strategy. `Uniform3` and `Random3` fix three global anchors
/// for the whole clip and never update them. `ClipGuided` stands in for an
/// external keyframe picker; with no such model wired in it falls back to the
/// first frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Dynamic,
    First,
    Uniform3,
    Random3,
    #[serde(rename = "clip")]
    ClipGuided,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Dynamic => "dynamic",
            Strategy::First => "first",
            Strategy::Uniform3 => "uniform3",
            Strategy::Random3 => "random3",
            Strategy::ClipGuided => "clip",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dynamic" => Ok(Strategy::Dynamic),
            "first" => Ok(Strategy::First),
            "uniform3" => Ok(Strategy::Uniform3),
            "random3" => Ok(Strategy::Random3),
            "clip" => Ok(Strategy::ClipGuided),
            other => Err(CoreError::Config(format!(
                "unknown strategy {other:?}; expected dynamic|first|uniform3|random3|clip"
            ))),
        }
    }
}

impl AnchorMode {
    pub fn name(&self) -> &'static str {
        match self {
            AnchorMode::Spaced => "spaced",
            AnchorMode::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spaced" => Ok(AnchorMode::Spaced),
            "random" => Ok(AnchorMode::Random),
            other => Err(CoreError::Config(format!(
                "unknown anchor mode {other:?}; expected spaced|random"
            ))),
        }
    }
}

/// `K = max(1, floor(T/4))` sorted candidate indices.
pub fn select_inference_anchors(t_seg: usize, mode: AnchorMode, seed: u64) -> Result<Vec<usize>> {
    if !(1..=32).contains(&t_seg) {
        return Err(CoreError::Config(format!(
            "t_seg must be in [1, 32], got {t_seg}"
        )));
    }
    let k = (t_seg / 4).max(1);
    let mut candidates = match mode {
        AnchorMode::Spaced => (0..k).map(|i| i * t_seg / k).collect::<Vec<_>>(),
        AnchorMode::Random => {
            let mut rng = SeededRng::derive(seed, "anchors.random");
            let mut v = rng.sample_distinct(t_seg, k);
            v.sort_unstable();
            v
        }
    };
    candidates.dedup();
    Ok(candidates)
}

/// The `min(alpha, |candidates|)` candidates closest to `t`, sorted by
/// increasing distance with ties broken by the smaller index (a stable sort
/// over the ascending candidate list).
pub fn nearest_anchors(candidates: &[usize], t: usize, alpha: usize) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        return Err(CoreError::Config("nearest_anchors: empty candidate set".into()));
    }
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_by_key(|&k| (k.abs_diff(t), k));
    sorted.truncate(alpha.min(candidates.len()));
    Ok(sorted)
}

/// Candidate set plus the per-frame nearest sets for a whole clip.
#[derive(Debug, Clone)]
pub struct AnchorPlan {
    pub candidates: Vec<usize>,
    pub per_frame_nearest: Vec<Vec<usize>>,
    pub alpha: usize,
    pub t_seg: usize,
}

/// Build the conditioning plan for a strategy. Fixed-anchor strategies keep
/// their (up to three) global anchors for every frame; `Dynamic` retrieves
/// the nearest `alpha` per frame.
pub fn anchor_plan(
    t_seg: usize,
    alpha: usize,
    strategy: Strategy,
    mode: AnchorMode,
    seed: u64,
) -> Result<AnchorPlan> {
    if alpha < 1 {
        return Err(CoreError::Config("alpha must be at least 1".into()));
    }
    let candidates = match strategy {
        Strategy::Dynamic => select_inference_anchors(t_seg, mode, seed)?,
        Strategy::First | Strategy::ClipGuided => vec![0],
        Strategy::Uniform3 => {
            let k = 3.min(t_seg);
            let mut v: Vec<usize> = (0..k).map(|i| i * t_seg / k).collect();
            v.dedup();
            v
        }
        Strategy::Random3 => {
            let mut rng = SeededRng::derive(seed, "anchors.random3");
            let mut v = rng.sample_distinct(t_seg, 3.min(t_seg));
            v.sort_unstable();
            v
        }
    };
    let per_frame_nearest = (0..t_seg)
        .map(|t| nearest_anchors(&candidates, t, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnchorPlan {
        candidates,
        per_frame_nearest,
        alpha,
        t_seg,
    })
}

/// Training-time sampling: `min(alpha, T)` random distinct anchors plus the
/// in-range union of two preceding and up to `n_prop` subsequent frames per
/// anchor, minus the anchors themselves. Both sets come back sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainPlan {
    pub anchors: Vec<usize>,
    pub prop_frames: Vec<usize>,
    pub n_prop: usize,
    pub seed: u64,
}

pub fn sample_training_plan(t_seg: usize, alpha: usize, n_prop: usize, seed: u64) -> TrainPlan {
    let mut rng = SeededRng::derive(seed, "train.anchors");
    let mut anchors = rng.sample_distinct(t_seg, alpha.min(t_seg));
    anchors.sort_unstable();
    let mut prop: Vec<usize> = Vec::new();
    for &k in &anchors {
        for back in 1..=2usize {
            if let Some(f) = k.checked_sub(back) {
                prop.push(f);
            }
        }
        for ahead in 1..=n_prop {
            let f = k + ahead;
            if f < t_seg {
                prop.push(f);
            }
        }
    }
    prop.sort_unstable();
    prop.dedup();
    prop.retain(|f| !anchors.contains(f));
    TrainPlan {
        anchors,
        prop_frames: prop,
        n_prop,
        seed,
    }
}
