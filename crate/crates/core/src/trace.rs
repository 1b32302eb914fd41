//! Machine-checkable inference traces.
//!
//! `cmd_infer` writes one trace per run: the effective config, the candidate
//! set, and per frame the branch taken plus the exact anchor and FIFO sets
//! used for conditioning. The validator re-derives the expected sets with
//! its own arithmetic (independent of the scheduler and of the anchor
//! module) and rejects any divergence.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::schedule::{Branch, FrameDecision};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceFrame {
    pub frame: usize,
    pub branch: String,
    #[serde(default)]
    pub anchors: Vec<usize>,
    #[serde(default)]
    pub fifo: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TraceLog {
    pub config: String,
    pub seed: u64,
    pub query: String,
    pub resolved_ids: Vec<usize>,
    pub strategy: String,
    pub alpha: usize,
    pub fifo_capacity: usize,
    pub causal: bool,
    pub t_seg: usize,
    pub anchor_candidates: Vec<usize>,
    pub frames: Vec<TraceFrame>,
}

impl TraceLog {
    pub fn from_decisions(
        config: String,
        seed: u64,
        query: String,
        resolved_ids: Vec<usize>,
        strategy: &str,
        alpha: usize,
        fifo_capacity: usize,
        causal: bool,
        candidates: &[usize],
        decisions: &[FrameDecision],
    ) -> Self {
        let frames = decisions
            .iter()
            .map(|d| TraceFrame {
                frame: d.frame,
                branch: match d.branch {
                    Branch::Anchor => "anchor".to_string(),
                    Branch::Propagated => "propagated".to_string(),
                },
                anchors: d.anchors.clone(),
                fifo: d.fifo.clone(),
            })
            .collect();
        Self {
            config,
            seed,
            query,
            resolved_ids,
            strategy: strategy.to_string(),
            alpha,
            fifo_capacity,
            causal,
            t_seg: decisions.len(),
            anchor_candidates: candidates.to_vec(),
            frames,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CoreError::Parse(format!("trace: {e}")))
    }
}

fn expected_nearest(candidates: &[usize], t: usize, alpha: usize) -> Vec<usize> {
    // Deliberately re-derived: score every candidate, full stable sort on
    // (distance, index), prefix of min(alpha, n).
    let mut scored: Vec<(usize, usize)> = candidates
        .iter()
        .map(|&k| {
            let d = k.abs_diff(t);
            (d, k)
        })
        .collect();
    scored.sort();
    scored
        .into_iter()
        .take(alpha.min(candidates.len()))
        .map(|(_, k)| k)
        .collect()
}

/// Validate a full-clip inference trace: anchor frames must be decoded from
/// prompts (branch `anchor` exactly on the candidate set), and every
/// propagated frame must condition on exactly `min(alpha, |candidates|)`
/// anchors — the nearest ones under the documented tie-break — plus the FIFO
/// window of the at-most-`fifo_capacity` most recently predicted frames.
pub fn validate_trace(trace: &TraceLog) -> Result<()> {
    let t_seg = trace.t_seg;
    if trace.frames.len() != t_seg {
        return Err(CoreError::Parse(format!(
            "trace covers {} frames, expected {t_seg}",
            trace.frames.len()
        )));
    }
    if trace.anchor_candidates.is_empty() {
        return Err(CoreError::Parse("trace has no anchor candidates".into()));
    }
    let mut sorted = trace.anchor_candidates.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted != trace.anchor_candidates {
        return Err(CoreError::Parse(
            "anchor candidates must be sorted and distinct".into(),
        ));
    }
    let first_candidate = trace.anchor_candidates[0];

    for (t, frame) in trace.frames.iter().enumerate() {
        if frame.frame != t {
            return Err(CoreError::Parse(format!(
                "trace frame order broken at index {t} (found {})",
                frame.frame
            )));
        }
        let is_candidate = trace.anchor_candidates.contains(&t);
        // In causal mode, frames before the first candidate legitimately
        // fall back to prompt decoding and are recorded as anchors.
        let causal_fallback = trace.causal && t < first_candidate;
        match frame.branch.as_str() {
            "anchor" => {
                if !is_candidate && !causal_fallback {
                    return Err(CoreError::Parse(format!(
                        "frame {t} decoded as anchor but is not a candidate"
                    )));
                }
                if !frame.anchors.is_empty() || !frame.fifo.is_empty() {
                    return Err(CoreError::Parse(format!(
                        "anchor frame {t} must not record conditioning sets"
                    )));
                }
            }
            "propagated" => {
                if is_candidate {
                    return Err(CoreError::Parse(format!(
                        "candidate frame {t} must be decoded from its prompt"
                    )));
                }
                let pool: Vec<usize> = if trace.causal {
                    trace
                        .anchor_candidates
                        .iter()
                        .copied()
                        .filter(|&k| k <= t)
                        .collect()
                } else {
                    trace.anchor_candidates.clone()
                };
                let expect = expected_nearest(&pool, t, trace.alpha);
                if frame.anchors != expect {
                    return Err(CoreError::Parse(format!(
                        "frame {t}: anchors {:?} differ from expected {:?}",
                        frame.anchors, expect
                    )));
                }
                // FIFO: the most recent min(t, capacity) predicted frames,
                // descending. In inference every frame below t is predicted.
                let expect_fifo: Vec<usize> = (0..t)
                    .rev()
                    .take(trace.fifo_capacity)
                    .collect();
                if frame.fifo != expect_fifo {
                    return Err(CoreError::Parse(format!(
                        "frame {t}: fifo {:?} differs from expected {:?}",
                        frame.fifo, expect_fifo
                    )));
                }
            }
            other => {
                return Err(CoreError::Parse(format!(
                    "frame {t}: unknown branch {other:?}"
                )));
            }
        }
    }
    Ok(())
}
