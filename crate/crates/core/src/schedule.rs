//! Per-frame schedulers realizing the inference and training prediction
//! rules.
//!
//! Inference: anchor-candidate frames decode directly from their prompt
//! slices; every other frame conditions on its nearest anchors plus the FIFO
//! track and decodes through memory attention. By default all anchors are
//! decoded in a first pass so propagation may condition on temporally later
//! anchors; the strictly causal mode decodes anchors in stream order and
//! restricts retrieval to anchors at or before the current frame.
//!
//! Every predicted frame is encoded into memory: anchors into the anchor
//! store, all frames into the FIFO queue in ascending frame order.
//!
//! Training: identical walk, except propagation frames condition on the
//! whole sampled anchor set (not the nearest subset) and only planned frames
//! are predicted.

use crate::anchor::{nearest_anchors, AnchorPlan, TrainPlan};
use crate::attention::AttentionParams;
use crate::decoder::{binarize, DecoderOutput, MaskHead};
use crate::error::{CoreError, Result};
use crate::fusion::FramePrompts;
use crate::mask::Mask;
use crate::memory::{
    build_memory_tokens, encode_memory_tokens, memory_attention, EntryKind, MemoryBank,
};
use crate::numerics::{LinearMap, Tensor};

/// Which branch produced a frame's mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Anchor,
    Propagated,
}

/// Conditioning record for one frame, in the order the memory tokens were
/// concatenated.
#[derive(Debug, Clone)]
pub struct FrameDecision {
    pub frame: usize,
    pub branch: Branch,
    pub anchors: Vec<usize>,
    pub fifo: Vec<usize>,
}

#[derive(Debug)]
pub struct ScheduleOutcome {
    /// Mask per frame; `None` for frames outside a training plan.
    pub masks: Vec<Option<Mask>>,
    pub outputs: Vec<Option<DecoderOutput>>,
    pub decisions: Vec<FrameDecision>,
}

impl ScheduleOutcome {
    pub fn mask_sequence(&self) -> crate::metrics::MaskSequence {
        let masks: Vec<Mask> = self
            .masks
            .iter()
            .map(|m| m.clone().expect("complete schedule"))
            .collect();
        crate::metrics::MaskSequence::new(masks, None)
    }
}

/// Everything a scheduler needs for one clip, borrowed from the pipeline.
pub struct ScheduleContext<'a> {
    /// Per-frame token grids, `[64, D]` each.
    pub frame_tokens: &'a [Tensor],
    /// Per-frame projected pixel embeddings, `[Hf, Wf, D]` each.
    pub pixel_embeds: &'a [Tensor],
    pub prompts: &'a FramePrompts,
    pub head: &'a MaskHead,
    pub memory_attn: &'a AttentionParams,
    pub memory_proj: &'a LinearMap,
    pub m_tokens: usize,
    pub fifo_capacity: usize,
    pub memory_seed: u64,
    pub causal: bool,
}

impl<'a> ScheduleContext<'a> {
    fn t_seg(&self) -> usize {
        self.frame_tokens.len()
    }

    fn d_mem(&self) -> usize {
        self.memory_proj.d_out()
    }

    fn validate(&self, plan_t: usize) -> Result<()> {
        let t = self.t_seg();
        if t != plan_t || self.pixel_embeds.len() != t || self.prompts.t_seg() != t {
            return Err(CoreError::ShapeMismatch {
                op: "schedule",
                left: vec![t, self.pixel_embeds.len(), self.prompts.t_seg()],
                right: vec![plan_t],
            });
        }
        Ok(())
    }

    fn decode_anchor(&self, t: usize) -> Result<DecoderOutput> {
        let prompt = self.prompts.slice_frame(t)?;
        self.head.decode_prompted(&self.pixel_embeds[t], &prompt)
    }

    fn encode_frame(&self, t: usize, mask: &Mask, kind: EntryKind) -> Result<crate::memory::MemoryEntry> {
        encode_memory_tokens(
            self.memory_proj,
            &self.frame_tokens[t],
            mask,
            self.m_tokens,
            t,
            kind,
        )
    }
}

/// Inference walk over all frames of a clip.
pub fn schedule_inference(ctx: &ScheduleContext, plan: &AnchorPlan) -> Result<ScheduleOutcome> {
    ctx.validate(plan.t_seg)?;
    let t_seg = ctx.t_seg();
    let mut bank = MemoryBank::new(ctx.fifo_capacity, ctx.d_mem(), ctx.memory_seed);
    let mut masks: Vec<Option<Mask>> = vec![None; t_seg];
    let mut outputs: Vec<Option<DecoderOutput>> = vec![None; t_seg];
    let mut decisions = Vec::with_capacity(t_seg);

    // Anchor pre-pass: decode every candidate from its prompt and register
    // anchor memory, so propagation can look forward in time.
    if !ctx.causal {
        for &k in &plan.candidates {
            let out = ctx.decode_anchor(k)?;
            let mask = binarize(&out.logits, ctx.head.threshold);
            bank.insert_anchor(ctx.encode_frame(k, &mask, EntryKind::Anchor)?);
            masks[k] = Some(mask);
            outputs[k] = Some(out);
        }
    }

    for t in 0..t_seg {
        let is_candidate = plan.candidates.contains(&t);
        if is_candidate {
            if ctx.causal {
                let out = ctx.decode_anchor(t)?;
                let mask = binarize(&out.logits, ctx.head.threshold);
                bank.insert_anchor(ctx.encode_frame(t, &mask, EntryKind::Anchor)?);
                masks[t] = Some(mask);
                outputs[t] = Some(out);
            }
            decisions.push(FrameDecision {
                frame: t,
                branch: Branch::Anchor,
                anchors: Vec::new(),
                fifo: Vec::new(),
            });
        } else {
            let anchor_set: Vec<usize> = if ctx.causal {
                let available: Vec<usize> = plan
                    .candidates
                    .iter()
                    .copied()
                    .filter(|&k| k <= t)
                    .collect();
                if available.is_empty() {
                    // No anchor has streamed in yet: fall back to prompt
                    // decoding for this frame.
                    let out = ctx.decode_anchor(t)?;
                    let mask = binarize(&out.logits, ctx.head.threshold);
                    masks[t] = Some(mask.clone());
                    outputs[t] = Some(out);
                    decisions.push(FrameDecision {
                        frame: t,
                        branch: Branch::Anchor,
                        anchors: Vec::new(),
                        fifo: Vec::new(),
                    });
                    bank.push_fifo(ctx.encode_frame(t, &mask, EntryKind::Fifo)?);
                    continue;
                }
                nearest_anchors(&available, t, plan.alpha)?
            } else {
                plan.per_frame_nearest[t].clone()
            };
            let fifo = bank.fifo_window(t);
            if anchor_set.is_empty() && fifo.is_empty() {
                return Err(CoreError::EmptyMemory { frame: t });
            }
            let memory = build_memory_tokens(&bank, t, &anchor_set)?;
            let conditioned = memory_attention(ctx.memory_attn, &ctx.frame_tokens[t], &memory)?;
            let out = ctx.head.decode_propagated(&conditioned)?;
            let mask = binarize(&out.logits, ctx.head.threshold);
            masks[t] = Some(mask);
            outputs[t] = Some(out);
            decisions.push(FrameDecision {
                frame: t,
                branch: Branch::Propagated,
                anchors: anchor_set,
                fifo,
            });
        }
        // Every predicted frame enters the FIFO in ascending order.
        let mask = masks[t].as_ref().expect("frame just predicted");
        bank.push_fifo(ctx.encode_frame(t, mask, EntryKind::Fifo)?);
    }
    Ok(ScheduleOutcome {
        masks,
        outputs,
        decisions,
    })
}

/// Training walk: anchors from prompts, planned propagation frames
/// conditioned on the full anchor set plus the FIFO track; nothing else is
/// predicted.
pub fn schedule_training(ctx: &ScheduleContext, plan: &TrainPlan) -> Result<ScheduleOutcome> {
    let t_seg = ctx.t_seg();
    ctx.validate(t_seg)?;
    for &f in plan.anchors.iter().chain(&plan.prop_frames) {
        if f >= t_seg {
            return Err(CoreError::IndexOutOfRange {
                what: "training plan frame",
                index: f,
                len: t_seg,
            });
        }
    }
    let mut bank = MemoryBank::new(ctx.fifo_capacity, ctx.d_mem(), ctx.memory_seed);
    let mut masks: Vec<Option<Mask>> = vec![None; t_seg];
    let mut outputs: Vec<Option<DecoderOutput>> = vec![None; t_seg];
    let mut decisions = Vec::new();

    for &k in &plan.anchors {
        let out = ctx.decode_anchor(k)?;
        let mask = binarize(&out.logits, ctx.head.threshold);
        bank.insert_anchor(ctx.encode_frame(k, &mask, EntryKind::Anchor)?);
        masks[k] = Some(mask);
        outputs[k] = Some(out);
    }

    let mut planned: Vec<usize> = plan
        .anchors
        .iter()
        .chain(&plan.prop_frames)
        .copied()
        .collect();
    planned.sort_unstable();

    for &t in &planned {
        if plan.anchors.contains(&t) {
            decisions.push(FrameDecision {
                frame: t,
                branch: Branch::Anchor,
                anchors: Vec::new(),
                fifo: Vec::new(),
            });
        } else {
            let fifo = bank.fifo_window(t);
            if plan.anchors.is_empty() && fifo.is_empty() {
                return Err(CoreError::EmptyMemory { frame: t });
            }
            let memory = build_memory_tokens(&bank, t, &plan.anchors)?;
            let conditioned = memory_attention(ctx.memory_attn, &ctx.frame_tokens[t], &memory)?;
            let out = ctx.head.decode_propagated(&conditioned)?;
            let mask = binarize(&out.logits, ctx.head.threshold);
            masks[t] = Some(mask);
            outputs[t] = Some(out);
            decisions.push(FrameDecision {
                frame: t,
                branch: Branch::Propagated,
                anchors: plan.anchors.clone(),
                fifo,
            });
        }
        let mask = masks[t].as_ref().expect("frame just predicted");
        bank.push_fifo(ctx.encode_frame(t, mask, EntryKind::Fifo)?);
    }
    Ok(ScheduleOutcome {
        masks,
        outputs,
        decisions,
    })
}
