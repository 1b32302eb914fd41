//! End-to-end assembly: seeded model construction, per-clip feature
//! extraction, query-conditioned prompt building, scheduling, tracing and
//! evaluation.
//!
//! Parameter initialization is structured so the untrained pipeline is
//! mechanically meaningful: the tokenizer's downsampling kernels are
//! box-smoothing plus jitter, the decoder's per-pixel projection shares the
//! tokenizer's projection weights, and both carry a bias that centers the
//! canonical background at the origin of the embedding space. Query tokens
//! are seeded from reference renderings of the resolved object attributes.
//! Content matching then drives both prompt fusion and memory attention,
//! with a single gain knob controlling softmax sharpness.

use crate::anchor::{anchor_plan, AnchorPlan};
use crate::attention::AttentionParams;
use crate::config::{RunConfig, SemanticKind};
use crate::decoder::{MaskHead, VisionEncoder};
use crate::error::{CoreError, Result};
use crate::fusion::{
    context_fusion, expand_over_frames, temporal_fusion, FramePrompts, QueryTokens,
    SemanticTransform,
};
use crate::memory::memory_projection;
use crate::metrics::MaskSequence;
use crate::numerics::{derived_seed, LinearMap, Tensor};
use crate::schedule::{schedule_inference, ScheduleContext, ScheduleOutcome};
use crate::synthvid::{self, Clip, QueryGrounding, Shape};
use crate::tokenizer::{ConvInit, FeatureVolume, TokenSequence, Tokenizer};
use crate::trace::TraceLog;

const REFERENCE_CANVAS: usize = 128;
const REFERENCE_SHAPE_SIZE: usize = 48;

/// Fully assembled model: every parameter derives from `cfg.seed`.
pub struct Model {
    pub cfg: RunConfig,
    pub encoder: VisionEncoder,
    pub tokenizer: Tokenizer,
    pub fusion_initial: AttentionParams,
    pub fusion_second: AttentionParams,
    pub semantic: SemanticTransform,
    pub memory_attn: AttentionParams,
    pub memory_proj: LinearMap,
    pub head: MaskHead,
    pub frame_size: usize,
}

impl Model {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        Self::with_frame_size(cfg, 128)
    }

    pub fn with_frame_size(cfg: &RunConfig, frame_size: usize) -> Result<Self> {
        let d = cfg.tokenizer_d;
        let c = cfg.encoder_channels;
        let seed = cfg.seed;
        let encoder = VisionEncoder::seeded(c, derived_seed(seed, "encoder"));
        let mut tokenizer = Tokenizer::new(
            c,
            d,
            derived_seed(seed, "tokenizer"),
            cfg.tokenizer_activation,
            ConvInit::Smoothing,
        );
        let mut head = MaskHead::seeded(
            c,
            d,
            d + 1,
            derived_seed(seed, "head"),
            cfg.decoder_threshold,
            frame_size,
            frame_size,
        );

        // Background centering and scale calibration. The token and
        // per-pixel projections share one weight matrix; a bias places the
        // canonical background exactly at the embedding origin, and a scalar
        // lifts the weakest centered palette-color token norm to D^(1/4) so
        // every matched content logit is at least the attention gain.
        let bg_feat = encoder.uniform_feature(synthvid::BACKGROUND_RGB)?;
        let bg_cell = interior_cell(&tokenizer, &bg_feat)?;
        let raw_w = tokenizer.projection.weight.clone();
        let project = |w: &Tensor, v: &[f64]| -> Vec<f64> {
            (0..d)
                .map(|o| w.row(o).iter().zip(v).map(|(a, b)| a * b).sum())
                .collect()
        };
        let bg_token = project(&raw_w, &bg_cell);
        let mut min_norm = f64::INFINITY;
        for color_id in 0..synthvid::PALETTE.len() {
            let feat = encoder.uniform_feature(synthvid::color_rgb(color_id))?;
            let cell = interior_cell(&tokenizer, &feat)?;
            let token = project(&raw_w, &cell);
            let norm2: f64 = token
                .iter()
                .zip(&bg_token)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            min_norm = min_norm.min(norm2.sqrt());
        }
        let scale = if min_norm > 1e-9 {
            (d as f64).powf(0.25) / min_norm
        } else {
            1.0
        };
        let scaled_w = raw_w.scaled(scale);
        // Biases come from the scaled weights through the same summation
        // order as LinearMap::apply, so background inputs cancel bitwise.
        let scaled_bg_token = project(&scaled_w, &bg_cell);
        let token_bias = Tensor::new(vec![d], scaled_bg_token.iter().map(|v| -v).collect())?;
        tokenizer.projection = LinearMap::from_weight(scaled_w.clone()).with_bias(token_bias);

        // The decoder projects raw per-pixel features through the same
        // scaled weights, centered on the background's pixel feature.
        let bg_pixel_token = project(&scaled_w, &bg_feat);
        let pixel_bias = Tensor::new(vec![d], bg_pixel_token.iter().map(|v| -v).collect())?;
        head.pixel_proj = LinearMap::from_weight(scaled_w).with_bias(pixel_bias);

        let semantic = match cfg.stf_semantic {
            SemanticKind::Identity => SemanticTransform::Identity,
            SemanticKind::Mlp => SemanticTransform::mlp(d, derived_seed(seed, "semantic")),
        };
        let mut fusion_initial = AttentionParams::identity_with_gain(d, cfg.stf_gain);
        fusion_initial.heads = cfg.stf_heads;
        let mut fusion_second = AttentionParams::identity_with_gain(d, cfg.stf_gain);
        fusion_second.heads = cfg.stf_heads;
        let memory_attn = AttentionParams::identity_with_gain(d + 1, cfg.tdau_gain);

        Ok(Self {
            cfg: cfg.clone(),
            encoder,
            tokenizer,
            fusion_initial,
            fusion_second,
            semantic,
            memory_attn,
            memory_proj: memory_projection(d, cfg.tdau_occ_center),
            head,
            frame_size,
        })
    }
}

/// Interior cell of the tokenizer's downsampled grid for a constant feature
/// field: what any uniform region of that feature value reduces to, away
/// from borders.
fn interior_cell(tokenizer: &Tokenizer, feat: &[f64]) -> Result<Vec<f64>> {
    let c = feat.len();
    let mut grid = Tensor::zeros(&[64, 64, c]);
    for y in 0..64 {
        for x in 0..64 {
            for ch in 0..c {
                grid.set(&[y, x, ch], feat[ch]);
            }
        }
    }
    let down = tokenizer.downsample_frame(&grid)?;
    Ok((0..c).map(|ch| down.at(&[3, 3, ch])).collect())
}

/// Per-clip cacheable artifacts: everything that depends only on the frames
/// and the model seed, not on the query, strategy or alpha.
pub struct ClipFeatures {
    pub frame_tokens: Vec<Tensor>,
    pub pixel_embeds: Vec<Tensor>,
    pub token_seq: TokenSequence,
}

impl ClipFeatures {
    pub fn t_seg(&self) -> usize {
        self.frame_tokens.len()
    }
}

impl Model {
    /// Encode frames and cache token grids and projected pixel embeddings.
    pub fn clip_features(&self, frames: &[Tensor]) -> Result<ClipFeatures> {
        let mut feature_frames = Vec::with_capacity(frames.len());
        for frame in frames {
            feature_frames.push(self.encoder.encode(frame)?);
        }
        self.features_from_grids(&feature_frames)
    }

    /// Same cache built from externally supplied features (tensor-file
    /// ingestion path that bypasses the stub encoder).
    pub fn clip_features_from_volume(&self, volume: &FeatureVolume) -> Result<ClipFeatures> {
        if volume.channels != self.cfg.encoder_channels {
            return Err(CoreError::ShapeMismatch {
                op: "clip_features_from_volume",
                left: vec![volume.channels],
                right: vec![self.cfg.encoder_channels],
            });
        }
        let grids: Vec<Tensor> = (0..volume.t_seg())
            .map(|t| volume.frame(t).clone())
            .collect();
        self.features_from_grids(&grids)
    }

    fn features_from_grids(&self, feature_frames: &[Tensor]) -> Result<ClipFeatures> {
        let t_seg = feature_frames.len();
        let d = self.cfg.tokenizer_d;
        let mut frame_tokens = Vec::with_capacity(t_seg);
        let mut pixel_embeds = Vec::with_capacity(t_seg);
        let mut merged = Tensor::zeros(&[t_seg, 64, d]);
        let mut positions = Vec::with_capacity(t_seg * 64);
        for (t, feat) in feature_frames.iter().enumerate() {
            let tokens = self.tokenizer.tokenize_frame(feat)?;
            for cell in 0..64 {
                for ch in 0..d {
                    merged.set(&[t, cell, ch], tokens.at(&[cell, ch]));
                }
            }
            for h in 0..8 {
                for w in 0..8 {
                    positions.push((t, h, w));
                }
            }
            frame_tokens.push(tokens);
            pixel_embeds.push(self.head.project_pixels(feat)?);
        }
        Ok(ClipFeatures {
            frame_tokens,
            pixel_embeds,
            token_seq: TokenSequence {
                tokens: merged,
                positions,
            },
        })
    }

    /// Reference-cell tokens for one (shape, color): render the shape on the
    /// canonical background, push it through the frozen encoder + tokenizer,
    /// and rank cell tokens by the reference mask's occupancy.
    fn reference_cells(&self, shape: Shape, color: usize) -> Result<Vec<Vec<f64>>> {
        let (frame, mask) = synthvid::reference_frame(
            shape,
            synthvid::color_rgb(color),
            REFERENCE_SHAPE_SIZE,
            REFERENCE_CANVAS,
            REFERENCE_CANVAS,
        );
        let feat = self.encoder.encode(&frame)?;
        let tokens = self.tokenizer.tokenize_frame(&feat)?;
        let occ = mask.occupancy_grid(REFERENCE_CANVAS / 8)?;
        let mut ranked: Vec<(f64, usize)> = (0..64)
            .map(|cell| (occ.at(&[cell / 8, cell % 8]), cell))
            .collect();
        // Highest coverage first, ties toward the lower cell index.
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let target_norm = (self.cfg.tokenizer_d as f64).powf(0.25);
        let normalized = |cell: usize| -> Vec<f64> {
            let row = tokens.row(cell);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                row.iter().map(|v| v * target_norm / norm).collect()
            } else {
                row.to_vec()
            }
        };
        let keep: Vec<Vec<f64>> = ranked
            .iter()
            .take_while(|(cov, _)| *cov >= 0.5)
            .map(|&(_, cell)| normalized(cell))
            .collect();
        if keep.is_empty() {
            // Degenerate shapes still contribute their best cell.
            return Ok(vec![normalized(ranked[0].1)]);
        }
        Ok(keep)
    }

    /// Query-conditioned prompt seeds: N rows cycled over the resolved
    /// attributes' reference cells.
    pub fn query_tokens(&self, grounding: &QueryGrounding) -> Result<QueryTokens> {
        if grounding.attributes.is_empty() {
            return Err(CoreError::AmbiguousQuery(
                "query resolved to no attributes".into(),
            ));
        }
        let n = self.cfg.stf_n;
        let per_attr: Vec<Vec<Vec<f64>>> = grounding
            .attributes
            .iter()
            .map(|&(shape, color)| self.reference_cells(shape, color))
            .collect::<Result<_>>()?;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let a = i % per_attr.len();
            let cells = &per_attr[a];
            rows.push(cells[(i / per_attr.len()) % cells.len()].clone());
        }
        QueryTokens::from_rows(rows, derived_seed(self.cfg.seed, "query_tokens"))
    }

    /// Both fusion stages: context fusion, semantic transform, temporal
    /// expansion, rotary second fusion.
    pub fn build_prompts(
        &self,
        feats: &ClipFeatures,
        query_tokens: &QueryTokens,
    ) -> Result<FramePrompts> {
        let fused = context_fusion(query_tokens, &feats.token_seq, &self.fusion_initial)?;
        let f_st = self.semantic.apply(&fused)?;
        let expanded = expand_over_frames(&f_st, feats.t_seg())?;
        temporal_fusion(
            &expanded,
            &feats.token_seq,
            &self.fusion_second,
            self.cfg.rope_base,
            0,
        )
    }

    fn schedule_context<'a>(
        &'a self,
        cfg: &RunConfig,
        feats: &'a ClipFeatures,
        prompts: &'a FramePrompts,
    ) -> ScheduleContext<'a> {
        ScheduleContext {
            frame_tokens: &feats.frame_tokens,
            pixel_embeds: &feats.pixel_embeds,
            prompts,
            head: &self.head,
            memory_attn: &self.memory_attn,
            memory_proj: &self.memory_proj,
            m_tokens: cfg.tdau_m_tokens,
            fifo_capacity: cfg.tdau_fifo_capacity,
            memory_seed: derived_seed(cfg.seed, "memory"),
            causal: cfg.tdau_causal,
        }
    }

    /// Run the scheduler over prepared features under this model's config.
    pub fn run_schedule(
        &self,
        feats: &ClipFeatures,
        prompts: &FramePrompts,
        grounding: &QueryGrounding,
    ) -> Result<InferenceResult> {
        self.run_schedule_with(&self.cfg.clone(), feats, prompts, grounding)
    }

    /// Same, under an alternate scheduling config (strategy, alpha, fifo and
    /// causal knobs); model parameters stay those of `self`.
    pub fn run_schedule_with(
        &self,
        cfg: &RunConfig,
        feats: &ClipFeatures,
        prompts: &FramePrompts,
        grounding: &QueryGrounding,
    ) -> Result<InferenceResult> {
        let plan = anchor_plan(
            feats.t_seg(),
            cfg.tdau_alpha,
            cfg.tdau_strategy,
            cfg.tdau_anchor_mode,
            cfg.seed,
        )?;
        let ctx = self.schedule_context(cfg, feats, prompts);
        let outcome = schedule_inference(&ctx, &plan)?;
        let trace = TraceLog::from_decisions(
            cfg.echo(),
            cfg.seed,
            grounding.text.clone(),
            grounding.object_ids.clone(),
            cfg.tdau_strategy.name(),
            cfg.tdau_alpha,
            cfg.tdau_fifo_capacity,
            cfg.tdau_causal,
            &plan.candidates,
            &outcome.decisions,
        );
        Ok(InferenceResult {
            masks: outcome.mask_sequence(),
            outcome,
            trace,
            plan,
        })
    }

    /// Full inference: resolve the query, extract features, build prompts,
    /// schedule, trace.
    pub fn infer_clip(&self, clip: &Clip, query: &str) -> Result<InferenceResult> {
        let grounding = synthvid::resolve_query(clip, query)?;
        let feats = self.clip_features(&clip.frames)?;
        let qt = self.query_tokens(&grounding)?;
        let prompts = self.build_prompts(&feats, &qt)?;
        self.run_schedule(&feats, &prompts, &grounding)
    }

    /// Inference with externally supplied features (tensor-file ingestion).
    pub fn infer_clip_with_volume(
        &self,
        clip: &Clip,
        query: &str,
        volume: &FeatureVolume,
    ) -> Result<InferenceResult> {
        if volume.t_seg() != clip.t_seg() {
            return Err(CoreError::ShapeMismatch {
                op: "infer_clip_with_volume",
                left: vec![volume.t_seg()],
                right: vec![clip.t_seg()],
            });
        }
        let grounding = synthvid::resolve_query(clip, query)?;
        let feats = self.clip_features_from_volume(volume)?;
        let qt = self.query_tokens(&grounding)?;
        let prompts = self.build_prompts(&feats, &qt)?;
        self.run_schedule(&feats, &prompts, &grounding)
    }
}

pub struct InferenceResult {
    pub masks: MaskSequence,
    pub outcome: ScheduleOutcome,
    pub trace: TraceLog,
    pub plan: AnchorPlan,
}

/// Prepared per-clip state for comparative studies: the heavy feature and
/// prompt computation runs once, then strategies and alphas re-run only the
/// scheduler.
pub struct PreparedClip {
    pub feats: ClipFeatures,
    pub prompts: FramePrompts,
    pub grounding: QueryGrounding,
    pub gt: MaskSequence,
    pub absent_at_start: bool,
}

pub fn prepare_clip(model: &Model, clip: &Clip, query: &str) -> Result<PreparedClip> {
    let grounding = synthvid::resolve_query(clip, query)?;
    let feats = model.clip_features(&clip.frames)?;
    let qt = model.query_tokens(&grounding)?;
    let prompts = model.build_prompts(&feats, &qt)?;
    let gt = clip.aggregated_gt(&grounding.object_ids)?;
    let absent_at_start = grounding
        .object_ids
        .iter()
        .all(|&id| !clip.visibility[id][0]);
    Ok(PreparedClip {
        feats,
        prompts,
        grounding,
        gt,
        absent_at_start,
    })
}
