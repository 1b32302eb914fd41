//! Comparative studies over anchor strategies and anchor counts.
//!
//! A suite is a seeded set of synthetic clips. Feature extraction and prompt
//! fusion run once per clip; each (strategy, alpha) setting then re-runs only
//! the scheduler, which is also what the per-setting timing covers.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::anchor::Strategy;
use crate::config::RunConfig;
use crate::error::{CoreError, Result};
use crate::metrics::{jf_mean, sequence_jf, DEFAULT_BOUNDARY_TOL};
use crate::pipeline::{prepare_clip, Model, PreparedClip};
use crate::synthvid::{attach_query, generate, trend_suite, Clip};

/// On-disk suite description consumed by the ablation command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub seed: u64,
    pub clips: usize,
    pub t_seg: usize,
    pub strategies: Vec<String>,
    pub alphas: Vec<usize>,
    /// Config overrides applied on top of the defaults.
    #[serde(default)]
    pub set: BTreeMap<String, String>,
}

impl SuiteSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CoreError::Parse(format!("suite spec: {e}")))
    }

    pub fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (k, v) in &self.set {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

/// One clip with its heavy per-clip artifacts precomputed.
pub struct PreparedSuite {
    pub model: Model,
    pub clips: Vec<PreparedClip>,
    /// Fraction of clips whose target is absent at frame 0.
    pub absent_at_start_fraction: f64,
}

/// Generate the alternating reappear/occlusion suite and precompute per-clip
/// state.
pub fn prepare_trend_suite(
    cfg: &RunConfig,
    seed: u64,
    n_clips: usize,
    t_seg: usize,
) -> Result<PreparedSuite> {
    let scenes = trend_suite(seed, n_clips, t_seg)?;
    let mut clips = Vec::with_capacity(n_clips);
    for (spec, query) in &scenes {
        let mut clip = generate(spec)?;
        attach_query(&mut clip, query)?;
        clips.push((clip, query.clone()));
    }
    prepare_suite(cfg, clips)
}

pub fn prepare_suite(cfg: &RunConfig, clips: Vec<(Clip, String)>) -> Result<PreparedSuite> {
    let model = Model::new(cfg)?;
    let mut prepared = Vec::with_capacity(clips.len());
    for (clip, query) in &clips {
        prepared.push(prepare_clip(&model, clip, query)?);
    }
    let absent = prepared.iter().filter(|p| p.absent_at_start).count();
    let fraction = absent as f64 / prepared.len().max(1) as f64;
    Ok(PreparedSuite {
        model,
        clips: prepared,
        absent_at_start_fraction: fraction,
    })
}

/// Aggregate result of one (strategy, alpha) setting over a suite.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub strategy: String,
    pub alpha: usize,
    pub mean_j: f64,
    pub mean_f: f64,
    pub mean_jf: f64,
    /// Scheduler wall-clock over all clips, seconds.
    pub seconds: f64,
}

/// Run one setting over every clip of the suite.
pub fn run_setting(suite: &PreparedSuite, strategy: Strategy, alpha: usize) -> Result<StudyRow> {
    let mut cfg = suite.model.cfg.clone();
    cfg.tdau_strategy = strategy;
    cfg.tdau_alpha = alpha;
    let mut js = Vec::with_capacity(suite.clips.len());
    let mut fs = Vec::with_capacity(suite.clips.len());
    let mut seconds = 0.0;
    for clip in &suite.clips {
        let start = Instant::now();
        let result =
            suite
                .model
                .run_schedule_with(&cfg, &clip.feats, &clip.prompts, &clip.grounding)?;
        seconds += start.elapsed().as_secs_f64();
        let (j, f) = sequence_jf(&result.masks, &clip.gt, DEFAULT_BOUNDARY_TOL)?;
        js.push(j);
        fs.push(f);
    }
    let (mean_j, mean_f, mean_jf) = jf_mean(&js, &fs)?;
    Ok(StudyRow {
        strategy: strategy.name().to_string(),
        alpha,
        mean_j,
        mean_f,
        mean_jf,
        seconds,
    })
}

/// Full cross product of strategies and alphas.
pub fn run_study(
    suite: &PreparedSuite,
    strategies: &[Strategy],
    alphas: &[usize],
) -> Result<Vec<StudyRow>> {
    let mut rows = Vec::new();
    for &strategy in strategies {
        for &alpha in alphas {
            rows.push(run_setting(suite, strategy, alpha)?);
        }
    }
    Ok(rows)
}

/// CSV rendering: one row per (strategy, alpha) with percentages to one
/// decimal.
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("strategy,alpha,mean_j,mean_f,mean_jf\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.1},{:.1},{:.1}\n",
            r.strategy, r.alpha, r.mean_j, r.mean_f, r.mean_jf
        ));
    }
    out
}
