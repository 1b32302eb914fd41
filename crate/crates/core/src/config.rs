//! Run configuration: typed keys with defaults, a `key = value` text format,
//! command-line overrides, and a canonical echo embedded in every report.

use crate::anchor::{AnchorMode, Strategy};
use crate::error::{CoreError, Result};
use crate::losses::LossWeights;
use crate::tokenizer::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemanticKind {
    Identity,
    Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub stf_n: usize,
    pub stf_heads: usize,
    pub stf_semantic: SemanticKind,
    pub stf_gain: f64,
    pub tokenizer_d: usize,
    pub tokenizer_activation: Activation,
    pub encoder_channels: usize,
    pub rope_base: f64,
    /// 0 derives the head dim from `tokenizer.D / stf.heads`.
    pub rope_head_dim: usize,
    pub tdau_alpha: usize,
    pub tdau_fifo_capacity: usize,
    pub tdau_anchor_mode: AnchorMode,
    pub tdau_strategy: Strategy,
    pub tdau_causal: bool,
    pub tdau_n_prop: usize,
    pub tdau_m_tokens: usize,
    pub tdau_gain: f64,
    pub tdau_occ_center: f64,
    pub loss_weights: LossWeights,
    pub loss_dice_eps: f64,
    pub decoder_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            stf_n: 8,
            stf_heads: 1,
            stf_semantic: SemanticKind::Mlp,
            stf_gain: 12.0,
            tokenizer_d: 64,
            tokenizer_activation: Activation::None,
            encoder_channels: 256,
            rope_base: 10000.0,
            rope_head_dim: 0,
            tdau_alpha: 3,
            tdau_fifo_capacity: 6,
            tdau_anchor_mode: AnchorMode::Spaced,
            tdau_strategy: Strategy::Dynamic,
            tdau_causal: false,
            tdau_n_prop: 5,
            tdau_m_tokens: 16,
            tdau_gain: 32.0,
            tdau_occ_center: 0.1,
            loss_weights: LossWeights::default(),
            loss_dice_eps: 1.0,
            decoder_threshold: 0.0,
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| CoreError::Config(format!("invalid value {value:?} for key {key:?}")))
}

impl RunConfig {
    /// Set one key; the update is atomic (a rejected value leaves the config
    /// unchanged). Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut next = self.clone();
        next.set_unchecked(key, value)?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn set_unchecked(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse_as(key, v)?,
            "stf.N" => self.stf_n = parse_as(key, v)?,
            "stf.heads" => self.stf_heads = parse_as(key, v)?,
            "stf.semantic_transform" => {
                self.stf_semantic = match v {
                    "identity" => SemanticKind::Identity,
                    "mlp" => SemanticKind::Mlp,
                    other => {
                        return Err(CoreError::Config(format!(
                            "stf.semantic_transform must be identity|mlp, got {other:?}"
                        )))
                    }
                }
            }
            "stf.gain" => self.stf_gain = parse_as(key, v)?,
            "tokenizer.D" => self.tokenizer_d = parse_as(key, v)?,
            "tokenizer.activation" => {
                self.tokenizer_activation = match v {
                    "none" => Activation::None,
                    "relu" => Activation::Relu,
                    other => {
                        return Err(CoreError::Config(format!(
                            "tokenizer.activation must be none|relu, got {other:?}"
                        )))
                    }
                }
            }
            "encoder.channels" => self.encoder_channels = parse_as(key, v)?,
            "rope.base" => self.rope_base = parse_as(key, v)?,
            "rope.head_dim" => self.rope_head_dim = parse_as(key, v)?,
            "tdau.alpha" => self.tdau_alpha = parse_as(key, v)?,
            "tdau.fifo_capacity" => self.tdau_fifo_capacity = parse_as(key, v)?,
            "tdau.anchor_mode" => self.tdau_anchor_mode = AnchorMode::parse(v)?,
            "tdau.strategy" => self.tdau_strategy = Strategy::parse(v)?,
            "tdau.causal" => self.tdau_causal = parse_as(key, v)?,
            "tdau.n_prop" => self.tdau_n_prop = parse_as(key, v)?,
            "tdau.m_tokens" => self.tdau_m_tokens = parse_as(key, v)?,
            "tdau.gain" => self.tdau_gain = parse_as(key, v)?,
            "tdau.occ_center" => self.tdau_occ_center = parse_as(key, v)?,
            "loss.lambda_bce" => self.loss_weights.bce = parse_as(key, v)?,
            "loss.lambda_dice" => self.loss_weights.dice = parse_as(key, v)?,
            "loss.lambda_token" => self.loss_weights.token = parse_as(key, v)?,
            "loss.lambda_occ" => self.loss_weights.occ = parse_as(key, v)?,
            "loss.lambda_iou" => self.loss_weights.iou = parse_as(key, v)?,
            "loss.dice_eps" => self.loss_dice_eps = parse_as(key, v)?,
            "decoder.threshold" => self.decoder_threshold = parse_as(key, v)?,
            other => {
                return Err(CoreError::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.stf_n < 1 {
            return Err(CoreError::Config("stf.N must be at least 1".into()));
        }
        if self.stf_heads < 1 || !self.tokenizer_d.is_multiple_of(self.stf_heads) {
            return Err(CoreError::Config(format!(
                "stf.heads {} must divide tokenizer.D {}",
                self.stf_heads, self.tokenizer_d
            )));
        }
        if self.rope_head_dim != 0 && self.rope_head_dim != self.tokenizer_d / self.stf_heads {
            return Err(CoreError::Config(format!(
                "rope.head_dim {} inconsistent with tokenizer.D {} / stf.heads {}",
                self.rope_head_dim, self.tokenizer_d, self.stf_heads
            )));
        }
        if self.tdau_alpha < 1 {
            return Err(CoreError::Config("tdau.alpha must be at least 1".into()));
        }
        if self.tdau_fifo_capacity < 1 {
            return Err(CoreError::Config("tdau.fifo_capacity must be at least 1".into()));
        }
        if !matches!(self.tdau_m_tokens, 1 | 4 | 16 | 64) {
            return Err(CoreError::Config(format!(
                "tdau.m_tokens must be one of 1|4|16|64, got {}",
                self.tdau_m_tokens
            )));
        }
        Ok(())
    }

    /// Parse a `key = value` file (`#` starts a comment) over the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CoreError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Apply a `key=value` override (the CLI `--set` form).
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CoreError::Config(format!("override {pair:?}: expected key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn rope_head_dim_effective(&self) -> usize {
        if self.rope_head_dim != 0 {
            self.rope_head_dim
        } else {
            self.tokenizer_d / self.stf_heads
        }
    }

    /// Canonical sorted `key = value` listing, embedded verbatim in reports.
    pub fn echo(&self) -> String {
        let act = match self.tokenizer_activation {
            Activation::None => "none",
            Activation::Relu => "relu",
        };
        let sem = match self.stf_semantic {
            SemanticKind::Identity => "identity",
            SemanticKind::Mlp => "mlp",
        };
        let mut pairs: Vec<(String, String)> = vec![
            ("seed".into(), self.seed.to_string()),
            ("stf.N".into(), self.stf_n.to_string()),
            ("stf.heads".into(), self.stf_heads.to_string()),
            ("stf.semantic_transform".into(), sem.to_string()),
            ("stf.gain".into(), fmt_f64(self.stf_gain)),
            ("tokenizer.D".into(), self.tokenizer_d.to_string()),
            ("tokenizer.activation".into(), act.to_string()),
            ("encoder.channels".into(), self.encoder_channels.to_string()),
            ("rope.base".into(), fmt_f64(self.rope_base)),
            ("rope.head_dim".into(), self.rope_head_dim.to_string()),
            ("tdau.alpha".into(), self.tdau_alpha.to_string()),
            (
                "tdau.fifo_capacity".into(),
                self.tdau_fifo_capacity.to_string(),
            ),
            (
                "tdau.anchor_mode".into(),
                self.tdau_anchor_mode.name().to_string(),
            ),
            ("tdau.strategy".into(), self.tdau_strategy.name().to_string()),
            ("tdau.causal".into(), self.tdau_causal.to_string()),
            ("tdau.n_prop".into(), self.tdau_n_prop.to_string()),
            ("tdau.m_tokens".into(), self.tdau_m_tokens.to_string()),
            ("tdau.gain".into(), fmt_f64(self.tdau_gain)),
            ("tdau.occ_center".into(), fmt_f64(self.tdau_occ_center)),
            ("loss.lambda_bce".into(), fmt_f64(self.loss_weights.bce)),
            ("loss.lambda_dice".into(), fmt_f64(self.loss_weights.dice)),
            ("loss.lambda_token".into(), fmt_f64(self.loss_weights.token)),
            ("loss.lambda_occ".into(), fmt_f64(self.loss_weights.occ)),
            ("loss.lambda_iou".into(), fmt_f64(self.loss_weights.iou)),
            ("loss.dice_eps".into(), fmt_f64(self.loss_dice_eps)),
            (
                "decoder.threshold".into(),
                fmt_f64(self.decoder_threshold),
            ),
        ];
        pairs.sort();
        pairs
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn fmt_f64(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}
