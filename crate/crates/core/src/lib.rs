//! Deterministic engine for anchored referring video segmentation.
//!
//! The crate builds a complete desk-scale pipeline over synthetic clips:
//! seeded tensor numerics, rotary position encodings, a frame-aware video
//! tokenizer, two-stage prompt fusion, an anchor/memory propagation
//! scheduler, a pluggable mask decoder, the five-term training objective with
//! closed-form gradients, and J&F evaluation. Every component is a pure
//! function of its inputs and seeds; identical runs are bit-identical.

pub mod anchor;
pub mod attention;
pub mod config;
pub mod conv;
pub mod decoder;
pub mod error;
pub mod fusion;
pub mod losses;
pub mod mask;
pub mod memory;
pub mod metrics;
pub mod numerics;
pub mod pipeline;
pub mod render;
pub mod rope;
pub mod schedule;
pub mod study;
pub mod synthvid;
pub mod tokenizer;
pub mod trace;

pub use error::{CoreError, Result};
pub use numerics::{LinearMap, SeededRng, Tensor};
