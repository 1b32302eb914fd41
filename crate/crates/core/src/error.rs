//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Dimension mismatch between two operands. Carries both shapes so the
    /// failing call site is identifiable from the message alone.
    #[error("shape mismatch in {op}: left {left:?} vs right {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// Invalid configuration (odd head dim with a rotation plan, bad chunk
    /// partition, unknown config key, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Attention was invoked with an empty key/value set.
    #[error("cross-attention requires at least one key token")]
    EmptyKeys,

    /// Index outside the valid range.
    #[error("index {index} out of range for {what} of length {len}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    /// A memory entry referenced by the scheduler is missing from the bank.
    #[error("memory bank has no entry for frame {frame} ({track})")]
    BankMissingEntry { frame: usize, track: &'static str },

    /// A scheduler reached a propagated frame with no memory to condition on.
    #[error("no memory available at propagated frame {frame}")]
    EmptyMemory { frame: usize },

    /// A value became non-finite where the tensor contract forbids it.
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    /// A singular query template matched zero or several objects.
    #[error("ambiguous query: {0}")]
    AmbiguousQuery(String),

    /// Malformed scene specification.
    #[error("scene spec error: {0}")]
    SceneSpec(String),

    /// Malformed on-disk data (tensor file, manifest, PPM/PGM, trace).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
