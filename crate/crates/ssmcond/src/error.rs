//! Error types shared across the engine.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument for {op}: {detail}")]
    InvalidArg { op: &'static str, detail: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("tensor file: bad magic")]
    BadMagic,

    #[error("tensor file: truncated payload (expected {expected} bytes, got {got})")]
    Truncated { expected: usize, got: usize },

    #[error("tensor file: unsupported rank {0} (only rank 2 supported)")]
    BadRank(u32),

    #[error("tensor file: unsupported version {0}")]
    BadVersion(u32),

    #[error("wav: expected mono, got {0} channels")]
    WavChannels(u16),

    #[error("wav: expected 24000 Hz, got {0} Hz")]
    WavRate(u32),

    #[error("wav: expected 16-bit PCM, got {0} bits")]
    WavBits(u16),

    #[error("wav: malformed file: {0}")]
    WavMalformed(String),

    #[error("token id {id} at position {pos} out of range (vocab {vocab})")]
    TokenOutOfRange { pos: usize, id: usize, vocab: usize },

    #[error("state bound exceeded at step {step}, channel {channel}: |s| = {value:.3e} > {bound:.3e}")]
    StateBound {
        step: usize,
        channel: usize,
        value: f64,
        bound: f64,
    },

    #[error("stream state mismatch: {0}")]
    StateMismatch(String),

    #[error("training aborted: non-finite loss at step {0}")]
    NonFiniteLoss(usize),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
