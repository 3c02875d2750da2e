//! SSM-only text-to-speech conditioning engine.
//!
//! Selective state-space scans, gated bidirectional fusion with adaptive
//! layer norm, temporal and expressive encoders, a training-time alignment
//! teacher, pitch heads, decoder-conditioning assembly, a chunked streaming
//! runtime with finite look-ahead, and a deterministic benchmark harness.

pub mod alignpitch;
pub mod bench;
pub mod diagnostics;
pub mod dynamics;
pub mod encoders;
pub mod error;
pub mod frontend;
pub mod model;
pub mod numerics;
pub mod ssm;
pub mod streaming;

pub use error::{Error, Result};
