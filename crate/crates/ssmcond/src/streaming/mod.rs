//! Finite look-ahead streaming runtime: causal pipeline, chunk sessions
//! with state carry, and causality verification.

mod probe;
mod session;

pub use probe::{causality_probe, causality_probe_once, ProbeReport};
pub use session::{
    lookahead_frames, open_session, open_session_frames, StreamPipelineParams, StreamSession,
};
