//! Training-time attention aligner with monotonic regularization, the
//! robustness perturbation, and the pitch path. The aligner never runs at
//! inference; only `pitch_fuse`/`predict_f0` are on inference paths.

mod aligner;
mod monotonic;
mod perturb;
mod pitch;

pub use aligner::{
    align, align_ctx, positional_encoding, AlignerHandles, AlignerLayerHandles,
    AlignerLayerParams, AlignerParams, AlignmentMatrix, ALIGNER_HEADS, ALIGNER_HIDDEN,
    ALIGNER_LAYERS,
};
pub use monotonic::{monotonic_loss, monotonic_loss_ctx};
pub use perturb::perturb_alpha;
pub use pitch::{
    pitch_fuse, pitch_fuse_ctx, predict_f0, predict_f0_ctx, PitchHandles, PitchOutputs,
    PitchParams,
};
