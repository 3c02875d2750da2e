//! Speech-dynamics stage: temporal predictor, decoder-conditioning assembly,
//! toy decoder stub, loss assembly, optimizer, synthetic data, and the
//! desk-scale training loop.

mod conditioning;
pub mod dataset;
mod loss;
mod optimizer;
mod predictor;
mod train;

pub use conditioning::{
    assemble_conditioning, assemble_conditioning_ctx, toy_decode, toy_decode_ctx,
    ConditioningHeadHandles, ConditioningHeadParams, ConditioningSequence, DecoderStubHandles,
    DecoderStubParams,
};
pub use loss::{eval_metrics, total_loss, total_loss_ctx, EvalMetrics, LossWeights};
pub use optimizer::{clip_global_norm, warmup_for, AdamW, Ema, TrainConfig};
pub use predictor::{
    interp_align, temporal_predict, temporal_predict_ctx, TemporalPredictorHandles,
    TemporalPredictorParams,
};
pub use train::{train, LossRow, TrainOutcome};
