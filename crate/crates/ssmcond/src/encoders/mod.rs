//! The three conditioning encoders: gated Bi-Mamba text encoder with AdaLN,
//! Expressive Mamba, and Temporal Bi-Mamba.

mod adaln;
mod expressive;
mod fusion;
mod temporal;
mod text;

pub use adaln::{adaln, adaln_ctx, AdaLNHandles, AdaLNParams, LN_EPS};
pub use expressive::{
    expressive_encode, expressive_encode_ctx, ExpressiveHandles, ExpressiveParams,
};
pub use fusion::{
    gated_fusion, gated_fusion_ctx, gated_fusion_with_trace, gated_transform_ctx,
    GatedFusionHandles, GatedFusionParams, GatedTransformHandles, GatedTransformParams,
};
pub use temporal::{temporal_encode, temporal_encode_ctx, TemporalHandles, TemporalParams};
pub use text::{text_encode, text_encode_ctx, TextEncoderHandles, TextEncoderParams};

use crate::numerics::SeqTensor;

/// Outputs of the full encoder stack.
#[derive(Debug, Clone)]
pub struct EncoderOutputs {
    /// Style-conditioned text features, T_x x d_h.
    pub h_t_s: SeqTensor,
    /// Expressive features, T_m x d_h.
    pub h_e: SeqTensor,
    /// Temporal features, T_m x d_h.
    pub h_b: SeqTensor,
}
