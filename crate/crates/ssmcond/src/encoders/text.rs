//! Gated Bi-Mamba text encoder with AdaLN style conditioning.
//!
//! An input projection to d_h, two independent stacks of causal-direction
//! blocks (forward in time, and time-reversed), gated fusion of the final
//! forward/backward features, then AdaLN. The raw gate activations are
//! returned for the gate-statistics harness.

use crate::encoders::adaln::{adaln_ctx, AdaLNHandles, AdaLNParams};
use crate::encoders::fusion::{gated_fusion_ctx, GatedFusionHandles, GatedFusionParams};
use crate::error::{Error, Result};
use crate::frontend::StyleEmbedding;
use crate::numerics::{init, Ctx, EvalCtx, Padding, Rng, SeqTensor};
use crate::ssm::{mamba_block_ctx, MambaLayerHandles, MambaLayerParams};

#[derive(Debug, Clone)]
pub struct TextEncoderParams {
    pub in_w: SeqTensor, // d x d_h
    pub in_b: SeqTensor, // 1 x d_h
    pub fwd: Vec<MambaLayerParams>,
    pub bwd: Vec<MambaLayerParams>,
    pub fusion: GatedFusionParams,
    pub adaln: AdaLNParams,
}

impl TextEncoderParams {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        d: usize,
        d_h: usize,
        d_s: usize,
        d_ssm: usize,
        k: usize,
        tau: f64,
        layers: usize,
        s_max: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        Ok(TextEncoderParams {
            in_w: init::dense(rng, d, d_h),
            in_b: init::zeros_row(d_h),
            fwd: (0..layers)
                .map(|_| MambaLayerParams::init(d_h, d_ssm, k, s_max, rng))
                .collect(),
            bwd: (0..layers)
                .map(|_| MambaLayerParams::init(d_h, d_ssm, k, s_max, rng))
                .collect(),
            fusion: GatedFusionParams::init(d_h, tau, rng)?,
            adaln: AdaLNParams::init(d_s, d_h, rng),
        })
    }

    pub fn layers(&self) -> usize {
        self.fwd.len()
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> TextEncoderHandles<C::H> {
        TextEncoderHandles {
            in_w: ctx.lift(&self.in_w),
            in_b: ctx.lift(&self.in_b),
            fwd: self.fwd.iter().map(|l| l.bind(ctx)).collect(),
            bwd: self.bwd.iter().map(|l| l.bind(ctx)).collect(),
            fusion: self.fusion.bind(ctx),
            adaln: self.adaln.bind(ctx),
        }
    }
}

#[derive(Clone)]
pub struct TextEncoderHandles<H> {
    pub in_w: H,
    pub in_b: H,
    pub fwd: Vec<MambaLayerHandles<H>>,
    pub bwd: Vec<MambaLayerHandles<H>>,
    pub fusion: GatedFusionHandles<H>,
    pub adaln: AdaLNHandles<H>,
}

/// Returns (h_T_s, gate_trace).
pub fn text_encode_ctx<C: Ctx>(
    ctx: &mut C,
    x: &C::H,
    e: &C::H,
    p: &TextEncoderHandles<C::H>,
    padding: Padding,
) -> (C::H, C::H) {
    let z = ctx.linear(x, &p.in_w, Some(&p.in_b));
    let mut h_f = z.clone();
    for layer in &p.fwd {
        h_f = mamba_block_ctx(ctx, &h_f, layer, padding);
    }
    let mut h_b_rev = ctx.reverse_rows(&z);
    for layer in &p.bwd {
        h_b_rev = mamba_block_ctx(ctx, &h_b_rev, layer, padding);
    }
    let h_b = ctx.reverse_rows(&h_b_rev);
    let (h_t, gates) = gated_fusion_ctx(ctx, &h_f, &h_b, &p.fusion);
    let h_t_s = adaln_ctx(ctx, &h_t, e, &p.adaln);
    (h_t_s, gates)
}

pub fn text_encode(
    x: &SeqTensor,
    e: &StyleEmbedding,
    p: &TextEncoderParams,
) -> Result<(SeqTensor, SeqTensor)> {
    if x.rows() == 0 {
        return Err(Error::InvalidArg {
            op: "text_encode",
            detail: "empty token sequence".into(),
        });
    }
    if x.cols() != p.in_w.rows() {
        return Err(Error::Shape {
            op: "text_encode",
            detail: format!("embedding dim {} vs input proj {}", x.cols(), p.in_w.rows()),
        });
    }
    x.check_finite("text_encode input")?;
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let xh = ctx.lift(x);
    let eh = ctx.lift(&e.e);
    let (out, gates) = text_encode_ctx(&mut ctx, &xh, &eh, &h, Padding::Same);
    Ok((ctx.val(&out).clone(), ctx.val(&gates).clone()))
}
