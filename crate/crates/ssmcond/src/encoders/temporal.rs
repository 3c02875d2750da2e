//! Temporal encoder: the style embedding broadcast over frames, a gated
//! transform, forward/backward Mamba blocks with a parallel depthwise conv
//! branch summed into each direction's input, and a linear (ungated) fusion.

use crate::encoders::fusion::{
    gated_fusion_ctx, gated_transform_ctx, GatedFusionHandles, GatedFusionParams,
    GatedTransformHandles, GatedTransformParams,
};
use crate::error::{Error, Result};
use crate::frontend::StyleEmbedding;
use crate::numerics::{init, Ctx, EvalCtx, Padding, Rng, SeqTensor};
use crate::ssm::{mamba_block_ctx, MambaLayerHandles, MambaLayerParams};

/// Fusion stays linear by default; the gated variant exists only for the
/// ablation harness.
#[derive(Debug, Clone)]
pub struct TemporalParams {
    pub gt: GatedTransformParams, // d_s -> d_h
    pub conv_kernel: SeqTensor,   // d_h x k, parallel local branch
    pub fwd: Vec<MambaLayerParams>,
    pub bwd: Vec<MambaLayerParams>,
    pub w_f: SeqTensor, // 2d_h x d_h, linear fusion
    pub gated_fusion: Option<GatedFusionParams>,
}

impl TemporalParams {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        d_s: usize,
        d_h: usize,
        d_ssm: usize,
        k: usize,
        layers: usize,
        s_max: f64,
        rng: &mut Rng,
    ) -> Self {
        TemporalParams {
            gt: GatedTransformParams::init(d_s, d_h, rng),
            conv_kernel: init::conv_kernel(rng, d_h, k),
            fwd: (0..layers)
                .map(|_| MambaLayerParams::init(d_h, d_ssm, k, s_max, rng))
                .collect(),
            bwd: (0..layers)
                .map(|_| MambaLayerParams::init(d_h, d_ssm, k, s_max, rng))
                .collect(),
            w_f: init::dense(rng, 2 * d_h, d_h),
            gated_fusion: None,
        }
    }

    /// Ablation variant: replace the linear fusion with a gated one.
    pub fn with_gated_fusion(mut self, tau: f64, rng: &mut Rng) -> Result<Self> {
        let d_h = self.w_f.cols();
        self.gated_fusion = Some(GatedFusionParams::init(d_h, tau, rng)?);
        Ok(self)
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> TemporalHandles<C::H> {
        TemporalHandles {
            gt: self.gt.bind(ctx),
            conv_kernel: ctx.lift(&self.conv_kernel),
            fwd: self.fwd.iter().map(|l| l.bind(ctx)).collect(),
            bwd: self.bwd.iter().map(|l| l.bind(ctx)).collect(),
            w_f: ctx.lift(&self.w_f),
            gated_fusion: self.gated_fusion.as_ref().map(|g| g.bind(ctx)),
        }
    }
}

#[derive(Clone)]
pub struct TemporalHandles<H> {
    pub gt: GatedTransformHandles<H>,
    pub conv_kernel: H,
    pub fwd: Vec<MambaLayerHandles<H>>,
    pub bwd: Vec<MambaLayerHandles<H>>,
    pub w_f: H,
    pub gated_fusion: Option<GatedFusionHandles<H>>,
}

pub fn temporal_encode_ctx<C: Ctx>(
    ctx: &mut C,
    e: &C::H,
    t_m: usize,
    p: &TemporalHandles<C::H>,
) -> C::H {
    let bc = ctx.broadcast_row(e, t_m);
    let h_s = gated_transform_ctx(ctx, &bc, &p.gt);
    let conv = ctx.conv1d(&h_s, &p.conv_kernel, Padding::Same);
    let inp = ctx.add(&h_s, &conv);
    let mut h_f = inp.clone();
    for layer in &p.fwd {
        h_f = mamba_block_ctx(ctx, &h_f, layer, Padding::Same);
    }
    let mut h_b_rev = ctx.reverse_rows(&inp);
    for layer in &p.bwd {
        h_b_rev = mamba_block_ctx(ctx, &h_b_rev, layer, Padding::Same);
    }
    let h_b = ctx.reverse_rows(&h_b_rev);
    match &p.gated_fusion {
        Some(g) => gated_fusion_ctx(ctx, &h_f, &h_b, g).0,
        None => {
            let cat = ctx.concat_cols(&h_f, &h_b);
            ctx.linear(&cat, &p.w_f, None)
        }
    }
}

pub fn temporal_encode(e: &StyleEmbedding, t_m: usize, p: &TemporalParams) -> Result<SeqTensor> {
    if t_m == 0 {
        return Err(Error::InvalidArg {
            op: "temporal_encode",
            detail: "T_m must be at least 1".into(),
        });
    }
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let eh = ctx.lift(&e.e);
    let out = temporal_encode_ctx(&mut ctx, &eh, t_m, &h);
    Ok(ctx.val(&out).clone())
}
