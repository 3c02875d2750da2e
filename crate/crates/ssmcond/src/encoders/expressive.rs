//! Expressive encoder: mel frames through a gated transform, AdaLN style
//! conditioning, then Mamba blocks at frame rate.

use crate::encoders::adaln::{adaln_ctx, AdaLNHandles, AdaLNParams};
use crate::encoders::fusion::{gated_transform_ctx, GatedTransformHandles, GatedTransformParams};
use crate::error::{Error, Result};
use crate::frontend::{MelSpectrogram, StyleEmbedding};
use crate::numerics::{Ctx, EvalCtx, Padding, Rng, SeqTensor};
use crate::ssm::{mamba_block_ctx, MambaLayerHandles, MambaLayerParams};

#[derive(Debug, Clone)]
pub struct ExpressiveParams {
    pub gt: GatedTransformParams, // F -> d_h
    pub adaln: AdaLNParams,
    pub blocks: Vec<MambaLayerParams>,
}

impl ExpressiveParams {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        mel_bins: usize,
        d_h: usize,
        d_s: usize,
        d_ssm: usize,
        k: usize,
        layers: usize,
        s_max: f64,
        rng: &mut Rng,
    ) -> Self {
        ExpressiveParams {
            gt: GatedTransformParams::init(mel_bins, d_h, rng),
            adaln: AdaLNParams::init(d_s, d_h, rng),
            blocks: (0..layers)
                .map(|_| MambaLayerParams::init(d_h, d_ssm, k, s_max, rng))
                .collect(),
        }
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> ExpressiveHandles<C::H> {
        ExpressiveHandles {
            gt: self.gt.bind(ctx),
            adaln: self.adaln.bind(ctx),
            blocks: self.blocks.iter().map(|b| b.bind(ctx)).collect(),
        }
    }
}

#[derive(Clone)]
pub struct ExpressiveHandles<H> {
    pub gt: GatedTransformHandles<H>,
    pub adaln: AdaLNHandles<H>,
    pub blocks: Vec<MambaLayerHandles<H>>,
}

pub fn expressive_encode_ctx<C: Ctx>(
    ctx: &mut C,
    frames: &C::H,
    e: &C::H,
    p: &ExpressiveHandles<C::H>,
) -> C::H {
    let z = gated_transform_ctx(ctx, frames, &p.gt);
    let mut h = adaln_ctx(ctx, &z, e, &p.adaln);
    for block in &p.blocks {
        h = mamba_block_ctx(ctx, &h, block, Padding::Same);
    }
    h
}

pub fn expressive_encode(
    m: &MelSpectrogram,
    e: &StyleEmbedding,
    p: &ExpressiveParams,
) -> Result<SeqTensor> {
    if m.frames() == 0 {
        return Err(Error::InvalidArg {
            op: "expressive_encode",
            detail: "zero-frame mel".into(),
        });
    }
    let frames = m.to_frames();
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let fh = ctx.lift(&frames);
    let eh = ctx.lift(&e.e);
    let out = expressive_encode_ctx(&mut ctx, &fh, &eh, &h);
    Ok(ctx.val(&out).clone())
}
