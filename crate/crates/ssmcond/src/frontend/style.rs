//! Global style embedding: a shallow conv over mel frames, a per-frame
//! linear map with tanh, mean-pooled over time.

use crate::error::{Error, Result};
use crate::frontend::mel::MelSpectrogram;
use crate::numerics::{init, Ctx, EvalCtx, Padding, Rng, SeqTensor};

#[derive(Debug, Clone)]
pub struct StyleEmbedding {
    /// 1 x d_s
    pub e: SeqTensor,
}

impl StyleEmbedding {
    pub fn dim(&self) -> usize {
        self.e.cols()
    }

    pub fn zero(d_s: usize) -> Self {
        StyleEmbedding {
            e: SeqTensor::zeros(1, d_s),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StyleParams {
    pub conv_kernel: SeqTensor, // F x k, depthwise over mel bins along time
    pub w: SeqTensor,           // F x d_s
    pub b: SeqTensor,           // 1 x d_s
}

impl StyleParams {
    pub fn init(mel_bins: usize, d_s: usize, k: usize, rng: &mut Rng) -> Self {
        StyleParams {
            conv_kernel: init::conv_kernel(rng, mel_bins, k),
            w: init::dense(rng, mel_bins, d_s),
            b: init::zeros_row(d_s),
        }
    }

    pub fn named_tensors(&self) -> Vec<(&'static str, &SeqTensor)> {
        vec![("conv_kernel", &self.conv_kernel), ("w", &self.w), ("b", &self.b)]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut SeqTensor)> {
        vec![
            ("conv_kernel", &mut self.conv_kernel),
            ("w", &mut self.w),
            ("b", &mut self.b),
        ]
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> StyleHandles<C::H> {
        StyleHandles {
            conv_kernel: ctx.lift(&self.conv_kernel),
            w: ctx.lift(&self.w),
            b: ctx.lift(&self.b),
        }
    }
}

#[derive(Clone)]
pub struct StyleHandles<H> {
    pub conv_kernel: H,
    pub w: H,
    pub b: H,
}

/// e = mean over frames of tanh(linear(conv(frames)))
pub fn style_embed_ctx<C: Ctx>(ctx: &mut C, frames: &C::H, p: &StyleHandles<C::H>) -> C::H {
    let conv = ctx.conv1d(frames, &p.conv_kernel, Padding::Same);
    let lin = ctx.linear(&conv, &p.w, Some(&p.b));
    let act = ctx.tanh(&lin);
    ctx.mean_rows(&act)
}

pub fn style_embed(m: &MelSpectrogram, p: &StyleParams) -> Result<StyleEmbedding> {
    if m.frames() == 0 {
        return Err(Error::InvalidArg {
            op: "style_embed",
            detail: "zero-frame mel".into(),
        });
    }
    let frames = m.to_frames();
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let fh = ctx.lift(&frames);
    let eh = style_embed_ctx(&mut ctx, &fh, &h);
    Ok(StyleEmbedding {
        e: ctx.val(&eh).clone(),
    })
}
