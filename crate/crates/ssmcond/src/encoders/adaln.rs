//! Adaptive layer norm: LN followed by scale/shift predicted from the style
//! embedding, broadcast over time.

use crate::error::{Error, Result};
use crate::frontend::StyleEmbedding;
use crate::numerics::{init, Ctx, EvalCtx, Rng, SeqTensor};

pub const LN_EPS: f64 = 1e-5;

/// gamma_proj starts at (weights 0, bias 1) so e = 0 modulates identically.
#[derive(Debug, Clone)]
pub struct AdaLNParams {
    pub gamma_w: SeqTensor, // d_s x d_h
    pub gamma_b: SeqTensor, // 1 x d_h
    pub beta_w: SeqTensor,  // d_s x d_h
    pub beta_b: SeqTensor,  // 1 x d_h
    pub eps: f64,
}

impl AdaLNParams {
    pub fn init(d_s: usize, d_h: usize, rng: &mut Rng) -> Self {
        AdaLNParams {
            gamma_w: SeqTensor::zeros(d_s, d_h),
            gamma_b: init::ones_row(d_h),
            beta_w: init::dense(rng, d_s, d_h),
            beta_b: init::zeros_row(d_h),
            eps: LN_EPS,
        }
    }

    pub fn named_tensors(&self) -> Vec<(&'static str, &SeqTensor)> {
        vec![
            ("gamma_w", &self.gamma_w),
            ("gamma_b", &self.gamma_b),
            ("beta_w", &self.beta_w),
            ("beta_b", &self.beta_b),
        ]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut SeqTensor)> {
        vec![
            ("gamma_w", &mut self.gamma_w),
            ("gamma_b", &mut self.gamma_b),
            ("beta_w", &mut self.beta_w),
            ("beta_b", &mut self.beta_b),
        ]
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> AdaLNHandles<C::H> {
        AdaLNHandles {
            gamma_w: ctx.lift(&self.gamma_w),
            gamma_b: ctx.lift(&self.gamma_b),
            beta_w: ctx.lift(&self.beta_w),
            beta_b: ctx.lift(&self.beta_b),
            eps: self.eps,
        }
    }
}

#[derive(Clone)]
pub struct AdaLNHandles<H> {
    pub gamma_w: H,
    pub gamma_b: H,
    pub beta_w: H,
    pub beta_b: H,
    pub eps: f64,
}

/// gamma(e) .* LN(z) + beta(e)
pub fn adaln_ctx<C: Ctx>(ctx: &mut C, z: &C::H, e: &C::H, p: &AdaLNHandles<C::H>) -> C::H {
    let gamma = ctx.linear(e, &p.gamma_w, Some(&p.gamma_b));
    let beta = ctx.linear(e, &p.beta_w, Some(&p.beta_b));
    let ln = ctx.layer_norm(z, p.eps);
    let scaled = ctx.row_mul(&ln, &gamma);
    ctx.row_add(&scaled, &beta)
}

pub fn adaln(z: &SeqTensor, e: &StyleEmbedding, p: &AdaLNParams) -> Result<SeqTensor> {
    if e.e.cols() != p.gamma_w.rows() {
        return Err(Error::Shape {
            op: "adaln",
            detail: format!(
                "style dim {} vs projection rows {}",
                e.e.cols(),
                p.gamma_w.rows()
            ),
        });
    }
    if z.cols() != p.gamma_w.cols() {
        return Err(Error::Shape {
            op: "adaln",
            detail: format!("input dim {} vs d_h {}", z.cols(), p.gamma_w.cols()),
        });
    }
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let zh = ctx.lift(z);
    let eh = ctx.lift(&e.e);
    let out = adaln_ctx(&mut ctx, &zh, &eh, &h);
    Ok(ctx.val(&out).clone())
}
