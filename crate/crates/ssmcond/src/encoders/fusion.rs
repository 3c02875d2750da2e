//! Gated fusion of forward/backward features, and the shallow gated
//! transform used by the expressive and temporal encoders.

use crate::error::{Error, Result};
use crate::numerics::{init, Ctx, EvalCtx, Rng, SeqTensor};

/// h_T = (sigmoid(W_g [h_f; h_b] / tau) .* [h_f; h_b]) W_o
#[derive(Debug, Clone)]
pub struct GatedFusionParams {
    pub w_g: SeqTensor, // 2d_h x 2d_h
    pub w_o: SeqTensor, // 2d_h x d_h
    pub tau: f64,
}

impl GatedFusionParams {
    pub fn new(w_g: SeqTensor, w_o: SeqTensor, tau: f64) -> Result<Self> {
        if tau <= 0.0 {
            return Err(Error::InvalidArg {
                op: "GatedFusionParams",
                detail: format!("gating temperature must be positive, got {tau}"),
            });
        }
        Ok(GatedFusionParams { w_g, w_o, tau })
    }

    pub fn init(d_h: usize, tau: f64, rng: &mut Rng) -> Result<Self> {
        Self::new(
            init::dense(rng, 2 * d_h, 2 * d_h),
            init::dense(rng, 2 * d_h, d_h),
            tau,
        )
    }

    pub fn named_tensors(&self) -> Vec<(&'static str, &SeqTensor)> {
        vec![("w_g", &self.w_g), ("w_o", &self.w_o)]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut SeqTensor)> {
        vec![("w_g", &mut self.w_g), ("w_o", &mut self.w_o)]
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> GatedFusionHandles<C::H> {
        GatedFusionHandles {
            w_g: ctx.lift(&self.w_g),
            w_o: ctx.lift(&self.w_o),
            tau: self.tau,
        }
    }
}

#[derive(Clone)]
pub struct GatedFusionHandles<H> {
    pub w_g: H,
    pub w_o: H,
    pub tau: f64,
}

/// Returns (fused output, raw gate activations 2d_h wide).
pub fn gated_fusion_ctx<C: Ctx>(
    ctx: &mut C,
    h_f: &C::H,
    h_b: &C::H,
    p: &GatedFusionHandles<C::H>,
) -> (C::H, C::H) {
    let cat = ctx.concat_cols(h_f, h_b);
    let logits = ctx.linear(&cat, &p.w_g, None);
    let scaled = ctx.scale(&logits, 1.0 / p.tau);
    let gates = ctx.sigmoid(&scaled);
    let gated = ctx.mul(&gates, &cat);
    let out = ctx.linear(&gated, &p.w_o, None);
    (out, gates)
}

pub fn gated_fusion(
    h_f: &SeqTensor,
    h_b: &SeqTensor,
    p: &GatedFusionParams,
) -> Result<SeqTensor> {
    Ok(gated_fusion_with_trace(h_f, h_b, p)?.0)
}

pub fn gated_fusion_with_trace(
    h_f: &SeqTensor,
    h_b: &SeqTensor,
    p: &GatedFusionParams,
) -> Result<(SeqTensor, SeqTensor)> {
    if !h_f.same_shape(h_b) {
        return Err(Error::Shape {
            op: "gated_fusion",
            detail: format!(
                "h_f is {}x{}, h_b is {}x{}",
                h_f.rows(),
                h_f.cols(),
                h_b.rows(),
                h_b.cols()
            ),
        });
    }
    if 2 * h_f.cols() != p.w_g.rows() {
        return Err(Error::Shape {
            op: "gated_fusion",
            detail: format!("inputs {} wide vs W_g {} rows", h_f.cols(), p.w_g.rows()),
        });
    }
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let hf = ctx.lift(h_f);
    let hb = ctx.lift(h_b);
    let (out, gates) = gated_fusion_ctx(&mut ctx, &hf, &hb, &h);
    Ok((ctx.val(&out).clone(), ctx.val(&gates).clone()))
}

/// Shallow gated transform: project then z .* sigmoid(U z).
#[derive(Debug, Clone)]
pub struct GatedTransformParams {
    pub proj_w: SeqTensor, // d_in x d_h
    pub proj_b: SeqTensor, // 1 x d_h
    pub u: SeqTensor,      // d_h x d_h
}

impl GatedTransformParams {
    pub fn init(d_in: usize, d_h: usize, rng: &mut Rng) -> Self {
        GatedTransformParams {
            proj_w: init::dense(rng, d_in, d_h),
            proj_b: init::zeros_row(d_h),
            u: init::dense(rng, d_h, d_h),
        }
    }

    pub fn named_tensors(&self) -> Vec<(&'static str, &SeqTensor)> {
        vec![("proj_w", &self.proj_w), ("proj_b", &self.proj_b), ("u", &self.u)]
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(&'static str, &mut SeqTensor)> {
        vec![
            ("proj_w", &mut self.proj_w),
            ("proj_b", &mut self.proj_b),
            ("u", &mut self.u),
        ]
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> GatedTransformHandles<C::H> {
        GatedTransformHandles {
            proj_w: ctx.lift(&self.proj_w),
            proj_b: ctx.lift(&self.proj_b),
            u: ctx.lift(&self.u),
        }
    }
}

#[derive(Clone)]
pub struct GatedTransformHandles<H> {
    pub proj_w: H,
    pub proj_b: H,
    pub u: H,
}

pub fn gated_transform_ctx<C: Ctx>(
    ctx: &mut C,
    x: &C::H,
    p: &GatedTransformHandles<C::H>,
) -> C::H {
    let z = ctx.linear(x, &p.proj_w, Some(&p.proj_b));
    let uz = ctx.linear(&z, &p.u, None);
    let g = ctx.sigmoid(&uz);
    ctx.mul(&z, &g)
}
