//! Pitch path: gated fusion of expressive and temporal features, and the
//! linear F0 head.

use crate::encoders::{gated_fusion_ctx, GatedFusionHandles, GatedFusionParams};
use crate::error::{Error, Result};
use crate::numerics::{init, Ctx, Rng, SeqTensor};

#[derive(Debug, Clone)]
pub struct PitchParams {
    pub fusion: GatedFusionParams,
    pub w_f0: SeqTensor, // d_h x 1
    pub b_f0: SeqTensor, // 1 x 1
}

impl PitchParams {
    pub fn init(d_h: usize, tau: f64, rng: &mut Rng) -> Result<Self> {
        Ok(PitchParams {
            fusion: GatedFusionParams::init(d_h, tau, rng)?,
            w_f0: init::dense(rng, d_h, 1),
            b_f0: init::zeros_row(1),
        })
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> PitchHandles<C::H> {
        PitchHandles {
            fusion: self.fusion.bind(ctx),
            w_f0: ctx.lift(&self.w_f0),
            b_f0: ctx.lift(&self.b_f0),
        }
    }
}

#[derive(Clone)]
pub struct PitchHandles<H> {
    pub fusion: GatedFusionHandles<H>,
    pub w_f0: H,
    pub b_f0: H,
}

#[derive(Debug, Clone)]
pub struct PitchOutputs {
    /// T_m x d_h fused pitch features.
    pub h_p: SeqTensor,
    /// T_m x 1 contour.
    pub f0: SeqTensor,
}

pub fn pitch_fuse_ctx<C: Ctx>(
    ctx: &mut C,
    h_e: &C::H,
    h_b: &C::H,
    p: &PitchHandles<C::H>,
) -> C::H {
    gated_fusion_ctx(ctx, h_e, h_b, &p.fusion).0
}

pub fn predict_f0_ctx<C: Ctx>(ctx: &mut C, h_p: &C::H, p: &PitchHandles<C::H>) -> C::H {
    ctx.linear(h_p, &p.w_f0, Some(&p.b_f0))
}

pub fn pitch_fuse(h_e: &SeqTensor, h_b: &SeqTensor, p: &PitchParams) -> Result<SeqTensor> {
    crate::encoders::gated_fusion(h_e, h_b, &p.fusion)
}

pub fn predict_f0(h_p: &SeqTensor, w_f0: &SeqTensor, b_f0: f64) -> Result<SeqTensor> {
    if w_f0.cols() != 1 {
        return Err(Error::Shape {
            op: "predict_f0",
            detail: format!("W_F must be d_h x 1, got {}x{}", w_f0.rows(), w_f0.cols()),
        });
    }
    let b = SeqTensor::from_vec(1, 1, vec![b_f0]);
    crate::numerics::linear_apply(h_p, w_f0, Some(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_constant_contour() {
        let mut rng = Rng::new(90);
        let h_p = rng.uniform_tensor(5, 3, -1.0, 1.0);
        let w = SeqTensor::zeros(3, 1);
        let f0 = predict_f0(&h_p, &w, 2.5).unwrap();
        for t in 0..5 {
            assert_eq!(f0.get(t, 0), 2.5);
        }
    }

    #[test]
    fn zero_features_give_bias_everywhere() {
        let mut rng = Rng::new(91);
        let h_p = SeqTensor::zeros(4, 3);
        let w = rng.uniform_tensor(3, 1, -1.0, 1.0);
        let f0 = predict_f0(&h_p, &w, -1.25).unwrap();
        for t in 0..4 {
            assert_eq!(f0.get(t, 0), -1.25);
        }
    }

    #[test]
    fn matches_matmul_oracle() {
        let mut rng = Rng::new(92);
        let h_p = rng.uniform_tensor(6, 4, -1.0, 1.0);
        let w = rng.uniform_tensor(4, 1, -1.0, 1.0);
        let f0 = predict_f0(&h_p, &w, 0.3).unwrap();
        for t in 0..6 {
            let mut acc = 0.3;
            for j in 0..4 {
                acc += h_p.get(t, j) * w.get(j, 0);
            }
            assert!((f0.get(t, 0) - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn fuse_reuses_gated_fusion_contract() {
        let mut rng = Rng::new(93);
        let p = PitchParams::init(3, 1.0, &mut rng).unwrap();
        let z = SeqTensor::zeros(4, 3);
        let out = pitch_fuse(&z, &z, &p).unwrap();
        assert_eq!(out, SeqTensor::zeros(4, 3));
    }
}
