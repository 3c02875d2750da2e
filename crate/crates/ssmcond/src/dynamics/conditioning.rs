//! Decoder-conditioning assembly and the toy decoder stub.
//!
//! The conditioning sequence packs the predicted F0 contour in column 0 and
//! the residual channels in columns 1..=d_h, giving T_m x (1 + d_h).

use crate::encoders::{gated_fusion_ctx, GatedFusionHandles, GatedFusionParams};
use crate::error::{Error, Result};
use crate::numerics::{init, Ctx, EvalCtx, Rng, SeqTensor};

#[derive(Debug, Clone)]
pub struct ConditioningSequence {
    pub f0_hat: SeqTensor, // T_m x 1
    pub n: SeqTensor,      // T_m x d_h
    pub h_d: SeqTensor,    // T_m x (1 + d_h)
}

impl ConditioningSequence {
    pub fn pack(f0_hat: SeqTensor, n: SeqTensor) -> Result<Self> {
        if f0_hat.rows() != n.rows() || f0_hat.cols() != 1 {
            return Err(Error::Shape {
                op: "ConditioningSequence::pack",
                detail: format!(
                    "F0 is {}x{}, n is {}x{}",
                    f0_hat.rows(),
                    f0_hat.cols(),
                    n.rows(),
                    n.cols()
                ),
            });
        }
        let h_d = crate::numerics::concat_cols(&f0_hat, &n);
        Ok(ConditioningSequence { f0_hat, n, h_d })
    }

    /// Splits a packed T_m x (1 + d_h) tensor back into (F0, n).
    pub fn unpack(h_d: SeqTensor) -> Result<Self> {
        if h_d.cols() < 2 {
            return Err(Error::Shape {
                op: "ConditioningSequence::unpack",
                detail: format!("need at least 2 columns, got {}", h_d.cols()),
            });
        }
        let f0_hat = crate::numerics::slice_cols(&h_d, 0, 1);
        let n = crate::numerics::slice_cols(&h_d, 1, h_d.cols());
        Ok(ConditioningSequence { f0_hat, n, h_d })
    }

    pub fn frames(&self) -> usize {
        self.h_d.rows()
    }

    pub fn width(&self) -> usize {
        self.h_d.cols()
    }
}

/// Heads producing the conditioning sequence from the fused dynamics.
#[derive(Debug, Clone)]
pub struct ConditioningHeadParams {
    pub fusion: GatedFusionParams,
    pub w_f0: SeqTensor, // d_h x 1 (separate head from the pitch module's)
    pub b_f0: SeqTensor, // 1 x 1
    pub w_n: SeqTensor,  // d_h x d_h
}

impl ConditioningHeadParams {
    pub fn init(d_h: usize, tau: f64, rng: &mut Rng) -> Result<Self> {
        Ok(ConditioningHeadParams {
            fusion: GatedFusionParams::init(d_h, tau, rng)?,
            w_f0: init::dense(rng, d_h, 1),
            b_f0: init::zeros_row(1),
            w_n: init::dense(rng, d_h, d_h),
        })
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> ConditioningHeadHandles<C::H> {
        ConditioningHeadHandles {
            fusion: self.fusion.bind(ctx),
            w_f0: ctx.lift(&self.w_f0),
            b_f0: ctx.lift(&self.b_f0),
            w_n: ctx.lift(&self.w_n),
        }
    }
}

#[derive(Clone)]
pub struct ConditioningHeadHandles<H> {
    pub fusion: GatedFusionHandles<H>,
    pub w_f0: H,
    pub b_f0: H,
    pub w_n: H,
}

/// Returns (f0_hat, n, h_d).
pub fn assemble_conditioning_ctx<C: Ctx>(
    ctx: &mut C,
    h_tm: &C::H,
    h_p: &C::H,
    p: &ConditioningHeadHandles<C::H>,
) -> (C::H, C::H, C::H) {
    let (g, _) = gated_fusion_ctx(ctx, h_tm, h_p, &p.fusion);
    let f0 = ctx.linear(&g, &p.w_f0, Some(&p.b_f0));
    let n = ctx.linear(&g, &p.w_n, None);
    let h_d = ctx.concat_cols(&f0, &n);
    (f0, n, h_d)
}

pub fn assemble_conditioning(
    h_tm: &SeqTensor,
    h_p: &SeqTensor,
    p: &ConditioningHeadParams,
) -> Result<ConditioningSequence> {
    if !h_tm.same_shape(h_p) {
        return Err(Error::Shape {
            op: "assemble_conditioning",
            detail: format!(
                "h_tm is {}x{}, h_p is {}x{}",
                h_tm.rows(),
                h_tm.cols(),
                h_p.rows(),
                h_p.cols()
            ),
        });
    }
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let a = ctx.lift(h_tm);
    let b = ctx.lift(h_p);
    let (f0, n, _) = assemble_conditioning_ctx(&mut ctx, &a, &b, &h);
    ConditioningSequence::pack(ctx.val(&f0).clone(), ctx.val(&n).clone())
}

/// Per-frame linear stand-in for the external decoder: (1+d_h) -> F,
/// transposed to mel-major F x T_m.
#[derive(Debug, Clone)]
pub struct DecoderStubParams {
    pub w: SeqTensor, // (1 + d_h) x F
    pub b: SeqTensor, // 1 x F
}

impl DecoderStubParams {
    pub fn init(d_h: usize, mel_bins: usize, rng: &mut Rng) -> Self {
        DecoderStubParams {
            w: init::dense(rng, 1 + d_h, mel_bins),
            b: init::zeros_row(mel_bins),
        }
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> DecoderStubHandles<C::H> {
        DecoderStubHandles {
            w: ctx.lift(&self.w),
            b: ctx.lift(&self.b),
        }
    }
}

#[derive(Clone)]
pub struct DecoderStubHandles<H> {
    pub w: H,
    pub b: H,
}

pub fn toy_decode_ctx<C: Ctx>(ctx: &mut C, h_d: &C::H, p: &DecoderStubHandles<C::H>) -> C::H {
    let frames = ctx.linear(h_d, &p.w, Some(&p.b));
    ctx.transpose(&frames)
}

pub fn toy_decode(cond: &ConditioningSequence, p: &DecoderStubParams) -> Result<SeqTensor> {
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let hd = ctx.lift(&cond.h_d);
    let out = toy_decode_ctx(&mut ctx, &hd, &h);
    Ok(ctx.val(&out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_heads_give_bias_column_and_zero_residuals() {
        let mut rng = Rng::new(100);
        let mut p = ConditioningHeadParams::init(3, 1.0, &mut rng).unwrap();
        p.w_f0 = SeqTensor::zeros(3, 1);
        p.b_f0 = SeqTensor::from_vec(1, 1, vec![0.7]);
        p.w_n = SeqTensor::zeros(3, 3);
        let h_tm = rng.uniform_tensor(5, 3, -1.0, 1.0);
        let h_p = rng.uniform_tensor(5, 3, -1.0, 1.0);
        let cond = assemble_conditioning(&h_tm, &h_p, &p).unwrap();
        assert_eq!(cond.width(), 4);
        for t in 0..5 {
            assert_eq!(cond.h_d.get(t, 0), 0.7);
            for j in 1..4 {
                assert_eq!(cond.h_d.get(t, j), 0.0);
            }
        }
    }

    #[test]
    fn single_frame_packs() {
        let mut rng = Rng::new(101);
        let p = ConditioningHeadParams::init(3, 1.0, &mut rng).unwrap();
        let h = rng.uniform_tensor(1, 3, -1.0, 1.0);
        let cond = assemble_conditioning(&h, &h, &p).unwrap();
        assert_eq!(cond.frames(), 1);
        assert_eq!(cond.width(), 4);
    }

    #[test]
    fn pack_unpack_round_trip_and_layout() {
        let mut rng = Rng::new(102);
        let f0 = rng.uniform_tensor(6, 1, -1.0, 1.0);
        let n = rng.uniform_tensor(6, 4, -1.0, 1.0);
        let cond = ConditioningSequence::pack(f0.clone(), n.clone()).unwrap();
        // explicit concat oracle
        for t in 0..6 {
            assert_eq!(cond.h_d.get(t, 0), f0.get(t, 0));
            for j in 0..4 {
                assert_eq!(cond.h_d.get(t, j + 1), n.get(t, j));
            }
        }
        let back = ConditioningSequence::unpack(cond.h_d.clone()).unwrap();
        assert_eq!(back.f0_hat, f0);
        assert_eq!(back.n, n);
    }

    #[test]
    fn toy_decode_zero_everything_is_zero() {
        let d_h = 3;
        let p = DecoderStubParams {
            w: SeqTensor::zeros(1 + d_h, 5),
            b: SeqTensor::zeros(1, 5),
        };
        let cond = ConditioningSequence::pack(SeqTensor::zeros(4, 1), SeqTensor::zeros(4, 3))
            .unwrap();
        let m = toy_decode(&cond, &p).unwrap();
        assert_eq!(m, SeqTensor::zeros(5, 4));
    }

    #[test]
    fn toy_decode_identity_like_params_reproduce_inputs() {
        // d_h = F - 1: map [f0; n] straight through to the mel rows
        let d_h = 4;
        let f = 5;
        let p = DecoderStubParams {
            w: SeqTensor::from_fn(1 + d_h, f, |i, j| if i == j { 1.0 } else { 0.0 }),
            b: SeqTensor::zeros(1, f),
        };
        let mut rng = Rng::new(103);
        let f0 = rng.uniform_tensor(3, 1, -1.0, 1.0);
        let n = rng.uniform_tensor(3, 4, -1.0, 1.0);
        let cond = ConditioningSequence::pack(f0, n).unwrap();
        let m = toy_decode(&cond, &p).unwrap();
        assert_eq!(m.rows(), f);
        assert_eq!(m.cols(), 3);
        for t in 0..3 {
            for j in 0..f {
                assert_eq!(m.get(j, t), cond.h_d.get(t, j));
            }
        }
    }

    #[test]
    fn toy_decode_matches_matmul_oracle() {
        let mut rng = Rng::new(104);
        let p = DecoderStubParams::init(3, 6, &mut rng);
        let f0 = rng.uniform_tensor(4, 1, -1.0, 1.0);
        let n = rng.uniform_tensor(4, 3, -1.0, 1.0);
        let cond = ConditioningSequence::pack(f0, n).unwrap();
        let m = toy_decode(&cond, &p).unwrap();
        for t in 0..4 {
            for f in 0..6 {
                let mut acc = p.b.get(0, f);
                for i in 0..4 {
                    acc += cond.h_d.get(t, i) * p.w.get(i, f);
                }
                assert!((m.get(f, t) - acc).abs() < 1e-12);
            }
        }
    }
}
