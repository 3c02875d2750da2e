//! Temporal predictor (conv + SSM) and the inference-time length regulator.

use crate::error::{Error, Result};
use crate::numerics::{init, Ctx, EvalCtx, Padding, Rng, SeqTensor};
use crate::ssm::{mamba_block_ctx, MambaLayerHandles, MambaLayerParams};

#[derive(Debug, Clone)]
pub struct TemporalPredictorParams {
    pub conv_kernel: SeqTensor, // d_h x k
    pub blocks: Vec<MambaLayerParams>,
}

impl TemporalPredictorParams {
    pub fn init(
        d_h: usize,
        d_ssm: usize,
        k: usize,
        layers: usize,
        s_max: f64,
        rng: &mut Rng,
    ) -> Self {
        TemporalPredictorParams {
            conv_kernel: init::conv_kernel(rng, d_h, k),
            blocks: (0..layers)
                .map(|_| MambaLayerParams::init(d_h, d_ssm, k, s_max, rng))
                .collect(),
        }
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> TemporalPredictorHandles<C::H> {
        TemporalPredictorHandles {
            conv_kernel: ctx.lift(&self.conv_kernel),
            blocks: self.blocks.iter().map(|b| b.bind(ctx)).collect(),
        }
    }
}

#[derive(Clone)]
pub struct TemporalPredictorHandles<H> {
    pub conv_kernel: H,
    pub blocks: Vec<MambaLayerHandles<H>>,
}

/// Depthwise conv then Mamba block(s): the rhythm-aware representation.
pub fn temporal_predict_ctx<C: Ctx>(
    ctx: &mut C,
    h_a: &C::H,
    p: &TemporalPredictorHandles<C::H>,
) -> C::H {
    let mut h = ctx.conv1d(h_a, &p.conv_kernel, Padding::Same);
    for block in &p.blocks {
        h = mamba_block_ctx(ctx, &h, block, Padding::Same);
    }
    h
}

pub fn temporal_predict(h_a: &SeqTensor, p: &TemporalPredictorParams) -> Result<SeqTensor> {
    h_a.check_finite("temporal_predict input")?;
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let xh = ctx.lift(h_a);
    let out = temporal_predict_ctx(&mut ctx, &xh, &h);
    Ok(ctx.val(&out).clone())
}

/// Attention-free stand-in for the training-time aligner: monotone linear
/// interpolation of token features onto the frame grid. O(T_m * d_h).
pub fn interp_align(h_t_s: &SeqTensor, t_m: usize) -> Result<SeqTensor> {
    let t_x = h_t_s.rows();
    if t_x == 0 {
        return Err(Error::InvalidArg {
            op: "interp_align",
            detail: "zero-length text".into(),
        });
    }
    let d = h_t_s.cols();
    Ok(SeqTensor::from_fn(t_m, d, |t, j| {
        if t_x == 1 || t_m == 1 {
            // degenerate grids collapse onto the first token row
            return h_t_s.get(0, j);
        }
        let pos = t as f64 * (t_x - 1) as f64 / (t_m - 1) as f64;
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(t_x - 1);
        let frac = pos - i0 as f64;
        (1.0 - frac) * h_t_s.get(i0, j) + frac * h_t_s.get(i1, j)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_zero_blocks_give_zeros() {
        let mut p = TemporalPredictorParams::init(3, 4, 5, 1, 1e3, &mut Rng::new(1));
        p.blocks[0] = MambaLayerParams::zeroed(3, 4, 5);
        let x = SeqTensor::zeros(6, 3);
        let y = temporal_predict(&x, &p).unwrap();
        assert_eq!(y, SeqTensor::zeros(6, 3));
    }

    #[test]
    fn delta_kernel_zero_blocks_are_identity() {
        let mut p = TemporalPredictorParams::init(3, 4, 5, 1, 1e3, &mut Rng::new(2));
        p.conv_kernel = SeqTensor::from_fn(3, 5, |_, j| if j == 2 { 1.0 } else { 0.0 });
        p.blocks[0] = MambaLayerParams::zeroed(3, 4, 5);
        let mut rng = Rng::new(3);
        let x = rng.uniform_tensor(7, 3, -1.0, 1.0);
        let y = temporal_predict(&x, &p).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn matches_composition_oracle() {
        let mut rng = Rng::new(4);
        let p = TemporalPredictorParams::init(3, 4, 5, 1, 1e3, &mut rng);
        let x = rng.uniform_tensor(9, 3, -1.0, 1.0);
        let y = temporal_predict(&x, &p).unwrap();
        let conv = crate::numerics::depthwise_conv1d(&x, &p.conv_kernel, Padding::Same).unwrap();
        let (want, _) = crate::ssm::mamba_block(&conv, &p.blocks[0], Padding::Same, None).unwrap();
        for i in 0..y.len() {
            assert!((y.data()[i] - want.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn interp_align_endpoints_and_weights() {
        let mut rng = Rng::new(5);
        let h = rng.uniform_tensor(4, 2, -1.0, 1.0);
        let out = interp_align(&h, 7).unwrap();
        assert_eq!(out.rows(), 7);
        // endpoints map exactly
        assert_eq!(out.row(0), h.row(0));
        assert_eq!(out.row(6), h.row(3));
        // interior rows are convex combinations of adjacent token rows
        for t in 1..6 {
            let pos = t as f64 * 3.0 / 6.0;
            let i0 = pos.floor() as usize;
            let frac = pos - i0 as f64;
            for j in 0..2 {
                let want = (1.0 - frac) * h.get(i0, j) + frac * h.get((i0 + 1).min(3), j);
                assert!((out.get(t, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interp_align_single_token_repeats() {
        let h = SeqTensor::from_vec(1, 3, vec![1.0, -2.0, 0.5]);
        let out = interp_align(&h, 5).unwrap();
        for t in 0..5 {
            assert_eq!(out.row(t), h.row(0));
        }
    }
}
