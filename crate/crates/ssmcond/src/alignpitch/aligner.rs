//! Training-time attention aligner.
//!
//! Two layers of multi-head cross-attention: queries from mel-rate features,
//! keys/values from the style-conditioned text encoding. Sinusoidal position
//! codes are added on both sides before the projections. The returned
//! alignment is the final layer's head-averaged attention; the aligned
//! encoding is alpha . h_{T,s}. This module never runs at inference.

use crate::error::{Error, Result};
use crate::numerics::{init, Ctx, EvalCtx, Rng, SeqTensor};

pub const ALIGNER_HIDDEN: usize = 256;
pub const ALIGNER_HEADS: usize = 4;
pub const ALIGNER_LAYERS: usize = 2;

/// Row-stochastic T_m x T_x attention matrix.
#[derive(Debug, Clone)]
pub struct AlignmentMatrix {
    pub alpha: SeqTensor,
}

impl AlignmentMatrix {
    pub fn new(alpha: SeqTensor) -> Result<Self> {
        for t in 0..alpha.rows() {
            let mut sum = 0.0;
            for &v in alpha.row(t) {
                if v < 0.0 {
                    return Err(Error::InvalidArg {
                        op: "AlignmentMatrix",
                        detail: format!("negative weight in row {t}"),
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArg {
                    op: "AlignmentMatrix",
                    detail: format!("row {t} sums to {sum}, not 1"),
                });
            }
        }
        Ok(AlignmentMatrix { alpha })
    }

    pub fn frames(&self) -> usize {
        self.alpha.rows()
    }

    pub fn tokens(&self) -> usize {
        self.alpha.cols()
    }
}

#[derive(Debug, Clone)]
pub struct AlignerLayerParams {
    pub w_q: SeqTensor,   // d_h x hidden
    pub w_k: SeqTensor,   // d_h x hidden
    pub w_v: SeqTensor,   // d_h x hidden
    pub w_out: SeqTensor, // hidden x d_h
}

#[derive(Debug, Clone)]
pub struct AlignerParams {
    pub layers: Vec<AlignerLayerParams>,
    pub heads: usize,
    pub hidden: usize,
}

impl AlignerParams {
    pub fn init(d_h: usize, rng: &mut Rng) -> Self {
        Self::with_dims(d_h, ALIGNER_HIDDEN, ALIGNER_HEADS, ALIGNER_LAYERS, rng).unwrap()
    }

    pub fn with_dims(
        d_h: usize,
        hidden: usize,
        heads: usize,
        layers: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if heads == 0 || hidden % heads != 0 {
            return Err(Error::InvalidArg {
                op: "AlignerParams",
                detail: format!("hidden {hidden} not divisible by heads {heads}"),
            });
        }
        Ok(AlignerParams {
            layers: (0..layers)
                .map(|_| AlignerLayerParams {
                    w_q: init::dense(rng, d_h, hidden),
                    w_k: init::dense(rng, d_h, hidden),
                    w_v: init::dense(rng, d_h, hidden),
                    w_out: init::dense(rng, hidden, d_h),
                })
                .collect(),
            heads,
            hidden,
        })
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn bind<C: Ctx>(&self, ctx: &mut C) -> AlignerHandles<C::H> {
        AlignerHandles {
            layers: self
                .layers
                .iter()
                .map(|l| AlignerLayerHandles {
                    w_q: ctx.lift(&l.w_q),
                    w_k: ctx.lift(&l.w_k),
                    w_v: ctx.lift(&l.w_v),
                    w_out: ctx.lift(&l.w_out),
                })
                .collect(),
            heads: self.heads,
            hidden: self.hidden,
        }
    }
}

#[derive(Clone)]
pub struct AlignerLayerHandles<H> {
    pub w_q: H,
    pub w_k: H,
    pub w_v: H,
    pub w_out: H,
}

#[derive(Clone)]
pub struct AlignerHandles<H> {
    pub layers: Vec<AlignerLayerHandles<H>>,
    pub heads: usize,
    pub hidden: usize,
}

/// Sinusoidal position codes, T x dim.
pub fn positional_encoding(t_len: usize, dim: usize) -> SeqTensor {
    SeqTensor::from_fn(t_len, dim, |t, j| {
        let pair = (j / 2) as f64;
        let rate = 10_000f64.powf(2.0 * pair / dim as f64);
        let phase = t as f64 / rate;
        if j % 2 == 0 {
            phase.sin()
        } else {
            phase.cos()
        }
    })
}

/// Returns (alpha, h_A).
pub fn align_ctx<C: Ctx>(
    ctx: &mut C,
    mel_feats: &C::H,
    text_feats: &C::H,
    p: &AlignerHandles<C::H>,
) -> (C::H, C::H) {
    let t_m = ctx.val(mel_feats).rows();
    let t_x = ctx.val(text_feats).rows();
    let d_h = ctx.val(mel_feats).cols();
    let pe_q = positional_encoding(t_m, d_h);
    let pe_k = positional_encoding(t_x, d_h);
    let pe_q = ctx.lift(&pe_q);
    let pe_k = ctx.lift(&pe_k);
    let mut x = ctx.add(mel_feats, &pe_q);
    let kv = ctx.add(text_feats, &pe_k);

    let head_dim = p.hidden / p.heads;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut alpha = None;
    for layer in &p.layers {
        let q = ctx.linear(&x, &layer.w_q, None);
        let k = ctx.linear(&kv, &layer.w_k, None);
        let v = ctx.linear(&kv, &layer.w_v, None);
        let mut heads_out: Option<C::H> = None;
        let mut alpha_sum: Option<C::H> = None;
        for h in 0..p.heads {
            let (lo, hi) = (h * head_dim, (h + 1) * head_dim);
            let qh = ctx.slice_cols(&q, lo, hi);
            let kh = ctx.slice_cols(&k, lo, hi);
            let vh = ctx.slice_cols(&v, lo, hi);
            let kt = ctx.transpose(&kh);
            let scores = ctx.matmul(&qh, &kt);
            let scaled = ctx.scale(&scores, scale);
            let attn = ctx.softmax_rows(&scaled);
            let out_h = ctx.matmul(&attn, &vh);
            heads_out = Some(match heads_out {
                Some(acc) => ctx.concat_cols(&acc, &out_h),
                None => out_h,
            });
            alpha_sum = Some(match alpha_sum {
                Some(acc) => ctx.add(&acc, &attn),
                None => attn,
            });
        }
        let merged = ctx.linear(&heads_out.unwrap(), &layer.w_out, None);
        x = ctx.add(&x, &merged);
        alpha = Some(ctx.scale(&alpha_sum.unwrap(), 1.0 / p.heads as f64));
    }
    let alpha = alpha.expect("aligner has at least one layer");
    let h_a = ctx.matmul(&alpha, text_feats);
    (alpha, h_a)
}

pub fn align(
    mel_feats: &SeqTensor,
    text_feats: &SeqTensor,
    p: &AlignerParams,
) -> Result<(AlignmentMatrix, SeqTensor)> {
    if text_feats.rows() == 0 {
        return Err(Error::InvalidArg {
            op: "align",
            detail: "zero-length text".into(),
        });
    }
    mel_feats.check_finite("align mel features")?;
    text_feats.check_finite("align text features")?;
    let mut ctx = EvalCtx::new();
    let h = p.bind(&mut ctx);
    let mf = ctx.lift(mel_feats);
    let tf = ctx.lift(text_feats);
    let (alpha, h_a) = align_ctx(&mut ctx, &mf, &tf, &h);
    Ok((
        AlignmentMatrix::new(ctx.val(&alpha).clone())?,
        ctx.val(&h_a).clone(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_token_gives_all_ones_column() {
        let mut rng = Rng::new(70);
        let p = AlignerParams::with_dims(4, 16, 4, 2, &mut rng).unwrap();
        let mel = rng.uniform_tensor(5, 4, -1.0, 1.0);
        let text = rng.uniform_tensor(1, 4, -1.0, 1.0);
        let (alpha, h_a) = align(&mel, &text, &p).unwrap();
        for t in 0..5 {
            assert!((alpha.alpha.get(t, 0) - 1.0).abs() < 1e-12);
            for j in 0..4 {
                assert!((h_a.get(t, j) - text.get(0, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_alpha_averages_text_rows() {
        let mut rng = Rng::new(71);
        let text = rng.uniform_tensor(4, 3, -1.0, 1.0);
        let alpha = SeqTensor::from_fn(6, 4, |_, _| 0.25);
        let am = AlignmentMatrix::new(alpha).unwrap();
        let h_a = crate::numerics::linear_apply(&am.alpha, &text, None).unwrap();
        for t in 0..6 {
            for j in 0..3 {
                let mean: f64 = (0..4).map(|i| text.get(i, j)).sum::<f64>() / 4.0;
                assert!((h_a.get(t, j) - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rows_stochastic_and_product_matches_oracle() {
        let mut rng = Rng::new(72);
        let p = AlignerParams::with_dims(4, 16, 2, 2, &mut rng).unwrap();
        let mel = rng.uniform_tensor(6, 4, -1.0, 1.0);
        let text = rng.uniform_tensor(3, 4, -1.0, 1.0);
        let (alpha, h_a) = align(&mel, &text, &p).unwrap();
        for t in 0..6 {
            let s: f64 = alpha.alpha.row(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "row {t} sums to {s}");
        }
        // h_A = alpha . text, explicit product oracle
        for t in 0..6 {
            for j in 0..4 {
                let mut acc = 0.0;
                for i in 0..3 {
                    acc += alpha.alpha.get(t, i) * text.get(i, j);
                }
                assert!((h_a.get(t, j) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn empty_text_rejected() {
        let mut rng = Rng::new(73);
        let p = AlignerParams::with_dims(4, 16, 4, 2, &mut rng).unwrap();
        let mel = rng.uniform_tensor(5, 4, -1.0, 1.0);
        let text = SeqTensor::zeros(0, 4);
        assert!(align(&mel, &text, &p).is_err());
    }

    #[test]
    fn default_dims_match_stated_architecture() {
        let mut rng = Rng::new(74);
        let p = AlignerParams::init(8, &mut rng);
        assert_eq!(p.hidden, 256);
        assert_eq!(p.heads, 4);
        assert_eq!(p.layers.len(), 2);
        assert_eq!(p.head_dim() * p.heads, 256);
    }
}
