//! Loss assembly and framework-free evaluation metrics.

use crate::alignpitch::{monotonic_loss, monotonic_loss_ctx, AlignmentMatrix};
use crate::error::{Error, Result};
use crate::numerics::{Ctx, SeqTensor};
use serde::{Deserialize, Serialize};

/// The adversarial stack is an external backbone here, so lambda_adv is
/// pinned to zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_mel: f64,
    pub lambda_adv: f64,
    pub lambda_align: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_mel: 1.0,
            lambda_adv: 0.0,
            lambda_align: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_mel < 0.0 || self.lambda_adv < 0.0 || self.lambda_align < 0.0 {
            return Err(Error::InvalidArg {
                op: "LossWeights",
                detail: "weights must be non-negative".into(),
            });
        }
        if self.lambda_adv != 0.0 {
            return Err(Error::InvalidArg {
                op: "LossWeights",
                detail: "lambda_adv must be 0 (adversarial stack is external)".into(),
            });
        }
        Ok(())
    }
}

/// lambda_mel * mean|M - M_hat| + lambda_align * monotonic(alpha).
pub fn total_loss(
    m_hat: &SeqTensor,
    m: &SeqTensor,
    alpha: &AlignmentMatrix,
    w: &LossWeights,
) -> Result<f64> {
    w.validate()?;
    if !m_hat.same_shape(m) {
        return Err(Error::Shape {
            op: "total_loss",
            detail: format!(
                "M_hat is {}x{}, M is {}x{}",
                m_hat.rows(),
                m_hat.cols(),
                m.rows(),
                m.cols()
            ),
        });
    }
    let n = m.len().max(1) as f64;
    let l1: f64 = m_hat
        .data()
        .iter()
        .zip(m.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n;
    Ok(w.lambda_mel * l1 + w.lambda_align * monotonic_loss(alpha))
}

pub fn total_loss_ctx<C: Ctx>(
    ctx: &mut C,
    m_hat: &C::H,
    m: &C::H,
    alpha: &C::H,
    w: &LossWeights,
) -> C::H {
    let mel = ctx.l1_loss(m_hat, m);
    let mel = ctx.scale(&mel, w.lambda_mel);
    let align = monotonic_loss_ctx(ctx, alpha);
    let align = ctx.scale(&align, w.lambda_align);
    ctx.add(&mel, &align)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalMetrics {
    pub mel_l1: f64,
    pub f0_rmse: f64,
}

pub fn eval_metrics(
    m_hat: &SeqTensor,
    m: &SeqTensor,
    f0_hat: &SeqTensor,
    f0_ref: &SeqTensor,
) -> Result<EvalMetrics> {
    if !m_hat.same_shape(m) || !f0_hat.same_shape(f0_ref) {
        return Err(Error::Shape {
            op: "eval_metrics",
            detail: "mismatched shapes".into(),
        });
    }
    let n = m.len().max(1) as f64;
    let mel_l1 = m_hat
        .data()
        .iter()
        .zip(m.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n;
    let nf = f0_ref.len().max(1) as f64;
    let mse = f0_hat
        .data()
        .iter()
        .zip(f0_ref.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / nf;
    Ok(EvalMetrics {
        mel_l1,
        f0_rmse: mse.sqrt(),
    })
}
