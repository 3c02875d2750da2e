//! Desk-scale training loop: full forward, reverse pass on the tape,
//! AdamW with cosine schedule, global-norm clipping, and EMA shadows.
//! Single-threaded and bitwise reproducible for a fixed seed.

use crate::dynamics::dataset::SyntheticDataset;
use crate::dynamics::loss::LossWeights;
use crate::dynamics::optimizer::{clip_global_norm, AdamW, Ema, TrainConfig};
use crate::error::{Error, Result};
use crate::model::{training_forward_perturbed_ctx, TrainParams};
use crate::numerics::{Ctx, GradTape, TapeCtx};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct LossRow {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
}

pub struct TrainOutcome {
    pub params: TrainParams,
    pub ema_params: TrainParams,
    pub curve: Vec<LossRow>,
}

impl TrainOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.curve.first().map(|r| r.loss).unwrap_or(f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        self.curve.last().map(|r| r.loss).unwrap_or(f64::NAN)
    }

    pub fn curve_csv(&self) -> String {
        let mut out = String::from("step,loss,lr,grad_norm\n");
        for r in &self.curve {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e}\n",
                r.step, r.loss, r.lr, r.grad_norm
            ));
        }
        out
    }
}

pub fn train(
    mut params: TrainParams,
    dataset: &SyntheticDataset,
    cfg: &TrainConfig,
    weights: &LossWeights,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::InvalidArg {
            op: "train",
            detail: "empty dataset".into(),
        });
    }
    weights.validate()?;
    let n = dataset.len();
    let batch = cfg.batch.max(1).min(n);

    let mut flat = params.to_flat();
    let mut opt = AdamW::new(flat.len());
    let mut ema = Ema::new(&flat, cfg.ema_decay);
    let mut curve = Vec::with_capacity(cfg.steps);
    let mut noise_rng = crate::numerics::Rng::new(cfg.seed ^ 0xA1FA);

    for step in 0..cfg.steps {
        let mut tape = GradTape::new();
        let mut ctx = TapeCtx::new(&mut tape);
        let handles = params.bind(&mut ctx);

        let mut batch_loss = None;
        for i in 0..batch {
            let sample = &dataset.samples[(step * batch + i) % n];
            let mel = ctx.lift(sample.mel.values());
            let noise = if cfg.alpha_perturb > 0.0 {
                let t_m = sample.mel.frames();
                let t_x = sample.tokens.len();
                Some(noise_rng.uniform_tensor(
                    t_m,
                    t_x,
                    1.0 - cfg.alpha_perturb,
                    1.0 + cfg.alpha_perturb,
                ))
            } else {
                None
            };
            let fwd = training_forward_perturbed_ctx(
                &mut ctx,
                &handles,
                &sample.tokens.ids,
                &mel,
                weights,
                noise.as_ref(),
            );
            batch_loss = Some(match batch_loss {
                None => fwd.loss,
                Some(acc) => ctx.add(&acc, &fwd.loss),
            });
        }
        let total = {
            let sum = batch_loss.expect("batch is non-empty");
            ctx.scale(&sum, 1.0 / batch as f64)
        };

        let loss_val = tape.scalar(total);
        if !loss_val.is_finite() {
            return Err(Error::NonFiniteLoss(step));
        }
        tape.backward(total)?;

        let mut grads = Vec::with_capacity(flat.len());
        handles.visit_handles(&mut |_, h| {
            grads.extend_from_slice(tape.grad(*h).data());
        });
        debug_assert_eq!(grads.len(), flat.len());

        let grad_norm = clip_global_norm(&mut grads, cfg.clip_norm);
        let lr = cfg.lr_at(step);
        opt.step(&mut flat, &grads, lr, cfg.weight_decay);
        params.load_flat(&flat);
        ema.update(&flat);

        curve.push(LossRow {
            step,
            loss: loss_val,
            lr,
            grad_norm,
        });
    }

    let mut ema_params = params.clone();
    ema_params.load_flat(&ema.shadow);
    Ok(TrainOutcome {
        params,
        ema_params,
        curve,
    })
}
