//! Decoupled-weight-decay adaptive-moment optimizer with linear warmup,
//! cosine decay, global-norm clipping, and shadow EMA weights.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_steps: usize,
    pub clip_norm: f64,
    pub ema_decay: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    /// Training-time aligner robustness hook: attention weights are
    /// multiplied by (1 + u), u uniform in [-x, +x], and renormalized.
    /// Zero disables the hook.
    pub alpha_perturb: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let steps = 200;
        TrainConfig {
            lr: 1e-4,
            weight_decay: 1e-4,
            warmup_steps: warmup_for(steps),
            clip_norm: 1.0,
            ema_decay: 0.999,
            steps,
            batch: 4,
            seed: 7,
            alpha_perturb: 0.0,
        }
    }
}

/// Toy-run warmup rescale: max(steps/20, 10).
pub fn warmup_for(steps: usize) -> usize {
    (steps / 20).max(10)
}

impl TrainConfig {
    /// Linear warmup to `lr`, then cosine decay to zero at `steps`.
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.warmup_steps > 0 && step < self.warmup_steps {
            return self.lr * (step + 1) as f64 / self.warmup_steps as f64;
        }
        let total = self.steps.saturating_sub(self.warmup_steps).max(1);
        let progress = (step - self.warmup_steps) as f64 / total as f64;
        let progress = progress.clamp(0.0, 1.0);
        self.lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

/// Scales gradients so the global L2 norm is at most `clip`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [f64], clip: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > clip && norm > 0.0 {
        let s = clip / norm;
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
    norm
}

pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamW {
    pub fn new(n: usize) -> Self {
        AdamW {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One update; weight decay is decoupled (scaled by lr, not adapted).
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64, weight_decay: f64) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * (m_hat / (v_hat.sqrt() + self.eps) + weight_decay * params[i]);
        }
    }
}

pub struct Ema {
    pub shadow: Vec<f64>,
    pub decay: f64,
}

impl Ema {
    pub fn new(params: &[f64], decay: f64) -> Self {
        Ema {
            shadow: params.to_vec(),
            decay,
        }
    }

    pub fn update(&mut self, params: &[f64]) {
        // incremental form: exact fixed point when params equal the shadow
        for (s, p) in self.shadow.iter_mut().zip(params) {
            *s += (1.0 - self.decay) * (p - *s);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lr_leaves_params_and_ema_unchanged() {
        let mut params = vec![1.0, -2.0, 3.0];
        let grads = vec![0.5, 0.5, 0.5];
        let mut opt = AdamW::new(3);
        opt.step(&mut params, &grads, 0.0, 1e-4);
        assert_eq!(params, vec![1.0, -2.0, 3.0]);
        let mut ema = Ema::new(&params, 0.999);
        ema.update(&params);
        assert_eq!(ema.shadow, params);
    }

    #[test]
    fn clip_caps_global_norm() {
        let mut g = vec![3.0, 4.0]; // norm 5
        let pre = clip_global_norm(&mut g, 1.0);
        assert_eq!(pre, 5.0);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm <= 1.0 + 1e-9);
        // direction preserved
        assert!((g[0] / g[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn small_gradients_pass_unclipped() {
        let mut g = vec![0.1, 0.2];
        let pre = clip_global_norm(&mut g, 1.0);
        assert!(pre < 1.0);
        assert_eq!(g, vec![0.1, 0.2]);
    }

    #[test]
    fn lr_schedule_shape() {
        let cfg = TrainConfig {
            lr: 1.0,
            warmup_steps: 10,
            steps: 110,
            ..TrainConfig::default()
        };
        // warmup ramps linearly
        assert!((cfg.lr_at(0) - 0.1).abs() < 1e-12);
        assert!((cfg.lr_at(9) - 1.0).abs() < 1e-12);
        // cosine decays monotonically to 0
        let mut prev = cfg.lr_at(10);
        for s in 11..110 {
            let cur = cfg.lr_at(s);
            assert!(cur <= prev + 1e-12);
            prev = cur;
        }
        assert!(cfg.lr_at(109) < 1e-3);
    }

    #[test]
    fn ema_converges_geometrically_to_frozen_params() {
        let params = vec![2.0, -1.0];
        let mut ema = Ema::new(&[0.0, 0.0], 0.999);
        let initial_gap: f64 = params.iter().map(|p| p * p).sum::<f64>().sqrt();
        for _ in 0..100 {
            ema.update(&params);
        }
        let gap: f64 = ema
            .shadow
            .iter()
            .zip(&params)
            .map(|(s, p)| (s - p) * (s - p))
            .sum::<f64>()
            .sqrt();
        let bound = initial_gap * 0.999f64.powi(100);
        assert!(gap <= bound + 1e-9, "gap {gap} vs bound {bound}");
    }

    #[test]
    fn adamw_decay_is_decoupled() {
        // with zero gradient, the update is pure lr * wd * theta shrinkage
        let mut params = vec![10.0];
        let mut opt = AdamW::new(1);
        opt.step(&mut params, &[0.0], 0.1, 0.5);
        assert!((params[0] - (10.0 - 0.1 * 0.5 * 10.0)).abs() < 1e-12);
    }
}
