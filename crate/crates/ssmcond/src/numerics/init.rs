//! Parameter initialization.
//!
//! Dense projections draw from uniform(-1/sqrt(fan_in), +1/sqrt(fan_in));
//! biases start at zero. The state-decay log matrix is initialized so decays
//! span time scales: A_log[c][j] = ln(j+1) for j in 0..d_ssm.

use crate::numerics::{Rng, SeqTensor};

/// fan_in x fan_out projection, uniform scaled by 1/sqrt(fan_in).
pub fn dense(rng: &mut Rng, fan_in: usize, fan_out: usize) -> SeqTensor {
    let b = 1.0 / (fan_in.max(1) as f64).sqrt();
    rng.uniform_tensor(fan_in, fan_out, -b, b)
}

pub fn zeros_row(cols: usize) -> SeqTensor {
    SeqTensor::zeros(1, cols)
}

/// channels x k depthwise kernel, uniform scaled by 1/sqrt(k).
pub fn conv_kernel(rng: &mut Rng, channels: usize, k: usize) -> SeqTensor {
    let b = 1.0 / (k.max(1) as f64).sqrt();
    rng.uniform_tensor(channels, k, -b, b)
}

/// d_h x d_ssm log-decay matrix; exp of each row is 1..=d_ssm.
pub fn a_log(d_h: usize, d_ssm: usize) -> SeqTensor {
    SeqTensor::from_fn(d_h, d_ssm, |_, j| ((j + 1) as f64).ln())
}

/// Per-channel skip gains, initialized to one.
pub fn ones_row(cols: usize) -> SeqTensor {
    SeqTensor::from_vec(1, cols, vec![1.0; cols])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_respects_fan_in_scale() {
        let mut rng = Rng::new(1);
        let w = dense(&mut rng, 16, 8);
        let bound = 0.25;
        for &v in w.data() {
            assert!(v.abs() <= bound);
        }
    }

    #[test]
    fn a_log_spans_time_scales() {
        let a = a_log(2, 4);
        for c in 0..2 {
            for j in 0..4 {
                let decay = -(-a.get(c, j).exp());
                assert!((decay - (j + 1) as f64).abs() < 1e-12);
            }
        }
    }
}
