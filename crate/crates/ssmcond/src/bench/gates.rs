//! Gate statistics over text-encoder fusion traces.
//!
//! The trace is T_x x 2d_h of raw sigmoid activations; the first half gates
//! the forward branch, the second half the backward branch. Means are over
//! all positions per branch; the two need not sum to one (independent
//! sigmoids). Trained values are reported, never asserted.

use crate::bench::report::GateStats;
use crate::error::{Error, Result};
use crate::numerics::SeqTensor;

pub fn gate_stats(traces: &[SeqTensor]) -> Result<GateStats> {
    if traces.is_empty() {
        return Err(Error::InvalidArg {
            op: "gate_stats",
            detail: "need at least one trace".into(),
        });
    }
    let width = traces[0].cols();
    if width % 2 != 0 {
        return Err(Error::Shape {
            op: "gate_stats",
            detail: format!("trace width {width} is not even"),
        });
    }
    let half = width / 2;
    let mut sum_f = 0.0;
    let mut sum_b = 0.0;
    let mut count = 0usize;
    for tr in traces {
        if tr.cols() != width {
            return Err(Error::Shape {
                op: "gate_stats",
                detail: "trace widths differ across corpus".into(),
            });
        }
        for t in 0..tr.rows() {
            let row = tr.row(t);
            sum_f += row[..half].iter().sum::<f64>();
            sum_b += row[half..].iter().sum::<f64>();
            count += half;
        }
    }
    let mean_fwd = sum_f / count as f64;
    let mean_bwd = sum_b / count as f64;
    let mut var_acc = 0.0;
    let mut n_all = 0usize;
    let mean_all = (sum_f + sum_b) / (2 * count) as f64;
    for tr in traces {
        for &v in tr.data() {
            var_acc += (v - mean_all) * (v - mean_all);
            n_all += 1;
        }
    }
    Ok(GateStats {
        mean_fwd,
        mean_bwd,
        var: var_acc / n_all as f64,
        positions: count / half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{gated_fusion_with_trace, GatedFusionParams};
    use crate::numerics::Rng;

    #[test]
    fn zero_gate_weights_give_exact_half_and_zero_variance() {
        let p = GatedFusionParams::new(SeqTensor::zeros(6, 6), SeqTensor::zeros(6, 3), 1.0)
            .unwrap();
        let mut rng = Rng::new(1);
        let h_f = rng.uniform_tensor(5, 3, -1.0, 1.0);
        let h_b = rng.uniform_tensor(5, 3, -1.0, 1.0);
        let (_, tr) = gated_fusion_with_trace(&h_f, &h_b, &p).unwrap();
        let s = gate_stats(&[tr]).unwrap();
        assert_eq!(s.mean_fwd, 0.5);
        assert_eq!(s.mean_bwd, 0.5);
        assert_eq!(s.var, 0.0);
        assert_eq!(s.positions, 5);
    }

    #[test]
    fn saturated_logits_drive_means_to_one() {
        let mut w_g = SeqTensor::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                w_g.set(i, j, 100.0);
            }
        }
        let p = GatedFusionParams::new(w_g, SeqTensor::zeros(4, 2), 1.0).unwrap();
        let h = SeqTensor::from_fn(3, 2, |_, _| 1.0);
        let (_, tr) = gated_fusion_with_trace(&h, &h, &p).unwrap();
        let s = gate_stats(&[tr]).unwrap();
        assert!((s.mean_fwd - 1.0).abs() < 1e-6);
        assert!((s.mean_bwd - 1.0).abs() < 1e-6);
    }

    #[test]
    fn matches_direct_recomputation_oracle() {
        let mut rng = Rng::new(3);
        let p = GatedFusionParams::init(3, 1.0, &mut rng).unwrap();
        let mut traces = Vec::new();
        let mut all = Vec::new();
        for _ in 0..3 {
            let h_f = rng.uniform_tensor(4, 3, -1.0, 1.0);
            let h_b = rng.uniform_tensor(4, 3, -1.0, 1.0);
            let (_, tr) = gated_fusion_with_trace(&h_f, &h_b, &p).unwrap();
            all.extend_from_slice(tr.data());
            traces.push(tr);
        }
        let s = gate_stats(&traces).unwrap();
        assert!(s.mean_fwd > 0.0 && s.mean_fwd < 1.0);
        assert!(s.mean_bwd > 0.0 && s.mean_bwd < 1.0);
        // direct recomputation over the pooled values
        let mut mf = 0.0;
        let mut mb = 0.0;
        let rows = all.len() / 6;
        for r in 0..rows {
            for j in 0..3 {
                mf += all[r * 6 + j];
                mb += all[r * 6 + 3 + j];
            }
        }
        mf /= (rows * 3) as f64;
        mb /= (rows * 3) as f64;
        assert!((s.mean_fwd - mf).abs() < 1e-12);
        assert!((s.mean_bwd - mb).abs() < 1e-12);
    }
}
