//! The public selective-scan operation.
//!
//! Projections (step size, input/output mixing) are input-dependent:
//!
//! ```text
//!   delta_t = softplus(delta_proj(u_t))      per channel
//!   B_t     = B_proj(u_t), C_t = C_proj(u_t) shared across channels
//!   s_t     = exp(delta_t * A) . s_{t-1} + (delta_t * B_t) * u_{t,c}
//!   y_t     = <C_t, s_t> + D * u_t
//! ```

use crate::error::Result;
use crate::numerics::scan_core;
use crate::numerics::{self, SeqTensor};
use crate::ssm::params::MambaLayerParams;
use crate::ssm::state::StreamState;

/// Runs the scan over `u`, continuing from `state` when given (streaming).
/// Returns the output and the advanced state. State magnitudes are checked
/// against `params.s_max`; a violation is a hard error naming step and
/// channel.
pub fn selective_scan(
    u: &SeqTensor,
    params: &MambaLayerParams,
    state: Option<&StreamState>,
) -> Result<(SeqTensor, StreamState)> {
    u.check_finite("selective_scan input")?;
    if let Some(st) = state {
        st.matches(params)?;
    }
    let (y, final_state) = scan_with_options(u, params, state, false)?;
    Ok((y, final_state))
}

/// Like `selective_scan` but optionally keeps the per-step state trajectory
/// (used by bounded-state diagnostics).
pub fn scan_with_trajectory(
    u: &SeqTensor,
    params: &MambaLayerParams,
) -> Result<(SeqTensor, StreamState, Vec<f64>)> {
    u.check_finite("selective_scan input")?;
    let delta_raw = numerics::linear_apply(u, &params.delta_w, Some(&params.delta_b))?;
    let delta = softplus_map(&delta_raw);
    let b_seq = numerics::linear_apply(u, &params.b_w, None)?;
    let c_seq = numerics::linear_apply(u, &params.c_w, None)?;
    let a = params.a_matrix();
    let out = scan_core::scan_forward(
        u,
        &delta,
        &a,
        &b_seq,
        &c_seq,
        None,
        Some(params.s_max),
        true,
    )?;
    let y = add_skip(&out.y, u, params);
    let next = StreamState {
        ssm_state: SeqTensor::from_vec(params.d_h, params.d_ssm, out.final_state),
        conv_tail: SeqTensor::zeros(params.k - 1, params.d_h),
        frames_seen: u.rows() as u64,
    };
    Ok((y, next, out.states.unwrap()))
}

fn scan_with_options(
    u: &SeqTensor,
    params: &MambaLayerParams,
    state: Option<&StreamState>,
    keep_states: bool,
) -> Result<(SeqTensor, StreamState)> {
    let delta_raw = numerics::linear_apply(u, &params.delta_w, Some(&params.delta_b))?;
    let delta = softplus_map(&delta_raw);
    let b_seq = numerics::linear_apply(u, &params.b_w, None)?;
    let c_seq = numerics::linear_apply(u, &params.c_w, None)?;
    let a = params.a_matrix();
    let out = scan_core::scan_forward(
        u,
        &delta,
        &a,
        &b_seq,
        &c_seq,
        state.map(|s| s.ssm_state.data()),
        Some(params.s_max),
        keep_states,
    )?;
    let y = add_skip(&out.y, u, params);
    let next = StreamState {
        ssm_state: SeqTensor::from_vec(params.d_h, params.d_ssm, out.final_state),
        conv_tail: state
            .map(|s| s.conv_tail.clone())
            .unwrap_or_else(|| SeqTensor::zeros(params.k - 1, params.d_h)),
        frames_seen: state.map(|s| s.frames_seen).unwrap_or(0) + u.rows() as u64,
    };
    Ok((y, next))
}

fn softplus_map(x: &SeqTensor) -> SeqTensor {
    SeqTensor::from_fn(x.rows(), x.cols(), |t, c| {
        crate::numerics::softplus(x.get(t, c))
    })
}

fn add_skip(y: &SeqTensor, u: &SeqTensor, params: &MambaLayerParams) -> SeqTensor {
    SeqTensor::from_fn(y.rows(), y.cols(), |t, c| {
        y.get(t, c) + params.d_skip.get(0, c) * u.get(t, c)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    /// Naive per-step recurrence, written independently of the kernel.
    pub(crate) fn scan_oracle(
        u: &SeqTensor,
        p: &MambaLayerParams,
        init: Option<&SeqTensor>,
    ) -> (SeqTensor, SeqTensor) {
        let (t_len, d_h, d_n) = (u.rows(), p.d_h, p.d_ssm);
        let mut s = match init {
            Some(t) => t.data().to_vec(),
            None => vec![0.0; d_h * d_n],
        };
        let mut y = SeqTensor::zeros(t_len, d_h);
        for t in 0..t_len {
            // delta_t = softplus(u_t . delta_w + delta_b)
            let mut delta = vec![0.0; d_h];
            for c in 0..d_h {
                let mut acc = p.delta_b.get(0, c);
                for i in 0..d_h {
                    acc += u.get(t, i) * p.delta_w.get(i, c);
                }
                acc = (1.0 + acc.exp()).ln();
                delta[c] = acc;
            }
            let proj = |w: &SeqTensor| -> Vec<f64> {
                (0..d_n)
                    .map(|j| (0..d_h).map(|i| u.get(t, i) * w.get(i, j)).sum())
                    .collect()
            };
            let b_t = proj(&p.b_w);
            let c_t = proj(&p.c_w);
            for c in 0..d_h {
                let mut acc = 0.0;
                for j in 0..d_n {
                    let a_cj = -p.a_log.get(c, j).exp();
                    let decay = (delta[c] * a_cj).exp();
                    let sv = decay * s[c * d_n + j] + delta[c] * b_t[j] * u.get(t, c);
                    s[c * d_n + j] = sv;
                    acc += c_t[j] * sv;
                }
                y.set(t, c, acc + p.d_skip.get(0, c) * u.get(t, c));
            }
        }
        (y, SeqTensor::from_vec(d_h, d_n, s))
    }

    #[test]
    fn zero_input_zero_state_gives_zeros() {
        let mut rng = Rng::new(4);
        let mut p = MambaLayerParams::init(3, 6, 5, 1e3, &mut rng);
        p.delta_b = rng.uniform_tensor(1, 3, -0.5, 0.5);
        let u = SeqTensor::zeros(7, 3);
        let (y, st) = selective_scan(&u, &p, None).unwrap();
        assert_eq!(y, SeqTensor::zeros(7, 3));
        assert_eq!(st.ssm_state, SeqTensor::zeros(3, 6));
    }

    #[test]
    fn zero_input_decays_existing_state() {
        let mut rng = Rng::new(8);
        let p = MambaLayerParams::init(2, 4, 5, 1e3, &mut rng);
        let mut init = StreamState::zero(&p);
        init.ssm_state = rng.uniform_tensor(2, 4, 0.5, 1.0);
        let u = SeqTensor::zeros(3, 2);
        let (_, st) = selective_scan(&u, &p, Some(&init)).unwrap();
        // delta = softplus(0) = ln 2; state scales by exp(delta*A)^3 < 1
        for c in 0..2 {
            for j in 0..4 {
                let a_cj = -p.a_log.get(c, j).exp();
                let decay = (2.0f64.ln() * a_cj).exp().powi(3);
                let expect = init.ssm_state.get(c, j) * decay;
                assert!((st.ssm_state.get(c, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_step_closed_form() {
        let mut rng = Rng::new(21);
        let p = MambaLayerParams::init(4, 8, 5, 1e3, &mut rng);
        let u = rng.uniform_tensor(1, 4, -1.0, 1.0);
        let (y, _) = selective_scan(&u, &p, None).unwrap();
        // y_1 per channel: <C(u_1), delta_1 * B(u_1) * u_1> + D*u_1
        for c in 0..4 {
            let mut delta = p.delta_b.get(0, c);
            for i in 0..4 {
                delta += u.get(0, i) * p.delta_w.get(i, c);
            }
            delta = (1.0 + delta.exp()).ln();
            let mut acc = 0.0;
            for j in 0..8 {
                let b_j: f64 = (0..4).map(|i| u.get(0, i) * p.b_w.get(i, j)).sum();
                let c_j: f64 = (0..4).map(|i| u.get(0, i) * p.c_w.get(i, j)).sum();
                acc += c_j * delta * b_j * u.get(0, c);
            }
            acc += p.d_skip.get(0, c) * u.get(0, c);
            assert!((y.get(0, c) - acc).abs() < 1e-12, "channel {c}");
        }
    }

    #[test]
    fn matches_naive_recurrence_oracle() {
        let mut rng = Rng::new(100);
        let p = MambaLayerParams::init(4, 8, 5, 1e3, &mut rng);
        let u = rng.uniform_tensor(16, 4, -1.0, 1.0);
        let (y, st) = selective_scan(&u, &p, None).unwrap();
        let (y_ref, s_ref) = scan_oracle(&u, &p, None);
        for t in 0..16 {
            for c in 0..4 {
                assert!((y.get(t, c) - y_ref.get(t, c)).abs() < 1e-12);
            }
        }
        for i in 0..st.ssm_state.len() {
            assert!((st.ssm_state.data()[i] - s_ref.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn nan_input_rejected() {
        let mut rng = Rng::new(1);
        let p = MambaLayerParams::init(2, 4, 3, 1e3, &mut rng);
        let mut u = SeqTensor::zeros(2, 2);
        u.set(1, 0, f64::NAN);
        assert!(selective_scan(&u, &p, None).is_err());
    }

    #[test]
    fn state_bound_violation_names_step_and_channel() {
        let mut rng = Rng::new(2);
        let mut p = MambaLayerParams::init(2, 4, 3, 1e3, &mut rng);
        p.s_max = 1e-6;
        let u = rng.uniform_tensor(5, 2, 0.5, 1.0);
        let err = selective_scan(&u, &p, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("step"), "{msg}");
    }

    #[test]
    fn split_scan_with_state_carry_equals_single_pass() {
        let mut rng = Rng::new(55);
        let p = MambaLayerParams::init(3, 6, 5, 1e3, &mut rng);
        let u = rng.uniform_tensor(32, 3, -1.0, 1.0);
        let (y_full, st_full) = selective_scan(&u, &p, None).unwrap();

        let u1 = SeqTensor::from_fn(16, 3, |t, c| u.get(t, c));
        let u2 = SeqTensor::from_fn(16, 3, |t, c| u.get(t + 16, c));
        let (y1, st1) = selective_scan(&u1, &p, None).unwrap();
        // save + restore round trip in the middle (f32 payload; compare at f32 scale)
        let restored = crate::ssm::restore_state(&crate::ssm::save_state(&st1)).unwrap();
        let (y2, st2) = selective_scan(&u2, &p, Some(&restored)).unwrap();
        for t in 0..16 {
            for c in 0..3 {
                assert!((y1.get(t, c) - y_full.get(t, c)).abs() < 1e-12);
                assert!(
                    (y2.get(t, c) - y_full.get(t + 16, c)).abs() < 1e-5,
                    "after f32 state round trip"
                );
            }
        }
        assert_eq!(st2.frames_seen, 32);
        assert_eq!(st_full.frames_seen, 32);

        // without serialization the resumed run is exact
        let (y2x, _) = selective_scan(&u2, &p, Some(&st1)).unwrap();
        for t in 0..16 {
            for c in 0..3 {
                assert!((y2x.get(t, c) - y_full.get(t + 16, c)).abs() < 1e-12);
            }
        }
    }
}
