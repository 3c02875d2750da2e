//! Randomized causality verification: perturbing inputs beyond the
//! look-ahead window must leave earlier outputs bitwise unchanged.

use crate::error::{Error, Result};
use crate::numerics::{Rng, SeqTensor};
use crate::streaming::session::{open_session_frames, StreamPipelineParams};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub trials: usize,
    pub pass: bool,
    /// First violating (t0, frame) if any.
    pub violation: Option<(usize, usize)>,
}

fn run_single_feed(
    params: &Arc<StreamPipelineParams>,
    input: &SeqTensor,
    l_frames: usize,
) -> Result<SeqTensor> {
    let mut session = open_session_frames(params.clone(), l_frames);
    let head = session.feed(input)?;
    let tail = session.close()?;
    let mut data = head.data().to_vec();
    data.extend_from_slice(tail.data());
    Ok(SeqTensor::from_vec(
        head.rows() + tail.rows(),
        head.cols().max(tail.cols()),
        data,
    ))
}

/// One probe: perturb frames strictly after t0 + L, compare outputs at
/// steps <= t0 bitwise.
pub fn causality_probe_once(
    params: &Arc<StreamPipelineParams>,
    t: usize,
    l_frames: usize,
    rng: &mut Rng,
) -> Result<Option<(usize, usize)>> {
    if t <= l_frames + 2 {
        return Err(Error::InvalidArg {
            op: "causality_probe",
            detail: format!("need T > L + 2, got T={t}, L={l_frames}"),
        });
    }
    let d_in = params.d_in;
    let input = rng.uniform_tensor(t, d_in, -1.0, 1.0);
    let t0 = rng.below(t - l_frames - 2);
    let mut perturbed = input.clone();
    for row in (t0 + l_frames + 1)..t {
        for c in 0..d_in {
            perturbed.set(row, c, perturbed.get(row, c) + rng.uniform(-1.0, 1.0));
        }
    }
    let base = run_single_feed(params, &input, l_frames)?;
    let alt = run_single_feed(params, &perturbed, l_frames)?;
    for row in 0..=t0 {
        for c in 0..base.cols() {
            if base.get(row, c).to_bits() != alt.get(row, c).to_bits() {
                return Ok(Some((t0, row)));
            }
        }
    }
    Ok(None)
}

pub fn causality_probe(
    params: &Arc<StreamPipelineParams>,
    t: usize,
    l_frames: usize,
    trials: usize,
    rng: &mut Rng,
) -> Result<ProbeReport> {
    for _ in 0..trials {
        if let Some(v) = causality_probe_once(params, t, l_frames, rng)? {
            return Ok(ProbeReport {
                trials,
                pass: false,
                violation: Some(v),
            });
        }
    }
    Ok(ProbeReport {
        trials,
        pass: true,
        violation: None,
    })
}
