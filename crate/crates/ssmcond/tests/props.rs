//! Property tests: chunking invariance of the streaming runtime and
//! causality of the causal block under arbitrary partitions.

use proptest::prelude::*;
use ssmcond::numerics::{Padding, Rng, SeqTensor};
use ssmcond::ssm::{mamba_block, MambaLayerParams, StreamState};
use ssmcond::streaming::{open_session_frames, StreamPipelineParams};
use std::sync::Arc;

fn cut_points(t: usize, cuts: &[usize]) -> Vec<usize> {
    let mut pts: Vec<usize> = cuts.iter().map(|c| c % (t + 1)).collect();
    pts.push(0);
    pts.push(t);
    pts.sort_unstable();
    pts.dedup();
    pts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Any partition of the stream produces bitwise-identical concatenated
    /// outputs, for any look-ahead.
    #[test]
    fn chunking_invariance(
        seed in 0u64..1000,
        t in 20usize..120,
        lookahead in 0usize..30,
        cuts in proptest::collection::vec(0usize..1000, 0..6),
    ) {
        let mut rng = Rng::new(seed);
        let pipe = Arc::new(StreamPipelineParams::init(2, 3, 4, 3, 1, 1e3, &mut rng));
        let x = rng.uniform_tensor(t, 2, -1.0, 1.0);
        let offline = pipe.offline(&x).unwrap();

        let pts = cut_points(t, &cuts);
        let mut session = open_session_frames(pipe, lookahead);
        let mut out: Vec<f64> = Vec::new();
        for w in pts.windows(2) {
            let chunk = SeqTensor::from_fn(w[1] - w[0], 2, |r, c| x.get(w[0] + r, c));
            out.extend_from_slice(session.feed(&chunk).unwrap().data());
        }
        out.extend_from_slice(session.close().unwrap().data());
        prop_assert_eq!(out.len(), offline.len());
        for (a, b) in out.iter().zip(offline.data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    /// Causal block outputs at steps <= t0 are bitwise invariant to any
    /// perturbation of later inputs.
    #[test]
    fn causal_block_ignores_future(
        seed in 0u64..1000,
        t in 8usize..40,
        t0_frac in 0.0f64..1.0,
        bump in -3.0f64..3.0,
    ) {
        let mut rng = Rng::new(seed);
        let p = MambaLayerParams::init(3, 4, 5, 1e3, &mut rng);
        let x = rng.uniform_tensor(t, 3, -1.0, 1.0);
        let t0 = ((t - 2) as f64 * t0_frac) as usize;
        let mut y = x.clone();
        for row in (t0 + 1)..t {
            for c in 0..3 {
                y.set(row, c, y.get(row, c) + bump);
            }
        }
        let (a, _) = mamba_block(&x, &p, Padding::Causal, None).unwrap();
        let (b, _) = mamba_block(&y, &p, Padding::Causal, None).unwrap();
        for row in 0..=t0 {
            for c in 0..3 {
                prop_assert_eq!(a.get(row, c).to_bits(), b.get(row, c).to_bits());
            }
        }
    }

    /// Carrying state across an arbitrary split point equals the unsplit run.
    #[test]
    fn state_carry_equals_unsplit(
        seed in 0u64..1000,
        t in 4usize..60,
        split_frac in 0.0f64..1.0,
    ) {
        let mut rng = Rng::new(seed);
        let p = MambaLayerParams::init(2, 5, 3, 1e3, &mut rng);
        let x = rng.uniform_tensor(t, 2, -1.0, 1.0);
        let split = 1 + ((t - 2) as f64 * split_frac) as usize;
        let (full, _) = mamba_block(&x, &p, Padding::Causal, None).unwrap();

        let st = StreamState::zero(&p);
        let first = SeqTensor::from_fn(split, 2, |r, c| x.get(r, c));
        let second = SeqTensor::from_fn(t - split, 2, |r, c| x.get(split + r, c));
        let (y1, st) = mamba_block(&first, &p, Padding::Causal, Some(&st)).unwrap();
        let (y2, _) = mamba_block(&second, &p, Padding::Causal, Some(&st)).unwrap();
        let mut joined = y1.data().to_vec();
        joined.extend_from_slice(y2.data());
        for (a, b) in joined.iter().zip(full.data()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

/// Sessions on separate threads over shared immutable params both match the
/// single-pass reference.
#[test]
fn concurrent_sessions_share_params() {
    let mut rng = Rng::new(400);
    let pipe = Arc::new(StreamPipelineParams::init(2, 3, 4, 3, 2, 1e3, &mut rng));
    let inputs: Vec<SeqTensor> = (0..2)
        .map(|i| {
            let mut r = Rng::new(500 + i);
            r.uniform_tensor(64, 2, -1.0, 1.0)
        })
        .collect();
    let expected: Vec<SeqTensor> = inputs.iter().map(|x| pipe.offline(x).unwrap()).collect();

    let handles: Vec<_> = inputs
        .into_iter()
        .map(|x| {
            let pipe = pipe.clone();
            std::thread::spawn(move || {
                let mut session = open_session_frames(pipe, 5);
                let mut out = session.feed(&x).unwrap().data().to_vec();
                out.extend_from_slice(session.close().unwrap().data());
                out
            })
        })
        .collect();
    for (h, want) in handles.into_iter().zip(&expected) {
        let got = h.join().unwrap();
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(want.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
