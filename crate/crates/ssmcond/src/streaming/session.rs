//! Chunked streaming over a causal Uni-Mamba pipeline.
//!
//! Look-ahead is realized as emission delay over a causal computation:
//! frame t is released by the feed call that supplies frame t + L, and the
//! per-layer state advances only for released frames. The session footprint
//! is the per-layer states plus at most L pending frames, independent of
//! total stream length.

use crate::error::{Error, Result};
use crate::frontend::FRAMES_PER_SECOND;
use crate::numerics::{init, Rng, SeqTensor};
use crate::ssm::{mamba_block, MambaLayerParams, StreamState};
use crate::numerics::Padding;
use std::sync::Arc;

/// Causal analog of the text path: input projection plus N causal blocks.
#[derive(Debug, Clone)]
pub struct StreamPipelineParams {
    pub d_in: usize,
    pub in_w: SeqTensor,
    pub in_b: SeqTensor,
    pub layers: Vec<MambaLayerParams>,
}

impl StreamPipelineParams {
    pub fn init(
        d_in: usize,
        d_h: usize,
        d_ssm: usize,
        k: usize,
        layers: usize,
        s_max: f64,
        rng: &mut Rng,
    ) -> Self {
        StreamPipelineParams {
            d_in,
            in_w: init::dense(rng, d_in, d_h),
            in_b: init::zeros_row(d_h),
            layers: (0..layers)
                .map(|_| MambaLayerParams::init(d_h, d_ssm, k, s_max, rng))
                .collect(),
        }
    }

    pub fn d_h(&self) -> usize {
        self.in_w.cols()
    }

    /// Single-pass causal run from zero state (the offline reference).
    pub fn offline(&self, x: &SeqTensor) -> Result<SeqTensor> {
        let mut h = crate::numerics::linear_apply(x, &self.in_w, Some(&self.in_b))?;
        for layer in &self.layers {
            h = mamba_block(&h, layer, Padding::Causal, None)?.0;
        }
        Ok(h)
    }
}

/// Converts look-ahead seconds to frames: ceil(L * 24000/256).
pub fn lookahead_frames(l_seconds: f64) -> usize {
    (l_seconds * FRAMES_PER_SECOND).ceil() as usize
}

pub struct StreamSession {
    params: Arc<StreamPipelineParams>,
    states: Vec<StreamState>,
    lookahead: usize,
    pending: SeqTensor,
    emitted: u64,
    fed: u64,
}

pub fn open_session(params: Arc<StreamPipelineParams>, l_seconds: f64) -> Result<StreamSession> {
    if l_seconds.is_nan() || l_seconds < 0.0 {
        return Err(Error::InvalidArg {
            op: "open_session",
            detail: format!("invalid look-ahead {l_seconds}"),
        });
    }
    let frames = lookahead_frames(l_seconds);
    Ok(open_session_frames(params, frames))
}

pub fn open_session_frames(params: Arc<StreamPipelineParams>, frames: usize) -> StreamSession {
    let states = params.layers.iter().map(StreamState::zero).collect();
    let d_in = params.d_in;
    StreamSession {
        params,
        states,
        lookahead: frames,
        pending: SeqTensor::zeros(0, d_in),
        emitted: 0,
        fed: 0,
    }
}

impl StreamSession {
    pub fn lookahead_frames(&self) -> usize {
        self.lookahead
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn fed(&self) -> u64 {
        self.fed
    }

    pub fn pending_frames(&self) -> usize {
        self.pending.rows()
    }

    /// Appends a chunk and releases every frame whose look-ahead window is
    /// fully available.
    pub fn feed(&mut self, chunk: &SeqTensor) -> Result<SeqTensor> {
        if chunk.cols() != self.params.d_in {
            return Err(Error::Shape {
                op: "feed",
                detail: format!(
                    "chunk has {} features, pipeline wants {}",
                    chunk.cols(),
                    self.params.d_in
                ),
            });
        }
        chunk.check_finite("stream chunk")?;
        self.fed += chunk.rows() as u64;
        let combined = if self.pending.rows() == 0 {
            chunk.clone()
        } else {
            concat_rows(&self.pending, chunk)
        };
        let releasable = combined.rows().saturating_sub(self.lookahead);
        if releasable == 0 {
            self.pending = combined;
            return Ok(SeqTensor::zeros(0, self.params.d_h()));
        }
        let release = crate::numerics::slice_rows(&combined, 0, releasable);
        self.pending = crate::numerics::slice_rows(&combined, releasable, combined.rows());
        let out = self.process(&release)?;
        self.emitted += out.rows() as u64;
        Ok(out)
    }

    /// Flushes the pending frames (look-ahead truncated at stream end) and
    /// consumes the session.
    pub fn close(mut self) -> Result<SeqTensor> {
        if self.pending.rows() == 0 {
            return Ok(SeqTensor::zeros(0, self.params.d_h()));
        }
        let rest = std::mem::replace(&mut self.pending, SeqTensor::zeros(0, self.params.d_in));
        let out = self.process(&rest)?;
        self.emitted += out.rows() as u64;
        Ok(out)
    }

    fn process(&mut self, frames: &SeqTensor) -> Result<SeqTensor> {
        let mut h = crate::numerics::linear_apply(frames, &self.params.in_w, Some(&self.params.in_b))?;
        for (layer, state) in self.params.layers.iter().zip(self.states.iter_mut()) {
            let (out, next) = mamba_block(&h, layer, Padding::Causal, Some(state))?;
            *state = next;
            h = out;
        }
        Ok(h)
    }
}

fn concat_rows(a: &SeqTensor, b: &SeqTensor) -> SeqTensor {
    debug_assert_eq!(a.cols(), b.cols());
    let mut data = Vec::with_capacity((a.rows() + b.rows()) * a.cols());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    SeqTensor::from_vec(a.rows() + b.rows(), a.cols(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pipeline(seed: u64) -> Arc<StreamPipelineParams> {
        let mut rng = Rng::new(seed);
        Arc::new(StreamPipelineParams::init(3, 4, 6, 5, 2, 1e3, &mut rng))
    }

    #[test]
    fn lookahead_frame_conversion() {
        assert_eq!(lookahead_frames(0.0), 0);
        assert_eq!(lookahead_frames(0.25), 24);
        assert_eq!(lookahead_frames(0.5), 47);
        assert_eq!(lookahead_frames(1.0), 94);
        assert_eq!(lookahead_frames(2.0), 188);
    }

    #[test]
    fn negative_lookahead_rejected() {
        assert!(open_session(pipeline(1), -0.1).is_err());
    }

    #[test]
    fn zero_lookahead_chunked_equals_offline_slices() {
        let p = pipeline(2);
        let mut rng = Rng::new(3);
        let x = rng.uniform_tensor(20, 3, -1.0, 1.0);
        let offline = p.offline(&x).unwrap();
        let mut session = open_session(p, 0.0).unwrap();
        let mut row = 0;
        for (lo, hi) in [(0, 5), (5, 6), (6, 17), (17, 20)] {
            let chunk = crate::numerics::slice_rows(&x, lo, hi);
            let out = session.feed(&chunk).unwrap();
            assert_eq!(out.rows(), hi - lo, "L=0 releases per chunk");
            for t in 0..out.rows() {
                for c in 0..4 {
                    assert_eq!(
                        out.get(t, c).to_bits(),
                        offline.get(row + t, c).to_bits()
                    );
                }
            }
            row += out.rows();
        }
        let tail = session.close().unwrap();
        assert_eq!(tail.rows(), 0);
    }

    #[test]
    fn chunk_smaller_than_lookahead_is_held_back() {
        let p = pipeline(4);
        let mut rng = Rng::new(5);
        let mut session = open_session_frames(p, 8);
        let out = session.feed(&rng.uniform_tensor(5, 3, -1.0, 1.0)).unwrap();
        assert_eq!(out.rows(), 0);
        assert_eq!(session.pending_frames(), 5);
        assert_eq!(session.fed(), 5);
        assert_eq!(session.emitted(), 0);
    }

    #[test]
    fn split_feeds_match_single_feed_bitwise() {
        let p = pipeline(6);
        let mut rng = Rng::new(7);
        let x = rng.uniform_tensor(32, 3, -1.0, 1.0);

        let mut one = open_session_frames(p.clone(), 8);
        let a = one.feed(&x).unwrap();
        let a_tail = one.close().unwrap();

        let mut two = open_session_frames(p, 8);
        let b1 = two.feed(&crate::numerics::slice_rows(&x, 0, 16)).unwrap();
        let b2 = two.feed(&crate::numerics::slice_rows(&x, 16, 32)).unwrap();
        let b_tail = two.close().unwrap();

        let mut concat_a: Vec<f64> = a.data().to_vec();
        concat_a.extend_from_slice(a_tail.data());
        let mut concat_b: Vec<f64> = b1.data().to_vec();
        concat_b.extend_from_slice(b2.data());
        concat_b.extend_from_slice(b_tail.data());
        assert_eq!(concat_a.len(), concat_b.len());
        for (x, y) in concat_a.iter().zip(&concat_b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn close_immediately_is_empty_and_conservation_holds() {
        let p = pipeline(8);
        let session = open_session_frames(p.clone(), 47);
        let out = session.close().unwrap();
        assert_eq!(out.rows(), 0);

        let mut rng = Rng::new(9);
        let mut session = open_session_frames(p, 47);
        let fed = rng.uniform_tensor(10, 3, -1.0, 1.0);
        let released = session.feed(&fed).unwrap();
        assert_eq!(released.rows(), 0);
        assert_eq!(
            session.emitted() + session.pending_frames() as u64,
            session.fed()
        );
        let tail = session.close().unwrap();
        assert_eq!(tail.rows(), 10);
    }

    #[test]
    fn full_run_equals_offline_for_any_lookahead() {
        let p = pipeline(10);
        let mut rng = Rng::new(11);
        let x = rng.uniform_tensor(60, 3, -1.0, 1.0);
        let offline = p.offline(&x).unwrap();
        for l in [0usize, 4, 47] {
            let mut session = open_session_frames(p.clone(), l);
            let mut out: Vec<f64> = Vec::new();
            for chunk_bounds in [(0, 13), (13, 31), (31, 60)] {
                let chunk = crate::numerics::slice_rows(&x, chunk_bounds.0, chunk_bounds.1);
                out.extend_from_slice(session.feed(&chunk).unwrap().data());
            }
            out.extend_from_slice(session.close().unwrap().data());
            assert_eq!(out.len(), offline.len(), "L={l}");
            for (a, b) in out.iter().zip(offline.data()) {
                assert!((a - b).abs() < 1e-12, "L={l}");
            }
        }
    }

    #[test]
    fn emission_latency_is_exactly_lookahead() {
        let p = pipeline(12);
        let mut rng = Rng::new(13);
        let l = 6usize;
        let t = 20usize;
        let x = rng.uniform_tensor(t, 3, -1.0, 1.0);
        let mut session = open_session_frames(p, l);
        for i in 0..t {
            let frame = crate::numerics::slice_rows(&x, i, i + 1);
            let out = session.feed(&frame).unwrap();
            if i < l {
                assert_eq!(out.rows(), 0, "frame {i} released too early");
            } else {
                assert_eq!(out.rows(), 1, "frame {} released late", i - l);
            }
        }
        assert_eq!(session.emitted(), (t - l) as u64);
    }
}
