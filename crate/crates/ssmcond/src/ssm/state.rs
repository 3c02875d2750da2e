//! Per-layer recurrent state for chunk-wise processing.
//!
//! Serialized form "MVST" (all integers little-endian):
//!   magic `4D 56 53 54`, u32 version = 1, u32 d_h, u32 d_ssm, u32 k,
//!   u64 frames_seen, then f32 LE payload: ssm_state row-major (d_h x d_ssm)
//!   followed by conv_tail row-major ((k-1) x d_h).

use crate::error::{Error, Result};
use crate::numerics::SeqTensor;
use crate::ssm::MambaLayerParams;

pub const STATE_MAGIC: [u8; 4] = *b"MVST";
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct StreamState {
    /// d_h x d_ssm recurrent state.
    pub ssm_state: SeqTensor,
    /// Last k-1 value-branch frames feeding the causal conv.
    pub conv_tail: SeqTensor,
    pub frames_seen: u64,
}

impl StreamState {
    pub fn zero(p: &MambaLayerParams) -> Self {
        StreamState {
            ssm_state: SeqTensor::zeros(p.d_h, p.d_ssm),
            conv_tail: SeqTensor::zeros(p.k - 1, p.d_h),
            frames_seen: 0,
        }
    }

    pub fn d_h(&self) -> usize {
        self.ssm_state.rows()
    }

    pub fn d_ssm(&self) -> usize {
        self.ssm_state.cols()
    }

    pub fn k(&self) -> usize {
        self.conv_tail.rows() + 1
    }

    pub fn matches(&self, p: &MambaLayerParams) -> Result<()> {
        if self.d_h() != p.d_h || self.d_ssm() != p.d_ssm || self.k() != p.k {
            return Err(Error::StateMismatch(format!(
                "state is (d_h={}, d_ssm={}, k={}), params want (d_h={}, d_ssm={}, k={})",
                self.d_h(),
                self.d_ssm(),
                self.k(),
                p.d_h,
                p.d_ssm,
                p.k
            )));
        }
        Ok(())
    }
}

pub fn save_state(state: &StreamState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&STATE_MAGIC);
    out.extend_from_slice(&STATE_VERSION.to_le_bytes());
    out.extend_from_slice(&(state.d_h() as u32).to_le_bytes());
    out.extend_from_slice(&(state.d_ssm() as u32).to_le_bytes());
    out.extend_from_slice(&(state.k() as u32).to_le_bytes());
    out.extend_from_slice(&state.frames_seen.to_le_bytes());
    for &v in state.ssm_state.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for &v in state.conv_tail.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn restore_state(bytes: &[u8]) -> Result<StreamState> {
    if bytes.len() < 4 || bytes[..4] != STATE_MAGIC {
        return Err(Error::StateMismatch("bad magic".into()));
    }
    let u32_at = |off: usize| -> Result<u32> {
        bytes
            .get(off..off + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or(Error::Truncated {
                expected: off + 4,
                got: bytes.len(),
            })
    };
    let version = u32_at(4)?;
    if version != STATE_VERSION {
        return Err(Error::StateMismatch(format!("version {version}")));
    }
    let d_h = u32_at(8)? as usize;
    let d_ssm = u32_at(12)? as usize;
    let k = u32_at(16)? as usize;
    if k == 0 {
        return Err(Error::StateMismatch("kernel size 0".into()));
    }
    let frames_seen = bytes
        .get(20..28)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
        .ok_or(Error::Truncated {
            expected: 28,
            got: bytes.len(),
        })?;
    let n_state = d_h * d_ssm;
    let n_tail = (k - 1) * d_h;
    let need = 28 + (n_state + n_tail) * 4;
    if bytes.len() < need {
        return Err(Error::Truncated {
            expected: need,
            got: bytes.len(),
        });
    }
    let read_f32s = |off: usize, n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                f32::from_le_bytes(bytes[off + i * 4..off + i * 4 + 4].try_into().unwrap()) as f64
            })
            .collect()
    };
    Ok(StreamState {
        ssm_state: SeqTensor::from_vec(d_h, d_ssm, read_f32s(28, n_state)),
        conv_tail: SeqTensor::from_vec(k - 1, d_h, read_f32s(28 + n_state * 4, n_tail)),
        frames_seen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::params::MambaLayerParams;

    #[test]
    fn fresh_zero_state_round_trips() {
        let p = MambaLayerParams::zeroed(4, 8, 5);
        let s = StreamState::zero(&p);
        let bytes = save_state(&s);
        let back = restore_state(&bytes).unwrap();
        assert_eq!(back.ssm_state, s.ssm_state);
        assert_eq!(back.conv_tail, s.conv_tail);
        assert_eq!(back.frames_seen, 0);
        // byte-exact round trip
        assert_eq!(save_state(&back), bytes);
    }

    #[test]
    fn restore_with_wrong_d_ssm_is_rejected_on_use() {
        let p8 = MambaLayerParams::zeroed(4, 8, 5);
        let p16 = MambaLayerParams::zeroed(4, 16, 5);
        let s = StreamState::zero(&p8);
        let back = restore_state(&save_state(&s)).unwrap();
        assert!(back.matches(&p8).is_ok());
        assert!(matches!(
            back.matches(&p16),
            Err(Error::StateMismatch(_))
        ));
    }

    #[test]
    fn corrupt_header_is_rejected() {
        let p = MambaLayerParams::zeroed(2, 4, 3);
        let mut bytes = save_state(&StreamState::zero(&p));
        bytes[0] = b'X';
        assert!(restore_state(&bytes).is_err());
        let p = MambaLayerParams::zeroed(2, 4, 3);
        let good = save_state(&StreamState::zero(&p));
        assert!(restore_state(&good[..good.len() - 2]).is_err());
    }
}
