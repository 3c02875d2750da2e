//! Log-mel spectrogram front-end.
//!
//! Hann window (periodic), FFT 1024, hop 256, center reflect padding,
//! power spectrum, 80-bin HTK-scale triangular filterbank over 0-12000 Hz
//! (area-normalized), then ln(max(energy, eps)) with eps = 1e-5.
//! Frame count for T samples is floor(T/256) + 1.

use crate::error::{Error, Result};
use crate::frontend::wav::Waveform;
use crate::numerics::SeqTensor;

pub const N_FFT: usize = 1024;
pub const HOP: usize = 256;
pub const N_MELS: usize = 80;
pub const MEL_EPS: f64 = 1e-5;
pub const FMIN: f64 = 0.0;
pub const FMAX: f64 = 12_000.0;
pub const FRAMES_PER_SECOND: f64 = 24_000.0 / HOP as f64; // 93.75

/// Log-compressed mel energies, mel-major (F x T_m).
#[derive(Debug, Clone)]
pub struct MelSpectrogram {
    values: SeqTensor,
}

impl MelSpectrogram {
    /// Wraps precomputed log-mel values, clamping to the log floor.
    pub fn from_values(values: SeqTensor) -> Result<Self> {
        values.check_finite("mel values")?;
        let floor = MEL_EPS.ln();
        let clamped = SeqTensor::from_fn(values.rows(), values.cols(), |i, j| {
            values.get(i, j).max(floor)
        });
        Ok(MelSpectrogram { values: clamped })
    }

    pub fn mel_bins(&self) -> usize {
        self.values.rows()
    }

    pub fn frames(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &SeqTensor {
        &self.values
    }

    /// Time-major view (T_m x F) for frame-rate processing.
    pub fn to_frames(&self) -> SeqTensor {
        SeqTensor::from_fn(self.frames(), self.mel_bins(), |t, f| self.values.get(f, t))
    }
}

/// HTK mel scale.
fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular area-normalized filterbank, N_MELS x (N_FFT/2 + 1).
pub fn mel_filterbank(sample_rate: f64, n_mels: usize, fmin: f64, fmax: f64) -> SeqTensor {
    let n_bins = N_FFT / 2 + 1;
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();
    SeqTensor::from_fn(n_mels, n_bins, |m, k| {
        let f = k as f64 * sample_rate / N_FFT as f64;
        let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let w = if f <= lo || f >= hi {
            0.0
        } else if f <= mid {
            (f - lo) / (mid - lo)
        } else {
            (hi - f) / (hi - mid)
        };
        // area normalization: peak scaled by 2 / bandwidth
        w * 2.0 / (hi - lo)
    })
}

/// Center frequencies (Hz) of the filterbank triangles.
pub fn mel_center_frequencies(n_mels: usize, fmin: f64, fmax: f64) -> Vec<f64> {
    let mel_lo = hz_to_mel(fmin);
    let mel_hi = hz_to_mel(fmax);
    (1..=n_mels)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// In-place iterative radix-2 FFT on interleaved complex (re, im) pairs.
fn fft_inplace(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    debug_assert!(n.is_power_of_two());
    // bit-reversal permutation
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let (mut cr, mut ci) = (1.0f64, 0.0f64);
            for k in 0..len / 2 {
                let (ar, ai) = (re[i + k], im[i + k]);
                let (br, bi) = (re[i + k + len / 2], im[i + k + len / 2]);
                let (tr, ti) = (br * cr - bi * ci, br * ci + bi * cr);
                re[i + k] = ar + tr;
                im[i + k] = ai + ti;
                re[i + k + len / 2] = ar - tr;
                im[i + k + len / 2] = ai - ti;
                let ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// Reflect indexing without edge duplication (librosa-style "reflect").
fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut p = i.rem_euclid(period);
    if p >= n as isize {
        p = period - p;
    }
    p as usize
}

/// Periodic Hann window of length N_FFT.
fn hann_window() -> Vec<f64> {
    (0..N_FFT)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / N_FFT as f64).cos()))
        .collect()
}

pub fn compute_mel(w: &Waveform) -> Result<MelSpectrogram> {
    if w.is_empty() {
        return Err(Error::InvalidArg {
            op: "compute_mel",
            detail: "empty waveform".into(),
        });
    }
    let t = w.len();
    let n_frames = t / HOP + 1;
    let window = hann_window();
    let fbank = mel_filterbank(w.sample_rate as f64, N_MELS, FMIN, FMAX);
    let n_bins = N_FFT / 2 + 1;
    let pad = N_FFT / 2;

    let mut mel = SeqTensor::zeros(N_MELS, n_frames);
    let mut re = vec![0.0; N_FFT];
    let mut im = vec![0.0; N_FFT];
    let mut power = vec![0.0; n_bins];
    for frame in 0..n_frames {
        let start = frame as isize * HOP as isize - pad as isize;
        for i in 0..N_FFT {
            let src = reflect_index(start + i as isize, t);
            re[i] = w.samples[src] * window[i];
            im[i] = 0.0;
        }
        fft_inplace(&mut re, &mut im);
        for k in 0..n_bins {
            power[k] = re[k] * re[k] + im[k] * im[k];
        }
        for m in 0..N_MELS {
            let mut e = 0.0;
            for k in 0..n_bins {
                e += fbank.get(m, k) * power[k];
            }
            mel.set(m, frame, e.max(MEL_EPS).ln());
        }
    }
    Ok(MelSpectrogram { values: mel })
}
