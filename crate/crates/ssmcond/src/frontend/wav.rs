//! WAV ingestion: RIFF/WAVE, 16-bit PCM, mono, 24 kHz only. No resampling.

use crate::error::{Error, Result};
use std::path::Path;

pub const SAMPLE_RATE: u32 = 24_000;

#[derive(Debug, Clone)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        for (i, v) in samples.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("waveform sample {i}")));
            }
        }
        Ok(Waveform {
            samples,
            sample_rate: SAMPLE_RATE,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let bytes = std::fs::read(path)?;
    parse_wav(&bytes)
}

pub fn parse_wav(bytes: &[u8]) -> Result<Waveform> {
    if bytes.len() < 12 || &bytes[..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::WavMalformed("missing RIFF/WAVE header".into()));
    }
    let mut off = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    while off + 8 <= bytes.len() {
        let id = &bytes[off..off + 4];
        let size = u32::from_le_bytes(bytes[off + 4..off + 8].try_into().unwrap()) as usize;
        let body_end = off + 8 + size;
        if body_end > bytes.len() {
            return Err(Error::WavMalformed(format!(
                "chunk {:?} overruns file",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[off + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::WavMalformed("fmt chunk too short".into()));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word-aligned
        off = body_end + (size & 1);
    }
    let (format, channels, rate, bits) = fmt.ok_or_else(|| {
        Error::WavMalformed("missing fmt chunk".into())
    })?;
    if format != 1 {
        return Err(Error::WavMalformed(format!(
            "expected PCM (format 1), got format {format}"
        )));
    }
    if channels != 1 {
        return Err(Error::WavChannels(channels));
    }
    if rate != SAMPLE_RATE {
        return Err(Error::WavRate(rate));
    }
    if bits != 16 {
        return Err(Error::WavBits(bits));
    }
    let data = data.ok_or_else(|| Error::WavMalformed("missing data chunk".into()))?;
    let n = data.len() / 2;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let s = i16::from_le_bytes(data[i * 2..i * 2 + 2].try_into().unwrap());
        samples.push(s as f64 / 32768.0);
    }
    Waveform::new(samples)
}

/// Writes a mono 16-bit PCM 24 kHz WAV; samples are clamped to [-1, 1].
pub fn write_wav(samples: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut pcm = Vec::with_capacity(samples.len() * 2);
    for &v in samples {
        let q = (v.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        pcm.extend_from_slice(&q.to_le_bytes());
    }
    let data_len = pcm.len() as u32;
    let mut out = Vec::with_capacity(44 + pcm.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    out.extend_from_slice(&pcm);
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(samples: &[i16], channels: u16, rate: u32, bits: u16) -> Vec<u8> {
        let mut pcm = Vec::new();
        for s in samples {
            pcm.extend_from_slice(&s.to_le_bytes());
        }
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + pcm.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * 2).to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(pcm.len() as u32).to_le_bytes());
        out.extend_from_slice(&pcm);
        out
    }

    #[test]
    fn zeros_load_as_zeros() {
        let bytes = wav_bytes(&vec![0i16; 24000], 1, 24000, 16);
        let w = parse_wav(&bytes).unwrap();
        assert_eq!(w.len(), 24000);
        assert!(w.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_negative_scale_maps_to_minus_one() {
        let bytes = wav_bytes(&[-32768], 1, 24000, 16);
        let w = parse_wav(&bytes).unwrap();
        assert_eq!(w.samples[0], -1.0);
    }

    #[test]
    fn wrong_rate_channels_bits_are_distinct_errors() {
        let base = [0i16; 4];
        assert!(matches!(
            parse_wav(&wav_bytes(&base, 2, 24000, 16)),
            Err(Error::WavChannels(2))
        ));
        assert!(matches!(
            parse_wav(&wav_bytes(&base, 1, 22050, 16)),
            Err(Error::WavRate(22050))
        ));
        assert!(matches!(
            parse_wav(&wav_bytes(&base, 1, 24000, 8)),
            Err(Error::WavBits(8))
        ));
    }

    #[test]
    fn sine_fixture_peaks_near_full_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sine.wav");
        let samples: Vec<f64> = (0..24000)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 24000.0).sin())
            .collect();
        write_wav(&samples, &p).unwrap();
        let w = load_wav(&p).unwrap();
        let peak = w.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((0.999..=1.0).contains(&peak), "peak {peak}");
    }
}
