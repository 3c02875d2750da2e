//! Seeded synthetic dataset: sine-tone mels with known F0 contours and
//! random short token strings.

use crate::frontend::{compute_mel, MelSpectrogram, PhonemeSequence, Waveform};
use crate::numerics::{Rng, SeqTensor};

#[derive(Debug, Clone)]
pub struct Sample {
    pub tokens: PhonemeSequence,
    pub mel: MelSpectrogram,
    /// Known tone frequency per frame (Hz), T_m x 1.
    pub f0_ref: SeqTensor,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub samples: Vec<Sample>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// `n` sine-tone utterances, ~0.25 s each, with token strings of 5..=9 ids.
pub fn generate(n: usize, vocab: usize, seed: u64) -> SyntheticDataset {
    let mut rng = Rng::new(seed);
    let samples = (0..n)
        .map(|i| {
            let freq = 220.0 * 2f64.powf(i as f64 / 4.0 % 2.0);
            let dur = 6000 + rng.below(2000); // 0.25-0.33 s at 24 kHz
            let amp = 0.4 + 0.4 * rng.uniform01();
            let wave = Waveform::new(
                (0..dur)
                    .map(|s| {
                        amp * (2.0 * std::f64::consts::PI * freq * s as f64 / 24000.0).sin()
                    })
                    .collect(),
            )
            .expect("finite synthetic waveform");
            let mel = compute_mel(&wave).expect("synthetic mel");
            let t_m = mel.frames();
            let len = 5 + rng.below(5);
            let ids = (0..len).map(|_| rng.below(vocab)).collect();
            Sample {
                tokens: PhonemeSequence::new(ids),
                mel,
                f0_ref: SeqTensor::from_fn(t_m, 1, |_, _| freq),
            }
        })
        .collect();
    SyntheticDataset { samples }
}
