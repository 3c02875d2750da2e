//! Audio and text front-end: WAV ingestion, log-mel spectrograms, phoneme
//! embeddings, and the global style embedding.

mod mel;
mod style;
mod tokens;
mod wav;

pub use mel::{
    compute_mel, mel_center_frequencies, mel_filterbank, MelSpectrogram, FMAX, FMIN,
    FRAMES_PER_SECOND, HOP, MEL_EPS, N_FFT, N_MELS,
};
pub use style::{style_embed, style_embed_ctx, StyleEmbedding, StyleHandles, StyleParams};
pub use tokens::{embed_tokens, PhonemeSequence};
pub use wav::{load_wav, parse_wav, write_wav, Waveform, SAMPLE_RATE};
