pub mod aggregate;
pub mod augment;
pub mod dataset;
pub mod evaluate;
pub mod spectrogram;
pub mod train;

use std::path::Path;

use mirkit::audio_io::{downmix_to_mono, load_wav};
use mirkit::AudioBuffer32;

use crate::error::CliResult;

/// Loads a WAV file, averaging channels when it is not mono.
pub fn load_mono(path: &Path) -> CliResult<AudioBuffer32> {
    let buffer: AudioBuffer32 = load_wav(path)?;
    Ok(if buffer.is_mono() { buffer } else { downmix_to_mono(&buffer) })
}
