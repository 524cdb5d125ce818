//! Building blocks for music classification pipelines.
//!
//! The crate covers the numeric side of a typical tagging or genre
//! classification workflow:
//!
//! * [`audio_io`]: RIFF/WAVE loading and saving, channel downmix.
//! * [`spectral`]: STFT/iSTFT, decibel scaling, mel filterbanks, constant-Q.
//! * [`augment`]: seeded time-domain augmentations and their composition.
//! * [`metrics`]: confusion counts, ROC-AUC, average precision, chunk aggregation.
//! * [`losses`]: cross-entropy, NT-Xent and semi-supervised regularizers with
//!   analytic gradients.
//! * [`trainer`]: a softmax linear classifier, noisy student self-training and
//!   linear evaluation.
//! * [`dataset`]: split files, chunk plans and split hygiene audits.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar for the common cases.

pub mod audio_io;
pub mod augment;
pub mod dataset;
mod error;
pub mod losses;
pub mod metrics;
pub mod rng;
mod scalar;
pub mod spectral;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Real;

/// Single precision audio buffer, the default in-memory audio form.
pub type AudioBuffer32 = audio_io::AudioBuffer<f32>;
/// Double precision audio buffer.
pub type AudioBuffer64 = audio_io::AudioBuffer<f64>;
pub type ComplexSpectrogram32 = spectral::ComplexSpectrogram<f32>;
pub type ComplexSpectrogram64 = spectral::ComplexSpectrogram<f64>;
pub type RealMatrix32 = spectral::RealMatrix<f32>;
pub type RealMatrix64 = spectral::RealMatrix<f64>;
pub type MelFilterbank32 = spectral::MelFilterbank<f32>;
pub type MelFilterbank64 = spectral::MelFilterbank<f64>;
pub type LinearModel32 = trainer::LinearModel<f32>;
pub type LinearModel64 = trainer::LinearModel<f64>;
pub type PredictionSet32 = metrics::PredictionSet<f32>;
pub type PredictionSet64 = metrics::PredictionSet<f64>;

/// Version string stamped into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
