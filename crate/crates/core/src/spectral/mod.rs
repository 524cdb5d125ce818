//! Time-frequency representations.
//!
//! All analysis uses a periodic Hann window with centered, reflect-padded
//! frames, so a signal of `len` samples analysed with hop `h` always yields
//! `ceil(len / h)` frames.

mod cqt;
mod mel;
mod scale;
mod stft;

use ndarray::Array2;
use rustfft::num_complex::Complex;

pub use cqt::{cqt, CqtParams};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz, melspectrogram, MelFilterbank, MelParams};
pub use scale::{magnitude, to_decibels, DbKind, DbOptions, DbReference, Power};
pub use stft::{hann_window, istft, stft};

use crate::{Error, Real, Result};

/// Analysis window. Only Hann is provided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
}

/// Complex STFT, `(n_fft / 2 + 1) x n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram<T> {
    data: Array2<Complex<T>>,
    n_fft: usize,
    hop_length: usize,
    sample_rate: u32,
    window: Window,
}

impl<T: Real> ComplexSpectrogram<T> {
    pub fn new(data: Array2<Complex<T>>, n_fft: usize, hop_length: usize, sample_rate: u32) -> Result<Self> {
        if n_fft < 2 || n_fft % 2 != 0 {
            return Err(Error::param(format!("n_fft must be even and >= 2, got {n_fft}")));
        }
        if hop_length == 0 {
            return Err(Error::param("hop_length must be positive"));
        }
        if data.nrows() != n_fft / 2 + 1 {
            return Err(Error::shape(format!(
                "{} rows for n_fft {n_fft}, expected {}",
                data.nrows(),
                n_fft / 2 + 1
            )));
        }
        Ok(Self {
            data,
            n_fft,
            hop_length,
            sample_rate,
            window: Window::Hann,
        })
    }

    pub fn data(&self) -> &Array2<Complex<T>> {
        &self.data
    }

    pub fn into_data(self) -> Array2<Complex<T>> {
        self.data
    }

    pub fn n_fft(&self) -> usize {
        self.n_fft
    }

    pub fn hop_length(&self) -> usize {
        self.hop_length
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn n_bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.data.ncols()
    }

    /// `(n_bins, n_frames)`
    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    /// Center frequency of every row in Hz.
    pub fn bin_frequencies(&self) -> Vec<f64> {
        fft_frequencies(self.sample_rate, self.n_fft)
    }
}

/// What the entries of a [`RealMatrix`] measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    LinearMagnitude,
    Power,
    Decibel,
    Mel,
    Cqt,
}

/// Real frequency-like x time matrix with axis metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix<T> {
    pub data: Array2<T>,
    pub scale: Scale,
    /// Center frequency of each row in Hz.
    pub frequencies: Vec<f64>,
    pub hop_length: usize,
    pub sample_rate: u32,
}

impl<T: Real> RealMatrix<T> {
    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    /// Row index of the largest entry in column `frame`.
    pub fn column_argmax(&self, frame: usize) -> usize {
        argmax(self.data.column(frame).iter().copied())
    }

    /// Row index of the largest row sum (energy summed across all frames).
    pub fn dominant_row(&self) -> usize {
        argmax(self.data.rows().into_iter().map(|r| r.sum()))
    }
}

pub(crate) fn argmax<T: PartialOrd>(it: impl IntoIterator<Item = T>) -> usize {
    let mut best: Option<(usize, T)> = None;
    for (i, v) in it.into_iter().enumerate() {
        match &best {
            Some((_, b)) if !(v > *b) => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i).unwrap_or(0)
}

/// Frequencies of the non-negative FFT bins.
pub fn fft_frequencies(sample_rate: u32, n_fft: usize) -> Vec<f64> {
    (0..=n_fft / 2)
        .map(|k| k as f64 * sample_rate as f64 / n_fft as f64)
        .collect()
}

/// Number of centered frames for a signal of `len` samples.
pub fn frame_count(len: usize, hop_length: usize) -> usize {
    len.div_ceil(hop_length)
}
