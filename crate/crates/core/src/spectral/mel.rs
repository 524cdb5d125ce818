use ndarray::Array2;

use super::{fft_frequencies, magnitude, stft, Power, RealMatrix, Scale};
use crate::audio_io::AudioBuffer;
use crate::{Error, Real, Result};

const BREAK_HZ: f64 = 1000.0;
const BREAK_MEL: f64 = 15.0;
/// Mels per natural-log unit above the break: 27 mels per factor of 6.4.
const LOG_MELS: f64 = 27.0;
const LOG_SPAN: f64 = 6.4;

/// Hz to mel: linear (3/200 mel per Hz) up to 1 kHz, logarithmic above.
pub fn hz_to_mel<T: Real>(f: T) -> Result<T> {
    if f < T::zero() || f.is_nan() {
        return Err(Error::param(format!("negative frequency {f}")));
    }
    let f = f.as_f64();
    let mel = if f < BREAK_HZ {
        f * 3.0 / 200.0
    } else {
        BREAK_MEL + LOG_MELS * (f / BREAK_HZ).ln() / LOG_SPAN.ln()
    };
    Ok(T::lit(mel))
}

pub fn mel_to_hz<T: Real>(m: T) -> Result<T> {
    if m < T::zero() || m.is_nan() {
        return Err(Error::param(format!("negative mel value {m}")));
    }
    let m = m.as_f64();
    let f = if m < BREAK_MEL {
        m * 200.0 / 3.0
    } else {
        BREAK_HZ * (LOG_SPAN.ln() * (m - BREAK_MEL) / LOG_MELS).exp()
    };
    Ok(T::lit(f))
}

/// Triangular, area-normalized mel filters over the FFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank<T> {
    /// `n_mels x (n_fft / 2 + 1)`
    pub weights: Array2<T>,
    pub f_min: f64,
    pub f_max: f64,
    pub sample_rate: u32,
    pub n_fft: usize,
    /// The `n_mels + 2` band edges in Hz; filter `i` spans `edges[i]..edges[i + 2]`
    /// and peaks at `edges[i + 1]`.
    pub edges: Vec<f64>,
    /// Rows with no nonzero weight (too many mels for the FFT resolution).
    pub empty_rows: Vec<usize>,
}

impl<T: Real> MelFilterbank<T> {
    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    /// Peak frequency of every filter in Hz.
    pub fn center_frequencies(&self) -> Vec<f64> {
        self.edges[1..self.edges.len() - 1].to_vec()
    }
}

pub fn mel_filterbank<T: Real>(
    sample_rate: u32,
    n_fft: usize,
    n_mels: usize,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank<T>> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_mels == 0 {
        return Err(Error::param("n_mels must be positive"));
    }
    if n_fft < 2 || n_fft % 2 != 0 {
        return Err(Error::param(format!("n_fft must be even and >= 2, got {n_fft}")));
    }
    if !(f_min >= 0.0 && f_min < f_max) {
        return Err(Error::param(format!("need 0 <= f_min < f_max, got {f_min}..{f_max}")));
    }
    if f_max > nyquist {
        return Err(Error::param(format!("f_max {f_max} Hz exceeds Nyquist {nyquist} Hz")));
    }
    let lo = hz_to_mel(f_min)?;
    let hi = hz_to_mel(f_max)?;
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_mels + 1) as f64))
        .collect::<Result<_>>()?;
    let freqs = fft_frequencies(sample_rate, n_fft);
    let mut weights = Array2::<T>::zeros((n_mels, freqs.len()));
    let mut empty_rows = Vec::new();
    for i in 0..n_mels {
        let (left, center, right) = (edges[i], edges[i + 1], edges[i + 2]);
        let norm = 2.0 / (right - left);
        let mut any = false;
        for (k, &f) in freqs.iter().enumerate() {
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            let w = rising.min(falling).max(0.0);
            if w > 0.0 {
                any = true;
                weights[[i, k]] = T::lit(w * norm);
            }
        }
        if !any {
            empty_rows.push(i);
        }
    }
    if !empty_rows.is_empty() {
        log::warn!(
            "{} of {n_mels} mel filters are empty at n_fft={n_fft}; use fewer mels or a larger FFT",
            empty_rows.len()
        );
    }
    Ok(MelFilterbank {
        weights,
        f_min,
        f_max,
        sample_rate,
        n_fft,
        edges,
        empty_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelParams {
    pub n_fft: usize,
    pub hop_length: usize,
    pub n_mels: usize,
    pub f_min: f64,
    /// `None` means Nyquist.
    pub f_max: Option<f64>,
    pub power: Power,
}

impl Default for MelParams {
    fn default() -> Self {
        Self {
            n_fft: 512,
            hop_length: 128,
            n_mels: 128,
            f_min: 0.0,
            f_max: None,
            power: Power::Power,
        }
    }
}

pub fn melspectrogram<T: Real>(buffer: &AudioBuffer<T>, params: &MelParams) -> Result<RealMatrix<T>> {
    let f_max = params.f_max.unwrap_or(buffer.sample_rate() as f64 / 2.0);
    let fb = mel_filterbank::<T>(buffer.sample_rate(), params.n_fft, params.n_mels, params.f_min, f_max)?;
    let spec = stft(buffer, params.n_fft, params.hop_length)?;
    let mag = magnitude(&spec, params.power);
    Ok(RealMatrix {
        data: fb.weights.dot(&mag.data),
        scale: Scale::Mel,
        frequencies: fb.center_frequencies(),
        hop_length: params.hop_length,
        sample_rate: buffer.sample_rate(),
    })
}
