use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{frame_count, ComplexSpectrogram};
use crate::audio_io::AudioBuffer;
use crate::{Error, Real, Result};

/// Periodic Hann window of length `n`.
pub fn hann_window<T: Real>(n: usize) -> Vec<T> {
    let two_pi = T::PI() + T::PI();
    let nf = T::from_usize_lossy(n);
    let half = T::lit(0.5);
    (0..n)
        .map(|i| half - half * (two_pi * T::from_usize_lossy(i) / nf).cos())
        .collect()
}

/// Mirror index into `[0, len)` without repeating the edge sample.
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut r = i.rem_euclid(period);
    if r >= len as isize {
        r = period - r;
    }
    r as usize
}

pub fn stft<T: Real>(buffer: &AudioBuffer<T>, n_fft: usize, hop_length: usize) -> Result<ComplexSpectrogram<T>> {
    buffer.require_mono("stft")?;
    if n_fft < 2 || n_fft % 2 != 0 {
        return Err(Error::param(format!("n_fft must be even and >= 2, got {n_fft}")));
    }
    if hop_length == 0 {
        return Err(Error::param("hop_length must be positive"));
    }
    if hop_length > n_fft {
        return Err(Error::param(format!(
            "hop_length {hop_length} exceeds n_fft {n_fft}; frames would leave gaps"
        )));
    }
    let x = buffer.samples();
    if x.is_empty() {
        return Err(Error::InvalidBuffer("stft of an empty buffer".into()));
    }
    let len = x.len();
    let pad = (n_fft / 2) as isize;
    let n_frames = frame_count(len, hop_length);
    let n_bins = n_fft / 2 + 1;
    let window = hann_window::<T>(n_fft);
    let fft = FftPlanner::<T>::new().plan_fft_forward(n_fft);

    let columns: Vec<Vec<Complex<T>>> = (0..n_frames)
        .into_par_iter()
        .map(|m| {
            let start = (m * hop_length) as isize - pad;
            let mut frame: Vec<Complex<T>> = (0..n_fft)
                .map(|n| {
                    let s = x[reflect_index(start + n as isize, len)];
                    Complex::new(s * window[n], T::zero())
                })
                .collect();
            fft.process(&mut frame);
            frame.truncate(n_bins);
            frame
        })
        .collect();

    let mut data = Array2::from_elem((n_bins, n_frames), Complex::new(T::zero(), T::zero()));
    for (m, col) in columns.into_iter().enumerate() {
        for (k, v) in col.into_iter().enumerate() {
            data[[k, m]] = v;
        }
    }
    ComplexSpectrogram::new(data, n_fft, hop_length, buffer.sample_rate())
}

/// Inverse STFT by windowed overlap-add, normalized by the summed squared
/// window. Output is cut or zero-padded to `expected_length`.
pub fn istft<T: Real>(spec: &ComplexSpectrogram<T>, expected_length: usize) -> Result<AudioBuffer<T>> {
    let n_fft = spec.n_fft();
    let hop = spec.hop_length();
    let n_frames = spec.n_frames();
    let pad = n_fft / 2;
    let window = hann_window::<T>(n_fft);
    let ifft = FftPlanner::<T>::new().plan_fft_inverse(n_fft);
    let scale = T::one() / T::from_usize_lossy(n_fft);

    let span = if n_frames == 0 { 0 } else { (n_frames - 1) * hop + n_fft };
    let mut acc = vec![T::zero(); span];
    let mut norm = vec![T::zero(); span];
    let data = spec.data();
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
    for m in 0..n_frames {
        let col = data.column(m);
        for k in 0..=n_fft / 2 {
            buf[k] = col[k];
        }
        // real signal: DC and Nyquist are real, the upper half mirrors the lower
        buf[0].im = T::zero();
        buf[n_fft / 2].im = T::zero();
        for k in 1..n_fft / 2 {
            buf[n_fft - k] = col[k].conj();
        }
        ifft.process(&mut buf);
        let offset = m * hop;
        for n in 0..n_fft {
            acc[offset + n] = acc[offset + n] + buf[n].re * scale * window[n];
            norm[offset + n] = norm[offset + n] + window[n] * window[n];
        }
    }

    // samples inside the analysed span must see some window energy
    let peak = norm.iter().copied().fold(T::zero(), T::max);
    let covered = (n_frames * hop).min(expected_length);
    let floor = peak * T::lit(1e-6);
    for t in 0..covered {
        let p = t + pad;
        if p < span && norm[p] <= floor {
            return Err(Error::param(format!(
                "window/hop pair ({n_fft}, {hop}) leaves sample {t} without overlap"
            )));
        }
    }

    let out = (0..expected_length)
        .map(|t| {
            let p = t + pad;
            if p < span && norm[p] > floor {
                acc[p] / norm[p]
            } else {
                T::zero()
            }
        })
        .collect();
    AudioBuffer::mono(out, spec.sample_rate())
}
