//! Duration-preserving pitch shift: phase-vocoder time stretch followed by
//! linear-interpolation resampling.

use ndarray::Array2;
use rustfft::num_complex::Complex;

use crate::audio_io::AudioBuffer;
use crate::spectral::{istft, stft, ComplexSpectrogram};
use crate::{Real, Result};

pub const VOCODER_N_FFT: usize = 1024;
pub const VOCODER_HOP: usize = 256;

fn wrap_phase(p: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    p - two_pi * (p / two_pi).round()
}

/// Phase-vocoder time stretch. `rate > 1` speeds up (shorter output),
/// `rate < 1` slows down. Output length is `round(len / rate)`.
pub fn time_stretch<T: Real>(x: &AudioBuffer<T>, rate: f64) -> Result<AudioBuffer<T>> {
    let spec = stft(x, VOCODER_N_FFT, VOCODER_HOP)?;
    let data = spec.data();
    let (n_bins, n_frames) = data.dim();
    let hop = VOCODER_HOP as f64;
    let advance: Vec<f64> = (0..n_bins)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 * hop / VOCODER_N_FFT as f64)
        .collect();
    let column = |m: usize, k: usize| -> Complex<f64> {
        if m < n_frames {
            let z = data[[k, m]];
            Complex::new(z.re.as_f64(), z.im.as_f64())
        } else {
            Complex::new(0.0, 0.0)
        }
    };

    let steps: Vec<f64> = (0..)
        .map(|i| i as f64 * rate)
        .take_while(|&t| t < n_frames as f64)
        .collect();
    let mut out = Array2::from_elem((n_bins, steps.len()), Complex::new(T::zero(), T::zero()));
    let mut phase: Vec<f64> = (0..n_bins).map(|k| column(0, k).arg()).collect();
    for (i, &t) in steps.iter().enumerate() {
        let m = t.floor() as usize;
        let alpha = t - m as f64;
        for k in 0..n_bins {
            let (c0, c1) = (column(m, k), column(m + 1, k));
            let mag = (1.0 - alpha) * c0.norm() + alpha * c1.norm();
            let z = Complex::from_polar(mag, phase[k]);
            out[[k, i]] = Complex::new(T::lit(z.re), T::lit(z.im));
            let dphase = wrap_phase(c1.arg() - c0.arg() - advance[k]);
            phase[k] += advance[k] + dphase;
        }
    }
    let stretched = ComplexSpectrogram::new(out, VOCODER_N_FFT, VOCODER_HOP, x.sample_rate())?;
    let len = (x.len() as f64 / rate).round() as usize;
    istft(&stretched, len)
}

/// Reads `x` at fractional positions `t * step`, linear interpolation,
/// zero beyond the end.
fn resample_linear<T: Real>(x: &[T], step: f64, out_len: usize) -> Vec<T> {
    (0..out_len)
        .map(|t| {
            let pos = t as f64 * step;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            let a = x.get(i).map_or(0.0, |v| v.as_f64());
            let b = x.get(i + 1).map_or(0.0, |v| v.as_f64());
            T::lit(a + (b - a) * frac)
        })
        .collect()
}

/// Shifts pitch by `semitones` keeping the sample count. Zero returns the
/// input unchanged.
pub fn shift_pitch<T: Real>(x: &AudioBuffer<T>, semitones: i32) -> Result<AudioBuffer<T>> {
    x.require_mono("pitch_shift")?;
    if semitones == 0 || x.is_empty() {
        return Ok(x.clone());
    }
    let ratio = (semitones as f64 / 12.0).exp2();
    let stretched = time_stretch(x, 1.0 / ratio)?;
    let y = resample_linear(stretched.samples(), ratio, x.len());
    x.with_samples(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_phase_range() {
        for p in [-10.0, -3.5, 0.0, 3.0, 7.0, 100.0] {
            let w = wrap_phase(p);
            assert!(w.abs() <= std::f64::consts::PI + 1e-12);
            assert!(((p - w) / (2.0 * std::f64::consts::PI)).fract().abs() < 1e-9);
        }
    }

    #[test]
    fn stretch_lengths() {
        let x = AudioBuffer::<f32>::mono(vec![0.1; 10000], 22050).unwrap();
        assert_eq!(time_stretch(&x, 0.5).unwrap().len(), 20000);
        assert_eq!(time_stretch(&x, 2.0).unwrap().len(), 5000);
    }

    #[test]
    fn unit_rate_is_near_identity() {
        let x: Vec<f64> = (0..8000).map(|t| (t as f64 * 0.05).sin() * 0.5).collect();
        let buf = AudioBuffer::mono(x.clone(), 22050).unwrap();
        let y = time_stretch(&buf, 1.0).unwrap();
        for t in 0..8000 {
            assert!((y.samples()[t] - x[t]).abs() < 1e-6);
        }
    }

    #[test]
    fn resample_reads_fractional_positions() {
        let x = [0.0f64, 1.0, 2.0, 3.0];
        assert_eq!(resample_linear(&x, 0.5, 4), vec![0.0, 0.5, 1.0, 1.5]);
        assert_eq!(resample_linear(&x, 2.0, 3), vec![0.0, 2.0, 0.0]);
    }
}
