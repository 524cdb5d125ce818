use ndarray::Array2;
use rayon::prelude::*;
use rustfft::num_complex::Complex;

use super::{frame_count, hann_window, RealMatrix, Scale};
use crate::audio_io::AudioBuffer;
use crate::{Error, Real, Result};

/// Geometric bin layout of a constant-Q transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqtParams {
    /// Center of the lowest bin in Hz.
    pub f_min: f64,
    pub bins_per_octave: usize,
    pub n_bins: usize,
    pub hop_length: usize,
}

impl CqtParams {
    /// Seven octaves at quarter-tone resolution from C1 (32.7032 Hz).
    pub fn c1_seven_octaves(hop_length: usize) -> Self {
        Self {
            f_min: 32.7032,
            bins_per_octave: 24,
            n_bins: 24 * 7,
            hop_length,
        }
    }

    /// Quality factor `1 / (2^(1/B) - 1)`.
    pub fn q(&self) -> f64 {
        1.0 / ((1.0 / self.bins_per_octave as f64).exp2() - 1.0)
    }

    pub fn center_frequency(&self, k: usize) -> f64 {
        self.f_min * (k as f64 / self.bins_per_octave as f64).exp2()
    }

    pub fn center_frequencies(&self) -> Vec<f64> {
        (0..self.n_bins).map(|k| self.center_frequency(k)).collect()
    }

    /// Kernel length in samples for bin `k`: `ceil(Q * sr / f_k)`.
    pub fn kernel_length(&self, k: usize, sample_rate: u32) -> usize {
        (self.q() * sample_rate as f64 / self.center_frequency(k)).ceil() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.f_min > 0.0) {
            return Err(Error::param("f_min must be positive"));
        }
        if self.bins_per_octave == 0 || self.n_bins == 0 {
            return Err(Error::param("bins_per_octave and n_bins must be positive"));
        }
        if self.hop_length == 0 {
            return Err(Error::param("hop_length must be positive"));
        }
        let top = self.center_frequency(self.n_bins - 1);
        let nyquist = sample_rate as f64 / 2.0;
        if top >= nyquist {
            return Err(Error::param(format!(
                "highest CQT bin {top:.2} Hz is not below Nyquist {nyquist} Hz"
            )));
        }
        Ok(())
    }
}

/// Magnitude constant-Q transform by direct projection.
///
/// Bin `k` at frame `m` is `|sum_n x[m*hop - N_k/2 + n] w_k[n] e^{-2 pi i f_k n / sr}| / N_k`
/// with a Hann window `w_k` of length `N_k`; samples outside the signal count
/// as zero.
pub fn cqt<T: Real>(buffer: &AudioBuffer<T>, params: &CqtParams) -> Result<RealMatrix<T>> {
    buffer.require_mono("cqt")?;
    let sr = buffer.sample_rate();
    params.validate(sr)?;
    let x = buffer.samples();
    let longest = params.kernel_length(0, sr);
    if x.len() < longest {
        return Err(Error::InvalidBuffer(format!(
            "signal of {} samples is shorter than the longest CQT kernel ({longest})",
            x.len()
        )));
    }
    let n_frames = frame_count(x.len(), params.hop_length);
    let two_pi = 2.0 * std::f64::consts::PI;

    let rows: Vec<Vec<T>> = (0..params.n_bins)
        .into_par_iter()
        .map(|k| {
            let f = params.center_frequency(k);
            let len = params.kernel_length(k, sr);
            let window = hann_window::<f64>(len);
            let inv_len = 1.0 / len as f64;
            let kernel: Vec<Complex<f64>> = (0..len)
                .map(|n| {
                    let phase = -two_pi * f * n as f64 / sr as f64;
                    Complex::from_polar(window[n] * inv_len, phase)
                })
                .collect();
            let half = (len / 2) as isize;
            (0..n_frames)
                .map(|m| {
                    let start = (m * params.hop_length) as isize - half;
                    let lo = (-start).max(0) as usize;
                    let hi = ((x.len() as isize - start).max(0) as usize).min(len);
                    let mut acc = Complex::new(0.0, 0.0);
                    for n in lo..hi {
                        acc += kernel[n] * x[(start + n as isize) as usize].as_f64();
                    }
                    T::lit(acc.norm())
                })
                .collect()
        })
        .collect();

    let mut data = Array2::<T>::zeros((params.n_bins, n_frames));
    for (k, row) in rows.into_iter().enumerate() {
        for (m, v) in row.into_iter().enumerate() {
            data[[k, m]] = v;
        }
    }
    Ok(RealMatrix {
        data,
        scale: Scale::Cqt,
        frequencies: params.center_frequencies(),
        hop_length: params.hop_length,
        sample_rate: sr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_octave_grid() {
        let p = CqtParams::c1_seven_octaves(512);
        let f = p.center_frequencies();
        assert_eq!(f.len(), 168);
        assert!((f[167] - 32.7032 * (167.0f64 / 24.0).exp2()).abs() < 1e-9);
        // top bin sits one quarter tone below C8 (= f_min * 2^7)
        assert!((f[167] - 4066.842).abs() < 1e-3);
        assert!((p.center_frequency(168) - 32.7032 * 128.0).abs() < 1e-9);
        for w in f.windows(2) {
            assert!((w[1] / w[0] - (1.0f64 / 24.0).exp2()).abs() < 1e-12);
        }
        assert!(p.validate(22050).is_ok());
    }

    #[test]
    fn rejects_bins_above_nyquist() {
        let p = CqtParams { f_min: 1000.0, bins_per_octave: 12, n_bins: 48, hop_length: 256 };
        assert!(p.validate(22050).is_err());
    }

    #[test]
    fn silence_and_short_input() {
        let p = CqtParams { f_min: 110.0, bins_per_octave: 12, n_bins: 24, hop_length: 512 };
        let x = AudioBuffer::<f64>::mono(vec![0.0; 8000], 22050).unwrap();
        let c = cqt(&x, &p).unwrap();
        assert_eq!(c.shape(), (24, 16));
        assert!(c.data.iter().all(|&v| v == 0.0));
        let short = AudioBuffer::<f64>::mono(vec![0.0; 100], 22050).unwrap();
        assert!(cqt(&short, &p).is_err());
    }

    #[test]
    fn tone_lands_in_nearest_bin() {
        let sr = 22050;
        let p = CqtParams { f_min: 110.0, bins_per_octave: 24, n_bins: 72, hop_length: 1024 };
        let x: Vec<f32> = (0..sr as usize)
            .map(|t| (2.0 * std::f32::consts::PI * 440.0 * t as f32 / sr as f32).sin())
            .collect();
        let c = cqt(&AudioBuffer::mono(x, sr).unwrap(), &p).unwrap();
        let nearest = p
            .center_frequencies()
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 440.0).abs().total_cmp(&(b.1 - 440.0).abs()))
            .unwrap()
            .0;
        assert_eq!(nearest, 48);
        assert_eq!(c.dominant_row(), nearest);
        // a full-scale sinusoid projects to about 1/4 with the Hann mean of 1/2
        let mid = c.data[[48, 10]];
        assert!((mid - 0.25).abs() < 0.01, "{mid}");
    }
}
