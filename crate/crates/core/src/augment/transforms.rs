use super::filters::{schroeder_reverb, Biquad};
use super::pitch::shift_pitch;
use crate::audio_io::AudioBuffer;
use crate::rng::Rng;
use crate::{Error, Real, Result};

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::param(format!("{name}: need finite min <= max, got [{lo}, {hi}]")));
    }
    Ok(())
}

fn map_samples<T: Real>(x: &AudioBuffer<T>, f: impl Fn(f64) -> f64) -> AudioBuffer<T> {
    let samples = x.samples().iter().map(|&v| T::lit(f(v.as_f64()))).collect();
    x.with_samples(samples).expect("layout unchanged")
}

fn to_f64<T: Real>(x: &AudioBuffer<T>) -> Vec<f64> {
    x.samples().iter().map(|v| v.as_f64()).collect()
}

fn from_f64<T: Real>(x: &AudioBuffer<T>, y: Vec<f64>) -> AudioBuffer<T> {
    x.with_samples(y.into_iter().map(T::lit).collect())
        .expect("layout unchanged")
}

/// Contiguous `n_samples`-frame slice at a uniform offset in `[0, len - n]`.
pub fn random_resized_crop<T: Real>(x: &AudioBuffer<T>, n_samples: usize, rng: &mut Rng) -> Result<AudioBuffer<T>> {
    let frames = x.frames();
    if n_samples == 0 {
        return Err(Error::param("crop length must be positive"));
    }
    if frames < n_samples {
        return Err(Error::InvalidBuffer(format!(
            "cannot crop {n_samples} samples from {frames}"
        )));
    }
    let offset = rng.below((frames - n_samples + 1) as u64) as usize;
    crop_at(x, offset, n_samples)
}

pub(crate) fn crop_at<T: Real>(x: &AudioBuffer<T>, offset: usize, n_samples: usize) -> Result<AudioBuffer<T>> {
    let ch = x.channels() as usize;
    x.with_samples(x.samples()[offset * ch..(offset + n_samples) * ch].to_vec())
}

pub fn polarity_inversion<T: Real>(x: &AudioBuffer<T>) -> AudioBuffer<T> {
    let samples = x.samples().iter().map(|&v| -v).collect();
    x.with_samples(samples).expect("layout unchanged")
}

/// Scales by `10^(db / 20)`; no renormalization.
pub fn apply_gain_db<T: Real>(x: &AudioBuffer<T>, db: f64) -> AudioBuffer<T> {
    if db == 0.0 {
        return x.clone();
    }
    let factor = 10f64.powf(db / 20.0);
    map_samples(x, |v| v * factor)
}

pub fn gain<T: Real>(x: &AudioBuffer<T>, gain_db_range: (f64, f64), rng: &mut Rng) -> Result<AudioBuffer<T>> {
    check_range("gain_db_range", gain_db_range)?;
    let db = rng.uniform_range(gain_db_range.0, gain_db_range.1);
    Ok(apply_gain_db(x, db))
}

pub fn rms<T: Real>(x: &[T]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v.as_f64().powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Adds white Gaussian noise with standard deviation `ratio * RMS(x)`.
pub fn add_noise<T: Real>(x: &AudioBuffer<T>, ratio: f64, rng: &mut Rng) -> AudioBuffer<T> {
    let std = ratio * rms(x.samples());
    if std == 0.0 {
        return x.clone();
    }
    let y = x.samples().iter().map(|&v| v.as_f64() + std * rng.gaussian()).collect();
    from_f64(x, y)
}

/// Noise-to-signal RMS ratio drawn uniformly from `snr_range`.
pub fn noise<T: Real>(x: &AudioBuffer<T>, snr_range: (f64, f64), rng: &mut Rng) -> Result<AudioBuffer<T>> {
    check_range("snr_range", snr_range)?;
    if snr_range.0 < 0.0 {
        return Err(Error::param("snr_range must be non-negative"));
    }
    let ratio = rng.uniform_range(snr_range.0, snr_range.1);
    Ok(add_noise(x, ratio, rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterChoice {
    LowPass(f64),
    HighPass(f64),
}

pub fn apply_filter<T: Real>(x: &AudioBuffer<T>, choice: FilterChoice) -> Result<AudioBuffer<T>> {
    x.require_mono("high_low_pass")?;
    let sr = x.sample_rate() as f64;
    let nyquist = sr / 2.0;
    let (cutoff, biquad) = match choice {
        FilterChoice::LowPass(f) => (f, Biquad::lowpass(f, sr)),
        FilterChoice::HighPass(f) => (f, Biquad::highpass(f, sr)),
    };
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(Error::param(format!("cutoff {cutoff} Hz outside (0, {nyquist}) Hz")));
    }
    Ok(from_f64(x, biquad.process(&to_f64(x))))
}

/// Fair coin between a low-pass and a high-pass biquad, cutoff uniform in
/// the matching range.
pub fn high_low_pass<T: Real>(
    x: &AudioBuffer<T>,
    lowpass_cutoff_range: (f64, f64),
    highpass_cutoff_range: (f64, f64),
    rng: &mut Rng,
) -> Result<AudioBuffer<T>> {
    check_range("lowpass_cutoff_range", lowpass_cutoff_range)?;
    check_range("highpass_cutoff_range", highpass_cutoff_range)?;
    let choice = if rng.uniform() < 0.5 {
        FilterChoice::LowPass(rng.uniform_range(lowpass_cutoff_range.0, lowpass_cutoff_range.1))
    } else {
        FilterChoice::HighPass(rng.uniform_range(highpass_cutoff_range.0, highpass_cutoff_range.1))
    };
    apply_filter(x, choice)
}

/// `y[t] = x[t] + volume * x[t - delay]`, same length as `x`.
pub fn apply_delay<T: Real>(x: &AudioBuffer<T>, delay_samples: usize, volume_factor: f64) -> Result<AudioBuffer<T>> {
    x.require_mono("delay")?;
    let s = x.samples();
    let y = (0..s.len())
        .map(|t| {
            let echo = if t >= delay_samples { s[t - delay_samples].as_f64() } else { 0.0 };
            s[t].as_f64() + volume_factor * echo
        })
        .collect();
    Ok(from_f64(x, y))
}

/// Delay drawn from the grid `{min, min + step, ..., max}` milliseconds.
pub fn delay<T: Real>(
    x: &AudioBuffer<T>,
    delay_range_ms: (f64, f64),
    delay_interval_ms: f64,
    volume_factor: f64,
    rng: &mut Rng,
) -> Result<AudioBuffer<T>> {
    check_range("delay_range_ms", delay_range_ms)?;
    if delay_range_ms.0 < 0.0 {
        return Err(Error::param("delay_range_ms must be non-negative"));
    }
    if !(delay_interval_ms >= 1.0) {
        return Err(Error::param("delay_interval_ms must be at least 1"));
    }
    if !(volume_factor >= 0.0) {
        return Err(Error::param("volume_factor must be non-negative"));
    }
    let steps = ((delay_range_ms.1 - delay_range_ms.0) / delay_interval_ms).floor() as u64 + 1;
    let ms = delay_range_ms.0 + rng.below(steps) as f64 * delay_interval_ms;
    apply_delay(x, delay_samples(ms, x.sample_rate()), volume_factor)
}

/// `round(ms * sr / 1000)`
pub fn delay_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Integer semitone shift drawn uniformly from the inclusive range.
pub fn pitch_shift<T: Real>(x: &AudioBuffer<T>, semitone_range: (i32, i32), rng: &mut Rng) -> Result<AudioBuffer<T>> {
    let (lo, hi) = semitone_range;
    if lo > hi || lo < -12 || hi > 12 {
        return Err(Error::param(format!(
            "semitone_range must satisfy -12 <= min <= max <= 12, got [{lo}, {hi}]"
        )));
    }
    let s = rng.int_inclusive(lo as i64, hi as i64) as i32;
    shift_pitch(x, s)
}

pub fn apply_reverb<T: Real>(x: &AudioBuffer<T>, room_size: f64) -> Result<AudioBuffer<T>> {
    x.require_mono("reverb")?;
    Ok(from_f64(x, schroeder_reverb(&to_f64(x), x.sample_rate() as f64, room_size)))
}

pub fn reverb<T: Real>(x: &AudioBuffer<T>, room_size_range: (f64, f64), rng: &mut Rng) -> Result<AudioBuffer<T>> {
    check_range("room_size_range", room_size_range)?;
    if room_size_range.0 < 0.0 || room_size_range.1 > 1.0 {
        return Err(Error::param("room_size_range must lie within [0, 1]"));
    }
    let room = rng.uniform_range(room_size_range.0, room_size_range.1);
    apply_reverb(x, room)
}
