//! Recursive filters used by the augmentations: RBJ biquads and the
//! Schroeder reverberator.

/// Second-order section in transposed direct form II, coefficients
/// normalized by `a0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn rbj(cutoff_hz: f64, sample_rate: f64, q: f64, high: bool) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff_hz / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b = if high {
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0]
        } else {
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0]
        };
        Self {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    pub fn lowpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        Self::rbj(cutoff_hz, sample_rate, std::f64::consts::FRAC_1_SQRT_2, false)
    }

    pub fn highpass(cutoff_hz: f64, sample_rate: f64) -> Self {
        Self::rbj(cutoff_hz, sample_rate, std::f64::consts::FRAC_1_SQRT_2, true)
    }

    /// `|H(e^{i w})|` at angular frequency `w` (radians per sample).
    pub fn magnitude_at(&self, w: f64) -> f64 {
        use rustfft::num_complex::Complex;
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = Complex::new(1.0, 0.0) + z1 * self.a[0] + z2 * self.a[1];
        (num / den).norm()
    }

    /// Runs the filter once, causally, from a zero state.
    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let (mut s1, mut s2) = (0.0, 0.0);
        x.iter()
            .map(|&v| {
                let y = self.b[0] * v + s1;
                s1 = self.b[1] * v - self.a[0] * y + s2;
                s2 = self.b[2] * v - self.a[1] * y;
                y
            })
            .collect()
    }
}

/// Comb delays in milliseconds.
pub const COMB_DELAYS_MS: [f64; 4] = [29.7, 37.1, 41.1, 43.7];
pub const ALLPASS_DELAYS_MS: [f64; 2] = [5.0, 1.7];
pub const ALLPASS_GAIN: f64 = 0.7;

/// Comb feedback for a room size in `[0, 1]`: between 0.7 and 0.98.
pub fn comb_feedback(room_size: f64) -> f64 {
    0.7 + 0.28 * room_size.clamp(0.0, 1.0)
}

fn ms_to_samples(ms: f64, sample_rate: f64) -> usize {
    ((ms * sample_rate / 1000.0).round() as usize).max(1)
}

/// `y[n] = x[n] + g y[n - d]`
pub fn feedback_comb(x: &[f64], delay: usize, g: f64) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        y[n] = x[n] + if n >= delay { g * y[n - delay] } else { 0.0 };
    }
    y
}

/// `y[n] = -g x[n] + x[n - d] + g y[n - d]`
pub fn allpass(x: &[f64], delay: usize, g: f64) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for n in 0..x.len() {
        let (xd, yd) = if n >= delay { (x[n - delay], y[n - delay]) } else { (0.0, 0.0) };
        y[n] = -g * x[n] + xd + g * yd;
    }
    y
}

/// Four parallel combs (averaged) into two series allpasses, mixed half and
/// half with the dry signal. Output has the input length; the tail is cut.
pub fn schroeder_reverb(x: &[f64], sample_rate: f64, room_size: f64) -> Vec<f64> {
    let g = comb_feedback(room_size);
    let mut wet = vec![0.0; x.len()];
    for &ms in &COMB_DELAYS_MS {
        let c = feedback_comb(x, ms_to_samples(ms, sample_rate), g);
        for (w, v) in wet.iter_mut().zip(c) {
            *w += 0.25 * v;
        }
    }
    for &ms in &ALLPASS_DELAYS_MS {
        wet = allpass(&wet, ms_to_samples(ms, sample_rate), ALLPASS_GAIN);
    }
    x.iter().zip(wet).map(|(&d, w)| 0.5 * d + 0.5 * w).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dc_gain_of_lowpass_and_highpass() {
        let lp = Biquad::lowpass(3000.0, 22050.0);
        let hp = Biquad::highpass(500.0, 22050.0);
        // transfer function at z = 1
        let lp_dc = (lp.b.iter().sum::<f64>()) / (1.0 + lp.a[0] + lp.a[1]);
        let hp_dc = (hp.b.iter().sum::<f64>()) / (1.0 + hp.a[0] + hp.a[1]);
        assert!((lp_dc - 1.0).abs() < 1e-12);
        assert!(hp_dc.abs() < 1e-12);
        assert!((lp.magnitude_at(0.0) - 1.0).abs() < 1e-12);

        let dc = vec![0.5; 4000];
        let y = lp.process(&dc);
        assert!((y[3999] - 0.5).abs() < 1e-9);
        let y = hp.process(&dc);
        assert!(y[3999].abs() < 1e-9);
    }

    #[test]
    fn butterworth_half_power_at_cutoff() {
        let sr = 22050.0;
        let lp = Biquad::lowpass(2000.0, sr);
        let w = 2.0 * std::f64::consts::PI * 2000.0 / sr;
        assert!((lp.magnitude_at(w) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn allpass_preserves_energy() {
        let mut x = vec![0.0; 20000];
        x[0] = 1.0;
        let y = allpass(&x, 37, 0.7);
        let e: f64 = y.iter().map(|v| v * v).sum();
        assert!((e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn impulse_rings_past_the_comb_delays() {
        let sr = 22050.0;
        let mut x = vec![0.0; sr as usize];
        x[0] = 1.0;
        let y = schroeder_reverb(&x, sr, 0.5);
        assert_eq!(y.len(), x.len());
        let after = (0.05 * sr) as usize;
        let late: f64 = y[after..].iter().map(|v| v * v).sum();
        assert!(late > 1e-3, "{late}");
    }

    #[test]
    fn feedback_stays_stable() {
        assert_eq!(comb_feedback(0.0), 0.7);
        assert!((comb_feedback(1.0) - 0.98).abs() < 1e-15);
        assert!(comb_feedback(5.0) < 1.0);
    }
}
