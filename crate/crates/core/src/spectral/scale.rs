use super::{ComplexSpectrogram, RealMatrix, Scale};
use crate::{Error, Real, Result};

/// Exponent applied to `|z|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Power {
    /// `|z|`
    Magnitude,
    /// `|z|^2`
    #[default]
    Power,
}

impl Power {
    pub fn from_exponent(p: u32) -> Result<Self> {
        match p {
            1 => Ok(Power::Magnitude),
            2 => Ok(Power::Power),
            _ => Err(Error::param(format!("power must be 1 or 2, got {p}"))),
        }
    }

    pub(crate) fn apply<T: Real>(self, z: rustfft::num_complex::Complex<T>) -> T {
        match self {
            Power::Magnitude => z.norm(),
            Power::Power => z.norm_sqr(),
        }
    }
}

pub fn magnitude<T: Real>(spec: &ComplexSpectrogram<T>, power: Power) -> RealMatrix<T> {
    RealMatrix {
        data: spec.data().mapv(|z| power.apply(z)),
        scale: match power {
            Power::Magnitude => Scale::LinearMagnitude,
            Power::Power => Scale::Power,
        },
        frequencies: spec.bin_frequencies(),
        hop_length: spec.hop_length(),
        sample_rate: spec.sample_rate(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbKind {
    /// `20 log10`
    Amplitude,
    /// `10 log10`
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DbReference {
    Value(f64),
    /// Largest entry of the matrix.
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbOptions {
    pub kind: DbKind,
    pub reference: DbReference,
    /// Lowest value produced, in dB relative to the reference.
    pub floor_db: f64,
    /// When set, values below `max - top_db` are raised to it.
    pub top_db: Option<f64>,
}

impl DbOptions {
    /// Power input, reference 1, floor at -100 dB (amin = 1e-10).
    pub fn power() -> Self {
        Self {
            kind: DbKind::Power,
            reference: DbReference::Value(1.0),
            floor_db: -100.0,
            top_db: None,
        }
    }

    pub fn amplitude() -> Self {
        Self {
            kind: DbKind::Amplitude,
            ..Self::power()
        }
    }

    pub fn with_reference(mut self, reference: DbReference) -> Self {
        self.reference = reference;
        self
    }

    pub fn with_top_db(mut self, top_db: f64) -> Self {
        self.top_db = Some(top_db);
        self
    }
}

impl Default for DbOptions {
    fn default() -> Self {
        Self::power()
    }
}

pub fn to_decibels<T: Real>(m: &RealMatrix<T>, opts: &DbOptions) -> Result<RealMatrix<T>> {
    if m.data.iter().any(|v| *v < T::zero() || v.is_nan()) {
        return Err(Error::param("decibel conversion of negative or NaN entries"));
    }
    let reference = match opts.reference {
        DbReference::Value(r) if r > 0.0 => r,
        DbReference::Value(r) => return Err(Error::param(format!("reference must be positive, got {r}"))),
        DbReference::Max => m.data.iter().copied().fold(T::zero(), T::max).as_f64(),
    };
    if let Some(top) = opts.top_db {
        if top < 0.0 {
            return Err(Error::param("top_db must be non-negative"));
        }
    }
    let factor = match opts.kind {
        DbKind::Amplitude => 20.0,
        DbKind::Power => 10.0,
    };
    let floor = opts.floor_db;
    let mut data = m.data.mapv(|v| {
        let v = v.as_f64();
        let db = if reference > 0.0 && v > 0.0 {
            factor * (v / reference).log10()
        } else {
            f64::NEG_INFINITY
        };
        T::lit(db.max(floor))
    });
    if let Some(top) = opts.top_db {
        let max = data.iter().copied().fold(T::neg_infinity(), T::max);
        let lo = max - T::lit(top);
        data.mapv_inplace(|v| v.max(lo));
    }
    Ok(RealMatrix {
        data,
        scale: Scale::Decibel,
        frequencies: m.frequencies.clone(),
        hop_length: m.hop_length,
        sample_rate: m.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rustfft::num_complex::Complex;

    fn matrix(data: Array2<f64>) -> RealMatrix<f64> {
        let rows = data.nrows();
        RealMatrix {
            data,
            scale: Scale::Power,
            frequencies: vec![0.0; rows],
            hop_length: 1,
            sample_rate: 1,
        }
    }

    #[test]
    fn magnitude_values() {
        let data = array![[Complex::new(-0.9134862f64, 0.22103079), Complex::new(0.0, 0.0), Complex::new(3.0, 4.0)]]
            .reversed_axes();
        // 3 bins need n_fft = 4
        let spec = ComplexSpectrogram::new(data, 4, 1, 22050).unwrap();
        let m = magnitude(&spec, Power::Magnitude);
        assert!((m.data[[0, 0]] - 0.9398466).abs() < 1e-7);
        assert_eq!(m.data[[1, 0]], 0.0);
        assert_eq!(m.data[[2, 0]], 5.0);
        let p = magnitude(&spec, Power::Power);
        assert!((p.data[[2, 0]] - 25.0).abs() < 1e-12);
        assert_eq!(p.scale, Scale::Power);
    }

    #[test]
    fn decibel_points() {
        let m = matrix(array![[1.0, 100.0, 0.0]]);
        let db = to_decibels(&m, &DbOptions::power()).unwrap();
        assert_eq!(db.data[[0, 0]], 0.0);
        assert!((db.data[[0, 1]] - 20.0).abs() < 1e-12);
        assert_eq!(db.data[[0, 2]], -100.0);
        let amp = to_decibels(&m, &DbOptions::amplitude()).unwrap();
        assert!((amp.data[[0, 1]] - 40.0).abs() < 1e-12);
        assert_eq!(amp.data[[0, 2]], -100.0);
    }

    #[test]
    fn reference_max_and_top_db() {
        let m = matrix(array![[1e-12, 1e-3, 10.0]]);
        let opts = DbOptions::power().with_reference(DbReference::Max).with_top_db(80.0);
        let db = to_decibels(&m, &opts).unwrap();
        assert_eq!(db.data[[0, 2]], 0.0);
        assert!((db.data[[0, 1]] + 40.0).abs() < 1e-9);
        assert_eq!(db.data[[0, 0]], -80.0);
    }

    #[test]
    fn silence_with_max_reference_sits_on_the_floor() {
        let m = matrix(Array2::zeros((2, 3)));
        let db = to_decibels(&m, &DbOptions::power().with_reference(DbReference::Max)).unwrap();
        assert!(db.data.iter().all(|&v| v == -100.0));
    }

    #[test]
    fn rejects_negative() {
        let m = matrix(array![[-1.0]]);
        assert!(to_decibels(&m, &DbOptions::power()).is_err());
        let m = matrix(array![[1.0]]);
        let bad = DbOptions::power().with_reference(DbReference::Value(0.0));
        assert!(to_decibels(&m, &bad).is_err());
    }
}
