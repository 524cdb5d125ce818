//! Seeded time-domain augmentations and their stochastic composition.
//!
//! A pipeline is an ordered list of transforms, each applied with its own
//! probability. View `v` uses one stream per transform `i`, derived from
//! `(seed, v, i)`: the gate draw comes first, then the transform's own draws.

mod filters;
mod pitch;
mod transforms;

use rayon::prelude::*;
use serde_json::{json, Map, Value};

pub use filters::{
    allpass, comb_feedback, feedback_comb, schroeder_reverb, Biquad, ALLPASS_DELAYS_MS, ALLPASS_GAIN,
    COMB_DELAYS_MS,
};
pub use pitch::{shift_pitch, time_stretch, VOCODER_HOP, VOCODER_N_FFT};
pub use transforms::{
    add_noise, apply_delay, apply_filter, apply_gain_db, apply_reverb, delay, delay_samples, gain, high_low_pass,
    noise, pitch_shift, polarity_inversion, random_resized_crop, reverb, rms, FilterChoice,
};

use crate::audio_io::AudioBuffer;
use crate::rng::Rng;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TransformKind {
    RandomResizedCrop {
        n_samples: usize,
    },
    PolarityInversion,
    Gain {
        gain_db_range: (f64, f64),
    },
    Noise {
        snr_range: (f64, f64),
    },
    HighLowPass {
        lowpass_cutoff_range: (f64, f64),
        highpass_cutoff_range: (f64, f64),
    },
    Delay {
        delay_range_ms: (f64, f64),
        delay_interval_ms: f64,
        volume_factor: f64,
    },
    PitchShift {
        semitone_range: (i32, i32),
    },
    Reverb {
        room_size_range: (f64, f64),
    },
}

pub const DEFAULT_GAIN_DB: (f64, f64) = (-6.0, 0.0);
pub const DEFAULT_SNR: (f64, f64) = (0.0001, 0.01);
pub const DEFAULT_LOWPASS_HZ: (f64, f64) = (2200.0, 4000.0);
pub const DEFAULT_HIGHPASS_HZ: (f64, f64) = (200.0, 1200.0);
pub const DEFAULT_DELAY_MS: (f64, f64) = (100.0, 500.0);
pub const DEFAULT_SEMITONES: (i32, i32) = (-7, 7);

impl TransformKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RandomResizedCrop { .. } => "random_resized_crop",
            Self::PolarityInversion => "polarity_inversion",
            Self::Gain { .. } => "gain",
            Self::Noise { .. } => "noise",
            Self::HighLowPass { .. } => "high_low_pass",
            Self::Delay { .. } => "delay",
            Self::PitchShift { .. } => "pitch_shift",
            Self::Reverb { .. } => "reverb",
        }
    }

    pub fn gain() -> Self {
        Self::Gain { gain_db_range: DEFAULT_GAIN_DB }
    }

    pub fn noise() -> Self {
        Self::Noise { snr_range: DEFAULT_SNR }
    }

    pub fn high_low_pass() -> Self {
        Self::HighLowPass {
            lowpass_cutoff_range: DEFAULT_LOWPASS_HZ,
            highpass_cutoff_range: DEFAULT_HIGHPASS_HZ,
        }
    }

    pub fn delay() -> Self {
        Self::Delay {
            delay_range_ms: DEFAULT_DELAY_MS,
            delay_interval_ms: 1.0,
            volume_factor: 0.5,
        }
    }

    pub fn pitch_shift() -> Self {
        Self::PitchShift { semitone_range: DEFAULT_SEMITONES }
    }

    pub fn reverb() -> Self {
        Self::Reverb { room_size_range: (0.0, 1.0) }
    }

    /// Runs the transform unconditionally.
    pub fn apply<T: Real>(&self, x: &AudioBuffer<T>, rng: &mut Rng) -> Result<AudioBuffer<T>> {
        match *self {
            Self::RandomResizedCrop { n_samples } => random_resized_crop(x, n_samples, rng),
            Self::PolarityInversion => Ok(polarity_inversion(x)),
            Self::Gain { gain_db_range } => gain(x, gain_db_range, rng),
            Self::Noise { snr_range } => noise(x, snr_range, rng),
            Self::HighLowPass {
                lowpass_cutoff_range,
                highpass_cutoff_range,
            } => high_low_pass(x, lowpass_cutoff_range, highpass_cutoff_range, rng),
            Self::Delay {
                delay_range_ms,
                delay_interval_ms,
                volume_factor,
            } => delay(x, delay_range_ms, delay_interval_ms, volume_factor, rng),
            Self::PitchShift { semitone_range } => pitch_shift(x, semitone_range, rng),
            Self::Reverb { room_size_range } => reverb(x, room_size_range, rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    /// Probability of applying the transform, in `[0, 1]`.
    pub p: f64,
}

impl TransformSpec {
    pub fn new(kind: TransformKind, p: f64) -> Self {
        Self { kind, p }
    }

    pub fn always(kind: TransformKind) -> Self {
        Self { kind, p: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPipeline {
    pub transforms: Vec<TransformSpec>,
    pub seed: u64,
    pub num_views: usize,
}

impl AugmentationPipeline {
    pub fn new(transforms: Vec<TransformSpec>, seed: u64, num_views: usize) -> Result<Self> {
        let p = Self { transforms, seed, num_views };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_views == 0 {
            return Err(schema("num_views", "must be at least 1"));
        }
        for (i, t) in self.transforms.iter().enumerate() {
            if !(0.0..=1.0).contains(&t.p) {
                return Err(schema(format!("transforms[{i}].p"), format!("{} is outside [0, 1]", t.p)));
            }
            validate_kind(&t.kind, &format!("transforms[{i}].params"))?;
        }
        Ok(())
    }

    /// One view: the gated transforms in declared order.
    pub fn apply_view<T: Real>(&self, x: &AudioBuffer<T>, view: usize) -> Result<AudioBuffer<T>> {
        let mut y = x.clone();
        for (i, t) in self.transforms.iter().enumerate() {
            let mut rng = Rng::derive(self.seed, &[view as u64, i as u64]);
            if rng.uniform() < t.p {
                y = t.kind.apply(&y, &mut rng)?;
            }
        }
        Ok(y)
    }

    pub fn to_json(&self) -> Value {
        let transforms: Vec<Value> = self
            .transforms
            .iter()
            .map(|t| json!({"kind": t.kind.name(), "p": t.p, "params": params_json(&t.kind)}))
            .collect();
        json!({"seed": self.seed, "num_views": self.num_views, "transforms": transforms})
    }
}

/// `num_views` augmented views of `x`, computed one after another.
pub fn apply_pipeline<T: Real>(pipeline: &AugmentationPipeline, x: &AudioBuffer<T>) -> Result<Vec<AudioBuffer<T>>> {
    (0..pipeline.num_views).map(|v| pipeline.apply_view(x, v)).collect()
}

/// Same result as [`apply_pipeline`], with views spread over a dedicated
/// pool of `threads` workers.
pub fn apply_pipeline_parallel<T: Real>(
    pipeline: &AugmentationPipeline,
    x: &AudioBuffer<T>,
    threads: usize,
) -> Result<Vec<AudioBuffer<T>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..pipeline.num_views)
            .into_par_iter()
            .map(|v| pipeline.apply_view(x, v))
            .collect()
    })
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn check_pair(path: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(schema(path, "bounds must be finite"));
    }
    if lo > hi {
        return Err(schema(path, format!("min {lo} exceeds max {hi}")));
    }
    Ok(())
}

fn validate_kind(kind: &TransformKind, at: &str) -> Result<()> {
    let p = |key: &str| format!("{at}.{key}");
    match *kind {
        TransformKind::RandomResizedCrop { n_samples } => {
            if n_samples == 0 {
                return Err(schema(p("n_samples"), "must be positive"));
            }
        }
        TransformKind::PolarityInversion => {}
        TransformKind::Gain { gain_db_range } => check_pair(&p("gain_db_range"), gain_db_range)?,
        TransformKind::Noise { snr_range } => {
            check_pair(&p("snr_range"), snr_range)?;
            if snr_range.0 < 0.0 {
                return Err(schema(p("snr_range"), "must be non-negative"));
            }
        }
        TransformKind::HighLowPass {
            lowpass_cutoff_range,
            highpass_cutoff_range,
        } => {
            for (key, r) in [
                ("lowpass_cutoff_range", lowpass_cutoff_range),
                ("highpass_cutoff_range", highpass_cutoff_range),
            ] {
                check_pair(&p(key), r)?;
                if r.0 <= 0.0 {
                    return Err(schema(p(key), "cutoffs must be positive"));
                }
            }
        }
        TransformKind::Delay {
            delay_range_ms,
            delay_interval_ms,
            volume_factor,
        } => {
            check_pair(&p("delay_range_ms"), delay_range_ms)?;
            if delay_range_ms.0 < 0.0 {
                return Err(schema(p("delay_range_ms"), "must be non-negative"));
            }
            if !(delay_interval_ms >= 1.0) {
                return Err(schema(p("delay_interval_ms"), "must be at least 1 ms"));
            }
            if !(volume_factor >= 0.0) {
                return Err(schema(p("volume_factor"), "must be non-negative"));
            }
        }
        TransformKind::PitchShift { semitone_range: (lo, hi) } => {
            if lo > hi {
                return Err(schema(p("semitone_range"), format!("min {lo} exceeds max {hi}")));
            }
            if lo < -12 || hi > 12 {
                return Err(schema(p("semitone_range"), "must lie within [-12, 12]"));
            }
        }
        TransformKind::Reverb { room_size_range } => {
            check_pair(&p("room_size_range"), room_size_range)?;
            if room_size_range.0 < 0.0 || room_size_range.1 > 1.0 {
                return Err(schema(p("room_size_range"), "must lie within [0, 1]"));
            }
        }
    }
    Ok(())
}

fn params_json(kind: &TransformKind) -> Value {
    let pair = |(a, b): (f64, f64)| json!([a, b]);
    match *kind {
        TransformKind::RandomResizedCrop { n_samples } => json!({ "n_samples": n_samples }),
        TransformKind::PolarityInversion => json!({}),
        TransformKind::Gain { gain_db_range } => json!({ "gain_db_range": pair(gain_db_range) }),
        TransformKind::Noise { snr_range } => json!({ "snr_range": pair(snr_range) }),
        TransformKind::HighLowPass {
            lowpass_cutoff_range,
            highpass_cutoff_range,
        } => json!({
            "lowpass_cutoff_range": pair(lowpass_cutoff_range),
            "highpass_cutoff_range": pair(highpass_cutoff_range),
        }),
        TransformKind::Delay {
            delay_range_ms,
            delay_interval_ms,
            volume_factor,
        } => json!({
            "delay_range_ms": pair(delay_range_ms),
            "delay_interval_ms": delay_interval_ms,
            "volume_factor": volume_factor,
        }),
        TransformKind::PitchShift { semitone_range } => {
            json!({ "semitone_range": [semitone_range.0, semitone_range.1] })
        }
        TransformKind::Reverb { room_size_range } => json!({ "room_size_range": pair(room_size_range) }),
    }
}

/// Reads the keyed parameters of one transform, rejecting keys it does not
/// know. Missing keys fall back to defaults except where none exists.
struct Params<'a> {
    map: &'a Map<String, Value>,
    at: String,
}

impl<'a> Params<'a> {
    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(schema(format!("{}.{key}", self.at), "unknown parameter"));
            }
        }
        Ok(())
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.at)
    }

    fn number(&self, key: &str, default: Option<f64>) -> Result<f64> {
        match self.map.get(key) {
            None => default.ok_or_else(|| schema(self.path(key), "required")),
            Some(v) => v.as_f64().ok_or_else(|| schema(self.path(key), "expected a number")),
        }
    }

    fn pair(&self, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
        match self.map.get(key) {
            None => Ok(default),
            Some(Value::Array(a)) if a.len() == 2 => {
                let get = |i: usize| {
                    a[i].as_f64()
                        .ok_or_else(|| schema(format!("{}[{i}]", self.path(key)), "expected a number"))
                };
                Ok((get(0)?, get(1)?))
            }
            Some(_) => Err(schema(self.path(key), "expected [min, max]")),
        }
    }

    fn int_pair(&self, key: &str, default: (i32, i32)) -> Result<(i32, i32)> {
        match self.map.get(key) {
            None => Ok(default),
            Some(Value::Array(a)) if a.len() == 2 => {
                let get = |i: usize| {
                    a[i].as_i64()
                        .and_then(|v| i32::try_from(v).ok())
                        .ok_or_else(|| schema(format!("{}[{i}]", self.path(key)), "expected an integer"))
                };
                Ok((get(0)?, get(1)?))
            }
            Some(_) => Err(schema(self.path(key), "expected [min, max]")),
        }
    }
}

fn parse_kind(name: &str, params: &Params<'_>, kind_path: &str) -> Result<TransformKind> {
    let kind = match name {
        "random_resized_crop" => {
            params.check_keys(&["n_samples"])?;
            let n = params
                .map
                .get("n_samples")
                .ok_or_else(|| schema(params.path("n_samples"), "required"))?
                .as_u64()
                .ok_or_else(|| schema(params.path("n_samples"), "expected a non-negative integer"))?;
            TransformKind::RandomResizedCrop { n_samples: n as usize }
        }
        "polarity_inversion" => {
            params.check_keys(&[])?;
            TransformKind::PolarityInversion
        }
        "gain" => {
            params.check_keys(&["gain_db_range"])?;
            TransformKind::Gain {
                gain_db_range: params.pair("gain_db_range", DEFAULT_GAIN_DB)?,
            }
        }
        "noise" => {
            params.check_keys(&["snr_range"])?;
            TransformKind::Noise {
                snr_range: params.pair("snr_range", DEFAULT_SNR)?,
            }
        }
        "high_low_pass" => {
            params.check_keys(&["lowpass_cutoff_range", "highpass_cutoff_range"])?;
            TransformKind::HighLowPass {
                lowpass_cutoff_range: params.pair("lowpass_cutoff_range", DEFAULT_LOWPASS_HZ)?,
                highpass_cutoff_range: params.pair("highpass_cutoff_range", DEFAULT_HIGHPASS_HZ)?,
            }
        }
        "delay" => {
            params.check_keys(&["delay_range_ms", "delay_interval_ms", "volume_factor"])?;
            TransformKind::Delay {
                delay_range_ms: params.pair("delay_range_ms", DEFAULT_DELAY_MS)?,
                delay_interval_ms: params.number("delay_interval_ms", Some(1.0))?,
                volume_factor: params.number("volume_factor", Some(0.5))?,
            }
        }
        "pitch_shift" => {
            params.check_keys(&["semitone_range"])?;
            TransformKind::PitchShift {
                semitone_range: params.int_pair("semitone_range", DEFAULT_SEMITONES)?,
            }
        }
        "reverb" => {
            params.check_keys(&["room_size_range"])?;
            TransformKind::Reverb {
                room_size_range: params.pair("room_size_range", (0.0, 1.0))?,
            }
        }
        other => return Err(schema(kind_path, format!("unknown transform kind {other:?}"))),
    };
    Ok(kind)
}

/// Parses and validates a pipeline document:
/// `{"seed": u64, "num_views": n, "transforms": [{"kind", "p", "params"}]}`.
pub fn parse_pipeline_spec(text: &str) -> Result<AugmentationPipeline> {
    let doc: Value = serde_json::from_str(text)?;
    let top = doc.as_object().ok_or_else(|| schema("$", "expected an object"))?;
    for key in top.keys() {
        if !["seed", "num_views", "transforms"].contains(&key.as_str()) {
            return Err(schema(key.clone(), "unknown field"));
        }
    }
    let seed = top
        .get("seed")
        .ok_or_else(|| schema("seed", "required"))?
        .as_u64()
        .ok_or_else(|| schema("seed", "expected a non-negative integer"))?;
    let num_views = match top.get("num_views") {
        None => 1,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| schema("num_views", "expected a positive integer"))? as usize,
    };
    let list = match top.get("transforms") {
        None => Vec::new(),
        Some(Value::Array(a)) => a.clone(),
        Some(_) => return Err(schema("transforms", "expected an array")),
    };
    let empty = Map::new();
    let mut transforms = Vec::with_capacity(list.len());
    for (i, entry) in list.iter().enumerate() {
        let at = format!("transforms[{i}]");
        let obj = entry.as_object().ok_or_else(|| schema(&at, "expected an object"))?;
        for key in obj.keys() {
            if !["kind", "p", "params"].contains(&key.as_str()) {
                return Err(schema(format!("{at}.{key}"), "unknown field"));
            }
        }
        let kind_path = format!("{at}.kind");
        let name = obj
            .get("kind")
            .ok_or_else(|| schema(&kind_path, "required"))?
            .as_str()
            .ok_or_else(|| schema(&kind_path, "expected a string"))?;
        let p = match obj.get("p") {
            None => 1.0,
            Some(v) => v.as_f64().ok_or_else(|| schema(format!("{at}.p"), "expected a number"))?,
        };
        let map = match obj.get("params") {
            None => &empty,
            Some(Value::Object(m)) => m,
            Some(_) => return Err(schema(format!("{at}.params"), "expected an object")),
        };
        let params = Params {
            map,
            at: format!("{at}.params"),
        };
        transforms.push(TransformSpec {
            kind: parse_kind(name, &params, &kind_path)?,
            p,
        });
    }
    AugmentationPipeline::new(transforms, seed, num_views)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize) -> AudioBuffer<f32> {
        let x = (0..n).map(|t| (t as f32 * 0.07).sin() * 0.4).collect();
        AudioBuffer::mono(x, 22050).unwrap()
    }

    #[test]
    fn parses_minimal_document() {
        let p = parse_pipeline_spec(r#"{"seed":42,"num_views":4,"transforms":[{"kind":"polarity_inversion","p":0.8}]}"#)
            .unwrap();
        assert_eq!(p.seed, 42);
        assert_eq!(p.num_views, 4);
        assert_eq!(p.transforms, vec![TransformSpec::new(TransformKind::PolarityInversion, 0.8)]);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let cases = [
            (r#"{"seed":1,"transforms":[{"kind":"flanger"}]}"#, "transforms[0].kind"),
            (r#"{"seed":1,"transforms":[{"kind":"gain","params":{"gain_db_range":[3,-3]}}]}"#,
             "transforms[0].params.gain_db_range"),
            (r#"{"seed":1,"transforms":[{"kind":"gain"},{"kind":"noise","params":{"snr":1}}]}"#,
             "transforms[1].params.snr"),
            (r#"{"seed":1,"transforms":[{"kind":"gain","p":1.5}]}"#, "transforms[0].p"),
            (r#"{"seed":1,"num_views":0}"#, "num_views"),
            (r#"{"seed":1,"colour":"red"}"#, "colour"),
        ];
        for (text, want) in cases {
            match parse_pipeline_spec(text) {
                Err(Error::Schema { path, .. }) => assert_eq!(path, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(parse_pipeline_spec("{"), Err(Error::Json(_))));
    }

    #[test]
    fn json_round_trip() {
        let p = AugmentationPipeline::new(
            vec![
                TransformSpec::always(TransformKind::RandomResizedCrop { n_samples: 100 }),
                TransformSpec::new(TransformKind::high_low_pass(), 0.8),
                TransformSpec::new(TransformKind::delay(), 0.5),
                TransformSpec::new(TransformKind::pitch_shift(), 0.4),
                TransformSpec::new(TransformKind::reverb(), 0.3),
                TransformSpec::new(TransformKind::gain(), 0.2),
                TransformSpec::new(TransformKind::noise(), 0.3),
            ],
            9,
            2,
        )
        .unwrap();
        let text = p.to_json().to_string();
        assert_eq!(parse_pipeline_spec(&text).unwrap(), p);
    }

    #[test]
    fn empty_and_disabled_pipelines_copy_input() {
        let x = tone(500);
        let empty = AugmentationPipeline::new(vec![], 3, 3).unwrap();
        assert_eq!(apply_pipeline(&empty, &x).unwrap(), vec![x.clone(); 3]);
        let off = AugmentationPipeline::new(
            vec![
                TransformSpec::new(TransformKind::gain(), 0.0),
                TransformSpec::new(TransformKind::reverb(), 0.0),
            ],
            3,
            2,
        )
        .unwrap();
        assert_eq!(apply_pipeline(&off, &x).unwrap(), vec![x.clone(); 2]);
    }

    #[test]
    fn views_differ_but_replay_exactly() {
        let x = tone(4000);
        let p = AugmentationPipeline::new(
            vec![
                TransformSpec::always(TransformKind::RandomResizedCrop { n_samples: 2000 }),
                TransformSpec::always(TransformKind::gain()),
                TransformSpec::always(TransformKind::noise()),
            ],
            77,
            4,
        )
        .unwrap();
        let a = apply_pipeline(&p, &x).unwrap();
        let b = apply_pipeline_parallel(&p, &x, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert!(a.iter().all(|v| v.len() == 2000));
    }

    #[test]
    fn inserting_a_transform_keeps_earlier_draws() {
        let x = tone(3000);
        let base = vec![TransformSpec::always(TransformKind::RandomResizedCrop { n_samples: 1000 })];
        let mut longer = base.clone();
        longer.push(TransformSpec::always(TransformKind::PolarityInversion));
        let a = apply_pipeline(&AugmentationPipeline::new(base, 5, 2).unwrap(), &x).unwrap();
        let b = apply_pipeline(&AugmentationPipeline::new(longer, 5, 2).unwrap(), &x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(polarity_inversion(u), *v);
        }
    }
}
