use std::fs;

use mirkit::spectral::{
    cqt, magnitude, melspectrogram, stft, to_decibels, CqtParams, DbOptions, DbReference, MelParams, Power,
};
use mirkit::RealMatrix32;

use super::load_mono;
use crate::error::{usage, CliResult, Failure};
use crate::formats::{render_pgm, write_matrix};
use crate::{SpecKind, SpectrogramArgs};

/// Range shown in PGM images and kept by `--db`.
pub const DB_RANGE: f64 = 80.0;

fn check_flags(a: &SpectrogramArgs) -> CliResult<()> {
    let only = |flag: &str, set: bool, kinds: &[SpecKind]| {
        if set && !kinds.contains(&a.kind) {
            usage(format!("--{flag} does not apply to --kind {:?}", a.kind).to_lowercase())
        } else {
            Ok(())
        }
    };
    only("n-fft", a.n_fft.is_some(), &[SpecKind::Stft, SpecKind::Mel])?;
    only("n-mels", a.n_mels.is_some(), &[SpecKind::Mel])?;
    only("bins-per-octave", a.bins_per_octave.is_some(), &[SpecKind::Cqt])?;
    only("n-bins", a.n_bins.is_some(), &[SpecKind::Cqt])?;
    only("fmin", a.fmin.is_some(), &[SpecKind::Mel, SpecKind::Cqt])
}

fn db_options(kind: SpecKind) -> DbOptions {
    let base = match kind {
        SpecKind::Mel => DbOptions::power(),
        SpecKind::Stft | SpecKind::Cqt => DbOptions::amplitude(),
    };
    base.with_reference(DbReference::Max).with_top_db(DB_RANGE)
}

pub fn compute(a: &SpectrogramArgs) -> CliResult<RealMatrix32> {
    check_flags(a)?;
    let x = load_mono(&a.input)?;
    let m = match a.kind {
        SpecKind::Stft => {
            let spec = stft(&x, a.n_fft.unwrap_or(512), a.hop.unwrap_or(128))?;
            magnitude(&spec, Power::Magnitude)
        }
        SpecKind::Mel => {
            let mut p = MelParams::default();
            p.n_fft = a.n_fft.unwrap_or(p.n_fft);
            p.hop_length = a.hop.unwrap_or(p.hop_length);
            p.n_mels = a.n_mels.unwrap_or(p.n_mels);
            p.f_min = a.fmin.unwrap_or(p.f_min);
            melspectrogram(&x, &p)?
        }
        SpecKind::Cqt => {
            let mut p = CqtParams::c1_seven_octaves(a.hop.unwrap_or(512));
            if let Some(b) = a.bins_per_octave {
                p.bins_per_octave = b;
                p.n_bins = 7 * b;
            }
            p.n_bins = a.n_bins.unwrap_or(p.n_bins);
            p.f_min = a.fmin.unwrap_or(p.f_min);
            cqt(&x, &p)?
        }
    };
    Ok(m)
}

pub fn run(a: &SpectrogramArgs) -> CliResult<()> {
    let linear = compute(a)?;
    let db = if a.db || a.pgm.is_some() {
        Some(to_decibels(&linear, &db_options(a.kind))?)
    } else {
        None
    };
    let out = if a.db { db.as_ref().expect("computed") } else { &linear };
    write_matrix(&a.out, &out.data)?;
    if let (Some(path), Some(db)) = (&a.pgm, &db) {
        fs::write(path, render_pgm(&db.data, DB_RANGE as f32)).map_err(|e| Failure::io(path, e))?;
    }
    Ok(())
}
