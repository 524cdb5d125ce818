use std::fs;

use mirkit::audio_io::{encode_wav, wav_info, BitDepth};
use mirkit::augment::{apply_pipeline_parallel, parse_pipeline_spec};

use super::load_mono;
use crate::error::{usage, CliResult, Failure};
use crate::AugmentArgs;

pub fn run(a: &AugmentArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.pipeline).map_err(|e| Failure::io(&a.pipeline, e))?;
    let mut pipeline = parse_pipeline_spec(&text)?;
    if let Some(seed) = a.seed {
        pipeline.seed = seed;
    }
    if let Some(views) = a.views {
        if views == 0 {
            return usage("--views must be at least 1");
        }
        pipeline.num_views = views;
    }
    if a.threads == 0 {
        return usage("--threads must be at least 1");
    }
    let bytes = fs::read(&a.input).map_err(|e| Failure::io(&a.input, e))?;
    let depth = if wav_info(&bytes)?.bits_per_sample == 16 { BitDepth::Int16 } else { BitDepth::Float32 };
    let x = load_mono(&a.input)?;
    let views = apply_pipeline_parallel(&pipeline, &x, a.threads)?;

    let stem = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "audio".into());
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::io(&a.out_dir, e))?;
    for (k, view) in views.iter().enumerate() {
        let path = a.out_dir.join(format!("{stem}.view{k}.wav"));
        let encoded = encode_wav(view, depth)?;
        fs::write(&path, encoded).map_err(|e| Failure::io(&path, e))?;
    }
    Ok(())
}
