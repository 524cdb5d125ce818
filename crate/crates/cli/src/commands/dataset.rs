use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use mirkit::dataset::{
    audit, gtzan_vocabulary, parse_split_file, parse_tsv, stratified_split, Fractions, GroupKey, SplitEntry,
    SplitManifest, SPLIT_NAMES,
};

use crate::error::{usage, CliResult, Failure};
use crate::report::{emit, provenance};
use crate::{CheckSplitArgs, KeyArg, MakeSplitArgs};

fn group_key(k: KeyArg) -> GroupKey {
    match k {
        KeyArg::Artist => GroupKey::ArtistId,
        KeyArg::Group => GroupKey::GroupId,
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn vocabulary(path: Option<&Path>) -> CliResult<Vec<String>> {
    match path {
        None => Ok(gtzan_vocabulary()),
        Some(p) => Ok(read_text(p)?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect()),
    }
}

fn is_tsv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("tsv"))
}

fn load_manifest(path: &Path, vocab: &[String]) -> CliResult<SplitManifest> {
    let text = read_text(path)?;
    let parsed = if is_tsv(path) {
        parse_tsv(&text, vocab)
    } else {
        parse_split_file(&text, vocab)
    };
    parsed.map_err(|e| match e {
        mirkit::Error::InvalidParameter(m) => Failure::parse(path, m),
        other => Failure::parse(path, other),
    })
}

fn split_arg(arg: &str) -> CliResult<(String, PathBuf)> {
    match arg.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        Some(_) => usage(format!("malformed --splits entry {arg:?}")),
        None => {
            let path = PathBuf::from(arg);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| Failure::Usage(format!("cannot name split {arg:?}")))?;
            Ok((name, path))
        }
    }
}

/// Copies artist and group keys from the sidecar onto matching paths.
fn attach_keys(m: &SplitManifest, keys: &HashMap<String, SplitEntry>) -> CliResult<SplitManifest> {
    let entries = m
        .entries()
        .iter()
        .map(|e| {
            let mut e = e.clone();
            if let Some(k) = keys.get(&e.path) {
                e.artist = k.artist.clone();
                e.group = k.group.clone();
            }
            e
        })
        .collect();
    Ok(SplitManifest::new(m.vocabulary().to_vec(), entries)?)
}

pub fn check_split(a: &CheckSplitArgs, invocation: Vec<String>) -> CliResult<()> {
    if a.key.is_some() && a.sidecar.is_none() {
        return usage("--key needs --sidecar to supply artist or group ids");
    }
    let vocab = vocabulary(a.vocab.as_deref())?;
    let keys: HashMap<String, SplitEntry> = match &a.sidecar {
        Some(p) => load_manifest(p, &vocab)?
            .entries()
            .iter()
            .map(|e| (e.path.clone(), e.clone()))
            .collect(),
        None => HashMap::new(),
    };
    let mut splits = BTreeMap::new();
    for arg in &a.splits {
        let (name, path) = split_arg(arg)?;
        let m = attach_keys(&load_manifest(&path, &vocab)?, &keys)?;
        if splits.insert(name.clone(), m).is_some() {
            return usage(format!("split {name:?} given twice"));
        }
    }
    let result = audit(&splits, a.key.map(group_key))?;
    let mut report = provenance(&invocation, None);
    report.insert("key".into(), json!(a.key.map(|k| group_key(k))));
    report.insert(
        "sizes".into(),
        json!(splits.iter().map(|(k, v)| (k.clone(), v.len())).collect::<BTreeMap<_, _>>()),
    );
    report.insert("leaks".into(), json!(result.leaks));
    report.insert("divergence".into(), json!(result.divergence));
    emit(report, a.out.as_deref())
}

fn parse_fractions(text: &str) -> CliResult<Fractions> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("--fractions {text:?} is not three numbers")))?;
    if parts.len() != 3 {
        return usage(format!("--fractions needs train,valid,test, got {text:?}"));
    }
    Fractions::new(parts[0], parts[1], parts[2]).map_err(|e| Failure::Usage(e.to_string()))
}

pub fn make_split(a: &MakeSplitArgs, invocation: Vec<String>) -> CliResult<()> {
    let fractions = parse_fractions(&a.fractions)?;
    let vocab = vocabulary(a.vocab.as_deref())?;
    let manifest = load_manifest(&a.manifest, &vocab)?;
    let split = stratified_split(&manifest, fractions, a.group_key.map(group_key), a.seed)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| Failure::io(&a.out_dir, e))?;
    let parts = [&split.train, &split.valid, &split.test];
    for (name, part) in SPLIT_NAMES.iter().zip(parts) {
        for (ext, text) in [("txt", part.to_split_file()), ("tsv", part.to_tsv())] {
            let path = a.out_dir.join(format!("{name}.{ext}"));
            fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
        }
    }
    let mut report = provenance(&invocation, Some(a.seed));
    report.insert(
        "sizes".into(),
        json!(SPLIT_NAMES
            .iter()
            .zip(parts)
            .map(|(n, p)| (n.to_string(), p.len()))
            .collect::<BTreeMap<_, _>>()),
    );
    report.insert("imbalance".into(), json!(split.imbalance));
    let path = a.out_dir.join("report.json");
    emit(report, Some(&path))
}
