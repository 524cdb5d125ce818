//! Split files, train/eval length adjustment and split hygiene audits.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use ndarray::Array2;
use serde::Serialize;

use crate::audio_io::AudioBuffer;
use crate::augment::random_resized_crop;
use crate::rng::Rng;
use crate::{Error, Real, Result};

pub const GTZAN_GENRES: [&str; 10] = [
    "blues", "classical", "country", "disco", "hiphop", "jazz", "metal", "pop", "reggae", "rock",
];

pub fn gtzan_vocabulary() -> Vec<String> {
    GTZAN_GENRES.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitEntry {
    pub path: String,
    pub label: String,
    pub label_index: usize,
    pub artist: Option<String>,
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitManifest {
    vocabulary: Vec<String>,
    entries: Vec<SplitEntry>,
}

impl SplitManifest {
    /// Checks label indices against the vocabulary and path uniqueness.
    pub fn new(vocabulary: Vec<String>, entries: Vec<SplitEntry>) -> Result<Self> {
        let mut seen_labels = HashSet::new();
        for v in &vocabulary {
            if !seen_labels.insert(v.as_str()) {
                return Err(Error::param(format!("duplicate vocabulary entry {v:?}")));
            }
        }
        let mut paths = HashSet::new();
        for e in &entries {
            if vocabulary.get(e.label_index) != Some(&e.label) {
                return Err(Error::UnknownLabel(e.label.clone()));
            }
            if !paths.insert(e.path.as_str()) {
                return Err(Error::param(format!("duplicate path {:?}", e.path)));
            }
        }
        Ok(Self { vocabulary, entries })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn entries(&self) -> &[SplitEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.vocabulary.len()];
        for e in &self.entries {
            counts[e.label_index] += 1;
        }
        counts
    }

    /// One `label/filename` line per entry, newline-terminated.
    pub fn to_split_file(&self) -> String {
        self.entries.iter().map(|e| format!("{}\n", e.path)).collect()
    }

    /// `path\tlabel\tartist\tgroup` per entry; absent keys are empty fields.
    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|e| {
                format!(
                    "{}\t{}\t{}\t{}\n",
                    e.path,
                    e.label,
                    e.artist.as_deref().unwrap_or(""),
                    e.group.as_deref().unwrap_or("")
                )
            })
            .collect()
    }

    fn with_entries(&self, entries: Vec<SplitEntry>) -> Self {
        Self {
            vocabulary: self.vocabulary.clone(),
            entries,
        }
    }
}

fn resolve(vocabulary: &[String], label: &str) -> Result<usize> {
    vocabulary
        .iter()
        .position(|v| v == label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))
}

/// Parses `<label>/<filename>` lines. Blank lines are skipped; the label is
/// everything before the first `/`.
pub fn parse_split_file(text: &str, vocabulary: &[String]) -> Result<SplitManifest> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (label, file) = line.split_once('/').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected <label>/<filename>, got {line:?}"),
        })?;
        if label.is_empty() || file.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("empty label or filename in {line:?}"),
            });
        }
        entries.push(SplitEntry {
            path: line.to_string(),
            label: label.to_string(),
            label_index: resolve(vocabulary, label)?,
            artist: None,
            group: None,
        });
    }
    SplitManifest::new(vocabulary.to_vec(), entries)
}

/// Parses the four-column TSV sidecar.
pub fn parse_tsv(text: &str, vocabulary: &[String]) -> Result<SplitManifest> {
    let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 4 tab-separated fields, got {}", fields.len()),
            });
        }
        entries.push(SplitEntry {
            path: fields[0].to_string(),
            label: fields[1].to_string(),
            label_index: resolve(vocabulary, fields[1])?,
            artist: opt(fields[2]),
            group: opt(fields[3]),
        });
    }
    SplitManifest::new(vocabulary.to_vec(), entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChunkMode {
    TrainRandomCrop,
    EvalStacked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkPlan {
    pub num_samples: usize,
    pub num_chunks: usize,
    pub mode: ChunkMode,
}

impl ChunkPlan {
    pub fn train(num_samples: usize) -> Self {
        Self {
            num_samples,
            num_chunks: 1,
            mode: ChunkMode::TrainRandomCrop,
        }
    }

    pub fn eval(num_samples: usize, num_chunks: usize) -> Self {
        Self {
            num_samples,
            num_chunks,
            mode: ChunkMode::EvalStacked,
        }
    }

    /// Chunk offsets for a signal of `len` samples: `i * ((len - n) / chunks)`.
    /// Trailing samples past the last chunk are dropped.
    pub fn eval_offsets(&self, len: usize) -> Result<Vec<usize>> {
        self.check(len)?;
        let hop = (len - self.num_samples) / self.num_chunks;
        Ok((0..self.num_chunks).map(|i| i * hop).collect())
    }

    fn check(&self, len: usize) -> Result<()> {
        if self.num_samples == 0 || self.num_chunks == 0 {
            return Err(Error::param("num_samples and num_chunks must be positive"));
        }
        if len < self.num_samples {
            return Err(Error::InvalidBuffer(format!(
                "signal of {len} samples is shorter than {}",
                self.num_samples
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Adjusted<T> {
    Crop(AudioBuffer<T>),
    /// `num_chunks × num_samples`
    Chunks(Array2<T>),
}

pub fn adjust_audio_length<T: Real>(x: &AudioBuffer<T>, plan: &ChunkPlan, rng: &mut Rng) -> Result<Adjusted<T>> {
    x.require_mono("adjust_audio_length")?;
    plan.check(x.len())?;
    match plan.mode {
        ChunkMode::TrainRandomCrop => Ok(Adjusted::Crop(random_resized_crop(x, plan.num_samples, rng)?)),
        ChunkMode::EvalStacked => {
            let n = plan.num_samples;
            let offsets = plan.eval_offsets(x.len())?;
            let s = x.samples();
            let out = Array2::from_shape_fn((offsets.len(), n), |(c, t)| s[offsets[c] + t]);
            Ok(Adjusted::Chunks(out))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    ArtistId,
    GroupId,
}

impl GroupKey {
    fn of<'a>(&self, e: &'a SplitEntry) -> Option<&'a str> {
        match self {
            GroupKey::ArtistId => e.artist.as_deref(),
            GroupKey::GroupId => e.group.as_deref(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            GroupKey::ArtistId => "artist_id",
            GroupKey::GroupId => "group_id",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeakFinding {
    pub key: String,
    pub splits: Vec<String>,
}

/// Key values shared by more than one split, sorted by key value.
pub fn check_leakage(splits: &BTreeMap<String, SplitManifest>, key: GroupKey) -> Result<Vec<LeakFinding>> {
    let mut seen: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (name, m) in splits {
        for e in m.entries() {
            let k = key.of(e).ok_or_else(|| {
                Error::param(format!("{name}: entry {:?} has no {}", e.path, key.name()))
            })?;
            seen.entry(k).or_default().insert(name.as_str());
        }
    }
    Ok(seen
        .into_iter()
        .filter(|(_, s)| s.len() > 1)
        .map(|(k, s)| LeakFinding {
            key: k.to_string(),
            splits: s.into_iter().map(String::from).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairDivergence {
    pub a: String,
    pub b: String,
    pub total_variation: f64,
}

/// Total-variation distance between normalized label histograms for every
/// unordered pair of splits.
pub fn distribution_divergence(splits: &BTreeMap<String, SplitManifest>) -> Result<Vec<PairDivergence>> {
    let mut hists = Vec::new();
    let mut vocab: Option<&[String]> = None;
    for (name, m) in splits {
        if m.is_empty() {
            return Err(Error::param(format!("split {name:?} is empty")));
        }
        match vocab {
            None => vocab = Some(m.vocabulary()),
            Some(v) if v != m.vocabulary() => {
                return Err(Error::param(format!("split {name:?} uses a different vocabulary")))
            }
            _ => {}
        }
        let total = m.len() as f64;
        let h: Vec<f64> = m.label_counts().iter().map(|&c| c as f64 / total).collect();
        hists.push((name.clone(), h));
    }
    let mut out = Vec::new();
    for i in 0..hists.len() {
        for j in i + 1..hists.len() {
            let tv = 0.5 * hists[i].1.iter().zip(&hists[j].1).map(|(p, q)| (p - q).abs()).sum::<f64>();
            out.push(PairDivergence {
                a: hists[i].0.clone(),
                b: hists[j].0.clone(),
                total_variation: tv,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub leaks: Vec<LeakFinding>,
    pub divergence: BTreeMap<String, f64>,
}

pub fn audit(splits: &BTreeMap<String, SplitManifest>, key: Option<GroupKey>) -> Result<AuditReport> {
    let leaks = match key {
        Some(k) => check_leakage(splits, k)?,
        None => Vec::new(),
    };
    let divergence = distribution_divergence(splits)?
        .into_iter()
        .map(|d| (format!("{}/{}", d.a, d.b), d.total_variation))
        .collect();
    Ok(AuditReport { leaks, divergence })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Fractions {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let f = Self { train, valid, test };
        let all = [train, valid, test];
        if all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::param("split fractions must be positive"));
        }
        if (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::param("split fractions must sum to 1"));
        }
        Ok(f)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.valid, self.test]
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "valid", "test"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelImbalance {
    pub split: String,
    pub label: String,
    pub target: usize,
    pub actual: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratifiedSplit {
    pub train: SplitManifest,
    pub valid: SplitManifest,
    pub test: SplitManifest,
    /// Per-(split, label) cells that miss their target by more than one item.
    pub imbalance: Vec<LabelImbalance>,
}

impl StratifiedSplit {
    pub fn as_map(&self) -> BTreeMap<String, SplitManifest> {
        [
            ("train".to_string(), self.train.clone()),
            ("valid".to_string(), self.valid.clone()),
            ("test".to_string(), self.test.clone()),
        ]
        .into_iter()
        .collect()
    }
}

/// Integer split of `n` proportional to `fractions`, remainders going to the
/// largest fractional parts (ties to the earlier split).
fn largest_remainder(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut out = [0usize; 3];
    for i in 0..3 {
        out[i] = (raw[i] + 1e-9).floor() as usize;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| (raw[b] - out[b] as f64).total_cmp(&(raw[a] - out[a] as f64)).then(a.cmp(&b)));
    let mut left = n - out.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// Splits into train/valid/test with per-label targets from the fractions.
///
/// Items sharing `group_key` move together. Groups are placed largest first
/// (seeded shuffle breaks size ties), each into the split whose remaining
/// per-label need it fills best. Without a key every item is its own group.
pub fn stratified_split(
    manifest: &SplitManifest,
    fractions: Fractions,
    group_key: Option<GroupKey>,
    seed: u64,
) -> Result<StratifiedSplit> {
    let n_labels = manifest.vocabulary().len();
    let fr = fractions.as_array();
    let counts = manifest.label_counts();
    let mut targets = vec![[0usize; 3]; n_labels];
    for (c, &n) in counts.iter().enumerate() {
        targets[c] = largest_remainder(n, &fr);
    }
    let split_totals = largest_remainder(manifest.len(), &fr);

    let mut groups: Vec<Vec<usize>> = match group_key {
        None => (0..manifest.len()).map(|i| vec![i]).collect(),
        Some(key) => {
            let mut index: HashMap<&str, usize> = HashMap::new();
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for (i, e) in manifest.entries().iter().enumerate() {
                let k = key
                    .of(e)
                    .ok_or_else(|| Error::param(format!("entry {:?} has no {}", e.path, key.name())))?;
                let g = *index.entry(k).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].push(i);
            }
            groups
        }
    };
    let biggest_split = *split_totals.iter().max().unwrap_or(&0);
    if let Some(g) = groups.iter().find(|g| g.len() > biggest_split) {
        let e = &manifest.entries()[g[0]];
        return Err(Error::param(format!(
            "group containing {:?} has {} items, more than any target split ({biggest_split})",
            e.path,
            g.len()
        )));
    }
    let mut rng = Rng::new(seed);
    rng.shuffle(&mut groups);
    groups.sort_by(|a, b| b.len().cmp(&a.len()));

    let mut filled = vec![[0usize; 3]; n_labels];
    let mut totals = [0usize; 3];
    let mut assignment = vec![0usize; manifest.len()];
    for g in &groups {
        let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
        for &i in g {
            *hist.entry(manifest.entries()[i].label_index).or_default() += 1;
        }
        // fit: items of the group that land in unmet label targets, minus
        // overflow; ties go to the split with more free capacity, then order
        let score = |s: usize| {
            let mut fit = 0i64;
            for (&c, &k) in &hist {
                let need = targets[c][s].saturating_sub(filled[c][s]);
                fit += k.min(need) as i64 - k.saturating_sub(need) as i64;
            }
            let free = split_totals[s] as i64 - totals[s] as i64;
            (fit, free)
        };
        let best = (0..3)
            .max_by(|&a, &b| score(a).cmp(&score(b)).then(b.cmp(&a)))
            .expect("three splits");
        for (&c, &k) in &hist {
            filled[c][best] += k;
        }
        totals[best] += g.len();
        for &i in g {
            assignment[i] = best;
        }
    }

    let mut parts: [Vec<SplitEntry>; 3] = Default::default();
    for (i, e) in manifest.entries().iter().enumerate() {
        parts[assignment[i]].push(e.clone());
    }
    let mut imbalance = Vec::new();
    for c in 0..n_labels {
        for s in 0..3 {
            if filled[c][s].abs_diff(targets[c][s]) > 1 {
                imbalance.push(LabelImbalance {
                    split: SPLIT_NAMES[s].to_string(),
                    label: manifest.vocabulary()[c].clone(),
                    target: targets[c][s],
                    actual: filled[c][s],
                });
            }
        }
    }
    if !imbalance.is_empty() {
        log::warn!("stratified split misses {} label targets by more than one item", imbalance.len());
    }
    let [train, valid, test] = parts;
    Ok(StratifiedSplit {
        train: manifest.with_entries(train),
        valid: manifest.with_entries(valid),
        test: manifest.with_entries(test),
        imbalance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(vocab: &[String], label: &str, name: &str, artist: Option<&str>) -> SplitEntry {
        SplitEntry {
            path: format!("{label}/{name}"),
            label: label.to_string(),
            label_index: resolve(vocab, label).unwrap(),
            artist: artist.map(String::from),
            group: None,
        }
    }

    #[test]
    fn gtzan_indices() {
        let v = gtzan_vocabulary();
        let m = parse_split_file("blues/blues.00000.wav\n\n  rock/x.wav \n", &v).unwrap();
        assert_eq!(m.entries()[0].label_index, 0);
        assert_eq!(m.entries()[1].label_index, 9);
        assert_eq!(m.entries()[1].path, "rock/x.wav");
        match parse_split_file("unknowngenre/x.wav", &v) {
            Err(Error::UnknownLabel(l)) => assert_eq!(l, "unknowngenre"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_split_file("blues\n", &v), Err(Error::Parse { line: 1, .. })));
        assert!(parse_split_file("rock/a.wav\nrock/a.wav\n", &v).is_err());
    }

    #[test]
    fn text_formats_round_trip() {
        let v = gtzan_vocabulary();
        let m = parse_split_file("jazz/a.wav\npop/b.wav\n", &v).unwrap();
        assert_eq!(parse_split_file(&m.to_split_file(), &v).unwrap(), m);
        let mut entries = m.entries().to_vec();
        entries[0].artist = Some("A".into());
        entries[1].group = Some("g1".into());
        let m = SplitManifest::new(v.clone(), entries).unwrap();
        assert_eq!(parse_tsv(&m.to_tsv(), &v).unwrap(), m);
    }

    #[test]
    fn eval_chunking() {
        let x = AudioBuffer::<f32>::mono((0..100).map(|v| v as f32).collect(), 16000).unwrap();
        let plan = ChunkPlan::eval(40, 3);
        assert_eq!(plan.eval_offsets(100).unwrap(), vec![0, 20, 40]);
        let Adjusted::Chunks(m) = adjust_audio_length(&x, &plan, &mut Rng::new(0)).unwrap() else {
            panic!()
        };
        assert_eq!(m.dim(), (3, 40));
        assert_eq!(m[[2, 0]], 40.0);
        assert_eq!(ChunkPlan::eval(59049, 1).eval_offsets(639450).unwrap(), vec![0]);
        assert!(ChunkPlan::eval(200, 1).eval_offsets(100).is_err());
    }

    #[test]
    fn train_crop_of_full_length_is_identity() {
        let x = AudioBuffer::<f32>::mono(vec![0.5; 64], 16000).unwrap();
        let got = adjust_audio_length(&x, &ChunkPlan::train(64), &mut Rng::new(1)).unwrap();
        assert_eq!(got, Adjusted::Crop(x));
    }

    #[test]
    fn leakage_findings() {
        let v = gtzan_vocabulary();
        let train = SplitManifest::new(
            v.clone(),
            vec![entry(&v, "rock", "a", Some("A")), entry(&v, "pop", "b", Some("B"))],
        )
        .unwrap();
        let test = SplitManifest::new(v.clone(), vec![entry(&v, "rock", "c", Some("A"))]).unwrap();
        let splits: BTreeMap<_, _> = [("train".to_string(), train), ("test".to_string(), test)].into();
        let found = check_leakage(&splits, GroupKey::ArtistId).unwrap();
        assert_eq!(
            found,
            vec![LeakFinding {
                key: "A".into(),
                splits: vec!["test".into(), "train".into()]
            }]
        );
        assert!(check_leakage(&splits, GroupKey::GroupId).is_err());
    }

    #[test]
    fn total_variation_points() {
        let v: Vec<String> = vec!["a".into(), "b".into()];
        let mk = |na: usize, nb: usize| {
            let mut e = Vec::new();
            for i in 0..na {
                e.push(entry(&v, "a", &i.to_string(), None));
            }
            for i in 0..nb {
                e.push(entry(&v, "b", &i.to_string(), None));
            }
            SplitManifest::new(v.clone(), e).unwrap()
        };
        let tv = |x: SplitManifest, y: SplitManifest| {
            let m: BTreeMap<_, _> = [("test".to_string(), y), ("train".to_string(), x)].into();
            distribution_divergence(&m).unwrap()[0].total_variation
        };
        assert!((tv(mk(5, 5), mk(6, 4)) - 0.1).abs() < 1e-12);
        assert_eq!(tv(mk(3, 3), mk(3, 3)), 0.0);
        assert_eq!(tv(mk(3, 0), mk(0, 2)), 1.0);
        let m: BTreeMap<_, _> = [("x".to_string(), mk(0, 0))].into();
        assert!(distribution_divergence(&m).is_err());
    }

    #[test]
    fn largest_remainder_sums() {
        assert_eq!(largest_remainder(10, &[0.7, 0.2, 0.1]), [7, 2, 1]);
        assert_eq!(largest_remainder(7, &[0.7, 0.2, 0.1]), [5, 1, 1]);
        assert_eq!(largest_remainder(3, &[1.0 / 3.0; 3]), [1, 1, 1]);
    }

    #[test]
    fn exact_targets_without_groups() {
        let v = gtzan_vocabulary();
        let mut e = Vec::new();
        for label in &v {
            for i in 0..10 {
                e.push(entry(&v, label, &format!("{i}.wav"), None));
            }
        }
        let m = SplitManifest::new(v.clone(), e).unwrap();
        let s = stratified_split(&m, Fractions::new(0.7, 0.2, 0.1).unwrap(), None, 3).unwrap();
        assert_eq!(s.train.label_counts(), vec![7; 10]);
        assert_eq!(s.valid.label_counts(), vec![2; 10]);
        assert_eq!(s.test.label_counts(), vec![1; 10]);
        assert!(s.imbalance.is_empty());
    }

    #[test]
    fn oversized_group_is_rejected() {
        let v: Vec<String> = vec!["a".into()];
        let e = (0..10).map(|i| entry(&v, "a", &i.to_string(), Some("same"))).collect();
        let m = SplitManifest::new(v, e).unwrap();
        let f = Fractions::new(0.7, 0.2, 0.1).unwrap();
        assert!(stratified_split(&m, f, Some(GroupKey::ArtistId), 0).is_err());
        assert!(Fractions::new(0.5, 0.2, 0.2).is_err());
    }
}
