//! Classification metrics.
//!
//! Threshold-free measures are computed exactly: ROC-AUC as the rank
//! statistic with half credit for ties, and average precision as the step
//! sum `sum_n (R_n - R_{n-1}) P_n` over distinct score thresholds.

use std::cmp::Ordering;

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::spectral::argmax;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn confusion_counts(truth: &[bool], predicted: &[bool]) -> Result<ConfusionCounts> {
    if truth.len() != predicted.len() {
        return Err(Error::shape(format!(
            "{} truth values vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// `score >= tau` per item.
pub fn threshold<T: Real>(scores: &[T], tau: T) -> Vec<bool> {
    scores.iter().map(|&s| s >= tau).collect()
}

/// Which ratios hit a zero denominator (and were reported as 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub specificity: bool,
    pub f_beta: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.specificity || self.f_beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f_beta: f64,
    pub beta: f64,
    pub degenerate: Degenerate,
}

impl BinaryMetrics {
    /// Same quantity as recall.
    pub fn sensitivity(&self) -> f64 {
        self.recall
    }
}

fn ratio(num: f64, den: f64, flag: &mut bool) -> f64 {
    if den == 0.0 {
        *flag = true;
        0.0
    } else {
        num / den
    }
}

pub fn binary_metrics(c: &ConfusionCounts, beta: f64) -> Result<BinaryMetrics> {
    if c.total() == 0 {
        return Err(Error::param("binary metrics of zero items"));
    }
    if !(beta > 0.0) {
        return Err(Error::param(format!("beta must be positive, got {beta}")));
    }
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let mut d = Degenerate::default();
    let accuracy = (tp + tn) / c.total() as f64;
    let precision = ratio(tp, tp + fp, &mut d.precision);
    let recall = ratio(tp, tp + fn_, &mut d.recall);
    let specificity = ratio(tn, fp + tn, &mut d.specificity);
    let b2 = beta * beta;
    let f_beta = ratio((1.0 + b2) * precision * recall, b2 * precision + recall, &mut d.f_beta);
    Ok(BinaryMetrics {
        accuracy,
        precision,
        recall,
        specificity,
        f_beta,
        beta,
        degenerate: d,
    })
}

/// Fraction of positions where `predicted` equals `truth`.
pub fn multiclass_accuracy(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::shape(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
    }
    if truth.is_empty() {
        return Err(Error::param("accuracy of zero items"));
    }
    let hits = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

fn check_scores<T: Real>(truth: &[bool], scores: &[T]) -> Result<()> {
    if truth.len() != scores.len() {
        return Err(Error::shape(format!("{} labels vs {} scores", truth.len(), scores.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::param("NaN score"));
    }
    Ok(())
}

/// Indices sorted by descending score.
fn descending<T: Real>(scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    idx
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Equals the trapezoidal area under the ROC curve.
pub fn roc_auc<T: Real>(truth: &[bool], scores: &[T]) -> Result<f64> {
    check_scores(truth, scores)?;
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("ROC-AUC needs both positive and negative items".into()));
    }
    // ascending ranks, tied groups share their mean rank
    let mut idx = descending(scores);
    idx.reverse();
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mean_rank = (i + 1 + j + 1) as f64 / 2.0;
        let group_pos = idx[i..=j].iter().filter(|&&k| truth[k]).count();
        rank_sum += mean_rank * group_pos as f64;
        i = j + 1;
    }
    let p = pos as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64))
}

/// Step-sum average precision over distinct thresholds, highest first.
pub fn average_precision<T: Real>(truth: &[bool], scores: &[T]) -> Result<f64> {
    check_scores(truth, scores)?;
    let pos = truth.iter().filter(|&&t| t).count();
    if pos == 0 {
        return Err(Error::Undefined("average precision needs at least one positive".into()));
    }
    let idx = descending(scores);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let level = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == level {
            if truth[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMetric {
    RocAuc,
    AveragePrecision,
}

impl RankingMetric {
    pub fn evaluate<T: Real>(self, truth: &[bool], scores: &[T]) -> Result<f64> {
        match self {
            RankingMetric::RocAuc => roc_auc(truth, scores),
            RankingMetric::AveragePrecision => average_precision(truth, scores),
        }
    }
}

/// Item ids with per-class scores and ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet<T> {
    item_ids: Vec<String>,
    scores: Array2<T>,
    truth: Array2<bool>,
}

impl<T: Real> PredictionSet<T> {
    pub fn new(item_ids: Vec<String>, scores: Array2<T>, truth: Array2<bool>) -> Result<Self> {
        if scores.dim() != truth.dim() {
            return Err(Error::shape(format!(
                "scores {:?} vs truth {:?}",
                scores.dim(),
                truth.dim()
            )));
        }
        if item_ids.len() != scores.nrows() {
            return Err(Error::shape(format!("{} ids for {} rows", item_ids.len(), scores.nrows())));
        }
        let mut seen = std::collections::HashSet::new();
        for id in &item_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::param(format!("duplicate item id {id:?}")));
            }
        }
        Ok(Self {
            item_ids,
            scores,
            truth,
        })
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn scores(&self) -> &Array2<T> {
        &self.scores
    }

    pub fn truth(&self) -> &Array2<bool> {
        &self.truth
    }

    pub fn n_classes(&self) -> usize {
        self.scores.ncols()
    }

    pub fn class_truth(&self, c: usize) -> Vec<bool> {
        self.truth.column(c).to_vec()
    }

    pub fn class_scores(&self, c: usize) -> Vec<T> {
        self.scores.column(c).to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroReport {
    pub metric: RankingMetric,
    /// `None` for classes that could not be evaluated.
    pub per_class: Vec<Option<f64>>,
    /// Class index and reason for every skipped class.
    pub skipped: Vec<(usize, String)>,
    pub macro_average: f64,
}

/// Unweighted mean of the per-class metric over evaluable classes.
pub fn macro_multilabel<T: Real>(set: &PredictionSet<T>, metric: RankingMetric) -> Result<MacroReport> {
    let mut per_class = Vec::with_capacity(set.n_classes());
    let mut skipped = Vec::new();
    for c in 0..set.n_classes() {
        match metric.evaluate(&set.class_truth(c), &set.class_scores(c)) {
            Ok(v) => per_class.push(Some(v)),
            Err(Error::Undefined(reason)) => {
                per_class.push(None);
                skipped.push((c, reason));
            }
            Err(e) => return Err(e),
        }
    }
    let values: Vec<f64> = per_class.iter().flatten().copied().collect();
    if values.is_empty() {
        return Err(Error::Undefined("no class could be evaluated".into()));
    }
    Ok(MacroReport {
        metric,
        per_class,
        skipped,
        macro_average: values.iter().sum::<f64>() / values.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Mean,
    Max,
    /// Most frequent per-chunk argmax; ties go to the lowest class index.
    Majority,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Aggregated<T> {
    Scores(Vec<T>),
    Class(usize),
}

/// Collapses chunk-level scores (`chunks x classes`) into one track-level
/// prediction.
pub fn aggregate_chunks<T: Real>(chunk_scores: ArrayView2<'_, T>, method: Aggregation) -> Result<Aggregated<T>> {
    let (n, classes) = chunk_scores.dim();
    if n == 0 || classes == 0 {
        return Err(Error::param("no chunks to aggregate"));
    }
    Ok(match method {
        Aggregation::Mean => {
            let inv = T::one() / T::from_usize_lossy(n);
            Aggregated::Scores(
                chunk_scores
                    .columns()
                    .into_iter()
                    .map(|c| c.iter().copied().sum::<T>() * inv)
                    .collect(),
            )
        }
        Aggregation::Max => Aggregated::Scores(
            chunk_scores
                .columns()
                .into_iter()
                .map(|c| c.iter().copied().fold(T::neg_infinity(), T::max))
                .collect(),
        ),
        Aggregation::Majority => {
            let mut votes = vec![0usize; classes];
            for row in chunk_scores.rows() {
                votes[argmax(row.iter().copied())] += 1;
            }
            Aggregated::Class(argmax(votes))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn vocal_example() -> (Vec<bool>, Vec<bool>) {
        let truth: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let pred: Vec<bool> = (0..20).map(|i| (7..10).contains(&i) || i >= 12).collect();
        (truth, pred)
    }

    #[test]
    fn vocal_example_counts_and_metrics() {
        let (t, p) = vocal_example();
        let c = confusion_counts(&t, &p).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 8, fp: 3, fn_: 2, tn: 7 });
        let m = binary_metrics(&c, 1.0).unwrap();
        assert!((m.accuracy - 0.75).abs() < 1e-4);
        assert!((m.precision - 0.7273).abs() < 1e-4);
        assert!((m.recall - 0.8).abs() < 1e-4);
        assert!((m.specificity - 0.7).abs() < 1e-4);
        assert!((m.f_beta - 0.7619).abs() < 1e-4);
        assert_eq!(m.sensitivity(), m.recall);
        assert!(!m.degenerate.any());
    }

    #[test]
    fn perfect_and_inverted() {
        let t = vec![true, true, false];
        let c = confusion_counts(&t, &t).unwrap();
        let m = binary_metrics(&c, 2.0).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.specificity, m.f_beta), (1.0, 1.0, 1.0, 1.0, 1.0));
        let all = vec![true; 5];
        assert_eq!(confusion_counts(&all, &all).unwrap(), ConfusionCounts { tp: 5, fp: 0, fn_: 0, tn: 0 });
        let inv: Vec<bool> = t.iter().map(|b| !b).collect();
        let c = confusion_counts(&t, &inv).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let c = ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 4 };
        let m = binary_metrics(&c, 1.0).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.degenerate.precision && m.degenerate.recall && m.degenerate.f_beta);
        assert!(!m.degenerate.specificity);
        assert!(binary_metrics(&ConfusionCounts::default(), 1.0).is_err());
        assert!(confusion_counts(&[true], &[]).is_err());
    }

    #[test]
    fn auc_edge_cases() {
        assert!(matches!(roc_auc(&[true, true], &[0.1, 0.2]), Err(Error::Undefined(_))));
        assert!(matches!(average_precision(&[false, false], &[0.1, 0.2]), Err(Error::Undefined(_))));
        assert_eq!(roc_auc(&[false, true], &[0.1, 0.9]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[false, true], &[0.9, 0.1]).unwrap(), 0.0);
        assert_eq!(average_precision(&[false, true], &[0.1, 0.9]).unwrap(), 1.0);
        assert!(roc_auc(&[false, true], &[f64::NAN, 0.1]).is_err());
    }

    #[test]
    fn macro_average_skips_single_class_columns() {
        let ids: Vec<String> = (0..4).map(|i| format!("t{i}")).collect();
        let scores = array![[0.9, 0.5, 0.1], [0.8, 0.5, 0.2], [0.2, 0.5, 0.3], [0.1, 0.5, 0.4]];
        let truth = array![[true, true, false], [true, false, false], [false, true, false], [false, false, false]];
        let set = PredictionSet::new(ids, scores, truth).unwrap();
        let r = macro_multilabel(&set, RankingMetric::RocAuc).unwrap();
        assert_eq!(r.per_class, vec![Some(1.0), Some(0.5), None]);
        assert_eq!(r.macro_average, 0.75);
        assert_eq!(r.skipped.len(), 1);
        assert_eq!(r.skipped[0].0, 2);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let ids = vec!["a".to_string(), "a".to_string()];
        assert!(PredictionSet::new(ids, array![[0.1], [0.2]], array![[true], [false]]).is_err());
    }

    #[test]
    fn aggregation_rules() {
        let one = array![[0.2f64, 0.8]];
        assert_eq!(aggregate_chunks(one.view(), Aggregation::Mean).unwrap(), Aggregated::Scores(vec![0.2, 0.8]));
        let logits = array![[1.0f64, 3.0], [3.0, 1.0]];
        assert_eq!(aggregate_chunks(logits.view(), Aggregation::Mean).unwrap(), Aggregated::Scores(vec![2.0, 2.0]));
        assert_eq!(aggregate_chunks(logits.view(), Aggregation::Max).unwrap(), Aggregated::Scores(vec![3.0, 3.0]));
        // tie between two votes goes to class 0
        assert_eq!(aggregate_chunks(logits.view(), Aggregation::Majority).unwrap(), Aggregated::Class(0));
        // columns: [instrumental, vocal]
        let chunks = array![[0.9f64, 0.1], [0.7, 0.3], [0.2, 0.8]];
        assert_eq!(aggregate_chunks(chunks.view(), Aggregation::Majority).unwrap(), Aggregated::Class(0));
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(aggregate_chunks(empty.view(), Aggregation::Mean).is_err());
    }
}
