use ndarray::Array2;
use serde_json::{json, Map, Value};

use mirkit::metrics::{
    average_precision, binary_metrics, confusion_counts, macro_multilabel, roc_auc, threshold, MacroReport,
    PredictionSet, RankingMetric,
};

use crate::error::{CliResult, Failure};
use crate::formats::ScoreCsv;
use crate::report::{emit, provenance};
use crate::EvaluateArgs;

/// Truth rows reordered to the score file's id order.
fn aligned_truth(truth: &ScoreCsv, scores: &ScoreCsv) -> CliResult<Array2<bool>> {
    if truth.classes.len() != scores.classes.len() {
        return Err(Failure::Input(format!(
            "truth has {} classes, scores have {}",
            truth.classes.len(),
            scores.classes.len()
        )));
    }
    if truth.ids.len() != scores.ids.len() {
        return Err(Failure::Input(format!(
            "truth has {} items, scores have {}",
            truth.ids.len(),
            scores.ids.len()
        )));
    }
    let index: std::collections::HashMap<&str, usize> =
        truth.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut out = Array2::from_elem(scores.values.dim(), false);
    for (r, id) in scores.ids.iter().enumerate() {
        let t = *index
            .get(id.as_str())
            .ok_or_else(|| Failure::Input(format!("id {id:?} is missing from the truth file")))?;
        for c in 0..scores.classes.len() {
            let v = truth.values[[t, c]];
            if v != 0.0 && v != 1.0 {
                return Err(Failure::Input(format!("truth for {id:?} must be 0 or 1, got {v}")));
            }
            out[[r, c]] = v == 1.0;
        }
    }
    Ok(out)
}

fn macro_json(classes: &[String], r: &MacroReport) -> Value {
    let per_class: Map<String, Value> = classes
        .iter()
        .zip(&r.per_class)
        .map(|(name, v)| (name.clone(), json!(v)))
        .collect();
    let skipped: Map<String, Value> = r
        .skipped
        .iter()
        .map(|(c, reason)| (classes[*c].clone(), json!(reason)))
        .collect();
    json!({"per_class": per_class, "skipped": skipped, "macro": r.macro_average})
}

/// Report body without provenance.
pub fn evaluate(a: &EvaluateArgs) -> CliResult<Map<String, Value>> {
    let truth_file = ScoreCsv::read(&a.truth)?;
    let scores = ScoreCsv::read(&a.scores)?;
    let truth = aligned_truth(&truth_file, &scores)?;
    let mut report = Map::new();
    report.insert("n_items".into(), json!(scores.ids.len()));
    report.insert("classes".into(), json!(scores.classes));

    if a.multilabel {
        if a.threshold.is_some() {
            return Err(Failure::Usage("--threshold applies to binary mode only".into()));
        }
        let set = PredictionSet::new(scores.ids.clone(), scores.values.clone(), truth)?;
        report.insert("mode".into(), json!("multilabel"));
        for (key, metric) in [("roc_auc", RankingMetric::RocAuc), ("average_precision", RankingMetric::AveragePrecision)] {
            let r = macro_multilabel(&set, metric)?;
            report.insert(key.into(), macro_json(&scores.classes, &r));
        }
        return Ok(report);
    }

    if scores.classes.len() != 1 {
        return Err(Failure::Usage(format!(
            "binary mode needs exactly one score column, found {}; use --multilabel",
            scores.classes.len()
        )));
    }
    let tau = a.threshold.unwrap_or(0.5);
    let s: Vec<f32> = scores.values.column(0).to_vec();
    let t: Vec<bool> = truth.column(0).to_vec();
    let counts = confusion_counts(&t, &threshold(&s, tau))?;
    let m = binary_metrics(&counts, a.beta)?;
    report.insert("mode".into(), json!("binary"));
    report.insert("threshold".into(), json!(tau));
    report.insert("confusion".into(), json!(counts));
    report.insert(
        "metrics".into(),
        json!({
            "accuracy": m.accuracy,
            "precision": m.precision,
            "recall": m.recall,
            "specificity": m.specificity,
            "f_beta": m.f_beta,
            "beta": m.beta,
            "degenerate": m.degenerate,
        }),
    );
    // AUCs are undefined when only one class is present; report null + reason
    for (key, value) in [("roc_auc", roc_auc(&t, &s)), ("average_precision", average_precision(&t, &s))] {
        match value {
            Ok(v) => {
                report.insert(key.into(), json!(v));
            }
            Err(mirkit::Error::Undefined(reason)) => {
                report.insert(key.into(), Value::Null);
                report.insert(format!("{key}_undefined"), json!(reason));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(report)
}

pub fn run(a: &EvaluateArgs, invocation: Vec<String>) -> CliResult<()> {
    let mut report = provenance(&invocation, None);
    report.extend(evaluate(a)?);
    emit(report, a.out.as_deref())
}
