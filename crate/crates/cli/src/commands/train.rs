use std::fs;
use std::path::Path;

use ndarray::{s, Array2};
use serde_json::json;

use mirkit::trainer::{
    accuracy, fit_supervised, linear_evaluation, noisy_student_train, LabeledSet, LinearModel, TrainConfig,
    UnlabeledSet,
};

use crate::error::{usage, CliResult, Failure};
use crate::formats::{read_matrix, write_matrix};
use crate::report::{emit, provenance};
use crate::{TrainArgs, TrainMode};

/// One class index per line; a non-numeric first line is taken as a header.
pub fn parse_labels(text: &str) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<usize>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(format!("line {}: {line:?} is not a class index", i + 1)),
        }
    }
    Ok(out)
}

fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    parse_labels(&text).map_err(|e| Failure::parse(path, e))
}

fn read_config(path: Option<&Path>) -> CliResult<TrainConfig> {
    match path {
        None => Ok(TrainConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Failure::parse(p, e))
        }
    }
}

/// `C x (d + 1)`: weights with the bias appended as the last column.
pub fn checkpoint_matrix(model: &LinearModel<f32>) -> Array2<f32> {
    let (c, d) = model.weights().dim();
    let mut m = Array2::zeros((c, d + 1));
    m.slice_mut(s![.., ..d]).assign(model.weights());
    m.column_mut(d).assign(model.bias());
    m
}

pub fn run(a: &TrainArgs, invocation: Vec<String>) -> CliResult<()> {
    let mut cfg = read_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let features = read_matrix(&a.features)?;
    let labels = read_labels(&a.labels)?;
    let n_classes = a
        .n_classes
        .unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    let labeled = LabeledSet::new(features, labels, n_classes)?;

    let test = match (&a.test_features, &a.test_labels) {
        (Some(f), Some(l)) => Some(LabeledSet::new(read_matrix(f)?, read_labels(l)?, n_classes)?),
        (None, None) => None,
        _ => return usage("--test-features and --test-labels go together"),
    };
    if a.unlabeled.is_some() && a.mode != TrainMode::NoisyStudent {
        return usage("--unlabeled applies to noisy-student mode only");
    }

    let mut report = provenance(&invocation, Some(cfg.seed));
    report.insert("mode".into(), json!(format!("{:?}", a.mode).to_lowercase()));
    report.insert("n_classes".into(), json!(n_classes));
    report.insert("feature_dim".into(), json!(labeled.feature_dim()));
    report.insert("config".into(), json!(cfg));
    let model = match a.mode {
        TrainMode::Supervised => {
            let fit = fit_supervised(&labeled, &cfg)?;
            let mut acc = json!({"train": accuracy(&fit.model, &labeled)?});
            if let Some(t) = &test {
                acc["test"] = json!(accuracy(&fit.model, t)?);
            }
            report.insert("train_loss_trace".into(), json!(fit.loss_trace));
            report.insert("accuracies".into(), acc);
            fit.model
        }
        TrainMode::NoisyStudent => {
            let Some(path) = &a.unlabeled else {
                return usage("noisy-student mode needs --unlabeled");
            };
            let unlabeled = UnlabeledSet::new(read_matrix(path)?);
            let ns = noisy_student_train(&labeled, &unlabeled, &cfg, &cfg)?;
            let mut acc = json!({
                "teacher_train": accuracy(&ns.teacher.model, &labeled)?,
                "student_train": accuracy(&ns.student.model, &labeled)?,
            });
            if let Some(t) = &test {
                acc["teacher_test"] = json!(accuracy(&ns.teacher.model, t)?);
                acc["student_test"] = json!(accuracy(&ns.student.model, t)?);
            }
            report.insert("teacher_loss_trace".into(), json!(ns.teacher.loss_trace));
            report.insert("train_loss_trace".into(), json!(ns.student.loss_trace));
            report.insert("accuracies".into(), acc);
            ns.student.model
        }
        TrainMode::LinearEval => {
            let Some(t) = &test else {
                return usage("linear-eval mode needs --test-features and --test-labels");
            };
            let ev = linear_evaluation(&labeled, t, &cfg)?;
            report.insert("train_loss_trace".into(), json!(ev.loss_trace));
            report.insert(
                "accuracies".into(),
                json!({"train": accuracy(&ev.model, &labeled)?, "test": ev.test_accuracy}),
            );
            ev.model
        }
    };
    write_matrix(&a.out, &checkpoint_matrix(&model))?;
    let mut sidecar = a.out.clone().into_os_string();
    sidecar.push(".json");
    emit(report, Some(Path::new(&sidecar)))
}
