use ndarray::{Array1, Array2, ArrayView2};
use proptest::prelude::*;

use mirkit::losses::{harden_rows, nt_xent, soft_cross_entropy, softmax, softmax_cross_entropy};
use mirkit::metrics::{average_precision, roc_auc};
use mirkit::rng::Rng;
use mirkit::trainer::{
    fit_supervised, noisy_student_train_with, synthetic::gaussian_blobs, train_student, FeatureAugment, LabeledSet,
    LinearModel, Predictor, PseudoLabelMode, TrainConfig, UnlabeledSet,
};

/// Binary truth with at least one of each class, paired with scores.
fn ranked_case() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<bool>(), n).prop_filter("both classes", |t| {
                t.iter().any(|&b| b) && t.iter().any(|&b| !b)
            }),
            prop::collection::vec(0.0f64..1.0, n),
        )
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn auc_is_invariant_under_monotone_maps((truth, scores) in ranked_case()) {
        let base = roc_auc(&truth, &scores).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s - 1.0).exp()).collect();
        prop_assert_eq!(roc_auc(&truth, &mapped).unwrap(), base);
        let ap = average_precision(&truth, &scores).unwrap();
        prop_assert_eq!(average_precision(&truth, &mapped).unwrap(), ap);
    }

    #[test]
    fn auc_flips_under_negation((truth, scores) in ranked_case()) {
        let base = roc_auc(&truth, &scores).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((roc_auc(&truth, &neg).unwrap() - (1.0 - base)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn auc_is_permutation_invariant((truth, scores) in ranked_case(), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..truth.len()).collect();
        Rng::new(seed).shuffle(&mut order);
        let t: Vec<bool> = order.iter().map(|&i| truth[i]).collect();
        let s: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        prop_assert_eq!(roc_auc(&t, &s).unwrap(), roc_auc(&truth, &scores).unwrap());
        prop_assert_eq!(average_precision(&t, &s).unwrap(), average_precision(&truth, &scores).unwrap());
    }

    #[test]
    fn softmax_rows_are_distributions(logits in matrix(4, 5)) {
        let p = softmax(logits.view());
        for row in p.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0));
        }
        let shifted = softmax(logits.mapv(|v| v + 100.0).view());
        prop_assert!(p.iter().zip(shifted.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn cross_entropies_agree_on_one_hot(logits in matrix(3, 4), labels in prop::collection::vec(0usize..4, 3)) {
        let mut onehot = Array2::<f64>::zeros((3, 4));
        for (r, &c) in labels.iter().enumerate() {
            onehot[[r, c]] = 1.0;
        }
        let hard = softmax_cross_entropy(logits.view(), &labels).unwrap();
        let soft = soft_cross_entropy(logits.view(), onehot.view()).unwrap();
        prop_assert!((hard.loss - soft.loss).abs() < 1e-12);
        prop_assert!(hard.grad.iter().zip(soft.grad.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn nt_xent_is_symmetric_and_bounded(zi in matrix(3, 4), zj in matrix(3, 4), tau in 0.1f64..2.0) {
        prop_assume!(zi.rows().into_iter().chain(zj.rows()).all(|r| r.dot(&r) > 1e-6));
        let a = nt_xent(zi.view(), zj.view(), tau).unwrap();
        let b = nt_xent(zj.view(), zi.view(), tau).unwrap();
        prop_assert!((a.loss - b.loss).abs() < 1e-10);
        prop_assert!(a.loss >= 0.0 && a.loss.is_finite());
        // scaling rows leaves cosine similarities unchanged
        let c = nt_xent(zi.mapv(|v| 2.5 * v).view(), zj.view(), tau).unwrap();
        prop_assert!((a.loss - c.loss).abs() < 1e-10);
    }

    #[test]
    fn forward_logits_matches_naive_loops(w in matrix(3, 4), b in prop::collection::vec(-1.0f64..1.0, 3), x in matrix(5, 4)) {
        let model = LinearModel::from_parts(w.clone(), Array1::from(b.clone())).unwrap();
        let got = model.forward_logits(x.view()).unwrap();
        for r in 0..5 {
            for c in 0..3 {
                let mut want = b[c];
                for k in 0..4 {
                    want += x[[r, k]] * w[[c, k]];
                }
                prop_assert!((got[[r, c]] - want).abs() < 1e-12);
            }
        }
    }
}

fn blobs(seed: u64, n: usize) -> LabeledSet<f64> {
    let centers = vec![vec![-2.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.5]];
    gaussian_blobs(&centers, n, 0.8, &mut Rng::new(seed)).unwrap()
}

fn cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.2,
        epochs: 20,
        batch_size: 8,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let data = blobs(1, 30);
    let a = fit_supervised(&data, &cfg(5)).unwrap();
    let b = fit_supervised(&data, &cfg(5)).unwrap();
    assert_eq!(a, b);
    let c = fit_supervised(&data, &cfg(6)).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn loss_trace_decreases_overall() {
    let fit = fit_supervised(&blobs(2, 40), &cfg(0)).unwrap();
    assert_eq!(fit.loss_trace.len(), 20);
    assert!(fit.loss_trace.last().unwrap() < &(0.5 * fit.loss_trace[0]));
}

struct Identity;

impl FeatureAugment<f64> for Identity {
    fn augment(&self, features: ArrayView2<'_, f64>, _rng: &mut Rng) -> Array2<f64> {
        features.to_owned()
    }
}

#[test]
fn zero_lambda_student_equals_supervised_fit() {
    let labeled = blobs(3, 20);
    let unlabeled = UnlabeledSet::new(blobs(4, 50).features().clone());
    let student_cfg = TrainConfig {
        lambda: 0.0,
        ..cfg(9)
    };
    let ns = noisy_student_train_with(&labeled, &unlabeled, &cfg(9), &student_cfg, &Identity).unwrap();
    let plain = fit_supervised(&labeled, &student_cfg).unwrap();
    assert_eq!(ns.student.model, plain.model);
}

/// Records every probability matrix it hands out.
struct SpyTeacher {
    inner: LinearModel<f64>,
    seen: std::cell::RefCell<Vec<Array2<f64>>>,
}

impl Predictor<f64> for SpyTeacher {
    fn predict_proba(&self, features: ArrayView2<'_, f64>) -> mirkit::Result<Array2<f64>> {
        let p = self.inner.predict_proba(features)?;
        self.seen.borrow_mut().push(p.clone());
        Ok(p)
    }
}

#[test]
fn hard_mode_trains_on_one_hot_argmax() {
    let labeled = blobs(5, 20);
    let unlabeled = UnlabeledSet::new(blobs(6, 30).features().clone());
    let teacher = fit_supervised(&labeled, &cfg(1)).unwrap().model;
    let spy = SpyTeacher {
        inner: teacher.clone(),
        seen: Default::default(),
    };
    let hard = TrainConfig {
        pseudo_label_mode: PseudoLabelMode::Hard,
        ..cfg(2)
    };
    let via_spy = train_student(&spy, &labeled, &unlabeled, &hard, &Identity).unwrap();
    let direct = train_student(&teacher, &labeled, &unlabeled, &hard, &Identity).unwrap();
    assert_eq!(via_spy, direct);
    let seen = spy.seen.take();
    assert!(!seen.is_empty());
    for p in &seen {
        let one_hot = harden_rows(p.view()).unwrap();
        for (prow, hrow) in p.rows().into_iter().zip(one_hot.rows()) {
            let best = (0..prow.len()).fold(0, |b, i| if prow[i] > prow[b] { i } else { b });
            assert_eq!(hrow[best], 1.0);
            assert_eq!(hrow.sum(), 1.0);
        }
    }
    let soft = train_student(&spy, &labeled, &unlabeled, &cfg(2), &Identity).unwrap();
    assert_ne!(soft.model, direct.model);
}
