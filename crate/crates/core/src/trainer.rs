//! Softmax linear classifier, noisy student self-training and linear
//! evaluation of frozen features.
//!
//! Training is plain minibatch gradient descent from a zero initialization.
//! Every random choice (shuffling, unlabeled batch order, feature noise) comes
//! from its own stream derived from the config seed, so runs are exactly
//! repeatable and the labeled batch sequence of a student matches that of a
//! purely supervised run with the same config.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::losses::{harden_rows, soft_cross_entropy, softmax, softmax_cross_entropy};
use crate::metrics;
use crate::rng::Rng;
use crate::{Error, Real, Result};

const LABELED_STREAM: u64 = 1;
const UNLABELED_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

/// `logits = W x + b` with `W: classes x features`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    weights: Array2<T>,
    bias: Array1<T>,
}

impl<T: Real> LinearModel<T> {
    pub fn zeros(feature_dim: usize, n_classes: usize) -> Self {
        Self {
            weights: Array2::zeros((n_classes, feature_dim)),
            bias: Array1::zeros(n_classes),
        }
    }

    pub fn from_parts(weights: Array2<T>, bias: Array1<T>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::shape(format!(
                "{} weight rows vs {} biases",
                weights.nrows(),
                bias.len()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param("model parameters must be finite"));
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &Array2<T> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<T> {
        &self.bias
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn forward_logits(&self, features: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if features.ncols() != self.feature_dim() {
            return Err(Error::shape(format!(
                "features have {} columns, model expects {}",
                features.ncols(),
                self.feature_dim()
            )));
        }
        Ok(features.dot(&self.weights.t()) + &self.bias.view().insert_axis(Axis(0)))
    }

    pub fn predict(&self, features: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        let logits = self.forward_logits(features)?;
        Ok(logits
            .rows()
            .into_iter()
            .map(|r| crate::spectral::argmax(r.iter().copied()))
            .collect())
    }

    fn step(&mut self, grad_w: &Array2<T>, grad_b: &Array1<T>, lr: T) {
        self.weights.scaled_add(-lr, grad_w);
        self.bias.scaled_add(-lr, grad_b);
    }
}

pub fn forward_logits<T: Real>(model: &LinearModel<T>, features: ArrayView2<'_, T>) -> Result<Array2<T>> {
    model.forward_logits(features)
}

/// Anything that maps features to class probabilities.
pub trait Predictor<T> {
    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<Array2<T>>;
}

impl<T: Real> Predictor<T> for LinearModel<T> {
    fn predict_proba(&self, features: ArrayView2<'_, T>) -> Result<Array2<T>> {
        Ok(softmax(self.forward_logits(features)?.view()))
    }
}

/// Input noising applied to unlabeled features before the student sees them.
pub trait FeatureAugment<T> {
    fn augment(&self, features: ArrayView2<'_, T>, rng: &mut Rng) -> Array2<T>;
}

/// Adds i.i.d. `N(0, std^2)` noise to every feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianJitter {
    pub std: f64,
}

impl<T: Real> FeatureAugment<T> for GaussianJitter {
    fn augment(&self, features: ArrayView2<'_, T>, rng: &mut Rng) -> Array2<T> {
        if self.std == 0.0 {
            return features.to_owned();
        }
        features.mapv(|v| v + T::lit(self.std * rng.gaussian()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PseudoLabelMode {
    /// Full teacher probability vector.
    #[default]
    Soft,
    /// One-hot at the teacher's argmax.
    Hard,
}

fn default_lambda() -> f64 {
    1.0
}

fn default_iterations() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Weight of the pseudo-label loss.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub pseudo_label_mode: PseudoLabelMode,
    /// Standard deviation of the Gaussian jitter on unlabeled features.
    #[serde(default)]
    pub feature_noise_std: f64,
    /// Unlabeled rows per student step; defaults to `batch_size`.
    #[serde(default)]
    pub unlabeled_batch_size: Option<usize>,
    /// Teacher to student rounds; each student teaches the next round.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 32,
            seed: 0,
            lambda: 1.0,
            pseudo_label_mode: PseudoLabelMode::Soft,
            feature_noise_std: 0.0,
            unlabeled_batch_size: None,
            iterations: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.unlabeled_batch_size == Some(0) {
            return Err(Error::param("batch sizes must be positive"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::param("lambda must be non-negative"));
        }
        if !(self.feature_noise_std >= 0.0) {
            return Err(Error::param("feature_noise_std must be non-negative"));
        }
        if self.iterations == 0 {
            return Err(Error::param("iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet<T> {
    features: Array2<T>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl<T: Real> LabeledSet<T> {
    pub fn new(features: Array2<T>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows vs {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::param(format!("label {bad} out of range for {n_classes} classes")));
        }
        Ok(Self {
            features,
            labels,
            n_classes,
        })
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledSet<T> {
    pub features: Array2<T>,
}

impl<T: Real> UnlabeledSet<T> {
    pub fn new(features: Array2<T>) -> Self {
        Self { features }
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }
}

/// Trained model and the mean training loss of every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub model: LinearModel<T>,
    pub loss_trace: Vec<T>,
}

/// Gradients of a mean loss with respect to `W` and `b` given `dL/dlogits`.
fn param_grads<T: Real>(d_logits: &Array2<T>, features: ArrayView2<'_, T>) -> (Array2<T>, Array1<T>) {
    (d_logits.t().dot(&features), d_logits.sum_axis(Axis(0)))
}

/// Mean cross-entropy of `model` on a labeled set and its parameter
/// gradients `(dW, db)`.
pub fn supervised_objective<T: Real>(
    model: &LinearModel<T>,
    features: ArrayView2<'_, T>,
    labels: &[usize],
) -> Result<(T, Array2<T>, Array1<T>)> {
    let logits = model.forward_logits(features)?;
    let lg = softmax_cross_entropy(logits.view(), labels)?;
    let (gw, gb) = param_grads(&lg.grad, features);
    Ok((lg.loss, gw, gb))
}

fn gather_rows<T: Real>(m: &Array2<T>, idx: &[usize]) -> Array2<T> {
    m.select(Axis(0), idx)
}

/// Epoch plan over `n` rows: a fresh permutation per epoch, cut into batches.
fn epoch_batches(rng: &mut Rng, n: usize, batch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.chunks(batch).map(|c| c.to_vec()).collect()
}

pub fn fit_supervised<T: Real>(data: &LabeledSet<T>, cfg: &TrainConfig) -> Result<FitResult<T>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::param("cannot fit on an empty labeled set"));
    }
    let mut model = LinearModel::zeros(data.feature_dim(), data.n_classes());
    let lr = T::lit(cfg.learning_rate);
    let mut rng = Rng::derive(cfg.seed, &[LABELED_STREAM]);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut total = T::zero();
        for batch in epoch_batches(&mut rng, data.len(), cfg.batch_size) {
            let x = gather_rows(&data.features, &batch);
            let y: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
            let (loss, gw, gb) = supervised_objective(&model, x.view(), &y)?;
            total = total + loss * T::from_usize_lossy(batch.len());
            model.step(&gw, &gb, lr);
        }
        trace.push(total / T::from_usize_lossy(data.len()));
    }
    Ok(FitResult {
        model,
        loss_trace: trace,
    })
}

/// Training targets the teacher produces for unlabeled rows.
pub fn pseudo_labels<T: Real, P: Predictor<T> + ?Sized>(
    teacher: &P,
    features: ArrayView2<'_, T>,
    mode: PseudoLabelMode,
) -> Result<Array2<T>> {
    let probs = teacher.predict_proba(features)?;
    match mode {
        PseudoLabelMode::Soft => Ok(probs),
        PseudoLabelMode::Hard => harden_rows(probs.view()),
    }
}

/// Trains a student from a frozen teacher.
///
/// Each step takes the next labeled minibatch (same sequence as
/// [`fit_supervised`] with this config) and the next unlabeled minibatch,
/// asks the teacher for pseudo-labels on the clean unlabeled rows, noises
/// those rows with `augment`, and descends on
/// `CE(S(x), y) + lambda * CE(S(noised z), pseudo)`.
pub fn train_student<T: Real, P: Predictor<T> + ?Sized>(
    teacher: &P,
    labeled: &LabeledSet<T>,
    unlabeled: &UnlabeledSet<T>,
    cfg: &TrainConfig,
    augment: &dyn FeatureAugment<T>,
) -> Result<FitResult<T>> {
    cfg.validate()?;
    if labeled.is_empty() || unlabeled.is_empty() {
        return Err(Error::param("student training needs labeled and unlabeled rows"));
    }
    if unlabeled.features.ncols() != labeled.feature_dim() {
        return Err(Error::shape(format!(
            "unlabeled features have {} columns, labeled have {}",
            unlabeled.features.ncols(),
            labeled.feature_dim()
        )));
    }
    let mut model = LinearModel::zeros(labeled.feature_dim(), labeled.n_classes());
    let lr = T::lit(cfg.learning_rate);
    let lambda = T::lit(cfg.lambda);
    let ub = cfg.unlabeled_batch_size.unwrap_or(cfg.batch_size);
    let mut lab_rng = Rng::derive(cfg.seed, &[LABELED_STREAM]);
    let mut unl_rng = Rng::derive(cfg.seed, &[UNLABELED_STREAM]);
    let mut noise_rng = Rng::derive(cfg.seed, &[NOISE_STREAM]);

    let mut unl_order: Vec<usize> = Vec::new();
    let mut next_unlabeled = |rng: &mut Rng| -> Vec<usize> {
        let mut out = Vec::with_capacity(ub);
        while out.len() < ub {
            if unl_order.is_empty() {
                unl_order = (0..unlabeled.len()).collect();
                rng.shuffle(&mut unl_order);
                unl_order.reverse();
            }
            out.push(unl_order.pop().expect("refilled above"));
        }
        out
    };

    let mut trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut total = T::zero();
        for batch in epoch_batches(&mut lab_rng, labeled.len(), cfg.batch_size) {
            let x = gather_rows(&labeled.features, &batch);
            let y: Vec<usize> = batch.iter().map(|&i| labeled.labels[i]).collect();
            let (l1, mut gw, mut gb) = supervised_objective(&model, x.view(), &y)?;

            let z = gather_rows(&unlabeled.features, &next_unlabeled(&mut unl_rng));
            let targets = pseudo_labels(teacher, z.view(), cfg.pseudo_label_mode)?;
            let z_noised = augment.augment(z.view(), &mut noise_rng);
            let logits = model.forward_logits(z_noised.view())?;
            let l2 = soft_cross_entropy(logits.view(), targets.view())?;
            let (gw2, gb2) = param_grads(&l2.grad, z_noised.view());
            gw.scaled_add(lambda, &gw2);
            gb.scaled_add(lambda, &gb2);

            total = total + (l1 + lambda * l2.loss) * T::from_usize_lossy(batch.len());
            model.step(&gw, &gb, lr);
        }
        trace.push(total / T::from_usize_lossy(labeled.len()));
    }
    Ok(FitResult {
        model,
        loss_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyStudent<T> {
    pub teacher: FitResult<T>,
    pub student: FitResult<T>,
}

/// Teacher on labeled data, then `student_cfg.iterations` rounds of student
/// training with Gaussian feature jitter of `student_cfg.feature_noise_std`.
pub fn noisy_student_train<T: Real>(
    labeled: &LabeledSet<T>,
    unlabeled: &UnlabeledSet<T>,
    teacher_cfg: &TrainConfig,
    student_cfg: &TrainConfig,
) -> Result<NoisyStudent<T>> {
    let jitter = GaussianJitter {
        std: student_cfg.feature_noise_std,
    };
    noisy_student_train_with(labeled, unlabeled, teacher_cfg, student_cfg, &jitter)
}

/// As [`noisy_student_train`] with a caller-supplied noising function.
pub fn noisy_student_train_with<T: Real>(
    labeled: &LabeledSet<T>,
    unlabeled: &UnlabeledSet<T>,
    teacher_cfg: &TrainConfig,
    student_cfg: &TrainConfig,
    augment: &dyn FeatureAugment<T>,
) -> Result<NoisyStudent<T>> {
    student_cfg.validate()?;
    let teacher = fit_supervised(labeled, teacher_cfg)?;
    let mut current = teacher.model.clone();
    let mut student = None;
    for _ in 0..student_cfg.iterations {
        let s = train_student(&current, labeled, unlabeled, student_cfg, augment)?;
        current = s.model.clone();
        student = Some(s);
    }
    Ok(NoisyStudent {
        teacher,
        student: student.expect("at least one iteration"),
    })
}

/// Fraction of rows whose argmax prediction matches the label.
pub fn accuracy<T: Real>(model: &LinearModel<T>, data: &LabeledSet<T>) -> Result<f64> {
    let predicted = model.predict(data.features.view())?;
    metrics::multiclass_accuracy(&data.labels, &predicted)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearEvaluation<T> {
    pub model: LinearModel<T>,
    pub loss_trace: Vec<T>,
    pub test_accuracy: f64,
}

/// Fits a linear classifier on frozen training features and scores it on
/// the test features.
pub fn linear_evaluation<T: Real>(
    train: &LabeledSet<T>,
    test: &LabeledSet<T>,
    cfg: &TrainConfig,
) -> Result<LinearEvaluation<T>> {
    if train.feature_dim() != test.feature_dim() || train.n_classes() != test.n_classes() {
        return Err(Error::shape("train and test sets disagree on feature or class count"));
    }
    let fit = fit_supervised(train, cfg)?;
    let test_accuracy = accuracy(&fit.model, test)?;
    Ok(LinearEvaluation {
        model: fit.model,
        loss_trace: fit.loss_trace,
        test_accuracy,
    })
}

pub mod synthetic {
    //! Seeded Gaussian blob fixtures.

    use ndarray::Array2;

    use super::LabeledSet;
    use crate::rng::Rng;
    use crate::{Real, Result};

    /// `n_per_class` points around each center with isotropic `std`, rows
    /// interleaved by class.
    pub fn gaussian_blobs<T: Real>(
        centers: &[Vec<f64>],
        n_per_class: usize,
        std: f64,
        rng: &mut Rng,
    ) -> Result<LabeledSet<T>> {
        let dim = centers.first().map_or(0, |c| c.len());
        let n = centers.len() * n_per_class;
        let mut features = Array2::<T>::zeros((n, dim));
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % centers.len();
            for d in 0..dim {
                features[[i, d]] = T::lit(centers[class][d] + std * rng.gaussian());
            }
            labels.push(class);
        }
        LabeledSet::new(features, labels, centers.len())
    }
}
