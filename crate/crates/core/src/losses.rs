//! Scalar losses with analytic gradients.
//!
//! All logarithms are natural. Matrices are row-major batches: one item per
//! row.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::spectral::argmax;
use crate::{Error, Real, Result};

/// Loss value with its gradient with respect to the input matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub loss: T,
    pub grad: Array2<T>,
}

/// Row-wise softmax, stabilized by subtracting the row maximum.
pub fn softmax<T: Real>(logits: ArrayView2<'_, T>) -> Array2<T> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Row-wise `log softmax`.
fn log_softmax<T: Real>(logits: ArrayView2<'_, T>) -> Array2<T> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Mean cross-entropy against integer targets.
pub fn softmax_cross_entropy<T: Real>(logits: ArrayView2<'_, T>, targets: &[usize]) -> Result<LossGrad<T>> {
    let (n, c) = logits.dim();
    if n == 0 {
        return Err(Error::param("cross-entropy of an empty batch"));
    }
    if targets.len() != n {
        return Err(Error::shape(format!("{n} rows vs {} targets", targets.len())));
    }
    if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
        return Err(Error::param(format!("target class {bad} out of range for {c} classes")));
    }
    let logp = log_softmax(logits);
    let inv_n = T::one() / T::from_usize_lossy(n);
    let loss = -targets.iter().enumerate().map(|(i, &t)| logp[[i, t]]).sum::<T>() * inv_n;
    let mut grad = logp.mapv(|v| v.exp());
    for (i, &t) in targets.iter().enumerate() {
        grad[[i, t]] = grad[[i, t]] - T::one();
    }
    grad.mapv_inplace(|v| v * inv_n);
    Ok(LossGrad { loss, grad })
}

/// Mean cross-entropy against target distributions (soft labels).
pub fn soft_cross_entropy<T: Real>(logits: ArrayView2<'_, T>, targets: ArrayView2<'_, T>) -> Result<LossGrad<T>> {
    if logits.dim() != targets.dim() {
        return Err(Error::shape(format!("logits {:?} vs targets {:?}", logits.dim(), targets.dim())));
    }
    let n = logits.nrows();
    if n == 0 {
        return Err(Error::param("cross-entropy of an empty batch"));
    }
    let logp = log_softmax(logits);
    let inv_n = T::one() / T::from_usize_lossy(n);
    let loss = -(&logp * &targets).sum() * inv_n;
    let grad = (logp.mapv(|v| v.exp()) - targets).mapv(|v| v * inv_n);
    Ok(LossGrad { loss, grad })
}

fn row_norms<T: Real>(z: ArrayView2<'_, T>) -> Result<Array1<T>> {
    let norms = z.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    if let Some(i) = norms.iter().position(|&v| v == T::zero() || !v.is_finite()) {
        return Err(Error::param(format!("row {i} has zero or non-finite norm")));
    }
    Ok(norms)
}

/// Pairwise cosine similarities of the rows of `z`.
pub fn cosine_similarity_matrix<T: Real>(z: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let norms = row_norms(z)?;
    let unit = &z / &norms.view().insert_axis(Axis(1));
    let mut s = unit.dot(&unit.t());
    // exact unit diagonal regardless of rounding
    for i in 0..s.nrows() {
        s[[i, i]] = T::one();
    }
    Ok(s)
}

/// NT-Xent value with gradients for both views.
#[derive(Debug, Clone, PartialEq)]
pub struct NtXent<T> {
    pub loss: T,
    pub grad_i: Array2<T>,
    pub grad_j: Array2<T>,
}

/// Normalized temperature-scaled cross-entropy over `2N` stacked views.
///
/// Row `a` of `[z_i; z_j]` has its other view as the positive and the
/// remaining `2N - 2` rows as negatives. The result is the mean over all `2N`
/// anchors of `-log(exp(s_ap / t) / sum_{k != a} exp(s_ak / t))`.
pub fn nt_xent<T: Real>(z_i: ArrayView2<'_, T>, z_j: ArrayView2<'_, T>, temperature: T) -> Result<NtXent<T>> {
    if z_i.dim() != z_j.dim() {
        return Err(Error::shape(format!("views {:?} vs {:?}", z_i.dim(), z_j.dim())));
    }
    let batch = z_i.nrows();
    if batch < 2 {
        return Err(Error::param("NT-Xent needs a batch of at least 2 to have negatives"));
    }
    if !(temperature > T::zero()) {
        return Err(Error::param("temperature must be positive"));
    }
    let z = ndarray::concatenate(Axis(0), &[z_i, z_j]).map_err(|e| Error::shape(e.to_string()))?;
    let m = 2 * batch;
    let norms = row_norms(z.view())?;
    let unit = &z / &norms.view().insert_axis(Axis(1));
    let sim = unit.dot(&unit.t());
    let positive = |a: usize| if a < batch { a + batch } else { a - batch };
    let inv_t = T::one() / temperature;
    let inv_m = T::one() / T::from_usize_lossy(m);

    // dL/dS, with S treated as 2N x 2N independent entries
    let mut g = Array2::<T>::zeros((m, m));
    let mut loss = T::zero();
    for a in 0..m {
        let p = positive(a);
        let max = (0..m)
            .filter(|&k| k != a)
            .map(|k| sim[[a, k]] * inv_t)
            .fold(T::neg_infinity(), T::max);
        let mut denom = T::zero();
        for k in (0..m).filter(|&k| k != a) {
            denom = denom + (sim[[a, k]] * inv_t - max).exp();
        }
        loss = loss - (sim[[a, p]] * inv_t - max - denom.ln());
        for k in (0..m).filter(|&k| k != a) {
            let soft = (sim[[a, k]] * inv_t - max).exp() / denom;
            let target = if k == p { T::one() } else { T::zero() };
            g[[a, k]] = (soft - target) * inv_t * inv_m;
        }
    }
    loss = loss * inv_m;

    // S = U U^T  =>  dL/dU = (G + G^T) U; then back through u / |u|
    let sym = &g + &g.t();
    let d_unit = sym.dot(&unit);
    let mut d_z = Array2::<T>::zeros((m, z.ncols()));
    for a in 0..m {
        let u = unit.row(a);
        let du = d_unit.row(a);
        let radial = u.dot(&du);
        let inv_norm = T::one() / norms[a];
        for c in 0..z.ncols() {
            d_z[[a, c]] = (du[c] - u[c] * radial) * inv_norm;
        }
    }
    let grad_i = d_z.slice(ndarray::s![..batch, ..]).to_owned();
    let grad_j = d_z.slice(ndarray::s![batch.., ..]).to_owned();
    Ok(NtXent { loss, grad_i, grad_j })
}

/// `l_sup + lambda * l_unsup`.
pub fn combine_semi_supervised<T: Real>(l_sup: T, l_unsup: T, lambda: T) -> Result<T> {
    if lambda < T::zero() || lambda.is_nan() {
        return Err(Error::param("lambda must be non-negative"));
    }
    Ok(l_sup + lambda * l_unsup)
}

fn check_distribution_rows<T: Real>(p: ArrayView2<'_, T>, name: &str) -> Result<()> {
    for (i, row) in p.rows().into_iter().enumerate() {
        if row.iter().any(|&v| v < T::zero() || v.is_nan()) {
            return Err(Error::param(format!("{name} row {i} has negative entries")));
        }
        let s = row.sum();
        if (s - T::one()).abs() > T::lit(1e-6) {
            return Err(Error::param(format!("{name} row {i} sums to {s}, not 1")));
        }
    }
    Ok(())
}

/// Mean squared difference between two prediction matrices.
pub fn consistency_distance<T: Real>(p1: ArrayView2<'_, T>, p2: ArrayView2<'_, T>) -> Result<T> {
    if p1.dim() != p2.dim() {
        return Err(Error::shape(format!("{:?} vs {:?}", p1.dim(), p2.dim())));
    }
    if p1.is_empty() {
        return Err(Error::param("empty prediction matrices"));
    }
    check_distribution_rows(p1, "p1")?;
    check_distribution_rows(p2, "p2")?;
    let diff = &p1 - &p2;
    Ok(diff.mapv(|v| v * v).sum() / T::from_usize_lossy(diff.len()))
}

/// Mean row entropy `-sum p ln p`, with `0 ln 0 = 0`.
pub fn prediction_entropy<T: Real>(p: ArrayView2<'_, T>) -> Result<T> {
    if p.nrows() == 0 {
        return Err(Error::param("entropy of an empty batch"));
    }
    check_distribution_rows(p, "p")?;
    let total: T = p
        .iter()
        .map(|&v| if v > T::zero() { -v * v.ln() } else { T::zero() })
        .sum();
    Ok(total / T::from_usize_lossy(p.nrows()))
}

/// One-hot vector at the argmax; ties resolve to the lowest index.
pub fn harden_pseudo_label<T: Real>(p: ArrayView1<'_, T>) -> Result<Array1<T>> {
    if p.is_empty() {
        return Err(Error::param("cannot harden an empty vector"));
    }
    let mut out = Array1::zeros(p.len());
    out[argmax(p.iter().copied())] = T::one();
    Ok(out)
}

/// Hardens every row of a probability matrix.
pub fn harden_rows<T: Real>(p: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let mut out = Array2::zeros(p.dim());
    for (i, row) in p.rows().into_iter().enumerate() {
        out.row_mut(i).assign(&harden_pseudo_label(row)?);
    }
    Ok(out)
}
