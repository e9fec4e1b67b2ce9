//! Downstream evaluation: one-vs-rest linear max-margin classification,
//! k-means clustering and normalized mutual information.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::{self, STREAM_CLASSIFIER, STREAM_KMEANS};
use crate::sparse::SparseFeatureMatrix;

/// Row access shared by dense and sparse feature matrices.
pub trait FeatureRows: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// `x_i . w`
    fn dot_row(&self, i: usize, w: &[f64]) -> f64;
    /// `w += alpha * x_i`
    fn add_row(&self, i: usize, alpha: f64, w: &mut [f64]);
    fn row_sq_norm(&self, i: usize) -> f64;
}

impl FeatureRows for ArrayView2<'_, f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }

    fn n_cols(&self) -> usize {
        self.ncols()
    }

    fn dot_row(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).iter().zip(w).map(|(a, b)| a * b).sum()
    }

    fn add_row(&self, i: usize, alpha: f64, w: &mut [f64]) {
        for (wj, x) in w.iter_mut().zip(self.row(i)) {
            *wj += alpha * x;
        }
    }

    fn row_sq_norm(&self, i: usize) -> f64 {
        self.row(i).iter().map(|v| v * v).sum()
    }
}

impl FeatureRows for Array2<f64> {
    fn n_rows(&self) -> usize {
        self.nrows()
    }

    fn n_cols(&self) -> usize {
        self.ncols()
    }

    fn dot_row(&self, i: usize, w: &[f64]) -> f64 {
        self.view().dot_row(i, w)
    }

    fn add_row(&self, i: usize, alpha: f64, w: &mut [f64]) {
        self.view().add_row(i, alpha, w)
    }

    fn row_sq_norm(&self, i: usize) -> f64 {
        self.view().row_sq_norm(i)
    }
}

impl FeatureRows for SparseFeatureMatrix {
    fn n_rows(&self) -> usize {
        SparseFeatureMatrix::n_rows(self)
    }

    fn n_cols(&self) -> usize {
        SparseFeatureMatrix::n_cols(self)
    }

    fn dot_row(&self, i: usize, w: &[f64]) -> f64 {
        let (c, v) = self.row(i);
        c.iter().zip(v).map(|(&j, x)| w[j] * x).sum()
    }

    fn add_row(&self, i: usize, alpha: f64, w: &mut [f64]) {
        let (c, v) = self.row(i);
        for (&j, x) in c.iter().zip(v) {
            w[j] += alpha * x;
        }
    }

    fn row_sq_norm(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub epochs: usize,
    /// L2 regularization strength.
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            epochs: 50,
            lambda: 1e-4,
            seed: 0,
        }
    }
}

/// One-vs-rest linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    /// `C x F`, one hyperplane per class.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    /// Label value of each row of `weights`, ascending.
    pub classes: Vec<usize>,
}

impl ClassifierModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Label with the highest score; ties go to the smallest class index.
    pub fn predict_row<M: FeatureRows + ?Sized>(&self, x: &M, i: usize) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..self.classes.len() {
            let w = self.weights.row(c);
            let s = match w.as_slice() {
                Some(w) => x.dot_row(i, w),
                None => x.dot_row(i, &w.to_vec()),
            } + self.bias[c];
            if s > best_score {
                best_score = s;
                best = c;
            }
        }
        self.classes[best]
    }
}

/// Train on every row. See [`train_linear_classifier_on_rows`].
pub fn train_linear_classifier<M: FeatureRows + ?Sized>(
    features: &M,
    labels: &[usize],
    params: &TrainParams,
) -> Result<ClassifierModel> {
    let rows: Vec<usize> = (0..features.n_rows()).collect();
    train_linear_classifier_on_rows(features, labels, &rows, params)
}

/// Hinge-loss one-vs-rest training by stochastic subgradient descent.
///
/// Each class solves `min lambda/2 |w|^2 + mean(max(0, 1 - y (w.x + b)))`
/// with step `1 / (lambda * t)` over `epochs` shuffled passes of `rows`.
/// The bias is treated as an extra constant feature of value 1. Visiting
/// order comes from `params.seed`, so reordering `rows` changes the model.
pub fn train_linear_classifier_on_rows<M: FeatureRows + ?Sized>(
    features: &M,
    labels: &[usize],
    rows: &[usize],
    params: &TrainParams,
) -> Result<ClassifierModel> {
    if labels.len() != features.n_rows() {
        return Err(Error::data(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.n_rows()
        )));
    }
    if !(params.lambda > 0.0 && params.lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be positive, got {}", params.lambda)));
    }
    if params.epochs == 0 {
        return Err(Error::config("epochs must be positive"));
    }
    let mut classes: Vec<usize> = rows.iter().map(|&i| labels[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::data(format!(
            "training needs at least two classes, found {}",
            classes.len()
        )));
    }
    let n_feat = features.n_cols();
    let n_cls = classes.len();
    let class_of: BTreeMap<usize, usize> =
        classes.iter().enumerate().map(|(c, &l)| (l, c)).collect();

    // w_c = scale_c * v_c keeps the shrink step O(1) for sparse rows
    let mut v = vec![vec![0.0; n_feat]; n_cls];
    let mut bias = vec![0.0; n_cls];
    let mut scale = vec![1.0; n_cls];
    let mut order = rows.to_vec();
    let mut rng = seed::derived_rng(params.seed, STREAM_CLASSIFIER, 0);
    let mut t = 0usize;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let shrink = 1.0 - eta * params.lambda;
            let target = class_of[&labels[i]];
            for c in 0..n_cls {
                let y = if c == target { 1.0 } else { -1.0 };
                let margin = y * (scale[c] * features.dot_row(i, &v[c]) + bias[c]);
                if shrink <= 0.0 {
                    v[c].iter_mut().for_each(|x| *x = 0.0);
                    scale[c] = 1.0;
                    bias[c] = 0.0;
                } else {
                    scale[c] *= shrink;
                    bias[c] *= shrink;
                }
                if margin < 1.0 {
                    features.add_row(i, eta * y / scale[c], &mut v[c]);
                    bias[c] += eta * y;
                }
                if scale[c] < 1e-9 {
                    let s = scale[c];
                    v[c].iter_mut().for_each(|x| *x *= s);
                    scale[c] = 1.0;
                }
            }
        }
    }

    let mut weights = Array2::<f64>::zeros((n_cls, n_feat));
    for c in 0..n_cls {
        for (w, x) in weights.row_mut(c).iter_mut().zip(&v[c]) {
            *w = scale[c] * x;
        }
    }
    if weights.iter().chain(&bias).any(|x| !x.is_finite()) {
        return Err(Error::degenerate("classifier weights diverged"));
    }
    Ok(ClassifierModel {
        weights,
        bias: Array1::from(bias),
        classes,
    })
}

/// Fraction of all rows predicted correctly.
pub fn accuracy<M: FeatureRows + ?Sized>(
    model: &ClassifierModel,
    features: &M,
    labels: &[usize],
) -> Result<f64> {
    let rows: Vec<usize> = (0..features.n_rows()).collect();
    accuracy_on_rows(model, features, labels, &rows)
}

/// Fraction of `rows` predicted correctly; an empty row set is an error.
pub fn accuracy_on_rows<M: FeatureRows + ?Sized>(
    model: &ClassifierModel,
    features: &M,
    labels: &[usize],
    rows: &[usize],
) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::data("accuracy of an empty row set is undefined"));
    }
    if labels.len() != features.n_rows() {
        return Err(Error::data("label count does not match feature rows"));
    }
    if features.n_cols() != model.weights.ncols() {
        return Err(Error::data(format!(
            "model expects {} features, matrix has {}",
            model.weights.ncols(),
            features.n_cols()
        )));
    }
    let hits = rows
        .iter()
        .filter(|&&i| model.predict_row(features, i) == labels[i])
        .count();
    Ok(hits as f64 / rows.len() as f64)
}

/// Result of [`kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// `k x F`
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(0.0)
    }
}

struct Centroids {
    c: Array2<f64>,
    sq_norms: Vec<f64>,
}

impl Centroids {
    fn new(c: Array2<f64>) -> Self {
        let sq_norms = c.rows().into_iter().map(|r| r.dot(&r)).collect();
        Self { c, sq_norms }
    }

    fn sq_dist<M: FeatureRows + ?Sized>(&self, x: &M, i: usize, xnorm: f64, k: usize) -> f64 {
        let row = self.c.row(k);
        let dot = x.dot_row(i, row.as_slice().expect("centroids are contiguous"));
        (xnorm - 2.0 * dot + self.sq_norms[k]).max(0.0)
    }

    fn nearest<M: FeatureRows + ?Sized>(&self, x: &M, i: usize, xnorm: f64) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for k in 0..self.c.nrows() {
            let d = self.sq_dist(x, i, xnorm, k);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }
}

fn row_as_dense<M: FeatureRows + ?Sized>(x: &M, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; x.n_cols()];
    x.add_row(i, 1.0, &mut v);
    v
}

/// Lloyd's k-means with k-means++ seeding.
///
/// Stops when assignments stop changing or after `max_iter` rounds. A cluster
/// that empties is re-seeded at the point farthest from its current centroid.
pub fn kmeans<M: FeatureRows + ?Sized>(
    features: &M,
    k: usize,
    max_iter: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    kmeans_restarts(features, k, max_iter, 1, seed)
}

/// Best of `n_init` independently seeded [`kmeans`] runs by final objective;
/// ties keep the earliest run.
pub fn kmeans_restarts<M: FeatureRows + ?Sized>(
    features: &M,
    k: usize,
    max_iter: usize,
    n_init: usize,
    seed: u64,
) -> Result<ClusterAssignment> {
    let n = features.n_rows();
    if k == 0 || k > n {
        return Err(Error::config(format!("k={k} must lie in [1, N={n}]")));
    }
    if max_iter == 0 || n_init == 0 {
        return Err(Error::config("max_iter and n_init must be positive"));
    }
    let norms: Vec<f64> = (0..n).map(|i| features.row_sq_norm(i)).collect();
    let mut best: Option<ClusterAssignment> = None;
    for run in 0..n_init {
        let c = lloyd(features, &norms, k, max_iter, seed, run as u64);
        if best.as_ref().is_none_or(|b| c.objective() < b.objective()) {
            best = Some(c);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn lloyd<M: FeatureRows + ?Sized>(
    features: &M,
    norms: &[f64],
    k: usize,
    max_iter: usize,
    seed: u64,
    run: u64,
) -> ClusterAssignment {
    let n = features.n_rows();
    let f = features.n_cols();
    let mut rng = seed::derived_rng(seed, STREAM_KMEANS, run);

    // k-means++ seeding
    let mut init = Array2::<f64>::zeros((k, f));
    let first = rng.random_range(0..n);
    init.row_mut(0).assign(&Array1::from(row_as_dense(features, first)));
    let mut d2: Vec<f64> = vec![f64::INFINITY; n];
    for c in 1..k {
        let prev = Centroids::new(init.slice(ndarray::s![c - 1..c, ..]).to_owned());
        for i in 0..n {
            d2[i] = d2[i].min(prev.sq_dist(features, i, norms[i], 0));
        }
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        init.row_mut(c).assign(&Array1::from(row_as_dense(features, pick)));
    }

    let mut cents = Centroids::new(init);
    let mut labels = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let mut changed = false;
        let mut objective = 0.0;
        for i in 0..n {
            let (c, d) = cents.nearest(features, i, norms[i]);
            objective += d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        history.push(objective);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; f]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            features.add_row(i, 1.0, &mut sums[labels[i]]);
        }
        let mut next = Array2::<f64>::zeros((k, f));
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in next.row_mut(c).iter_mut().zip(&sums[c]) {
                    *dst = s * inv;
                }
            }
        }
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let farthest = (0..n)
                .map(|i| (cents.sq_dist(features, i, norms[i], labels[i]), i))
                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
                .map(|(_, i)| i)
                .expect("n >= 1");
            next.row_mut(c)
                .assign(&Array1::from(row_as_dense(features, farthest)));
        }
        cents = Centroids::new(next);
    }
    ClusterAssignment {
        labels,
        centroids: cents.c,
        objective_history: history,
    }
}

/// Normalized mutual information `I(a; b) / sqrt(H(a) H(b))`, natural logs.
///
/// Identical partitions (up to relabeling) give exactly 1. If either
/// partition has zero entropy the result is 1 when both do and 0 otherwise.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::data(format!(
            "partitions have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::data("NMI of empty partitions is undefined"));
    }
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ca: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    if joint.len() == ca.len() && joint.len() == cb.len() {
        // contingency table is a permutation matrix
        return Ok(1.0);
    }
    let entropy = |counts: &BTreeMap<usize, usize>| -> f64 {
        let mut terms: Vec<f64> = counts
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .collect();
        terms.sort_by(f64::total_cmp);
        terms.iter().sum()
    };
    let ha = entropy(&ca);
    let hb = entropy(&cb);
    if ha <= 0.0 || hb <= 0.0 {
        return Ok(if ha <= 0.0 && hb <= 0.0 { 1.0 } else { 0.0 });
    }
    // summing sorted terms makes the result exactly symmetric in (a, b)
    let mut terms: Vec<f64> = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / n;
            let px = ca[&x] as f64 / n;
            let py = cb[&y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((mi / (ha * hb).sqrt()).clamp(0.0, 1.0))
}
