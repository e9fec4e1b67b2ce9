//! Sparse landmark-distance features.
//!
//! Every method runs `T` independent iterations. Iteration `t` samples `l_p`
//! landmark rows, measures an `N x l_p` distance block, and encodes each row
//! by its `l_k` nearest landmarks:
//!
//! ```text
//! F[i, t*l_p + j] = max(mean_i - D[i, j], reg_p * mean_i)
//! ```
//!
//! where `mean_i` is the average of row `i` of the block. The methods differ
//! only in how the block is measured:
//!
//! * `rulls` / `rulls-robust`: column `j` holds distances inside landmark
//!   `j`'s local PCA subspace (fitted on its `k_eps` nearest rows).
//! * `variant1`: one random orthogonal projection to `d` dimensions per
//!   iteration.
//! * `variant2`: `d` randomly subsampled columns per iteration.
//! * `randlocal`: as `variant2` with `l_k = 1`, skipping the landmark that is
//!   the row itself.
//!
//! Cost per iteration of `rulls` is `O(l_p * (k_eps * m * min(k_eps, m) + N * m * d_j))`:
//! one thin SVD per landmark plus projecting every row onto each local basis.
//! Storage is `O(N * l_p)` for the block and `O(N * l_k * T)` for the output.
//!
//! Iterations and landmarks draw from seeds derived from the master seed, so
//! the first `T` iterations of a longer run are identical to a `T`-iteration
//! run, and results do not depend on [`Execution`] mode.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seed::{self, STREAM_LANDMARKS, STREAM_PROJECTION, STREAM_SUBSAMPLE};
use crate::sparse::{SparseBuilder, SparseFeatureMatrix};
use crate::subspace::{self, Subspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rulls,
    RullsRobust,
    Variant1,
    Variant2,
    RandLocal,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Rulls,
        Method::RullsRobust,
        Method::Variant1,
        Method::Variant2,
        Method::RandLocal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rulls => "rulls",
            Method::RullsRobust => "rulls-robust",
            Method::Variant1 => "variant1",
            Method::Variant2 => "variant2",
            Method::RandLocal => "randlocal",
        }
    }

    fn uses_subspaces(self) -> bool {
        matches!(self, Method::Rulls | Method::RullsRobust)
    }

    fn uses_projection_dim(self) -> bool {
        matches!(self, Method::Variant1 | Method::Variant2 | Method::RandLocal)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "rulls" => Ok(Method::Rulls),
            "rulls-robust" => Ok(Method::RullsRobust),
            "variant1" => Ok(Method::Variant1),
            "variant2" => Ok(Method::Variant2),
            "randlocal" => Ok(Method::RandLocal),
            other => Err(Error::config(format!("unknown method '{other}'"))),
        }
    }
}

/// All hyperparameters of a feature run.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub method: Method,
    /// Number of iterations `T`.
    pub iterations: usize,
    /// Landmarks per iteration `l_p`.
    pub landmarks: usize,
    /// Encoded nearest landmarks per row `l_k`; forced to 1 for `randlocal`.
    pub nearest: usize,
    /// Neighborhood size used to fit each local subspace.
    pub k_eps: usize,
    pub reg_p: f64,
    pub variance_threshold: f64,
    /// Z-score with neighborhood statistics before local PCA.
    pub normalize: bool,
    /// Target dimension of the random projection / column subsample.
    pub projection_dim: usize,
    /// Fraction of each neighborhood trimmed by `rulls-robust`.
    pub trim_fraction: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl FeatureConfig {
    /// Defaults for an `n_rows x n_cols` dataset: `T = 100`, `k_eps = 30`,
    /// `l_k = 10`, `reg_p = 1e-4`, 95% variance, neighborhood normalization
    /// on, `d = floor(0.2 m)`, and `l_p` from [`default_landmark_count`].
    pub fn new(method: Method, n_rows: usize, n_cols: usize) -> Self {
        Self {
            method,
            iterations: 100,
            landmarks: default_landmark_count(n_rows).unwrap_or(1),
            nearest: if method == Method::RandLocal { 1 } else { 10 },
            k_eps: 30.min(n_rows),
            reg_p: 1e-4,
            variance_threshold: 0.95,
            normalize: true,
            projection_dim: default_projection_dim(n_cols),
            trim_fraction: 0.25,
            seed: 0,
            execution: Execution::default(),
        }
    }

    /// `l_k` actually used by the method.
    pub fn effective_nearest(&self) -> usize {
        if self.method == Method::RandLocal {
            1
        } else {
            self.nearest
        }
    }

    /// Number of output columns, `l_p * T`.
    pub fn n_features(&self) -> usize {
        self.landmarks * self.iterations
    }

    pub fn validate(&self, n_rows: usize, n_cols: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.iterations == 0 {
            return fail("iterations must be positive".into());
        }
        if self.landmarks == 0 || self.landmarks >= n_rows {
            return fail(format!(
                "landmarks l_p={} must lie in [1, N) with N={n_rows}",
                self.landmarks
            ));
        }
        if self.method == Method::RandLocal {
            if self.landmarks < 2 {
                return fail("randlocal needs at least two landmarks".into());
            }
        } else if self.nearest == 0 || self.nearest >= self.landmarks {
            return fail(format!(
                "nearest l_k={} must satisfy 1 <= l_k < l_p={}",
                self.nearest, self.landmarks
            ));
        }
        if !(self.reg_p > 0.0 && self.reg_p.is_finite()) {
            return fail(format!("reg_p must be positive, got {}", self.reg_p));
        }
        if self.method.uses_subspaces() {
            if self.k_eps < 2 || self.k_eps > n_rows {
                return fail(format!(
                    "k_eps={} must lie in [2, N] with N={n_rows}",
                    self.k_eps
                ));
            }
            if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
                return fail(format!(
                    "variance threshold must lie in (0, 1], got {}",
                    self.variance_threshold
                ));
            }
        }
        if self.method == Method::RullsRobust {
            if !(0.0..0.5).contains(&self.trim_fraction) {
                return fail(format!(
                    "trim fraction must lie in [0, 0.5), got {}",
                    self.trim_fraction
                ));
            }
            let kept = ((1.0 - self.trim_fraction) * self.k_eps as f64).ceil() as usize;
            if kept < 2 {
                return fail("trimming leaves fewer than two neighborhood points".into());
            }
        }
        if self.method.uses_projection_dim()
            && (self.projection_dim == 0 || self.projection_dim > n_cols)
        {
            return fail(format!(
                "projection dimension d={} must lie in [1, m] with m={n_cols}",
                self.projection_dim
            ));
        }
        Ok(())
    }
}

/// `floor(0.2 m)`, at least 1.
pub fn default_projection_dim(n_cols: usize) -> usize {
    (n_cols / 5).max(1)
}

/// `min(floor(N / 2), 1024)`.
pub fn default_landmark_count(n_rows: usize) -> Result<usize> {
    if n_rows < 4 {
        return Err(Error::config(format!(
            "default landmark count needs N >= 4, got {n_rows}"
        )));
    }
    Ok((n_rows / 2).min(1024))
}

/// Row indices chosen as landmarks in one iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSet {
    indices: Vec<usize>,
}

impl LandmarkSet {
    /// Landmark rows in column order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `l_p` distinct rows drawn uniformly without replacement, sorted ascending.
pub fn pick_landmarks(n_rows: usize, l_p: usize, seed: u64) -> Result<LandmarkSet> {
    if l_p == 0 || l_p >= n_rows {
        return Err(Error::config(format!(
            "cannot pick {l_p} landmarks from {n_rows} rows (need 1 <= l_p < N)"
        )));
    }
    let mut indices = index::sample(&mut seed::rng_from(seed), n_rows, l_p).into_vec();
    indices.sort_unstable();
    Ok(LandmarkSet { indices })
}

/// `max(mean_dist - dist, reg_p * mean_dist)`.
pub fn encode_row(mean_dist: f64, dist: f64, reg_p: f64) -> Result<f64> {
    if !(mean_dist > 0.0 && mean_dist.is_finite()) {
        return Err(Error::degenerate(format!(
            "mean landmark distance is {mean_dist}; every landmark coincides with the point"
        )));
    }
    Ok((mean_dist - dist).max(reg_p * mean_dist))
}

/// `N x l_p` distances of every row to each landmark of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBlock {
    pub distances: Array2<f64>,
}

/// Stored entry count.
pub fn sparsity(f: &SparseFeatureMatrix) -> usize {
    f.nnz()
}

/// `sparsity / (N * l_p * T)`; 0 for an empty shape.
pub fn sparsity_ratio(f: &SparseFeatureMatrix, l_p: usize, iterations: usize) -> f64 {
    let cells = f.n_rows() * l_p * iterations;
    if cells == 0 {
        0.0
    } else {
        f.nnz() as f64 / cells as f64
    }
}

/// Landmarks used in iteration `t`.
pub fn iteration_landmarks(n_rows: usize, cfg: &FeatureConfig, t: usize) -> Result<LandmarkSet> {
    pick_landmarks(
        n_rows,
        cfg.landmarks,
        seed::derive_seed(cfg.seed, STREAM_LANDMARKS, t as u64),
    )
}

/// Fit the local subspace of one landmark.
pub fn landmark_subspace(
    values: ArrayView2<'_, f64>,
    landmark: usize,
    cfg: &FeatureConfig,
) -> Result<Subspace> {
    let nb = subspace::knn_neighborhood(values, landmark, cfg.k_eps)?;
    match cfg.method {
        Method::RullsRobust => subspace::fit_robust_pca(
            values,
            &nb,
            cfg.variance_threshold,
            cfg.normalize,
            cfg.trim_fraction,
        ),
        _ => subspace::fit_pca(values, &nb, cfg.variance_threshold, cfg.normalize),
    }
}

/// Distance block of iteration `t` for the configured method.
pub fn distance_block(
    values: ArrayView2<'_, f64>,
    cfg: &FeatureConfig,
    landmarks: &LandmarkSet,
    t: usize,
) -> Result<DistanceBlock> {
    let n = values.nrows();
    let l_p = landmarks.len();
    let columns: Vec<Vec<f64>> = match cfg.method {
        Method::Rulls | Method::RullsRobust => {
            cfg.execution.try_map(l_p, |j| {
                let lm = landmarks.indices[j];
                let sub = landmark_subspace(values, lm, cfg)?;
                Ok::<_, Error>(subspace_distances(values, &sub, lm))
            })?
        }
        Method::Variant1 => {
            let p = subspace::orthogonal_projection_matrix(
                values.ncols(),
                cfg.projection_dim,
                seed::derive_seed(cfg.seed, STREAM_PROJECTION, t as u64),
            )?;
            let projected = values.dot(&p);
            flat_distances(projected.view(), landmarks, cfg.execution)
        }
        Method::Variant2 | Method::RandLocal => {
            let (sub, _) = subspace::subsample_features(
                values,
                cfg.projection_dim,
                seed::derive_seed(cfg.seed, STREAM_SUBSAMPLE, t as u64),
            )?;
            flat_distances(sub.view(), landmarks, cfg.execution)
        }
    };
    let mut distances = Array2::<f64>::zeros((n, l_p));
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            distances[[i, j]] = v;
        }
    }
    Ok(DistanceBlock { distances })
}

/// Distances from every row to `landmark`, measured inside `sub`.
fn subspace_distances(values: ArrayView2<'_, f64>, sub: &Subspace, landmark: usize) -> Vec<f64> {
    // the center cancels in differences; only the (scaled) basis matters
    let basis = sub.effective_basis();
    let coords = values.dot(&basis.t());
    let anchor = coords.row(landmark).to_owned();
    coords
        .axis_iter(Axis(0))
        .map(|r| {
            r.iter()
                .zip(anchor.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn flat_distances(
    values: ArrayView2<'_, f64>,
    landmarks: &LandmarkSet,
    exec: Execution,
) -> Vec<Vec<f64>> {
    exec.map(landmarks.len(), |j| {
        let anchor = values.row(landmarks.indices[j]);
        values
            .axis_iter(Axis(0))
            .map(|r| {
                r.iter()
                    .zip(anchor.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    })
}

/// Encode one distance block into per-row `(local column, value)` lists,
/// sorted by column.
///
/// `exclude_self` skips a landmark whose row index equals the encoded row.
pub fn encode_block(
    block: &DistanceBlock,
    landmarks: &LandmarkSet,
    nearest: usize,
    reg_p: f64,
    exclude_self: bool,
    exec: Execution,
) -> Result<Vec<Vec<(usize, f64)>>> {
    let d = &block.distances;
    let l_p = d.ncols();
    exec.try_map(d.nrows(), |i| {
        let row = d.row(i);
        let mean = row.sum() / l_p as f64;
        let mut order: Vec<usize> = (0..l_p)
            .filter(|&j| !(exclude_self && landmarks.indices[j] == i))
            .collect();
        let by_dist = |a: &usize, b: &usize| row[*a].total_cmp(&row[*b]).then(a.cmp(b));
        let k = nearest.min(order.len());
        if k < order.len() {
            order.select_nth_unstable_by(k, by_dist);
            order.truncate(k);
        }
        order.sort_unstable();
        order
            .into_iter()
            .map(|j| Ok((j, encode_row(mean, row[j], reg_p)?)))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::degenerate(format!("row {i}: {e}")))
    })
}

/// Features of iteration `t`, as per-row lists with local (`0..l_p`) columns.
pub fn iteration_features(
    values: ArrayView2<'_, f64>,
    cfg: &FeatureConfig,
    t: usize,
) -> Result<Vec<Vec<(usize, f64)>>> {
    let landmarks = iteration_landmarks(values.nrows(), cfg, t)?;
    let block = distance_block(values, cfg, &landmarks, t)?;
    encode_block(
        &block,
        &landmarks,
        cfg.effective_nearest(),
        cfg.reg_p,
        cfg.method == Method::RandLocal,
        cfg.execution,
    )
}

/// Run the configured method over all iterations and concatenate.
pub fn featurize(values: ArrayView2<'_, f64>, cfg: &FeatureConfig) -> Result<SparseFeatureMatrix> {
    let (n, m) = values.dim();
    cfg.validate(n, m)?;
    let l_p = cfg.landmarks;
    let per_iter: Vec<Vec<Vec<(usize, f64)>>> = (0..cfg.iterations)
        .map(|t| iteration_features(values, cfg, t))
        .collect::<Result<_>>()?;
    let mut b = SparseBuilder::new(cfg.n_features());
    for i in 0..n {
        b.push_row(
            per_iter
                .iter()
                .enumerate()
                .flat_map(|(t, rows)| rows[i].iter().map(move |&(j, v)| (t * l_p + j, v))),
        )?;
    }
    Ok(b.finish())
}

fn with_method(cfg: &FeatureConfig, allowed: &[Method]) -> Result<()> {
    if allowed.contains(&cfg.method) {
        Ok(())
    } else {
        Err(Error::config(format!(
            "method {} not accepted here (expected one of {:?})",
            cfg.method, allowed
        )))
    }
}

/// Local-subspace features (`rulls` or `rulls-robust`).
pub fn rulls_features(values: ArrayView2<'_, f64>, cfg: &FeatureConfig) -> Result<SparseFeatureMatrix> {
    with_method(cfg, &[Method::Rulls, Method::RullsRobust])?;
    featurize(values, cfg)
}

/// Random-projection features.
pub fn variant1_features(
    values: ArrayView2<'_, f64>,
    cfg: &FeatureConfig,
) -> Result<SparseFeatureMatrix> {
    with_method(cfg, &[Method::Variant1])?;
    featurize(values, cfg)
}

/// Column-subsampling features with multi-landmark encoding.
pub fn variant2_features(
    values: ArrayView2<'_, f64>,
    cfg: &FeatureConfig,
) -> Result<SparseFeatureMatrix> {
    with_method(cfg, &[Method::Variant2])?;
    featurize(values, cfg)
}

/// Single nearest landmark in a column subsample, excluding the row itself.
pub fn randlocal_features(
    values: ArrayView2<'_, f64>,
    cfg: &FeatureConfig,
) -> Result<SparseFeatureMatrix> {
    with_method(cfg, &[Method::RandLocal])?;
    featurize(values, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0))
    }

    fn small_cfg(method: Method, n: usize, m: usize) -> FeatureConfig {
        FeatureConfig {
            iterations: 2,
            landmarks: 12,
            nearest: 3,
            k_eps: 10,
            projection_dim: m.min(3),
            ..FeatureConfig::new(method, n, m)
        }
    }

    #[test]
    fn landmark_defaults() {
        assert_eq!(default_landmark_count(1340).unwrap(), 670);
        assert_eq!(default_landmark_count(10_992).unwrap(), 1024);
        assert_eq!(default_landmark_count(4).unwrap(), 2);
        assert_eq!(default_landmark_count(5).unwrap(), 2);
        assert!(default_landmark_count(3).is_err());
        assert_eq!(default_projection_dim(16), 3);
        assert_eq!(default_projection_dim(3), 1);
    }

    #[test]
    fn landmark_sampling() {
        let s = pick_landmarks(10, 9, 1).unwrap();
        assert_eq!(s.len(), 9);
        assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(pick_landmarks(10, 9, 1).unwrap(), s);
        assert!(pick_landmarks(10, 10, 1).is_err());
        assert!(pick_landmarks(10, 0, 1).is_err());
    }

    #[test]
    fn encoding_formula() {
        assert_eq!(encode_row(2.0, 0.5, 1e-4).unwrap(), 1.5);
        assert_abs_diff_eq!(encode_row(2.0, 2.0, 1e-4).unwrap(), 2e-4, epsilon = 1e-18);
        assert_eq!(encode_row(2.0, 0.0, 1e-4).unwrap(), 2.0);
        assert!(matches!(encode_row(0.0, 0.0, 1e-4), Err(Error::Degenerate(_))));
    }

    #[test]
    fn sparsity_boundaries() {
        let empty = SparseFeatureMatrix::empty(4, 6);
        assert_eq!(sparsity_ratio(&empty, 3, 2), 0.0);
        let full = SparseFeatureMatrix::from_rows(
            2,
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 3.0)]],
        )
        .unwrap();
        assert_eq!(sparsity(&full), 4);
        assert_eq!(sparsity_ratio(&full, 2, 1), 1.0);
        assert_eq!(sparsity_ratio(&SparseFeatureMatrix::empty(0, 0), 0, 0), 0.0);
    }

    #[test]
    fn sparsity_law_closed_form() {
        let x = random_matrix(100, 4, 3);
        let cfg = FeatureConfig {
            iterations: 1,
            landmarks: 50,
            nearest: 5,
            k_eps: 10,
            ..FeatureConfig::new(Method::Rulls, 100, 4)
        };
        let f = rulls_features(x.view(), &cfg).unwrap();
        assert_eq!(sparsity(&f), 500);
        assert_eq!(sparsity_ratio(&f, 50, 1), 0.1);
    }

    #[test]
    fn every_method_obeys_layout_and_positivity() {
        let x = random_matrix(40, 5, 9);
        for method in Method::ALL {
            let cfg = small_cfg(method, 40, 5);
            let f = featurize(x.view(), &cfg).unwrap();
            let lk = cfg.effective_nearest();
            assert_eq!(f.n_cols(), 24);
            assert_eq!(f.nnz(), 40 * lk * 2, "{method}");
            for i in 0..40 {
                let (cols, vals) = f.row(i);
                assert!(vals.iter().all(|&v| v > 0.0));
                for t in 0..2 {
                    let in_block = cols.iter().filter(|&&c| c / 12 == t).count();
                    assert_eq!(in_block, lk);
                }
            }
        }
    }

    #[test]
    fn prefix_consistency_across_iteration_counts() {
        let x = random_matrix(30, 4, 2);
        let one = FeatureConfig {
            iterations: 1,
            ..small_cfg(Method::Rulls, 30, 4)
        };
        let two = FeatureConfig {
            iterations: 2,
            ..one.clone()
        };
        let a = featurize(x.view(), &one).unwrap();
        let b = featurize(x.view(), &two).unwrap();
        assert_eq!(b.n_cols(), 24);
        for i in 0..30 {
            let (ca, va) = a.row(i);
            let (cb, vb) = b.row(i);
            assert_eq!(ca, &cb[..ca.len()]);
            assert_eq!(va, &vb[..va.len()]);
        }
    }

    #[test]
    fn execution_mode_does_not_change_output() {
        let x = random_matrix(35, 5, 4);
        for method in Method::ALL {
            let seq = FeatureConfig {
                execution: Execution::Sequential,
                ..small_cfg(method, 35, 5)
            };
            let par = FeatureConfig {
                execution: Execution::Parallel,
                ..seq.clone()
            };
            assert_eq!(featurize(x.view(), &seq).unwrap(), featurize(x.view(), &par).unwrap());
        }
    }

    #[test]
    fn rulls_landmark_distance_is_zero() {
        let x = random_matrix(30, 4, 6);
        let cfg = small_cfg(Method::Rulls, 30, 4);
        let lm = iteration_landmarks(30, &cfg, 0).unwrap();
        let block = distance_block(x.view(), &cfg, &lm, 0).unwrap();
        for (j, &row) in lm.indices().iter().enumerate() {
            assert!(block.distances[[row, j]].abs() < 1e-9);
        }
        // the landmark's own column carries the row maximum, the mean
        let f = featurize(x.view(), &cfg).unwrap();
        let row = lm.indices()[0];
        let mean = block.distances.row(row).sum() / 12.0;
        assert_abs_diff_eq!(f.get(row, 0), mean, epsilon = 1e-12);
    }

    #[test]
    fn variant2_full_subsample_is_raw_distance() {
        let x = random_matrix(20, 4, 7);
        let cfg = FeatureConfig {
            projection_dim: 4,
            ..small_cfg(Method::Variant2, 20, 4)
        };
        let lm = iteration_landmarks(20, &cfg, 0).unwrap();
        let block = distance_block(x.view(), &cfg, &lm, 0).unwrap();
        for i in 0..20 {
            for (j, &l) in lm.indices().iter().enumerate() {
                let raw = (&x.row(i) - &x.row(l)).mapv(|v| v * v).sum().sqrt();
                assert_eq!(block.distances[[i, j]], raw);
            }
        }
    }

    #[test]
    fn randlocal_skips_self() {
        let x = random_matrix(25, 3, 8);
        let cfg = FeatureConfig {
            iterations: 1,
            ..small_cfg(Method::RandLocal, 25, 3)
        };
        let f = randlocal_features(x.view(), &cfg).unwrap();
        let lm = iteration_landmarks(25, &cfg, 0).unwrap();
        let block = distance_block(x.view(), &cfg, &lm, 0).unwrap();
        for (j, &row) in lm.indices().iter().enumerate() {
            let (cols, _) = f.row(row);
            assert_eq!(cols.len(), 1);
            assert_ne!(cols[0], j);
            // second nearest: the closest among the other landmarks
            let d = block.distances.row(row);
            let best = (0..12)
                .filter(|&k| k != j)
                .min_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)))
                .unwrap();
            assert_eq!(cols[0], best);
        }
    }

    #[test]
    fn variant2_with_one_neighbor_matches_randlocal_off_landmarks() {
        let x = random_matrix(30, 5, 10);
        let rl = FeatureConfig {
            iterations: 1,
            ..small_cfg(Method::RandLocal, 30, 5)
        };
        let v2 = FeatureConfig {
            method: Method::Variant2,
            nearest: 1,
            ..rl.clone()
        };
        let a = featurize(x.view(), &rl).unwrap();
        let b = featurize(x.view(), &v2).unwrap();
        let lm = iteration_landmarks(30, &rl, 0).unwrap();
        for i in (0..30).filter(|i| !lm.indices().contains(i)) {
            assert_eq!(a.row(i), b.row(i));
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg(Method::Rulls, 40, 5);
        assert!(cfg.validate(40, 5).is_ok());
        cfg.nearest = 12;
        assert!(matches!(cfg.validate(40, 5), Err(Error::Config(_))));
        cfg.nearest = 3;
        cfg.landmarks = 40;
        assert!(cfg.validate(40, 5).is_err());
        cfg.landmarks = 12;
        cfg.k_eps = 41;
        assert!(cfg.validate(40, 5).is_err());
        let mut v1 = small_cfg(Method::Variant1, 40, 5);
        v1.projection_dim = 6;
        assert!(v1.validate(40, 5).is_err());
        let mut rl = small_cfg(Method::RandLocal, 40, 5);
        rl.nearest = 50;
        assert!(rl.validate(40, 5).is_ok());
        rl.landmarks = 1;
        assert!(rl.validate(40, 5).is_err());
        let mut rob = small_cfg(Method::RullsRobust, 40, 5);
        rob.trim_fraction = 0.5;
        assert!(rob.validate(40, 5).is_err());
        assert!(rulls_features(random_matrix(40, 5, 0).view(), &small_cfg(Method::Variant1, 40, 5)).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("rulls_robust".parse::<Method>().unwrap(), Method::RullsRobust);
        assert!("pca".parse::<Method>().is_err());
    }
}
