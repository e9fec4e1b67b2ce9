//! Local linear subspaces around landmarks, plus the two randomized
//! alternatives used by the variants: Gaussian projections and column
//! subsampling.
//!
//! A local subspace is estimated from the `k_eps` nearest rows of a landmark.
//! PCA eigendecomposes the smaller of the two Gram matrices of the centered
//! neighborhood (`k_eps x k_eps` or `m x m`), so its cost is bounded by the
//! neighborhood size rather than the ambient dimension when `m > k_eps`.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed;

/// Rows used to estimate one landmark's subspace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub landmark: usize,
    /// Member rows ordered by distance to the landmark (ties by row index).
    pub members: Vec<usize>,
}

/// The `k_eps` rows closest to `landmark` in Euclidean distance, the landmark
/// itself included. Ties are broken by ascending row index.
pub fn knn_neighborhood(
    values: ArrayView2<'_, f64>,
    landmark: usize,
    k_eps: usize,
) -> Result<Neighborhood> {
    let n = values.nrows();
    if landmark >= n {
        return Err(Error::config(format!("landmark row {landmark} out of range for {n} rows")));
    }
    if k_eps == 0 || k_eps > n {
        return Err(Error::config(format!(
            "neighborhood size k_eps={k_eps} must lie in [1, {n}]"
        )));
    }
    let anchor = values.row(landmark);
    let mut order: Vec<(f64, usize)> = values
        .axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| (sq_dist(row, anchor), i))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k_eps < n {
        order.select_nth_unstable_by(k_eps - 1, by_key);
        order.truncate(k_eps);
    }
    order.sort_unstable_by(by_key);
    let mut members: Vec<usize> = order.into_iter().map(|(_, i)| i).collect();
    // a duplicate of the landmark can tie at distance 0 and outrank it
    if !members.contains(&landmark) {
        members.pop();
        members.insert(0, landmark);
    }
    Ok(Neighborhood { landmark, members })
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Orthonormal basis of a local subspace together with the affine frame
/// (center, optional per-feature scaling) it was estimated in.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Array2<f64>,
    center: Array1<f64>,
    /// Reciprocal neighborhood standard deviations (0 for constant features).
    scale: Option<Array1<f64>>,
    explained_variance: Vec<f64>,
}

impl Subspace {
    /// `d x m` matrix with orthonormal rows.
    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    pub fn center(&self) -> ArrayView1<'_, f64> {
        self.center.view()
    }

    pub fn scale(&self) -> Option<ArrayView1<'_, f64>> {
        self.scale.as_ref().map(|s| s.view())
    }

    /// Covariance eigenvalues of the retained directions, non-increasing.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Basis with the per-feature scaling folded in, so that
    /// `effective_basis * (x - y)` is the projected difference of two rows.
    pub(crate) fn effective_basis(&self) -> Array2<f64> {
        match &self.scale {
            None => self.basis.clone(),
            Some(s) => &self.basis * &s.view().insert_axis(Axis(0)),
        }
    }

    /// Map rows of `values` into subspace coordinates, `basis * (row - center)`.
    pub fn project(&self, values: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if values.ncols() != self.ambient_dim() {
            return Err(Error::data(format!(
                "cannot project {}-column data onto a subspace of R^{}",
                values.ncols(),
                self.ambient_dim()
            )));
        }
        let mut shifted = &values - &self.center.view().insert_axis(Axis(0));
        if let Some(s) = &self.scale {
            shifted *= &s.view().insert_axis(Axis(0));
        }
        Ok(shifted.dot(&self.basis.t()))
    }

    /// Map subspace coordinates back to the (scaled, centered) frame: `basis^T * c`.
    pub fn reconstruct(&self, coords: ArrayView1<'_, f64>) -> Array1<f64> {
        self.basis.t().dot(&coords)
    }
}

/// Smallest `d` whose leading eigenvalue mass reaches `threshold` of the total.
///
/// `eigenvalues` must be sorted non-increasing.
pub fn select_dimension(eigenvalues: &[f64], threshold: f64) -> usize {
    let total: f64 = eigenvalues.iter().sum();
    let target = threshold * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (i, &v) in eigenvalues.iter().enumerate() {
        acc += v;
        if acc >= target {
            return i + 1;
        }
    }
    eigenvalues.len().max(1)
}

fn check_threshold(variance_threshold: f64) -> Result<()> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::config(format!(
            "variance threshold must lie in (0, 1], got {variance_threshold}"
        )));
    }
    Ok(())
}

/// Neighborhood rows shifted into the fitting frame, plus that frame.
struct Frame {
    centered: Array2<f64>,
    center: Array1<f64>,
    scale: Option<Array1<f64>>,
}

fn neighborhood_frame(
    values: ArrayView2<'_, f64>,
    members: &[usize],
    normalize: bool,
) -> Result<Frame> {
    let m = values.ncols();
    if let Some(&bad) = members.iter().find(|&&i| i >= values.nrows()) {
        return Err(Error::config(format!("neighborhood row {bad} out of range")));
    }
    let rows = values.select(Axis(0), members);
    let first = rows.row(0);
    if rows.axis_iter(Axis(0)).all(|r| r == first) {
        return Err(Error::degenerate(format!(
            "all {} neighborhood points are identical",
            members.len()
        )));
    }
    let k = members.len() as f64;
    let center = rows.sum_axis(Axis(0)) / k;
    let mut centered = &rows - &center.view().insert_axis(Axis(0));
    let scale = if normalize {
        let s: Array1<f64> = (0..m)
            .map(|j| {
                let var = centered.column(j).iter().map(|v| v * v).sum::<f64>() / k;
                let std = var.sqrt();
                // rounding in the mean leaves ~ulp residue on constant columns
                if std > 1e-12 * center[j].abs() && std > 0.0 {
                    1.0 / std
                } else {
                    0.0
                }
            })
            .collect();
        centered *= &s.view().insert_axis(Axis(0));
        Some(s)
    } else {
        None
    };
    Ok(Frame {
        centered,
        center,
        scale,
    })
}

/// PCA subspace of a neighborhood.
///
/// Retains the fewest leading directions whose eigenvalue mass reaches
/// `variance_threshold`. Each basis row is signed so that its
/// largest-magnitude entry is positive. With `normalize`, the neighborhood
/// (and later every projected row) is z-scored by the neighborhood's
/// per-feature mean and standard deviation.
pub fn fit_pca(
    values: ArrayView2<'_, f64>,
    nb: &Neighborhood,
    variance_threshold: f64,
    normalize: bool,
) -> Result<Subspace> {
    check_threshold(variance_threshold)?;
    if nb.members.len() < 2 {
        return Err(Error::config("PCA needs at least two neighborhood points"));
    }
    let frame = neighborhood_frame(values, &nb.members, normalize)?;
    fit_frame(frame, variance_threshold)
}

fn fit_frame(frame: Frame, variance_threshold: f64) -> Result<Subspace> {
    let Frame {
        centered,
        center,
        scale,
    } = frame;
    let m = centered.ncols();
    let total: f64 = centered.iter().map(|v| v * v).sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::degenerate("neighborhood has zero variance"));
    }

    let (eigen, directions) = principal_directions(&centered);
    let rank = eigen.iter().filter(|&&e| e > eigen[0] * RANK_TOL).count().max(1);
    let d = select_dimension(&eigen, variance_threshold).min(rank);
    let mut basis = orthonormalize_rows(directions.slice(ndarray::s![..d, ..]).to_owned())?;
    for mut row in basis.rows_mut() {
        let mut lead = 0;
        for j in 1..m {
            if row[j].abs() > row[lead].abs() {
                lead = j;
            }
        }
        if row[lead] < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
    Ok(Subspace {
        basis,
        center,
        scale,
        explained_variance: eigen[..d].to_vec(),
    })
}

/// Eigenvalues below this fraction of the largest count as numerical zero.
const RANK_TOL: f64 = 1e-12;

/// Covariance eigenvalues (descending) and the matching unit directions as
/// rows, from the centered `k x m` matrix.
///
/// Decomposes whichever of `Z^T Z` (`m x m`) and `Z Z^T` (`k x k`) is smaller;
/// in the second case directions are recovered as `Z^T u / sigma`. Equal
/// eigenvalues keep the solver's order. Directions past the numerical rank
/// are left as zero rows in the Gram case.
fn principal_directions(centered: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let (k, m) = centered.dim();
    let z = DMatrix::from_fn(k, m, |i, j| centered[[i, j]]);
    let denom = (k.max(2) - 1) as f64;
    let use_gram = k < m;
    let sym = if use_gram {
        &z * z.transpose()
    } else {
        z.transpose() * &z
    };
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut directions = Array2::<f64>::zeros((order.len(), m));
    for (r, &src) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[src].max(0.0);
        let vec = eig.eigenvectors.column(src);
        if !use_gram {
            for j in 0..m {
                directions[[r, j]] = vec[j];
            }
        } else if lambda > top * RANK_TOL {
            let inv_sigma = 1.0 / lambda.sqrt();
            for j in 0..m {
                directions[[r, j]] = (0..k).map(|i| z[(i, j)] * vec[i]).sum::<f64>() * inv_sigma;
            }
        }
    }
    let eigen = order
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0) / denom)
        .collect();
    (eigen, directions)
}

/// Modified Gram-Schmidt over rows, two passes per row.
fn orthonormalize_rows(mut rows: Array2<f64>) -> Result<Array2<f64>> {
    for r in 0..rows.nrows() {
        for _pass in 0..2 {
            for prev in 0..r {
                let dot = rows.row(prev).dot(&rows.row(r));
                let prev_row = rows.row(prev).to_owned();
                rows.row_mut(r).scaled_add(-dot, &prev_row);
            }
        }
        let norm = rows.row(r).dot(&rows.row(r)).sqrt();
        if !(norm > 0.5) {
            return Err(Error::degenerate("principal directions are numerically dependent"));
        }
        rows.row_mut(r).mapv_inplace(|v| v / norm);
    }
    Ok(rows)
}

/// Residual-trimmed PCA.
///
/// Fits [`fit_pca`], drops the `floor(trim_fraction * k_eps)` members with
/// the largest orthogonal reconstruction residual, and refits on the rest.
pub fn fit_robust_pca(
    values: ArrayView2<'_, f64>,
    nb: &Neighborhood,
    variance_threshold: f64,
    normalize: bool,
    trim_fraction: f64,
) -> Result<Subspace> {
    let kept = trimmed_members(values, nb, variance_threshold, normalize, trim_fraction)?;
    fit_pca(
        values,
        &Neighborhood {
            landmark: nb.landmark,
            members: kept,
        },
        variance_threshold,
        normalize,
    )
}

/// Members retained by one round of residual trimming, in original order.
pub fn trimmed_members(
    values: ArrayView2<'_, f64>,
    nb: &Neighborhood,
    variance_threshold: f64,
    normalize: bool,
    trim_fraction: f64,
) -> Result<Vec<usize>> {
    let k = nb.members.len();
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::config(format!(
            "trim fraction must lie in [0, 0.5), got {trim_fraction}"
        )));
    }
    let drop = (trim_fraction * k as f64).floor() as usize;
    if k - drop < 2 {
        return Err(Error::config(format!(
            "trimming {drop} of {k} neighborhood points leaves fewer than two"
        )));
    }
    if drop == 0 {
        return Ok(nb.members.clone());
    }
    let first = fit_pca(values, nb, variance_threshold, normalize)?;
    let frame = neighborhood_frame(values, &nb.members, normalize)?;
    let coords = frame.centered.dot(&first.basis.t());
    let recon = coords.dot(&first.basis);
    let mut ranked: Vec<(f64, usize)> = (0..k)
        .map(|r| {
            let res = sq_dist(frame.centered.row(r), recon.row(r));
            (res, r)
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut dropped: Vec<usize> = ranked[..drop].iter().map(|&(_, r)| r).collect();
    dropped.sort_unstable();
    Ok(nb
        .members
        .iter()
        .enumerate()
        .filter(|(r, _)| dropped.binary_search(r).is_err())
        .map(|(_, &i)| i)
        .collect())
}

/// `m x target_dim` matrix of i.i.d. `N(0, 1) / sqrt(target_dim)` entries.
pub fn gaussian_projection_matrix(m: usize, target_dim: usize, seed: u64) -> Result<Array2<f64>> {
    if target_dim == 0 || target_dim > m {
        return Err(Error::config(format!(
            "projection dimension {target_dim} must lie in [1, {m}]"
        )));
    }
    let mut rng = seed::rng_from(seed);
    let scale = 1.0 / (target_dim as f64).sqrt();
    let mut p = Array2::<f64>::zeros((m, target_dim));
    for v in p.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v = z * scale;
    }
    Ok(p)
}

/// Gaussian random projection of every row to `target_dim` dimensions.
pub fn random_projection(
    values: ArrayView2<'_, f64>,
    target_dim: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let p = gaussian_projection_matrix(values.ncols(), target_dim, seed)?;
    Ok(values.dot(&p))
}

/// `m x target_dim` projection onto a uniformly random `target_dim`-dimensional
/// subspace, scaled by `sqrt(m / target_dim)`.
///
/// The Gaussian matrix's columns are orthonormalized (modified Gram-Schmidt,
/// two passes). At `target_dim == m` this is a scaled random rotation.
pub fn orthogonal_projection_matrix(
    m: usize,
    target_dim: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let mut q = gaussian_projection_matrix(m, target_dim, seed)?;
    for c in 0..target_dim {
        for _pass in 0..2 {
            for prev in 0..c {
                let dot = q.column(prev).dot(&q.column(c));
                let prev_col = q.column(prev).to_owned();
                q.column_mut(c).scaled_add(-dot, &prev_col);
            }
        }
        let norm = q.column(c).dot(&q.column(c)).sqrt();
        if norm <= f64::EPSILON {
            return Err(Error::degenerate("random projection lost rank"));
        }
        q.column_mut(c).mapv_inplace(|v| v / norm);
    }
    q *= (m as f64 / target_dim as f64).sqrt();
    Ok(q)
}

/// `count` distinct columns drawn uniformly, kept in ascending order.
pub fn subsample_features(
    values: ArrayView2<'_, f64>,
    count: usize,
    seed: u64,
) -> Result<(Array2<f64>, Vec<usize>)> {
    let m = values.ncols();
    if count == 0 || count > m {
        return Err(Error::config(format!(
            "subsample size {count} must lie in [1, {m}]"
        )));
    }
    let mut cols = index::sample(&mut seed::rng_from(seed), m, count).into_vec();
    cols.sort_unstable();
    Ok((values.select(Axis(1), &cols), cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, m: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, m), |_| rng.random_range(-1.0..1.0))
    }

    fn orthonormality_defect(b: ArrayView2<'_, f64>) -> f64 {
        let g = b.dot(&b.t());
        let mut worst: f64 = 0.0;
        for ((i, j), v) in g.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
        worst
    }

    #[test]
    fn wide_neighborhood_is_spanned_exactly() {
        // k < m: the centered rows have rank k - 1 and must lie in the basis span
        for seed in 0..20 {
            let x = random_matrix(4, 7, seed);
            let nb = Neighborhood {
                landmark: 0,
                members: vec![0, 1, 2, 3],
            };
            for normalize in [false, true] {
                let s = fit_pca(x.view(), &nb, 1.0, normalize).unwrap();
                assert_eq!(s.dim(), 3);
                assert!(orthonormality_defect(s.basis()) < 1e-12);
                let coords = s.project(x.view()).unwrap();
                for i in 0..4 {
                    let back = s.reconstruct(coords.row(i));
                    for j in 0..7 {
                        let scale = s.scale().map_or(1.0, |sc| sc[j]);
                        let framed = (x[[i, j]] - s.center()[j]) * scale;
                        assert_abs_diff_eq!(back[j], framed, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn knn_on_a_line() {
        let x = array![[0.0], [1.0], [2.0], [10.0]];
        let nb = knn_neighborhood(x.view(), 0, 3).unwrap();
        let mut m = nb.members.clone();
        m.sort_unstable();
        assert_eq!(m, vec![0, 1, 2]);
        assert_eq!(knn_neighborhood(x.view(), 3, 4).unwrap().members.len(), 4);
        assert!(knn_neighborhood(x.view(), 0, 5).is_err());
    }

    #[test]
    fn knn_breaks_ties_by_row_index() {
        // rows 4 and 7 are both at distance 1 from the landmark (row 0)
        let mut x = Array2::<f64>::from_elem((8, 2), 50.0);
        x.row_mut(0).assign(&array![0.0, 0.0]);
        x.row_mut(4).assign(&array![1.0, 0.0]);
        x.row_mut(7).assign(&array![0.0, 1.0]);
        let nb = knn_neighborhood(x.view(), 0, 2).unwrap();
        assert_eq!(nb.members, vec![0, 4]);
    }

    #[test]
    fn dimension_from_cumulative_mass() {
        assert_eq!(select_dimension(&[5.0, 3.0, 1.5, 0.5], 0.95), 3);
        assert_eq!(select_dimension(&[5.0, 3.0, 1.5, 0.5], 0.5), 1);
        assert_eq!(select_dimension(&[5.0, 3.0, 1.5, 0.5], 0.8), 2);
        assert_eq!(select_dimension(&[5.0, 3.0, 1.5, 0.5], 1.0), 4);
    }

    #[test]
    fn line_in_r3_gives_rank_one() {
        let dir = array![2.0, -6.0, 3.0] / 7.0;
        let x = Array2::from_shape_fn((10, 3), |(i, j)| 0.5 + (i as f64 - 4.0) * dir[j]);
        let nb = Neighborhood {
            landmark: 0,
            members: (0..10).collect(),
        };
        let s = fit_pca(x.view(), &nb, 0.95, false).unwrap();
        assert_eq!(s.dim(), 1);
        let b = s.basis().row(0).to_owned();
        // sign convention: largest |entry| positive
        let expected = -&dir;
        for j in 0..3 {
            assert_abs_diff_eq!(b[j], expected[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn identical_points_are_degenerate() {
        let x = Array2::<f64>::from_elem((5, 3), 2.0);
        let nb = knn_neighborhood(x.view(), 0, 5).unwrap();
        assert!(matches!(fit_pca(x.view(), &nb, 0.95, false), Err(Error::Degenerate(_))));
    }

    /// Jacobi eigen-solver for small symmetric matrices; test oracle only.
    fn jacobi_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[[i, j]] * a[[i, j]])
                .sum();
            if off < 1e-24 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[[k, p]];
                        let akq = a[[k, q]];
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[[p, k]];
                        let aqk = a[[q, k]];
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[[i, i]]).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    #[test]
    fn pca_captures_threshold_variance() {
        let x = random_matrix(30, 5, 11);
        let nb = Neighborhood {
            landmark: 0,
            members: (0..30).collect(),
        };
        let s = fit_pca(x.view(), &nb, 0.95, false).unwrap();
        let centered = &x - &x.mean_axis(Axis(0)).unwrap().insert_axis(Axis(0));
        let cov = centered.t().dot(&centered) / 29.0;
        let oracle = jacobi_eigenvalues(cov);
        let d = select_dimension(&oracle, 0.95);
        assert_eq!(s.dim(), d);
        for (a, b) in s.explained_variance().iter().zip(&oracle) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let proj = s.project(x.view()).unwrap();
        let mut resid = 0.0;
        for i in 0..30 {
            let back = s.reconstruct(proj.row(i));
            resid += sq_dist(back.view(), centered.row(i));
        }
        let total: f64 = centered.iter().map(|v| v * v).sum();
        assert!(1.0 - resid / total >= 0.95 - 1e-12);
        let oracle_resid: f64 = oracle[d..].iter().sum::<f64>() * 29.0;
        assert_abs_diff_eq!(resid, oracle_resid, epsilon = 1e-9);
        assert!(orthonormality_defect(s.basis()) < 1e-8);
    }

    #[test]
    fn projection_identities() {
        let x = random_matrix(12, 4, 5);
        let nb = Neighborhood {
            landmark: 0,
            members: (0..12).collect(),
        };
        let s = fit_pca(x.view(), &nb, 1.0, false).unwrap();
        assert_eq!(s.dim(), 4);
        let c = s.center().to_owned().insert_axis(Axis(0));
        let pc = s.project(c.view()).unwrap();
        assert!(pc.iter().all(|v| v.abs() < 1e-12));
        // full-rank basis preserves distances
        let p = s.project(x.view()).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let a = sq_dist(x.row(i), x.row(j)).sqrt();
                let b = sq_dist(p.row(i), p.row(j)).sqrt();
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
        assert!(s.project(random_matrix(2, 3, 1).view()).is_err());
    }

    #[test]
    fn points_in_the_subspace_round_trip() {
        let x = random_matrix(20, 6, 8);
        let nb = knn_neighborhood(x.view(), 3, 10).unwrap();
        let s = fit_pca(x.view(), &nb, 0.9, false).unwrap();
        let coeffs = Array1::from_shape_fn(s.dim(), |i| 0.3 * i as f64 - 0.7);
        let point = &s.center() + &s.reconstruct(coeffs.view());
        let proj = s.project(point.insert_axis(Axis(0)).view()).unwrap();
        let back = &s.center() + &s.reconstruct(proj.row(0));
        let orig = &s.center() + &s.reconstruct(coeffs.view());
        for j in 0..6 {
            assert_abs_diff_eq!(back[j], orig[j], epsilon = 1e-8);
        }
    }

    #[test]
    fn normalized_fit_uses_neighborhood_frame() {
        let mut x = random_matrix(15, 3, 2);
        x.column_mut(2).fill(4.0);
        let nb = knn_neighborhood(x.view(), 0, 15).unwrap();
        let s = fit_pca(x.view(), &nb, 0.95, true).unwrap();
        assert_eq!(s.scale().unwrap()[2], 0.0);
        assert!(s.basis().column(2).iter().all(|v| v.abs() < 1e-12));
        assert!(orthonormality_defect(s.basis()) < 1e-8);
    }

    fn line_with_outlier() -> (Array2<f64>, Array1<f64>) {
        let dir = array![3.0, 4.0, 0.0] / 5.0;
        let mut x = Array2::from_shape_fn((30, 3), |(i, j)| {
            let t = -5.0 + 10.0 * i as f64 / 28.0;
            1.0 + t * dir[j]
        });
        // off-center along the line so that it tilts the plain fit
        x.row_mut(29).assign(&array![1.0 + 4.0 * 0.6, 1.0 + 4.0 * 0.8, 3.0]);
        (x, dir)
    }

    fn angle(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        let c = (a.dot(&b) / (a.dot(&a).sqrt() * b.dot(&b).sqrt())).abs().min(1.0);
        c.acos()
    }

    #[test]
    fn trimming_removes_an_outlier() {
        let (x, dir) = line_with_outlier();
        let nb = Neighborhood {
            landmark: 0,
            members: (0..30).collect(),
        };
        let plain = fit_pca(x.view(), &nb, 0.95, false).unwrap();
        let robust = fit_robust_pca(x.view(), &nb, 0.95, false, 0.1).unwrap();
        let kept = trimmed_members(x.view(), &nb, 0.95, false, 0.1).unwrap();
        assert_eq!(kept.len(), 27);
        assert!(!kept.contains(&29));
        assert_eq!(robust.dim(), 1);
        assert!(angle(robust.basis().row(0), dir.view()) < 1e-6);
        assert!(angle(plain.basis().row(0), dir.view()) > 1e-3);
    }

    #[test]
    fn zero_trim_is_plain_pca() {
        let x = random_matrix(25, 4, 3);
        let nb = knn_neighborhood(x.view(), 2, 20).unwrap();
        for normalize in [false, true] {
            let a = fit_pca(x.view(), &nb, 0.95, normalize).unwrap();
            let b = fit_robust_pca(x.view(), &nb, 0.95, normalize, 0.0).unwrap();
            assert_eq!(a, b);
        }
        assert!(fit_robust_pca(x.view(), &nb, 0.95, false, 0.5).is_err());
    }

    #[test]
    fn gaussian_projection_is_seeded() {
        let a = gaussian_projection_matrix(10, 3, 4).unwrap();
        assert_eq!(a, gaussian_projection_matrix(10, 3, 4).unwrap());
        assert_ne!(a, gaussian_projection_matrix(10, 3, 5).unwrap());
        assert!(gaussian_projection_matrix(10, 0, 4).is_err());
        assert!(gaussian_projection_matrix(10, 11, 4).is_err());
        let x = array![[1.0], [2.0]];
        let p = random_projection(x.view(), 1, 9).unwrap();
        assert_abs_diff_eq!(p[[1, 0]], 2.0 * p[[0, 0]], epsilon = 1e-15);
    }

    #[test]
    fn orthogonal_projection_at_full_dimension_is_scaled_rotation() {
        let q = orthogonal_projection_matrix(6, 6, 1).unwrap();
        let g = q.t().dot(&q);
        for ((i, j), v) in g.indexed_iter() {
            assert_abs_diff_eq!(*v, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
        let half = orthogonal_projection_matrix(8, 2, 1).unwrap();
        let g = half.t().dot(&half);
        assert_abs_diff_eq!(g[[0, 0]], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g[[0, 1]], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn column_subsample_contract() {
        let x = random_matrix(4, 9, 0);
        let (all, cols) = subsample_features(x.view(), 9, 3).unwrap();
        assert_eq!(cols, (0..9).collect::<Vec<_>>());
        assert_eq!(all, x);
        let (part, cols) = subsample_features(x.view(), 4, 3).unwrap();
        assert!(cols.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample_features(x.view(), 4, 3).unwrap().1, cols);
        for (k, &c) in cols.iter().enumerate() {
            assert_eq!(part.column(k), x.column(c));
        }
        assert!(subsample_features(x.view(), 0, 3).is_err());
        assert!(subsample_features(x.view(), 10, 3).is_err());
    }
}
