//! Tabular numeric data: CSV ingestion with mean imputation, global
//! standardization, uniform noise injection and seeded train/test splits.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::{self, STREAM_NOISE, STREAM_SPLIT};

/// Dense `N x m` numeric matrix with optional integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Array2<f64>,
    labels: Option<Vec<usize>>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(values: Array2<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        let (n, m) = values.dim();
        if n == 0 || m == 0 {
            return Err(Error::data(format!("dataset must be non-empty, got {n}x{m}")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite value at row {}, column {}",
                pos / m,
                pos % m
            )));
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::data(format!(
                    "label count {} does not match row count {n}",
                    l.len()
                )));
            }
        }
        Ok(Self {
            values,
            labels,
            feature_names: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_cols() {
            return Err(Error::data(format!(
                "{} feature names for {} columns",
                names.len(),
                self.n_cols()
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Number of distinct label values, if labelled.
    pub fn class_count(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| {
            let mut v = l.clone();
            v.sort_unstable();
            v.dedup();
            v.len()
        })
    }

    fn with_values(&self, values: Array2<f64>) -> Self {
        Self {
            values,
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Which CSV column holds the labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    Index(usize),
    Name(String),
    Last,
}

impl FromStr for ColumnSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::config("empty label column selector"));
        }
        if s == "last" {
            return Ok(ColumnSelector::Last);
        }
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnSelector::Index(i),
            Err(_) => ColumnSelector::Name(s.to_string()),
        })
    }
}

impl fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnSelector::Index(i) => write!(f, "{i}"),
            ColumnSelector::Name(n) => f.write_str(n),
            ColumnSelector::Last => f.write_str("last"),
        }
    }
}

/// Load a comma-separated file. See [`parse_csv`].
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: Option<&ColumnSelector>,
    has_header: bool,
) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, label_column, has_header)
}

/// Parse CSV text into a [`Dataset`].
///
/// Empty fields are missing and get the mean of the column's present values.
/// Quoted fields are not supported. Labels that all parse as non-negative
/// integers are kept as-is; otherwise distinct strings are numbered in order
/// of first appearance.
pub fn parse_csv(
    text: &str,
    label_column: Option<&ColumnSelector>,
    has_header: bool,
) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());

    let header: Option<Vec<String>> = if has_header {
        let (_, line) = lines
            .next()
            .ok_or_else(|| Error::data("CSV has no header row"))?;
        Some(line.split(',').map(|s| s.trim().to_string()).collect())
    } else {
        None
    };

    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for (lineno, line) in lines {
        if line.contains('"') {
            return Err(Error::data(format!(
                "line {lineno}: quoted fields are not supported"
            )));
        }
        rows.push((lineno, line.split(',').map(str::trim).collect()));
    }
    if rows.is_empty() {
        return Err(Error::data("CSV has no data rows"));
    }
    let width = header.as_ref().map_or(rows[0].1.len(), Vec::len);
    for (lineno, fields) in &rows {
        if fields.len() != width {
            return Err(Error::data(format!(
                "line {lineno}: expected {width} fields, found {}",
                fields.len()
            )));
        }
    }

    let label_idx = match label_column {
        None => None,
        Some(ColumnSelector::Last) => Some(width - 1),
        Some(ColumnSelector::Index(i)) => {
            if *i >= width {
                return Err(Error::data(format!(
                    "label column {i} out of range for {width} columns"
                )));
            }
            Some(*i)
        }
        Some(ColumnSelector::Name(name)) => {
            let h = header.as_ref().ok_or_else(|| {
                Error::data(format!("label column '{name}' given by name but CSV has no header"))
            })?;
            Some(
                h.iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::data(format!("no column named '{name}'")))?,
            )
        }
    };
    let feature_cols: Vec<usize> = (0..width).filter(|&c| Some(c) != label_idx).collect();
    if feature_cols.is_empty() {
        return Err(Error::data("CSV has no feature columns"));
    }

    let n = rows.len();
    let m = feature_cols.len();
    let mut cells: Vec<Option<f64>> = Vec::with_capacity(n * m);
    for (lineno, fields) in &rows {
        for &c in &feature_cols {
            let f = fields[c];
            if f.is_empty() {
                cells.push(None);
                continue;
            }
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => cells.push(Some(v)),
                _ => {
                    return Err(Error::data(format!(
                        "line {lineno}, column {c}: '{f}' is not a finite number"
                    )))
                }
            }
        }
    }

    let mut values = Array2::<f64>::zeros((n, m));
    for j in 0..m {
        let (sum, count) = (0..n)
            .filter_map(|i| cells[i * m + j])
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            return Err(Error::data(format!(
                "column {} has no values to impute from",
                feature_cols[j]
            )));
        }
        let mean = sum / count as f64;
        for i in 0..n {
            values[[i, j]] = cells[i * m + j].unwrap_or(mean);
        }
    }

    let labels = match label_idx {
        None => None,
        Some(li) => {
            let raw: Vec<(usize, &str)> = rows.iter().map(|(l, f)| (*l, f[li])).collect();
            if let Some((lineno, _)) = raw.iter().find(|(_, s)| s.is_empty()) {
                return Err(Error::data(format!("line {lineno}: missing label")));
            }
            Some(encode_labels(raw.iter().map(|(_, s)| *s)))
        }
    };

    let ds = Dataset::new(values, labels)?;
    match header {
        Some(h) => ds.with_feature_names(feature_cols.iter().map(|&c| h[c].clone()).collect()),
        None => Ok(ds),
    }
}

fn encode_labels<'a>(raw: impl Iterator<Item = &'a str> + Clone) -> Vec<usize> {
    let numeric: Option<Vec<usize>> = raw.clone().map(|s| s.parse::<usize>().ok()).collect();
    if let Some(v) = numeric {
        return v;
    }
    let mut ids: HashMap<&str, usize> = HashMap::new();
    raw.map(|s| {
        let next = ids.len();
        *ids.entry(s).or_insert(next)
    })
    .collect()
}

/// Guess whether the first non-blank line of `text` is a header: it is when
/// it holds more non-numeric fields than the line after it.
pub fn detect_header(text: &str) -> bool {
    let text_fields = |line: &str| {
        line.split(',')
            .map(str::trim)
            .filter(|f| !f.is_empty() && f.parse::<f64>().is_err())
            .count()
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match (lines.next(), lines.next()) {
        (Some(first), Some(second)) => text_fields(first) > text_fields(second),
        (Some(first), None) => text_fields(first) > 0,
        _ => false,
    }
}

/// Z-score every column with its mean and population standard deviation.
/// Zero-variance columns become all zeros.
pub fn normalize_global(d: &Dataset) -> Dataset {
    let mut values = d.values.clone();
    let n = values.nrows() as f64;
    for mut col in values.axis_iter_mut(Axis(1)) {
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std > 0.0 && std.is_finite() {
            col.mapv_inplace(|v| (v - mean) / std);
        } else {
            col.fill(0.0);
        }
    }
    d.with_values(values)
}

/// Number of units selected when corrupting `fraction` of `total`.
fn corrupted_count(fraction: f64, total: usize) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!(
            "noise fraction must lie in (0, 1], got {fraction}"
        )));
    }
    // guard against 0.1 * 30 = 3.0000000000000004
    let count = ((fraction * total as f64) - 1e-9).ceil().max(0.0) as usize;
    if count == 0 {
        return Err(Error::config(format!(
            "noise fraction {fraction} selects nothing out of {total}"
        )));
    }
    Ok(count.min(total))
}

fn column_ranges(values: ArrayView2<'_, f64>) -> Vec<(f64, f64)> {
    values
        .axis_iter(Axis(1))
        .map(|c| {
            c.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
        })
        .collect()
}

fn uniform_in<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn sorted_sample<R: Rng>(rng: &mut R, total: usize, count: usize) -> Vec<usize> {
    let mut idx = index::sample(rng, total, count).into_vec();
    idx.sort_unstable();
    idx
}

/// Replace `ceil(fraction * m)` randomly chosen columns with i.i.d. uniform
/// draws over each column's original `[min, max]`.
pub fn add_column_noise(d: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    Ok(add_column_noise_with_selection(d, fraction, seed)?.0)
}

/// [`add_column_noise`] also returning the replaced column indices.
pub fn add_column_noise_with_selection(
    d: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    let (n, m) = d.values.dim();
    let count = corrupted_count(fraction, m)?;
    let mut rng = seed::derived_rng(seed, STREAM_NOISE, 0);
    let cols = sorted_sample(&mut rng, m, count);
    let ranges = column_ranges(d.values());
    let mut values = d.values.clone();
    for &c in &cols {
        for i in 0..n {
            values[[i, c]] = uniform_in(&mut rng, ranges[c]);
        }
    }
    Ok((d.with_values(values), cols))
}

/// Replace `ceil(fraction * N)` randomly chosen rows; entry `(i, j)` of a
/// chosen row is drawn uniformly over column `j`'s original `[min, max]`.
pub fn add_row_noise(d: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    Ok(add_row_noise_with_selection(d, fraction, seed)?.0)
}

/// [`add_row_noise`] also returning the replaced row indices.
pub fn add_row_noise_with_selection(
    d: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    let (n, m) = d.values.dim();
    let count = corrupted_count(fraction, n)?;
    let mut rng = seed::derived_rng(seed, STREAM_NOISE, 1);
    let rows = sorted_sample(&mut rng, n, count);
    let ranges = column_ranges(d.values());
    let mut values = d.values.clone();
    for &r in &rows {
        for j in 0..m {
            values[[r, j]] = uniform_in(&mut rng, ranges[j]);
        }
    }
    Ok((d.with_values(values), rows))
}

/// Disjoint train/test row indices covering `0..N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffle `0..n_rows` and cut after `floor(train_fraction * n_rows)`.
pub fn split(n_rows: usize, train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * n_rows as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_train >= n_rows {
        return Err(Error::config(format!(
            "train fraction {train_fraction} leaves an empty side for {n_rows} rows"
        )));
    }
    let mut perm: Vec<usize> = (0..n_rows).collect();
    perm.shuffle(&mut seed::derived_rng(seed, STREAM_SPLIT, 0));
    let test = perm.split_off(n_train);
    Ok(SplitIndices { train: perm, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn ds(values: Array2<f64>) -> Dataset {
        Dataset::new(values, None).unwrap()
    }

    #[test]
    fn parses_string_labels_in_first_appearance_order() {
        let d = parse_csv("1,2,A\n3,4,B\n5,6,A\n", Some(&ColumnSelector::Index(2)), false).unwrap();
        assert_eq!(d.values(), array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(d.labels().unwrap(), &[0, 1, 0]);
    }

    #[test]
    fn numeric_labels_are_kept() {
        let d = parse_csv("x,y\n1,7\n2,3\n", Some(&ColumnSelector::Name("y".into())), true)
            .unwrap();
        assert_eq!(d.labels().unwrap(), &[7, 3]);
        assert_eq!(d.feature_names().unwrap(), &["x".to_string()]);
    }

    #[test]
    fn imputes_column_mean() {
        let d = parse_csv("2.0,1\n,1\n4.0,1\n", None, false).unwrap();
        assert_eq!(d.values()[[1, 0]], 3.0);
        assert_eq!(d.values()[[0, 0]], 2.0);
        assert_eq!(d.values()[[2, 0]], 4.0);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv("1,x\n", None, false), Err(Error::Data(_))));
        assert!(matches!(parse_csv("1,\n2,\n", None, false), Err(Error::Data(_))));
        assert!(matches!(
            parse_csv("1,2\n3,4\n", Some(&ColumnSelector::Index(5)), false),
            Err(Error::Data(_))
        ));
        assert!(matches!(parse_csv("1,2\n3,4,5\n", None, false), Err(Error::Data(_))));
        assert!(matches!(parse_csv("\"1\",2\n", None, false), Err(Error::Data(_))));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", None, false),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn zscore_and_constant_columns() {
        let d = ds(array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]);
        let z = normalize_global(&d);
        let v = z.values();
        assert_abs_diff_eq!(v[[0, 0]], -1.224744871391589, epsilon = 1e-6);
        assert_abs_diff_eq!(v[[1, 0]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[[2, 0]], 1.224744871391589, epsilon = 1e-6);
        assert!(v.column(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn normalize_is_idempotent() {
        let d = ds(Array2::from_shape_fn((20, 4), |(i, j)| {
            ((i * 7 + j * 13) % 11) as f64 * (j as f64 + 0.5)
        }));
        let once = normalize_global(&d);
        let twice = normalize_global(&once);
        for (a, b) in once.values().iter().zip(twice.values().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    fn grid(n: usize, m: usize) -> Dataset {
        ds(Array2::from_shape_fn((n, m), |(i, j)| (i * m + j) as f64))
    }

    #[test]
    fn column_noise_touches_exactly_ceil_fraction() {
        let d = grid(30, 20);
        let (noisy, cols) = add_column_noise_with_selection(&d, 0.1, 3).unwrap();
        assert_eq!(cols.len(), 2);
        for j in 0..20 {
            let same = d.values().column(j) == noisy.values().column(j);
            assert_eq!(same, !cols.contains(&j), "column {j}");
        }
        assert_eq!(add_column_noise(&d, 0.1, 3).unwrap(), noisy);
    }

    #[test]
    fn row_noise_stays_in_range() {
        let d = grid(100, 3);
        let (noisy, rows) = add_row_noise_with_selection(&d, 0.1, 9).unwrap();
        assert_eq!(rows.len(), 10);
        let ranges = column_ranges(d.values());
        for i in 0..100 {
            let row_same = d.values().row(i) == noisy.values().row(i);
            assert_eq!(row_same, !rows.contains(&i));
            for j in 0..3 {
                let v = noisy.values()[[i, j]];
                assert!(v >= ranges[j].0 && v <= ranges[j].1);
            }
        }
        assert_eq!(add_row_noise(&d, 0.1, 9).unwrap(), noisy);
        assert!(add_row_noise(&d, 0.0, 9).is_err());
        assert!(add_row_noise(&d, 1.5, 9).is_err());
    }

    #[test]
    fn split_partitions_rows() {
        let s = split(10, 0.8, 42).unwrap();
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.test.len(), 2);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(split(10, 0.8, 42).unwrap(), s);
        assert!(split(1, 0.5, 0).is_err());
        assert!(split(10, 0.01, 0).is_err());
        assert!(split(10, 1.0, 0).is_err());
    }
}
