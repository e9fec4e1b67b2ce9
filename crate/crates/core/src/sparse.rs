//! Row-compressed sparse feature matrix and its text serialization.
//!
//! File layout:
//!
//! ```text
//! N COLS NNZ
//! row<TAB>col<TAB>value
//! ...
//! ```
//!
//! Entries are listed row by row, columns ascending within a row. Values are
//! printed with 17 significant digits (C `%.17g`), which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Sparse non-negative matrix; every stored value is finite and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseFeatureMatrix {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            indptr: vec![0; n_rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from per-row `(column, value)` lists already sorted by column.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let mut b = SparseBuilder::new(n_cols);
        for row in rows {
            b.push_row(row)?;
        }
        Ok(b.finish())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n_rows, self.n_cols));
        for (i, j, v) in self.iter() {
            d[[i, j]] = v;
        }
        d
    }

    /// Serialize in the text format described in the module docs.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        let mut line = String::with_capacity(64);
        for (i, j, v) in self.iter() {
            line.clear();
            let _ = write!(line, "{i}\t{j}\t");
            line.push_str(&format_sig17(v));
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("formatter emits ASCII")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let bad = |lineno: usize, msg: &str| Error::data(format!("line {}: {msg}", lineno + 1));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::data("empty sparse matrix file"))?;
        let header = header.map_err(|e| Error::data(e.to_string()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(0, "header must be 'N COLS NNZ'"))?;
        let [n_rows, n_cols, nnz] = dims[..] else {
            return Err(bad(0, "header must be 'N COLS NNZ'"));
        };

        let mut b = SparseBuilder::new(n_cols);
        let mut current: Vec<(usize, f64)> = Vec::new();
        let mut seen = 0usize;
        for (lineno, line) in lines {
            let line = line.map_err(|e| Error::data(e.to_string()))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(i), Some(j), Some(v), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(lineno, "expected 'row<TAB>col<TAB>value'"));
            };
            let i: usize = i.parse().map_err(|_| bad(lineno, "bad row index"))?;
            let j: usize = j.parse().map_err(|_| bad(lineno, "bad column index"))?;
            let v: f64 = v.parse().map_err(|_| bad(lineno, "bad value"))?;
            if i >= n_rows {
                return Err(bad(lineno, "row index out of range"));
            }
            if i < b.rows() {
                return Err(bad(lineno, "rows must be ascending"));
            }
            while b.rows() < i {
                b.push_row(std::mem::take(&mut current))
                    .map_err(|e| bad(lineno, &e.to_string()))?;
            }
            current.push((j, v));
            seen += 1;
        }
        if seen != nnz {
            return Err(Error::data(format!(
                "header announces {nnz} entries, file holds {seen}"
            )));
        }
        while b.rows() < n_rows {
            b.push_row(std::mem::take(&mut current))?;
        }
        Ok(b.finish())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

/// Appends rows one at a time, validating ordering and values.
#[derive(Debug)]
pub struct SparseBuilder {
    m: SparseFeatureMatrix,
}

impl SparseBuilder {
    pub fn new(n_cols: usize) -> Self {
        Self {
            m: SparseFeatureMatrix::empty(0, n_cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.m.n_rows
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
        let start = self.m.indices.len();
        let mut last: Option<usize> = None;
        for (j, v) in entries {
            if j >= self.m.n_cols {
                return Err(Error::data(format!(
                    "column {j} out of range for {} columns",
                    self.m.n_cols
                )));
            }
            if last.is_some_and(|l| l >= j) {
                return Err(Error::data(format!(
                    "columns not strictly increasing in row {}",
                    self.m.n_rows
                )));
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::data(format!(
                    "stored value {v} at ({}, {j}) is not finite and positive",
                    self.m.n_rows
                )));
            }
            last = Some(j);
            self.m.indices.push(j);
            self.m.values.push(v);
        }
        debug_assert!(self.m.indices.len() >= start);
        self.m.n_rows += 1;
        self.m.indptr.push(self.m.indices.len());
        Ok(())
    }

    pub fn finish(self) -> SparseFeatureMatrix {
        self.m
    }
}

/// Format like C's `%.17g`.
pub fn format_sig17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_fraction_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_fraction_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_fraction_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
