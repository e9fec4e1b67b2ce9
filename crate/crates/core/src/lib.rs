//! Sparse landmark-distance features built from random unions of local
//! linear subspaces.
//!
//! Every iteration samples landmark rows, fits a local PCA subspace around
//! each one, measures every row's distance to each landmark inside that
//! landmark's subspace, and keeps an encoded value for the nearest few
//! landmarks only. The iterations are concatenated into one sparse matrix.
//!
//! ```no_run
//! use rulls::{dataset, featurize::{self, FeatureConfig, Method}};
//!
//! let ds = dataset::load_csv("data/iris.csv", Some(&dataset::ColumnSelector::Last), true)?;
//! let mut cfg = FeatureConfig::new(Method::Rulls, ds.n_rows(), ds.n_cols());
//! cfg.iterations = 10;
//! let features = featurize::featurize(ds.values(), &cfg)?;
//! assert_eq!(features.nnz(), ds.n_rows() * cfg.nearest * cfg.iterations);
//! # Ok::<(), rulls::Error>(())
//! ```

pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod featurize;
pub mod pgm;
pub mod seed;
pub mod sparse;
pub mod subspace;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use exec::Execution;
pub use featurize::{featurize, FeatureConfig, Method};
pub use sparse::SparseFeatureMatrix;
