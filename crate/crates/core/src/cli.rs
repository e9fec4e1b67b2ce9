//! Command-line front end: `featurize`, `evaluate`, `noise-eval`, `visualize`.
//!
//! Options come from flags and, optionally, a flat `key=value` file given
//! with `--config`; flags win. Keys use the flag names without the leading
//! dashes (`iterations=10`, `label-col=4`). `RULLS_SEED` supplies the seed
//! when neither source sets it.
//!
//! Reports are tab-separated `metric<TAB>value` lines. The copy written with
//! `--output`/`--report` omits `wall_time_seconds` so that repeated runs
//! produce byte-identical files; stdout carries the full report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{self, ColumnSelector, Dataset};
use crate::error::{Error, Result};
use crate::eval::{self, FeatureRows, TrainParams};
use crate::exec::Execution;
use crate::featurize::{self, FeatureConfig, Method};
use crate::pgm;
use crate::seed::{self, STREAM_NOISE};
use crate::sparse::SparseFeatureMatrix;

#[derive(Debug, Parser)]
#[command(name = "rulls", version, about = "Sparse landmark-distance feature engineering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the sparse feature matrix of a CSV dataset.
    Featurize(RunArgs),
    /// Compare raw and engineered features on classification or clustering.
    Evaluate(RunArgs),
    /// Run `evaluate` on clean and noise-corrupted copies of the data.
    NoiseEval(RunArgs),
    /// Render a sparse feature matrix file as a PGM image.
    Visualize(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Featurize(_) => "featurize",
            Command::Evaluate(_) => "evaluate",
            Command::NoiseEval(_) => "noise-eval",
            Command::Visualize(_) => "visualize",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Featurize(a)
            | Command::Evaluate(a)
            | Command::NoiseEval(a)
            | Command::Visualize(a) => a,
        }
    }
}

/// Raw option strings; parsed and range-checked by [`RunConfig::resolve`].
#[derive(Debug, Default, Clone, Args)]
pub struct RunArgs {
    /// Flat key=value file with defaults for any option below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub output: Option<String>,
    /// Extra copy of the metrics report (featurize only).
    #[arg(long)]
    pub report: Option<String>,
    /// Label column: index, header name, or `last`.
    #[arg(long = "label-col")]
    pub label_col: Option<String>,
    /// 1 if the CSV has a header row, 0 if not; detected when omitted.
    #[arg(long)]
    pub header: Option<String>,
    /// rulls | rulls-robust | variant1 | variant2 | randlocal
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub iterations: Option<String>,
    #[arg(long)]
    pub landmarks: Option<String>,
    #[arg(long)]
    pub nearest: Option<String>,
    #[arg(long = "k-eps")]
    pub k_eps: Option<String>,
    #[arg(long = "reg-p")]
    pub reg_p: Option<String>,
    #[arg(long = "variance-threshold")]
    pub variance_threshold: Option<String>,
    /// 1 (default) to z-score by neighborhood statistics before local PCA, 0 to skip.
    #[arg(long)]
    pub normalize: Option<String>,
    #[arg(long = "proj-dim")]
    pub proj_dim: Option<String>,
    #[arg(long = "trim-fraction")]
    pub trim_fraction: Option<String>,
    /// classify | cluster
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long = "train-fraction")]
    pub train_fraction: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    /// Cluster count (defaults to the number of classes).
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<String>,
    /// k-means restarts; the lowest objective wins.
    #[arg(long = "n-init")]
    pub n_init: Option<String>,
    /// Independent seeds averaged by evaluate / noise-eval.
    #[arg(long)]
    pub repeats: Option<String>,
    /// 1 to z-score every column of the input before anything else.
    #[arg(long)]
    pub standardize: Option<String>,
    /// rows | cols
    #[arg(long = "noise-axis")]
    pub noise_axis: Option<String>,
    #[arg(long = "noise-fraction")]
    pub noise_fraction: Option<String>,
    #[arg(long, env = "RULLS_SEED")]
    pub seed: Option<String>,
    /// parallel | sequential
    #[arg(long)]
    pub execution: Option<String>,
}

impl RunArgs {
    fn flag_values(&self) -> BTreeMap<&'static str, String> {
        let pairs: [(&'static str, &Option<String>); 27] = [
            ("input", &self.input),
            ("output", &self.output),
            ("report", &self.report),
            ("label-col", &self.label_col),
            ("header", &self.header),
            ("method", &self.method),
            ("iterations", &self.iterations),
            ("landmarks", &self.landmarks),
            ("nearest", &self.nearest),
            ("k-eps", &self.k_eps),
            ("reg-p", &self.reg_p),
            ("variance-threshold", &self.variance_threshold),
            ("normalize", &self.normalize),
            ("proj-dim", &self.proj_dim),
            ("trim-fraction", &self.trim_fraction),
            ("task", &self.task),
            ("train-fraction", &self.train_fraction),
            ("epochs", &self.epochs),
            ("lambda", &self.lambda),
            ("k", &self.k),
            ("max-iter", &self.max_iter),
            ("n-init", &self.n_init),
            ("repeats", &self.repeats),
            ("standardize", &self.standardize),
            ("noise-axis", &self.noise_axis),
            ("noise-fraction", &self.noise_fraction),
            ("seed", &self.seed),
        ];
        let mut out: BTreeMap<&'static str, String> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect();
        if let Some(e) = &self.execution {
            out.insert("execution", e.clone());
        }
        out
    }
}

const KNOWN_KEYS: [&str; 28] = [
    "input",
    "output",
    "report",
    "label-col",
    "header",
    "method",
    "iterations",
    "landmarks",
    "nearest",
    "k-eps",
    "reg-p",
    "variance-threshold",
    "normalize",
    "proj-dim",
    "trim-fraction",
    "task",
    "train-fraction",
    "epochs",
    "lambda",
    "k",
    "max-iter",
    "n-init",
    "repeats",
    "standardize",
    "noise-axis",
    "noise-fraction",
    "seed",
    "execution",
];

/// Parse a flat `key=value` file; `#` starts a comment line.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("config line {}: expected key=value", n + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if !KNOWN_KEYS.contains(&k.as_str()) {
            return Err(Error::config(format!("config line {}: unknown key '{k}'", n + 1)));
        }
        map.insert(k, v.trim().to_string());
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Classify,
    Cluster,
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classify" => Ok(Task::Classify),
            "cluster" => Ok(Task::Cluster),
            other => Err(Error::config(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseAxis {
    Rows,
    Cols,
}

impl FromStr for NoiseAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows" => Ok(NoiseAxis::Rows),
            "cols" | "columns" => Ok(NoiseAxis::Cols),
            other => Err(Error::config(format!("unknown noise axis '{other}'"))),
        }
    }
}

/// Fully resolved options of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: &'static str,
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub label_col: Option<ColumnSelector>,
    pub header: Option<bool>,
    pub method: Method,
    pub iterations: usize,
    pub landmarks: Option<usize>,
    pub nearest: Option<usize>,
    pub k_eps: usize,
    pub reg_p: f64,
    pub variance_threshold: f64,
    pub normalize: bool,
    pub proj_dim: Option<usize>,
    pub trim_fraction: f64,
    pub task: Task,
    pub train_fraction: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub k: Option<usize>,
    pub max_iter: usize,
    pub n_init: usize,
    pub repeats: usize,
    pub standardize: bool,
    pub noise_axis: NoiseAxis,
    pub noise_fraction: f64,
    pub seed: u64,
    pub execution: Execution,
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::config(format!("--{key}: cannot parse '{raw}'")))
}

fn parse_flag(key: &str, raw: &str) -> Result<bool> {
    match raw.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(Error::config(format!("--{key} expects 0 or 1, got '{raw}'"))),
    }
}

impl RunConfig {
    /// Merge flags over the config file (if any) and range-check every value.
    pub fn resolve(command: &Command) -> Result<Self> {
        let args = command.args();
        let mut map: BTreeMap<String, String> = match &args.config {
            Some(p) => parse_config_file(
                &std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            )?,
            None => BTreeMap::new(),
        };
        for (k, v) in args.flag_values() {
            map.insert(k.to_string(), v);
        }
        Self::from_map(command.name(), &map)
    }

    pub fn from_map(command: &'static str, map: &BTreeMap<String, String>) -> Result<Self> {
        let get = |k: &str| map.get(k).map(String::as_str);
        fn opt<T: FromStr>(map: &BTreeMap<String, String>, k: &str) -> Result<Option<T>> {
            map.get(k).map(|v| parse_value(k, v)).transpose()
        }
        let input = get("input")
            .map(PathBuf::from)
            .ok_or_else(|| Error::config("--input is required"))?;
        let cfg = RunConfig {
            command,
            input,
            output: get("output").map(PathBuf::from),
            report: get("report").map(PathBuf::from),
            label_col: get("label-col").map(str::parse).transpose()?,
            header: get("header").map(|v| parse_flag("header", v)).transpose()?,
            method: get("method").map(str::parse).transpose()?.unwrap_or(Method::Rulls),
            iterations: opt(map, "iterations")?.unwrap_or(100),
            landmarks: opt(map, "landmarks")?,
            nearest: opt(map, "nearest")?,
            k_eps: opt(map, "k-eps")?.unwrap_or(30),
            reg_p: opt(map, "reg-p")?.unwrap_or(1e-4),
            variance_threshold: opt(map, "variance-threshold")?.unwrap_or(0.95),
            normalize: get("normalize")
                .map(|v| parse_flag("normalize", v))
                .transpose()?
                .unwrap_or(true),
            proj_dim: opt(map, "proj-dim")?,
            trim_fraction: opt(map, "trim-fraction")?.unwrap_or(0.25),
            task: get("task").map(str::parse).transpose()?.unwrap_or(Task::Classify),
            train_fraction: opt(map, "train-fraction")?.unwrap_or(0.8),
            epochs: opt(map, "epochs")?.unwrap_or(30),
            lambda: opt(map, "lambda")?.unwrap_or(1e-4),
            k: opt(map, "k")?,
            max_iter: opt(map, "max-iter")?.unwrap_or(300),
            n_init: opt(map, "n-init")?.unwrap_or(10),
            repeats: opt(map, "repeats")?.unwrap_or(1),
            standardize: get("standardize")
                .map(|v| parse_flag("standardize", v))
                .transpose()?
                .unwrap_or(false),
            noise_axis: get("noise-axis")
                .map(str::parse)
                .transpose()?
                .unwrap_or(NoiseAxis::Rows),
            noise_fraction: opt(map, "noise-fraction")?.unwrap_or(0.1),
            seed: opt(map, "seed")?.unwrap_or(0),
            execution: get("execution")
                .map(str::parse)
                .transpose()?
                .unwrap_or_default(),
        };
        cfg.check_ranges()?;
        Ok(cfg)
    }

    fn check_ranges(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.iterations == 0 {
            return fail("--iterations must be positive".into());
        }
        if self.landmarks == Some(0) {
            return fail("--landmarks must be positive".into());
        }
        if let (Some(lk), Some(lp)) = (self.nearest, self.landmarks) {
            if self.method != Method::RandLocal && (lk == 0 || lk >= lp) {
                return fail(format!("--nearest {lk} must satisfy 1 <= l_k < l_p = {lp}"));
            }
        }
        if self.k_eps < 2 {
            return fail("--k-eps must be at least 2".into());
        }
        if !(self.reg_p > 0.0 && self.reg_p.is_finite()) {
            return fail("--reg-p must be positive".into());
        }
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return fail("--variance-threshold must lie in (0, 1]".into());
        }
        if self.proj_dim == Some(0) {
            return fail("--proj-dim must be positive".into());
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return fail("--trim-fraction must lie in [0, 0.5)".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail("--train-fraction must lie in (0, 1)".into());
        }
        if self.epochs == 0 || self.max_iter == 0 || self.n_init == 0 || self.repeats == 0 {
            return fail("--epochs, --max-iter, --n-init and --repeats must be positive".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return fail("--lambda must be positive".into());
        }
        if self.k == Some(0) {
            return fail("--k must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return fail("--noise-fraction must lie in [0, 1]".into());
        }
        if matches!(self.command, "featurize" | "visualize") && self.output.is_none() {
            return fail(format!("{} requires --output", self.command));
        }
        Ok(())
    }

    /// Feature configuration for an `n x m` dataset under seed `seed`.
    pub fn feature_config(&self, n: usize, m: usize, seed: u64) -> Result<FeatureConfig> {
        let landmarks = match self.landmarks {
            Some(l) => l,
            None => featurize::default_landmark_count(n)?,
        };
        let nearest = self
            .nearest
            .unwrap_or(if self.method == Method::RandLocal { 1 } else { 10 });
        let cfg = FeatureConfig {
            method: self.method,
            iterations: self.iterations,
            landmarks,
            nearest,
            k_eps: self.k_eps,
            reg_p: self.reg_p,
            variance_threshold: self.variance_threshold,
            normalize: self.normalize,
            projection_dim: self
                .proj_dim
                .unwrap_or_else(|| featurize::default_projection_dim(m)),
            trim_fraction: self.trim_fraction,
            seed,
            execution: self.execution,
        };
        cfg.validate(n, m)?;
        Ok(cfg)
    }

    fn train_params(&self, seed: u64) -> TrainParams {
        TrainParams {
            epochs: self.epochs,
            lambda: self.lambda,
            seed,
        }
    }

    fn method_key(&self) -> String {
        self.method.name().replace('-', "_")
    }
}

/// A failure tagged with the pipeline stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        self.source.exit_code()
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Ordered `metric<TAB>value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
    wall_time: Option<f64>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key).and_then(|v| v.parse().ok())
    }

    pub fn set_wall_time(&mut self, seconds: f64) {
        self.wall_time = Some(seconds);
    }

    /// Deterministic part of the report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}\t{v}");
        }
        s
    }

    /// Report including `wall_time_seconds`.
    pub fn to_text_with_timing(&self) -> String {
        let mut s = self.to_text();
        if let Some(t) = self.wall_time {
            let _ = writeln!(s, "wall_time_seconds\t{t:.3}");
        }
        s
    }
}

/// Write `bytes` to `path` via a sibling temporary file and rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("{} is not a file path", path.display())))?
        .to_string_lossy()
        .into_owned();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn load_input(cfg: &RunConfig) -> Result<Dataset> {
    let text = std::fs::read_to_string(&cfg.input).map_err(|e| Error::io(&cfg.input, e))?;
    let header = cfg.header.unwrap_or_else(|| dataset::detect_header(&text));
    let ds = dataset::parse_csv(&text, cfg.label_col.as_ref(), header)?;
    Ok(if cfg.standardize {
        dataset::normalize_global(&ds)
    } else {
        ds
    })
}

/// Run one parsed command; returns the report that was produced.
pub fn run(command: &Command) -> std::result::Result<Report, StageError> {
    let start = Instant::now();
    let cfg = RunConfig::resolve(command).stage("config")?;
    let mut report = match command {
        Command::Featurize(_) => cmd_featurize(&cfg)?,
        Command::Evaluate(_) => cmd_evaluate(&cfg)?,
        Command::NoiseEval(_) => cmd_noise_eval(&cfg)?,
        Command::Visualize(_) => cmd_visualize(&cfg)?,
    };
    report.set_wall_time(start.elapsed().as_secs_f64());
    if let Some(path) = cfg.report.as_ref().filter(|_| cfg.command == "featurize") {
        write_atomic(path, report.to_text().as_bytes()).stage("write report")?;
    }
    Ok(report)
}

pub fn cmd_featurize(cfg: &RunConfig) -> std::result::Result<Report, StageError> {
    let ds = load_input(cfg).stage("load")?;
    let fc = cfg
        .feature_config(ds.n_rows(), ds.n_cols(), cfg.seed)
        .stage("config")?;
    let f = featurize::featurize(ds.values(), &fc).stage("featurize")?;
    let out = cfg.output.as_ref().expect("checked in resolve");
    write_atomic(out, f.to_text().as_bytes()).stage("write features")?;
    let mut r = Report::default();
    r.push("method", fc.method);
    r.push("rows", f.n_rows());
    r.push("cols", f.n_cols());
    r.push("sparsity", featurize::sparsity(&f));
    r.push(
        "sparsity_ratio",
        featurize::sparsity_ratio(&f, fc.landmarks, fc.iterations),
    );
    Ok(r)
}

/// Metrics of one evaluation round on one dataset.
struct Round {
    raw: f64,
    method: f64,
    sparsity: usize,
    ratio: f64,
}

fn evaluate_round(cfg: &RunConfig, ds: &Dataset, seed: u64) -> std::result::Result<Round, StageError> {
    let labels = ds
        .labels()
        .ok_or_else(|| Error::data(format!("{} needs a label column (--label-col)", cfg.command)))
        .stage("load")?;
    let fc = cfg
        .feature_config(ds.n_rows(), ds.n_cols(), seed)
        .stage("config")?;
    let feats = featurize::featurize(ds.values(), &fc).stage("featurize")?;
    let (raw, method) = match cfg.task {
        Task::Classify => {
            let sp = dataset::split(ds.n_rows(), cfg.train_fraction, seed).stage("split")?;
            let raw = ds.values();
            (
                classify(&raw, labels, &sp, cfg, seed).stage("classify raw")?,
                classify(&feats, labels, &sp, cfg, seed).stage("classify features")?,
            )
        }
        Task::Cluster => {
            let k = cfg
                .k
                .or_else(|| ds.class_count())
                .expect("labels are present");
            let raw = ds.values();
            (
                cluster(&raw, labels, k, cfg, seed).stage("cluster raw")?,
                cluster(&feats, labels, k, cfg, seed).stage("cluster features")?,
            )
        }
    };
    Ok(Round {
        raw,
        method,
        sparsity: featurize::sparsity(&feats),
        ratio: featurize::sparsity_ratio(&feats, fc.landmarks, fc.iterations),
    })
}

fn classify<M: FeatureRows + ?Sized>(
    x: &M,
    labels: &[usize],
    sp: &dataset::SplitIndices,
    cfg: &RunConfig,
    seed: u64,
) -> Result<f64> {
    let model = eval::train_linear_classifier_on_rows(x, labels, &sp.train, &cfg.train_params(seed))?;
    eval::accuracy_on_rows(&model, x, labels, &sp.test)
}

fn cluster<M: FeatureRows + ?Sized>(
    x: &M,
    labels: &[usize],
    k: usize,
    cfg: &RunConfig,
    seed: u64,
) -> Result<f64> {
    let c = eval::kmeans_restarts(x, k, cfg.max_iter, cfg.n_init, seed)?;
    eval::nmi(&c.labels, labels)
}

fn repeat_seed(cfg: &RunConfig, r: usize) -> u64 {
    cfg.seed.wrapping_add(r as u64)
}

fn averaged_rounds(cfg: &RunConfig, ds: &Dataset) -> std::result::Result<Round, StageError> {
    let mut acc = Round {
        raw: 0.0,
        method: 0.0,
        sparsity: 0,
        ratio: 0.0,
    };
    for r in 0..cfg.repeats {
        let round = evaluate_round(cfg, ds, repeat_seed(cfg, r))?;
        acc.raw += round.raw;
        acc.method += round.method;
        acc.sparsity = round.sparsity;
        acc.ratio = round.ratio;
    }
    acc.raw /= cfg.repeats as f64;
    acc.method /= cfg.repeats as f64;
    Ok(acc)
}

fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Classify => "accuracy",
        Task::Cluster => "nmi",
    }
}

fn header_entries(cfg: &RunConfig, r: &mut Report) {
    r.push("method", cfg.method);
    r.push(
        "task",
        match cfg.task {
            Task::Classify => "classify",
            Task::Cluster => "cluster",
        },
    );
    r.push("repeats", cfg.repeats);
}

fn write_report_output(cfg: &RunConfig, r: &Report) -> std::result::Result<(), StageError> {
    if let Some(out) = &cfg.output {
        write_atomic(out, r.to_text().as_bytes()).stage("write report")?;
    }
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig) -> std::result::Result<Report, StageError> {
    let ds = load_input(cfg).stage("load")?;
    let round = averaged_rounds(cfg, &ds)?;
    let metric = metric_name(cfg.task);
    let mut r = Report::default();
    header_entries(cfg, &mut r);
    r.push(format!("{metric}_raw"), round.raw);
    r.push(format!("{metric}_{}", cfg.method_key()), round.method);
    r.push("sparsity", round.sparsity);
    r.push("sparsity_ratio", round.ratio);
    write_report_output(cfg, &r)?;
    Ok(r)
}

/// Corrupt `ds` along the configured axis; a zero fraction returns it unchanged.
pub fn corrupt(cfg: &RunConfig, ds: &Dataset) -> Result<Dataset> {
    if cfg.noise_fraction == 0.0 {
        return Ok(ds.clone());
    }
    let seed = seed::derive_seed(cfg.seed, STREAM_NOISE, 0);
    match cfg.noise_axis {
        NoiseAxis::Rows => dataset::add_row_noise(ds, cfg.noise_fraction, seed),
        NoiseAxis::Cols => dataset::add_column_noise(ds, cfg.noise_fraction, seed),
    }
}

pub fn cmd_noise_eval(cfg: &RunConfig) -> std::result::Result<Report, StageError> {
    let ds = load_input(cfg).stage("load")?;
    let noisy = corrupt(cfg, &ds).stage("noise")?;
    let clean = averaged_rounds(cfg, &ds)?;
    let dirty = averaged_rounds(cfg, &noisy)?;
    let metric = metric_name(cfg.task);
    let mk = cfg.method_key();
    let mut r = Report::default();
    header_entries(cfg, &mut r);
    r.push(
        "noise_axis",
        match cfg.noise_axis {
            NoiseAxis::Rows => "rows",
            NoiseAxis::Cols => "cols",
        },
    );
    r.push("noise_fraction", cfg.noise_fraction);
    r.push(format!("{metric}_raw_clean"), clean.raw);
    r.push(format!("{metric}_raw_noisy"), dirty.raw);
    r.push(format!("{metric}_{mk}_clean"), clean.method);
    r.push(format!("{metric}_{mk}_noisy"), dirty.method);
    r.push("delta_raw", clean.raw - dirty.raw);
    r.push(format!("delta_{mk}"), clean.method - dirty.method);
    write_report_output(cfg, &r)?;
    Ok(r)
}

pub fn cmd_visualize(cfg: &RunConfig) -> std::result::Result<Report, StageError> {
    let f = SparseFeatureMatrix::load(&cfg.input).stage("load")?;
    let img = pgm::render(&f).stage("render")?;
    let out = cfg.output.as_ref().expect("checked in resolve");
    write_atomic(out, &img.to_pgm_bytes()).stage("write image")?;
    let mut r = Report::default();
    r.push("width", img.width);
    r.push("height", img.height);
    r.push("sparsity", f.nnz());
    Ok(r)
}

/// Parse `argv`, run, print the report; returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(report) => {
            print!("{}", report.to_text_with_timing());
            0
        }
        Err(e) => {
            eprintln!("rulls {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
