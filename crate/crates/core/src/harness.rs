//! Convergence studies: every method over a ladder of budgets with repeated
//! seeds, scored with relative errors against reference moments.
//!
//! Repeat `r` uses seed `base_seed + r` for every method and budget, so all
//! methods at the same `(N, r)` see the same design points.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    adaptive_mfmc, biased_mfmc, design, mc_mean, mc_variance, simple_mc, static_mfmc, surrogate_only, EstimateResult,
};
use crate::lasso::{FeatureTransform, LambdaStrategy, TrainConfig};
use crate::lmc::{lmc_run_with, LmcConfig};
use crate::pce::{pce_fit, pce_moments, PceBasis};
use crate::problems::{FputProblem, LinearProblem, Problem, ReferenceMoments, ReferenceSource, SobolProblem};
use crate::sampling::{sample_stream, Stream};
use crate::surrogate::LassoTrainer;

/// Frozen reference moments for the default FPUT configuration.
pub const FPUT_REFERENCE_FIXTURE: &str = include_str!("../fixtures/fput_reference.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Mc,
    Lasso,
    Lmc,
    StaticMfmc,
    AdaptiveMfmc,
    BiasedMfmc,
    Pce,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Mc,
        Method::Lasso,
        Method::Lmc,
        Method::StaticMfmc,
        Method::AdaptiveMfmc,
        Method::BiasedMfmc,
        Method::Pce,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Lasso => "lasso",
            Method::Lmc => "lmc",
            Method::StaticMfmc => "static-mfmc",
            Method::AdaptiveMfmc => "adaptive-mfmc",
            Method::BiasedMfmc => "biased-mfmc",
            Method::Pce => "pce",
        }
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
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let key = key.as_str();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .or(match key {
                "lasso-surrogate" => Some(Method::Lasso),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    Linear,
    Sobol,
    Fput,
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(ProblemKind::Linear),
            "sobol" => Ok(ProblemKind::Sobol),
            "fput" => Ok(ProblemKind::Fput),
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

/// Which benchmark to run and its size.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Input dimension for linear/Sobol, oscillator count for FPUT.
    pub dim: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl ProblemSpec {
    pub fn standard(kind: ProblemKind) -> Self {
        ProblemSpec {
            kind,
            dim: match kind {
                ProblemKind::Linear | ProblemKind::Sobol => 400,
                ProblemKind::Fput => 40,
            },
            rtol: 1e-6,
            atol: 1e-9,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Problem>> {
        Ok(match self.kind {
            ProblemKind::Linear => Arc::new(LinearProblem::new(crate::problems::benchmark_alpha(self.dim))?),
            ProblemKind::Sobol => Arc::new(SobolProblem::new(crate::problems::benchmark_coefficients(self.dim))?),
            ProblemKind::Fput => {
                let p = FputProblem::new(self.dim, 500.0)?.with_tolerances(self.rtol, self.atol);
                Arc::new(match fput_fixture_for(&p)? {
                    Some(r) => p.with_reference(r),
                    None => p,
                })
            }
        })
    }
}

/// The frozen FPUT reference, if it was generated for this exact setup.
pub fn fput_fixture_for(p: &FputProblem) -> Result<Option<ReferenceMoments>> {
    let (id, r) = ReferenceMoments::from_fixture(FPUT_REFERENCE_FIXTURE)?;
    let default = FputProblem::standard();
    let same = id == p.id()
        && p.t_final == default.t_final
        && p.options.rtol == default.options.rtol
        && p.options.atol == default.options.atol;
    Ok((same && r.is_known()).then_some(r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    pub repeats: usize,
    pub folds: usize,
    pub m: usize,
    pub strategy: LambdaStrategy,
    pub transform: FeatureTransform,
    pub split_fraction: f64,
    pub candidate_fractions: Vec<f64>,
    pub pce_degree: usize,
    pub base_seed: u64,
    pub train: TrainConfig,
    /// Overrides the problem's own reference moments.
    pub reference: Option<ReferenceMoments>,
}

impl ExperimentConfig {
    /// Default settings of each benchmark study.
    pub fn for_problem(kind: ProblemKind) -> Self {
        let (m, strategy) = match kind {
            ProblemKind::Linear => (100_000, LambdaStrategy::SparsityTarget { fraction: 0.95 }),
            _ => (10_000, LambdaStrategy::CrossValidation { folds: 5 }),
        };
        ExperimentConfig {
            problem: ProblemSpec::standard(kind),
            methods: vec![Method::Mc, Method::Lmc],
            budgets: vec![50, 100, 200, 500, 1000],
            repeats: 20,
            folds: 5,
            m,
            strategy,
            transform: FeatureTransform::Identity,
            split_fraction: 0.8,
            candidate_fractions: (1..=9).map(|i| i as f64 / 10.0).collect(),
            pce_degree: 2,
            base_seed: 42,
            train: TrainConfig::default(),
            reference: None,
        }
    }

    /// Set one option from its textual form; keys match the CLI flags.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        match key.as_str() {
            "problem" => {
                let kind: ProblemKind = v.parse()?;
                if kind != self.problem.kind {
                    let dim_default = ProblemSpec::standard(self.problem.kind).dim;
                    let keep_dim = self.problem.dim != dim_default;
                    let dim = self.problem.dim;
                    self.problem = ProblemSpec {
                        kind,
                        ..self.problem.clone()
                    };
                    self.problem.dim = if keep_dim { dim } else { ProblemSpec::standard(kind).dim };
                }
            }
            "methods" => self.methods = parse_list(v, |s| s.parse())?,
            "budgets" => self.budgets = parse_list(v, |s| parse_num(&key, s))?,
            "repeats" => self.repeats = parse_num(&key, v)?,
            "s-folds" | "folds" => self.folds = parse_num(&key, v)?,
            "big-m" | "m" => self.m = parse_num(&key, v)?,
            "seed" => self.base_seed = parse_num(&key, v)?,
            "dim" => self.problem.dim = parse_num(&key, v)?,
            "rtol" => self.problem.rtol = parse_num(&key, v)?,
            "atol" => self.problem.atol = parse_num(&key, v)?,
            "split-fraction" => self.split_fraction = parse_num(&key, v)?,
            "candidates" => self.candidate_fractions = parse_list(v, |s| parse_num(&key, s))?,
            "pce-degree" => self.pce_degree = parse_num(&key, v)?,
            "lambda" => self.strategy = parse_strategy(v)?,
            "transform" => self.transform = parse_transform(v)?,
            _ => return Err(Error::Config(format!("unknown option '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        if self.budgets.is_empty() {
            return Err(Error::Config("no budgets given".into()));
        }
        if self.budgets.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("budgets must be strictly ascending".into()));
        }
        if self.repeats < 2 {
            return Err(Error::Config("at least 2 repeats are needed".into()));
        }
        if self.methods.contains(&Method::Lmc) {
            let bad: Vec<String> = self
                .budgets
                .iter()
                .filter(|n| self.folds == 0 || *n % self.folds != 0)
                .map(|n| n.to_string())
                .collect();
            if !bad.is_empty() {
                return Err(Error::param(format!(
                    "budgets not divisible by S = {}: {}",
                    self.folds,
                    bad.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn trainer(&self, seed: u64) -> LassoTrainer {
        LassoTrainer {
            strategy: self.strategy,
            transform: self.transform,
            config: TrainConfig {
                cv_seed: seed,
                ..self.train.clone()
            },
        }
    }

    fn lmc_config(&self) -> LmcConfig {
        LmcConfig {
            folds: self.folds,
            m: self.m,
            strategy: self.strategy,
            transform: self.transform,
            train: self.train.clone(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| f(s.trim())).collect()
}

/// `cv`, `cv:K`, `sparsity:F`, or `fixed:L`.
pub fn parse_strategy(v: &str) -> Result<LambdaStrategy> {
    let (head, arg) = match v.split_once(':') {
        Some((h, a)) => (h.trim(), Some(a.trim())),
        None => (v.trim(), None),
    };
    match (head, arg) {
        ("cv", None) => Ok(LambdaStrategy::CrossValidation { folds: 5 }),
        ("cv", Some(a)) => Ok(LambdaStrategy::CrossValidation {
            folds: parse_num("lambda", a)?,
        }),
        ("sparsity", Some(a)) => Ok(LambdaStrategy::SparsityTarget {
            fraction: parse_num("lambda", a)?,
        }),
        ("fixed", Some(a)) => Ok(LambdaStrategy::Fixed(parse_num("lambda", a)?)),
        _ => Err(Error::Config(format!(
            "bad lambda strategy '{v}' (expected cv, cv:K, sparsity:F or fixed:L)"
        ))),
    }
}

/// `identity` or `abs:SHIFT`.
pub fn parse_transform(v: &str) -> Result<FeatureTransform> {
    match v.trim().split_once(':') {
        None if v.trim() == "identity" => Ok(FeatureTransform::Identity),
        Some(("abs", a)) => Ok(FeatureTransform::AbsShift(parse_num("transform", a)?)),
        _ => Err(Error::Config(format!("bad transform '{v}' (expected identity or abs:SHIFT)"))),
    }
}

/// Parse flat `key = value` lines (`#` starts a comment) onto `cfg`.
pub fn apply_config_text(cfg: &mut ExperimentConfig, text: &str) -> Result<Vec<(String, String)>> {
    let mut unused = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected 'key = value', got '{line}'")))?;
        match cfg.apply(k, v) {
            Ok(()) => {}
            Err(Error::Config(msg)) if msg.starts_with("unknown option") => {
                unused.push((k.trim().to_string(), v.trim().to_string()));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(unused)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub problem: String,
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub repeat_index: usize,
    pub mean_est: f64,
    pub var_est: f64,
    pub rel_err_mean: f64,
    pub rel_err_std: f64,
    pub chosen_n: Option<usize>,
    pub wall_time_ms: f64,
}

impl ConvergenceRecord {
    pub const HEADER: [&'static str; 10] = [
        "problem",
        "method",
        "N",
        "repeat_index",
        "mean_est",
        "var_est",
        "rel_err_mean",
        "rel_err_std",
        "chosen_n",
        "wall_time_ms",
    ];
}

/// `|mu_hat - mu| / |mu|`, or the absolute error when `mu == 0`.
pub fn rel_err_mean(est: f64, truth: f64) -> f64 {
    let e = (est - truth).abs();
    if truth == 0.0 {
        e
    } else {
        e / truth.abs()
    }
}

/// `|sqrt(max(var_hat, 0)) - sigma| / sigma`, absolute when `sigma == 0`.
pub fn rel_err_std(var_est: f64, var_truth: f64) -> f64 {
    let sd = var_truth.max(0.0).sqrt();
    let e = (var_est.max(0.0).sqrt() - sd).abs();
    if sd == 0.0 {
        e
    } else {
        e / sd
    }
}

/// Run one method once.
pub fn run_method(
    cfg: &ExperimentConfig,
    problem: &dyn Problem,
    method: Method,
    n: usize,
    seed: u64,
) -> Result<EstimateResult> {
    let trainer = cfg.trainer(seed);
    match method {
        Method::Mc => simple_mc(problem, n, seed),
        Method::Lasso => surrogate_only(problem, n, cfg.m, &trainer, seed),
        Method::StaticMfmc => static_mfmc(problem, n, cfg.split_fraction, cfg.m, &trainer, seed),
        Method::AdaptiveMfmc => adaptive_mfmc(problem, n, &cfg.candidate_fractions, cfg.m, &trainer, seed),
        Method::BiasedMfmc => biased_mfmc(problem, n, cfg.m, &trainer, seed),
        Method::Lmc => {
            let r = lmc_run_with(problem, n, &cfg.lmc_config(), &trainer, seed)?;
            Ok(EstimateResult {
                mean: r.mean,
                variance: r.variance,
                budget_n: n,
                surrogate_eval_m: r.m,
                chosen_n: Some(n - n / cfg.folds),
                chosen_n_var: None,
                est_mse_mean: None,
                est_mse_var: None,
                negative_variance: r.negative_variance,
            })
        }
        Method::Pce => {
            let basis = PceBasis::for_distribution(problem.distribution(), cfg.pce_degree)?;
            let (v, y) = design(problem, n, seed)?;
            let model = pce_fit(v.view(), y.view(), &basis, cfg.strategy, &trainer.config)?;
            let (mean, variance) = pce_moments(&model);
            Ok(EstimateResult {
                mean,
                variance,
                budget_n: n,
                surrogate_eval_m: 0,
                chosen_n: Some(n),
                chosen_n_var: None,
                est_mse_mean: None,
                est_mse_var: None,
                negative_variance: false,
            })
        }
    }
}

/// Run every `(method, N, repeat)` cell of the configured grid.
///
/// Records are sorted by method, `N` and repeat before returning, so the
/// result does not depend on scheduling. `wall_time_ms` is only filled in
/// when `timing` is set (timings would break byte-identical reruns).
pub fn run_experiment(cfg: &ExperimentConfig, timing: bool) -> Result<Vec<ConvergenceRecord>> {
    let problem = cfg.problem.build()?;
    run_experiment_on(cfg, problem.as_ref(), timing)
}

pub fn run_experiment_on(cfg: &ExperimentConfig, problem: &dyn Problem, timing: bool) -> Result<Vec<ConvergenceRecord>> {
    cfg.validate()?;
    let reference = cfg.reference.clone().unwrap_or_else(|| problem.reference());
    if !reference.is_known() {
        return Err(Error::Config(format!(
            "no reference moments for '{}'; generate them with `uq reference`",
            problem.id()
        )));
    }
    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &n in &cfg.budgets {
            for r in 0..cfg.repeats {
                cells.push((method, n, r));
            }
        }
    }
    let id = problem.id();
    let run = |&(method, n, r): &(Method, usize, usize)| -> Result<ConvergenceRecord> {
        let seed = cfg.base_seed.wrapping_add(r as u64);
        let start = Instant::now();
        let est = run_method(cfg, problem, method, n, seed)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        log::debug!("{id} {method} N={n} r={r}: mean {} var {}", est.mean, est.variance);
        Ok(ConvergenceRecord {
            problem: id.clone(),
            method: method.name().to_string(),
            n,
            repeat_index: r,
            mean_est: est.mean,
            var_est: est.variance,
            rel_err_mean: rel_err_mean(est.mean, reference.mean),
            rel_err_std: rel_err_std(est.variance, reference.variance),
            chosen_n: est.chosen_n,
            wall_time_ms: if timing { ms } else { 0.0 },
        })
    };
    #[cfg(feature = "parallel")]
    let mut records: Vec<ConvergenceRecord> = {
        use rayon::prelude::*;
        cells.par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let mut records: Vec<ConvergenceRecord> = cells.iter().map(run).collect::<Result<_>>()?;
    records.sort_by(|a, b| {
        (a.problem.as_str(), a.method.as_str(), a.n, a.repeat_index).cmp(&(
            b.problem.as_str(),
            b.method.as_str(),
            b.n,
            b.repeat_index,
        ))
    });
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub problem: String,
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub repeats: usize,
    pub rel_err_mean_avg: f64,
    pub rel_err_mean_sd: f64,
    pub rel_err_std_avg: f64,
    pub rel_err_std_sd: f64,
    pub mean_est_avg: f64,
    pub mean_est_sd: f64,
    pub var_est_avg: f64,
    pub var_est_sd: f64,
    pub mse_mean: f64,
    pub mse_var: f64,
    /// `rel_err_mean` holds absolute errors because the reference mean is 0.
    pub mean_err_absolute: bool,
}

impl SummaryRow {
    pub const HEADER: [&'static str; 15] = [
        "problem",
        "method",
        "N",
        "repeats",
        "rel_err_mean_avg",
        "rel_err_mean_sd",
        "rel_err_std_avg",
        "rel_err_std_sd",
        "mean_est_avg",
        "mean_est_sd",
        "var_est_avg",
        "var_est_sd",
        "mse_mean",
        "mse_var",
        "mean_err_absolute",
    ];
}

fn avg_sd(v: &[f64]) -> (f64, f64) {
    let a = ndarray::ArrayView1::from(v);
    (mc_mean(a).unwrap_or(f64::NAN), mc_variance(a).map(f64::sqrt).unwrap_or(f64::NAN))
}

/// Group by `(problem, method, N)`: mean and standard deviation (divisor
/// `n - 1`) of errors and estimates, and the empirical MSE of the raw
/// estimates against the reference. Groups with fewer than 2 records are
/// skipped.
pub fn summarize(records: &[ConvergenceRecord], reference: &ReferenceMoments) -> Vec<SummaryRow> {
    let mut groups: std::collections::BTreeMap<(String, String, usize), Vec<&ConvergenceRecord>> = Default::default();
    for r in records {
        groups.entry((r.problem.clone(), r.method.clone(), r.n)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((problem, method, n), rows) in groups {
        if rows.len() < 2 {
            log::warn!("skipping {problem}/{method}/N={n}: {} record(s)", rows.len());
            continue;
        }
        let col = |f: fn(&ConvergenceRecord) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let (rem_a, rem_s) = avg_sd(&col(|r| r.rel_err_mean));
        let (res_a, res_s) = avg_sd(&col(|r| r.rel_err_std));
        let means = col(|r| r.mean_est);
        let vars = col(|r| r.var_est);
        let (mean_a, mean_s) = avg_sd(&means);
        let (var_a, var_s) = avg_sd(&vars);
        let k = rows.len() as f64;
        out.push(SummaryRow {
            problem,
            method,
            n,
            repeats: rows.len(),
            rel_err_mean_avg: rem_a,
            rel_err_mean_sd: rem_s,
            rel_err_std_avg: res_a,
            rel_err_std_sd: res_s,
            mean_est_avg: mean_a,
            mean_est_sd: mean_s,
            var_est_avg: var_a,
            var_est_sd: var_s,
            mse_mean: means.iter().map(|m| (m - reference.mean).powi(2)).sum::<f64>() / k,
            mse_var: vars.iter().map(|v| (v - reference.variance).powi(2)).sum::<f64>() / k,
            mean_err_absolute: reference.mean == 0.0,
        });
    }
    out
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.display().to_string(),
                source,
            },
            _ => unreachable!(),
        }
    } else {
        Error::Csv(e)
    }
}

/// Write rows under a fixed header; an empty slice gives a header-only file.
pub fn write_csv_rows<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

pub fn write_csv(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    write_csv_rows(records, &ConvergenceRecord::HEADER, path)
}

pub fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_csv_rows(rows, &SummaryRow::HEADER, path)
}

pub fn read_csv(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ConvergenceRecord::HEADER {
        return Err(Error::Config(format!(
            "{} does not have the expected header {}",
            path.display(),
            ConvergenceRecord::HEADER.join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

/// JSON array of objects with the same keys as the CSV columns.
pub fn write_json<T: Serialize>(rows: &[T], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, rows)?;
    std::io::Write::write_all(&mut w, b"\n").map_err(io_err(path))?;
    Ok(())
}

/// Large-sample reference moments on the reference stream of `seed`.
pub fn generate_reference(problem: &dyn Problem, samples: usize, seed: u64) -> Result<ReferenceMoments> {
    if samples < 2 {
        return Err(Error::param("reference needs at least 2 samples"));
    }
    let x = sample_stream(problem.distribution(), samples, seed, Stream::Reference)?.inputs;
    let chunk = 1000;
    let mut y = Vec::with_capacity(samples);
    let start = Instant::now();
    for (i, block) in x.axis_chunks_iter(ndarray::Axis(0), chunk).enumerate() {
        y.extend(problem.eval_batch(block)?);
        log::info!(
            "reference {}: {}/{samples} after {:.0}s",
            problem.id(),
            ((i + 1) * chunk).min(samples),
            start.elapsed().as_secs_f64()
        );
    }
    let y = ndarray::Array1::from(y);
    Ok(ReferenceMoments {
        mean: mc_mean(y.view())?,
        variance: mc_variance(y.view())?,
        source: ReferenceSource::LargeMonteCarlo { samples, seed },
    })
}
