//! `uq`: convergence studies of Monte Carlo, multifidelity and Lasso Monte
//! Carlo estimators on the benchmark problems.
//!
//!   uq bench linear --methods mc,lmc --budgets 50,100,200 --repeats 20 --out results.csv
//!   uq reference --samples 100000 --out crates/core/fixtures/fput_reference.txt
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lmc_core::harness::{
    apply_config_text, generate_reference, run_experiment, summarize, write_csv, write_json, write_summary_csv,
    ExperimentConfig, Method, ProblemKind, ProblemSpec,
};
use lmc_core::Error;

#[derive(Parser)]
#[command(name = "uq", version, about = "Lasso Monte Carlo uncertainty quantification benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run a convergence study and write one CSV row per (method, N, repeat).
    Bench(BenchArgs),
    /// Estimate reference moments with a large seeded Monte Carlo run.
    Reference(ReferenceArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// linear, sobol or fput (may also come from the config file)
    problem: Option<String>,
    /// Comma-separated: mc, lasso, lmc, static-mfmc, adaptive-mfmc, biased-mfmc, pce
    #[arg(long)]
    methods: Option<String>,
    /// Ascending comma-separated budgets N
    #[arg(long)]
    budgets: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    /// Number of LMC folds S
    #[arg(long = "s-folds")]
    s_folds: Option<String>,
    /// Surrogate-only sample size M
    #[arg(long = "big-m")]
    big_m: Option<String>,
    /// Base seed; repeat r uses seed + r
    #[arg(long)]
    seed: Option<String>,
    /// Input dimension (linear, sobol) or oscillator count (fput)
    #[arg(long)]
    dim: Option<String>,
    /// identity or abs:SHIFT
    #[arg(long)]
    transform: Option<String>,
    /// cv, cv:K, sparsity:FRACTION or fixed:LAMBDA
    #[arg(long)]
    lambda: Option<String>,
    /// Training fraction of static MFMC
    #[arg(long = "split-fraction")]
    split_fraction: Option<String>,
    /// Candidate training fractions of adaptive MFMC
    #[arg(long)]
    candidates: Option<String>,
    #[arg(long = "pce-degree")]
    pce_degree: Option<String>,
    /// FPUT integrator relative tolerance
    #[arg(long)]
    rtol: Option<String>,
    /// FPUT integrator absolute tolerance
    #[arg(long)]
    atol: Option<String>,
    /// Flat `key = value` file with the same keys as the flags; flags win
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Also write per-(method, N) summary statistics to this CSV
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Record wall-clock times (outputs are then no longer reproducible)
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long, default_value = "fput")]
    problem: String,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))
}

fn config_lines(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split('#').next())
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Round budgets down to multiples of `s`, dropping zeros and duplicates
/// created by the rounding. Ordering mistakes are left for validation.
fn round_budgets(budgets: &[usize], s: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for &n in budgets {
        let r = n / s * s;
        if r != n {
            log::warn!("budget {n} is not a multiple of S = {s}; using N = {r}");
        }
        if r > 0 && out.last() != Some(&r) {
            out.push(r);
        }
    }
    out
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    let file = match &a.config {
        Some(p) => read_text(p)?,
        None => String::new(),
    };
    let file_problem = config_lines(&file).into_iter().find(|(k, _)| k == "problem").map(|(_, v)| v);
    let problem = a
        .problem
        .clone()
        .or(file_problem)
        .ok_or_else(|| Failure::Config("no problem given (linear, sobol or fput)".into()))?;
    let kind: ProblemKind = problem.parse()?;
    let mut cfg = ExperimentConfig::for_problem(kind);
    let mut out = PathBuf::from("results.csv");
    let mut json = None;
    let mut summary = None;
    let mut timing = a.timing;
    for (k, v) in apply_config_text(&mut cfg, &file)? {
        match k.as_str() {
            "out" => out = PathBuf::from(v),
            "json" => json = Some(PathBuf::from(v)),
            "summary" => summary = Some(PathBuf::from(v)),
            "timing" => timing |= matches!(v.as_str(), "true" | "1" | "yes"),
            _ => return Err(Failure::Config(format!("unknown config key '{k}'"))),
        }
    }
    cfg.apply("problem", &problem)?;
    let flags = [
        ("methods", &a.methods),
        ("budgets", &a.budgets),
        ("repeats", &a.repeats),
        ("s-folds", &a.s_folds),
        ("big-m", &a.big_m),
        ("seed", &a.seed),
        ("dim", &a.dim),
        ("transform", &a.transform),
        ("lambda", &a.lambda),
        ("split-fraction", &a.split_fraction),
        ("candidates", &a.candidates),
        ("pce-degree", &a.pce_degree),
        ("rtol", &a.rtol),
        ("atol", &a.atol),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.apply(k, v)?;
        }
    }
    out = a.out.unwrap_or(out);
    json = a.json.or(json);
    summary = a.summary.or(summary);

    if cfg.methods.contains(&Method::Lmc) && cfg.folds > 0 {
        cfg.budgets = round_budgets(&cfg.budgets, cfg.folds);
    }
    cfg.validate()?;
    let problem = cfg.problem.build()?;
    let reference = cfg.reference.clone().unwrap_or_else(|| problem.reference());
    log::info!(
        "{}: methods {:?}, budgets {:?}, {} repeats",
        problem.id(),
        cfg.methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
        cfg.budgets,
        cfg.repeats
    );
    let records = run_experiment(&cfg, timing)?;
    write_csv(&records, &out)?;
    if let Some(p) = json {
        write_json(&records, &p)?;
    }
    if let Some(p) = summary {
        write_summary_csv(&summarize(&records, &reference), &p)?;
    }
    eprintln!("wrote {} records to {}", records.len(), out.display());
    Ok(())
}

fn reference(a: ReferenceArgs) -> Result<(), Failure> {
    let kind: ProblemKind = a.problem.parse()?;
    let mut spec = ProblemSpec::standard(kind);
    if let Some(d) = a.dim {
        spec.dim = d;
    }
    let problem = spec.build()?;
    let r = generate_reference(problem.as_ref(), a.samples, a.seed)?;
    let text = r.to_fixture(&problem.id());
    match a.out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bench(a) => bench(a),
        Command::Reference(a) => reference(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
