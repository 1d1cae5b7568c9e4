//! Browser demo: Lasso paths, estimator spread of simple MC versus LMC, and
//! the effect of the `|x - 0.5|` feature transform on the Sobol function.
//!
//! Each export returns a JSON string; `www/index.html` draws it on canvas.
//! The plain-Rust functions behind the exports are public so they can be
//! tested natively.

use ndarray::{Array1, Array2};
use serde::Serialize;
use wasm_bindgen::prelude::*;

use lmc_core::estimators::{mc_mean, mc_variance};
use lmc_core::lasso::{self, FeatureTransform, LambdaStrategy, TrainConfig};
use lmc_core::lmc::{lmc_run, LmcConfig};
use lmc_core::problems::{LinearProblem, Problem, SobolProblem};
use lmc_core::sampling::{sample, sample_stream, Stream};
use lmc_core::surrogate::LassoTrainer;

#[derive(Debug, Serialize)]
pub struct LassoPath {
    pub lambda_max: f64,
    pub lambdas: Vec<f64>,
    pub nonzeros: Vec<usize>,
    /// `paths[k][i]`: weight `k` at `lambdas[i]`.
    pub paths: Vec<Vec<f64>>,
    pub cv_lambda: f64,
    pub alpha: Vec<f64>,
}

/// Regularisation path of a Lasso fit to `n` noisy samples of the linear
/// benchmark in dimension `d`.
pub fn lasso_path(n: usize, d: usize, noise: f64, seed: u64) -> lmc_core::Result<LassoPath> {
    let p = LinearProblem::standard(d);
    let x = sample(p.distribution(), n, seed)?.inputs;
    let e = sample_stream(&lmc_core::InputDistribution::standard_normal(1), n, seed, Stream::Reference)?.inputs;
    let y = p.eval_batch(x.view())? + &(e.column(0).to_owned() * noise);
    let cfg = TrainConfig {
        grid: lasso::LambdaGrid::Relative { len: 60, ratio: 1e-3 },
        cv_seed: seed,
        ..Default::default()
    };
    let models = lasso::fit_path(x.view(), y.view(), &cfg)?;
    let cv_lambda = lasso::select_lambda_cv(x.view(), y.view(), &cfg)?;
    let lambdas: Vec<f64> = models.iter().map(|m| m.lambda).collect();
    Ok(LassoPath {
        lambda_max: lambdas[0],
        nonzeros: models.iter().map(|m| m.nonzeros()).collect(),
        paths: (0..d).map(|k| models.iter().map(|m| m.beta[k]).collect()).collect(),
        lambdas,
        cv_lambda,
        alpha: p.alpha.to_vec(),
    })
}

#[derive(Debug, Serialize)]
pub struct Spread {
    pub true_mean: f64,
    pub true_variance: f64,
    pub mc_mean: Vec<f64>,
    pub mc_variance: Vec<f64>,
    pub lmc_mean: Vec<f64>,
    pub lmc_variance: Vec<f64>,
    /// Sample variance of each estimator across repeats.
    pub spread: [f64; 4],
}

fn problem(name: &str, d: usize) -> lmc_core::Result<Box<dyn Problem>> {
    match name {
        "linear" => Ok(Box::new(LinearProblem::standard(d))),
        "sobol" => Ok(Box::new(SobolProblem::standard(d))),
        other => Err(lmc_core::Error::Config(format!("unknown problem '{other}'"))),
    }
}

/// Repeat simple MC and LMC at budget `n` and collect their estimates.
pub fn estimator_spread(
    name: &str,
    d: usize,
    n: usize,
    m: usize,
    repeats: usize,
    abs_transform: bool,
    seed: u64,
) -> lmc_core::Result<Spread> {
    let p = problem(name, d)?;
    let cfg = LmcConfig {
        m,
        transform: if abs_transform {
            FeatureTransform::AbsShift(0.5)
        } else {
            FeatureTransform::Identity
        },
        ..Default::default()
    };
    let mut out = Spread {
        true_mean: p.reference().mean,
        true_variance: p.reference().variance,
        mc_mean: Vec::new(),
        mc_variance: Vec::new(),
        lmc_mean: Vec::new(),
        lmc_variance: Vec::new(),
        spread: [0.0; 4],
    };
    for r in 0..repeats as u64 {
        let res = lmc_run(p.as_ref(), n, &cfg, seed + r)?;
        out.mc_mean.push(res.mc_mean);
        out.mc_variance.push(res.mc_variance);
        out.lmc_mean.push(res.mean);
        out.lmc_variance.push(res.variance);
    }
    let var = |v: &Vec<f64>| mc_variance(Array1::from(v.clone()).view()).unwrap_or(f64::NAN);
    out.spread = [var(&out.mc_mean), var(&out.lmc_mean), var(&out.mc_variance), var(&out.lmc_variance)];
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct SobolSlice {
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub identity: Vec<f64>,
    pub transformed: Vec<f64>,
    pub identity_nonzeros: usize,
    pub transformed_nonzeros: usize,
}

/// Sobol function and two Lasso surrogates (raw and `|x - 0.5|` features)
/// along coordinate `coord`. The other coordinates sit at 0.25, where
/// `|x - 0.5|` takes its mean value.
pub fn sobol_slice(d: usize, n: usize, coord: usize, points: usize, seed: u64) -> lmc_core::Result<SobolSlice> {
    if coord >= d || points < 2 {
        return Err(lmc_core::Error::Config("coordinate out of range or too few points".into()));
    }
    let p = SobolProblem::standard(d);
    let x = sample(p.distribution(), n, seed)?.inputs;
    let y = p.eval_batch(x.view())?;
    let fit = |t| {
        LassoTrainer {
            strategy: LambdaStrategy::CrossValidation { folds: 5 },
            transform: t,
            config: TrainConfig {
                cv_seed: seed,
                ..Default::default()
            },
        }
        .fit(x.view(), y.view())
    };
    let raw = fit(FeatureTransform::Identity)?;
    let abs = fit(FeatureTransform::AbsShift(0.5))?;
    let grid: Vec<f64> = (0..points).map(|i| i as f64 / (points - 1) as f64).collect();
    let mut xs = Array2::from_elem((points, d), 0.25);
    for (i, g) in grid.iter().enumerate() {
        xs[[i, coord]] = *g;
    }
    Ok(SobolSlice {
        truth: p.eval_batch(xs.view())?.to_vec(),
        identity: raw.predict(xs.view())?.to_vec(),
        transformed: abs.predict(xs.view())?.to_vec(),
        identity_nonzeros: raw.nonzeros(),
        transformed_nonzeros: abs.nonzeros(),
        grid,
    })
}

/// Mean and sample variance of a slice, for the page's summary line.
pub fn summary(v: &[f64]) -> (f64, f64) {
    let a = ndarray::ArrayView1::from(v);
    (mc_mean(a).unwrap_or(f64::NAN), mc_variance(a).unwrap_or(f64::NAN))
}

fn to_js<T: Serialize>(r: lmc_core::Result<T>) -> Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = lassoPath)]
pub fn lasso_path_js(n: usize, d: usize, noise: f64, seed: u32) -> Result<String, JsValue> {
    to_js(lasso_path(n, d, noise, seed as u64))
}

#[wasm_bindgen(js_name = estimatorSpread)]
pub fn estimator_spread_js(
    name: &str,
    d: usize,
    n: usize,
    m: usize,
    repeats: usize,
    abs_transform: bool,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(estimator_spread(name, d, n, m, repeats, abs_transform, seed as u64))
}

#[wasm_bindgen(js_name = sobolSlice)]
pub fn sobol_slice_js(d: usize, n: usize, coord: usize, points: usize, seed: u32) -> Result<String, JsValue> {
    to_js(sobol_slice(d, n, coord, points, seed as u64))
}
