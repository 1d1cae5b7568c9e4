//! Lasso regression by cyclic coordinate descent.
//!
//! The loss is `0.5 * sum_i (y_i - beta . x_i)^2 + lambda * ||beta||_1` on
//! centred data, with no `1/n` scaling, so `lambda_max = max_k |x_k . y|`.
//! Inputs are centred but not standardised.
//!
//! The solver works on the Gram matrix `X^T X` and keeps the correlation
//! vector `c = X^T (y - X beta)` up to date ("covariance updates"). After
//! every full sweep it cycles over the active set until that settles, then
//! confirms with another full sweep. It stops once the largest absolute
//! weight change of a full sweep drops below
//! `tol * (1 + max_i |y_i|)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{rng_for, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum FeatureTransform {
    #[default]
    Identity,
    /// `x_k -> |x_k - shift|`, element-wise.
    AbsShift(f64),
}

impl FeatureTransform {
    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        match *self {
            FeatureTransform::Identity => x.to_owned(),
            FeatureTransform::AbsShift(shift) => x.mapv(|v| (v - shift).abs()),
        }
    }

    pub fn apply_vec(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match *self {
            FeatureTransform::Identity => x.to_owned(),
            FeatureTransform::AbsShift(shift) => x.mapv(|v| (v - shift).abs()),
        }
    }
}

/// How the candidate regularisation values are laid out.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    /// `len` log-spaced values from `lambda_max` down to `ratio * lambda_max`.
    Relative { len: usize, ratio: f64 },
    /// A fixed, strictly descending list.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Relative stopping threshold. A sweep converges when no weight moves
    /// the fitted values by more than `tol * (1 + ||y||_inf)` in RMS, i.e.
    /// `|delta beta_k| * rms(x_k) <= tol * (1 + ||y||_inf)` for all `k`.
    pub tol: f64,
    /// Maximum number of coordinate sweeps (full or active-set).
    pub max_iter: usize,
    /// Fail with [`Error::Convergence`] when `max_iter` is reached. Otherwise
    /// the last iterate is kept and a warning is logged.
    pub strict: bool,
    pub grid: LambdaGrid,
    pub cv_folds: usize,
    /// Seed of the cross-validation shuffle.
    pub cv_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tol: 1e-8,
            max_iter: 100_000,
            strict: false,
            grid: LambdaGrid::Relative {
                len: 100,
                ratio: 1e-4,
            },
            cv_folds: 5,
            cv_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::param(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter must be positive"));
        }
        if self.cv_folds < 2 {
            return Err(Error::param("cv_folds must be at least 2"));
        }
        match &self.grid {
            LambdaGrid::Relative { len, ratio } => {
                if *len == 0 {
                    return Err(Error::param("lambda grid is empty"));
                }
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::param(format!("grid ratio must be in (0, 1), got {ratio}")));
                }
            }
            LambdaGrid::Explicit(g) => {
                if g.is_empty() {
                    return Err(Error::param("lambda grid is empty"));
                }
                if g.iter().any(|l| !(*l > 0.0)) || g.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::param(
                        "explicit lambda grid must be positive and strictly descending",
                    ));
                }
            }
        }
        Ok(())
    }

    /// The candidate values for a dataset whose `lambda_max` is given.
    pub fn lambda_grid(&self, lambda_max: f64) -> Vec<f64> {
        match &self.grid {
            LambdaGrid::Relative { len, ratio } => {
                if *len == 1 {
                    return vec![lambda_max];
                }
                let step = ratio.ln() / (*len - 1) as f64;
                (0..*len)
                    .map(|i| lambda_max * (step * i as f64).exp())
                    .collect()
            }
            LambdaGrid::Explicit(g) => g.clone(),
        }
    }
}

/// How a surrogate picks its regularisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LambdaStrategy {
    /// k-fold cross-validation over the grid.
    CrossValidation { folds: usize },
    /// At most `floor(fraction * n_train)` nonzero weights.
    SparsityTarget { fraction: f64 },
    Fixed(f64),
}

impl Default for LambdaStrategy {
    fn default() -> Self {
        LambdaStrategy::CrossValidation { folds: 5 }
    }
}

/// A trained affine model `s(x) = beta . (zeta(x) - input_offsets) + output_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub beta: Array1<f64>,
    pub lambda: f64,
    pub input_offsets: Array1<f64>,
    pub output_offset: f64,
    pub transform: FeatureTransform,
    /// Coordinate sweeps used by the solver.
    pub sweeps: usize,
}

impl LassoModel {
    /// The constant model `s(x) = c` in dimension `d`.
    pub fn constant(d: usize, c: f64) -> Self {
        LassoModel {
            beta: Array1::zeros(d),
            lambda: 0.0,
            input_offsets: Array1::zeros(d),
            output_offset: c,
            transform: FeatureTransform::Identity,
            sweeps: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    pub fn nonzeros(&self) -> usize {
        self.beta.iter().filter(|b| **b != 0.0).count()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::shape(format!(
                "model expects {} columns, got {}",
                self.dim(),
                x.ncols()
            )));
        }
        let z = self.transform.apply(x);
        let shift = self.output_offset - self.beta.dot(&self.input_offsets);
        Ok(z.dot(&self.beta) + shift)
    }
}

/// `max_k |sum_i x_ik y_i|` for already-centred data.
pub fn lambda_max(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<f64> {
    check_rows(x, y)?;
    Ok(x.t().dot(&y).iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

fn check_rows(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::shape(format!(
            "{} input rows but {} outputs",
            x.nrows(),
            y.len()
        )));
    }
    Ok(())
}

/// Centred least-squares data in Gram form.
pub(crate) struct Gram {
    xtx: Array2<f64>,
    xty: Array1<f64>,
    yty: f64,
    degenerate: Vec<bool>,
    /// RMS of each centred column; converts weight changes to output units.
    col_rms: Vec<f64>,
    input_offsets: Array1<f64>,
    output_offset: f64,
    lambda_max: f64,
    tol: f64,
    strict: bool,
}

impl Gram {
    /// Centre `x` (already transformed) and `y`, then form `X^T X`, `X^T y`.
    pub(crate) fn new(x: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &TrainConfig) -> Result<Self> {
        check_rows(x, y)?;
        if x.nrows() < 2 {
            return Err(Error::Degenerate("Lasso fit needs at least two rows".into()));
        }
        if x.ncols() == 0 {
            return Err(Error::shape("no input columns"));
        }
        let input_offsets = x.mean_axis(Axis(0)).expect("non-empty");
        let output_offset = y.mean().expect("non-empty");
        let mut xc = &x - &input_offsets.view().insert_axis(Axis(0));
        let degenerate: Vec<bool> = x
            .columns()
            .into_iter()
            .map(|c| c.iter().all(|v| *v == c[0]))
            .collect();
        for (k, deg) in degenerate.iter().enumerate() {
            if *deg {
                xc.column_mut(k).fill(0.0);
            }
        }
        let yc = &y - output_offset;
        let xtx = xc.t().dot(&xc);
        let xty = xc.t().dot(&yc);
        let lambda_max = xty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let y_inf = yc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rows = x.nrows() as f64;
        let col_rms = xtx.diag().iter().map(|g| (g / rows).sqrt()).collect();
        Ok(Gram {
            yty: yc.dot(&yc),
            xtx,
            xty,
            degenerate,
            col_rms,
            input_offsets,
            output_offset,
            lambda_max,
            tol: cfg.tol * (1.0 + y_inf),
            strict: cfg.strict,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.xty.len()
    }

    pub(crate) fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn correlations(&self, beta: &Array1<f64>) -> Array1<f64> {
        &self.xty - &self.xtx.dot(beta)
    }

    fn loss(&self, beta: &Array1<f64>, corr: &Array1<f64>, lambda: f64) -> f64 {
        // 0.5 y'y - 0.5 beta'(X'y + c) + lambda |beta|_1, using X'X beta = X'y - c
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        0.5 * self.yty - 0.5 * beta.dot(&(&self.xty + corr)) + lambda * l1
    }

    /// Minimise the Lasso loss starting from `beta` (warm start), in place.
    /// Returns the number of sweeps. When `trace` is given, the loss after
    /// every sweep is appended.
    pub(crate) fn solve(
        &self,
        lambda: f64,
        beta: &mut Array1<f64>,
        max_iter: usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<usize> {
        let d = self.dim();
        if lambda >= self.lambda_max {
            beta.fill(0.0);
            if let Some(t) = trace.as_deref_mut() {
                t.push(0.5 * self.yty);
            }
            return Ok(0);
        }
        let mut corr = self.correlations(beta);
        let mut sweeps = 0usize;
        let mut last_change;
        let all: Vec<usize> = (0..d).collect();
        loop {
            let change = self.sweep(&all, lambda, beta, &mut corr);
            sweeps += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.loss(beta, &corr, lambda));
            }
            if change < self.tol {
                return Ok(sweeps);
            }
            last_change = change;
            let active: Vec<usize> = (0..d).filter(|&k| beta[k] != 0.0).collect();
            while sweeps < max_iter {
                let change = self.sweep(&active, lambda, beta, &mut corr);
                sweeps += 1;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(self.loss(beta, &corr, lambda));
                }
                last_change = change;
                if change < self.tol {
                    break;
                }
            }
            if sweeps >= max_iter {
                if self.strict {
                    return Err(Error::Convergence {
                        sweeps,
                        last_change,
                        tol: self.tol,
                    });
                }
                log::warn!(
                    "coordinate descent stopped after {sweeps} sweeps at lambda {lambda:e} \
                     (last change {last_change:e}, tolerance {:e})",
                    self.tol
                );
                return Ok(sweeps);
            }
        }
    }

    fn sweep(
        &self,
        coords: &[usize],
        lambda: f64,
        beta: &mut Array1<f64>,
        corr: &mut Array1<f64>,
    ) -> f64 {
        let mut max_change = 0.0f64;
        for &k in coords {
            if self.degenerate[k] {
                continue;
            }
            let gkk = self.xtx[[k, k]];
            let old = beta[k];
            let z = corr[k] + gkk * old;
            let new = soft_threshold(z, lambda) / gkk;
            let delta = new - old;
            if delta != 0.0 {
                beta[k] = new;
                corr.scaled_add(-delta, &self.xtx.column(k));
                max_change = max_change.max(delta.abs() * self.col_rms[k]);
            }
        }
        max_change
    }

    fn model(&self, beta: Array1<f64>, lambda: f64, transform: FeatureTransform, sweeps: usize) -> LassoModel {
        LassoModel {
            beta,
            lambda,
            input_offsets: self.input_offsets.clone(),
            output_offset: self.output_offset,
            transform,
            sweeps,
        }
    }

    /// Warm-started fits along a descending grid.
    pub(crate) fn path(&self, grid: &[f64], max_iter: usize) -> Result<Vec<(Array1<f64>, usize)>> {
        let mut beta = Array1::zeros(self.dim());
        let mut out = Vec::with_capacity(grid.len());
        for &lambda in grid {
            let sweeps = self.solve(lambda, &mut beta, max_iter, None)?;
            out.push((beta.clone(), sweeps));
        }
        Ok(out)
    }
}

pub fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Fit on raw inputs with the identity transform.
pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64, cfg: &TrainConfig) -> Result<LassoModel> {
    fit_transformed(x, y, lambda, FeatureTransform::Identity, cfg)
}

/// Fit `s(x) = beta . zeta(x) + b`; centring is applied after the transform.
pub fn fit_transformed(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    transform: FeatureTransform,
    cfg: &TrainConfig,
) -> Result<LassoModel> {
    let (model, _) = fit_traced(x, y, lambda, transform, cfg, false)?;
    Ok(model)
}

/// Like [`fit_transformed`], also returning the loss after every sweep.
pub fn fit_traced(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    transform: FeatureTransform,
    cfg: &TrainConfig,
    record: bool,
) -> Result<(LassoModel, Vec<f64>)> {
    cfg.validate()?;
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("lambda must be nonnegative, got {lambda}")));
    }
    let z = transform.apply(x);
    let gram = Gram::new(z.view(), y, cfg)?;
    let mut beta = Array1::zeros(gram.dim());
    let mut trace = Vec::new();
    let sweeps = gram.solve(lambda, &mut beta, cfg.max_iter, record.then_some(&mut trace))?;
    Ok((gram.model(beta, lambda, transform, sweeps), trace))
}

/// Warm-started models along the configured grid (identity features).
pub fn fit_path(x: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &TrainConfig) -> Result<Vec<LassoModel>> {
    cfg.validate()?;
    let gram = Gram::new(x, y, cfg)?;
    let grid = cfg.lambda_grid(gram.lambda_max());
    Ok(gram
        .path(&grid, cfg.max_iter)?
        .into_iter()
        .zip(grid)
        .map(|((beta, sweeps), lambda)| gram.model(beta, lambda, FeatureTransform::Identity, sweeps))
        .collect())
}

/// Largest violation of the Lasso optimality conditions, relative to
/// `lambda_max` of the centred data.
///
/// With `c_k = x_k . (y - X beta)` on centred data, a minimiser satisfies
/// `c_k = lambda * sign(beta_k)` when `beta_k != 0` and `|c_k| <= lambda`
/// otherwise.
pub fn subgradient_violation(x: ArrayView2<f64>, y: ArrayView1<f64>, model: &LassoModel) -> Result<f64> {
    check_rows(x, y)?;
    let z = model.transform.apply(x);
    let offsets = z.mean_axis(Axis(0)).ok_or_else(|| Error::shape("empty input"))?;
    let zc = &z - &offsets.view().insert_axis(Axis(0));
    let yc = &y - y.mean().unwrap_or(0.0);
    let resid = &yc - &zc.dot(&model.beta);
    let corr = zc.t().dot(&resid);
    let lmax = zc.t().dot(&yc).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lambda = model.lambda;
    let worst = corr
        .iter()
        .zip(model.beta.iter())
        .map(|(&c, &b)| {
            if b != 0.0 {
                (c - lambda * b.signum()).abs()
            } else {
                (c.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0f64, f64::max);
    Ok(if lmax > 0.0 { worst / lmax } else { worst })
}

/// Choose lambda on the grid by k-fold cross-validation.
///
/// Rows are shuffled once with the `cv_seed` keystream and split into
/// contiguous folds. The grid is built from the full data's `lambda_max`.
/// The value minimising the mean held-out squared error wins; ties go to
/// the larger lambda. `x` must already be transformed.
pub fn select_lambda_cv(x: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &TrainConfig) -> Result<f64> {
    let scores = cv_scores(x, y, cfg)?;
    Ok(best_cv_lambda(&scores))
}

/// Grid values paired with their mean held-out squared error.
pub fn cv_scores(x: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &TrainConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    check_rows(x, y)?;
    let n = x.nrows();
    let k = cfg.cv_folds;
    if k > n {
        return Err(Error::param(format!("{k} CV folds for {n} rows")));
    }
    let full = Gram::new(x, y, cfg)?;
    if full.lambda_max() == 0.0 {
        return Ok(vec![(0.0, 0.0)]);
    }
    let grid = cfg.lambda_grid(full.lambda_max());
    let folds = cv_folds(n, k, cfg.cv_seed);
    let mut mse = vec![0.0; grid.len()];
    for held in &folds {
        if n - held.len() < 2 {
            return Err(Error::param(format!("{k} CV folds leave fewer than two training rows")));
        }
        let mut mask = vec![true; n];
        for &i in held {
            mask[i] = false;
        }
        let train: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
        let xt = x.select(Axis(0), &train);
        let yt = y.select(Axis(0), &train);
        let xh = x.select(Axis(0), held);
        let yh = y.select(Axis(0), held);
        let gram = Gram::new(xt.view(), yt.view(), cfg)?;
        let xhc = &xh - &gram.input_offsets.view().insert_axis(Axis(0));
        for (slot, (beta, _)) in mse.iter_mut().zip(gram.path(&grid, cfg.max_iter)?) {
            let pred = xhc.dot(&beta) + gram.output_offset;
            let err: f64 = pred.iter().zip(yh.iter()).map(|(p, t)| (p - t).powi(2)).sum();
            *slot += err / held.len() as f64;
        }
    }
    Ok(grid
        .into_iter()
        .zip(mse)
        .map(|(l, e)| (l, e / folds.len() as f64))
        .collect())
}

fn best_cv_lambda(scores: &[(f64, f64)]) -> f64 {
    let mut best = scores[0];
    for &(l, e) in &scores[1..] {
        if e < best.1 {
            best = (l, e);
        }
    }
    best.0
}

/// Row indices of each CV fold after one seeded shuffle.
pub fn cv_folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, Stream::CrossValidation));
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Choose the least-shrunk grid value whose fit has at most `k` nonzeros.
///
/// The path is scanned from `lambda_max` downwards and stops at the first
/// fit exceeding `k`. Among the admissible fits the one with the most
/// nonzeros wins, the smaller lambda on ties; if every admissible fit is
/// null, `lambda_max` is returned (all of them give `beta = 0`).
/// `x` must already be transformed.
pub fn select_lambda_sparsity(x: ArrayView2<f64>, y: ArrayView1<f64>, k: usize, cfg: &TrainConfig) -> Result<f64> {
    cfg.validate()?;
    if k > x.ncols() {
        return Err(Error::param(format!(
            "target of {k} nonzeros exceeds dimension {}",
            x.ncols()
        )));
    }
    let gram = Gram::new(x, y, cfg)?;
    let lmax = gram.lambda_max();
    if k == 0 || lmax == 0.0 {
        return Ok(lmax);
    }
    let grid = cfg.lambda_grid(lmax);
    let mut beta = Array1::zeros(gram.dim());
    let mut best = (lmax, 0usize);
    for &lambda in &grid {
        gram.solve(lambda, &mut beta, cfg.max_iter, None)?;
        let nnz = beta.iter().filter(|b| **b != 0.0).count();
        if nnz > k {
            break;
        }
        if nnz >= best.1 {
            best = (lambda, nnz);
        }
    }
    Ok(if best.1 == 0 { lmax } else { best.0 })
}

/// Resolve a [`LambdaStrategy`] on (transformed) training data.
pub fn choose_lambda(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    strategy: LambdaStrategy,
    cfg: &TrainConfig,
) -> Result<f64> {
    match strategy {
        LambdaStrategy::Fixed(l) => Ok(l),
        LambdaStrategy::CrossValidation { folds } => {
            let cfg = TrainConfig {
                cv_folds: folds,
                ..cfg.clone()
            };
            select_lambda_cv(z, y, &cfg)
        }
        LambdaStrategy::SparsityTarget { fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::param(format!("sparsity fraction {fraction} not in [0, 1]")));
            }
            let k = ((fraction * z.nrows() as f64).floor() as usize).min(z.ncols());
            select_lambda_sparsity(z, y, k, cfg)
        }
    }
}

/// Select lambda with `strategy` and fit, all on transformed features.
pub fn fit_with_strategy(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    strategy: LambdaStrategy,
    transform: FeatureTransform,
    cfg: &TrainConfig,
) -> Result<LassoModel> {
    cfg.validate()?;
    let z = transform.apply(x);
    let lambda = choose_lambda(z.view(), y, strategy, cfg)?;
    let gram = Gram::new(z.view(), y, cfg)?;
    let mut beta = Array1::zeros(gram.dim());
    let sweeps = gram.solve(lambda, &mut beta, cfg.max_iter, None)?;
    Ok(gram.model(beta, lambda, transform, sweeps))
}
