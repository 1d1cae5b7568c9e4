//! The S-fold Lasso Monte Carlo estimator.
//!
//! `V` (N points with true-model outputs) is cut into `S` contiguous folds.
//! Fold `s` trains a surrogate on the other `S - 1` folds and contributes a
//! two-level estimate built from its own points and the shared
//! surrogate-only set `W`. The LMC mean and variance are the plain averages
//! of the `S` fold estimates.

use std::sync::Arc;

use ndarray::{concatenate, s, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    design, estimate_moment_stats, mc_mean, mc_variance, two_level_mean, two_level_variance, SurrogateInputs,
};
use crate::lasso::{FeatureTransform, LambdaStrategy, TrainConfig};
use crate::problems::Problem;
use crate::surrogate::{check_predictions, LassoTrainer, Surrogate, SurrogateTrainer};

#[derive(Debug, Clone, PartialEq)]
pub struct LmcConfig {
    /// Number of folds `S`; must divide `N`.
    pub folds: usize,
    /// Surrogate-only sample size `M`.
    pub m: usize,
    pub strategy: LambdaStrategy,
    pub transform: FeatureTransform,
    pub train: TrainConfig,
}

impl Default for LmcConfig {
    fn default() -> Self {
        LmcConfig {
            folds: 5,
            m: 10_000,
            strategy: LambdaStrategy::default(),
            transform: FeatureTransform::Identity,
            train: TrainConfig::default(),
        }
    }
}

impl LmcConfig {
    /// The Lasso trainer described by this config, with CV shuffles seeded
    /// by `seed`.
    pub fn trainer(&self, seed: u64) -> LassoTrainer {
        LassoTrainer {
            strategy: self.strategy,
            transform: self.transform,
            config: TrainConfig {
                cv_seed: seed,
                ..self.train.clone()
            },
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let s = self.folds;
        if s < 2 {
            return Err(Error::param(format!("LMC needs at least 2 folds, got {s}")));
        }
        if !n.is_multiple_of(s) {
            return Err(Error::param(format!("S = {s} does not divide N = {n}")));
        }
        if n < 2 * s {
            return Err(Error::param(format!(
                "N = {n} gives fewer than 2 evaluation points per fold with S = {s}"
            )));
        }
        if self.m < 2 {
            return Err(Error::param(format!("M must be at least 2, got {}", self.m)));
        }
        if self.m < 10 * n {
            log::warn!("M = {} is less than 10 N = {}", self.m, 10 * n);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    /// Evaluation rows `start..end` of `V`; all other rows trained the model.
    pub eval_rows: (usize, usize),
    pub mean: f64,
    pub variance: f64,
    pub lambda: Option<f64>,
    pub nonzeros: Option<usize>,
    /// Plug-in check of `Var[f - s] <= Var[f]` on the fold's evaluation
    /// points (needs at least 4 of them).
    pub mean_condition: Option<bool>,
    /// Plug-in check of the fourth-moment condition for the variance.
    pub variance_condition: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmcResult {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
    pub m: usize,
    pub folds: Vec<FoldReport>,
    /// Simple-MC estimates on the same `V`, for side-by-side reporting.
    pub mc_mean: f64,
    pub mc_variance: f64,
    pub negative_variance: bool,
}

fn train_fold(
    v: ArrayView2<f64>,
    y: ArrayView1<f64>,
    fold: usize,
    size: usize,
    trainer: &dyn SurrogateTrainer,
) -> Result<Arc<dyn Surrogate>> {
    let (a, b) = (fold * size, (fold + 1) * size);
    let xt = concatenate(Axis(0), &[v.slice(s![..a, ..]), v.slice(s![b.., ..])]).expect("same width");
    let yt = concatenate(Axis(0), &[y.slice(s![..a]), y.slice(s![b..])]).expect("1-d");
    trainer.train(xt.view(), yt.view()).map_err(|e| Error::Fold {
        fold,
        source: Box::new(e),
    })
}

fn train_all(
    v: ArrayView2<f64>,
    y: ArrayView1<f64>,
    folds: usize,
    trainer: &dyn SurrogateTrainer,
) -> Result<Vec<Arc<dyn Surrogate>>> {
    let size = v.nrows() / folds;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..folds)
            .into_par_iter()
            .map(|f| train_fold(v, y, f, size, trainer))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..folds).map(|f| train_fold(v, y, f, size, trainer)).collect()
    }
}

/// Run the LMC estimator on given data.
///
/// `v`/`y` are the `N` design points and their true-model outputs; `w` is
/// the surrogate-only set, shared by all folds. No further true-model
/// evaluations happen here.
pub fn lmc_estimate(
    v: ArrayView2<f64>,
    y: ArrayView1<f64>,
    w: SurrogateInputs,
    cfg: &LmcConfig,
    trainer: &dyn SurrogateTrainer,
) -> Result<LmcResult> {
    let n = v.nrows();
    if y.len() != n {
        return Err(Error::shape(format!("{} outputs for {n} design points", y.len())));
    }
    cfg.validate(n)?;
    if w.len() != cfg.m {
        return Err(Error::shape(format!("W has {} points but M = {}", w.len(), cfg.m)));
    }
    let folds = cfg.folds;
    let size = n / folds;
    let models = train_all(v, y, folds, trainer)?;
    let refs: Vec<&dyn Surrogate> = models.iter().map(|m| m.as_ref()).collect();
    let on_w = w.predict_all(&refs)?;

    let mut reports = Vec::with_capacity(folds);
    for (fold, (model, sb)) in models.iter().zip(&on_w).enumerate() {
        let (a, b) = (fold * size, (fold + 1) * size);
        let ve = v.slice(s![a..b, ..]);
        let fe = y.slice(s![a..b]);
        let se = model.predict(ve)?;
        check_predictions(&se, size)?;
        let (mc, vc) = if size >= 4 {
            let st = estimate_moment_stats(fe, se.view())?;
            (Some(st.mean_condition()), Some(st.variance_condition()))
        } else {
            (None, None)
        };
        reports.push(FoldReport {
            fold,
            eval_rows: (a, b),
            mean: two_level_mean(fe, se.view(), sb.view())?,
            variance: two_level_variance(fe, se.view(), sb.view())?,
            lambda: model.lambda(),
            nonzeros: model.nonzeros(),
            mean_condition: mc,
            variance_condition: vc,
        });
    }
    let mean = reports.iter().map(|r| r.mean).sum::<f64>() / folds as f64;
    let variance = reports.iter().map(|r| r.variance).sum::<f64>() / folds as f64;
    for r in &reports {
        if r.mean_condition == Some(false) || r.variance_condition == Some(false) {
            log::debug!(
                "fold {}: plug-in conditions mean={:?} variance={:?}",
                r.fold,
                r.mean_condition,
                r.variance_condition
            );
        }
    }
    Ok(LmcResult {
        mean,
        variance,
        n,
        m: cfg.m,
        folds: reports,
        mc_mean: mc_mean(y)?,
        mc_variance: mc_variance(y)?,
        negative_variance: variance < 0.0,
    })
}

/// Sample `V` and `W` from the problem, evaluate `f` on `V` only, and run
/// [`lmc_estimate`] with the Lasso trainer described by `cfg`.
pub fn lmc_run<P: Problem + ?Sized>(problem: &P, n: usize, cfg: &LmcConfig, seed: u64) -> Result<LmcResult> {
    lmc_run_with(problem, n, cfg, &cfg.trainer(seed), seed)
}

/// [`lmc_run`] with an arbitrary surrogate trainer.
pub fn lmc_run_with<P: Problem + ?Sized>(
    problem: &P,
    n: usize,
    cfg: &LmcConfig,
    trainer: &dyn SurrogateTrainer,
    seed: u64,
) -> Result<LmcResult> {
    cfg.validate(n)?;
    let (v, y) = design(problem, n, seed)?;
    let w = SurrogateInputs::fresh(problem.distribution(), cfg.m, seed);
    lmc_estimate(v.view(), y.view(), w, cfg, trainer)
}
