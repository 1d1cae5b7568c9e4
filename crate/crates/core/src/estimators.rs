//! Simple Monte Carlo, two-level estimators, their MSE estimates, and the
//! multifidelity baselines built on them.
//!
//! Only evaluations of the true model count towards a budget; surrogate
//! evaluations are treated as free.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::Problem;
use crate::sampling::{rng_for, sample_stream, InputDistribution, Stream};
use crate::surrogate::{check_predictions, Surrogate, SurrogateTrainer};

const W_CHUNK: usize = 4096;

/// Neumaier-compensated sum. Estimators average up to `M` surrogate values,
/// where plain summation would lose `O(M eps)` relative accuracy.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mc_mean(y: ArrayView1<f64>) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::shape("mean of an empty sample"));
    }
    Ok(compensated_sum(y.iter().copied()) / y.len() as f64)
}

/// Sample variance with divisor `N - 1`.
pub fn mc_variance(y: ArrayView1<f64>) -> Result<f64> {
    let n = y.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("variance needs at least 2 points, got {n}")));
    }
    let m = compensated_sum(y.iter().copied()) / n as f64;
    Ok(compensated_sum(y.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64)
}

fn check_pair(f: ArrayView1<f64>, s: ArrayView1<f64>) -> Result<()> {
    if f.len() != s.len() {
        return Err(Error::shape(format!(
            "{} true-model values paired with {} surrogate values",
            f.len(),
            s.len()
        )));
    }
    Ok(())
}

/// `mean(s_big) + mean(f_eval) - mean(s_eval)`.
pub fn two_level_mean(f_eval: ArrayView1<f64>, s_eval: ArrayView1<f64>, s_big: ArrayView1<f64>) -> Result<f64> {
    check_pair(f_eval, s_eval)?;
    Ok(mc_mean(s_big)? + mc_mean(f_eval)? - mc_mean(s_eval)?)
}

/// `var(s_big) + var(f_eval) - var(s_eval)`; may be negative.
pub fn two_level_variance(f_eval: ArrayView1<f64>, s_eval: ArrayView1<f64>, s_big: ArrayView1<f64>) -> Result<f64> {
    check_pair(f_eval, s_eval)?;
    Ok(mc_variance(s_big)? + mc_variance(f_eval)? - mc_variance(s_eval)?)
}

/// Plug-in moment estimates from paired `(f, s)` evaluations.
///
/// Variances and the covariance use divisor `N - 1`; the fourth moments
/// `m4` and `m22` use `1 / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentStats {
    pub n: usize,
    pub var_f: f64,
    pub var_s: f64,
    pub var_diff: f64,
    pub cov_fs: f64,
    pub m4_f: f64,
    /// Fourth central moment of the surrogate. Initially taken from the
    /// paired sample; [`MomentStats::with_surrogate_sample`] replaces it.
    pub m4_s: f64,
    /// `m22[f + s, f - s]`.
    pub m22_plus_minus: f64,
    pub var_plus: f64,
    pub var_minus: f64,
}

fn central(y: &[f64]) -> Vec<f64> {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| v - m).collect()
}

fn var_m4(y: ArrayView1<f64>) -> (f64, f64) {
    let c = central(&y.to_vec());
    let n = c.len() as f64;
    let v = c.iter().map(|a| a * a).sum::<f64>() / (n - 1.0);
    let m4 = c.iter().map(|a| a.powi(4)).sum::<f64>() / n;
    (v, m4)
}

pub fn estimate_moment_stats(f_eval: ArrayView1<f64>, s_eval: ArrayView1<f64>) -> Result<MomentStats> {
    check_pair(f_eval, s_eval)?;
    let n = f_eval.len();
    if n < 4 {
        return Err(Error::Degenerate(format!(
            "fourth-moment estimates need at least 4 points, got {n}"
        )));
    }
    let cf = central(&f_eval.to_vec());
    let cs = central(&s_eval.to_vec());
    let nf = n as f64;
    let mut var_f = 0.0;
    let mut var_s = 0.0;
    let mut cov = 0.0;
    let mut m4_f = 0.0;
    let mut m4_s = 0.0;
    let mut var_plus = 0.0;
    let mut var_minus = 0.0;
    let mut m22 = 0.0;
    for (a, b) in cf.iter().zip(&cs) {
        let (p, m) = (a + b, a - b);
        var_f += a * a;
        var_s += b * b;
        cov += a * b;
        m4_f += a.powi(4);
        m4_s += b.powi(4);
        var_plus += p * p;
        var_minus += m * m;
        m22 += p * p * m * m;
    }
    let var_minus = var_minus / (nf - 1.0);
    Ok(MomentStats {
        n,
        var_f: var_f / (nf - 1.0),
        var_s: var_s / (nf - 1.0),
        var_diff: var_minus,
        cov_fs: cov / (nf - 1.0),
        m4_f: m4_f / nf,
        m4_s: m4_s / nf,
        m22_plus_minus: m22 / nf,
        var_plus: var_plus / (nf - 1.0),
        var_minus,
    })
}

impl MomentStats {
    /// Replace `var_s` and `m4_s` with estimates from a (large) surrogate-only
    /// sample.
    pub fn with_surrogate_sample(mut self, s_big: ArrayView1<f64>) -> Result<Self> {
        if s_big.len() < 2 {
            return Err(Error::Degenerate("surrogate sample needs at least 2 points".into()));
        }
        let (v, m4) = var_m4(s_big);
        self.var_s = v;
        self.m4_s = m4;
        Ok(self)
    }

    /// Sample kurtosis check `m4 >= var^2`; always true for exact moments.
    pub fn fourth_moment_consistent(&self) -> bool {
        self.m4_f >= self.var_f * self.var_f
    }

    /// `Var[f - s] <= Var[f]`.
    pub fn mean_condition(&self) -> bool {
        self.var_diff <= self.var_f
    }

    /// `m22[f+s, f-s] + Var[f+s]Var[f-s]/(N-1) - (N-2)/(N-1) (Var f - Var s)^2
    /// <= m4[f] - (N-3)/(N-1) Var[f]^2`, evaluated at `N = self.n`.
    pub fn variance_condition(&self) -> bool {
        let n = self.n as f64;
        let lhs = self.m22_plus_minus + self.var_plus * self.var_minus / (n - 1.0)
            - (n - 2.0) / (n - 1.0) * (self.var_f - self.var_s).powi(2);
        let rhs = self.m4_f - (n - 3.0) / (n - 1.0) * self.var_f * self.var_f;
        lhs <= rhs
    }
}

/// `Var[s] / M + Var[f - s] / N_eval`.
pub fn estimate_mse_mean(stats: &MomentStats, n_eval: usize, m: usize) -> f64 {
    stats.var_s / m as f64 + stats.var_diff / n_eval as f64
}

/// MSE of the two-level variance estimator with `n_eval` paired points and
/// `m` surrogate-only points.
pub fn estimate_mse_variance(stats: &MomentStats, n_eval: usize, m: usize) -> f64 {
    let mf = m as f64;
    let ne = n_eval as f64;
    let big = (stats.m4_s - (mf - 3.0) / (mf - 1.0) * stats.var_s * stats.var_s) / mf;
    let small = (stats.m22_plus_minus + stats.var_plus * stats.var_minus / (ne - 1.0)
        - (ne - 2.0) / (ne - 1.0) * (stats.var_f - stats.var_s).powi(2))
        / ne;
    big + small
}

/// Simple-MC MSE of the variance, `(m4 - (N-3)/(N-1) Var^2) / N`.
pub fn mc_mse_variance(m4: f64, var: f64, n: usize) -> f64 {
    let nf = n as f64;
    (m4 - (nf - 3.0) / (nf - 1.0) * var * var) / nf
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub mean: f64,
    pub variance: f64,
    /// True-model evaluations consumed.
    pub budget_n: usize,
    /// Surrogate-only evaluations (free).
    pub surrogate_eval_m: usize,
    /// Training-set size behind the mean estimate, when there is a split.
    pub chosen_n: Option<usize>,
    /// Training-set size behind the variance estimate, when it differs.
    pub chosen_n_var: Option<usize>,
    pub est_mse_mean: Option<f64>,
    pub est_mse_var: Option<f64>,
    /// The variance estimate came out negative (returned unclipped).
    pub negative_variance: bool,
}

impl EstimateResult {
    fn new(mean: f64, variance: f64, budget_n: usize, m: usize) -> Self {
        EstimateResult {
            mean,
            variance,
            budget_n,
            surrogate_eval_m: m,
            chosen_n: None,
            chosen_n_var: None,
            est_mse_mean: None,
            est_mse_var: None,
            negative_variance: variance < 0.0,
        }
    }
}

/// The surrogate-only input set `W`, either given explicitly or drawn
/// lazily in chunks so that large `M` never needs an `M x d` matrix.
#[derive(Debug, Clone, Copy)]
pub enum SurrogateInputs<'a> {
    Matrix(ArrayView2<'a, f64>),
    Fresh {
        dist: &'a InputDistribution,
        m: usize,
        seed: u64,
    },
}

impl SurrogateInputs<'_> {
    /// Draws on the surrogate stream of `seed`.
    pub fn fresh(dist: &InputDistribution, m: usize, seed: u64) -> SurrogateInputs<'_> {
        SurrogateInputs::Fresh { dist, m, seed }
    }

    pub fn len(&self) -> usize {
        match self {
            SurrogateInputs::Matrix(w) => w.nrows(),
            SurrogateInputs::Fresh { m, .. } => *m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Evaluate every model on `W`; `out[j]` holds the predictions of
    /// `models[j]`.
    pub fn predict_all(&self, models: &[&dyn Surrogate]) -> Result<Vec<Array1<f64>>> {
        match *self {
            SurrogateInputs::Matrix(w) => models
                .iter()
                .map(|s| {
                    let p = s.predict(w)?;
                    check_predictions(&p, w.nrows())?;
                    Ok(p)
                })
                .collect(),
            SurrogateInputs::Fresh { dist, m, seed } => {
                dist.validate()?;
                let mut rng = rng_for(seed, Stream::Surrogate);
                let mut out: Vec<Array1<f64>> = models.iter().map(|_| Array1::zeros(m)).collect();
                let mut buf = Array2::zeros((W_CHUNK.min(m.max(1)), dist.dim()));
                let mut start = 0;
                while start < m {
                    let rows = W_CHUNK.min(m - start);
                    let mut chunk = buf.slice_mut(s![..rows, ..]);
                    dist.fill(&mut rng, chunk.view_mut());
                    for (s, o) in models.iter().zip(out.iter_mut()) {
                        let p = s.predict(chunk.view())?;
                        check_predictions(&p, rows)?;
                        o.slice_mut(s![start..start + rows]).assign(&p);
                    }
                    start += rows;
                }
                Ok(out)
            }
        }
    }
}

/// Draw `V` on the design stream and evaluate the true model on it.
pub fn design<P: Problem + ?Sized>(problem: &P, n: usize, seed: u64) -> Result<(Array2<f64>, Array1<f64>)> {
    let v = sample_stream(problem.distribution(), n, seed, Stream::Design)?.inputs;
    let y = problem.eval_batch(v.view())?;
    Ok((v, y))
}

/// Mean and variance of `f` over `N` design points.
pub fn simple_mc<P: Problem + ?Sized>(problem: &P, n: usize, seed: u64) -> Result<EstimateResult> {
    if n < 2 {
        return Err(Error::param(format!("simple MC needs N >= 2, got {n}")));
    }
    let (_, y) = design(problem, n, seed)?;
    simple_mc_from(y.view())
}

pub fn simple_mc_from(y: ArrayView1<f64>) -> Result<EstimateResult> {
    Ok(EstimateResult::new(mc_mean(y)?, mc_variance(y)?, y.len(), 0))
}

/// Train on all `N` points and report the surrogate's own moments on `W`.
pub fn surrogate_only<P: Problem + ?Sized>(
    problem: &P,
    n: usize,
    m: usize,
    trainer: &dyn SurrogateTrainer,
    seed: u64,
) -> Result<EstimateResult> {
    if n < 2 || m < 2 {
        return Err(Error::param("surrogate-only estimation needs N >= 2 and M >= 2"));
    }
    let (v, y) = design(problem, n, seed)?;
    let model = trainer.train(v.view(), y.view())?;
    let w = SurrogateInputs::fresh(problem.distribution(), m, seed);
    let sb = w.predict_all(&[model.as_ref()])?.remove(0);
    let mut r = EstimateResult::new(mc_mean(sb.view())?, mc_variance(sb.view())?, n, m);
    r.chosen_n = Some(n);
    Ok(r)
}

fn split_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!("split fraction {fraction} not in (0, 1)")));
    }
    let k = (fraction * n as f64).floor() as usize;
    if k < 2 || n - k < 2 {
        return Err(Error::param(format!(
            "split fraction {fraction} of N = {n} leaves {k} training and {} evaluation points; both need at least 2",
            n - k
        )));
    }
    Ok(k)
}

struct SplitEval {
    mean: f64,
    variance: f64,
    stats: Option<MomentStats>,
}

/// Train on rows `..k`, evaluate the two-level estimators on rows `k..`.
fn split_estimate(
    v: ArrayView2<f64>,
    y: ArrayView1<f64>,
    k: usize,
    w: &SurrogateInputs,
    trainer: &dyn SurrogateTrainer,
    with_stats: bool,
) -> Result<SplitEval> {
    let model = trainer.train(v.slice(s![..k, ..]), y.slice(s![..k]))?;
    let ve = v.slice(s![k.., ..]);
    let fe = y.slice(s![k..]);
    let se = model.predict(ve)?;
    check_predictions(&se, ve.nrows())?;
    let sb = w.predict_all(&[model.as_ref()])?.remove(0);
    let stats = if with_stats {
        Some(estimate_moment_stats(fe, se.view())?.with_surrogate_sample(sb.view())?)
    } else {
        None
    };
    Ok(SplitEval {
        mean: two_level_mean(fe, se.view(), sb.view())?,
        variance: two_level_variance(fe, se.view(), sb.view())?,
        stats,
    })
}

/// Two-level estimate with the first `floor(split_fraction N)` points used
/// for training and the rest for the correction term.
pub fn static_mfmc<P: Problem + ?Sized>(
    problem: &P,
    n: usize,
    split_fraction: f64,
    m: usize,
    trainer: &dyn SurrogateTrainer,
    seed: u64,
) -> Result<EstimateResult> {
    let k = split_size(n, split_fraction)?;
    if m < 2 {
        return Err(Error::param("M must be at least 2"));
    }
    let (v, y) = design(problem, n, seed)?;
    let w = SurrogateInputs::fresh(problem.distribution(), m, seed);
    let e = split_estimate(v.view(), y.view(), k, &w, trainer, n - k >= 4)?;
    let mut r = EstimateResult::new(e.mean, e.variance, n, m);
    r.chosen_n = Some(k);
    if let Some(st) = e.stats {
        r.est_mse_mean = Some(estimate_mse_mean(&st, n - k, m));
        r.est_mse_var = Some(estimate_mse_variance(&st, n - k, m));
    }
    Ok(r)
}

/// Try every candidate split and keep, separately for the mean and the
/// variance, the one with the smallest estimated MSE. Ties go to the
/// earlier candidate.
///
/// `f` is evaluated once on `N` points and reused across candidates.
/// Candidates leaving fewer than 4 held-out points (too few for the
/// fourth-moment estimates) are skipped.
pub fn adaptive_mfmc<P: Problem + ?Sized>(
    problem: &P,
    n: usize,
    candidate_fractions: &[f64],
    m: usize,
    trainer: &dyn SurrogateTrainer,
    seed: u64,
) -> Result<EstimateResult> {
    if candidate_fractions.is_empty() {
        return Err(Error::param("no candidate split fractions"));
    }
    if m < 4 {
        return Err(Error::param("M must be at least 4"));
    }
    let mut sizes = Vec::new();
    for &f in candidate_fractions {
        let k = split_size(n, f)?;
        if n - k < 4 {
            log::warn!("skipping split fraction {f}: only {} held-out points", n - k);
            continue;
        }
        if !sizes.contains(&k) {
            sizes.push(k);
        }
    }
    if sizes.is_empty() {
        return Err(Error::param(format!(
            "every candidate split of N = {n} leaves fewer than 4 held-out points"
        )));
    }
    let (v, y) = design(problem, n, seed)?;
    let w = SurrogateInputs::fresh(problem.distribution(), m, seed);
    let mut best_mean: Option<(f64, f64, usize)> = None;
    let mut best_var: Option<(f64, f64, usize)> = None;
    for &k in &sizes {
        let e = split_estimate(v.view(), y.view(), k, &w, trainer, true)?;
        let st = e.stats.expect("stats requested");
        let mm = estimate_mse_mean(&st, n - k, m);
        let mv = estimate_mse_variance(&st, n - k, m);
        if best_mean.is_none_or(|b| mm < b.0) {
            best_mean = Some((mm, e.mean, k));
        }
        if best_var.is_none_or(|b| mv < b.0) {
            best_var = Some((mv, e.variance, k));
        }
    }
    let (mm, mean, km) = best_mean.expect("at least one candidate");
    let (mv, var, kv) = best_var.expect("at least one candidate");
    let mut r = EstimateResult::new(mean, var, n, m);
    r.chosen_n = Some(km);
    r.chosen_n_var = Some(kv);
    r.est_mse_mean = Some(mm);
    r.est_mse_var = Some(mv);
    Ok(r)
}

/// Negative control: trains and corrects on the same `N` points.
pub fn biased_mfmc<P: Problem + ?Sized>(
    problem: &P,
    n: usize,
    m: usize,
    trainer: &dyn SurrogateTrainer,
    seed: u64,
) -> Result<EstimateResult> {
    if n < 4 {
        return Err(Error::param(format!("biased MFMC needs N >= 4, got {n}")));
    }
    if m < 2 {
        return Err(Error::param("M must be at least 2"));
    }
    let (v, y) = design(problem, n, seed)?;
    let model = trainer.train(v.view(), y.view())?;
    let se = model.predict(v.view())?;
    check_predictions(&se, n)?;
    let w = SurrogateInputs::fresh(problem.distribution(), m, seed);
    let sb = w.predict_all(&[model.as_ref()])?.remove(0);
    let mut r = EstimateResult::new(
        two_level_mean(y.view(), se.view(), sb.view())?,
        two_level_variance(y.view(), se.view(), sb.view())?,
        n,
        m,
    );
    r.chosen_n = Some(n);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasso::{FeatureTransform, LambdaStrategy, LassoModel};
    use crate::problems::{CountingProblem, LinearProblem};
    use crate::sampling::sample;
    use crate::surrogate::{FixedTrainer, FnSurrogate, LassoTrainer, ZeroTrainer};
    use ndarray::array;
    use std::sync::Arc;

    #[test]
    fn simple_examples() {
        assert_eq!(mc_mean(array![1.0, 2.0, 3.0].view()).unwrap(), 2.0);
        assert_eq!(mc_mean(array![4.5, 4.5].view()).unwrap(), 4.5);
        assert!(mc_mean(Array1::<f64>::zeros(0).view()).is_err());
        assert_eq!(mc_variance(array![1.0, 2.0, 3.0].view()).unwrap(), 1.0);
        assert_eq!(mc_variance(array![7.0, 7.0, 7.0].view()).unwrap(), 0.0);
        assert_eq!(mc_variance(array![0.0, 2.0].view()).unwrap(), 2.0);
        assert!(matches!(mc_variance(array![1.0].view()), Err(Error::Degenerate(_))));
    }

    #[test]
    fn normal_mean_is_small() {
        let x = sample(&InputDistribution::standard_normal(1), 100_000, 3).unwrap().inputs;
        assert!(mc_mean(x.column(0)).unwrap().abs() < 0.02);
    }

    #[test]
    fn two_level_examples() {
        let f = array![1.0, 3.0];
        let s = array![0.0, 2.0];
        let sb = array![2.0, 2.0, 2.0];
        assert_eq!(two_level_mean(f.view(), s.view(), sb.view()).unwrap(), 3.0);
        let v = two_level_variance(array![0.0, 2.0].view(), array![0.0, 1.0].view(), array![0.0, 2.0].view()).unwrap();
        assert_eq!(v, 3.5);
        assert!(two_level_mean(f.view(), array![1.0].view(), sb.view()).is_err());
    }

    #[test]
    fn zero_surrogate_reduces_to_mc() {
        let f = array![0.3, -1.2, 2.5, 0.7, 1.1];
        let z = Array1::zeros(5);
        let zb = Array1::zeros(50);
        assert_eq!(
            two_level_mean(f.view(), z.view(), zb.view()).unwrap(),
            mc_mean(f.view()).unwrap()
        );
        assert_eq!(
            two_level_variance(f.view(), z.view(), zb.view()).unwrap(),
            mc_variance(f.view()).unwrap()
        );
    }

    #[test]
    fn perfect_surrogate_cancels() {
        let f = array![0.3, -1.2, 2.5, 0.7];
        let sb = array![1.0, 2.0, 4.0];
        let m = two_level_mean(f.view(), f.view(), sb.view()).unwrap();
        let v = two_level_variance(f.view(), f.view(), sb.view()).unwrap();
        assert!((m - mc_mean(sb.view()).unwrap()).abs() < 1e-15);
        assert!((v - mc_variance(sb.view()).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn moment_stats_special_cases() {
        let f = array![0.3, -1.2, 2.5, 0.7, 1.1, -0.4];
        let st = estimate_moment_stats(f.view(), f.view()).unwrap();
        assert_eq!(st.var_diff, 0.0);
        assert_eq!(st.var_minus, 0.0);
        assert!((st.cov_fs - st.var_f).abs() < 1e-15);
        let st = estimate_moment_stats(f.view(), Array1::zeros(6).view()).unwrap();
        assert_eq!(st.var_s, 0.0);
        assert!((st.var_diff - st.var_f).abs() < 1e-15);
        assert!(estimate_moment_stats(f.slice(s![..3]), f.slice(s![..3])).is_err());
    }

    #[test]
    fn moment_stats_match_definitions() {
        // brute-force oracle from the defining sums
        let f = [1.0, 4.0, -2.0, 0.5, 3.0, 2.0];
        let g = [0.5, 3.0, -1.0, 1.0, 2.0, 2.5];
        let n = 6.0;
        let mf = f.iter().sum::<f64>() / n;
        let mg = g.iter().sum::<f64>() / n;
        let mut want = [0.0; 8];
        for i in 0..6 {
            let (a, b) = (f[i] - mf, g[i] - mg);
            want[0] += a * a / (n - 1.0);
            want[1] += b * b / (n - 1.0);
            want[2] += (a - b).powi(2) / (n - 1.0);
            want[3] += a * b / (n - 1.0);
            want[4] += a.powi(4) / n;
            want[5] += (a + b).powi(2) * (a - b).powi(2) / n;
            want[6] += (a + b).powi(2) / (n - 1.0);
            want[7] += b.powi(4) / n;
        }
        let st = estimate_moment_stats(Array1::from(f.to_vec()).view(), Array1::from(g.to_vec()).view()).unwrap();
        let got = [
            st.var_f,
            st.var_s,
            st.var_diff,
            st.cov_fs,
            st.m4_f,
            st.m22_plus_minus,
            st.var_plus,
            st.m4_s,
        ];
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn mse_mean_examples() {
        let mut st = estimate_moment_stats(array![1.0, 2.0, 3.0, 5.0].view(), array![1.0, 2.0, 3.0, 5.0].view()).unwrap();
        st.var_s = 4.0;
        st.var_diff = 2.0;
        assert!((estimate_mse_mean(&st, 10, 1_000_000) - (0.2 + 4e-6)).abs() < 1e-15);
        st.var_diff = 0.0;
        assert!(estimate_mse_mean(&st, 10, usize::MAX) < 1e-15);

        let f = array![1.0, 2.0, 3.0, 5.0, -1.0];
        let st = estimate_moment_stats(f.view(), Array1::zeros(5).view()).unwrap();
        assert!((estimate_mse_mean(&st, 5, 10) - st.var_f / 5.0).abs() < 1e-15);
    }

    #[test]
    fn mse_variance_consistency() {
        let f = array![1.0, 2.0, 3.0, 5.0, -1.0, 0.0, 4.0];
        let st = estimate_moment_stats(f.view(), Array1::zeros(7).view()).unwrap();
        let got = estimate_mse_variance(&st, 7, usize::MAX / 2);
        let want = mc_mse_variance(st.m4_f, st.var_f, 7);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        // perfect surrogate: only the M term survives
        let st = estimate_moment_stats(f.view(), f.view()).unwrap();
        let got = estimate_mse_variance(&st, 7, 100);
        let want = (st.m4_s - 97.0 / 99.0 * st.var_s * st.var_s) / 100.0;
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn mse_variance_matches_transcription() {
        // values from an independent exact-rational transcription
        let f = array![0.5, 1.75, -0.25, 2.0, 1.0, 3.5, -1.5, 0.75];
        let s = array![0.25, 1.5, 0.0, 1.75, 1.25, 2.75, -1.0, 0.5];
        let st = estimate_moment_stats(f.view(), s.view()).unwrap();
        let got = estimate_mse_variance(&st, 8, 1000);
        let want = MSE_VAR_8POINT;
        assert!(((got - want) / want).abs() < 1e-12, "{got} vs {want}");
    }

    // 9266988652031 / 51328843776000
    const MSE_VAR_8POINT: f64 = 0.180_541_542_928_032_93;

    #[test]
    fn mse_mean_matches_empirical() {
        // f = z1, s = 0.8 z1 + 0.6 z2: Var s = 1, Var(f - s) = 0.04 + 0.36 = 0.4
        let (n, m, reps) = (20usize, 200usize, 10_000usize);
        let mut sq = 0.0;
        for r in 0..reps {
            let z = sample(&InputDistribution::standard_normal(2), n + m, 1000 + r as u64).unwrap().inputs;
            let s_all = z.column(0).mapv(|a| 0.8 * a) + z.column(1).mapv(|b| 0.6 * b);
            let f = z.slice(s![..n, 0]);
            let est = two_level_mean(f, s_all.slice(s![..n]), s_all.slice(s![n..])).unwrap();
            sq += est * est;
        }
        let emp = sq / reps as f64;
        let want = 1.0 / m as f64 + 0.4 / n as f64;
        assert!(((emp - want) / want).abs() < 0.1, "{emp} vs {want}");
    }

    #[test]
    fn static_split_sizes_and_errors() {
        let p = LinearProblem::standard(5);
        let r = static_mfmc(&p, 100, 0.8, 1000, &ZeroTrainer, 1).unwrap();
        assert_eq!(r.chosen_n, Some(80));
        assert_eq!(r.budget_n, 100);
        assert!(static_mfmc(&p, 10, 0.95, 1000, &ZeroTrainer, 1).is_err());
        assert!(static_mfmc(&p, 10, 1.0, 1000, &ZeroTrainer, 1).is_err());
        assert!(static_mfmc(&p, 10, 0.1, 1000, &ZeroTrainer, 1).is_err());
    }

    #[test]
    fn static_with_zero_surrogate_is_mc_on_holdout() {
        let p = LinearProblem::standard(5);
        let r = static_mfmc(&p, 50, 0.8, 100, &ZeroTrainer, 9).unwrap();
        let (_, y) = design(&p, 50, 9).unwrap();
        assert_eq!(r.mean, mc_mean(y.slice(s![40..])).unwrap());
        assert_eq!(r.variance, mc_variance(y.slice(s![40..])).unwrap());
    }

    fn exact_linear(p: &LinearProblem) -> FixedTrainer {
        FixedTrainer(Arc::new(LassoModel {
            beta: p.alpha.clone(),
            lambda: 0.0,
            input_offsets: Array1::zeros(p.alpha.len()),
            output_offset: 0.0,
            transform: FeatureTransform::Identity,
            sweeps: 0,
        }))
    }

    #[test]
    fn perfect_surrogate_spread_is_tiny() {
        let p = LinearProblem::standard(5);
        let t = exact_linear(&p);
        let m = 20_000;
        let means: Vec<f64> = (0..30)
            .map(|r| static_mfmc(&p, 20, 0.5, m, &t, r).unwrap().mean)
            .collect();
        let spread = mc_variance(Array1::from(means).view()).unwrap();
        let want = p.variance() / m as f64;
        assert!(spread < 3.0 * want, "{spread} vs {want}");
    }

    #[test]
    fn static_is_unbiased_on_linear() {
        let p = LinearProblem::standard(5);
        let trainer = LassoTrainer::new(LambdaStrategy::CrossValidation { folds: 5 }, FeatureTransform::Identity);
        let means: Vec<f64> = (0..200)
            .map(|r| static_mfmc(&p, 40, 0.8, 2000, &trainer, 500 + r).unwrap().mean)
            .collect();
        let a = Array1::from(means);
        let se = (mc_variance(a.view()).unwrap() / a.len() as f64).sqrt();
        assert!(mc_mean(a.view()).unwrap().abs() < 3.0 * se);
    }

    #[test]
    fn adaptive_single_candidate_equals_static() {
        let p = LinearProblem::standard(8);
        let trainer = LassoTrainer::default();
        let a = adaptive_mfmc(&p, 60, &[0.7], 500, &trainer, 4).unwrap();
        let s = static_mfmc(&p, 60, 0.7, 500, &trainer, 4).unwrap();
        assert_eq!(a.mean, s.mean);
        assert_eq!(a.variance, s.variance);
        assert_eq!(a.chosen_n, s.chosen_n);
    }

    #[test]
    fn adaptive_choices_stay_in_grid() {
        let p = LinearProblem::standard(10);
        let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let r = adaptive_mfmc(&p, 100, &grid, 1000, &LassoTrainer::default(), 2).unwrap();
        for k in [r.chosen_n.unwrap(), r.chosen_n_var.unwrap()] {
            assert!(k % 10 == 0 && (10..=90).contains(&k), "{k}");
        }
        assert_eq!(r.budget_n, 100);
    }

    /// Becomes exact once it has seen at least 10 points, useless before.
    struct Saturating(LinearProblem);

    impl SurrogateTrainer for Saturating {
        fn train(&self, x: ArrayView2<f64>, _y: ArrayView1<f64>) -> Result<Arc<dyn Surrogate>> {
            if x.nrows() >= 10 {
                let a = self.0.alpha.clone();
                Ok(Arc::new(FnSurrogate(move |r: ArrayView1<f64>| a.dot(&r))))
            } else {
                Ok(Arc::new(FnSurrogate(|r: ArrayView1<f64>| r[1])))
            }
        }
    }

    #[test]
    fn adaptive_picks_smallest_sufficient_split() {
        let p = LinearProblem::standard(5);
        let t = Saturating(p.clone());
        let grid = [0.05, 0.1, 0.2, 0.4, 0.6, 0.8];
        let hits = (0..20)
            .filter(|&r| adaptive_mfmc(&p, 100, &grid, 2000, &t, r).unwrap().chosen_n == Some(10))
            .count();
        assert!(hits >= 15, "{hits}");
    }

    #[test]
    fn biased_zero_surrogate_equals_mc() {
        let p = LinearProblem::standard(6);
        let b = biased_mfmc(&p, 30, 100, &ZeroTrainer, 3).unwrap();
        let m = simple_mc(&p, 30, 3).unwrap();
        assert_eq!(b.mean, m.mean);
        assert_eq!(b.variance, m.variance);
    }

    #[test]
    fn biased_interpolating_surrogate_returns_surrogate_variance() {
        let p = LinearProblem::standard(4);
        let t = LassoTrainer::new(LambdaStrategy::Fixed(0.0), FeatureTransform::Identity);
        let r = biased_mfmc(&p, 20, 500, &t, 5).unwrap();
        let model = t.fit(design(&p, 20, 5).unwrap().0.view(), design(&p, 20, 5).unwrap().1.view()).unwrap();
        let sb = SurrogateInputs::fresh(p.distribution(), 500, 5)
            .predict_all(&[&model])
            .unwrap()
            .remove(0);
        assert!((r.variance - mc_variance(sb.view()).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn budgets_are_honest() {
        let p = CountingProblem::new(LinearProblem::standard(6));
        let t = LassoTrainer::default();
        let grid = [0.2, 0.5, 0.8];
        let runs: Vec<Box<dyn Fn() -> EstimateResult>> = vec![
            Box::new(|| simple_mc(&p, 40, 1).unwrap()),
            Box::new(|| surrogate_only(&p, 40, 100, &t, 1).unwrap()),
            Box::new(|| static_mfmc(&p, 40, 0.8, 100, &t, 1).unwrap()),
            Box::new(|| adaptive_mfmc(&p, 40, &grid, 100, &t, 1).unwrap()),
            Box::new(|| biased_mfmc(&p, 40, 100, &t, 1).unwrap()),
        ];
        for run in runs {
            p.reset();
            let r = run();
            assert_eq!(p.calls(), r.budget_n);
            assert_eq!(r.budget_n, 40);
        }
    }

    #[test]
    fn chunked_w_matches_matrix() {
        let dist = InputDistribution::standard_normal(3);
        let m = 2 * W_CHUNK + 17;
        let w = crate::sampling::sample_stream(&dist, m, 8, Stream::Surrogate).unwrap().inputs;
        let s = FnSurrogate(|r: ArrayView1<f64>| r[0] - 2.0 * r[2]);
        let a = SurrogateInputs::Matrix(w.view()).predict_all(&[&s]).unwrap();
        let b = SurrogateInputs::fresh(&dist, m, 8).predict_all(&[&s]).unwrap();
        assert_eq!(a, b);
    }
}
