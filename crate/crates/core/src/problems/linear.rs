use ndarray::{Array1, ArrayView1};

use super::{Problem, ReferenceMoments};
use crate::error::{Error, Result};
use crate::sampling::InputDistribution;

/// The weights `(1, 1/2, 1/5, 1/10, 1/20, 1/50, 1/100, 1/100, ...)`,
/// truncated or padded with `1/100` to length `d`.
pub fn benchmark_alpha(d: usize) -> Array1<f64> {
    const HEAD: [f64; 7] = [1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01];
    Array1::from_iter((0..d).map(|k| HEAD.get(k).copied().unwrap_or(0.01)))
}

/// `f(x) = alpha . x` with `x ~ N(0, I)`.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub alpha: Array1<f64>,
    dist: InputDistribution,
}

impl LinearProblem {
    pub fn new(alpha: Array1<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::param("linear problem needs d >= 1"));
        }
        let dist = InputDistribution::standard_normal(alpha.len());
        Ok(LinearProblem { alpha, dist })
    }

    pub fn standard(d: usize) -> Self {
        Self::new(benchmark_alpha(d.max(1))).expect("d >= 1")
    }

    /// `sum_k alpha_k^2`, exact because the covariance is the identity.
    pub fn variance(&self) -> f64 {
        self.alpha.dot(&self.alpha)
    }
}

pub fn linear_eval(p: &LinearProblem, x: ArrayView1<f64>) -> Result<f64> {
    if x.len() != p.alpha.len() {
        return Err(Error::shape(format!(
            "linear problem of dimension {} evaluated at a {}-vector",
            p.alpha.len(),
            x.len()
        )));
    }
    Ok(p.alpha.dot(&x))
}

impl Problem for LinearProblem {
    fn id(&self) -> String {
        format!("linear-d{}", self.alpha.len())
    }

    fn distribution(&self) -> &InputDistribution {
        &self.dist
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        linear_eval(self, x)
    }

    fn reference(&self) -> ReferenceMoments {
        ReferenceMoments::analytic(0.0, self.variance())
    }
}
