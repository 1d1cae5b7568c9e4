//! Surrogate models and the trainers that produce them.
//!
//! Every multifidelity strategy in this crate is agnostic to how the
//! surrogate is built; it only needs a [`SurrogateTrainer`]. The Lasso
//! trainer is the default, the others exist for baselines and for injecting
//! known models in tests.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::lasso::{self, FeatureTransform, LambdaStrategy, LassoModel, TrainConfig};
use crate::problems::Problem;

pub trait Surrogate: Send + Sync {
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>>;

    /// Regularisation used in training, when the model has one.
    fn lambda(&self) -> Option<f64> {
        None
    }

    /// Number of nonzero weights, when the model is linear.
    fn nonzeros(&self) -> Option<usize> {
        None
    }
}

impl Surrogate for LassoModel {
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        LassoModel::predict(self, x)
    }

    fn lambda(&self) -> Option<f64> {
        Some(self.lambda)
    }

    fn nonzeros(&self) -> Option<usize> {
        Some(LassoModel::nonzeros(self))
    }
}

pub trait SurrogateTrainer: Send + Sync {
    fn train(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Arc<dyn Surrogate>>;
}

/// Lasso surrogate with a lambda-selection strategy and a feature transform.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoTrainer {
    pub strategy: LambdaStrategy,
    pub transform: FeatureTransform,
    pub config: TrainConfig,
}

impl Default for LassoTrainer {
    fn default() -> Self {
        LassoTrainer {
            strategy: LambdaStrategy::default(),
            transform: FeatureTransform::Identity,
            config: TrainConfig::default(),
        }
    }
}

impl LassoTrainer {
    pub fn new(strategy: LambdaStrategy, transform: FeatureTransform) -> Self {
        LassoTrainer {
            strategy,
            transform,
            config: TrainConfig::default(),
        }
    }

    pub fn fit(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<LassoModel> {
        lasso::fit_with_strategy(x, y, self.strategy, self.transform, &self.config)
    }
}

impl SurrogateTrainer for LassoTrainer {
    fn train(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Arc<dyn Surrogate>> {
        Ok(Arc::new(self.fit(x, y)?))
    }
}

/// Always returns `s(x) = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroTrainer;

impl SurrogateTrainer for ZeroTrainer {
    fn train(&self, x: ArrayView2<f64>, _y: ArrayView1<f64>) -> Result<Arc<dyn Surrogate>> {
        Ok(Arc::new(LassoModel::constant(x.ncols(), 0.0)))
    }
}

/// Ignores the training data and hands out the same model every time.
#[derive(Clone)]
pub struct FixedTrainer(pub Arc<dyn Surrogate>);

impl SurrogateTrainer for FixedTrainer {
    fn train(&self, _x: ArrayView2<f64>, _y: ArrayView1<f64>) -> Result<Arc<dyn Surrogate>> {
        Ok(self.0.clone())
    }
}

/// A problem used as its own (perfect) surrogate. Calls to this surrogate
/// are not budgeted: they stand in for a model that happens to be exact.
pub struct ExactSurrogate<P: Problem>(pub Arc<P>);

impl<P: Problem> Surrogate for ExactSurrogate<P> {
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        x.rows().into_iter().map(|r| self.0.eval(r)).collect()
    }
}

/// Wraps an arbitrary closure as a surrogate.
pub struct FnSurrogate<F>(pub F);

impl<F> Surrogate for FnSurrogate<F>
where
    F: Fn(ArrayView1<f64>) -> f64 + Send + Sync,
{
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(x.rows().into_iter().map(|r| (self.0)(r)).collect())
    }
}

pub(crate) fn check_predictions(p: &Array1<f64>, rows: usize) -> Result<()> {
    if p.len() != rows {
        return Err(Error::shape(format!(
            "surrogate returned {} values for {rows} rows",
            p.len()
        )));
    }
    Ok(())
}
