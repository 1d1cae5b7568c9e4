//! Benchmark functions with their input distributions and reference moments.

mod fput;
mod linear;
pub mod rk45;
mod sobol;

use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::sampling::InputDistribution;

pub use fput::{
    fput_energy, fput_initial_state, fput_kinetic_energy, fput_qoi, fput_rhs, fput_trajectory_end, FputProblem,
};
pub use linear::{linear_eval, benchmark_alpha, LinearProblem};
pub use rk45::{rk45_integrate, Rk45Options, Rk45Solution};
pub use sobol::{benchmark_coefficients, sobol_eval, sobol_reference, sobol_transform, SobolProblem};

/// An expensive black-box function `f: R^d -> R` with its input law.
pub trait Problem: Send + Sync {
    /// Short identifier used in output files.
    fn id(&self) -> String;

    fn distribution(&self) -> &InputDistribution;

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64>;

    fn reference(&self) -> ReferenceMoments;

    /// Evaluate every row. Rows are independent and may run in parallel.
    fn eval_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            let rows: Vec<_> = x.rows().into_iter().collect();
            let out: Result<Vec<f64>> = rows.into_par_iter().map(|r| self.eval(r)).collect();
            out.map(Array1::from)
        }
        #[cfg(not(feature = "parallel"))]
        {
            x.rows().into_iter().map(|r| self.eval(r)).collect()
        }
    }

    fn dim(&self) -> usize {
        self.distribution().dim()
    }
}

/// Where a reference value comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferenceSource {
    Analytic,
    /// Sample estimators over a large seeded Monte Carlo run.
    LargeMonteCarlo { samples: usize, seed: u64 },
    /// Not known yet; estimate with a large Monte Carlo run.
    EstimateByLargeMc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMoments {
    pub mean: f64,
    pub variance: f64,
    pub source: ReferenceSource,
}

impl ReferenceMoments {
    pub fn analytic(mean: f64, variance: f64) -> Self {
        ReferenceMoments {
            mean,
            variance,
            source: ReferenceSource::Analytic,
        }
    }

    pub fn unknown() -> Self {
        ReferenceMoments {
            mean: f64::NAN,
            variance: f64::NAN,
            source: ReferenceSource::EstimateByLargeMc,
        }
    }

    pub fn is_known(&self) -> bool {
        self.mean.is_finite() && self.variance.is_finite()
    }
}

/// Counts calls to the wrapped problem; used to audit budgets.
pub struct CountingProblem<P> {
    inner: P,
    calls: AtomicUsize,
}

impl<P: Problem> CountingProblem<P> {
    pub fn new(inner: P) -> Self {
        CountingProblem {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Problem> Problem for CountingProblem<P> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn distribution(&self) -> &InputDistribution {
        self.inner.distribution()
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.eval(x)
    }

    fn reference(&self) -> ReferenceMoments {
        self.inner.reference()
    }
}

impl<P: Problem + ?Sized> Problem for Box<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn distribution(&self) -> &InputDistribution {
        (**self).distribution()
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        (**self).eval(x)
    }

    fn reference(&self) -> ReferenceMoments {
        (**self).reference()
    }

    fn eval_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        (**self).eval_batch(x)
    }
}

impl<P: Problem + ?Sized> Problem for std::sync::Arc<P> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn distribution(&self) -> &InputDistribution {
        (**self).distribution()
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        (**self).eval(x)
    }

    fn reference(&self) -> ReferenceMoments {
        (**self).reference()
    }

    fn eval_batch(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        (**self).eval_batch(x)
    }
}
