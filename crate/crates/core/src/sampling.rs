//! Seeded sampling from the benchmark input distributions.
//!
//! Every draw comes from a `ChaCha8Rng` seeded with `seed_from_u64(seed)`
//! and switched to a dedicated stream with `set_stream`. Different purposes
//! (the true-model design, the surrogate-only set, CV shuffles, reference
//! runs) therefore read disjoint keystreams even under the same seed, and a
//! repeat `r` of an experiment simply uses `base_seed + r`.
//!
//! Normal variates use the ziggurat sampler of `rand_distr::StandardNormal`;
//! uniform variates use `low + (high - low) * u` with `u` in `[0, 1)`.
//! Draws fill the matrix row by row, so the first `n` rows of a larger
//! sample equal a smaller sample with the same seed and stream.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Keystream identifiers. Keep the discriminants stable: they are part of
/// the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Inputs evaluated with the true model (the set `V`).
    Design = 0,
    /// Inputs evaluated with surrogates only (the set `W`).
    Surrogate = 1,
    /// Shuffles for cross-validation folds.
    CrossValidation = 2,
    /// Large reference runs.
    Reference = 3,
}

pub fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InputDistribution {
    /// Independent normal coordinates, `x_k ~ N(mean_k, std_k^2)`.
    MultivariateNormal { mean: Vec<f64>, std: Vec<f64> },
    /// Independent uniform coordinates on `[low, high]`.
    UniformIid { dim: usize, low: f64, high: f64 },
}

impl InputDistribution {
    pub fn standard_normal(dim: usize) -> Self {
        InputDistribution::MultivariateNormal {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn normal(mean: Vec<f64>, std: f64) -> Self {
        let dim = mean.len();
        InputDistribution::MultivariateNormal {
            mean,
            std: vec![std; dim],
        }
    }

    pub fn unit_cube(dim: usize) -> Self {
        InputDistribution::UniformIid {
            dim,
            low: 0.0,
            high: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InputDistribution::MultivariateNormal { mean, .. } => mean.len(),
            InputDistribution::UniformIid { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InputDistribution::MultivariateNormal { mean, std } => {
                if mean.is_empty() {
                    return Err(Error::param("normal distribution needs dim >= 1"));
                }
                if mean.len() != std.len() {
                    return Err(Error::param(format!(
                        "normal distribution has {} means but {} standard deviations",
                        mean.len(),
                        std.len()
                    )));
                }
                if let Some(s) = std.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
                    return Err(Error::param(format!("invalid standard deviation {s}")));
                }
                if mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::param("non-finite mean"));
                }
            }
            InputDistribution::UniformIid { dim, low, high } => {
                if *dim == 0 {
                    return Err(Error::param("uniform distribution needs dim >= 1"));
                }
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(Error::param(format!(
                        "uniform bounds must satisfy low < high, got [{low}, {high}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Fill `out` (n x d) with draws from `rng`, row by row.
    pub fn fill<R: Rng>(&self, rng: &mut R, mut out: ndarray::ArrayViewMut2<f64>) {
        match self {
            InputDistribution::MultivariateNormal { mean, std } => {
                for mut row in out.rows_mut() {
                    for (k, v) in row.iter_mut().enumerate() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v = mean[k] + std[k] * z;
                    }
                }
            }
            InputDistribution::UniformIid { low, high, .. } => {
                let width = high - low;
                for v in out.iter_mut() {
                    let u: f64 = rng.random();
                    *v = low + width * u;
                }
            }
        }
    }
}

/// Inputs (and optionally outputs) together with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub inputs: Array2<f64>,
    pub outputs: Option<Array1<f64>>,
    pub seed: u64,
    pub distribution: InputDistribution,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn with_outputs(mut self, outputs: Array1<f64>) -> Result<Self> {
        if outputs.len() != self.inputs.nrows() {
            return Err(Error::shape(format!(
                "{} outputs for {} input rows",
                outputs.len(),
                self.inputs.nrows()
            )));
        }
        self.outputs = Some(outputs);
        Ok(self)
    }
}

/// Draw `n` rows from `dist` on the design stream of `seed`.
pub fn sample(dist: &InputDistribution, n: usize, seed: u64) -> Result<SampleSet> {
    sample_stream(dist, n, seed, Stream::Design)
}

pub fn sample_stream(
    dist: &InputDistribution,
    n: usize,
    seed: u64,
    stream: Stream,
) -> Result<SampleSet> {
    dist.validate()?;
    if n == 0 {
        return Err(Error::param("sample size must be at least 1"));
    }
    let mut inputs = Array2::zeros((n, dist.dim()));
    let mut rng = rng_for(seed, stream);
    dist.fill(&mut rng, inputs.view_mut());
    Ok(SampleSet {
        inputs,
        outputs: None,
        seed,
        distribution: dist.clone(),
    })
}

/// Subtract column means from the inputs (and the mean from the outputs).
///
/// Returns the centred set and the offsets: one per input column, followed
/// by the output offset when outputs are present.
pub fn center_columns(s: &SampleSet) -> Result<(SampleSet, Vec<f64>)> {
    if s.inputs.nrows() < 2 {
        return Err(Error::Degenerate(
            "centering needs at least two rows".into(),
        ));
    }
    let (inputs, mut offsets) = center_matrix(&s.inputs);
    let outputs = s.outputs.as_ref().map(|y| {
        let (yc, m) = center_vector(y);
        offsets.push(m);
        yc
    });
    Ok((
        SampleSet {
            inputs,
            outputs,
            seed: s.seed,
            distribution: s.distribution.clone(),
        },
        offsets,
    ))
}

pub(crate) fn center_matrix(x: &Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let means = x
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(x.ncols()));
    let centred = x - &means.view().insert_axis(Axis(0));
    (centred, means.to_vec())
}

pub(crate) fn center_vector(y: &Array1<f64>) -> (Array1<f64>, f64) {
    let m = y.mean().unwrap_or(0.0);
    (y - m, m)
}
