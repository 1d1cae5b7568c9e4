use ndarray::{Array1, ArrayView1};

use super::rk45::{rk45_integrate, Rk45Options};
use super::{Problem, ReferenceMoments, ReferenceSource};
use crate::error::{Error, Result};
use crate::sampling::InputDistribution;

/// Chain of `P` anharmonic oscillators between walls at 0 and 1.
///
/// The input vector is `(k'_1, ..., k'_P, alpha)`; the output is the kinetic
/// energy at the final time `T`.
#[derive(Debug, Clone)]
pub struct FputProblem {
    pub p: usize,
    pub t_final: f64,
    pub options: Rk45Options,
    /// Amplitude of the initial velocity profile `a sin(3 pi x_j)`.
    pub velocity_amplitude: f64,
    reference: Option<ReferenceMoments>,
    dist: InputDistribution,
}

impl FputProblem {
    pub const SIGMA: f64 = 1e-3;

    pub fn new(p: usize, t_final: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::param("FPUT chain needs P >= 2"));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::param("FPUT final time must be positive"));
        }
        let mut mean = vec![1.0; p + 1];
        mean[p] = 0.5;
        Ok(FputProblem {
            p,
            t_final,
            options: Rk45Options::default(),
            velocity_amplitude: 0.2,
            reference: None,
            dist: InputDistribution::normal(mean, Self::SIGMA),
        })
    }

    /// `P = 40`, `T = 500`.
    pub fn standard() -> Self {
        Self::new(40, 500.0).expect("valid constants")
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.options.rtol = rtol;
        self.options.atol = atol;
        self
    }

    pub fn with_reference(mut self, r: ReferenceMoments) -> Self {
        self.reference = Some(r);
        self
    }

    pub fn with_input_scale(mut self, sigma: f64) -> Self {
        let mean = match &self.dist {
            InputDistribution::MultivariateNormal { mean, .. } => mean.clone(),
            _ => unreachable!("FPUT inputs are Gaussian"),
        };
        self.dist = InputDistribution::normal(mean, sigma);
        self
    }

    /// Nominal parameters `(1, ..., 1, 1/2)`.
    pub fn nominal_params(&self) -> Array1<f64> {
        let mut v = Array1::ones(self.p + 1);
        v[self.p] = 0.5;
        v
    }

    fn split(&self, params: &ArrayView1<f64>) -> Result<(Vec<f64>, f64)> {
        if params.len() != self.p + 1 {
            return Err(Error::shape(format!(
                "FPUT with P = {} expects {} parameters, got {}",
                self.p,
                self.p + 1,
                params.len()
            )));
        }
        let k: Vec<f64> = params.iter().take(self.p).copied().collect();
        if k.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Domain("FPUT coupling constants must be positive".into()));
        }
        Ok((k, params[self.p]))
    }
}

/// Positions `j / (P + 1)` and velocities `a sin(3 pi x_j)`.
pub fn fput_initial_state(p: usize, amplitude: f64) -> Array1<f64> {
    let mut s = Array1::zeros(2 * p);
    for j in 1..=p {
        let x = j as f64 / (p + 1) as f64;
        s[j - 1] = x;
        s[p + j - 1] = amplitude * (3.0 * std::f64::consts::PI * x).sin();
    }
    s
}

fn rhs_into(k: &[f64], alpha: f64, y: &[f64], out: &mut [f64]) {
    let p = k.len();
    let (x, v) = y.split_at(p);
    let (dx, dv) = out.split_at_mut(p);
    dx.copy_from_slice(v);
    // gap to the left neighbour, with the wall at 0
    let mut left = x[0];
    for j in 0..p {
        let right = if j + 1 < p { x[j + 1] - x[j] } else { 1.0 - x[j] };
        dv[j] = k[j] * ((right - left) + alpha * (right * right - left * left));
        left = right;
    }
}

/// Time derivative of `(x_1..x_P, v_1..v_P)` for parameters `(k', alpha)`.
pub fn fput_rhs(state: ArrayView1<f64>, params: ArrayView1<f64>) -> Result<Array1<f64>> {
    if params.len() < 3 {
        return Err(Error::shape("FPUT parameters need P >= 2 couplings and alpha"));
    }
    let p = params.len() - 1;
    if state.len() != 2 * p {
        return Err(Error::shape(format!(
            "FPUT state must have length {}, got {}",
            2 * p,
            state.len()
        )));
    }
    let k: Vec<f64> = params.iter().take(p).copied().collect();
    let y: Vec<f64> = state.to_vec();
    let mut out = vec![0.0; 2 * p];
    rhs_into(&k, params[p], &y, &mut out);
    Ok(Array1::from(out))
}

/// `sum v_j^2 / (2 k'_j) + sum_{j=1}^{P+1} (l_j^2 / 2 + alpha l_j^3 / 3)`,
/// conserved by the dynamics.
pub fn fput_energy(state: ArrayView1<f64>, params: ArrayView1<f64>) -> f64 {
    let p = params.len() - 1;
    let alpha = params[p];
    let mut e = 0.0;
    for j in 0..p {
        e += state[p + j] * state[p + j] / (2.0 * params[j]);
    }
    let mut prev = 0.0;
    for j in 0..=p {
        let x = if j < p { state[j] } else { 1.0 };
        let l = x - prev;
        e += 0.5 * l * l + alpha * l * l * l / 3.0;
        prev = x;
    }
    e
}

/// `1/2 sum v_j^2` with unit masses.
pub fn fput_kinetic_energy(state: ArrayView1<f64>) -> f64 {
    let p = state.len() / 2;
    0.5 * state.iter().skip(p).map(|v| v * v).sum::<f64>()
}

/// Integrate the state to time `t` and return it.
pub fn fput_trajectory_end(problem: &FputProblem, params: ArrayView1<f64>, y0: ArrayView1<f64>, t: f64, opts: &Rk45Options) -> Result<Array1<f64>> {
    let (k, alpha) = problem.split(&params)?;
    if y0.len() != 2 * problem.p {
        return Err(Error::shape("initial state length must be 2P"));
    }
    let y0 = y0.to_vec();
    let sol = rk45_integrate(|_, y, d| rhs_into(&k, alpha, y, d), &y0, (0.0, t), opts)?;
    Ok(Array1::from(sol.y))
}

/// Kinetic energy at `T` starting from the standard initial condition.
pub fn fput_qoi(problem: &FputProblem, params: ArrayView1<f64>) -> Result<f64> {
    let y0 = fput_initial_state(problem.p, problem.velocity_amplitude);
    let y = fput_trajectory_end(problem, params, y0.view(), problem.t_final, &problem.options)?;
    Ok(fput_kinetic_energy(y.view()))
}

impl Problem for FputProblem {
    fn id(&self) -> String {
        format!("fput-p{}", self.p)
    }

    fn distribution(&self) -> &InputDistribution {
        &self.dist
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        fput_qoi(self, x)
    }

    fn reference(&self) -> ReferenceMoments {
        self.reference.clone().unwrap_or_else(ReferenceMoments::unknown)
    }
}

impl ReferenceMoments {
    /// Plain-text `key = value` lines: problem, seed, samples, mean, variance.
    pub fn to_fixture(&self, problem: &str) -> String {
        let (seed, samples) = match self.source {
            ReferenceSource::LargeMonteCarlo { samples, seed } => (seed, samples),
            _ => (0, 0),
        };
        format!(
            "problem = {problem}\nseed = {seed}\nsamples = {samples}\nmean = {:.17e}\nvariance = {:.17e}\n",
            self.mean, self.variance
        )
    }

    /// Parse the output of [`ReferenceMoments::to_fixture`]; returns the
    /// problem id with the moments.
    pub fn from_fixture(text: &str) -> Result<(String, ReferenceMoments)> {
        let mut problem = None;
        let mut seed = None;
        let mut samples = None;
        let mut mean = None;
        let mut variance = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed fixture line '{line}'")))?;
            let v = v.trim();
            let bad = |_| Error::Config(format!("bad value for {}: '{v}'", k.trim()));
            match k.trim() {
                "problem" => problem = Some(v.to_string()),
                "seed" => seed = Some(v.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                "samples" => samples = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "mean" => mean = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "variance" => variance = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                other => return Err(Error::Config(format!("unknown fixture key '{other}'"))),
            }
        }
        let missing = |k: &str| Error::Config(format!("fixture is missing '{k}'"));
        Ok((
            problem.ok_or_else(|| missing("problem"))?,
            ReferenceMoments {
                mean: mean.ok_or_else(|| missing("mean"))?,
                variance: variance.ok_or_else(|| missing("variance"))?,
                source: ReferenceSource::LargeMonteCarlo {
                    samples: samples.ok_or_else(|| missing("samples"))?,
                    seed: seed.ok_or_else(|| missing("seed"))?,
                },
            },
        ))
    }
}
