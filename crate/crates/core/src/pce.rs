//! Total-degree polynomial chaos expansions fitted with the Lasso.
//!
//! Inputs are mapped to the reference variable `xi = (x - shift) / scale`
//! of the polynomial family: uniform on `[-1, 1]` for Legendre, standard
//! normal for (probabilists') Hermite. The basis is not normalised; the
//! stored norms `E[Psi^2]` are used for the variance.

use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lasso::{self, FeatureTransform, LambdaStrategy, TrainConfig};
use crate::sampling::InputDistribution;
use crate::surrogate::{Surrogate, SurrogateTrainer};

pub const DEFAULT_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PceFamily {
    Legendre,
    Hermite,
}

impl PceFamily {
    /// `psi_0(xi), ..., psi_p(xi)` by the three-term recurrence.
    pub fn eval_all(&self, xi: f64, p: usize, out: &mut [f64]) {
        out[0] = 1.0;
        if p == 0 {
            return;
        }
        out[1] = xi;
        for k in 1..p {
            let kf = k as f64;
            out[k + 1] = match self {
                PceFamily::Legendre => ((2.0 * kf + 1.0) * xi * out[k] - kf * out[k - 1]) / (kf + 1.0),
                PceFamily::Hermite => xi * out[k] - kf * out[k - 1],
            };
        }
    }

    /// `E[psi_k^2]` under the family's reference density.
    pub fn norm(&self, k: usize) -> f64 {
        match self {
            PceFamily::Legendre => 1.0 / (2 * k + 1) as f64,
            PceFamily::Hermite => (1..=k).map(|i| i as f64).product(),
        }
    }
}

/// `C(d + p, p)` without overflow for the sizes that matter.
pub fn basis_size(d: usize, p: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=p as u128 {
        // exact at every step: c * (d + i) is divisible by i
        c = c.saturating_mul(d as u128 + i) / i;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceBasis {
    pub d: usize,
    pub p: usize,
    pub family: PceFamily,
    /// Multi-indices in graded lexicographic order; the first is all zeros.
    pub indices: Vec<Vec<u32>>,
    pub norms: Vec<f64>,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

fn enumerate(d: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if prefix.len() + 1 == d {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        enumerate(d, total - first, prefix, out);
        prefix.pop();
    }
}

/// All multi-indices of total degree at most `p`, by degree and then
/// lexicographically with larger leading entries first.
pub fn build_basis(d: usize, p: usize, family: PceFamily) -> Result<PceBasis> {
    build_basis_capped(d, p, family, DEFAULT_CAP)
}

pub fn build_basis_capped(d: usize, p: usize, family: PceFamily, cap: usize) -> Result<PceBasis> {
    if d == 0 {
        return Err(Error::param("PCE basis needs d >= 1"));
    }
    let size = basis_size(d, p);
    if size > cap as u128 {
        return Err(Error::Capacity { requested: size, cap });
    }
    let mut indices = Vec::with_capacity(size as usize);
    for total in 0..=p as u32 {
        enumerate(d, total, &mut Vec::with_capacity(d), &mut indices);
    }
    let norms = indices
        .iter()
        .map(|a| a.iter().map(|&k| family.norm(k as usize)).product())
        .collect();
    let (shift, scale) = match family {
        PceFamily::Legendre => (vec![0.5; d], vec![0.5; d]),
        PceFamily::Hermite => (vec![0.0; d], vec![1.0; d]),
    };
    Ok(PceBasis {
        d,
        p,
        family,
        indices,
        norms,
        shift,
        scale,
    })
}

impl PceBasis {
    /// Basis matched to an input distribution: Legendre on the uniform box,
    /// Hermite on the Gaussian's mean and scale.
    pub fn for_distribution(dist: &InputDistribution, p: usize) -> Result<Self> {
        match dist {
            InputDistribution::UniformIid { dim, low, high } => {
                let mut b = build_basis(*dim, p, PceFamily::Legendre)?;
                b.shift = vec![0.5 * (low + high); *dim];
                b.scale = vec![0.5 * (high - low); *dim];
                Ok(b)
            }
            InputDistribution::MultivariateNormal { mean, std } => {
                if std.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::param("Hermite basis needs positive input scales"));
                }
                let mut b = build_basis(mean.len(), p, PceFamily::Hermite)?;
                b.shift = mean.clone();
                b.scale = std.clone();
                Ok(b)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `n x P` matrix of basis values.
    pub fn design_matrix(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.d {
            return Err(Error::shape(format!("basis of dimension {} applied to {} columns", self.d, x.ncols())));
        }
        let sparse: Vec<Vec<(usize, usize)>> = self
            .indices
            .iter()
            .map(|a| a.iter().enumerate().filter(|(_, &k)| k > 0).map(|(j, &k)| (j, k as usize)).collect())
            .collect();
        let p1 = self.p + 1;
        let mut out = Array2::zeros((x.nrows(), self.len()));
        let mut table = vec![0.0; self.d * p1];
        for (i, row) in x.rows().into_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let xi = (v - self.shift[j]) / self.scale[j];
                if self.family == PceFamily::Legendre && !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&xi) {
                    return Err(Error::Domain(format!("input {v} outside the Legendre support")));
                }
                self.family.eval_all(xi, self.p, &mut table[j * p1..(j + 1) * p1]);
            }
            for (c, terms) in sparse.iter().enumerate() {
                out[[i, c]] = terms.iter().map(|&(j, k)| table[j * p1 + k]).product();
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceModel {
    pub basis: PceBasis,
    /// One coefficient per basis element; `coeffs[0]` multiplies the constant.
    pub coeffs: Array1<f64>,
    pub lambda: f64,
}

impl PceModel {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.basis.design_matrix(x)?.dot(&self.coeffs))
    }
}

/// Lasso fit of the non-constant coefficients; the constant one is the
/// unpenalised intercept recovered from the centring offsets.
pub fn pce_fit(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    basis: &PceBasis,
    strategy: LambdaStrategy,
    cfg: &TrainConfig,
) -> Result<PceModel> {
    let psi = basis.design_matrix(x)?;
    let mut coeffs = Array1::zeros(basis.len());
    if basis.len() == 1 {
        coeffs[0] = crate::estimators::mc_mean(y)?;
        return Ok(PceModel {
            basis: basis.clone(),
            coeffs,
            lambda: 0.0,
        });
    }
    let rest = psi.slice(ndarray::s![.., 1..]);
    let m = lasso::fit_with_strategy(rest, y, strategy, FeatureTransform::Identity, cfg)?;
    coeffs[0] = m.output_offset - m.beta.dot(&m.input_offsets);
    coeffs.slice_mut(ndarray::s![1..]).assign(&m.beta);
    Ok(PceModel {
        basis: basis.clone(),
        coeffs,
        lambda: m.lambda,
    })
}

/// `(beta_1, sum_{i >= 2} beta_i^2 E[Psi_i^2])`.
pub fn pce_moments(m: &PceModel) -> (f64, f64) {
    let var = m
        .coeffs
        .iter()
        .zip(&m.basis.norms)
        .skip(1)
        .map(|(b, n)| b * b * n)
        .sum();
    (m.coeffs[0], var)
}

impl Surrogate for PceModel {
    fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        PceModel::predict(self, x)
    }

    fn lambda(&self) -> Option<f64> {
        Some(self.lambda)
    }

    fn nonzeros(&self) -> Option<usize> {
        Some(self.coeffs.iter().skip(1).filter(|c| **c != 0.0).count())
    }
}

/// Trains a PCE on a fixed basis.
#[derive(Debug, Clone)]
pub struct PceTrainer {
    pub basis: PceBasis,
    pub strategy: LambdaStrategy,
    pub config: TrainConfig,
}

impl PceTrainer {
    pub fn fit(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<PceModel> {
        pce_fit(x, y, &self.basis, self.strategy, &self.config)
    }
}

impl SurrogateTrainer for PceTrainer {
    fn train(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Arc<dyn Surrogate>> {
        Ok(Arc::new(self.fit(x, y)?))
    }
}
