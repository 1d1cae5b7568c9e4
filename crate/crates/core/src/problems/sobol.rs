use ndarray::{Array1, ArrayView1};

use super::{Problem, ReferenceMoments};
use crate::error::{Error, Result};
use crate::sampling::InputDistribution;

/// `(1, 2, 5, 10, 20, 50, 100, 500, 500, ...)` truncated or padded to `d`.
pub fn benchmark_coefficients(d: usize) -> Array1<f64> {
    const HEAD: [f64; 8] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 500.0];
    Array1::from_iter((0..d).map(|k| HEAD.get(k).copied().unwrap_or(500.0)))
}

/// `f(x) = prod_i (|4 x_i - 2| + c_i) / (1 + c_i)` on `U[0, 1]^d`.
#[derive(Debug, Clone)]
pub struct SobolProblem {
    pub c: Array1<f64>,
    dist: InputDistribution,
}

impl SobolProblem {
    pub fn new(c: Array1<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::param("Sobol problem needs d >= 1"));
        }
        if c.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::param("Sobol coefficients must be nonnegative"));
        }
        let dist = InputDistribution::unit_cube(c.len());
        Ok(SobolProblem { c, dist })
    }

    pub fn standard(d: usize) -> Self {
        Self::new(benchmark_coefficients(d.max(1))).expect("valid coefficients")
    }
}

pub fn sobol_eval(p: &SobolProblem, x: ArrayView1<f64>) -> Result<f64> {
    if x.len() != p.c.len() {
        return Err(Error::shape(format!(
            "Sobol problem of dimension {} evaluated at a {}-vector",
            p.c.len(),
            x.len()
        )));
    }
    let mut f = 1.0;
    for (&xi, &ci) in x.iter().zip(p.c.iter()) {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::Domain(format!("Sobol input {xi} outside [0, 1]")));
        }
        f *= ((4.0 * xi - 2.0).abs() + ci) / (1.0 + ci);
    }
    Ok(f)
}

/// Mean 1 and variance `prod_i (1 + 1 / (3 (1 + c_i)^2)) - 1`.
pub fn sobol_reference(p: &SobolProblem) -> ReferenceMoments {
    let prod: f64 = p
        .c
        .iter()
        .map(|c| 1.0 + 1.0 / (3.0 * (1.0 + c) * (1.0 + c)))
        .product();
    ReferenceMoments::analytic(1.0, prod - 1.0)
}

/// `zeta(x) = |x - 0.5|` element-wise.
pub fn sobol_transform(x: ArrayView1<f64>) -> Array1<f64> {
    x.mapv(|v| (v - 0.5).abs())
}

impl Problem for SobolProblem {
    fn id(&self) -> String {
        format!("sobol-d{}", self.c.len())
    }

    fn distribution(&self) -> &InputDistribution {
        &self.dist
    }

    fn eval(&self, x: ArrayView1<f64>) -> Result<f64> {
        sobol_eval(self, x)
    }

    fn reference(&self) -> ReferenceMoments {
        sobol_reference(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample;
    use ndarray::{array, Array1};

    #[test]
    fn evaluation_examples() {
        let p = SobolProblem::standard(8);
        let half = Array1::from_elem(8, 0.5);
        let expect: f64 = p.c.iter().map(|c| c / (1.0 + c)).product();
        assert!((sobol_eval(&p, half.view()).unwrap() - expect).abs() < 1e-15);
        let edge: f64 = p.c.iter().map(|c| (2.0 + c) / (1.0 + c)).product();
        for v in [0.0, 1.0] {
            let x = Array1::from_elem(8, v);
            assert!((sobol_eval(&p, x.view()).unwrap() - edge).abs() < 1e-15);
        }
        let p1 = SobolProblem::new(array![1.0]).unwrap();
        assert_eq!(sobol_eval(&p1, array![0.25].view()).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let p = SobolProblem::standard(2);
        assert!(matches!(
            sobol_eval(&p, array![0.5, 1.5].view()),
            Err(Error::Domain(_))
        ));
        assert!(sobol_eval(&p, array![0.5].view()).is_err());
        assert!(SobolProblem::new(array![-1.0]).is_err());
    }

    #[test]
    fn reference_examples() {
        let r = sobol_reference(&SobolProblem::new(array![1.0]).unwrap());
        assert_eq!(r.mean, 1.0);
        assert!((r.variance - 1.0 / 12.0).abs() < 1e-15);
        let r = sobol_reference(&SobolProblem::new(array![1.0, 2.0]).unwrap());
        let expect = (1.0 + 1.0 / 12.0) * (1.0 + 1.0 / 27.0) - 1.0;
        assert!((r.variance - expect).abs() < 1e-15);
        assert!((r.variance - 0.123_456_790_123).abs() < 1e-11);
        let r = sobol_reference(&SobolProblem::new(Array1::from_elem(5, 1e12)).unwrap());
        assert!(r.variance < 1e-20);
    }

    #[test]
    fn transform_examples() {
        assert_eq!(sobol_transform(array![0.5, 0.5].view()), array![0.0, 0.0]);
        assert_eq!(sobol_transform(array![0.0, 1.0].view()), array![0.5, 0.5]);
    }

    #[test]
    fn symmetric_function_has_zero_linear_covariance() {
        let p = SobolProblem::standard(8);
        let n = 100_000;
        let x = sample(p.distribution(), n, 5).unwrap().inputs;
        let y: Array1<f64> = x.rows().into_iter().map(|r| sobol_eval(&p, r).unwrap()).collect();
        let ym = y.mean().unwrap();
        for k in 0..3 {
            let col = x.column(k);
            let xm = col.mean().unwrap();
            let prod: Array1<f64> = col.iter().zip(y.iter()).map(|(a, b)| (a - xm) * (b - ym)).collect();
            let cov = prod.mean().unwrap();
            let se = prod.std(1.0) / (n as f64).sqrt();
            assert!(cov.abs() < 4.0 * se, "dim {k}: {cov} vs se {se}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reflection_symmetry(x in proptest::collection::vec(0.0f64..=1.0, 6)) {
                let p = SobolProblem::standard(6);
                let x = Array1::from(x);
                let r = x.mapv(|v| 1.0 - v);
                let a = sobol_eval(&p, x.view()).unwrap();
                let b = sobol_eval(&p, r.view()).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a);
                prop_assert!(a > 0.0);
                let za = sobol_transform(x.view());
                let zb = sobol_transform(r.view());
                for (u, v) in za.iter().zip(zb.iter()) {
                    prop_assert!((u - v).abs() < 1e-15);
                }
            }
        }
    }
}
