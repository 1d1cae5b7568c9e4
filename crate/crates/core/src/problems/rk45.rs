//! Dormand-Prince 5(4) with proportional-integral step control.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rk45Options {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub first_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Rk45Options {
            rtol: 1e-6,
            atol: 1e-9,
            first_step: None,
            max_steps: 10_000_000,
        }
    }
}

impl Rk45Options {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Rk45Options {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rk45Solution {
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<F>(rhs: &mut F, t0: f64, y0: &[f64], f0: &[f64], span: f64, o: &Rk45Options) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len() as f64;
    let sc: Vec<f64> = y0.iter().map(|y| o.atol + o.rtol * y.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s) * (a / s)).sum::<f64>() / n).sqrt();
    let d0 = rms(y0);
    let d1 = rms(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms(&diff) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrate `y' = rhs(t, y)` from `t0` to `t1` and return the final state.
///
/// `rhs(t, y, out)` writes the derivative into `out`. The local error of
/// every accepted step satisfies the RMS criterion
/// `|| err / (atol + rtol max(|y_n|, |y_n+1|)) || <= 1`.
pub fn rk45_integrate<F>(mut rhs: F, y0: &[f64], t_span: (f64, f64), opts: &Rk45Options) -> Result<Rk45Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let (t0, t1) = t_span;
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::param(format!("integration span ({t0}, {t1}) must satisfy t1 > t0")));
    }
    if !(opts.rtol > 0.0) || !(opts.atol > 0.0) {
        return Err(Error::param("integrator tolerances must be positive"));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("initial state must be finite"));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut ynew = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];

    rhs(t0, &y, &mut k1);
    let mut evals = 1;
    let span = t1 - t0;
    let mut h = match opts.first_step {
        Some(h) if h > 0.0 => h.min(span),
        _ => {
            evals += 1;
            initial_step(&mut rhs, t0, &y, &k1, span, opts)
        }
    };

    let mut t = t0;
    let mut accepted = 0;
    let mut rejected = 0;
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    while t < t1 {
        if accepted + rejected >= opts.max_steps {
            return Err(Error::Integration {
                t,
                step: h,
                steps: accepted + rejected,
            });
        }
        let min_step = 16.0 * f64::EPSILON * t.abs().max(span);
        if h < min_step {
            return Err(Error::Integration {
                t,
                step: h,
                steps: accepted + rejected,
            });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + h, &tmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t + h, &ynew, &mut k7);
        evals += 6;
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&err, &y, &ynew, opts.rtol, opts.atol);
        if !en.is_finite() {
            rejected += 1;
            last_rejected = true;
            h *= MIN_FACTOR;
            continue;
        }

        let fac11 = en.powf(EXPO);
        if en <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / MAX_FACTOR, 1.0 / MIN_FACTOR);
            let mut hnew = h / fac;
            if last_rejected {
                hnew = hnew.min(h);
            }
            fac_old = en.max(1e-4);
            accepted += 1;
            last_rejected = false;
            t = if last { t1 } else { t + h };
            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            h = hnew;
        } else {
            rejected += 1;
            last_rejected = true;
            h /= (fac11 / SAFETY).min(1.0 / MIN_FACTOR);
        }
    }

    Ok(Rk45Solution {
        y,
        accepted,
        rejected,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(rtol: f64) -> f64 {
        let s = rk45_integrate(|_, y, d| d[0] = -y[0], &[1.0], (0.0, 1.0), &Rk45Options::new(rtol, 1e-14)).unwrap();
        (s.y[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn exponential_decay() {
        for rtol in [1e-4, 1e-6, 1e-8] {
            let e = decay(rtol);
            assert!(e < 10.0 * rtol, "rtol {rtol}: error {e}");
        }
    }

    #[test]
    fn tightening_tolerance_reduces_error() {
        for rtol in [1e-4, 1e-6] {
            assert!(decay(rtol / 100.0) * 10.0 <= decay(rtol));
        }
    }

    #[test]
    fn harmonic_oscillator_period() {
        let rtol = 1e-8;
        let s = rk45_integrate(
            |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            },
            &[1.0, 0.0],
            (0.0, 2.0 * std::f64::consts::PI),
            &Rk45Options::new(rtol, 1e-12),
        )
        .unwrap();
        assert!((s.y[0] - 1.0).abs() < 10.0 * rtol, "{:?}", s.y);
        assert!(s.y[1].abs() < 10.0 * rtol, "{:?}", s.y);
        assert_eq!(s.evaluations, 2 + 6 * (s.accepted + s.rejected));
    }

    #[test]
    fn time_dependent_rhs_hits_end_point() {
        // y' = cos t, y(0) = 0 -> y(3) = sin 3
        let s = rk45_integrate(|t, _, d| d[0] = t.cos(), &[0.0], (0.0, 3.0), &Rk45Options::new(1e-10, 1e-12)).unwrap();
        assert!((s.y[0] - 3f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y^2, y(0) = 1 explodes at t = 1
        let r = rk45_integrate(|_, y, d| d[0] = y[0] * y[0], &[1.0], (0.0, 2.0), &Rk45Options::default());
        assert!(matches!(r, Err(Error::Integration { .. })), "{r:?}");
    }

    #[test]
    fn invalid_arguments() {
        let f = |_: f64, _: &[f64], d: &mut [f64]| d[0] = 0.0;
        assert!(rk45_integrate(f, &[1.0], (1.0, 1.0), &Rk45Options::default()).is_err());
        assert!(rk45_integrate(f, &[1.0], (0.0, 1.0), &Rk45Options::new(0.0, 1e-9)).is_err());
    }
}
