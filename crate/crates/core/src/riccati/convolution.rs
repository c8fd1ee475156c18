//! The convolution Riccati equation `g = Q(u, R_lambda/lambda * g)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::kernel::{ConvKernel, KernelSpec};
use crate::resolvent::ScaledResolvent;

use super::{check_inputs, ExponentTriple, ModelParams, SolverConfig};

#[derive(Debug, Clone, Serialize)]
pub struct ConvolutionRiccatiSolution {
    pub grid: UniformGrid,
    pub g: Vec<Complex64>,
    /// `psi = R_lambda/lambda * g`; `g = Q(u, psi)` holds to the corrector tolerance.
    pub psi: Vec<Complex64>,
    /// `max_j |g_j - Q(u, psi_j)|`.
    pub certificate: f64,
}

pub fn solve_convolution_riccati(
    k: &KernelSpec,
    m: &ModelParams,
    u: Complex64,
    horizon: f64,
    n: usize,
) -> Result<ConvolutionRiccatiSolution> {
    k.validate()?;
    let grid = check_inputs(m, &ExponentTriple::price(u), horizon, n)?;
    let cfg = SolverConfig::default();
    let dt = grid.dt();
    let w = ScaledResolvent::new(k, m.lambda, horizon, n)?.weights(dt, n);
    let q = |z: Complex64| m.q(u, z);

    let mut g = vec![Complex64::default(); n + 1];
    let mut psi = vec![Complex64::default(); n + 1];
    g[0] = q(Complex64::default());
    for j in 1..=n {
        let past = w.history(j, &g);
        let mut x = g[j - 1];
        let mut last = f64::INFINITY;
        let mut done = false;
        for _ in 0..cfg.max_iter {
            let next = q(past + x * w.hat[0]);
            if !(next.re.is_finite() && next.im.is_finite()) || next.norm() > cfg.blowup {
                return Err(Error::BlowUp {
                    step: j,
                    magnitude: next.norm(),
                });
            }
            last = (next - x).norm();
            x = next;
            if last <= cfg.tol * x.norm().max(1.0) {
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::NoConvergence {
                step: j,
                iterations: cfg.max_iter,
                last_update: last,
            });
        }
        g[j] = x;
        psi[j] = past + x * w.hat[0];
    }
    let certificate = g
        .iter()
        .zip(&psi)
        .map(|(a, p)| (a - q(*p)).norm())
        .fold(0.0, f64::max);
    Ok(ConvolutionRiccatiSolution {
        grid,
        g,
        psi,
        certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::solve_riccati_volterra;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn desk() -> ModelParams {
        ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap()
    }

    #[test]
    fn trivial_exponents() {
        let k = KernelSpec::rough(0.6).unwrap();
        for u in [0.0, 1.0] {
            let s = solve_convolution_riccati(&k, &desk(), c(u, 0.0), 1.0, 100).unwrap();
            assert!(s.g.iter().all(|x| x.norm() == 0.0));
        }
    }

    #[test]
    fn matches_kernel_form() {
        let m = desk();
        let u = c(0.0, 2.0);
        for k in [KernelSpec::constant(1.0), KernelSpec::rough(0.6).unwrap()] {
            let s = solve_convolution_riccati(&k, &m, u, 1.0, 1000).unwrap();
            let v = solve_riccati_volterra(&k, &m, &ExponentTriple::price(u), 1.0, 1000).unwrap();
            let err =
                s.g.iter()
                    .zip(&v.q_of_psi)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
            assert!(err < 2e-4, "{k:?} {err}");
            assert!(s.certificate < 1e-11);
        }
    }
}
