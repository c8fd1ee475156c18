//! Mild-SPDE form of the `u = w = 0` Riccati equation: with `h = v delta_0`,
//! `Psi(t, x) = R_Psi(psi(t - x))` for `x < t`, and
//! `psi(t) = v K(t) + int_0^t Psi(t, x) K(x) dx`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::kernel::{ConvKernel, KernelSpec};

use super::{r_psi, ModelParams, RiccatiSolution};

/// `Psi` on the grid together with the residual of the reconstruction
/// identity at each node.
#[derive(Debug, Clone)]
pub struct SpdeDual {
    pub grid: UniformGrid,
    pub v: Complex64,
    /// `R_Psi(psi(t_m))`, so `Psi(t_j, x_i) = r_values[j - i]` for `i < j`.
    pub r_values: Vec<Complex64>,
    pub residuals: Vec<f64>,
    pub residual: f64,
}

impl SpdeDual {
    /// `Psi(t_j, x_i)` for `x_i < t_j`. The boundary mass on `x = t` has no
    /// pointwise value.
    pub fn value(&self, j: usize, i: usize) -> Option<Complex64> {
        (i < j && j < self.r_values.len()).then(|| self.r_values[j - i])
    }
}

pub fn reconstruct_spde_psi(
    k: &KernelSpec,
    m: &ModelParams,
    sol: &RiccatiSolution,
    v: Complex64,
) -> Result<SpdeDual> {
    if sol.exponent.u != Complex64::default() || sol.exponent.w != Complex64::default() {
        return Err(Error::arg("the SPDE reconstruction needs u = w = 0"));
    }
    if sol.exponent.v != v {
        return Err(Error::arg("the solution was computed for a different v"));
    }
    if sol.kernel != *k {
        return Err(Error::arg(
            "the solution was computed for a different kernel",
        ));
    }
    let grid = sol.grid;
    let n = grid.steps;
    let times = grid.times();
    let r: Vec<Complex64> = sol.psi.iter().map(|&p| r_psi(m, p)).collect();
    let w = k.weights(grid.dt(), n);

    let mut residuals = vec![0.0; n + 1];
    match &sol.singular {
        // near x = t the integrand inherits the singularity of psi at 0:
        // integrate R_Psi(S) in closed form and the remainder by product integration
        Some(series) => {
            let rem: Vec<Complex64> = (0..=n)
                .map(|j| {
                    if j == 0 {
                        Complex64::default()
                    } else {
                        r[j] - r_psi(m, series.eval(times[j]))
                    }
                })
                .collect();
            let conv = w.convolve(&rem);
            for j in 1..=n {
                let rhs = v * k.value(times[j]) + series.kernel_drive(times[j]) + conv[j];
                residuals[j] = (sol.psi[j] - rhs).norm();
            }
        }
        None => {
            let conv = w.convolve(&r);
            for j in 1..=n {
                residuals[j] = (sol.psi[j] - v * k.value(times[j]) - conv[j]).norm();
            }
        }
    }
    let residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(SpdeDual {
        grid,
        v,
        r_values: r,
        residuals,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{solve_riccati_volterra, ExponentTriple};

    fn desk() -> ModelParams {
        ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap()
    }

    fn residual(k: &KernelSpec, v: f64, n: usize) -> f64 {
        let v = Complex64::new(v, 0.0);
        let s = solve_riccati_volterra(k, &desk(), &ExponentTriple::variance(v), 1.0, n).unwrap();
        reconstruct_spde_psi(k, &desk(), &s, v).unwrap().residual
    }

    #[test]
    fn zero_boundary_value() {
        let k = KernelSpec::rough(0.6).unwrap();
        let s = solve_riccati_volterra(
            &k,
            &desk(),
            &ExponentTriple::variance(Complex64::default()),
            1.0,
            50,
        )
        .unwrap();
        let d = reconstruct_spde_psi(&k, &desk(), &s, Complex64::default()).unwrap();
        assert!(d.r_values.iter().all(|x| x.norm() == 0.0));
        assert_eq!(d.residual, 0.0);
        assert_eq!(d.value(3, 3), None);
        assert_eq!(d.value(3, 1), Some(Complex64::default()));
    }

    #[test]
    fn identity_holds() {
        assert!(residual(&KernelSpec::constant(1.0), -1.0, 500) < 1e-12);
        assert!(residual(&KernelSpec::rough(0.6).unwrap(), -1.0, 500) < 1e-3);
    }

    #[test]
    fn rejects_mismatched_solution() {
        let k = KernelSpec::constant(1.0);
        let s = solve_riccati_volterra(
            &k,
            &desk(),
            &ExponentTriple::variance(Complex64::new(-1.0, 0.0)),
            1.0,
            20,
        )
        .unwrap();
        assert!(reconstruct_spde_psi(&k, &desk(), &s, Complex64::new(-2.0, 0.0)).is_err());
    }
}
