//! Fractional Adams-Bashforth-Moulton scheme for
//! `D^alpha psi = Q(u, psi) - lambda psi`, `psi(0) = 0`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::cumulative_trapezoid;
use crate::kernel::{ConvKernel, KernelSpec};
use crate::special::recip_gamma;

use super::volterra::{assemble, Parts};
use super::{
    check_inputs, Drive, ExponentTriple, ModelParams, RiccatiSolution, SolverConfig, SolverKind,
};

/// One predictor and one corrector per step: first-order accurate for
/// `alpha < 1`, Heun's method for `alpha = 1`.
pub fn solve_fractional_riccati(
    alpha: f64,
    m: &ModelParams,
    u: Complex64,
    horizon: f64,
    n: usize,
) -> Result<RiccatiSolution> {
    let k = KernelSpec::rough(alpha)?;
    let e = ExponentTriple::price(u);
    let grid = check_inputs(m, &e, horizon, n)?;
    let guard = SolverConfig::default().blowup;
    let dt = grid.dt();
    let drive = Drive::new(m, &e);

    let ga = dt.powf(alpha) * recip_gamma(alpha + 2.0);
    let gb = dt.powf(alpha) * recip_gamma(alpha + 1.0);
    let p = alpha + 1.0;
    let pw: Vec<f64> = (0..=n + 1).map(|i| (i as f64).powf(p)).collect();
    let aw: Vec<f64> = (0..=n + 1).map(|i| (i as f64).powf(alpha)).collect();
    // predictor b_m = (m+1)^a - m^a, corrector a_m = (m+1)^p - 2 m^p + (m-1)^p
    let b: Vec<f64> = (0..=n).map(|i| gb * (aw[i + 1] - aw[i])).collect();
    let a: Vec<f64> = (0..=n)
        .map(|i| {
            if i == 0 {
                ga
            } else {
                ga * (pw[i + 1] - 2.0 * pw[i] + pw[i - 1])
            }
        })
        .collect();

    let mut psi = vec![Complex64::default(); n + 1];
    let mut f = vec![Complex64::default(); n + 1];
    f[0] = drive.eval(psi[0]);
    for j in 1..=n {
        let mut pred = Complex64::default();
        for i in 0..j {
            pred += f[i] * b[j - 1 - i];
        }
        let jf = (j - 1) as f64;
        let a0 = ga * (pw[j - 1] - (jf - alpha) * aw[j]);
        let mut corr = f[0] * a0;
        for i in 1..j {
            corr += f[i] * a[j - i];
        }
        let y = corr + drive.eval(pred) * a[0];
        if !(y.re.is_finite() && y.im.is_finite()) {
            return Err(Error::NonFinite {
                index: j,
                detail: "fractional Adams step produced a non-finite value".into(),
            });
        }
        if y.norm() > guard {
            return Err(Error::BlowUp {
                step: j,
                magnitude: y.norm(),
            });
        }
        psi[j] = y;
        f[j] = drive.eval(y);
    }

    let sq: Vec<Complex64> = psi.iter().map(|p| p * p).collect();
    // gap to the hat-weight discretisation of the kernel form
    let conv = k.weights(dt, n).convolve(&f);
    let residual = psi
        .iter()
        .zip(&conv)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let parts = Parts {
        int_psi: cumulative_trapezoid(dt, &psi),
        int_drive: cumulative_trapezoid(dt, &f),
        int_psi_sq: cumulative_trapezoid(dt, &sq),
        psi,
        residual,
        singular: None,
    };
    Ok(assemble(
        parts,
        grid,
        &k,
        m,
        &e,
        SolverKind::FractionalAdams,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::solve_riccati_volterra;
    use crate::riccati::testing::heston_psi;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn desk() -> ModelParams {
        ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap()
    }

    #[test]
    fn zero_solution() {
        for u in [0.0, 1.0] {
            let s = solve_fractional_riccati(0.6, &desk(), c(u, 0.0), 1.0, 100).unwrap();
            assert!(s.psi.iter().all(|p| p.norm() == 0.0));
        }
    }

    #[test]
    fn classical_order_matches_heston_ode() {
        let m = desk();
        let u = c(0.5, 3.0);
        let s = solve_fractional_riccati(1.0, &m, u, 1.0, 2000).unwrap();
        let d = Drive::new(&m, &ExponentTriple::price(u));
        let err = s
            .grid
            .times()
            .iter()
            .zip(&s.psi)
            .map(|(&t, p)| (p - heston_psi(d.c0, d.l, d.q, t)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn agrees_with_kernel_form() {
        let m = desk();
        let u = c(0.0, 2.0);
        let k = KernelSpec::rough(0.6).unwrap();
        let mut errs = Vec::new();
        for n in [500, 1000] {
            let a = solve_fractional_riccati(0.6, &m, u, 1.0, n).unwrap();
            let b = solve_riccati_volterra(&k, &m, &ExponentTriple::price(u), 1.0, n).unwrap();
            errs.push(
                a.psi
                    .iter()
                    .zip(&b.psi)
                    .map(|(x, y)| (x - y).norm())
                    .fold(0.0, f64::max),
            );
        }
        assert!(errs[1] < 2e-4, "{errs:?}");
        assert!(errs[0] / errs[1] > 1.5, "{errs:?}");
    }
}
