//! Kernel-form solver for `psi = v K + K * (Q(u, psi) - lambda psi + w)`.
//!
//! Each step predicts by freezing the drive at its last value and then
//! solves the hat-weight (trapezoidal product integration) corrector, a
//! scalar quadratic, by Newton iteration to tolerance. For the singular power-law kernel the short-time expansion `S` is subtracted
//! first and the smooth remainder `chi = psi - S` solves
//! `chi = d + K * ((l + 2 q S) chi + q chi^2)` with `d` the expansion defect.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{cumulative_trapezoid, UniformGrid};
use crate::kernel::{ConvKernel, KernelSpec, ProductWeights};

use super::{
    check_inputs, Drive, ExponentTriple, ModelParams, PowerSeries, RiccatiSolution, SolverConfig,
    SolverKind,
};

const MAX_CONTRACTION: f64 = 0.25;

pub fn solve_riccati_volterra(
    k: &KernelSpec,
    m: &ModelParams,
    e: &ExponentTriple,
    horizon: f64,
    n: usize,
) -> Result<RiccatiSolution> {
    solve_riccati_volterra_with(k, m, e, horizon, n, &SolverConfig::default())
}

/// Running sums for kernels whose hat weights are flat (`K` constant), so the
/// history costs O(1) per step.
enum History {
    Flat { hat: f64, end: f64, sum: Complex64 },
    General,
}

/// Step `chi_j = d_j + K * h(chi)` where `h_j(x) = c + b_j x + q x^2`.
struct Stepper<'a> {
    w: &'a ProductWeights,
    cfg: &'a SolverConfig,
    c: Complex64,
    q: Complex64,
}

impl Stepper<'_> {
    fn run(
        &self,
        defect: &[Complex64],
        slope: &[Complex64],
        chi0: Complex64,
        h0: Complex64,
        flat: bool,
    ) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let n = defect.len() - 1;
        let mut chi = vec![Complex64::default(); n + 1];
        let mut h = vec![Complex64::default(); n + 1];
        chi[0] = chi0;
        h[0] = h0;
        let mut hist = if flat {
            History::Flat {
                hat: self.w.hat.get(1).copied().unwrap_or(0.0),
                end: self.w.end.get(1).copied().unwrap_or(0.0),
                sum: Complex64::default(),
            }
        } else {
            History::General
        };
        let hat0 = self.w.hat[0];
        for j in 1..=n {
            let past = match &mut hist {
                History::Flat { hat, end, sum } => {
                    if j >= 2 {
                        *sum += h[j - 1] * *hat;
                    }
                    h[0] * *end + *sum
                }
                History::General => self.w.history(j, &h),
            };
            let base = defect[j] + past;
            let f = |x: Complex64| self.c + slope[j] * x + self.q * x * x;
            // predictor: freeze the drive at its previous value
            let mut x = base + h[j - 1] * hat0;
            let mut converged = false;
            let mut last = f64::INFINITY;
            for _ in 0..self.cfg.max_iter {
                let slope_x = 1.0 - hat0 * (slope[j] + 2.0 * self.q * x);
                let next = x - (x - base - f(x) * hat0) / slope_x;
                if !(next.re.is_finite() && next.im.is_finite()) {
                    return Err(Error::NonFinite {
                        index: j,
                        detail: "Riccati corrector produced a non-finite value".into(),
                    });
                }
                if next.norm() > self.cfg.blowup {
                    return Err(Error::BlowUp {
                        step: j,
                        magnitude: next.norm(),
                    });
                }
                last = (next - x).norm();
                x = next;
                if last <= self.cfg.tol * x.norm().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NoConvergence {
                    step: j,
                    iterations: self.cfg.max_iter,
                    last_update: last,
                });
            }
            chi[j] = x;
            h[j] = f(x);
        }
        Ok((chi, h))
    }
}

pub fn solve_riccati_volterra_with(
    k: &KernelSpec,
    m: &ModelParams,
    e: &ExponentTriple,
    horizon: f64,
    n: usize,
    cfg: &SolverConfig,
) -> Result<RiccatiSolution> {
    k.validate()?;
    let grid = check_inputs(m, e, horizon, n)?;
    let dt = grid.dt();
    let drive = Drive::new(m, e);
    let w = k.weights(dt, n);
    let times = grid.times();
    let stepper = Stepper {
        w: &w,
        cfg,
        c: drive.c0,
        q: drive.q,
    };

    let expansion = match *k {
        KernelSpec::PowerLaw { alpha, scale } if alpha < 1.0 => {
            let series = PowerSeries::new(alpha, scale, e.v, &drive);
            let s: Vec<Complex64> = times
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        Complex64::default()
                    } else {
                        series.eval(t)
                    }
                })
                .collect();
            let slope: Vec<Complex64> = s.iter().map(|&x| drive.l + 2.0 * drive.q * x).collect();
            // Far outside its radius the expansion makes the remainder equation
            // stiff; a bounded psi0 lets the plain scheme take over.
            let kappa = w.hat[0] * slope.iter().map(|x| x.norm()).fold(0.0, f64::max);
            (series.is_singular() || kappa < MAX_CONTRACTION).then_some((series, s, slope))
        }
        _ => None,
    };

    let sol = match expansion {
        Some((series, s, slope)) => {
            let defect: Vec<Complex64> = times.iter().map(|&t| series.defect(t)).collect();
            let remainder = Stepper {
                c: Complex64::default(),
                ..stepper
            };
            let (chi, h) = remainder.run(
                &defect,
                &slope,
                Complex64::default(),
                Complex64::default(),
                false,
            )?;
            let mut psi: Vec<Complex64> = s.iter().zip(&chi).map(|(a, b)| a + b).collect();
            if series.is_singular() {
                psi[0] = e.v * (w.cell[0] / dt);
            }
            let chi_int = cumulative_trapezoid(dt, &chi);
            let h_int = cumulative_trapezoid(dt, &h);
            // 2 S chi + chi^2, with S chi -> 0 at the origin
            let cross: Vec<Complex64> = s
                .iter()
                .zip(&chi)
                .enumerate()
                .map(|(j, (a, b))| {
                    if j == 0 {
                        Complex64::default()
                    } else {
                        2.0 * a * b + b * b
                    }
                })
                .collect();
            let cross_int = cumulative_trapezoid(dt, &cross);
            let int_psi = times
                .iter()
                .zip(&chi_int)
                .map(|(&t, c)| series.integral(t) + c)
                .collect();
            let int_drive = times
                .iter()
                .zip(&h_int)
                .map(|(&t, c)| series.drive_integral(t) + c)
                .collect();
            let int_psi_sq = times
                .iter()
                .zip(&cross_int)
                .map(|(&t, c)| series.square_integral(t) + c)
                .collect();
            let conv = w.convolve(&h);
            let residual = (1..=n)
                .map(|j| (chi[j] - defect[j] - conv[j]).norm())
                .fold(0.0, f64::max);
            Parts {
                psi,
                int_psi,
                int_drive,
                int_psi_sq,
                residual,
                singular: Some(series),
            }
        }
        None => {
            let vk: Vec<Complex64> = if e.v == Complex64::default() {
                vec![Complex64::default(); n + 1]
            } else {
                times.iter().map(|&t| e.v * k.value(t)).collect()
            };
            let slope = vec![drive.l; n + 1];
            let flat = match *k {
                KernelSpec::Constant { .. } => true,
                KernelSpec::PowerLaw { alpha, .. } => alpha == 1.0,
                _ => false,
            };
            let psi0 = vk[0];
            let (psi, f) = stepper.run(&vk, &slope, psi0, drive.eval(psi0), flat)?;
            let sq: Vec<Complex64> = psi.iter().map(|p| p * p).collect();
            let conv = w.convolve(&f);
            let residual = (1..=n)
                .map(|j| (psi[j] - vk[j] - conv[j]).norm())
                .fold(0.0, f64::max);
            Parts {
                int_psi: cumulative_trapezoid(dt, &psi),
                int_drive: cumulative_trapezoid(dt, &f),
                int_psi_sq: cumulative_trapezoid(dt, &sq),
                psi,
                residual,
                singular: None,
            }
        }
    };
    Ok(assemble(sol, grid, k, m, e, SolverKind::Volterra))
}

pub(super) struct Parts {
    pub psi: Vec<Complex64>,
    pub int_psi: Vec<Complex64>,
    pub int_drive: Vec<Complex64>,
    pub int_psi_sq: Vec<Complex64>,
    pub residual: f64,
    pub singular: Option<PowerSeries>,
}

pub(super) fn assemble(
    p: Parts,
    grid: UniformGrid,
    k: &KernelSpec,
    m: &ModelParams,
    e: &ExponentTriple,
    solver: SolverKind,
) -> RiccatiSolution {
    let q_of_psi = p.psi.iter().map(|&x| m.q(e.u, x)).collect();
    RiccatiSolution {
        grid,
        psi: p.psi,
        q_of_psi,
        int_psi: p.int_psi,
        int_psi_sq: p.int_psi_sq,
        int_drive: p.int_drive,
        solver,
        kernel: k.clone(),
        model: *m,
        exponent: *e,
        warnings: e.domain_warnings(),
        residual: p.residual,
        singular: p.singular,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::testing::{heston_int_psi, heston_psi};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn desk() -> ModelParams {
        ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap()
    }

    fn sup(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_fixed_points() {
        for k in [KernelSpec::rough(0.6).unwrap(), KernelSpec::constant(1.0)] {
            for u in [0.0, 1.0] {
                let s = solve_riccati_volterra(
                    &k,
                    &desk(),
                    &ExponentTriple::price(c(u, 0.0)),
                    1.0,
                    200,
                )
                .unwrap();
                assert!(s.psi.iter().all(|p| p.norm() == 0.0), "u={u}");
                assert_eq!(s.int_drive[200], c(0.0, 0.0));
            }
        }
    }

    #[test]
    fn classical_kernel_matches_heston_ode() {
        let m = desk();
        // second-order trapezoid error grows with |u|
        for (u, tol) in [(c(0.5, 3.0), 1e-6), (c(0.5, -10.0), 5e-6)] {
            let e = ExponentTriple::price(u);
            let s = solve_riccati_volterra(&KernelSpec::constant(1.0), &m, &e, 1.0, 2000).unwrap();
            let d = Drive::new(&m, &e);
            let err = s
                .grid
                .times()
                .iter()
                .zip(&s.psi)
                .map(|(&t, p)| (p - heston_psi(d.c0, d.l, d.q, t)).norm())
                .fold(0.0, f64::max);
            assert!(err < tol, "u={u} err={err}");
            assert!((s.int_psi[2000] - heston_int_psi(d.c0, d.l, d.q, 1.0)).norm() < tol);
            assert!(s.residual < 1e-12);
        }
    }

    // Power-series oracle for alpha = 0.6, u = 2i, (lambda, sigma, rho) = (2, 0.3, -0.7):
    // psi = sum_k A_k t^{0.6 k} with the Gamma-ratio recursion, 1500 terms.
    const PSI_AT_ONE: (f64, f64) = (-0.7954831075929518, -0.2560104883168701);

    #[test]
    fn rough_kernel_matches_series_oracle() {
        let e = ExponentTriple::price(c(0.0, 2.0));
        let k = KernelSpec::rough(0.6).unwrap();
        let mut errs = Vec::new();
        for n in [500, 1000] {
            let s = solve_riccati_volterra(&k, &desk(), &e, 1.0, n).unwrap();
            errs.push((s.psi[n] - c(PSI_AT_ONE.0, PSI_AT_ONE.1)).norm());
            assert!(s.residual < 1e-11);
        }
        assert!(errs[1] < 2e-6, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn singular_initial_value_converges() {
        let e = ExponentTriple::variance(c(-1.0, 0.0));
        let k = KernelSpec::rough(0.6).unwrap();
        let a = solve_riccati_volterra(&k, &desk(), &e, 1.0, 500).unwrap();
        let b = solve_riccati_volterra(&k, &desk(), &e, 1.0, 2000).unwrap();
        let coarse: Vec<Complex64> = (0..=500).map(|j| b.psi[4 * j]).collect();
        let err = sup(&a.psi[1..], &coarse[1..]);
        assert!(err < 1e-5, "{err}");
        assert!((a.int_drive[500] - b.int_drive[2000]).norm() < 1e-5);
        assert!(a.psi[1].re < -5.0);
        // psi ~ v K near the origin
        let t = a.grid.t(1);
        let vk = -t.powf(-0.4) / crate::special::gamma_fn(0.6).unwrap();
        assert!(((a.psi[1].re - vk) / vk).abs() < 0.5);
    }

    #[test]
    fn real_u_gives_real_nonpositive_q() {
        let m = desk();
        for k in [KernelSpec::rough(0.6).unwrap(), KernelSpec::constant(1.0)] {
            let s = solve_riccati_volterra(&k, &m, &ExponentTriple::price(c(0.4, 0.0)), 1.0, 400)
                .unwrap();
            for (p, q) in s.psi.iter().zip(&s.q_of_psi) {
                assert!(p.im.abs() < 1e-14);
                assert!(q.re <= 1e-15 && q.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let m = desk();
        let e = ExponentTriple::variance(c(60.0, 0.0));
        let r = solve_riccati_volterra(&KernelSpec::constant(1.0), &m, &e, 5.0, 2000);
        assert!(
            matches!(
                r,
                Err(Error::BlowUp { .. }) | Err(Error::NoConvergence { .. })
            ),
            "{:?}",
            r.err()
        );
    }

    #[test]
    fn exp_sum_kernel_with_single_zero_rate_is_classical() {
        let m = desk();
        let e = ExponentTriple::new(c(0.5, 1.0), c(-0.5, 0.0), c(-0.2, 0.0));
        let a = solve_riccati_volterra(&KernelSpec::constant(1.0), &m, &e, 1.0, 400).unwrap();
        let k = KernelSpec::exp_sum(vec![crate::kernel::Atom::new(1.0, 0.0)]).unwrap();
        let b = solve_riccati_volterra(&k, &m, &e, 1.0, 400).unwrap();
        assert!(sup(&a.psi, &b.psi) < 1e-12);
    }
}
