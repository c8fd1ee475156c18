//! Finite-atom lift: `d/dt Psi_i = -x_i Psi_i + F(y)`, `d/dt phi = G(y)`
//! with `y = sum_j w_j Psi_j`, integrated with the exponential
//! Runge-Kutta scheme ETDRK4 (Cox-Matthews) so the stiff decay is exact.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::kernel::Atom;

use super::{check_inputs, Drive, ExponentTriple, ModelParams, SolverConfig};

#[derive(Debug, Clone)]
pub struct LiftRiccatiSolution {
    pub atoms: Vec<Atom>,
    pub grid: UniformGrid,
    /// `psi_atoms[j][i] = Psi(t_j, x_i)`.
    pub psi_atoms: Vec<Vec<Complex64>>,
    pub phi: Vec<Complex64>,
    /// `sum_i w_i Psi(t_j, x_i)`.
    pub psi_reduced: Vec<Complex64>,
}

/// `F(y) = c0 + l y + q y^2` and `G(y) = d0 + d1 y + d2 y^2`.
#[derive(Debug, Clone, Copy)]
struct LiftDrive {
    f: Drive,
    d0: Complex64,
    d1: Complex64,
    d2: Complex64,
}

impl LiftDrive {
    fn g(&self, y: Complex64) -> Complex64 {
        self.d0 + self.d1 * y + self.d2 * y * y
    }
}

/// `phi_k(z) = sum_m z^m/(m+k)!` for `k = 1, 2, 3`.
fn phis(z: f64) -> [f64; 3] {
    if z.abs() < 1.0 {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            for i in 1..=k + 1 {
                term /= i as f64;
            }
            let mut acc = 0.0;
            for m in 0..30 {
                acc += term;
                term *= z / (m + k + 2) as f64;
            }
            *o = acc;
        }
        out
    } else {
        let e = z.exp();
        let p1 = (e - 1.0) / z;
        let p2 = (e - 1.0 - z) / (z * z);
        let p3 = (e - 1.0 - z - 0.5 * z * z) / (z * z * z);
        [p1, p2, p3]
    }
}

struct AtomCoef {
    e: f64,
    e2: f64,
    half: f64,
    f1: f64,
    f2: f64,
    f3: f64,
}

impl AtomCoef {
    fn new(rate: f64, h: f64) -> Self {
        let z = -rate * h;
        let [p1h, _, _] = phis(0.5 * z);
        let [p1, p2, p3] = phis(z);
        Self {
            e: z.exp(),
            e2: (0.5 * z).exp(),
            half: 0.5 * h * p1h,
            f1: h * (p1 - 3.0 * p2 + 4.0 * p3),
            f2: h * (p2 - 2.0 * p3),
            f3: h * (4.0 * p3 - p2),
        }
    }
}

const FIRST_STEP_RESOLUTION: f64 = 0.01;

struct Scratch {
    sa: Vec<Complex64>,
    sc: Vec<Complex64>,
}

/// One ETDRK4 step of size `h` for the atoms; returns the RK4 increment of `phi`.
fn advance(
    atoms: &[Atom],
    coef: &[AtomCoef],
    drive: LiftDrive,
    h: f64,
    state: &mut [Complex64],
    s: &mut Scratch,
) -> Complex64 {
    let reduce =
        |v: &[Complex64]| -> Complex64 { atoms.iter().zip(v).map(|(a, x)| x * a.weight).sum() };
    let f = |y: Complex64| drive.f.eval(y);
    let na = atoms.len();
    let y0 = reduce(state);
    let n0 = f(y0);
    for i in 0..na {
        s.sa[i] = state[i] * coef[i].e2 + n0 * coef[i].half;
    }
    let ya = reduce(&s.sa);
    let na_ = f(ya);
    let mut yb = Complex64::default();
    for i in 0..na {
        yb += (state[i] * coef[i].e2 + na_ * coef[i].half) * atoms[i].weight;
    }
    let nb = f(yb);
    for i in 0..na {
        s.sc[i] = s.sa[i] * coef[i].e2 + (2.0 * nb - n0) * coef[i].half;
    }
    let yc = reduce(&s.sc);
    let nc = f(yc);
    for i in 0..na {
        let c = &coef[i];
        state[i] = state[i] * c.e + n0 * c.f1 + (na_ + nb) * (2.0 * c.f2) + nc * c.f3;
    }
    (drive.g(y0) + 2.0 * drive.g(ya) + 2.0 * drive.g(yb) + drive.g(yc)) * (h / 6.0)
}

fn integrate(
    atoms: &[Atom],
    h0: &[Complex64],
    drive: LiftDrive,
    grid: UniformGrid,
) -> Result<LiftRiccatiSolution> {
    if atoms.is_empty() {
        return Err(Error::arg("the lift needs at least one atom"));
    }
    if h0.len() != atoms.len() {
        return Err(Error::arg(format!(
            "{} initial values for {} atoms",
            h0.len(),
            atoms.len()
        )));
    }
    if let Some(a) = atoms
        .iter()
        .find(|a| !(a.rate >= 0.0) || !a.weight.is_finite())
    {
        return Err(Error::arg(format!(
            "lift atoms need finite weights and rates >= 0, got ({}, {})",
            a.weight, a.rate
        )));
    }
    let guard = SolverConfig::default().blowup;
    let n = grid.steps;
    let h = grid.dt();
    let coef: Vec<AtomCoef> = atoms.iter().map(|a| AtomCoef::new(a.rate, h)).collect();
    let reduce =
        |v: &[Complex64]| -> Complex64 { atoms.iter().zip(v).map(|(a, x)| x * a.weight).sum() };

    let mut state = h0.to_vec();
    let mut phi = vec![Complex64::default(); n + 1];
    let mut psi_atoms = Vec::with_capacity(n + 1);
    let mut psi_reduced = Vec::with_capacity(n + 1);
    psi_atoms.push(state.clone());
    psi_reduced.push(reduce(&state));
    let na = atoms.len();
    let mut scratch = Scratch {
        sa: vec![Complex64::default(); na],
        sc: vec![Complex64::default(); na],
    };
    // Fast atoms move on the scale 1/rate, far below h near t = 0, where phi
    // would be misintegrated; refine the first step geometrically.
    let fastest = atoms.iter().map(|a| a.rate).fold(0.0, f64::max);
    let levels = (h * fastest / FIRST_STEP_RESOLUTION).log2().ceil().max(0.0) as i32;
    for j in 1..=n {
        if j == 1 && levels > 0 {
            let mut sub = h * 2f64.powi(-levels);
            let mut t = 0.0;
            let mut acc = Complex64::default();
            while t < h * (1.0 - 1e-12) {
                let step = sub.min(h - t);
                let c: Vec<AtomCoef> = atoms.iter().map(|a| AtomCoef::new(a.rate, step)).collect();
                acc += advance(atoms, &c, drive, step, &mut state, &mut scratch);
                t += step;
                if t >= sub * (1.0 - 1e-12) {
                    sub *= 2.0;
                }
            }
            phi[j] = phi[j - 1] + acc;
        } else {
            phi[j] = phi[j - 1] + advance(atoms, &coef, drive, h, &mut state, &mut scratch);
        }
        let y = reduce(&state);
        if !(y.re.is_finite() && y.im.is_finite()) {
            return Err(Error::NonFinite {
                index: j,
                detail: "lift integration produced a non-finite value".into(),
            });
        }
        if y.norm() > guard {
            return Err(Error::BlowUp {
                step: j,
                magnitude: y.norm(),
            });
        }
        psi_reduced.push(y);
        psi_atoms.push(state.clone());
    }
    Ok(LiftRiccatiSolution {
        atoms: atoms.to_vec(),
        grid,
        psi_atoms,
        phi,
        psi_reduced,
    })
}

/// Lift equations with `R_Psi` and `R_phi` of `m` as given, `Psi(0, x_i) = h[i]`.
pub fn solve_lift_riccati(
    atoms: &[Atom],
    m: &ModelParams,
    h: &[Complex64],
    horizon: f64,
    n: usize,
) -> Result<LiftRiccatiSolution> {
    let grid = check_inputs(
        m,
        &ExponentTriple::variance(Complex64::default()),
        horizon,
        n,
    )?;
    let drive = LiftDrive {
        f: Drive {
            c0: Complex64::default(),
            l: Complex64::new(-m.lambda, 0.0),
            q: Complex64::new(0.5 * m.a, 0.0),
        },
        d0: Complex64::default(),
        d1: Complex64::new(m.beta, 0.0),
        d2: Complex64::new(0.5 * m.alpha0, 0.0),
    };
    integrate(atoms, h, drive, grid)
}

/// Lift of `E[exp(u L_T + v V_T + w int_0^T V)]` for `V = V0 + sum_i w_i u_i`
/// with `u_i(0) = 0`: `Psi(0, x_i) = v` and the transform equals
/// `exp(u L0 + v V0 + phi(T))`.
pub fn solve_lift_transform(
    atoms: &[Atom],
    m: &ModelParams,
    e: &ExponentTriple,
    horizon: f64,
    n: usize,
) -> Result<LiftRiccatiSolution> {
    let grid = check_inputs(m, e, horizon, n)?;
    let f = Drive::new(m, e);
    let v0 = m.v0;
    let drive = LiftDrive {
        f,
        d0: v0 * f.c0,
        d1: m.beta - m.lambda * v0 + v0 * m.sigma * m.rho * e.u,
        d2: Complex64::new(0.5 * (m.alpha0 + m.a * v0), 0.0),
    };
    integrate(atoms, &vec![e.v; atoms.len()], drive, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{discretize_measure, KernelSpec, LaplaceMeasure};
    use crate::riccati::solve_riccati_volterra;
    use crate::riccati::testing::heston_psi;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn desk() -> ModelParams {
        ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap()
    }

    #[test]
    fn phi_functions_are_continuous() {
        for z in [-1.0 + 1e-9, 1.0 - 1e-9] {
            let a = phis(z);
            let b = phis(z + if z < 0.0 { -2e-9 } else { 2e-9 });
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-8);
            }
        }
        assert_eq!(phis(0.0), [1.0, 0.5, 1.0 / 6.0]);
    }

    #[test]
    fn zero_initial_values_stay_zero() {
        let atoms = discretize_measure(&LaplaceMeasure::rough(0.6), 20, 1e6).unwrap();
        let s = solve_lift_riccati(&atoms, &desk(), &vec![c(0.0, 0.0); 20], 1.0, 100).unwrap();
        assert!(s.psi_reduced.iter().chain(&s.phi).all(|x| x.norm() == 0.0));
    }

    #[test]
    fn single_atom_is_classical_heston() {
        let m = desk();
        let v = c(-1.0, 0.5);
        let s = solve_lift_riccati(&[Atom::new(1.0, 0.0)], &m, &[v], 1.0, 1000).unwrap();
        // psi' = -lambda psi + a/2 psi^2, psi(0) = v: shift the ODE oracle by v
        let (l, q) = (c(-m.lambda, 0.0), c(0.5 * m.a, 0.0));
        let c0 = l * v + q * v * v;
        let l2 = l + 2.0 * q * v;
        let err = s
            .grid
            .times()
            .iter()
            .zip(&s.psi_reduced)
            .map(|(&t, p)| (p - v - heston_psi(c0, l2, q, t)).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
        assert_eq!(s.phi[0], c(0.0, 0.0));
    }

    #[test]
    fn stiff_atoms_are_stable() {
        let atoms = vec![Atom::new(1.0, 1e7), Atom::new(0.5, 0.0)];
        let s = solve_lift_riccati(&atoms, &desk(), &[c(-1.0, 0.0); 2], 1.0, 50).unwrap();
        assert!(s.psi_atoms[50][0].norm() < 1e-6);
        assert!(s.psi_reduced.iter().all(|x| x.norm() < 2.0));
    }

    #[test]
    fn transform_lift_converges_to_kernel_form() {
        let m = desk();
        let e = ExponentTriple::price(c(0.0, 2.0));
        let v = solve_riccati_volterra(&KernelSpec::rough(0.6).unwrap(), &m, &e, 1.0, 500).unwrap();
        let mut errs = Vec::new();
        for na in [10, 50, 200] {
            let atoms = discretize_measure(&LaplaceMeasure::rough(0.6), na, 1e6).unwrap();
            let l = solve_lift_transform(&atoms, &m, &e, 1.0, 500).unwrap();
            errs.push(
                l.psi_reduced
                    .iter()
                    .zip(&v.psi)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max),
            );
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 5e-3, "{errs:?}");
    }
}
