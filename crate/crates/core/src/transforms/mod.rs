//! Forward variance curves, exponential-affine transforms and Fourier pricing.

mod pricing;

pub use pricing::{
    black_scholes, implied_vol, price_european, FourierPricer, InversionGrid, OptionKind,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::kernel::{power_law_weights, Atom, ConvKernel, KernelSpec};
use crate::resolvent::{
    resolvent_analytic, resolvent_numeric, resolvent_table_analytic, ResolventTable,
};
use crate::riccati::{
    solve_fractional_riccati, solve_lift_transform, solve_riccati_volterra, ExponentTriple,
    ModelParams, RiccatiSolution,
};

/// `xi0(T) = E[V_T]` on a grid.
#[derive(Debug, Clone)]
pub struct ForwardCurve {
    pub grid: UniformGrid,
    pub xi0: Vec<f64>,
    pub resolvent: ResolventTable,
}

impl ForwardCurve {
    /// `int_0^{T_max} xi0` by the trapezoid rule.
    pub fn integrated(&self) -> f64 {
        let dt = self.grid.dt();
        let x = &self.xi0;
        dt * (x.iter().sum::<f64>() - 0.5 * (x[0] + x[x.len() - 1]))
    }
}

/// `xi0(T) = V0 (1 - int_0^T R) + theta int_0^T R` with `R` the resolvent
/// of `lambda K`. At `lambda = 0` this is `V0 + beta int_0^T K`.
pub fn forward_curve(
    k: &KernelSpec,
    m: &ModelParams,
    t_max: f64,
    n: usize,
) -> Result<ForwardCurve> {
    m.validate()?;
    k.validate()?;
    let resolvent = if resolvent_analytic(k, m.lambda).is_some() {
        resolvent_table_analytic(k, m.lambda, t_max, n)?
    } else {
        resolvent_numeric(k, m.lambda, t_max, n)?
    };
    let grid = resolvent.grid;
    let xi0 = match m.theta() {
        Some(theta) => resolvent
            .cumulative
            .iter()
            .map(|r| m.v0 * (1.0 - r) + theta * r)
            .collect(),
        None => grid
            .times()
            .iter()
            .map(|&t| m.v0 + m.beta * k.integral1(t))
            .collect(),
    };
    Ok(ForwardCurve {
        grid,
        xi0,
        resolvent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Volterra,
    Fractional,
    Lift,
}

/// `E[exp(u L_T + v V_T + w int_0^T V)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformValue {
    pub exponent: ExponentTriple,
    pub horizon: f64,
    pub value: Complex64,
    pub formulation: Formulation,
    pub warnings: Vec<String>,
}

/// Log-transform from a kernel-form solution:
/// `u L0 + V0 (v + int_0^T (Q(u, psi) - lambda psi + w)) + beta int_0^T psi + alpha0/2 int_0^T psi^2`,
/// which equals the forward-variance form
/// `u L0 + v xi0(T) + w int_0^T xi0 + int_0^T xi0(s) Q(u, psi(T - s)) ds`.
pub fn log_transform(sol: &RiccatiSolution) -> Complex64 {
    let m = &sol.model;
    let e = &sol.exponent;
    let n = sol.grid.steps;
    let mut x = e.u * m.l0 + m.v0 * (e.v + sol.int_drive[n]) + m.beta * sol.int_psi[n];
    if m.alpha0 != 0.0 {
        x += 0.5 * m.alpha0 * sol.int_psi_sq[n];
    }
    x
}

pub fn cf_general(
    k: &KernelSpec,
    m: &ModelParams,
    e: &ExponentTriple,
    horizon: f64,
    n: usize,
) -> Result<TransformValue> {
    let sol = solve_riccati_volterra(k, m, e, horizon, n)?;
    Ok(TransformValue {
        exponent: *e,
        horizon,
        value: log_transform(&sol).exp(),
        formulation: Formulation::Volterra,
        warnings: sol.warnings,
    })
}

/// `E[exp(u L_T)] = exp(u L0 + beta int_0^T psi + V0 I^{1-alpha} psi(T))` with
/// `psi` from the fractional Adams scheme.
pub fn cf_rough_heston(
    alpha: f64,
    m: &ModelParams,
    u: Complex64,
    horizon: f64,
    n: usize,
) -> Result<TransformValue> {
    let sol = solve_fractional_riccati(alpha, m, u, horizon, n)?;
    let frac = if alpha == 1.0 {
        sol.psi[n]
    } else {
        power_law_weights(1.0 - alpha, 1.0, sol.grid.dt(), n).convolve_at(n, &sol.psi)
    };
    let x = u * m.l0 + m.beta * sol.int_psi[n] + m.v0 * frac;
    Ok(TransformValue {
        exponent: sol.exponent,
        horizon,
        value: x.exp(),
        formulation: Formulation::Fractional,
        warnings: sol.warnings,
    })
}

/// `E[exp(v V_T)]` from the finite-atom lift.
pub fn cf_lift(
    atoms: &[Atom],
    m: &ModelParams,
    v: Complex64,
    horizon: f64,
    n: usize,
) -> Result<TransformValue> {
    cf_lift_general(atoms, m, &ExponentTriple::variance(v), horizon, n)
}

/// `E[exp(u L_T + v V_T + w int V)]` from the finite-atom lift.
pub fn cf_lift_general(
    atoms: &[Atom],
    m: &ModelParams,
    e: &ExponentTriple,
    horizon: f64,
    n: usize,
) -> Result<TransformValue> {
    if atoms.is_empty() {
        return Err(Error::arg("the lift needs at least one atom"));
    }
    let sol = solve_lift_transform(atoms, m, e, horizon, n)?;
    let x = e.u * m.l0 + e.v * m.v0 + sol.phi[n];
    Ok(TransformValue {
        exponent: *e,
        horizon,
        value: x.exp(),
        formulation: Formulation::Lift,
        warnings: e.domain_warnings(),
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{discretize_measure, LaplaceMeasure};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn desk() -> ModelParams {
        ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap()
    }

    #[test]
    fn forward_curve_examples() {
        let mut m = desk();
        m.lambda = 0.0;
        m.beta = 0.0;
        let f = forward_curve(&KernelSpec::rough(0.6).unwrap(), &m, 1.0, 50).unwrap();
        assert!(f.xi0.iter().all(|x| *x == 0.04));

        let m = ModelParams::heston(2.0, 0.06, 0.3, -0.7, 0.02).unwrap();
        let f = forward_curve(&KernelSpec::constant(1.0), &m, 1.0, 100).unwrap();
        let want = 0.02 + 0.04 * (1.0 - (-2.0f64).exp());
        assert!((f.xi0[100] - want).abs() < 1e-14, "{}", f.xi0[100]);

        let m = ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap();
        let f = forward_curve(&KernelSpec::rough(0.6).unwrap(), &m, 1.0, 100).unwrap();
        assert!(f.xi0.iter().all(|x| (x - 0.04).abs() < 1e-15));
    }

    #[test]
    fn forward_curve_is_between_v0_and_theta() {
        let m = ModelParams::heston(1.5, 0.09, 0.3, -0.7, 0.02).unwrap();
        for k in [
            KernelSpec::rough(0.6).unwrap(),
            KernelSpec::exp_sum(vec![Atom::new(1.0, 0.5), Atom::new(0.5, 3.0)]).unwrap(),
        ] {
            let f = forward_curve(&k, &m, 2.0, 400).unwrap();
            assert!(f.xi0.iter().all(|x| (0.02 - 1e-12..=0.09).contains(x)));
            assert!(f.xi0.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
    }

    #[test]
    fn normalisation_and_martingale() {
        let m = desk().with_l0(0.3);
        for k in [KernelSpec::rough(0.6).unwrap(), KernelSpec::constant(1.0)] {
            let one = cf_general(&k, &m, &ExponentTriple::price(c(0.0, 0.0)), 1.0, 200).unwrap();
            assert_eq!(one.value, c(1.0, 0.0));
            let s = cf_general(&k, &m, &ExponentTriple::price(c(1.0, 0.0)), 1.0, 200).unwrap();
            assert!((s.value - c(0.3f64.exp(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn classical_cf_matches_closed_form() {
        let m = desk();
        for u in [c(0.5, 3.0), c(0.5, -10.0)] {
            let want = testing::heston_cf(&m, u, 1.0);
            let got = cf_general(
                &KernelSpec::constant(1.0),
                &m,
                &ExponentTriple::price(u),
                1.0,
                2000,
            )
            .unwrap();
            assert!(((got.value - want) / want).norm() < 1e-6);
            let frac = cf_rough_heston(1.0, &m, u, 1.0, 2000).unwrap();
            assert!(((frac.value - want) / want).norm() < 1e-6);
        }
    }

    #[test]
    fn rough_assemblies_agree() {
        let m = desk();
        let k = KernelSpec::rough(0.6).unwrap();
        for u in [c(0.0, 1.0), c(0.5, 2.0)] {
            let a = cf_general(&k, &m, &ExponentTriple::price(u), 1.0, 1000).unwrap();
            let b = cf_rough_heston(0.6, &m, u, 1.0, 1000).unwrap();
            assert!(
                (a.value - b.value).norm() < 1e-4,
                "{u}: {} {}",
                a.value,
                b.value
            );
        }
    }

    #[test]
    fn forward_variance_form_matches_identity() {
        // int_0^T xi0(s) Q(u, psi(T - s)) ds by the trapezoid rule
        let m = ModelParams::heston(2.0, 0.06, 0.3, -0.7, 0.02).unwrap();
        let k = KernelSpec::rough(0.7).unwrap();
        let n = 1000;
        let e = ExponentTriple::new(c(0.3, 1.0), c(-0.5, 0.2), c(-0.1, 0.0));
        let sol = solve_riccati_volterra(&k, &m, &e, 1.0, n).unwrap();
        let f = forward_curve(&k, &m, 1.0, n).unwrap();
        let dt = 1.0 / n as f64;
        let mut integral = c(0.0, 0.0);
        for j in 0..=n {
            let w = if j == 0 || j == n { 0.5 } else { 1.0 };
            integral += f.xi0[j] * sol.q_of_psi[n - j] * (w * dt);
        }
        let fv = e.v * f.xi0[n] + e.w * f.integrated() + integral;
        assert!(
            (fv - log_transform(&sol)).norm() < 2e-3,
            "{fv} {}",
            log_transform(&sol)
        );
    }

    #[test]
    fn lift_transform_limits() {
        let m = desk();
        let one = cf_lift(&[Atom::new(1.0, 0.0)], &m, c(0.0, 0.0), 1.0, 100).unwrap();
        assert_eq!(one.value, c(1.0, 0.0));
        let v = c(-1.0, 0.0);
        let lift = cf_lift(&[Atom::new(1.0, 0.0)], &m, v, 1.0, 1000).unwrap();
        let kern = cf_general(
            &KernelSpec::constant(1.0),
            &m,
            &ExponentTriple::variance(v),
            1.0,
            4000,
        )
        .unwrap();
        assert!((lift.value - kern.value).norm() < 1e-5);

        let k = KernelSpec::rough(0.6).unwrap();
        let want = cf_general(&k, &m, &ExponentTriple::variance(v), 1.0, 1000)
            .unwrap()
            .value;
        let mut errs = Vec::new();
        for na in [10, 50, 200] {
            let atoms = discretize_measure(&LaplaceMeasure::rough(0.6), na, 1e6).unwrap();
            errs.push((cf_lift(&atoms, &m, v, 1.0, 1000).unwrap().value - want).norm());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn characteristic_function_is_bounded() {
        let m = desk();
        let k = KernelSpec::rough(0.6).unwrap();
        for y in [1.0, 2.0, 5.0, 10.0] {
            let v = cf_general(&k, &m, &ExponentTriple::price(c(0.0, y)), 1.0, 400).unwrap();
            assert!(v.value.norm() <= 1.0);
        }
    }
}
