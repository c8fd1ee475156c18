//! Resolvent of the second kind `R` of `lambda K`: the solution of
//! `lambda K - R = R * (lambda K)`, plus the rescaled kernel `R / lambda`
//! which reduces to `K` at `lambda = 0`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cumulative_trapezoid, UniformGrid};
use crate::kernel::{ConvKernel, KernelSpec, ProductWeights, TabulatedKernel};
use crate::special::{mittag_leffler, MLParams};

/// Closed-form resolvents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticResolvent {
    /// `lambda = 0`.
    Zero,
    /// `lambda c e^{-lambda c t}` for the constant kernel.
    Exponential { rate: f64 },
    /// `lambda c t^{a-1} E_{a,a}(-lambda c t^a)` for the power-law kernel.
    MittagLeffler { alpha: f64, rate: f64 },
}

fn ml(a: f64, b: f64, x: f64) -> f64 {
    // parameters are validated by the constructors below
    mittag_leffler(&MLParams::new(a, b), Complex64::new(x, 0.0))
        .map(|v| v.re)
        .unwrap_or(f64::NAN)
}

impl AnalyticResolvent {
    /// `R(t)`; `+inf` at `t = 0` for a singular kernel.
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            AnalyticResolvent::Zero => 0.0,
            AnalyticResolvent::Exponential { rate } => rate * (-rate * t).exp(),
            AnalyticResolvent::MittagLeffler { alpha, rate } => {
                if t == 0.0 && alpha < 1.0 {
                    return f64::INFINITY;
                }
                rate * t.powf(alpha - 1.0) * ml(alpha, alpha, -rate * t.powf(alpha))
            }
        }
    }

    /// `int_0^t R`.
    pub fn cumulative(&self, t: f64) -> f64 {
        match *self {
            AnalyticResolvent::Zero => 0.0,
            AnalyticResolvent::Exponential { rate } => -(-rate * t).exp_m1(),
            AnalyticResolvent::MittagLeffler { .. } if t == 0.0 => 0.0,
            AnalyticResolvent::MittagLeffler { alpha, rate } => {
                1.0 - ml(alpha, 1.0, -rate * t.powf(alpha))
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::domain(
            "resolvent needs a finite lambda >= 0",
            lambda,
        ));
    }
    Ok(())
}

/// Closed-form resolvent where one is known.
pub fn resolvent_analytic(k: &KernelSpec, lambda: f64) -> Option<AnalyticResolvent> {
    if check_lambda(lambda).is_err() || k.validate().is_err() {
        return None;
    }
    if lambda == 0.0 {
        return Some(AnalyticResolvent::Zero);
    }
    match *k {
        KernelSpec::Constant { c } => Some(AnalyticResolvent::Exponential { rate: lambda * c }),
        KernelSpec::PowerLaw { alpha: 1.0, scale } => Some(AnalyticResolvent::Exponential {
            rate: lambda * scale,
        }),
        KernelSpec::PowerLaw { alpha, scale } => Some(AnalyticResolvent::MittagLeffler {
            alpha,
            rate: lambda * scale,
        }),
        KernelSpec::ExponentialSum { .. } => None,
    }
}

/// How a table was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventMethod {
    Analytic,
    Numeric,
}

/// `R` and `int_0^t R` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventTable {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub grid: UniformGrid,
    /// `R(t_j)`; `samples[0]` is `+inf` for a singular kernel.
    pub samples: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub method: ResolventMethod,
    /// `resolvent_residual` of this table, recorded at construction.
    pub residual: f64,
}

/// Tabulate the closed form on a grid.
pub fn resolvent_table_analytic(
    k: &KernelSpec,
    lambda: f64,
    horizon: f64,
    n: usize,
) -> Result<ResolventTable> {
    check_lambda(lambda)?;
    k.validate()?;
    let grid = UniformGrid::new(horizon, n)?;
    let r = resolvent_analytic(k, lambda)
        .ok_or_else(|| Error::arg("no closed-form resolvent for this kernel"))?;
    let times = grid.times();
    let mut tbl = ResolventTable {
        kernel: k.clone(),
        lambda,
        grid,
        samples: times.iter().map(|&t| r.eval(t)).collect(),
        cumulative: times.iter().map(|&t| r.cumulative(t)).collect(),
        method: ResolventMethod::Analytic,
        residual: 0.0,
    };
    tbl.residual = resolvent_residual(&tbl);
    Ok(tbl)
}

/// Leading terms `S(t) = sum_{m=1}^{terms} (-1)^{m-1} lambda^m K^{*m}(t)` of the
/// Neumann series of a singular power-law kernel. Enough terms are kept that
/// the remainder's forcing `O(t^{(terms+1) alpha - 1})` has
/// `(terms+1) alpha >= 2`; bounded kernels keep none.
struct Neumann<'a> {
    k: &'a KernelSpec,
    lambda: f64,
    terms: u32,
}

impl<'a> Neumann<'a> {
    fn new(k: &'a KernelSpec, lambda: f64) -> Self {
        let terms = match k {
            KernelSpec::PowerLaw { alpha, .. } if *alpha < 1.0 => (2.0 / alpha).ceil() as u32 - 1,
            _ => 0,
        };
        Self { k, lambda, terms }
    }

    fn sign(m: u32) -> f64 {
        if m % 2 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// `(-1)^{m-1} lambda^m K^{*m}(t)`.
    fn term(&self, m: u32, t: f64) -> f64 {
        Self::sign(m) * self.lambda.powi(m as i32) * self.k.self_convolution(m, t).unwrap_or(0.0)
    }

    fn sum(&self, t: f64) -> f64 {
        (1..=self.terms).map(|m| self.term(m, t)).sum()
    }

    fn sum_integral(&self, t: f64) -> f64 {
        (1..=self.terms)
            .map(|m| {
                Self::sign(m)
                    * self.lambda.powi(m as i32)
                    * self.k.self_convolution_integral(m, t).unwrap_or(0.0)
            })
            .sum()
    }
}

/// Solve `R + (lambda K) * R = lambda K` on a uniform grid.
///
/// For a singular power-law kernel the first terms of the Neumann series
/// `sum_m (-1)^{m-1} lambda^m K^{*m}` are known in closed form; they are
/// subtracted so that the remainder solves an equation with a smooth forcing,
/// which the hat-function product rule integrates to second order.
pub fn resolvent_numeric(
    k: &KernelSpec,
    lambda: f64,
    horizon: f64,
    n: usize,
) -> Result<ResolventTable> {
    check_lambda(lambda)?;
    k.validate()?;
    if n < 2 {
        return Err(Error::arg("resolvent_numeric needs n >= 2"));
    }
    let grid = UniformGrid::new(horizon, n)?;
    let times = grid.times();
    if lambda == 0.0 {
        return Ok(ResolventTable {
            kernel: k.clone(),
            lambda,
            grid,
            samples: vec![0.0; n + 1],
            cumulative: vec![0.0; n + 1],
            method: ResolventMethod::Numeric,
            residual: 0.0,
        });
    }

    let ns = Neumann::new(k, lambda);
    let terms = ns.terms;
    // forcing of the remainder equation
    let forcing: Vec<f64> = times
        .iter()
        .map(|&t| {
            if terms == 0 {
                lambda * k.value(t)
            } else if t == 0.0 {
                0.0
            } else {
                // (-1)^K lambda^{K+1} K^{*(K+1)}
                ns.term(terms + 1, t)
            }
        })
        .collect();

    let w = k.weights(grid.dt(), n);
    let mut rho = vec![0.0; n + 1];
    rho[0] = forcing[0];
    let diag = 1.0 + lambda * w.hat[0];
    for j in 1..=n {
        rho[j] = (forcing[j] - lambda * w.history(j, &rho)) / diag;
        if !rho[j].is_finite() {
            return Err(Error::NonFinite {
                index: j,
                detail: "resolvent recursion diverged".into(),
            });
        }
    }

    let rho_int = cumulative_trapezoid(grid.dt(), &rho);
    let samples: Vec<f64> = times
        .iter()
        .zip(&rho)
        .map(|(&t, r)| {
            if terms > 0 && t == 0.0 {
                f64::INFINITY
            } else {
                ns.sum(t) + r
            }
        })
        .collect();
    let cumulative: Vec<f64> = times
        .iter()
        .zip(&rho_int)
        .map(|(&t, r)| ns.sum_integral(t) + r)
        .collect();

    let mut tbl = ResolventTable {
        kernel: k.clone(),
        lambda,
        grid,
        samples,
        cumulative,
        method: ResolventMethod::Numeric,
        residual: 0.0,
    };
    tbl.residual = resolvent_residual(&tbl);
    Ok(tbl)
}

/// `max_j |lambda K(t_j) - R(t_j) - (R * lambda K)(t_j)|` over `j >= 1`.
///
/// `R` is split as in the solver: the subtracted Neumann terms are convolved
/// with `lambda K` in closed form, and the remainder is integrated exactly over
/// each cell through the tabulated `int R` against the cell average of `K`.
pub fn resolvent_residual(tbl: &ResolventTable) -> f64 {
    if tbl.lambda == 0.0 {
        return tbl.samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    }
    let ns = Neumann::new(&tbl.kernel, tbl.lambda);
    let n = tbl.grid.steps;
    let dt = tbl.grid.dt();
    let w = tbl.kernel.weights(dt, n);
    let kappa: Vec<f64> = w.cell.iter().map(|c| tbl.lambda * c / dt).collect();
    let rest: Vec<f64> = (0..=n)
        .map(|j| tbl.cumulative[j] - ns.sum_integral(tbl.grid.t(j)))
        .collect();
    let inc: Vec<f64> = rest.windows(2).map(|p| p[1] - p[0]).collect();
    let mut worst: f64 = 0.0;
    for j in 1..=n {
        let t = tbl.grid.t(j);
        // lambda K * S shifts every Neumann term up by one order
        let closed: f64 = (2..=ns.terms + 1).map(|m| -ns.term(m, t)).sum();
        let conv: f64 = closed + (0..j).map(|i| inc[i] * kappa[j - 1 - i]).sum::<f64>();
        let e = tbl.lambda * tbl.kernel.value(t) - tbl.samples[j] - conv;
        worst = worst.max(e.abs());
    }
    worst
}

/// The kernel `R / lambda` (equal to `K` when `lambda = 0`), usable as a
/// convolution kernel with its own product-integration weights.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaledResolvent {
    Kernel(KernelSpec),
    /// `c e^{-lambda c t}`.
    Exponential {
        c: f64,
        lambda: f64,
    },
    /// `c t^{a-1} E_{a,a}(-lambda c t^a)`.
    MittagLeffler {
        alpha: f64,
        c: f64,
        lambda: f64,
    },
    /// `R / lambda` from a numeric table of a bounded kernel.
    Tabulated(TabulatedKernel),
}

impl ScaledResolvent {
    /// Build the closed form when available, otherwise tabulate on
    /// `n` steps of `[0, horizon]`.
    pub fn new(k: &KernelSpec, lambda: f64, horizon: f64, n: usize) -> Result<Self> {
        check_lambda(lambda)?;
        k.validate()?;
        if lambda == 0.0 {
            return Ok(ScaledResolvent::Kernel(k.clone()));
        }
        Ok(match *k {
            KernelSpec::Constant { c } => ScaledResolvent::Exponential { c, lambda },
            KernelSpec::PowerLaw { alpha: 1.0, scale } => {
                ScaledResolvent::Exponential { c: scale, lambda }
            }
            KernelSpec::PowerLaw { alpha, scale } => ScaledResolvent::MittagLeffler {
                alpha,
                c: scale,
                lambda,
            },
            KernelSpec::ExponentialSum { .. } => {
                let tbl = resolvent_numeric(k, lambda, horizon, n)?;
                ScaledResolvent::Tabulated(TabulatedKernel {
                    dt: tbl.grid.dt(),
                    values: tbl.samples.iter().map(|r| r / lambda).collect(),
                })
            }
        })
    }

    /// `R(t)/lambda`.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            ScaledResolvent::Kernel(k) => k.value(t),
            ScaledResolvent::Exponential { c, lambda } => c * (-lambda * c * t).exp(),
            ScaledResolvent::MittagLeffler { alpha, c, lambda } => {
                if t == 0.0 {
                    return f64::INFINITY;
                }
                c * t.powf(alpha - 1.0) * ml(*alpha, *alpha, -lambda * c * t.powf(*alpha))
            }
            ScaledResolvent::Tabulated(tab) => tab.eval(t),
        }
    }
}

impl ConvKernel for ScaledResolvent {
    fn integral1(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            ScaledResolvent::Kernel(k) => k.integral1(t),
            ScaledResolvent::Exponential { c, lambda } => {
                c * t * crate::kernel::phi1(lambda * c * t)
            }
            ScaledResolvent::MittagLeffler { alpha, c, lambda } => {
                c * t.powf(*alpha) * ml(*alpha, alpha + 1.0, -lambda * c * t.powf(*alpha))
            }
            ScaledResolvent::Tabulated(tab) => tab.integral1(t),
        }
    }

    fn integral2(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            ScaledResolvent::Kernel(k) => k.integral2(t),
            ScaledResolvent::Exponential { c, lambda } => {
                c * t * t * crate::kernel::g0(lambda * c * t)
            }
            ScaledResolvent::MittagLeffler { alpha, c, lambda } => {
                c * t.powf(alpha + 1.0) * ml(*alpha, alpha + 2.0, -lambda * c * t.powf(*alpha))
            }
            ScaledResolvent::Tabulated(tab) => tab.integral2(t),
        }
    }

    fn weights(&self, dt: f64, n: usize) -> ProductWeights {
        match self {
            ScaledResolvent::Kernel(k) => k.weights(dt, n),
            ScaledResolvent::Tabulated(tab) => tab.weights(dt, n),
            ScaledResolvent::Exponential { c, lambda } => {
                let atoms = vec![crate::kernel::Atom::new(*c, lambda * c)];
                match KernelSpec::exp_sum(atoms) {
                    Ok(k) => k.weights(dt, n),
                    // a negative rate (c < 0) has no exp-sum form
                    Err(_) => ProductWeights::from_integrals(
                        dt,
                        n,
                        |t| self.integral1(t),
                        |t| self.integral2(t),
                    ),
                }
            }
            ScaledResolvent::MittagLeffler { .. } => {
                // Gauss moments away from the singular first cell; second
                // differences of the Mittag-Leffler antiderivative would
                // amplify its rounding by (t/dt)^2
                let k1 = self.integral1(dt);
                let k2 = self.integral2(dt);
                ProductWeights::from_moments(dt, n, |i| {
                    if i == 0 {
                        (k1, k1 - k2 / dt)
                    } else {
                        crate::kernel::gauss_moments(
                            |t| self.eval(t),
                            i as f64 * dt,
                            (i + 1) as f64 * dt,
                        )
                    }
                })
            }
        }
    }
}
