//! Riccati-Volterra equations and their dual forms: the kernel form, the
//! fractional ODE, the convolution Riccati equation, the finite-atom lift and
//! the mild-SPDE reconstruction.

mod convolution;
mod fractional;
mod lift;
mod series;
mod spde;
mod volterra;

pub use convolution::{solve_convolution_riccati, ConvolutionRiccatiSolution};
pub use fractional::solve_fractional_riccati;
pub use lift::{solve_lift_riccati, solve_lift_transform, LiftRiccatiSolution};
pub use spde::{reconstruct_spde_psi, SpdeDual};
pub use volterra::{solve_riccati_volterra, solve_riccati_volterra_with};

pub(crate) use series::PowerSeries;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::kernel::KernelSpec;

/// Affine coefficients `b(x) = beta - lambda x`, `sigma(x)^2 = alpha0 + a x`
/// and the price leg of the Volterra-Heston model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub lambda: f64,
    pub alpha0: f64,
    pub a: f64,
    pub sigma: f64,
    pub rho: f64,
    pub v0: f64,
    pub l0: f64,
}

impl ModelParams {
    /// Volterra-Heston parameters in mean-reversion form, `beta = lambda theta`, `a = sigma^2`.
    pub fn heston(lambda: f64, theta: f64, sigma: f64, rho: f64, v0: f64) -> Result<Self> {
        let m = Self {
            beta: lambda * theta,
            lambda,
            alpha0: 0.0,
            a: sigma * sigma,
            sigma,
            rho,
            v0,
            l0: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    /// Volterra Ornstein-Uhlenbeck parameters (`a = 0`).
    pub fn ou(beta: f64, lambda: f64, alpha0: f64, v0: f64) -> Result<Self> {
        let m = Self {
            beta,
            lambda,
            alpha0,
            a: 0.0,
            sigma: 0.0,
            rho: 0.0,
            v0,
            l0: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_l0(mut self, l0: f64) -> Self {
        self.l0 = l0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("beta", self.beta),
            ("lambda", self.lambda),
            ("alpha0", self.alpha0),
            ("a", self.a),
            ("sigma", self.sigma),
            ("v0", self.v0),
        ];
        for (name, x) in nonneg {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(Error::domain(format!("{name} must be finite and >= 0"), x));
            }
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::domain("rho must lie in [-1, 1]", self.rho));
        }
        if !self.l0.is_finite() {
            return Err(Error::domain("l0 must be finite", self.l0));
        }
        if self.alpha0 > 0.0 && self.a > 0.0 {
            return Err(Error::arg(
                "alpha0 and a cannot both be positive: the model must be of square-root (alpha0 = 0) or OU (a = 0) type",
            ));
        }
        Ok(())
    }

    /// The price leg needs `alpha0 = 0` and `a = sigma^2`.
    pub fn check_heston_leg(&self) -> Result<()> {
        self.validate()?;
        if self.alpha0 != 0.0 {
            return Err(Error::arg("the price leg needs alpha0 = 0"));
        }
        let s2 = self.sigma * self.sigma;
        if (s2 - self.a).abs() > 1e-12 * s2.max(self.a).max(1.0) {
            return Err(Error::arg(format!(
                "the price leg needs a = sigma^2, got a = {} and sigma = {}",
                self.a, self.sigma
            )));
        }
        Ok(())
    }

    /// Long-run level `beta / lambda`, when mean reversion is present.
    pub fn theta(&self) -> Option<f64> {
        (self.lambda > 0.0).then(|| self.beta / self.lambda)
    }

    pub fn q(&self, u: Complex64, z: Complex64) -> Complex64 {
        q_fn(self, u, z)
    }
}

/// `Q(u, z) = (u^2 - u)/2 + sigma rho u z + sigma^2 z^2 / 2`.
pub fn q_fn(m: &ModelParams, u: Complex64, z: Complex64) -> Complex64 {
    0.5 * (u * u - u) + m.sigma * m.rho * u * z + 0.5 * m.sigma * m.sigma * z * z
}

/// `R_phi(y) = beta y + alpha0 y^2 / 2`.
pub fn r_phi(m: &ModelParams, y: Complex64) -> Complex64 {
    m.beta * y + 0.5 * m.alpha0 * y * y
}

/// `R_Psi(y) = -lambda y + a y^2 / 2`.
pub fn r_psi(m: &ModelParams, y: Complex64) -> Complex64 {
    -m.lambda * y + 0.5 * m.a * y * y
}

/// Exponents `(u, v, w)` of `E[exp(u L_T + v V_T + w int_0^T V)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentTriple {
    pub u: Complex64,
    pub v: Complex64,
    pub w: Complex64,
}

impl ExponentTriple {
    pub fn new(u: Complex64, v: Complex64, w: Complex64) -> Self {
        Self { u, v, w }
    }

    pub fn price(u: Complex64) -> Self {
        Self::new(u, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
    }

    pub fn variance(v: Complex64) -> Self {
        Self::new(Complex64::new(0.0, 0.0), v, Complex64::new(0.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.u == Complex64::default()
            && self.v == Complex64::default()
            && self.w == Complex64::default()
    }

    /// Messages for each exponent outside `Re u in [0,1]`, `Re v <= 0`, `Re w <= 0`.
    pub fn domain_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.u.re) {
            out.push(format!("Re u = {} lies outside [0, 1]", self.u.re));
        }
        if self.v.re > 0.0 {
            out.push(format!("Re v = {} is positive", self.v.re));
        }
        if self.w.re > 0.0 {
            out.push(format!("Re w = {} is positive", self.w.re));
        }
        out
    }

    fn check_finite(&self) -> Result<()> {
        for (name, z) in [("u", self.u), ("v", self.v), ("w", self.w)] {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::arg(format!("exponent {name} is not finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Volterra,
    FractionalAdams,
    ConvolutionRiccati,
    Lift,
}

/// Corrector and overflow settings shared by the time-stepping solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub blowup: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            blowup: 1e8,
        }
    }
}

/// Grid solution of a Riccati-Volterra equation.
///
/// `int_psi[j]` and `int_drive[j]` hold `int_0^{t_j} psi` and
/// `int_0^{t_j} (Q(u, psi) - lambda psi + w)`. For a singular kernel with
/// `v != 0`, `psi[0]` stores `v` times the average of `K` over the first cell.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub grid: UniformGrid,
    pub psi: Vec<Complex64>,
    pub q_of_psi: Vec<Complex64>,
    pub int_psi: Vec<Complex64>,
    pub int_psi_sq: Vec<Complex64>,
    pub int_drive: Vec<Complex64>,
    pub solver: SolverKind,
    pub kernel: KernelSpec,
    pub model: ModelParams,
    pub exponent: ExponentTriple,
    pub warnings: Vec<String>,
    /// Largest equation residual on the grid, measured with the solver's quadrature.
    pub residual: f64,
    pub(crate) singular: Option<PowerSeries>,
}

/// Coefficients of the drive `c0 + l y + q y^2` of the kernel-form equation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Drive {
    pub c0: Complex64,
    pub l: Complex64,
    pub q: Complex64,
}

impl Drive {
    pub fn new(m: &ModelParams, e: &ExponentTriple) -> Self {
        let u = e.u;
        Self {
            c0: 0.5 * (u * u - u) + e.w,
            l: m.sigma * m.rho * u - m.lambda,
            q: Complex64::new(0.5 * m.a, 0.0),
        }
    }

    #[inline]
    pub fn eval(&self, y: Complex64) -> Complex64 {
        self.c0 + self.l * y + self.q * y * y
    }
}

pub(crate) fn check_inputs(
    m: &ModelParams,
    e: &ExponentTriple,
    horizon: f64,
    n: usize,
) -> Result<UniformGrid> {
    m.validate()?;
    e.check_finite()?;
    if n < 2 {
        return Err(Error::arg(format!(
            "Riccati solvers need n >= 2 steps, got {n}"
        )));
    }
    if e.u != Complex64::default() {
        m.check_heston_leg()?;
    }
    UniformGrid::new(horizon, n)
}
