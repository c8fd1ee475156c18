//! Convolution kernels, their Laplace measures, product-integration weights
//! and Riemann-Liouville fractional operators.

mod fractional;
mod measure;
mod weights;

pub use fractional::{fractional_derivative, fractional_integral};
pub use measure::{
    discretize_measure, discretize_measure_with, kernel_from_measure, measure_of, LaplaceMeasure,
    PartitionConfig,
};
pub(crate) use weights::{g0, gauss_moments, phi1, power_law_weights};
pub use weights::{ConvKernel, ProductWeights, TabulatedKernel};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_fn, recip_gamma};

/// One atom `w * exp(-x t)` of an exponential-sum kernel, or one point mass
/// `w * delta_x` of a discrete Laplace measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub rate: f64,
}

impl Atom {
    pub fn new(weight: f64, rate: f64) -> Self {
        Self { weight, rate }
    }
}

/// A convolution kernel `K` on `(0, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `scale * t^(alpha - 1) / Gamma(alpha)`, `alpha` in `(1/2, 1]`.
    PowerLaw { alpha: f64, scale: f64 },
    /// `K(t) = c`.
    Constant { c: f64 },
    /// `sum_i w_i exp(-x_i t)`.
    ExponentialSum { atoms: Vec<Atom> },
}

impl KernelSpec {
    pub fn power_law(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.5 && alpha <= 1.0) {
            return Err(Error::arg(format!(
                "power-law kernel exponent must lie in (1/2, 1], got {alpha}"
            )));
        }
        if !scale.is_finite() {
            return Err(Error::arg("power-law kernel scale must be finite"));
        }
        Ok(KernelSpec::PowerLaw { alpha, scale })
    }

    /// The rough Heston kernel `t^(alpha-1)/Gamma(alpha)`.
    pub fn rough(alpha: f64) -> Result<Self> {
        Self::power_law(alpha, 1.0)
    }

    pub fn constant(c: f64) -> Self {
        KernelSpec::Constant { c }
    }

    pub fn exp_sum(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::arg("exponential-sum kernel needs at least one atom"));
        }
        if let Some(a) = atoms
            .iter()
            .find(|a| !(a.rate >= 0.0) || !a.rate.is_finite() || !a.weight.is_finite())
        {
            return Err(Error::arg(format!(
                "exponential-sum atoms need finite weights and rates >= 0, got ({}, {})",
                a.weight, a.rate
            )));
        }
        Ok(KernelSpec::ExponentialSum { atoms })
    }

    /// Check the invariants of a kernel built by hand (e.g. deserialised).
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::PowerLaw { alpha, scale } => Self::power_law(*alpha, *scale).map(|_| ()),
            KernelSpec::Constant { c } if !c.is_finite() => {
                Err(Error::arg("constant kernel value must be finite"))
            }
            KernelSpec::Constant { .. } => Ok(()),
            KernelSpec::ExponentialSum { atoms } => Self::exp_sum(atoms.clone()).map(|_| ()),
        }
    }

    /// Regularity exponent: `int_0^h K^2 = O(h^gamma)`.
    pub fn gamma(&self) -> f64 {
        match self {
            KernelSpec::PowerLaw { alpha, .. } => 2.0 * alpha - 1.0,
            _ => 1.0,
        }
    }

    /// True when `K(t)` blows up as `t -> 0`.
    pub fn is_singular(&self) -> bool {
        matches!(self, KernelSpec::PowerLaw { alpha, .. } if *alpha < 1.0)
    }

    /// Evaluate `K(t)`; `t = 0` is only allowed for bounded kernels.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() || (t == 0.0 && self.is_singular()) {
            return Err(Error::domain(
                "kernel evaluation needs t > 0 (t >= 0 for bounded kernels)",
                t,
            ));
        }
        Ok(self.value(t))
    }

    /// Unchecked evaluation; `+inf` at the singularity.
    pub(crate) fn value(&self, t: f64) -> f64 {
        match self {
            KernelSpec::PowerLaw { alpha, scale } => {
                if *alpha == 1.0 {
                    *scale
                } else if t == 0.0 {
                    f64::INFINITY
                } else {
                    scale * t.powf(alpha - 1.0) * recip_gamma(*alpha)
                }
            }
            KernelSpec::Constant { c } => *c,
            KernelSpec::ExponentialSum { atoms } => {
                atoms.iter().map(|a| a.weight * (-a.rate * t).exp()).sum()
            }
        }
    }

    /// `int_0^t K(s)^2 ds`.
    pub fn square_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            KernelSpec::PowerLaw { alpha, scale } => {
                let g = recip_gamma(*alpha);
                scale * scale * g * g * t.powf(2.0 * alpha - 1.0) / (2.0 * alpha - 1.0)
            }
            KernelSpec::Constant { c } => c * c * t,
            KernelSpec::ExponentialSum { atoms } => {
                let mut acc = 0.0;
                for a in atoms {
                    for b in atoms {
                        let x = a.rate + b.rate;
                        acc += a.weight * b.weight * t * weights::phi1(x * t);
                    }
                }
                acc
            }
        }
    }

    /// `m`-fold self-convolution `K^{*m}(t)` where a closed form exists.
    pub(crate) fn self_convolution(&self, m: u32, t: f64) -> Option<f64> {
        match self {
            KernelSpec::PowerLaw { alpha, scale } => {
                let e = m as f64 * alpha;
                Some(scale.powi(m as i32) * t.powf(e - 1.0) * recip_gamma(e))
            }
            KernelSpec::Constant { c } => {
                let e = m as f64;
                Some(c.powi(m as i32) * t.powf(e - 1.0) * recip_gamma(e))
            }
            KernelSpec::ExponentialSum { .. } if m == 1 => Some(self.value(t)),
            KernelSpec::ExponentialSum { .. } => None,
        }
    }

    /// `int_0^t K^{*m}(s) ds` where a closed form exists.
    pub(crate) fn self_convolution_integral(&self, m: u32, t: f64) -> Option<f64> {
        match self {
            KernelSpec::PowerLaw { alpha, scale } => {
                let e = m as f64 * alpha;
                Some(scale.powi(m as i32) * t.powf(e) * recip_gamma(e + 1.0))
            }
            KernelSpec::Constant { c } => {
                let e = m as f64;
                Some(c.powi(m as i32) * t.powf(e) * recip_gamma(e + 1.0))
            }
            KernelSpec::ExponentialSum { .. } if m == 1 => Some(self.integral1(t)),
            KernelSpec::ExponentialSum { .. } => None,
        }
    }
}

/// `K(t)` for `t > 0` (or `t >= 0` for bounded kernels).
pub fn kernel_eval(k: &KernelSpec, t: f64) -> Result<f64> {
    k.eval(t)
}

impl ConvKernel for KernelSpec {
    fn integral1(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            KernelSpec::PowerLaw { alpha, scale } => {
                scale * t.powf(*alpha) * recip_gamma(alpha + 1.0)
            }
            KernelSpec::Constant { c } => c * t,
            KernelSpec::ExponentialSum { atoms } => atoms
                .iter()
                .map(|a| a.weight * t * weights::phi1(a.rate * t))
                .sum(),
        }
    }

    fn integral2(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self {
            KernelSpec::PowerLaw { alpha, scale } => {
                scale * t.powf(alpha + 1.0) * recip_gamma(alpha + 2.0)
            }
            KernelSpec::Constant { c } => 0.5 * c * t * t,
            KernelSpec::ExponentialSum { atoms } => atoms
                .iter()
                .map(|a| a.weight * t * t * weights::g0(a.rate * t))
                .sum(),
        }
    }

    fn weights(&self, dt: f64, n: usize) -> ProductWeights {
        match self {
            KernelSpec::PowerLaw { alpha, scale } => {
                weights::power_law_weights(*alpha, *scale, dt, n)
            }
            KernelSpec::Constant { c } => weights::constant_weights(*c, dt, n),
            KernelSpec::ExponentialSum { atoms } => weights::exp_sum_weights(atoms, dt, n),
        }
    }
}

/// Numerical regularity check: slope of `log int_0^h K^2` against `log h`.
pub fn regularity_slope(k: &KernelSpec, hs: &[f64]) -> Result<f64> {
    if hs.len() < 2 {
        return Err(Error::arg("regularity slope needs at least two step sizes"));
    }
    let pts: Vec<(f64, f64)> = hs
        .iter()
        .map(|&h| (h.ln(), k.square_integral(h).ln()))
        .collect();
    Ok(crate::stats::ols_slope(&pts))
}

/// `Gamma(alpha)` for kernel exponents, surfaced for callers building kernels.
pub fn kernel_gamma(alpha: f64) -> Result<f64> {
    gamma_fn(alpha)
}
