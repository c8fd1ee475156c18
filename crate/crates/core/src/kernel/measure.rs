//! Laplace-measure representations `K(t) = int e^{-x t} mu(dx)` and their
//! finite-atom discretisations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::recip_gamma;

use super::{Atom, KernelSpec};

/// A measure `mu` on `[0, inf)` whose Laplace transform is a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LaplaceMeasure {
    /// `mass * delta_0`.
    DiracAtZero { mass: f64 },
    /// `scale * x^{-alpha} / (Gamma(alpha) Gamma(1 - alpha)) dx`.
    RoughDensity { alpha: f64, scale: f64 },
    /// `sum_i w_i delta_{x_i}`; weights may be negative.
    Atoms { atoms: Vec<Atom> },
}

impl LaplaceMeasure {
    pub fn rough(alpha: f64) -> Self {
        LaplaceMeasure::RoughDensity { alpha, scale: 1.0 }
    }

    fn density_constant(alpha: f64, scale: f64) -> f64 {
        scale * recip_gamma(alpha) * recip_gamma(1.0 - alpha)
    }
}

/// Laplace measure of a kernel.
pub fn measure_of(k: &KernelSpec) -> Result<LaplaceMeasure> {
    k.validate()?;
    Ok(match k {
        KernelSpec::Constant { c } => LaplaceMeasure::DiracAtZero { mass: *c },
        KernelSpec::PowerLaw { alpha, scale } if *alpha == 1.0 => {
            LaplaceMeasure::DiracAtZero { mass: *scale }
        }
        KernelSpec::PowerLaw { alpha, scale } => LaplaceMeasure::RoughDensity {
            alpha: *alpha,
            scale: *scale,
        },
        KernelSpec::ExponentialSum { atoms } => LaplaceMeasure::Atoms {
            atoms: atoms.clone(),
        },
    })
}

/// Kernel generated by a measure.
pub fn kernel_from_measure(m: &LaplaceMeasure) -> Result<KernelSpec> {
    match m {
        LaplaceMeasure::DiracAtZero { mass } => Ok(KernelSpec::constant(*mass)),
        LaplaceMeasure::RoughDensity { alpha, scale } => KernelSpec::power_law(*alpha, *scale),
        LaplaceMeasure::Atoms { atoms } => KernelSpec::exp_sum(atoms.clone()),
    }
}

/// Geometric partition of `(0, x_max]`: edges `x_max r^{n-1}, ..., x_max r, x_max`
/// with the first edge at `x_max * first_edge_fraction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub x_max: f64,
    pub first_edge_fraction: f64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            x_max: 1e6,
            first_edge_fraction: 1e-8,
        }
    }
}

/// Discretise `m` into `n` atoms with the default partition fraction.
pub fn discretize_measure(m: &LaplaceMeasure, n: usize, x_max: f64) -> Result<Vec<Atom>> {
    discretize_measure_with(
        m,
        n,
        &PartitionConfig {
            x_max,
            ..PartitionConfig::default()
        },
    )
}

/// Discretise `m` into `n` atoms: cell masses as weights, cell centroids as rates.
pub fn discretize_measure_with(
    m: &LaplaceMeasure,
    n: usize,
    cfg: &PartitionConfig,
) -> Result<Vec<Atom>> {
    if n == 0 {
        return Err(Error::arg("discretize_measure needs at least one atom"));
    }
    match m {
        LaplaceMeasure::DiracAtZero { mass } => Ok(vec![Atom::new(*mass, 0.0)]),
        LaplaceMeasure::Atoms { atoms } => Ok(atoms.clone()),
        LaplaceMeasure::RoughDensity { alpha, scale } => {
            if !(cfg.x_max > 0.0) || !cfg.x_max.is_finite() {
                return Err(Error::domain("x_max must be positive", cfg.x_max));
            }
            if !(cfg.first_edge_fraction > 0.0 && cfg.first_edge_fraction < 1.0) {
                return Err(Error::domain(
                    "first_edge_fraction must lie in (0, 1)",
                    cfg.first_edge_fraction,
                ));
            }
            if !(*alpha > 0.0 && *alpha < 1.0) {
                return Err(Error::arg(format!(
                    "rough density needs alpha in (0, 1), got {alpha}"
                )));
            }
            let c = LaplaceMeasure::density_constant(*alpha, *scale);
            let mut edges = Vec::with_capacity(n + 1);
            edges.push(0.0);
            if n == 1 {
                edges.push(cfg.x_max);
            } else {
                let r = cfg.first_edge_fraction.powf(1.0 / (n - 1) as f64);
                for i in (0..n).rev() {
                    edges.push(cfg.x_max * r.powi(i as i32));
                }
            }
            let e0 = 1.0 - alpha;
            let e1 = 2.0 - alpha;
            Ok(edges
                .windows(2)
                .map(|w| {
                    let mass = c * (w[1].powf(e0) - w[0].powf(e0)) / e0;
                    let moment = c * (w[1].powf(e1) - w[0].powf(e1)) / e1;
                    Atom::new(mass, moment / mass)
                })
                .collect())
        }
    }
}
