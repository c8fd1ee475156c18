//! Affine Volterra processes with rough kernels: kernels and their resolvents,
//! Riccati-Volterra solvers in four formulations, characteristic functions,
//! Fourier pricing and Monte Carlo.
//!
//! ```
//! use num_complex::Complex64;
//! use volterra_core::{cf_general, ExponentTriple, KernelSpec, ModelParams};
//!
//! let m = ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap();
//! let k = KernelSpec::rough(0.6).unwrap();
//! let e = ExponentTriple::price(Complex64::new(0.0, 1.0));
//! let cf = cf_general(&k, &m, &e, 1.0, 200).unwrap();
//! assert!(cf.value.norm() <= 1.0);
//! ```

pub mod error;
pub mod grid;
pub mod kernel;
pub mod montecarlo;
pub mod resolvent;
pub mod riccati;
pub mod special;
pub mod stats;
pub mod transforms;

pub use self::kernel as kernel_engine;
pub use self::special as special_fn;

pub use error::{Error, Result};
pub use grid::UniformGrid;
pub use kernel::{
    discretize_measure, fractional_derivative, fractional_integral, kernel_eval,
    kernel_from_measure, measure_of, regularity_slope, Atom, ConvKernel, KernelSpec,
    LaplaceMeasure, PartitionConfig,
};
pub use montecarlo::{
    holder_estimate, mc_transform, simulate_lift, simulate_lift_with, simulate_volterra,
    simulate_volterra_ou, simulate_volterra_with, PathSet, Scheme, SimConfig,
};
pub use resolvent::{
    resolvent_analytic, resolvent_numeric, resolvent_residual, resolvent_table_analytic,
    AnalyticResolvent, ResolventMethod, ResolventTable, ScaledResolvent,
};
pub use riccati::{
    q_fn, r_phi, r_psi, reconstruct_spde_psi, solve_convolution_riccati, solve_fractional_riccati,
    solve_lift_riccati, solve_lift_transform, solve_riccati_volterra, solve_riccati_volterra_with,
    ConvolutionRiccatiSolution, ExponentTriple, LiftRiccatiSolution, ModelParams, RiccatiSolution,
    SolverConfig, SolverKind, SpdeDual,
};
pub use special::{gamma_fn, mittag_leffler, mittag_leffler_real, MLParams};
pub use stats::mean_and_se;
pub use transforms::{
    black_scholes, cf_general, cf_lift, cf_lift_general, cf_rough_heston, forward_curve,
    implied_vol, log_transform, price_european, Formulation, ForwardCurve, FourierPricer,
    InversionGrid, OptionKind, TransformValue,
};
