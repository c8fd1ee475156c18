//! Monte Carlo paths of the stochastic convolution equation, the Gaussian
//! Volterra OU case and the finite-atom lift, plus the path statistics used
//! to cross-check the transform stack.
//!
//! Every path draws from its own ChaCha8 stream (`seed`, stream = path
//! index), so the output does not depend on how rayon schedules the work.

mod euler;
mod ou;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::riccati::ExponentTriple;
use crate::stats::ols_slope;

pub use euler::{simulate_lift, simulate_lift_with, simulate_volterra, simulate_volterra_with};
pub use ou::simulate_volterra_ou;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    VolterraEuler,
    OuExact,
    LiftEuler,
}

/// What a simulation keeps besides the terminal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Also step `L` with `d<B, W> = rho dt`.
    pub with_price: bool,
    /// Keep every grid value of `V` (and `L`); otherwise only terminal data.
    pub store_paths: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            with_price: false,
            store_paths: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSet {
    pub grid: UniformGrid,
    pub n_paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub l0: f64,
    /// Row-major `n_paths x (steps + 1)` values of `V`, if stored.
    pub v_paths: Option<Vec<f64>>,
    /// Same layout for `L`.
    pub l_paths: Option<Vec<f64>>,
    pub v_terminal: Vec<f64>,
    pub l_terminal: Option<Vec<f64>>,
    /// Trapezoid rule for `int_0^T V` along each path.
    pub v_integral: Vec<f64>,
    /// Fraction of (path, step) pairs where `V < 0` was truncated before
    /// evaluating the diffusion coefficient.
    pub truncated: f64,
}

impl PathSet {
    pub fn v_path(&self, i: usize) -> Option<&[f64]> {
        let len = self.grid.len();
        self.v_paths.as_ref().map(|v| &v[i * len..(i + 1) * len])
    }

    pub fn l_path(&self, i: usize) -> Option<&[f64]> {
        let len = self.grid.len();
        self.l_paths.as_ref().map(|v| &v[i * len..(i + 1) * len])
    }
}

pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

pub(crate) fn check_sizes(horizon: f64, n_steps: usize, n_paths: usize) -> Result<UniformGrid> {
    if n_paths == 0 {
        return Err(Error::arg("need at least one path"));
    }
    UniformGrid::new(horizon, n_steps)
}

/// Per-path output of one simulated trajectory.
pub(crate) struct PathOut {
    pub v: Vec<f64>,
    pub l: Vec<f64>,
    pub v_end: f64,
    pub l_end: f64,
    pub v_int: f64,
    pub truncated: usize,
}

pub(crate) fn collect(
    outs: Vec<PathOut>,
    grid: UniformGrid,
    seed: u64,
    scheme: Scheme,
    l0: f64,
    cfg: SimConfig,
) -> PathSet {
    let n_paths = outs.len();
    let steps = (n_paths * grid.steps).max(1) as f64;
    let truncated = outs.iter().map(|o| o.truncated).sum::<usize>() as f64 / steps;
    let v_terminal = outs.iter().map(|o| o.v_end).collect();
    let v_integral = outs.iter().map(|o| o.v_int).collect();
    let l_terminal = cfg
        .with_price
        .then(|| outs.iter().map(|o| o.l_end).collect());
    let (v_paths, l_paths) = if cfg.store_paths {
        let v = outs.iter().flat_map(|o| o.v.iter().copied()).collect();
        let l = cfg
            .with_price
            .then(|| outs.iter().flat_map(|o| o.l.iter().copied()).collect());
        (Some(v), l)
    } else {
        (None, None)
    };
    PathSet {
        grid,
        n_paths,
        seed,
        scheme,
        l0,
        v_paths,
        l_paths,
        v_terminal,
        l_terminal,
        v_integral,
        truncated,
    }
}

/// Slope of `log E|V_{t+h} - V_t|^2` against `log h`, with the mean taken over
/// paths and all start times on the grid. Lags are in time units and are
/// rounded to whole grid steps.
pub fn holder_estimate(p: &PathSet, lags: &[f64]) -> Result<f64> {
    if lags.len() < 3 {
        return Err(Error::arg(
            "the Hoelder regression needs at least three lags",
        ));
    }
    if p.n_paths < 1000 {
        return Err(Error::arg(format!(
            "the Hoelder regression needs at least 1000 paths, got {}",
            p.n_paths
        )));
    }
    let Some(v) = p.v_paths.as_ref() else {
        return Err(Error::arg("the Hoelder regression needs stored paths"));
    };
    let dt = p.grid.dt();
    let len = p.grid.len();
    if v.chunks(len).all(|path| path == &v[..len]) {
        return Err(Error::Diagnostic(
            "all paths coincide; increments carry no noise to regress on".into(),
        ));
    }
    let mut pts = Vec::with_capacity(lags.len());
    for &h in lags {
        let m = (h / dt).round();
        if !(m >= 1.0) || (m * dt - h).abs() > 1e-9 * h || m as usize >= len {
            return Err(Error::domain(
                "lag must be a whole number of grid steps inside the horizon",
                h,
            ));
        }
        let m = m as usize;
        let mut acc = 0.0;
        for path in v.chunks(len) {
            acc += path
                .windows(m + 1)
                .map(|w| (w[m] - w[0]).powi(2))
                .sum::<f64>();
        }
        let mean = acc / (p.n_paths * (len - m)) as f64;
        if !(mean > 0.0) {
            return Err(Error::Diagnostic(format!(
                "zero mean squared increment at lag {h}"
            )));
        }
        pts.push((h.ln(), mean.ln()));
    }
    Ok(ols_slope(&pts))
}

/// Sample mean of `exp(u L_T + v V_T + w int_0^T V)` and its standard error.
///
/// The jackknife standard error of a sample mean equals the usual
/// `s / sqrt(n)`, computed here on the real and imaginary parts jointly.
pub fn mc_transform(p: &PathSet, e: &ExponentTriple) -> Result<(Complex64, f64)> {
    if e.is_zero() {
        return Ok((Complex64::new(1.0, 0.0), 0.0));
    }
    let zero = Complex64::default();
    let l = match (&p.l_terminal, e.u == zero) {
        (_, true) => None,
        (Some(l), false) => Some(l),
        (None, false) => return Err(Error::arg("u != 0 needs paths simulated with the price")),
    };
    let samples: Vec<Complex64> = (0..p.n_paths)
        .map(|i| {
            let mut x = e.v * p.v_terminal[i] + e.w * p.v_integral[i];
            if let Some(l) = l {
                x += e.u * l[i];
            }
            x.exp()
        })
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / n;
    if samples.len() < 2 {
        return Ok((mean, f64::NAN));
    }
    let var = samples.iter().map(|s| (s - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
