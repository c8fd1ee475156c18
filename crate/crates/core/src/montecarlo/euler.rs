//! Euler schemes with full truncation: the diffusion coefficient and the
//! price leg see `max(V, 0)`, the drift sees `V`.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{phi1, Atom, ConvKernel, KernelSpec};
use crate::riccati::ModelParams;

use super::{check_sizes, collect, path_rng, PathOut, PathSet, Scheme, SimConfig};

/// Brownian increments `(dW, dB)` with `d<B, W> = rho dt`.
struct Increments {
    rng: ChaCha8Rng,
    sqdt: f64,
    rho: f64,
    rho_bar: f64,
    with_price: bool,
}

impl Increments {
    fn new(seed: u64, path: usize, dt: f64, rho: f64, with_price: bool) -> Self {
        Self {
            rng: path_rng(seed, path),
            sqdt: dt.sqrt(),
            rho,
            rho_bar: (1.0 - rho * rho).max(0.0).sqrt(),
            with_price,
        }
    }

    fn next(&mut self) -> (f64, f64) {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        let dw = self.sqdt * z;
        if !self.with_price {
            return (dw, 0.0);
        }
        let zp: f64 = StandardNormal.sample(&mut self.rng);
        (dw, self.rho * dw + self.rho_bar * self.sqdt * zp)
    }
}

fn check_model(m: &ModelParams, cfg: SimConfig) -> Result<()> {
    if cfg.with_price {
        m.check_heston_leg()
    } else {
        m.validate()
    }
}

/// Dot product with four independent accumulators; the fixed summation
/// order keeps results reproducible.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `V_j = V0 + sum_{i<j} (cell_{j-1-i}/dt) [b(V_i) dt + sigma(max(V_i, 0)) dW_i]`.
pub fn simulate_volterra(
    k: &KernelSpec,
    m: &ModelParams,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    with_price: bool,
) -> Result<PathSet> {
    let cfg = SimConfig {
        with_price,
        store_paths: true,
    };
    simulate_volterra_with(k, m, horizon, n_steps, n_paths, seed, cfg)
}

pub fn simulate_volterra_with(
    k: &KernelSpec,
    m: &ModelParams,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    cfg: SimConfig,
) -> Result<PathSet> {
    k.validate()?;
    check_model(m, cfg)?;
    let grid = check_sizes(horizon, n_steps, n_paths)?;
    let n = n_steps;
    let dt = grid.dt();
    let w = k.weights(dt, n);
    // reversed so that node j+1 is one forward dot product over the increments
    let rev: Vec<f64> = (0..n).map(|i| w.cell[n - 1 - i] / dt).collect();
    // flat weights turn the convolution into a running sum
    let flat = match *k {
        KernelSpec::Constant { c } => Some(c),
        KernelSpec::PowerLaw { alpha: 1.0, scale } => Some(scale),
        _ => None,
    };
    let m = *m;

    let outs: Vec<PathOut> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut noise = Increments::new(seed, path, dt, m.rho, cfg.with_price);
            let mut z = vec![0.0; n];
            let mut out = PathOut::start(m.v0, m.l0, n, cfg);
            let mut v = m.v0;
            let mut l = m.l0;
            for j in 0..n {
                let vh = v.max(0.0);
                if v < 0.0 {
                    out.truncated += 1;
                }
                let (dw, db) = noise.next();
                z[j] = (m.beta - m.lambda * v) * dt + (m.alpha0 + m.a * vh).sqrt() * dw;
                if cfg.with_price {
                    l += -0.5 * vh * dt + vh.sqrt() * db;
                }
                let next = match flat {
                    Some(c) => v + c * z[j],
                    None => m.v0 + dot(&rev[n - 1 - j..], &z[..=j]),
                };
                out.v_int += 0.5 * (v + next) * dt;
                v = next;
                out.push(v, l, cfg);
            }
            out.finish(v, l);
            out
        })
        .collect();
    if let Some(bad) = outs.iter().position(|o| !o.v_end.is_finite()) {
        return Err(Error::NonFinite {
            index: bad,
            detail: "simulated path is not finite".into(),
        });
    }
    Ok(collect(outs, grid, seed, Scheme::VolterraEuler, m.l0, cfg))
}

impl PathOut {
    fn start(v0: f64, l0: f64, n: usize, cfg: SimConfig) -> Self {
        let mut out = Self {
            v: Vec::new(),
            l: Vec::new(),
            v_end: v0,
            l_end: l0,
            v_int: 0.0,
            truncated: 0,
        };
        if cfg.store_paths {
            out.v.reserve(n + 1);
            out.v.push(v0);
            if cfg.with_price {
                out.l.reserve(n + 1);
                out.l.push(l0);
            }
        }
        out
    }

    fn push(&mut self, v: f64, l: f64, cfg: SimConfig) {
        if cfg.store_paths {
            self.v.push(v);
            if cfg.with_price {
                self.l.push(l);
            }
        }
    }

    fn finish(&mut self, v: f64, l: f64) {
        self.v_end = v;
        self.l_end = l;
    }
}

/// Lift factors `u_i` with `u_i(0) = 0` and `V = V0 + sum_i w_i u_i`:
/// `u_i <- e^{-x_i dt} u_i + dt phi1(x_i dt) [b(V) + sigma(max(V, 0)) dW/dt]`.
///
/// Uses the same Gaussian draws as [`simulate_volterra`], so the two
/// schemes agree path by path for a single zero-rate atom.
pub fn simulate_lift(
    atoms: &[Atom],
    m: &ModelParams,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathSet> {
    simulate_lift_with(
        atoms,
        m,
        horizon,
        n_steps,
        n_paths,
        seed,
        SimConfig::default(),
    )
}

pub fn simulate_lift_with(
    atoms: &[Atom],
    m: &ModelParams,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    cfg: SimConfig,
) -> Result<PathSet> {
    if atoms.is_empty() {
        return Err(Error::arg("the lift needs at least one atom"));
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
    check_model(m, cfg)?;
    let grid = check_sizes(horizon, n_steps, n_paths)?;
    let dt = grid.dt();
    let decay: Vec<f64> = atoms.iter().map(|a| (-a.rate * dt).exp()).collect();
    let gain: Vec<f64> = atoms.iter().map(|a| dt * phi1(a.rate * dt)).collect();
    let weight: Vec<f64> = atoms.iter().map(|a| a.weight).collect();
    let m = *m;

    let outs: Vec<PathOut> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut noise = Increments::new(seed, path, dt, m.rho, cfg.with_price);
            let mut u = vec![0.0; atoms.len()];
            let mut out = PathOut::start(m.v0, m.l0, n_steps, cfg);
            let mut v = m.v0;
            let mut l = m.l0;
            for _ in 0..n_steps {
                let vh = v.max(0.0);
                if v < 0.0 {
                    out.truncated += 1;
                }
                let (dw, db) = noise.next();
                let rate = (m.beta - m.lambda * v) + (m.alpha0 + m.a * vh).sqrt() * dw / dt;
                if cfg.with_price {
                    l += -0.5 * vh * dt + vh.sqrt() * db;
                }
                for i in 0..u.len() {
                    u[i] = decay[i] * u[i] + gain[i] * rate;
                }
                let next = m.v0 + dot(&weight, &u);
                out.v_int += 0.5 * (v + next) * dt;
                v = next;
                out.push(v, l, cfg);
            }
            out.finish(v, l);
            out
        })
        .collect();
    if let Some(bad) = outs.iter().position(|o| !o.v_end.is_finite()) {
        return Err(Error::NonFinite {
            index: bad,
            detail: "simulated path is not finite".into(),
        });
    }
    Ok(collect(outs, grid, seed, Scheme::LiftEuler, m.l0, cfg))
}
