//! Exact Gaussian sampling of the Volterra OU process without mean reversion:
//! `V_t = V0 + beta K1(t) + sqrt(alpha0) int_0^t K(t - s) dW_s`.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{gauss_moments, ConvKernel, KernelSpec};
use crate::riccati::ModelParams;
use crate::special::recip_gamma;

use super::{
    check_sizes, collect, path_rng, simulate_volterra, PathOut, PathSet, Scheme, SimConfig,
};

/// `int_0^a g(tau) K(tau) dtau` for smooth `g`.
///
/// For the power law, `tau = y^{1/alpha}` turns `K(tau) dtau` into a constant
/// multiple of `dy`.
fn kernel_moment(k: &KernelSpec, a: f64, g: impl Fn(f64) -> f64) -> f64 {
    match *k {
        KernelSpec::PowerLaw { alpha, scale } => {
            let c = scale * recip_gamma(alpha + 1.0);
            c * gauss_moments(|y| g(y.powf(1.0 / alpha)), 0.0, a.powf(alpha)).0
        }
        _ => gauss_moments(|t| g(t) * k.eval(t).unwrap_or(0.0), 0.0, a).0,
    }
}

/// `int_0^s K(tau) K(d + tau) dtau` for `d > 0`, split geometrically away
/// from `tau = 0` so the scale `d` of the second factor is resolved.
fn cross_covariance(k: &KernelSpec, s: f64, d: f64) -> f64 {
    let kk = |t: f64| k.eval(t).unwrap_or(0.0);
    let first = s.min(d);
    let mut acc = kernel_moment(k, first, |t| kk(d + t));
    let mut lo = first;
    while lo < s {
        let hi = (2.0 * lo).min(s);
        acc += gauss_moments(|t| kk(t) * kk(d + t), lo, hi).0;
        lo = hi;
    }
    acc
}

/// Gaussian sampling from the exact covariance of the grid values when
/// `lambda = 0`; with mean reversion this delegates to the Euler scheme.
pub fn simulate_volterra_ou(
    k: &KernelSpec,
    m: &ModelParams,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathSet> {
    k.validate()?;
    m.validate()?;
    if m.a != 0.0 {
        return Err(Error::arg("the Volterra OU sampler needs a = 0"));
    }
    if m.lambda > 0.0 {
        return simulate_volterra(k, m, horizon, n_steps, n_paths, seed, false);
    }
    let grid = check_sizes(horizon, n_steps, n_paths)?;
    let n = n_steps;
    let times = grid.times();
    let mean: Vec<f64> = times
        .iter()
        .map(|&t| m.v0 + m.beta * k.integral1(t))
        .collect();

    let mut cov = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        let ta = times[a + 1];
        cov[(a, a)] = m.alpha0 * k.square_integral(ta);
        for b in a + 1..n {
            let c = m.alpha0 * cross_covariance(k, ta, times[b + 1] - ta);
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    let chol = if m.alpha0 > 0.0 {
        let Some(ch) = cov.cholesky() else {
            return Err(Error::Diagnostic(
                "grid covariance of the Volterra OU process is not positive definite".into(),
            ));
        };
        Some(ch.l())
    } else {
        None
    };

    let cfg = SimConfig::default();
    let dt = grid.dt();
    let outs: Vec<PathOut> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut v = mean.clone();
            if let Some(l) = &chol {
                let mut rng = path_rng(seed, path);
                let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                for a in 0..n {
                    let row = l.row(a);
                    v[a + 1] += (0..=a).map(|b| row[b] * z[b]).sum::<f64>();
                }
            }
            let v_int = v.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dt).sum();
            PathOut {
                v_end: v[n],
                l_end: m.l0,
                v_int,
                v,
                l: Vec::new(),
                truncated: 0,
            }
        })
        .collect();
    Ok(collect(outs, grid, seed, Scheme::OuExact, m.l0, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_and_se;

    fn sample_var(xs: &[f64]) -> (f64, f64) {
        // variance and its standard error from the fourth central moment
        let (mu, _) = mean_and_se(xs);
        let sq: Vec<f64> = xs.iter().map(|x| (x - mu).powi(2)).collect();
        mean_and_se(&sq)
    }

    #[test]
    fn cross_covariance_matches_brute_force() {
        let k = KernelSpec::rough(0.6).unwrap();
        let (s, d) = (0.3, 0.05);
        let got = cross_covariance(&k, s, d);
        // midpoint rule on a graded mesh tau = s x^4
        let n = 200_000;
        let mut want = 0.0;
        for i in 0..n {
            let x0 = i as f64 / n as f64;
            let x1 = (i + 1) as f64 / n as f64;
            let (t0, t1) = (s * x0.powi(4), s * x1.powi(4));
            let t = 0.5 * (t0 + t1);
            want += k.eval(t).unwrap() * k.eval(d + t).unwrap() * (t1 - t0);
        }
        assert!((got - want).abs() < 1e-4 * want, "{got} {want}");
    }

    #[test]
    fn power_law_variance() {
        let m = ModelParams::ou(0.0, 0.0, 1.0, 0.0).unwrap();
        let k = KernelSpec::rough(0.6).unwrap();
        let p = simulate_volterra_ou(&k, &m, 1.0, 50, 40_000, 8).unwrap();
        let g = recip_gamma(0.6);
        for j in [10, 50] {
            let t = j as f64 / 50.0;
            let xs: Vec<f64> = (0..p.n_paths).map(|i| p.v_path(i).unwrap()[j]).collect();
            let (var, se) = sample_var(&xs);
            let want = t.powf(0.2) / 0.2 * g * g;
            assert!((var - want).abs() < 3.0 * se, "{t}: {var} {want} {se}");
        }
    }

    #[test]
    fn constant_kernel_is_brownian_with_drift() {
        let m = ModelParams::ou(0.5, 0.0, 2.0, 1.0).unwrap();
        let p = simulate_volterra_ou(&KernelSpec::constant(1.0), &m, 1.0, 20, 40_000, 2).unwrap();
        let (mean, se) = mean_and_se(&p.v_terminal);
        assert!((mean - 1.5).abs() < 3.0 * se);
        let (var, se) = sample_var(&p.v_terminal);
        assert!((var - 2.0).abs() < 3.0 * se, "{var} {se}");
        assert_eq!(p.scheme, Scheme::OuExact);
    }

    #[test]
    fn zero_noise_is_the_mean_path() {
        let m = ModelParams::ou(0.3, 0.0, 0.0, 0.1).unwrap();
        let k = KernelSpec::rough(0.7).unwrap();
        let p = simulate_volterra_ou(&k, &m, 1.0, 10, 4, 2).unwrap();
        let path = p.v_path(3).unwrap();
        for (j, v) in path.iter().enumerate() {
            assert_eq!(*v, 0.1 + 0.3 * k.integral1(p.grid.t(j)));
        }
    }

    #[test]
    fn mean_reversion_delegates_and_a_is_rejected() {
        let m = ModelParams::ou(0.1, 1.0, 0.5, 0.0).unwrap();
        let p = simulate_volterra_ou(&KernelSpec::constant(1.0), &m, 1.0, 10, 10, 1).unwrap();
        assert_eq!(p.scheme, Scheme::VolterraEuler);
        let sq = ModelParams::heston(1.0, 0.04, 0.3, 0.0, 0.04).unwrap();
        assert!(simulate_volterra_ou(&KernelSpec::constant(1.0), &sq, 1.0, 10, 10, 1).is_err());
    }
}
