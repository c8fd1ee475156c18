//! European options by Fourier inversion along `Re u = 1/2` (Lewis), with a
//! Black-Scholes control variate matched to the total forward variance.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::riccati::{solve_riccati_volterra, ExponentTriple, ModelParams};

use super::{forward_curve, log_transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

/// Trapezoid rule on `y in [0, truncation]` with spacing `step`.
///
/// Nodes are evaluated in blocks; once a whole block of integrand values is
/// below `cutoff` the remaining nodes are skipped. If the integrand is still
/// above `tail_tol` at the truncation point the price is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionGrid {
    pub truncation: f64,
    pub step: f64,
    pub cutoff: f64,
    pub tail_tol: f64,
}

impl Default for InversionGrid {
    fn default() -> Self {
        Self {
            truncation: 200.0,
            step: 0.25,
            cutoff: 1e-15,
            tail_tol: 1e-8,
        }
    }
}

const BLOCK: usize = 16;

fn norm_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Undiscounted Black-Scholes price with zero rates.
pub fn black_scholes(s0: f64, strike: f64, horizon: f64, vol: f64, kind: OptionKind) -> f64 {
    let sd = vol * horizon.sqrt();
    let call = if sd <= 0.0 {
        (s0 - strike).max(0.0)
    } else {
        let d1 = ((s0 / strike).ln() + 0.5 * sd * sd) / sd;
        s0 * norm_cdf(d1) - strike * norm_cdf(d1 - sd)
    };
    match kind {
        OptionKind::Call => call,
        OptionKind::Put => call - s0 + strike,
    }
}

/// Characteristic-function samples on the inversion contour for one
/// maturity; every strike reuses them.
#[derive(Debug, Clone)]
pub struct FourierPricer {
    pub s0: f64,
    pub horizon: f64,
    /// Volatility of the control variate, `sqrt(int_0^T xi0 / T)`.
    pub cv_vol: f64,
    /// `(y, E[exp((1/2 + i y)(L_T - L0))])`.
    pub nodes: Vec<(f64, Complex64)>,
    pub grid: InversionGrid,
}

impl FourierPricer {
    pub fn new(
        k: &KernelSpec,
        m: &ModelParams,
        horizon: f64,
        n: usize,
        grid: InversionGrid,
    ) -> Result<Self> {
        m.check_heston_leg()?;
        if !(grid.step > 0.0) || !(grid.truncation > grid.step) {
            return Err(Error::arg("inversion grid needs 0 < step < truncation"));
        }
        let fc = forward_curve(k, m, horizon, n)?;
        let cv_vol = (fc.integrated() / horizon).max(0.0).sqrt();
        let shifted = ModelParams { l0: 0.0, ..*m };
        let count = (grid.truncation / grid.step).round() as usize + 1;
        let mut nodes = Vec::with_capacity(count);
        let mut quiet = false;
        let mut start = 0;
        while start < count && !quiet {
            let end = (start + BLOCK).min(count);
            let block: Vec<Result<(f64, Complex64)>> = (start..end)
                .into_par_iter()
                .map(|i| {
                    let y = i as f64 * grid.step;
                    let e = ExponentTriple::price(Complex64::new(0.5, y));
                    let sol = solve_riccati_volterra(k, &shifted, &e, horizon, n)?;
                    Ok((y, log_transform(&sol).exp()))
                })
                .collect();
            let block = block.into_iter().collect::<Result<Vec<_>>>()?;
            quiet = block.iter().all(|&(y, v)| {
                let bs = bs_cf(cv_vol, horizon, y);
                (v - bs).norm() / (y * y + 0.25) < grid.cutoff
            });
            nodes.extend(block);
            start = end;
        }
        if !quiet {
            let &(y, v) = nodes.last().expect("at least one node");
            let tail = (v - bs_cf(cv_vol, horizon, y)).norm() / (y * y + 0.25);
            if tail > grid.tail_tol {
                return Err(Error::Diagnostic(format!(
                    "Fourier integrand still {tail:e} at the truncation point y = {y}"
                )));
            }
        }
        Ok(Self {
            s0: m.l0.exp(),
            horizon,
            cv_vol,
            nodes,
            grid,
        })
    }

    pub fn price(&self, strike: f64, kind: OptionKind) -> Result<f64> {
        if !(strike > 0.0) || !strike.is_finite() {
            return Err(Error::domain("strike must be positive", strike));
        }
        let kappa = (self.s0 / strike).ln();
        let mut acc = 0.0;
        for (i, &(y, v)) in self.nodes.iter().enumerate() {
            let w = if i == 0 { 0.5 } else { 1.0 };
            let diff = bs_cf(self.cv_vol, self.horizon, y) - v;
            acc += w * (Complex64::new(0.0, y * kappa).exp() * diff).re / (y * y + 0.25);
        }
        let correction = (self.s0 * strike).sqrt() / PI * acc * self.grid.step;
        let call = black_scholes(self.s0, strike, self.horizon, self.cv_vol, OptionKind::Call)
            + correction;
        Ok(match kind {
            OptionKind::Call => call,
            OptionKind::Put => call - self.s0 + strike,
        })
    }
}

/// `E[exp(u X)]` for Black-Scholes log-returns at `u = 1/2 + i y`.
fn bs_cf(vol: f64, horizon: f64, y: f64) -> Complex64 {
    let u = Complex64::new(0.5, y);
    (0.5 * vol * vol * horizon * (u * u - u)).exp()
}

/// Undiscounted European price of one strike.
pub fn price_european(
    k: &KernelSpec,
    m: &ModelParams,
    strike: f64,
    horizon: f64,
    kind: OptionKind,
    grid: InversionGrid,
    n: usize,
) -> Result<f64> {
    FourierPricer::new(k, m, horizon, n, grid)?.price(strike, kind)
}

/// Black-Scholes implied volatility of an undiscounted call price.
pub fn implied_vol(price: f64, s0: f64, strike: f64, horizon: f64) -> Result<f64> {
    if !(s0 > 0.0 && strike > 0.0 && horizon > 0.0) {
        return Err(Error::arg(
            "implied_vol needs positive spot, strike and horizon",
        ));
    }
    let lower = (s0 - strike).max(0.0);
    if !(price >= lower - 1e-14 && price < s0) {
        return Err(Error::domain(
            format!("call price outside the no-arbitrage bounds [{lower}, {s0})"),
            price,
        ));
    }
    if price <= lower + 1e-14 * s0 {
        return Ok(0.0);
    }
    let f = |v: f64| black_scholes(s0, strike, horizon, v, OptionKind::Call) - price;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Diagnostic("implied volatility above 1000".into()));
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx.abs() < 1e-15 {
            break;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        // Newton with vega, falling back to bisection outside the bracket
        let sd = x * horizon.sqrt();
        let d1 = ((s0 / strike).ln() + 0.5 * sd * sd) / sd;
        let vega = s0 * horizon.sqrt() * (-0.5 * d1 * d1).exp() / (2.0 * PI).sqrt();
        let newton = x - fx / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() < 1e-14 * x.max(1e-3) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::testing::heston_cf;

    fn desk() -> ModelParams {
        ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap()
    }

    fn oracle_price(m: &ModelParams, strike: f64, grid: InversionGrid) -> f64 {
        // same Lewis quadrature, closed-form characteristic function, no control variate
        let kappa = (1.0 / strike).ln();
        let count = (grid.truncation / grid.step).round() as usize + 1;
        let mut acc = 0.0;
        for i in 0..count {
            let y = i as f64 * grid.step;
            let w = if i == 0 || i == count - 1 { 0.5 } else { 1.0 };
            let v = heston_cf(m, Complex64::new(0.5, y), 1.0);
            acc += w * (Complex64::new(0.0, y * kappa).exp() * v).re / (y * y + 0.25);
        }
        1.0 - strike.sqrt() / PI * acc * grid.step
    }

    #[test]
    fn zero_variance_gives_intrinsic_value() {
        let m = ModelParams::heston(2.0, 0.0, 0.3, -0.7, 0.0).unwrap();
        let p = FourierPricer::new(
            &KernelSpec::rough(0.6).unwrap(),
            &m,
            1.0,
            200,
            InversionGrid::default(),
        )
        .unwrap();
        assert_eq!(p.price(0.8, OptionKind::Call).unwrap(), 1.0f64 - 0.8);
        assert_eq!(p.price(1.2, OptionKind::Call).unwrap(), 0.0);
    }

    #[test]
    fn parity() {
        let p = FourierPricer::new(
            &KernelSpec::rough(0.6).unwrap(),
            &desk(),
            1.0,
            400,
            InversionGrid::default(),
        )
        .unwrap();
        for k in [0.8, 1.0, 1.2] {
            let c = p.price(k, OptionKind::Call).unwrap();
            let q = p.price(k, OptionKind::Put).unwrap();
            assert!((c - q - (1.0 - k)).abs() < 1e-10);
        }
    }

    #[test]
    fn classical_price_matches_oracle() {
        let m = desk();
        let g = InversionGrid::default();
        let got = price_european(
            &KernelSpec::constant(1.0),
            &m,
            1.0,
            1.0,
            OptionKind::Call,
            g,
            2000,
        )
        .unwrap();
        let want = oracle_price(&m, 1.0, g);
        assert!((got - want).abs() < 1e-5, "{got} {want}");
    }

    #[test]
    fn implied_vol_round_trip_and_bounds() {
        let p = black_scholes(1.0, 1.0, 1.0, 0.2, OptionKind::Call);
        assert!((implied_vol(p, 1.0, 1.0, 1.0).unwrap() - 0.2).abs() < 1e-10);
        assert_eq!(implied_vol(0.2, 1.0, 0.8, 1.0).unwrap(), 0.0);
        assert!(implied_vol(1.5, 1.0, 1.0, 1.0).is_err());
        assert!(implied_vol(0.1, 1.0, 0.8, 1.0).is_err());
        let mut last = 0.0;
        for i in 1..20 {
            let price = 0.2 + 0.02 * i as f64;
            let v = implied_vol(price, 1.0, 0.8, 1.0).unwrap();
            assert!(v > last);
            last = v;
        }
    }
}
