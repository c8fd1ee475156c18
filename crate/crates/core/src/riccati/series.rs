//! Short-time expansion of the kernel-form Riccati equation for the
//! power-law kernel, in powers `t^{i alpha + j}`.
//!
//! The truncated Picard fixed point `S` of `y = v K + K * F(y)` carries the
//! singular and non-smooth part of the solution; the solver then only has to
//! integrate the smooth remainder `psi - S`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::special::ln_gamma;

use super::Drive;

/// Terms of order at least this are left to the grid solver.
const ORDER_CUTOFF: f64 = 1.6;
const MAX_PICARD: usize = 1000;

type Terms = BTreeMap<(i32, i32), Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PowerSeries {
    alpha: f64,
    /// `(exponent, coefficient)` of the truncated solution `S`.
    pub terms: Vec<(f64, Complex64)>,
    /// Terms of `F(S)`, all with exponent `> -1`.
    pub drive_terms: Vec<(f64, Complex64)>,
    /// Terms of `v K + K * F(S) - S`, all of order `>= ORDER_CUTOFF`.
    pub defect_terms: Vec<(f64, Complex64)>,
    scale: f64,
}

fn mul(a: &Terms, b: &Terms) -> Terms {
    let mut out = Terms::new();
    for (ka, xa) in a {
        for (kb, xb) in b {
            *out.entry((ka.0 + kb.0, ka.1 + kb.1)).or_default() += xa * xb;
        }
    }
    out
}

fn flatten(alpha: f64, t: &Terms) -> Vec<(f64, Complex64)> {
    t.iter()
        .filter(|(_, x)| x.norm() > 0.0)
        .map(|(k, x)| (k.0 as f64 * alpha + k.1 as f64, *x))
        .collect()
}

fn eval_terms(terms: &[(f64, Complex64)], t: f64) -> Complex64 {
    terms.iter().map(|(p, x)| x * t.powf(*p)).sum()
}

impl PowerSeries {
    /// Expansion for `K(t) = scale t^{alpha-1}/Gamma(alpha)`, `alpha < 1`.
    pub fn new(alpha: f64, scale: f64, v: Complex64, drive: &Drive) -> Self {
        let order = |k: &(i32, i32)| k.0 as f64 * alpha + k.1 as f64;
        // K * t^p = scale Gamma(p+1)/Gamma(p+1+alpha) t^{p+alpha}
        let integrate = |f: &Terms| -> Terms {
            f.iter()
                .map(|(k, x)| {
                    let p = order(k);
                    let c = scale * (ln_gamma(p + 1.0) - ln_gamma(p + 1.0 + alpha)).exp();
                    ((k.0 + 1, k.1), x * c)
                })
                .collect()
        };
        let mut vk = Terms::new();
        if v != Complex64::default() {
            vk.insert((1, -1), v * scale * (-ln_gamma(alpha)).exp());
        }
        let drive_of = |s: &Terms| -> Terms {
            let mut f = Terms::new();
            f.insert((0, 0), drive.c0);
            for (k, x) in s {
                *f.entry(*k).or_default() += drive.l * x;
            }
            for (k, x) in mul(s, s) {
                *f.entry(k).or_default() += drive.q * x;
            }
            f
        };
        let image = |s: &Terms| -> Terms {
            let mut out = vk.clone();
            for (k, x) in integrate(&drive_of(s)) {
                *out.entry(k).or_default() += x;
            }
            out
        };

        let mut s = vk.clone();
        for _ in 0..MAX_PICARD {
            let next: Terms = image(&s)
                .into_iter()
                .filter(|(k, _)| order(k) < ORDER_CUTOFF - 1e-12)
                .collect();
            let same = next.len() == s.len()
                && next
                    .iter()
                    .zip(&s)
                    .all(|((ka, xa), (kb, xb))| ka == kb && (xa - xb).norm() <= 1e-15 * xb.norm());
            s = next;
            if same {
                break;
            }
        }
        let full = image(&s);
        let defect: Terms = full
            .into_iter()
            .filter(|(k, _)| order(k) >= ORDER_CUTOFF - 1e-12)
            .collect();
        Self {
            alpha,
            terms: flatten(alpha, &s),
            drive_terms: flatten(alpha, &drive_of(&s)),
            defect_terms: flatten(alpha, &defect),
            scale,
        }
    }

    /// `S(t)`, `t > 0`.
    pub fn eval(&self, t: f64) -> Complex64 {
        eval_terms(&self.terms, t)
    }

    pub fn defect(&self, t: f64) -> Complex64 {
        if t == 0.0 {
            return Complex64::default();
        }
        eval_terms(&self.defect_terms, t)
    }

    /// `int_0^t S`.
    pub fn integral(&self, t: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|(p, x)| x * t.powf(p + 1.0) / (p + 1.0))
            .sum()
    }

    /// `int_0^t F(S)`.
    pub fn drive_integral(&self, t: f64) -> Complex64 {
        self.drive_terms
            .iter()
            .map(|(p, x)| x * t.powf(p + 1.0) / (p + 1.0))
            .sum()
    }

    /// `int_0^t S^2`.
    pub fn square_integral(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::default();
        for (p, x) in &self.terms {
            for (r, y) in &self.terms {
                let e = p + r + 1.0;
                acc += x * y * t.powf(e) / e;
            }
        }
        acc
    }

    /// `(K * F(S))(t)` in closed form.
    pub fn kernel_drive(&self, t: f64) -> Complex64 {
        if t == 0.0 {
            return Complex64::default();
        }
        self.drive_terms
            .iter()
            .map(|(p, x)| {
                let c = self.scale * (ln_gamma(p + 1.0) - ln_gamma(p + 1.0 + self.alpha)).exp();
                x * c * t.powf(p + self.alpha)
            })
            .sum()
    }

    /// Whether `S` is unbounded at 0.
    pub fn is_singular(&self) -> bool {
        self.terms.iter().any(|(p, _)| *p < 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riccati::{ExponentTriple, ModelParams};

    fn drive(u: Complex64) -> Drive {
        let m = ModelParams::heston(2.0, 0.04, 0.3, -0.7, 0.04).unwrap();
        Drive::new(&m, &ExponentTriple::price(u))
    }

    #[test]
    fn regular_expansion_has_expected_orders() {
        let s = PowerSeries::new(
            0.6,
            1.0,
            Complex64::default(),
            &drive(Complex64::new(0.0, 2.0)),
        );
        let orders: Vec<f64> = s.terms.iter().map(|t| t.0).collect();
        assert_eq!(orders.len(), 2);
        assert!((orders[0] - 0.6).abs() < 1e-12 && (orders[1] - 1.2).abs() < 1e-12);
        assert!(!s.is_singular());
        // leading coefficient c0 / Gamma(1 + alpha)
        let c0 = Complex64::new(-2.0, -1.0);
        let g = (ln_gamma(1.6)).exp();
        assert!((s.terms[0].1 - c0 / g).norm() < 1e-14);
    }

    #[test]
    fn singular_expansion_starts_with_kernel() {
        let v = Complex64::new(-1.0, 0.0);
        let s = PowerSeries::new(0.6, 1.0, v, &drive(Complex64::default()));
        assert!(s.is_singular());
        let t: f64 = 1e-6;
        let k = t.powf(-0.4) / (ln_gamma(0.6)).exp();
        assert!(((s.eval(t) - v * k) / k).norm() < 0.1);
        assert!(s
            .defect_terms
            .iter()
            .all(|(p, _)| *p >= ORDER_CUTOFF - 1e-12));
    }

    #[test]
    fn integrals_match_quadrature() {
        let s = PowerSeries::new(
            0.7,
            1.0,
            Complex64::new(0.0, 0.0),
            &drive(Complex64::new(0.5, 1.0)),
        );
        let n = 20000;
        let h = 1.0 / n as f64;
        let mut acc = Complex64::default();
        for j in 0..n {
            acc += s.eval((j as f64 + 0.5) * h) * h;
        }
        assert!((acc - s.integral(1.0)).norm() < 1e-6);
    }
}
