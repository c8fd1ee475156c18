//! Product-integration weights for `int_0^{t_j} K(t_j - s) f(s) ds` on a
//! uniform grid, exact for piecewise-linear `f` (hat weights) or
//! piecewise-constant `f` (cell weights).

use crate::grid::GridValue;
use crate::special::recip_gamma;

use super::Atom;

/// Weights of a kernel on a uniform grid with step `dt`, for nodes `0..=n`.
///
/// With `K1 = int_0^t K` and `K2 = int_0^t K1`:
///
/// * `hat[0] = K2(dt)/dt`, `hat[m] = (K2((m+1)dt) - 2 K2(m dt) + K2((m-1)dt))/dt`
/// * `end[j] = K1(j dt) - (K2(j dt) - K2((j-1)dt))/dt` (weight of `f_0` at node `j`)
/// * `cell[m] = K1((m+1)dt) - K1(m dt)`
#[derive(Debug, Clone, PartialEq)]
pub struct ProductWeights {
    pub dt: f64,
    pub hat: Vec<f64>,
    pub end: Vec<f64>,
    pub cell: Vec<f64>,
}

impl ProductWeights {
    /// Generic weights from the two antiderivatives. Loses accuracy to
    /// cancellation for large `m`; the kernel-specific constructors avoid that.
    pub fn from_integrals(
        dt: f64,
        n: usize,
        k1: impl Fn(f64) -> f64,
        k2: impl Fn(f64) -> f64,
    ) -> Self {
        let t = |m: usize| m as f64 * dt;
        let i1: Vec<f64> = (0..=n + 1).map(|m| k1(t(m))).collect();
        let i2: Vec<f64> = (0..=n + 1).map(|m| k2(t(m))).collect();
        let mut hat = vec![0.0; n + 1];
        hat[0] = i2[1] / dt;
        for m in 1..=n {
            hat[m] = (i2[m + 1] - 2.0 * i2[m] + i2[m - 1]) / dt;
        }
        let mut end = vec![0.0; n + 1];
        for j in 1..=n {
            end[j] = i1[j] - (i2[j] - i2[j - 1]) / dt;
        }
        let cell = (0..=n).map(|m| i1[m + 1] - i1[m]).collect();
        Self { dt, hat, end, cell }
    }

    /// Weights from per-cell moments `(A_i, B_i)` with
    /// `A_i = int_{t_i}^{t_{i+1}} K` and `B_i = int_{t_i}^{t_{i+1}} K(s) (s - t_i)/dt ds`.
    /// Free of the cancellation in second differences of `K2`.
    pub fn from_moments(dt: f64, n: usize, moments: impl Fn(usize) -> (f64, f64)) -> Self {
        let m: Vec<(f64, f64)> = (0..=n).map(moments).collect();
        let mut hat = vec![0.0; n + 1];
        hat[0] = m[0].0 - m[0].1;
        for k in 1..=n {
            hat[k] = m[k - 1].1 + m[k].0 - m[k].1;
        }
        let mut end = vec![0.0; n + 1];
        for j in 1..=n {
            end[j] = m[j - 1].1;
        }
        let cell = m.iter().map(|p| p.0).collect();
        Self { dt, hat, end, cell }
    }

    pub fn len(&self) -> usize {
        self.hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hat.is_empty()
    }

    /// Contribution of `f_0 .. f_{j-1}` to the convolution at node `j`.
    #[inline]
    pub fn history<T: GridValue>(&self, j: usize, f: &[T]) -> T {
        if j == 0 {
            return T::default();
        }
        let mut acc = f[0] * self.end[j];
        for i in 1..j {
            acc += f[i] * self.hat[j - i];
        }
        acc
    }

    /// Full convolution `(K * f)(t_j)` for piecewise-linear `f`.
    #[inline]
    pub fn convolve_at<T: GridValue>(&self, j: usize, f: &[T]) -> T {
        if j == 0 {
            return T::default();
        }
        self.history(j, f) + f[j] * self.hat[0]
    }

    /// `(K * f)` at every node.
    pub fn convolve<T: GridValue>(&self, f: &[T]) -> Vec<T> {
        (0..f.len()).map(|j| self.convolve_at(j, f)).collect()
    }

    /// Rectangle-rule convolution treating `f` as constant on each cell,
    /// using the left-end value: `sum_{i<j} cell[j-1-i] f_i`.
    #[inline]
    pub fn convolve_left<T: GridValue>(&self, j: usize, f: &[T]) -> T {
        let mut acc = T::default();
        for i in 0..j {
            acc += f[i] * self.cell[j - 1 - i];
        }
        acc
    }
}

/// Anything that can supply product-integration weights.
pub trait ConvKernel: Sync {
    /// `int_0^t K(s) ds`.
    fn integral1(&self, t: f64) -> f64;
    /// `int_0^t int_0^s K(r) dr ds`.
    fn integral2(&self, t: f64) -> f64;

    fn weights(&self, dt: f64, n: usize) -> ProductWeights {
        ProductWeights::from_integrals(dt, n, |t| self.integral1(t), |t| self.integral2(t))
    }
}

/// A bounded kernel known only through samples `values[j] = K(j dt)`,
/// interpolated linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TabulatedKernel {
    fn locate(&self, t: f64) -> (usize, f64) {
        let x = (t / self.dt).max(0.0);
        let last = self.values.len() - 2;
        let i = (x.floor() as usize).min(last);
        (i, t - i as f64 * self.dt)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        let f = s / self.dt;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// `int_0^{t_i}` of the interpolant, for every node.
    fn node_integrals(&self) -> Vec<f64> {
        crate::grid::cumulative_trapezoid(self.dt, &self.values)
    }
}

impl ConvKernel for TabulatedKernel {
    fn integral1(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        let slope = (self.values[i + 1] - self.values[i]) / self.dt;
        self.node_integrals()[i] + self.values[i] * s + 0.5 * slope * s * s
    }

    fn integral2(&self, t: f64) -> f64 {
        let c1 = self.node_integrals();
        let (i, s) = self.locate(t);
        let dt = self.dt;
        let mut acc = 0.0;
        for k in 0..i {
            acc += dt * c1[k] + dt * dt * (self.values[k] / 3.0 + self.values[k + 1] / 6.0);
        }
        let slope = (self.values[i + 1] - self.values[i]) / dt;
        acc + c1[i] * s + self.values[i] * s * s / 2.0 + slope * s * s * s / 6.0
    }

    fn weights(&self, dt: f64, n: usize) -> ProductWeights {
        if (dt - self.dt).abs() <= 1e-14 * dt && n < self.values.len() - 1 {
            let v = &self.values;
            // exact moments of the piecewise-linear interpolant
            ProductWeights::from_moments(dt, n, |i| {
                (
                    dt * (v[i] + v[i + 1]) / 2.0,
                    dt * (v[i] / 6.0 + v[i + 1] / 3.0),
                )
            })
        } else {
            ProductWeights::from_integrals(dt, n, |t| self.integral1(t), |t| self.integral2(t))
        }
    }
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.9602898564975362, 0.10122853629037669),
    (-0.7966664774136267, 0.22238103445337434),
    (-0.525532409916329, 0.31370664587788705),
    (-0.18343464249564978, 0.36268378337836177),
    (0.18343464249564978, 0.36268378337836177),
    (0.525532409916329, 0.31370664587788705),
    (0.7966664774136267, 0.22238103445337434),
    (0.9602898564975362, 0.10122853629037669),
];

/// `(int_a^b f, int_a^b f(s) (s-a)/(b-a) ds)` by 8-point Gauss-Legendre.
pub(crate) fn gauss_moments(f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut m0 = 0.0;
    let mut m1 = 0.0;
    for &(x, w) in &GAUSS8 {
        let v = w * f(mid + half * x);
        m0 += v;
        m1 += v * 0.5 * (1.0 + x);
    }
    (half * m0, half * m1)
}

/// Generalised binomial coefficients `C(p, k)` for `k = 0..count`.
fn binomials(p: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 1.0;
    for k in 0..count {
        out.push(c);
        c *= (p - k as f64) / (k as f64 + 1.0);
    }
    out
}

/// `sum_{k >= k0, step} C(p,k) x^k` for `|x| <= 1/2`, summed until negligible.
fn binomial_tail(coef: &[f64], x: f64, k0: usize, step: usize) -> f64 {
    let mut sum = 0.0;
    let mut k = k0;
    let mut xk = x.powi(k0 as i32);
    let xs = x.powi(step as i32);
    while k < coef.len() {
        let term = coef[k] * xk;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        k += step;
        xk *= xs;
    }
    sum
}

pub(crate) fn power_law_weights(alpha: f64, scale: f64, dt: f64, n: usize) -> ProductWeights {
    let p = alpha + 1.0;
    let c2 = scale * dt.powf(alpha) * recip_gamma(alpha + 2.0);
    let c1 = scale * dt.powf(alpha) * recip_gamma(alpha + 1.0);
    let bp = binomials(p, 128);
    let ba = binomials(alpha, 128);

    let mut hat = vec![0.0; n + 1];
    hat[0] = c2;
    if n >= 1 {
        hat[1] = c2 * (2f64.powf(p) - 2.0);
    }
    for (m, h) in hat.iter_mut().enumerate().skip(2) {
        // (m+1)^p - 2 m^p + (m-1)^p = 2 m^p sum_k C(p, 2k) m^{-2k}
        let mf = m as f64;
        *h = c2 * 2.0 * mf.powf(p) * binomial_tail(&bp, 1.0 / mf, 2, 2);
    }

    let mut end = vec![0.0; n + 1];
    if n >= 1 {
        end[1] = c2 * alpha;
    }
    for (j, e) in end.iter_mut().enumerate().skip(2) {
        // (alpha+1) j^alpha - j^p + (j-1)^p = j^p sum_{k>=2} C(p,k) (-1/j)^k
        let jf = j as f64;
        *e = c2 * jf.powf(p) * binomial_tail(&bp, -1.0 / jf, 2, 1);
    }

    let mut cell = vec![0.0; n + 1];
    cell[0] = c1;
    if n >= 1 {
        cell[1] = c1 * (2f64.powf(alpha) - 1.0);
    }
    for (m, c) in cell.iter_mut().enumerate().skip(2) {
        let mf = m as f64;
        *c = c1 * mf.powf(alpha) * binomial_tail(&ba, 1.0 / mf, 1, 1);
    }
    ProductWeights { dt, hat, end, cell }
}

pub(crate) fn constant_weights(c: f64, dt: f64, n: usize) -> ProductWeights {
    let mut hat = vec![c * dt; n + 1];
    hat[0] = 0.5 * c * dt;
    let mut end = vec![0.5 * c * dt; n + 1];
    end[0] = 0.0;
    ProductWeights {
        dt,
        hat,
        end,
        cell: vec![c * dt; n + 1],
    }
}

/// `(1 - e^{-y})/y`.
pub(crate) fn phi1(y: f64) -> f64 {
    if y.abs() < 1e-8 {
        1.0 - 0.5 * y
    } else {
        -(-y).exp_m1() / y
    }
}

/// `(y - 1 + e^{-y})/y^2`.
pub(crate) fn g0(y: f64) -> f64 {
    if y.abs() < 0.5 {
        // sum_k (-y)^k / (k+2)!
        let mut term = 0.5;
        let mut sum = 0.5;
        for k in 1..30 {
            term *= -y / (k as f64 + 2.0);
            sum += term;
        }
        sum
    } else {
        (y + (-y).exp_m1()) / (y * y)
    }
}

/// `(1 - (1+y) e^{-y})/y^2`.
pub(crate) fn g1(y: f64) -> f64 {
    if y.abs() < 0.5 {
        // sum_k (-1)^k (k+1) y^k / (k+2)!
        let mut f = 0.5; // y^k/(k+2)! with sign
        let mut sum = 0.5;
        for k in 1..30 {
            f *= -y / (k as f64 + 2.0);
            sum += (k as f64 + 1.0) * f;
        }
        sum
    } else {
        (-(-y).exp_m1() - y * (-y).exp()) / (y * y)
    }
}

pub(crate) fn exp_sum_weights(atoms: &[Atom], dt: f64, n: usize) -> ProductWeights {
    let mut hat = vec![0.0; n + 1];
    let mut end = vec![0.0; n + 1];
    let mut cell = vec![0.0; n + 1];
    for a in atoms {
        let y = a.rate * dt;
        let wd = a.weight * dt;
        let decay = (-y).exp();
        // (sinh(y/2)/(y/2))^2 e^{-y m} = e^{-y(m-1)} ((1-e^{-y})/y)^2
        let p1 = phi1(y);
        let h_mid = wd * p1 * p1;
        hat[0] += wd * g0(y);
        let e1 = wd * g1(y);
        let mut pw = 1.0; // e^{-y (m-1)}
        for m in 1..=n {
            hat[m] += h_mid * pw;
            end[m] += e1 * pw;
            cell[m - 1] += wd * p1 * pw;
            pw *= decay;
            if pw == 0.0 {
                break;
            }
        }
        cell[n] += wd * p1 * pw;
    }
    ProductWeights { dt, hat, end, cell }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (i, (x, y)) in a.iter().zip(b).enumerate() {
            assert!(
                (x - y).abs() <= tol * y.abs().max(1e-300),
                "index {i}: {x} vs {y}"
            );
        }
    }

    #[test]
    fn power_law_series_match_direct_differences_for_small_m() {
        // direct second differences are accurate for modest m
        let k = KernelSpec::rough(0.6).unwrap();
        let dt = 0.01;
        let w = k.weights(dt, 40);
        let d = ProductWeights::from_integrals(dt, 40, |t| k.integral1(t), |t| k.integral2(t));
        close(&w.hat, &d.hat, 1e-9);
        close(&w.end[1..], &d.end[1..], 1e-9);
        close(&w.cell, &d.cell, 1e-11);
    }

    #[test]
    fn power_law_weight_sums_integrate_constants() {
        // sum of all weights at node j equals K1(t_j)
        let k = KernelSpec::rough(0.7).unwrap();
        let dt = 1e-3;
        let n = 5000;
        let w = k.weights(dt, n);
        for j in [1usize, 2, 17, 1000, 5000] {
            let ones = vec![1.0; j + 1];
            let got = w.convolve_at(j, &ones);
            let want = k.integral1(j as f64 * dt);
            assert!(
                (got - want).abs() < 1e-12 * want.max(1.0),
                "j={j}: {got} vs {want}"
            );
            let cells: f64 = w.cell[..j].iter().sum();
            assert!((cells - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hat_weights_are_exact_for_linear_functions() {
        // K * s = K2(t) for the identity function
        let k = KernelSpec::rough(0.6).unwrap();
        let dt = 0.002;
        let w = k.weights(dt, 500);
        let f: Vec<f64> = (0..=500).map(|j| j as f64 * dt).collect();
        for j in [1usize, 3, 250, 500] {
            let got = w.convolve_at(j, &f);
            let want = k.integral2(j as f64 * dt);
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn exp_sum_weights_match_generic() {
        let k = KernelSpec::exp_sum(vec![
            Atom::new(1.0, 0.0),
            Atom::new(0.4, 0.3),
            Atom::new(2.0, 50.0),
            Atom::new(-0.1, 3000.0),
        ])
        .unwrap();
        let dt = 0.01;
        let w = k.weights(dt, 60);
        let d = ProductWeights::from_integrals(dt, 60, |t| k.integral1(t), |t| k.integral2(t));
        for m in 0..=60 {
            assert!((w.hat[m] - d.hat[m]).abs() < 1e-12, "hat {m}");
            assert!((w.end[m] - d.end[m]).abs() < 1e-12, "end {m}");
            assert!((w.cell[m] - d.cell[m]).abs() < 1e-12, "cell {m}");
        }
    }

    #[test]
    fn tabulated_kernel_matches_its_source() {
        let k = KernelSpec::exp_sum(vec![Atom::new(1.0, 0.5), Atom::new(0.5, 4.0)]).unwrap();
        let dt = 1e-3;
        let tab = TabulatedKernel {
            dt,
            values: (0..=1000).map(|j| k.value(j as f64 * dt)).collect(),
        };
        for t in [0.0, 0.1234, 0.5, 0.999] {
            assert!((tab.eval(t) - k.value(t)).abs() < 1e-6);
            assert!((tab.integral1(t) - k.integral1(t)).abs() < 2e-6);
            assert!((tab.integral2(t) - k.integral2(t)).abs() < 2e-6);
        }
        let a = tab.weights(dt, 999);
        let b = k.weights(dt, 999);
        for m in [0usize, 1, 10, 500, 999] {
            assert!((a.hat[m] - b.hat[m]).abs() < 1e-9);
            assert!((a.cell[m] - b.cell[m]).abs() < 1e-9);
        }
    }

    #[test]
    fn moment_weights_match_closed_form() {
        let k = KernelSpec::rough(0.6).unwrap();
        let dt = 1e-3;
        let n = 300;
        let w = k.weights(dt, n);
        let g = ProductWeights::from_moments(dt, n, |i| {
            if i == 0 {
                (k.integral1(dt), k.integral1(dt) - k.integral2(dt) / dt)
            } else {
                gauss_moments(|t| k.value(t), i as f64 * dt, (i + 1) as f64 * dt)
            }
        });
        for m in 0..=n {
            assert!((w.hat[m] - g.hat[m]).abs() < 1e-9 * w.hat[m], "hat {m}");
            assert!((w.cell[m] - g.cell[m]).abs() < 1e-9 * w.cell[m], "cell {m}");
        }
        for j in 1..=n {
            assert!((w.end[j] - g.end[j]).abs() < 1e-9 * w.end[j], "end {j}");
        }
    }

    #[test]
    fn constant_weights_are_trapezoid() {
        let w = constant_weights(2.0, 0.1, 4);
        let f = [1.0, 2.0, 3.0, 4.0, 5.0];
        // 2 * trapezoid of f on [0, 0.4] = 2 * 1.2
        assert!((w.convolve_at(4, &f) - 2.4).abs() < 1e-14);
    }

    #[test]
    fn small_argument_helpers_are_continuous() {
        for &y in &[0.4999999, 0.5000001] {
            let a = g0(y);
            let b = (y + (-y).exp_m1()) / (y * y);
            assert!((a - b).abs() < 1e-14);
            let a = g1(y);
            let b = (-(-y).exp_m1() - y * (-y).exp()) / (y * y);
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(g0(0.0), 0.5);
        assert_eq!(g1(0.0), 0.5);
        assert_eq!(phi1(0.0), 1.0);
    }
}
