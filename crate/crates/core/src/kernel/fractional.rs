//! Riemann-Liouville fractional integral and derivative on a uniform grid.

use crate::error::{Error, Result};

use super::weights::power_law_weights;

fn check(alpha: f64, dt: f64, f: &[f64]) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::arg(format!(
            "fractional order must lie in (0, 1], got {alpha}"
        )));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain("grid step must be positive", dt));
    }
    if f.is_empty() {
        return Err(Error::arg("fractional operators need at least one sample"));
    }
    if let Some(i) = f.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index: i,
            detail: "input sample is not finite".into(),
        });
    }
    Ok(())
}

/// `I^alpha f(t_j) = int_0^{t_j} (t_j - s)^{alpha-1}/Gamma(alpha) f(s) ds`, with
/// `f` interpolated linearly between the samples `f[j] = f(j dt)`.
pub fn fractional_integral(alpha: f64, dt: f64, f: &[f64]) -> Result<Vec<f64>> {
    check(alpha, dt, f)?;
    let w = power_law_weights(alpha, 1.0, dt, f.len() - 1);
    Ok(w.convolve(f))
}

/// `D^alpha f = d/dt I^{1-alpha} f`, differentiated with second-order finite
/// differences (one-sided at the ends).
pub fn fractional_derivative(alpha: f64, dt: f64, f: &[f64]) -> Result<Vec<f64>> {
    check(alpha, dt, f)?;
    if f.len() < 3 {
        return Err(Error::arg(
            "fractional derivative needs at least three samples",
        ));
    }
    let g = if alpha == 1.0 {
        f.to_vec()
    } else {
        fractional_integral(1.0 - alpha, dt, f)?
    };
    let n = g.len() - 1;
    let mut d = vec![0.0; n + 1];
    d[0] = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * dt);
    d[n] = (3.0 * g[n] - 4.0 * g[n - 1] + g[n - 2]) / (2.0 * dt);
    for j in 1..n {
        d[j] = (g[j + 1] - g[j - 1]) / (2.0 * dt);
    }
    Ok(d)
}
