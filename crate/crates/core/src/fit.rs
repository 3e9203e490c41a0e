//! Least-squares line fits used for convergence orders, slopes and decay exponents.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Shape(
            "fit abscissae and ordinates differ in length".into(),
        ));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Domain("a line fit needs at least two points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| (v - slope * u - intercept).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        points: n,
    })
}

/// Fit of `log y` against `log x`; non-positive samples are rejected.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// `⟨τ⟩ = (1 + τ²)^{1/2}`.
pub fn bracket(tau: f64) -> f64 {
    (1.0 + tau * tau).sqrt()
}

/// Decay exponent `p` in `value ≈ C⟨τ⟩^{-p}` over `[lo, hi]`. Samples below
/// `floor` are dropped since they sit in round-off; if every sample is below
/// it, the decay is reported as infinite.
pub fn decay_exponent(
    taus: &[f64],
    values: &[f64],
    lo: f64,
    hi: f64,
    floor: f64,
) -> Result<LinearFit> {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    let mut in_window = 0;
    for (t, v) in taus.iter().zip(values) {
        if *t >= lo && *t <= hi {
            in_window += 1;
            if *v > floor {
                x.push(bracket(*t));
                y.push(*v);
            }
        }
    }
    if in_window < 2 {
        return Err(Error::Domain(format!(
            "fewer than two samples in [{lo}, {hi}]"
        )));
    }
    if x.len() < 2 {
        return Ok(LinearFit {
            slope: f64::INFINITY,
            intercept: 0.0,
            r_squared: 1.0,
            points: x.len(),
        });
    }
    let mut f = loglog_fit(&x, &y)?;
    f.slope = -f.slope;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let x: Vec<f64> = (1..10).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v * v).collect();
        let f = loglog_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_exponent_of_bracket_power() {
        let t: Vec<f64> = (0..300).map(|k| k as f64 * 0.1).collect();
        let v: Vec<f64> = t.iter().map(|s| 0.5 * bracket(*s).powf(-2.5)).collect();
        let f = decay_exponent(&t, &v, 2.0, 25.0, 0.0).unwrap();
        assert!((f.slope - 2.5).abs() < 1e-12);
    }
}
