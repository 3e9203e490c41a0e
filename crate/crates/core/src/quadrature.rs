//! Gauss rules and orthonormal Hermite evaluation.
//!
//! Hermite functions are the normalised probabilists' polynomials
//! `h_n = He_n / sqrt(n!)`, orthogonal against `exp(-x^2/2)` with
//! `∫ h_m h_n exp(-x^2/2) dx = sqrt(2π) δ_mn`.

use nalgebra::{DMatrix, SymmetricEigen};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Values `h_0(x), …, h_{n_max}(x)` by the three-term recurrence.
pub fn hermite_values(x: f64, n_max: usize) -> Vec<f64> {
    let mut h = vec![0.0; n_max + 1];
    h[0] = 1.0;
    if n_max >= 1 {
        h[1] = x;
    }
    for n in 1..n_max {
        h[n + 1] = (x * h[n] - (n as f64).sqrt() * h[n - 1]) / ((n + 1) as f64).sqrt();
    }
    h
}

/// Nodes and weights of a Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(diag: &[f64], off: &[f64], mass: f64) -> GaussRule {
    let n = diag.len();
    let jac = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], mass * eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

fn build_hermite(q: usize) -> GaussRule {
    let diag = vec![0.0; q];
    let off: Vec<f64> = (1..q).map(|k| (k as f64).sqrt()).collect();
    let mut rule = golub_welsch(&diag, &off, (2.0 * PI).sqrt());
    // Newton polish on h_q, then Christoffel weights from the recurrence.
    for x in rule.nodes.iter_mut() {
        for _ in 0..3 {
            let h = hermite_values(*x, q);
            let dh = (q as f64).sqrt() * h[q - 1];
            *x -= h[q] / dh;
        }
    }
    let half = q / 2;
    for i in 0..half {
        let s = 0.5 * (rule.nodes[q - 1 - i] - rule.nodes[i]);
        rule.nodes[i] = -s;
        rule.nodes[q - 1 - i] = s;
    }
    if q % 2 == 1 {
        rule.nodes[half] = 0.0;
    }
    for (x, w) in rule.nodes.iter().zip(rule.weights.iter_mut()) {
        let h = hermite_values(*x, q - 1);
        let s: f64 = h.iter().map(|v| v * v).sum();
        *w = (2.0 * PI).sqrt() / s;
    }
    rule
}

/// `q`-point Gauss–Hermite rule for the weight `exp(-x^2/2)`; exact for degree `2q-1`.
/// Rules are cached process-wide.
pub fn gauss_hermite(q: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(q)
        .or_insert_with(|| Arc::new(build_hermite(q.max(1))))
        .clone()
}

/// Gauss–Hermite rule for `exp(-a y^2/2)`, obtained by scaling the standard rule.
pub fn gauss_hermite_weighted(q: usize, a: f64) -> GaussRule {
    let std = gauss_hermite(q);
    let s = a.sqrt();
    GaussRule {
        nodes: std.nodes.iter().map(|x| x / s).collect(),
        weights: std.weights.iter().map(|w| w / s).collect(),
    }
}

/// `q`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre_unit(q: usize) -> GaussRule {
    let diag = vec![0.0; q];
    let off: Vec<f64> = (1..q)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let rule = golub_welsch(&diag, &off, 2.0);
    GaussRule {
        nodes: rule.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: rule.weights.iter().map(|w| 0.5 * w).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_odd(k: usize) -> f64 {
        (1..=k).step_by(2).map(|v| v as f64).product()
    }

    #[test]
    fn hermite_rule_integrates_gaussian_moments() {
        let q = 25;
        let rule = gauss_hermite(q);
        for deg in 0..=(2 * q - 1) {
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(deg as i32))
                .sum();
            let want = if deg % 2 == 1 {
                0.0
            } else if deg == 0 {
                (2.0 * PI).sqrt()
            } else {
                (2.0 * PI).sqrt() * double_factorial_odd(deg - 1)
            };
            let gross: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| (w * x.powi(deg as i32)).abs())
                .sum();
            let scale = if deg % 2 == 1 { gross } else { want };
            assert!(
                (got - want).abs() / scale < 1e-10,
                "deg {deg}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn hermite_functions_are_orthogonal_under_rule() {
        let rule = gauss_hermite(30);
        for m in 0..25 {
            for n in 0..25 {
                let s: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| {
                        let h = hermite_values(*x, 25);
                        w * h[m] * h[n]
                    })
                    .sum();
                let want = if m == n { (2.0 * PI).sqrt() } else { 0.0 };
                assert!((s - want).abs() < 1e-11, "{m},{n}: {s}");
            }
        }
    }

    #[test]
    fn legendre_rule_is_exact_for_degree_eleven() {
        let rule = gauss_legendre_unit(6);
        for deg in 0..12 {
            let got: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * x.powi(deg))
                .sum();
            assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14);
        }
    }
}
