//! Scalar linear ODEs and running integrals on a uniform time grid.
//!
//! On each interval the coefficient paths are replaced by their degree-5
//! Lagrange interpolant through six neighbouring nodes (shifted at the ends of
//! the grid). Exponents are integrated exactly from the interpolant, and the
//! Duhamel integral on the interval uses six-point Gauss–Legendre nodes.

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre_unit;

const STENCIL: usize = 6;

/// Uniform grid `τ_j = j·dt`, `j = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub dt: f64,
    pub steps: usize,
}

/// Interpolation weights for one stencil offset.
#[derive(Debug, Clone)]
struct Offset {
    /// `ℓ_i(o + q_k)`.
    at_nodes: [[f64; STENCIL]; STENCIL],
    /// `∫_o^{o+1} ℓ_i`.
    full: [f64; STENCIL],
    /// `∫_o^{o+q_k} ℓ_i`.
    head: [[f64; STENCIL]; STENCIL],
    /// `∫_{o+q_k}^{o+1} ℓ_i`.
    tail: [[f64; STENCIL]; STENCIL],
}

/// Lagrange basis polynomial `ℓ_i` on nodes `0..STENCIL`, in product form.
fn lagrange(i: usize, u: f64) -> f64 {
    (0..STENCIL)
        .filter(|m| *m != i)
        .map(|m| (u - m as f64) / (i as f64 - m as f64))
        .product()
}

/// `∫_lo^hi ℓ_i`, exact since the Gauss rule integrates degree 11.
fn lagrange_integral(i: usize, lo: f64, hi: f64, gl: &crate::quadrature::GaussRule) -> f64 {
    let h = hi - lo;
    gl.nodes
        .iter()
        .zip(&gl.weights)
        .map(|(x, w)| w * lagrange(i, lo + h * x))
        .sum::<f64>()
        * h
}

#[derive(Debug, Clone)]
pub(crate) struct Weights {
    pub(crate) gl_nodes: [f64; STENCIL],
    pub(crate) gl_weights: [f64; STENCIL],
    offsets: Vec<Offset>,
}

impl Weights {
    fn new() -> Self {
        let gl = gauss_legendre_unit(STENCIL);
        let mut gl_nodes = [0.0; STENCIL];
        let mut gl_weights = [0.0; STENCIL];
        gl_nodes.copy_from_slice(&gl.nodes);
        gl_weights.copy_from_slice(&gl.weights);
        let offsets = (0..STENCIL - 1)
            .map(|o| {
                let o = o as f64;
                let mut off = Offset {
                    at_nodes: [[0.0; STENCIL]; STENCIL],
                    full: [0.0; STENCIL],
                    head: [[0.0; STENCIL]; STENCIL],
                    tail: [[0.0; STENCIL]; STENCIL],
                };
                for i in 0..STENCIL {
                    off.full[i] = lagrange_integral(i, o, o + 1.0, &gl);
                    for k in 0..STENCIL {
                        let u = o + gl_nodes[k];
                        off.at_nodes[k][i] = lagrange(i, u);
                        off.head[k][i] = lagrange_integral(i, o, u, &gl);
                        off.tail[k][i] = lagrange_integral(i, u, o + 1.0, &gl);
                    }
                }
                off
            })
            .collect();
        Self {
            gl_nodes,
            gl_weights,
            offsets,
        }
    }
}

fn weights() -> &'static Weights {
    static W: std::sync::OnceLock<Weights> = std::sync::OnceLock::new();
    W.get_or_init(Weights::new)
}

/// Per-interval data for a coefficient path `μ`: integrals of `μ` over the
/// interval and over its head/tail pieces at the Gauss nodes.
#[derive(Debug, Clone)]
pub struct ExponentTable {
    pub grid: UniformGrid,
    /// `∫_{τ_j}^{τ_{j+1}} μ`.
    pub full: Vec<f64>,
    /// `∫_{τ_j}^{s_k} μ`.
    pub head: Vec<[f64; STENCIL]>,
    /// `∫_{s_k}^{τ_{j+1}} μ`.
    pub tail: Vec<[f64; STENCIL]>,
}

impl UniformGrid {
    pub fn new(dt: f64, tau_max: f64) -> Result<Self> {
        if !(dt > 0.0 && tau_max > 0.0) {
            return Err(Error::Domain(format!(
                "need dt > 0 and tau_max > 0, got {dt}, {tau_max}"
            )));
        }
        let steps = (tau_max / dt).round() as usize;
        if steps < STENCIL || ((steps as f64) * dt - tau_max).abs() > 1e-9 * tau_max {
            return Err(Error::Domain(format!(
                "tau_max = {tau_max} must be a multiple of dt = {dt} with at least {STENCIL} steps"
            )));
        }
        Ok(Self { dt, steps })
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| j as f64 * self.dt).collect()
    }

    pub fn tau_max(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Recovers the grid from explicit nodes, checking uniform spacing.
    pub fn from_taus(taus: &[f64]) -> Result<Self> {
        if taus.len() < STENCIL + 1 || taus[0] != 0.0 {
            return Err(Error::Shape(
                "time grid must start at 0 with at least 7 nodes".into(),
            ));
        }
        let dt = taus[1] - taus[0];
        for (j, t) in taus.iter().enumerate() {
            if (t - j as f64 * dt).abs() > 1e-9 * dt.max(1.0) * (1.0 + j as f64).sqrt() {
                return Err(Error::Shape(format!(
                    "time grid is not uniform at node {j}"
                )));
            }
        }
        Ok(Self {
            dt,
            steps: taus.len() - 1,
        })
    }

    fn start(&self, j: usize) -> (usize, usize) {
        let s0 = j.saturating_sub(2).min(self.steps + 1 - STENCIL);
        (s0, j - s0)
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::Shape(format!(
                "path has {} samples, grid has {}",
                v.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Values of the interpolant of `v` at the Gauss nodes of interval `j`.
    pub fn at_gauss(&self, v: &[f64], j: usize) -> [f64; STENCIL] {
        let (s0, o) = self.start(j);
        let off = &weights().offsets[o];
        let mut out = [0.0; STENCIL];
        for (k, o) in out.iter_mut().enumerate() {
            *o = (0..STENCIL).map(|i| off.at_nodes[k][i] * v[s0 + i]).sum();
        }
        out
    }

    /// Gauss nodes of interval `j` in absolute time, and their weights (times dt).
    pub fn gauss_points(&self, j: usize) -> ([f64; STENCIL], [f64; STENCIL]) {
        let w = weights();
        let mut t = [0.0; STENCIL];
        let mut ww = [0.0; STENCIL];
        for k in 0..STENCIL {
            t[k] = (j as f64 + w.gl_nodes[k]) * self.dt;
            ww[k] = w.gl_weights[k] * self.dt;
        }
        (t, ww)
    }

    pub fn exponents(&self, mu: &[f64]) -> Result<ExponentTable> {
        self.check(mu)?;
        let mut full = Vec::with_capacity(self.steps);
        let mut head = Vec::with_capacity(self.steps);
        let mut tail = Vec::with_capacity(self.steps);
        for j in 0..self.steps {
            let (s0, o) = self.start(j);
            let off = &weights().offsets[o];
            let vals = &mu[s0..s0 + STENCIL];
            full.push(self.dt * off.full.iter().zip(vals).map(|(w, v)| w * v).sum::<f64>());
            let mut h = [0.0; STENCIL];
            let mut t = [0.0; STENCIL];
            for k in 0..STENCIL {
                h[k] = self.dt
                    * off.head[k]
                        .iter()
                        .zip(vals)
                        .map(|(w, v)| w * v)
                        .sum::<f64>();
                t[k] = self.dt
                    * off.tail[k]
                        .iter()
                        .zip(vals)
                        .map(|(w, v)| w * v)
                        .sum::<f64>();
            }
            head.push(h);
            tail.push(t);
        }
        Ok(ExponentTable {
            grid: *self,
            full,
            head,
            tail,
        })
    }

    /// `∫_0^{τ_j} v` at every node.
    pub fn cumulative(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        let mut out = vec![0.0; self.len()];
        for j in 0..self.steps {
            let (s0, o) = self.start(j);
            let off = &weights().offsets[o];
            let inc: f64 = off
                .full
                .iter()
                .zip(&v[s0..s0 + STENCIL])
                .map(|(w, x)| w * x)
                .sum();
            out[j + 1] = out[j] + self.dt * inc;
        }
        Ok(out)
    }

    /// Derivative of the interpolant at the nodes (sixth order), for residual checks.
    pub fn derivative(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        // ℓ_i'(u) = ℓ_i(u) Σ_{m≠i} 1/(u - m), written without the division at nodes
        let deriv = |i: usize, u: f64| -> f64 {
            (0..STENCIL)
                .filter(|m| *m != i)
                .map(|m| {
                    (0..STENCIL)
                        .filter(|k| *k != i && *k != m)
                        .map(|k| (u - k as f64) / (i as f64 - k as f64))
                        .product::<f64>()
                        / (i as f64 - m as f64)
                })
                .sum()
        };
        Ok((0..self.len())
            .map(|j| {
                let s0 = j.saturating_sub(2).min(self.steps + 1 - STENCIL);
                let u = (j - s0) as f64;
                (0..STENCIL).map(|i| deriv(i, u) * v[s0 + i]).sum::<f64>() / self.dt
            })
            .collect())
    }
}

impl ExponentTable {
    /// `ẋ = -κμ x + r` forward from `x0`, with `μ` the tabulated path.
    pub fn forward(&self, kappa: f64, r: &[f64], x0: f64) -> Result<Vec<f64>> {
        self.grid.check(r)?;
        let w = weights();
        let mut x = Vec::with_capacity(self.grid.len());
        x.push(x0);
        for j in 0..self.grid.steps {
            let rq = self.grid.at_gauss(r, j);
            let mut duhamel = 0.0;
            for k in 0..STENCIL {
                duhamel += w.gl_weights[k] * rq[k] * (-kappa * self.tail[j][k]).exp();
            }
            let next = (-kappa * self.full[j]).exp() * x[j] + self.grid.dt * duhamel;
            x.push(next);
        }
        Ok(x)
    }

    /// `ẋ = κμ x + f` backward from the terminal value `x_end`.
    pub fn backward(&self, kappa: f64, f: &[f64], x_end: f64) -> Result<Vec<f64>> {
        self.grid.check(f)?;
        let w = weights();
        let n = self.grid.len();
        let mut x = vec![0.0; n];
        x[n - 1] = x_end;
        for j in (0..self.grid.steps).rev() {
            let fq = self.grid.at_gauss(f, j);
            let mut duhamel = 0.0;
            for k in 0..STENCIL {
                duhamel += w.gl_weights[k] * fq[k] * (-kappa * self.head[j][k]).exp();
            }
            x[j] = (-kappa * self.full[j]).exp() * x[j + 1] - self.grid.dt * duhamel;
        }
        Ok(x)
    }
}

/// Power-law fit `|f| ≈ C⟨τ⟩^{-p}` on the last part of the grid, used to
/// estimate `-∫_T^∞ f e^{-a(s-T)} ds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub value: f64,
    pub exponent: f64,
}

/// Fraction of the grid used by the tail fit.
const TAIL_WINDOW: f64 = 0.2;

pub fn tail_integral(grid: &UniformGrid, f: &[f64], a_end: f64) -> Result<TailEstimate> {
    grid.check(f)?;
    let taus = grid.taus();
    let first = ((1.0 - TAIL_WINDOW) * grid.steps as f64) as usize;
    let window: Vec<(f64, f64)> = (first..grid.len()).map(|j| (taus[j], f[j])).collect();
    let scale = window.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let last = *f.last().expect("non-empty path");
    if scale < 1e-300 {
        return Ok(TailEstimate {
            value: 0.0,
            exponent: f64::INFINITY,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = window
        .iter()
        .filter(|(_, v)| v.abs() > 1e-300)
        .map(|(t, v)| (crate::fit::bracket(*t).ln(), v.abs().ln()))
        .unzip();
    if x.len() < 2 {
        return Ok(TailEstimate {
            value: 0.0,
            exponent: f64::INFINITY,
        });
    }
    let fit = crate::fit::linear_fit(&x, &y)?;
    let p = -fit.slope;
    let big_t = grid.tau_max();
    // anchor the amplitude at the final sample so the estimate is continuous
    let c = last.abs() * crate::fit::bracket(big_t).powf(p);
    let sign = last.signum();
    let shape = |s: f64| c * crate::fit::bracket(s).powf(-p);
    let value = if a_end > 1e-12 {
        let gl = gauss_legendre_unit(STENCIL);
        let span = 60.0 / a_end;
        let panels = 240;
        let h = span / panels as f64;
        let mut acc = 0.0;
        for m in 0..panels {
            for (q, w) in gl.nodes.iter().zip(&gl.weights) {
                let s = (m as f64 + q) * h;
                acc += w * h * shape(big_t + s) * (-a_end * s).exp();
            }
        }
        acc
    } else {
        if !(p > 1.0 + 1e-6) {
            return Err(Error::TailFit(format!(
                "source decays like <tau>^-{p:.3}, not integrable without damping"
            )));
        }
        // s = T/u maps [T, ∞) onto (0, 1]
        let gl = gauss_legendre_unit(STENCIL);
        let panels = 64;
        let mut acc = 0.0;
        for m in 0..panels {
            for (q, w) in gl.nodes.iter().zip(&gl.weights) {
                let u = (m as f64 + q) / panels as f64;
                acc += w / panels as f64 * shape(big_t / u) * big_t / (u * u);
            }
        }
        acc
    };
    Ok(TailEstimate {
        value: -sign * value,
        exponent: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_is_sixth_order_exact_for_quintics() {
        let g = UniformGrid::new(0.1, 2.0).unwrap();
        let v: Vec<f64> = g
            .taus()
            .iter()
            .map(|t| t.powi(5) - 2.0 * t * t + 1.0)
            .collect();
        let c = g.cumulative(&v).unwrap();
        let t = g.tau_max();
        let want = t.powi(6) / 6.0 - 2.0 * t.powi(3) / 3.0 + t;
        assert!((c[g.steps] - want).abs() < 1e-12);
    }

    #[test]
    fn forward_decay_is_exact_for_constant_rate() {
        let g = UniformGrid::new(0.05, 5.0).unwrap();
        let tab = g.exponents(&vec![0.7; g.len()]).unwrap();
        let x = tab.forward(3.0, &vec![0.0; g.len()], 2.0).unwrap();
        for (t, v) in g.taus().iter().zip(&x) {
            assert!(
                (v - 2.0 * (-2.1 * t).exp()).abs() < 1e-14,
                "{t} {}",
                v - 2.0 * (-2.1 * t).exp()
            );
        }
    }
}
