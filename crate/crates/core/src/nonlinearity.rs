//! The weighted area functional of a graph over the cylinder, its gradient, and
//! the nonlinear remainder left after subtracting the linearisation.
//!
//! A graph is `(y, v(y,θ)ω)` with `v > 0`. Pointwise algebra (reciprocals and
//! quotients) happens on the 3/2-padded collocation grid; derivatives and the
//! linear drift are exact in coefficient space.

use crate::error::{Error, Result};
use crate::spectral_operator::{apply_linearized, drift_apply, ModeFamily, ProjectionSet};
use crate::weighted_space::{
    check_weight, random_field, sobolev_norm, SpectralField, Transform, Truncation,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Radius `sqrt(1/a)` of the stationary cylinder.
pub fn cylinder_radius(a: f64) -> f64 {
    (1.0 / a).sqrt()
}

/// The radius profile `v` of a graph, paired with the weight `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFunction {
    pub v: SpectralField,
    pub a: f64,
}

impl GraphFunction {
    pub fn cylinder(trunc: Truncation, basis_weight: f64, a: f64) -> Self {
        Self {
            v: SpectralField::constant(trunc, basis_weight, cylinder_radius(a)),
            a,
        }
    }

    /// `v = sqrt(1/a) + ξ`.
    pub fn from_perturbation(xi: &SpectralField, a: f64) -> Self {
        let mut v = xi.clone();
        v.coeffs[0] += cylinder_radius(a);
        Self { v, a }
    }

    /// Returns `ξ = v - sqrt(1/a)`.
    pub fn perturbation(&self) -> SpectralField {
        let mut xi = self.v.clone();
        xi.coeffs[0] -= cylinder_radius(self.a);
        xi
    }
}

/// Values of a field and its first and second derivatives at grid nodes. The
/// variables are the `n` axial coordinates followed by the angle.
struct Jet {
    n: usize,
    val: Vec<f64>,
    d: Vec<Vec<f64>>,
    dd: Vec<Vec<f64>>,
}

impl Jet {
    fn new(f: &SpectralField, tr: &Transform) -> Self {
        let n = f.trunc.n_axis;
        let diff = |g: &SpectralField, k: usize| if k < n { g.d_y(k) } else { g.d_theta() };
        let firsts: Vec<SpectralField> = (0..=n).map(|k| diff(f, k)).collect();
        let mut dd = vec![Vec::new(); (n + 1) * (n + 1)];
        for p in 0..=n {
            for q in p..=n {
                let vals = tr.evaluate(&diff(&firsts[p], q));
                dd[q * (n + 1) + p] = vals.clone();
                dd[p * (n + 1) + q] = vals;
            }
        }
        Self {
            n,
            val: tr.evaluate(f),
            d: firsts.iter().map(|g| tr.evaluate(g)).collect(),
            dd,
        }
    }

    fn second(&self, p: usize, q: usize) -> &[f64] {
        &self.dd[p * (self.n + 1) + q]
    }

    fn theta(&self) -> usize {
        self.n
    }

    /// `1 + |∇_y v|² + v^{-2} v_θ²` at node `k`, for radius `v`.
    fn area_sq(&self, k: usize, v: f64) -> f64 {
        let t = self.theta();
        let grad: f64 = (0..self.n).map(|i| self.d[i][k].powi(2)).sum();
        1.0 + grad + self.d[t][k].powi(2) / (v * v)
    }

    /// Curvature remainder of the gradient at node `k` for radius `v`.
    fn remainder(&self, k: usize, v: f64) -> f64 {
        let t = self.theta();
        let vt = self.d[t][k];
        let vtt = self.second(t, t)[k];
        let mut hess = 0.0;
        let mut mixed = 0.0;
        for i in 0..self.n {
            mixed += self.d[i][k] * self.second(i, t)[k];
            for j in 0..self.n {
                hess += self.second(i, j)[k] * self.d[i][k] * self.d[j][k];
            }
        }
        let v2 = v * v;
        let num = vtt * vt * vt / (v2 * v2) + vt * vt / (v2 * v) + hess + 2.0 * vt * mixed / v2;
        num / self.area_sq(k, v)
    }

    /// `|f|² + |∇f|² + |∇²f|²` at node `k`, over all variables.
    fn jet_sq(&self, k: usize) -> f64 {
        let m = self.n + 1;
        self.val[k].powi(2)
            + self.d.iter().map(|g| g[k].powi(2)).sum::<f64>()
            + (0..m * m).map(|pq| self.dd[pq][k].powi(2)).sum::<f64>()
    }
}

fn padded(f: &SpectralField) -> std::sync::Arc<Transform> {
    Transform::padded(f.trunc, f.basis_weight)
}

fn check_graph(values: &[f64]) -> Result<()> {
    match values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        Some((node, value)) => Err(Error::GraphCondition {
            node,
            value: *value,
        }),
        None => Ok(()),
    }
}

/// Quadrature weights for `exp(-a|y|²/2) dy dθ` on a grid built for the basis weight.
fn weighted_nodes(tr: &Transform, a: f64) -> Vec<f64> {
    let shift = a - tr.grid.weight;
    tr.grid
        .weights()
        .iter()
        .zip(tr.grid.radial_sq())
        .map(|(w, r2)| w * (-0.5 * shift * r2).exp())
        .collect()
}

/// `∫ exp(-a(|y|² + v²)/2) v (1 + |∇_y v|² + v^{-2} v_θ²)^{1/2} dy dθ`.
pub fn gaussian_area(g: &GraphFunction) -> Result<f64> {
    check_weight(g.a)?;
    let tr = padded(&g.v);
    let jet = Jet::new(&g.v, &tr);
    check_graph(&jet.val)?;
    let w = weighted_nodes(&tr, g.a);
    Ok((0..w.len())
        .map(|k| {
            let v = jet.val[k];
            w[k] * (-0.5 * g.a * v * v).exp() * v * jet.area_sq(k, v).sqrt()
        })
        .sum())
}

/// Closed-form value of the functional on the stationary cylinder.
pub fn cylinder_gaussian_area(n_axis: usize, a: f64) -> f64 {
    (-0.5f64).exp() * cylinder_radius(a) * crate::weighted_space::gaussian_mass(n_axis, a)
}

/// Pointwise parts of the gradient, `-v^{-2} v_θθ + 1/v + N₁`, at the nodes.
fn gradient_pointwise(jet: &Jet) -> Vec<f64> {
    let t = jet.theta();
    (0..jet.val.len())
        .map(|k| {
            let v = jet.val[k];
            -jet.second(t, t)[k] / (v * v) + 1.0 / v + jet.remainder(k, v)
        })
        .collect()
}

/// `-Δ_y v + a⟨y,∇_y v⟩ - v^{-2} Δ_θ v - a v + 1/v + N₁(v)`.
pub fn area_gradient(g: &GraphFunction) -> Result<SpectralField> {
    check_weight(g.a)?;
    let tr = padded(&g.v);
    let jet = Jet::new(&g.v, &tr);
    check_graph(&jet.val)?;
    let nonlin = tr.project(&gradient_pointwise(&jet));
    drift_apply(&g.v, g.a)?.axpy(-g.a, &g.v)?.add(&nonlin)
}

/// `⟨F'(v), h · exp(-a v²/2) v / A⟩_a` with `A` the area element. This equals
/// the directional derivative of [`gaussian_area`] at `v` along `h`.
pub fn gradient_pairing(g: &GraphFunction, h: &SpectralField) -> Result<f64> {
    check_weight(g.a)?;
    g.v.check_compatible(h)?;
    let tr = padded(&g.v);
    let jet = Jet::new(&g.v, &tr);
    check_graph(&jet.val)?;
    let linear = tr.evaluate(&drift_apply(&g.v, g.a)?.axpy(-g.a, &g.v)?);
    let nonlin = gradient_pointwise(&jet);
    let hv = tr.evaluate(h);
    let w = weighted_nodes(&tr, g.a);
    Ok((0..w.len())
        .map(|k| {
            let v = jet.val[k];
            let conformal = (-0.5 * g.a * v * v).exp() * v / jet.area_sq(k, v).sqrt();
            w[k] * (linear[k] + nonlin[k]) * hv[k] * conformal
        })
        .sum())
}

/// Grid values of `N(a, ξ)` before projection, with the jet of `ξ`.
fn remainder_nodes(
    a: f64,
    xi: &SpectralField,
) -> Result<(Vec<f64>, Jet, std::sync::Arc<Transform>)> {
    check_weight(a)?;
    let tr = padded(xi);
    let jet = Jet::new(xi, &tr);
    let sa = a.sqrt();
    let r = cylinder_radius(a);
    let t = jet.theta();
    let mut out = Vec::with_capacity(jet.val.len());
    for k in 0..jet.val.len() {
        let x = jet.val[k];
        let v = r + x;
        if !(v > 0.0) {
            return Err(Error::GraphCondition { node: k, value: v });
        }
        let u = sa * x;
        // a - v^{-2} and 1/v - a v + 2aξ, written without cancellation.
        let angular = a * u * (2.0 + u) / ((1.0 + u) * (1.0 + u));
        let zeroth = a * sa * x * x / (1.0 + u);
        out.push(angular * jet.second(t, t)[k] + zeroth + jet.remainder(k, v));
    }
    Ok((out, jet, tr))
}

/// The remainder `N(a, ξ) = F'(sqrt(1/a) + ξ) - L(a)ξ`, given explicitly by
/// `(a - v^{-2})ξ_θθ - a v + 1/v + 2aξ + N₁(v)`.
pub fn nonlinear_remainder(a: f64, xi: &SpectralField) -> Result<SpectralField> {
    let (nodes, _, tr) = remainder_nodes(a, xi)?;
    Ok(tr.project(&nodes))
}

/// `F'(sqrt(1/a) + ξ) - L(a)ξ - N(a,ξ)`, whose size measures how consistently
/// the three maps are discretised.
pub fn expansion_defect(a: f64, xi: &SpectralField) -> Result<SpectralField> {
    let g = GraphFunction::from_perturbation(xi, a);
    area_gradient(&g)?
        .sub(&apply_linearized(xi, a)?)?
        .sub(&nonlinear_remainder(a, xi)?)
}

/// Measured constants of the nonlinear estimates, keyed by axis count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearConstants {
    /// `‖P^{(m,n)} N(a,ξ)‖_{s-2,a} ≤ c ‖ξ‖_s²`.
    pub projected_quadratic: f64,
    /// `‖N(a₁,ξ₁) - N(a₀,ξ₀)‖_{s-2} ≤ C δ₁ (|a₁-a₀| + ‖ξ₁-ξ₀‖_s)`.
    pub lipschitz: f64,
    /// `|N| ≤ C (1+|y|)(|ξ|² + |∇ξ|² + |∇²ξ|²)` at every node.
    pub pointwise: f64,
}

/// Headroom allowed over the stored constants.
pub const CONSTANT_HEADROOM: f64 = 1.25;

/// Constants shipped in `data/constants.json`.
pub fn stored_constants(n_axis: usize) -> Result<NonlinearConstants> {
    let all: BTreeMap<String, NonlinearConstants> =
        serde_json::from_str(include_str!("../data/constants.json"))
            .map_err(|e| Error::Resource(format!("constants file unreadable: {e}")))?;
    all.get(&n_axis.to_string())
        .copied()
        .ok_or_else(|| Error::Domain(format!("no calibrated constants for {n_axis} axes")))
}

/// `(‖P^{(m,n)} N(a,ξ)‖_{s-2,a}, c‖ξ‖_s²)`, for `a` in `[1/2 + δ, 1/2 + 2δ]`.
pub fn projected_remainder_bound(
    a: f64,
    xi: &SpectralField,
    modes: &ProjectionSet,
    family: ModeFamily,
    delta: f64,
    s: usize,
    c: f64,
) -> Result<(f64, f64)> {
    let tol = 1e-12;
    if a < 0.5 + delta - tol || a > 0.5 + 2.0 * delta + tol {
        return Err(Error::Domain(format!(
            "a = {a} outside [1/2 + δ, 1/2 + 2δ] for δ = {delta}"
        )));
    }
    if (modes.a - a).abs() > 0.0 {
        return Err(Error::Domain(
            "projection set built at a different weight".into(),
        ));
    }
    let pn = modes.project(&nonlinear_remainder(a, xi)?, family)?;
    let lhs = sobolev_norm(&pn, a, s.saturating_sub(2))?;
    Ok((lhs, c * sobolev_norm(xi, 0.5, s)?.powi(2)))
}

/// `(‖N(a₁,ξ₁) - N(a₀,ξ₀)‖_{s-2}, C δ₁ (|a₁-a₀| + ‖ξ₁-ξ₀‖_s))` on `V(δ₁)`.
#[allow(clippy::too_many_arguments)]
pub fn remainder_lipschitz(
    a0: f64,
    xi0: &SpectralField,
    a1: f64,
    xi1: &SpectralField,
    delta1: f64,
    s: usize,
    c: f64,
) -> Result<(f64, f64)> {
    for (a, xi) in [(a0, xi0), (a1, xi1)] {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Domain(format!("a = {a} outside (0, 1)")));
        }
        let nrm = sobolev_norm(xi, 0.5, s)?;
        if nrm > delta1 * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "‖ξ‖_s = {nrm} exceeds δ₁ = {delta1}"
            )));
        }
    }
    let dn = nonlinear_remainder(a1, xi1)?.sub(&nonlinear_remainder(a0, xi0)?)?;
    let lhs = sobolev_norm(&dn, 0.5, s.saturating_sub(2))?;
    let dxi = sobolev_norm(&xi1.sub(xi0)?, 0.5, s)?;
    Ok((lhs, c * delta1 * ((a1 - a0).abs() + dxi)))
}

/// Largest node ratio `|N| / ((1+|y|)(|ξ|² + |∇ξ|² + |∇²ξ|²))` on the padded grid.
pub fn pointwise_ratio(a: f64, xi: &SpectralField) -> Result<f64> {
    let (nodes, jet, tr) = remainder_nodes(a, xi)?;
    let r2 = tr.grid.radial_sq();
    Ok((0..nodes.len())
        .filter_map(|k| {
            let den = (1.0 + r2[k].sqrt()) * jet.jet_sq(k);
            (den > 0.0).then(|| nodes[k].abs() / den)
        })
        .fold(0.0, f64::max))
}

/// Seed of the corpus behind the stored constants.
pub const CALIBRATION_SEED: u64 = 20240917;

/// Envelope ratio of the random shapes used for calibration and tests.
pub const SHAPE_DECAY: f64 = 0.2;

/// Random shape normalised to `‖ξ‖_s = norm` at weight 1/2.
pub fn random_shape<R: Rng + ?Sized>(
    rng: &mut R,
    trunc: Truncation,
    b: f64,
    s: usize,
    norm: f64,
) -> Result<SpectralField> {
    let f = random_field(rng, trunc, b, SHAPE_DECAY, 1.0);
    let n = sobolev_norm(&f, 0.5, s)?;
    Ok(f.scaled(norm / n))
}

/// Smallest padded-grid value of `sqrt(1/a) + ξ`, relative to `sqrt(1/a)`.
pub fn relative_min_radius(a: f64, xi: &SpectralField) -> f64 {
    let vals = padded(xi).evaluate(xi);
    let r = cylinder_radius(a);
    vals.iter().fold(f64::INFINITY, |m, x| m.min((r + x) / r))
}

/// Attempts allowed when drawing admissible shapes.
pub const SHAPE_ATTEMPTS: usize = 10_000;

/// Random shape of norm `norm` whose radius `sqrt(1/a) + ξ` stays above half
/// the cylinder radius at every padded node, for all weights `a ≤ 1`.
pub fn admissible_shape<R: Rng + ?Sized>(
    rng: &mut R,
    trunc: Truncation,
    b: f64,
    s: usize,
    norm: f64,
) -> Result<SpectralField> {
    for _ in 0..SHAPE_ATTEMPTS {
        let f = random_shape(rng, trunc, b, s, norm)?;
        if relative_min_radius(1.0, &f) >= 0.5 {
            return Ok(f);
        }
    }
    Err(Error::Sampling {
        attempts: SHAPE_ATTEMPTS,
    })
}

/// Measures the three constants on a seeded corpus of random shapes.
pub fn calibrate(
    seed: u64,
    samples: usize,
    trunc: Truncation,
    delta: f64,
    s: usize,
) -> Result<NonlinearConstants> {
    let b = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quad = 0.0f64;
    let mut point = 0.0f64;
    let weights = [0.5 + delta, 0.5 + 1.5 * delta, 0.5 + 2.0 * delta];
    let sets: Vec<ProjectionSet> = weights
        .iter()
        .map(|a| crate::spectral_operator::build_modes(*a, trunc, b))
        .collect::<Result<_>>()?;
    for _ in 0..samples {
        let shape =
            admissible_shape(&mut rng, trunc, b, s, 4.0 * delta)?.scaled(1.0 / (4.0 * delta));
        for (a, set) in weights.iter().zip(&sets) {
            for eps in [delta / 4.0, delta, 4.0 * delta] {
                let xi = shape.scaled(eps);
                for fam in ModeFamily::ALL {
                    let (lhs, rhs) = projected_remainder_bound(*a, &xi, set, fam, delta, s, 1.0)?;
                    quad = quad.max(lhs / rhs);
                }
                point = point.max(pointwise_ratio(*a, &xi)?);
            }
        }
    }
    let mut lip = 0.0f64;
    for delta1 in [0.05, 0.025, 0.0125] {
        for _ in 0..samples {
            let xi0 = admissible_shape(&mut rng, trunc, b, s, 0.9 * delta1)?;
            let step = 0.1 * delta1 * rng.gen_range(0.05..1.0);
            let dxi = admissible_shape(&mut rng, trunc, b, s, step)?;
            let xi1 = xi0.add(&dxi)?;
            let xi1 = if sobolev_norm(&xi1, 0.5, s)? > delta1 {
                xi0.sub(&dxi)?
            } else {
                xi1
            };
            let a0 = rng.gen_range(0.5..0.54);
            let a1 = a0 + rng.gen_range(-1e-3..1e-3);
            let (lhs, rhs) = remainder_lipschitz(a0, &xi0, a1, &xi1, delta1, s, 1.0)?;
            lip = lip.max(lhs / rhs);
        }
    }
    Ok(NonlinearConstants {
        projected_quadratic: quad,
        lipschitz: lip,
        pointwise: point,
    })
}
