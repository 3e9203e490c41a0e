//! Conversions between the original flow `(x, t)` and the rescaled variables
//! `(y, τ)`: the scale `λ(t)² = 2∫_t^T a`, the clock `τ(t) = ∫_0^t λ^{-2}`, the
//! reconstruction of the unrescaled surface from a path, and the limiting
//! cylinder of a converged path.

use crate::error::{Error, Result};
use crate::fit::{bracket, linear_fit};
use crate::frozen_solver::FlowPath;
use crate::integrator::UniformGrid;
use crate::modulation::SymmetryParams;
use crate::nonlinearity::cylinder_radius;
use crate::weighted_space::SpectralField;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Tabulated `t ↦ (λ, τ, a)` on a grid uniform in `s = -ln(1 - t/T)`, which
/// clusters nodes near the singular time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescalingState {
    pub t_final: f64,
    pub t: Vec<f64>,
    pub a: Vec<f64>,
    pub lambda: Vec<f64>,
    pub tau: Vec<f64>,
    /// Spacing in `s`.
    pub ds: f64,
}

/// `t_j = T(1 - e^{-j·ds})`, `j = 0..=steps`.
pub fn clustered_times(t_final: f64, s_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(t_final > 0.0 && s_max > 0.0) || steps < 6 {
        return Err(Error::Domain(format!(
            "need T > 0, s_max > 0 and 6+ steps, got {t_final}, {s_max}, {steps}"
        )));
    }
    let ds = s_max / steps as f64;
    Ok((0..=steps)
        .map(|j| t_final * (1.0 - (-(j as f64) * ds).exp()))
        .collect())
}

impl RescalingState {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `T - t_j`, exact even where `t_j` rounds to `T`.
    pub fn time_left(&self, j: usize) -> f64 {
        self.t_final * (-(j as f64) * self.ds).exp()
    }

    fn s_grid(&self) -> UniformGrid {
        UniformGrid {
            dt: self.ds,
            steps: self.t.len() - 1,
        }
    }

    /// `max |λ dλ/dt + a|` over the grid, with the derivative taken by
    /// sixth-order differences in `s`.
    pub fn scale_residual(&self) -> Result<f64> {
        let sq: Vec<f64> = self.lambda.iter().map(|l| l * l / 2.0).collect();
        let d = self.s_grid().derivative(&sq)?;
        let mut worst = 0.0f64;
        for j in 0..self.len() {
            let dt_ds = self.time_left(j);
            worst = worst.max((d[j] / dt_ds + self.a[j]).abs());
        }
        Ok(worst)
    }

    /// `t(τ)` by Newton iteration on the interpolated clock; `τ` must lie in
    /// the tabulated range.
    pub fn t_of_tau(&self, tau: f64) -> Result<f64> {
        let last = *self.tau.last().expect("non-empty table");
        if !(tau >= 0.0 && tau <= last) {
            return Err(Error::Domain(format!("tau = {tau} outside [0, {last}]")));
        }
        let j = self
            .tau
            .partition_point(|v| *v <= tau)
            .saturating_sub(1)
            .min(self.len() - 2);
        let (lo, hi) = (j as f64 * self.ds, (j + 1) as f64 * self.ds);
        let clock = |s: f64| interpolate(&self.tau, self.ds, s);
        let mut s = lo
            + (hi - lo) * (tau - self.tau[j])
                / (self.tau[j + 1] - self.tau[j]).max(f64::MIN_POSITIVE);
        for _ in 0..50 {
            let f = clock(s) - tau;
            let h = 1e-6 * self.ds;
            let df = (clock(s + h) - clock(s - h)) / (2.0 * h);
            let step = f / df;
            s = (s - step).clamp(lo, hi);
            if step.abs() < 1e-15 * (1.0 + s) {
                break;
            }
        }
        Ok(self.t_final * (1.0 - (-s).exp()))
    }

    /// `τ(t)` from the interpolated clock.
    pub fn tau_of_t(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.t_final) {
            return Err(Error::Domain(format!("t = {t} outside [0, T)")));
        }
        let s = -(1.0 - t / self.t_final).ln();
        let s_max = (self.len() - 1) as f64 * self.ds;
        if s > s_max * (1.0 + 1e-14) {
            return Err(Error::Domain(format!("t = {t} beyond the tabulated range")));
        }
        Ok(interpolate(&self.tau, self.ds, s.min(s_max)))
    }

    /// `λ(t)` from the interpolated table.
    pub fn lambda_of_t(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t < self.t_final) {
            return Err(Error::Domain(format!("t = {t} outside [0, T)")));
        }
        let s = -(1.0 - t / self.t_final).ln();
        let s_max = (self.len() - 1) as f64 * self.ds;
        if s > s_max * (1.0 + 1e-14) {
            return Err(Error::Domain(format!("t = {t} beyond the tabulated range")));
        }
        Ok(interpolate(&self.lambda, self.ds, s.min(s_max)))
    }
}

/// `∫_{x_j}^{x_end} v + tail` at every node, accumulated from the far end.
fn remainder(grid: &UniformGrid, v: &[f64], tail: f64) -> Result<Vec<f64>> {
    let rev: Vec<f64> = v.iter().rev().cloned().collect();
    let c = grid.cumulative(&rev)?;
    Ok(c.iter().rev().map(|x| x + tail).collect())
}

/// Degree-5 Lagrange interpolation of nodal values on a uniform grid.
fn interpolate(v: &[f64], h: f64, x: f64) -> f64 {
    let m = v.len();
    let u = x / h;
    let j = (u.floor().max(0.0) as usize).min(m - 2);
    let s0 = j.saturating_sub(2).min(m - 6);
    let mut out = 0.0;
    for i in 0..6 {
        let mut w = 1.0;
        for k in 0..6 {
            if k != i {
                w *= (u - (s0 + k) as f64) / (i as f64 - k as f64);
            }
        }
        out += w * v[s0 + i];
    }
    out
}

/// Builds `λ`, `τ` from the dilation rate sampled at `t_j = T(1 - e^{-j·ds})`.
pub fn build_rescaling(t: &[f64], a: &[f64], t_final: f64) -> Result<RescalingState> {
    if t.len() < 7 {
        return Err(Error::Shape("need at least 7 time samples".into()));
    }
    if !(t_final > 0.0) || t[0] != 0.0 {
        return Err(Error::Domain(
            "need T > 0 and a grid starting at t = 0".into(),
        ));
    }
    if let Some(j) = t.iter().position(|v| !(*v < t_final)) {
        return Err(Error::Domain(format!(
            "time {} at node {j} is not before T",
            t[j]
        )));
    }
    let s: Vec<f64> = t.iter().map(|v| -(1.0 - v / t_final).ln()).collect();
    let grid = UniformGrid::from_taus(&s)
        .map_err(|_| Error::Shape("times are not uniform in -ln(1 - t/T)".into()))?;
    build_on_s(grid.dt, a, t_final)
}

/// [`build_rescaling`] on the grid `s_j = j·ds`; `T - t = T e^{-s}` is formed
/// directly so nodes closer to `T` than double precision resolves stay usable.
pub fn build_on_s(ds: f64, a: &[f64], t_final: f64) -> Result<RescalingState> {
    let m = a.len();
    if m < 7 || !(ds > 0.0) || !(t_final > 0.0) {
        return Err(Error::Domain("need 7+ samples, ds > 0 and T > 0".into()));
    }
    if let Some(j) = a.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!(
            "dilation rate must be positive, got {} at node {j}",
            a[j]
        )));
    }
    let grid = UniformGrid {
        dt: ds,
        steps: m - 1,
    };
    let left: Vec<f64> = (0..m).map(|j| t_final * (-(j as f64) * ds).exp()).collect();
    // dt = (T - t) ds; integrate from the far end so λ keeps relative accuracy near T
    let rate: Vec<f64> = (0..m).map(|j| a[j] * left[j]).collect();
    let rem = remainder(&grid, &rate, a[m - 1] * left[m - 1])?;
    let lambda: Vec<f64> = rem.iter().map(|r| (2.0 * r).sqrt()).collect();
    let clock: Vec<f64> = (0..m).map(|j| left[j] / (lambda[j] * lambda[j])).collect();
    let tau = grid.cumulative(&clock)?;
    let t = left.iter().map(|l| t_final - l).collect();
    Ok(RescalingState {
        t_final,
        t,
        a: a.to_vec(),
        lambda,
        tau,
        ds,
    })
}

/// The change of variables induced by a path: with `λ(τ) = λ0 e^{-∫a}` and
/// `t(τ) = ∫λ²`, `λ0` is fixed by `t(∞) = T`, extending `a` by its final
/// value beyond the grid. Returned on the `s`-grid with `steps` intervals up to
/// the largest `s` covered by the path.
pub fn rescaling_from_path(path: &FlowPath, t_final: f64, steps: usize) -> Result<RescalingState> {
    if !(t_final > 0.0) {
        return Err(Error::Domain(format!("T must be positive, got {t_final}")));
    }
    let grid = path.grid()?;
    let a = path.a_path();
    if let Some(j) = a.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!(
            "dilation rate must be positive, got {} at node {j}",
            a[j]
        )));
    }
    let int_a = grid.cumulative(&a)?;
    let e2: Vec<f64> = int_a.iter().map(|v| (-2.0 * v).exp()).collect();
    let m = grid.len();
    // ∫_τ^∞ e^{-2∫a}, the tail using the final rate
    let rem = remainder(&grid, &e2, e2[m - 1] / (2.0 * a[m - 1]))?;
    let log_rem: Vec<f64> = rem.iter().map(|r| r.ln()).collect();
    // s(τ) = ln(rem(0)) - ln(rem(τ)) is increasing; tabulate a against s
    let s_max = log_rem[0] - log_rem[m - 1];
    if steps < 6 {
        return Err(Error::Domain(format!("need at least 6 steps, got {steps}")));
    }
    let ds = s_max / steps as f64;
    let mut a_s = Vec::with_capacity(steps + 1);
    let mut k = 0;
    for j in 0..=steps {
        let target = log_rem[0] - j as f64 * ds;
        while k + 1 < m - 1 && log_rem[k + 1] >= target {
            k += 1;
        }
        let mut tau = grid.taus()[k];
        for _ in 0..60 {
            let f = interpolate(&log_rem, grid.dt, tau) - target;
            let df = -interpolate(&e2, grid.dt, tau) / interpolate(&rem, grid.dt, tau);
            let step = f / df;
            tau = (tau - step).clamp(0.0, grid.tau_max());
            if step.abs() < 1e-14 * (1.0 + tau) {
                break;
            }
        }
        a_s.push(interpolate(&a, grid.dt, tau));
    }
    build_on_s(ds, &a_s, t_final)
}

/// Rotation `exp(G)` in `SO(n+2)` generated by the tilt block, which turns the
/// axis `e_j` towards the transversal direction `e_{n+l}` by `g[l][j]`.
pub fn rotation(sigma: &SymmetryParams) -> DMatrix<f64> {
    let n = sigma.n_axis;
    let mut gen = DMatrix::zeros(n + 2, n + 2);
    for l in 0..2 {
        for j in 0..n {
            let g = sigma.tilt(l, j);
            gen[(n + l, j)] = g;
            gen[(j, n + l)] = -g;
        }
    }
    gen.exp()
}

/// One reconstructed surface point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub t: f64,
    pub tau: f64,
    pub y: Vec<f64>,
    pub theta: f64,
    /// `X ∈ R^{n+2}`.
    pub x: Vec<f64>,
    /// `sqrt(1/a) + ξ` at `(y, θ)`.
    pub radius: f64,
}

/// Path quantities at off-grid `τ` by degree-5 interpolation of every
/// coordinate and coefficient.
pub fn path_at(path: &FlowPath, tau: f64) -> Result<(SymmetryParams, SpectralField)> {
    let grid = path.grid()?;
    if !(tau >= 0.0 && tau <= grid.tau_max()) {
        return Err(Error::Domain(format!(
            "tau = {tau} outside the path range [0, {}]",
            grid.tau_max()
        )));
    }
    let n = path.trunc().n_axis;
    let k = path.symmetry[0].coords().len();
    let coords: Vec<f64> = (0..k)
        .map(|q| {
            let col: Vec<f64> = path.symmetry.iter().map(|s| s.coords()[q]).collect();
            interpolate(&col, grid.dt, tau)
        })
        .collect();
    let len = path.trunc().len();
    let coeffs: Vec<f64> = (0..len)
        .map(|i| {
            let col: Vec<f64> = path.perturbation.iter().map(|x| x.coeffs[i]).collect();
            interpolate(&col, grid.dt, tau)
        })
        .collect();
    Ok((
        SymmetryParams::from_coords(n, &coords)?,
        SpectralField::from_coeffs(path.trunc(), path.basis_weight(), coeffs)?,
    ))
}

/// `X(y, ω, t) = λ(t) g(t)(y, (sqrt(1/a) + ξ)ω) + (0, z(t))` at the sample
/// times `ts` and points `(y, θ)`.
pub fn reconstruct_flow(
    path: &FlowPath,
    rs: &RescalingState,
    ts: &[f64],
    points: &[(Vec<f64>, f64)],
) -> Result<Vec<SurfaceSample>> {
    let n = path.trunc().n_axis;
    if let Some(p) = points.iter().find(|p| p.0.len() != n) {
        return Err(Error::Shape(format!(
            "point {:?} does not have {n} axial coordinates",
            p.0
        )));
    }
    let rows: Vec<Vec<SurfaceSample>> = ts
        .par_iter()
        .map(|&t| {
            let tau = rs.tau_of_t(t)?;
            let lambda = rs.lambda_of_t(t)?;
            let (sigma, xi) = path_at(path, tau)?;
            let g = rotation(&sigma);
            let base = cylinder_radius(sigma.a);
            points
                .iter()
                .map(|(y, theta)| {
                    let v = base + point_value(&xi, y, *theta);
                    let mut local = nalgebra::DVector::zeros(n + 2);
                    for j in 0..n {
                        local[j] = y[j];
                    }
                    local[n] = v * theta.cos();
                    local[n + 1] = v * theta.sin();
                    let mut x = &g * local * lambda;
                    x[n] += sigma.z[0];
                    x[n + 1] += sigma.z[1];
                    Ok(SurfaceSample {
                        t,
                        tau,
                        y: y.clone(),
                        theta: *theta,
                        x: x.iter().cloned().collect(),
                        radius: v,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Inverse of the reconstruction at a sample: `(y, |Y_⊥|, θ)` from `X`.
pub fn rescale_point(
    path: &FlowPath,
    rs: &RescalingState,
    t: f64,
    x: &[f64],
) -> Result<(Vec<f64>, f64, f64)> {
    let n = path.trunc().n_axis;
    if x.len() != n + 2 {
        return Err(Error::Shape(format!(
            "point must have {} coordinates",
            n + 2
        )));
    }
    let tau = rs.tau_of_t(t)?;
    let lambda = rs.lambda_of_t(t)?;
    let (sigma, _) = path_at(path, tau)?;
    let g = rotation(&sigma);
    let mut shifted = nalgebra::DVector::from_column_slice(x);
    shifted[n] -= sigma.z[0];
    shifted[n + 1] -= sigma.z[1];
    let local = g.transpose() * shifted / lambda;
    let y: Vec<f64> = (0..n).map(|j| local[j]).collect();
    let radius = (local[n].powi(2) + local[n + 1].powi(2)).sqrt();
    Ok((y, radius, local[n + 1].atan2(local[n])))
}

/// Value of a field at one point `(y, θ)`.
pub fn point_value(f: &SpectralField, y: &[f64], theta: f64) -> f64 {
    let trunc = f.trunc;
    let sb = f.basis_weight.sqrt();
    let h: Vec<Vec<f64>> = y
        .iter()
        .map(|v| crate::quadrature::hermite_values(sb * v, trunc.n_y))
        .collect();
    let nf = trunc.fourier_len();
    let fourier: Vec<f64> = (0..nf)
        .map(|slot| crate::weighted_space::fourier_value(slot, theta))
        .collect();
    (0..trunc.len())
        .map(|i| {
            let (alpha, slot) = trunc.unflatten(i);
            let mut w = fourier[slot];
            for (ax, p) in alpha.iter().enumerate() {
                w *= h[ax][*p];
            }
            f.coeffs[i] * w
        })
        .sum()
}

/// The limiting cylinder of a converged path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentFlow {
    pub sigma_limit: SymmetryParams,
    /// `sqrt(1/a_∞)`.
    pub radius: f64,
    /// Row-major `(n+2) × (n+2)` rotation of the limiting axis.
    pub rotation: Vec<f64>,
    /// Largest intercept uncertainty of the per-coordinate fits.
    pub fit_error: f64,
    /// `|σ_∞ - σ(0)|`.
    pub distance_from_start: f64,
}

/// Start of the fit window as a fraction of `τ_max`.
const LIMIT_WINDOW: f64 = 0.5;

/// Extrapolates `σ(τ) ≈ σ_∞ + C⟨τ⟩^{-1}` per coordinate over the second half of
/// the path and returns the limiting cylinder.
pub fn tangent_flow_limit(path: &FlowPath) -> Result<TangentFlow> {
    path.validate()?;
    let tau_max = *path.taus.last().expect("non-empty path");
    let window: Vec<usize> = (0..path.len())
        .filter(|j| path.taus[*j] >= LIMIT_WINDOW * tau_max)
        .collect();
    let x: Vec<f64> = window
        .iter()
        .map(|j| 1.0 / bracket(path.taus[*j]))
        .collect();
    let k = path.symmetry[0].coords().len();
    let mut limit = Vec::with_capacity(k);
    let mut fit_error = 0.0f64;
    for q in 0..k {
        let y: Vec<f64> = window
            .iter()
            .map(|j| path.symmetry[*j].coords()[q])
            .collect();
        let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - y.iter().cloned().fold(f64::INFINITY, f64::min);
        if spread == 0.0 {
            limit.push(y[0]);
            continue;
        }
        let fit = linear_fit(&x, &y)?;
        let resid: f64 = x
            .iter()
            .zip(&y)
            .map(|(u, v)| (v - fit.slope * u - fit.intercept).abs())
            .fold(0.0, f64::max);
        if !fit.intercept.is_finite() {
            return Err(Error::Domain(format!("coordinate {q} has no finite limit")));
        }
        fit_error = fit_error.max(resid);
        limit.push(fit.intercept);
    }
    let sigma_limit = SymmetryParams::from_coords(path.trunc().n_axis, &limit)?;
    if !(sigma_limit.a > 0.0) {
        return Err(Error::Domain(format!(
            "limiting weight {} is not positive",
            sigma_limit.a
        )));
    }
    let rot = rotation(&sigma_limit);
    let rotation: Vec<f64> = (0..rot.nrows())
        .flat_map(|r| (0..rot.ncols()).map(move |c| (r, c)))
        .map(|(r, c)| rot[(r, c)])
        .collect();
    let distance_from_start = sigma_limit.distance(&path.symmetry[0]);
    Ok(TangentFlow {
        radius: cylinder_radius(sigma_limit.a),
        sigma_limit,
        rotation,
        fit_error,
        distance_from_start,
    })
}
