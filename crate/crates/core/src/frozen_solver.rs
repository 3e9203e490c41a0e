//! The frozen-coefficient linear problem: given a path `(σ⁰, ξ⁰)`, evolve
//! `ξ` under the linearised operator at `a⁰(τ)` with the nonlinearity frozen at
//! `ξ⁰`, and `σ` under the modulation equations.
//!
//! Coefficients are carried in the Hermite basis of the moving weight
//! `A = a⁰(τ)`, scaled as `d_α = A^{|α|/2} ĉ_α`. There the operator is diagonal
//! with eigenvalue `κ_α A`, and the motion of the basis couples `d_α` only to
//! `d_{α+2e_i}`, so levels are solved from the highest degree down:
//!
//! ```text
//! ḋ_α = -κ_α A d_α + A^{|α|/2} Ŝ_α - Ȧ/(2A²) Σ_i sqrt((α_i+1)(α_i+2)) d_{α+2e_i}
//! ```
//!
//! Stable levels run forward from the seed, the axial level is the bounded
//! solution of an unstable scalar ODE, the quadratic level is the bounded
//! solution of a neutral one, and the modulated levels vanish identically.

use crate::error::{Error, Result};
use crate::fit::bracket;
use crate::integrator::{tail_integral, ExponentTable, UniformGrid};
use crate::modulation::{
    modulated_cylinder_variation, modulation_split, orthogonality_residual, ModulationVector,
    SymmetryParams,
};
use crate::nonlinearity::nonlinear_remainder;
use crate::spectral_operator::{eigen_index, ModeFamily};
use crate::stable_manifold::CorrectionCoeffs;
use crate::weighted_space::{
    check_weight, gaussian_mass, pivot_norm, slot_frequency, sobolev_norm, SpectralField,
    Truncation,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A path `τ ↦ (σ(τ), σ̇(τ), ξ(τ))` on a uniform grid starting at `τ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowPath {
    pub taus: Vec<f64>,
    pub symmetry: Vec<SymmetryParams>,
    pub symmetry_rate: Vec<ModulationVector>,
    pub perturbation: Vec<SpectralField>,
}

impl FlowPath {
    /// `(σ, ξ) ≡ (σ0, 0)`.
    pub fn constant(
        sigma0: &SymmetryParams,
        grid: UniformGrid,
        trunc: Truncation,
        b: f64,
    ) -> Result<Self> {
        check_weight(b)?;
        if sigma0.n_axis != trunc.n_axis {
            return Err(Error::Shape(
                "symmetry parameters and truncation disagree on the axis count".into(),
            ));
        }
        let m = grid.len();
        Ok(Self {
            taus: grid.taus(),
            symmetry: vec![sigma0.clone(); m],
            symmetry_rate: vec![ModulationVector::zeros(trunc.n_axis); m],
            perturbation: vec![SpectralField::zeros(trunc, b); m],
        })
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn grid(&self) -> Result<UniformGrid> {
        UniformGrid::from_taus(&self.taus)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.taus.len();
        if self.symmetry.len() != m || self.symmetry_rate.len() != m || self.perturbation.len() != m
        {
            return Err(Error::Shape(
                "path components have different lengths".into(),
            ));
        }
        self.grid()?;
        let first = &self.perturbation[0];
        for (j, x) in self.perturbation.iter().enumerate() {
            first.check_compatible(x)?;
            if !x.is_finite() || !self.symmetry_rate[j].is_finite() {
                return Err(Error::Domain(format!("non-finite path entry at node {j}")));
            }
        }
        Ok(())
    }

    pub fn trunc(&self) -> Truncation {
        self.perturbation[0].trunc
    }

    pub fn basis_weight(&self) -> f64 {
        self.perturbation[0].basis_weight
    }

    pub fn a_path(&self) -> Vec<f64> {
        self.symmetry.iter().map(|s| s.a).collect()
    }

    /// Scale factor `λ(τ) = exp(-∫_0^τ a)`, normalised by `λ(0) = 1`.
    pub fn scale_factors(&self) -> Result<Vec<f64>> {
        let int = self.grid()?.cumulative(&self.a_path())?;
        Ok(int.iter().map(|v| (-v).exp()).collect())
    }

    /// `‖ξ(τ)‖_s` at weight 1/2 per node.
    pub fn perturbation_norms(&self, s: usize) -> Result<Vec<f64>> {
        self.perturbation
            .par_iter()
            .map(|x| sobolev_norm(x, 0.5, s))
            .collect()
    }

    /// Orthogonality residual of `ξ(τ)` against the modulated modes at `a(τ)`.
    pub fn orthogonality(&self) -> Result<Vec<f64>> {
        self.perturbation
            .par_iter()
            .zip(&self.symmetry)
            .map(|(x, s)| orthogonality_residual(x, s.a))
            .collect()
    }

    /// One CSV row per node: `tau, perturbation_norm, sigma coordinates, orthogonality`.
    pub fn to_csv(&self, s: usize) -> Result<String> {
        let n = self.trunc().n_axis;
        let norms = self.perturbation_norms(s)?;
        let orth = self.orthogonality()?;
        let mut out = String::from("tau,perturbation_norm");
        for l in 0..2 {
            for j in 0..n {
                out.push_str(&format!(",g_{}_{}", l + 1, j + 1));
            }
        }
        out.push_str(",z_1,z_2,a");
        for l in 0..2 {
            for j in 0..n {
                out.push_str(&format!(",dg_{}_{}", l + 1, j + 1));
            }
        }
        out.push_str(",dz_1,dz_2,da,orthogonality\n");
        for j in 0..self.len() {
            out.push_str(&format!("{:.10e},{:.10e}", self.taus[j], norms[j]));
            for v in self.symmetry[j]
                .coords()
                .iter()
                .chain(&self.symmetry_rate[j].coords())
            {
                out.push_str(&format!(",{v:.15e}"));
            }
            out.push_str(&format!(",{:.3e}\n", orth[j]));
        }
        Ok(out)
    }
}

/// The frozen problem: the path `base`, the seed `eta0`, and either prescribed
/// corrections or (`None`) the bounded choice.
#[derive(Debug, Clone)]
pub struct FrozenProblem {
    pub base: FlowPath,
    pub initial: SpectralField,
    pub corrections: Option<CorrectionCoeffs>,
    /// Admissibility window: `|a(τ) - a0| ≤ delta`.
    pub delta: f64,
}

/// Output of [`solve_frozen`].
#[derive(Debug, Clone)]
pub struct FrozenSolution {
    pub path: FlowPath,
    /// Axial and quadratic components of `ξ(0)` at `a0`.
    pub corrections: CorrectionCoeffs,
    /// Largest rate `|ḋ_α|` at which the modulated coefficients would drift
    /// with the computed `σ̇`; zero when the modulation equations are consistent.
    pub modulation_defect: f64,
    /// Largest tail estimate used by the bounded solves.
    pub tail: f64,
}

/// Tolerance for the seed's components along the modes at `a0`.
pub const SEED_ORTHOGONALITY: f64 = 1e-10;

/// How a coefficient level is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Stable,
    Axial,
    Quadratic,
    Modulated,
}

fn classify(abs: usize, m: usize) -> Class {
    match ModeFamily::of_basis(abs, m) {
        Some(ModeFamily::Axial) => Class::Axial,
        Some(ModeFamily::Quadratic) => Class::Quadratic,
        Some(_) => Class::Modulated,
        None => Class::Stable,
    }
}

/// Largest component of `phi` along any of the unstable or neutral modes at `a`.
pub fn mode_residual(phi: &SpectralField, a: f64) -> Result<f64> {
    let f = phi.rebased(a)?;
    let trunc = f.trunc;
    let mass = gaussian_mass(trunc.n_axis, a) / (2.0 * std::f64::consts::PI);
    let mut worst = 0.0f64;
    for i in 0..trunc.len() {
        let (alpha, slot) = trunc.unflatten(i);
        let abs: usize = alpha.iter().sum();
        if ModeFamily::of_basis(abs, slot_frequency(slot)).is_some() {
            let norm = (mass * crate::weighted_space::fourier_norm_sq(slot)).sqrt();
            worst = worst.max(f.coeffs[i].abs() * norm);
        }
    }
    Ok(worst)
}

/// Bounded solution of `ẋ = a(τ)x + f(τ)` on the grid `taus`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedSolution {
    pub x0: f64,
    pub trajectory: Vec<f64>,
    /// Contribution of `[τ_max, ∞)` from the fitted power-law tail.
    pub tail: f64,
}

/// `x(τ) = -∫_τ^∞ f(s) exp(-∫_τ^s a) ds` for `a ≥ c > 0`, on a uniform grid.
pub fn ode_bounded_solve(taus: &[f64], a_path: &[f64], f_path: &[f64]) -> Result<BoundedSolution> {
    let grid = UniformGrid::from_taus(taus)?;
    if let Some(j) = a_path.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!(
            "rate must be positive, got {} at node {j}",
            a_path[j]
        )));
    }
    bounded(&grid, a_path, f_path, 1.0)
}

/// `γ(τ) = -∫_τ^∞ h` on a uniform grid.
pub fn backward_integral(taus: &[f64], h_path: &[f64]) -> Result<BoundedSolution> {
    let grid = UniformGrid::from_taus(taus)?;
    bounded(&grid, &vec![0.0; grid.len()], h_path, 0.0)
}

fn bounded(
    grid: &UniformGrid,
    a_path: &[f64],
    f_path: &[f64],
    kappa: f64,
) -> Result<BoundedSolution> {
    let table = grid.exponents(a_path)?;
    bounded_with(&table, a_path, f_path, kappa)
}

fn bounded_with(
    table: &ExponentTable,
    a_path: &[f64],
    f_path: &[f64],
    kappa: f64,
) -> Result<BoundedSolution> {
    if f_path.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("source path is not finite".into()));
    }
    let a_end = kappa * a_path[a_path.len() - 1];
    let tail = tail_integral(&table.grid, f_path, a_end)?;
    let trajectory = table.backward(kappa, f_path, tail.value)?;
    Ok(BoundedSolution {
        x0: trajectory[0],
        trajectory,
        tail: tail.value,
    })
}

/// Runs the frozen problem.
pub fn solve_frozen(p: &FrozenProblem) -> Result<FrozenSolution> {
    let base = &p.base;
    base.validate()?;
    let grid = base.grid()?;
    let trunc = base.trunc();
    let b = base.basis_weight();
    let n = trunc.n_axis;
    p.initial.check_compatible(&base.perturbation[0])?;
    let a0 = base.symmetry[0].a;
    if !(a0 >= 0.5 + 2.0 * p.delta) {
        return Err(Error::Precondition(format!(
            "a0 = {a0} is below 1/2 + 2·delta"
        )));
    }
    let seed_res = mode_residual(&p.initial, a0)?;
    if seed_res > SEED_ORTHOGONALITY {
        return Err(Error::Precondition(format!(
            "seed has a mode component {seed_res:.3e} at a0"
        )));
    }
    if let Some(c) = &p.corrections {
        if c.n_axis() != n {
            return Err(Error::Shape(
                "corrections do not match the axis count".into(),
            ));
        }
    }

    let m = grid.len();
    let big_a = base.a_path();
    let big_a_dot: Vec<f64> = base.symmetry_rate.iter().map(|s| s.da).collect();
    let lambda = base.scale_factors()?;

    // frozen nonlinearity in the moving basis
    let source: Vec<SpectralField> = (0..m)
        .into_par_iter()
        .map(|j| nonlinear_remainder(big_a[j], &base.perturbation[j].rebased(big_a[j])?))
        .collect::<Result<_>>()?;

    let len = trunc.len();
    let mut order: Vec<usize> = (0..len).collect();
    let degree = |i: usize| -> usize { trunc.unflatten(i).0.iter().sum() };
    order.sort_by_key(|i| std::cmp::Reverse(degree(*i)));

    let seed = p.initial.rebased(a0)?;
    let given = match &p.corrections {
        Some(c) => Some(c.field(a0, trunc, a0)?),
        None => None,
    };

    let table = grid.exponents(&big_a)?;
    let mut d: Vec<Vec<f64>> = vec![Vec::new(); len];
    let mut tail_max = 0.0f64;
    for &i in &order {
        let (alpha, slot) = trunc.unflatten(i);
        let abs: usize = alpha.iter().sum();
        let class = classify(abs, slot_frequency(slot));
        if class == Class::Modulated {
            d[i] = vec![0.0; m];
            continue;
        }
        let half = abs as f64 / 2.0;
        let mut r: Vec<f64> = (0..m)
            .map(|j| -big_a[j].powf(half) * source[j].coeffs[i])
            .collect();
        for ax in 0..n {
            if alpha[ax] + 2 > trunc.n_y {
                continue;
            }
            let mut up = alpha.clone();
            up[ax] += 2;
            let k = trunc.index(&up, slot);
            let w = (((alpha[ax] + 1) * (alpha[ax] + 2)) as f64).sqrt();
            for j in 0..m {
                r[j] -= big_a_dot[j] / (2.0 * big_a[j] * big_a[j]) * w * d[k][j];
            }
        }
        let kappa = eigen_index(abs, slot_frequency(slot)) as f64;
        let start = |f: &SpectralField| a0.powf(half) * f.coeffs[i];
        d[i] = match (class, &given) {
            (Class::Stable, _) => table.forward(kappa, &r, start(&seed))?,
            (_, Some(g)) => table.forward(kappa, &r, start(g))?,
            (Class::Axial, None) => {
                let sol = bounded_with(&table, &big_a, &r, -kappa)?;
                tail_max = tail_max.max(sol.tail.abs());
                sol.trajectory
            }
            (Class::Quadratic, None) => {
                let sol = bounded_with(&table, &big_a, &r, 0.0)?;
                tail_max = tail_max.max(sol.tail.abs());
                sol.trajectory
            }
            (Class::Modulated, _) => unreachable!("handled above"),
        };
        if d[i].iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                delta: p.delta,
                reason: format!("coefficient {i} overflowed"),
            });
        }
    }

    // fields in the moving basis, then σ̇ from the modulation equations
    let xi_moving: Vec<SpectralField> = (0..m)
        .into_par_iter()
        .map(|j| {
            let coeffs: Vec<f64> = (0..len)
                .map(|i| d[i][j] * big_a[j].powf(-(degree(i) as f64) / 2.0))
                .collect();
            SpectralField::from_coeffs(trunc, big_a[j], coeffs)
        })
        .collect::<Result<_>>()?;

    let rates: Vec<(ModulationVector, f64)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let (f, mm) = modulation_split(
                &base.symmetry[j],
                lambda[j],
                big_a_dot[j],
                &xi_moving[j],
                &source[j],
            )?;
            let rate = f.add(&mm);
            let defect = modulated_drift(
                &base.symmetry[j],
                lambda[j],
                &rate,
                &source[j],
                &d,
                j,
                big_a_dot[j],
            )?;
            Ok((rate, defect))
        })
        .collect::<Result<_>>()?;
    let modulation_defect = rates.iter().fold(0.0f64, |acc, (_, e)| acc.max(*e));
    let sigma_dot: Vec<ModulationVector> = rates.into_iter().map(|(r, _)| r).collect();

    let coords0 = SymmetryParams::identity(n, a0).coords();
    let k = coords0.len();
    let rate_cols: Vec<Vec<f64>> = (0..k)
        .map(|c| sigma_dot.iter().map(|r| r.coords()[c]).collect())
        .collect();
    let ints: Vec<Vec<f64>> = rate_cols
        .iter()
        .map(|c| grid.cumulative(c))
        .collect::<Result<_>>()?;
    let mut sigma = Vec::with_capacity(m);
    for j in 0..m {
        let c: Vec<f64> = (0..k).map(|q| coords0[q] + ints[q][j]).collect();
        let s = SymmetryParams::from_coords(n, &c)?;
        if (s.a - a0).abs() > p.delta {
            return Err(Error::Admissibility {
                tau: base.taus[j],
                reason: format!("a = {} left [a0 - delta, a0 + delta] around a0 = {a0}", s.a),
            });
        }
        sigma.push(s);
    }

    let xi: Vec<SpectralField> = xi_moving
        .par_iter()
        .map(|f| f.rebased(b))
        .collect::<Result<_>>()?;
    let corrections = CorrectionCoeffs::from_field(&xi_moving[0], a0)?;
    Ok(FrozenSolution {
        path: FlowPath {
            taus: base.taus.clone(),
            symmetry: sigma,
            symmetry_rate: sigma_dot,
            perturbation: xi,
        },
        corrections,
        modulation_defect,
        tail: tail_max,
    })
}

/// `max |ḋ_α|` over modulated `α`, given `σ̇`: the rate at which orthogonality
/// would be lost if the modulated coefficients were evolved instead of pinned.
fn modulated_drift(
    sigma: &SymmetryParams,
    lambda: f64,
    rate: &ModulationVector,
    source: &SpectralField,
    d: &[Vec<f64>],
    j: usize,
    a_dot: f64,
) -> Result<f64> {
    let trunc = source.trunc;
    let a = sigma.a;
    let dw = modulated_cylinder_variation(sigma, rate, lambda, trunc, a)?;
    let mut worst = 0.0f64;
    for i in 0..trunc.len() {
        let (alpha, slot) = trunc.unflatten(i);
        let abs: usize = alpha.iter().sum();
        if classify(abs, slot_frequency(slot)) != Class::Modulated {
            continue;
        }
        let mut rhs = -a.powf(abs as f64 / 2.0) * (source.coeffs[i] + dw.coeffs[i]);
        for ax in 0..trunc.n_axis {
            if alpha[ax] + 2 > trunc.n_y {
                continue;
            }
            let mut up = alpha.clone();
            up[ax] += 2;
            let k = trunc.index(&up, slot);
            rhs -= a_dot / (2.0 * a * a)
                * (((alpha[ax] + 1) * (alpha[ax] + 2)) as f64).sqrt()
                * d[k][j];
        }
        // normalise to the weighted norm of the basis function
        let scale = a.powf(-(abs as f64) / 2.0)
            * (gaussian_mass(trunc.n_axis, a) / (2.0 * std::f64::consts::PI)
                * crate::weighted_space::fourier_norm_sq(slot))
            .sqrt();
        worst = worst.max(rhs.abs() * scale);
    }
    Ok(worst)
}

/// Ratio `bound / value` per node for one decay condition; infinite where the
/// value vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub margins: Vec<f64>,
    pub worst_node: usize,
    pub worst_margin: f64,
}

impl ConditionReport {
    fn new(margins: Vec<f64>) -> Self {
        let (worst_node, worst_margin) =
            margins
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |(bj, bv), (j, v)| if *v < bv { (j, *v) } else { (bj, bv) },
                );
        Self {
            margins,
            worst_node,
            worst_margin,
        }
    }

    pub fn pass(&self) -> bool {
        self.worst_margin >= 1.0
    }
}

/// Decay conditions of the admissible path space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    /// `|σ̇| ≤ c0 δ ⟨τ⟩^{-2}`.
    pub modulation: ConditionReport,
    /// `‖ξ‖_s ≤ δ ⟨τ⟩^{-2}`.
    pub decay: ConditionReport,
    /// `‖ξ‖²_{s,b} ≤ c` at the pivot weight.
    pub pivot: ConditionReport,
    /// Smallest `c0` for which the modulation condition holds.
    pub min_c0: f64,
    pub pass: bool,
}

fn margin(bound: f64, value: f64) -> f64 {
    if value == 0.0 {
        f64::INFINITY
    } else {
        bound / value
    }
}

pub fn membership_check(
    path: &FlowPath,
    delta: f64,
    c0: f64,
    c: f64,
    s: usize,
) -> Result<MembershipReport> {
    path.validate()?;
    let norms = path.perturbation_norms(s)?;
    let pivots: Vec<f64> = path
        .perturbation
        .par_iter()
        .map(|x| pivot_norm(x, delta, s))
        .collect::<Result<_>>()?;
    let mut m1 = Vec::with_capacity(path.len());
    let mut m2 = Vec::with_capacity(path.len());
    let mut m3 = Vec::with_capacity(path.len());
    let mut min_c0 = 0.0f64;
    for j in 0..path.len() {
        let w = bracket(path.taus[j]).powi(-2);
        let rate = path.symmetry_rate[j].norm();
        m1.push(margin(c0 * delta * w, rate));
        m2.push(margin(delta * w, norms[j]));
        m3.push(margin(c, pivots[j]));
        min_c0 = min_c0.max(rate / (delta * w));
    }
    let modulation = ConditionReport::new(m1);
    let decay = ConditionReport::new(m2);
    let pivot = ConditionReport::new(m3);
    let pass = modulation.pass() && decay.pass() && pivot.pass();
    Ok(MembershipReport {
        modulation,
        decay,
        pivot,
        min_c0,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (Truncation, UniformGrid) {
        (
            Truncation::new(1, 10, 3),
            UniformGrid::new(0.05, 10.0).unwrap(),
        )
    }

    #[test]
    fn static_problem_stays_static() {
        let (tr, grid) = small();
        let s0 = SymmetryParams::identity(1, 0.52);
        let base = FlowPath::constant(&s0, grid, tr, 0.5).unwrap();
        let p = FrozenProblem {
            base: base.clone(),
            initial: SpectralField::zeros(tr, 0.5),
            corrections: None,
            delta: 0.01,
        };
        let sol = solve_frozen(&p).unwrap();
        assert_eq!(sol.path, base);
        assert_eq!(sol.corrections, CorrectionCoeffs::zeros(1));
    }

    #[test]
    fn single_stable_mode_decays_exactly() {
        let (tr, grid) = small();
        let a0 = 0.52;
        let base = FlowPath::constant(&SymmetryParams::identity(1, a0), grid, tr, 0.5).unwrap();
        // h_3(sqrt(a0) y) cos 2θ: index |α| + m² - 2 = 5
        let mut e = SpectralField::zeros(tr, a0);
        e.set(&[3], 3, 1e-3);
        let eta0 = e.rebased(0.5).unwrap();
        let p = FrozenProblem {
            base,
            initial: eta0.clone(),
            corrections: None,
            delta: 0.01,
        };
        let sol = solve_frozen(&p).unwrap();
        for (t, x) in sol.path.taus.iter().zip(&sol.path.perturbation) {
            let want = eta0.scaled((-5.0 * a0 * t).exp());
            assert!(x.sub(&want).unwrap().max_abs() < 1e-15, "{t}");
        }
    }

    #[test]
    fn prescribed_corrections_grow_along_unstable_levels() {
        let (tr, grid) = small();
        let a0 = 0.52;
        let base = FlowPath::constant(&SymmetryParams::identity(1, a0), grid, tr, 0.5).unwrap();
        let c = CorrectionCoeffs {
            axial: vec![1e-6],
            quadratic: vec![2e-6],
        };
        let p = FrozenProblem {
            base,
            initial: SpectralField::zeros(tr, 0.5),
            corrections: Some(c.clone()),
            delta: 0.01,
        };
        let sol = solve_frozen(&p).unwrap();
        let end = CorrectionCoeffs::from_field(sol.path.perturbation.last().unwrap(), a0).unwrap();
        let t = grid.tau_max();
        assert!((end.axial[0] - c.axial[0] * (a0 * t).exp()).abs() < 1e-12 * (a0 * t).exp());
        assert!((end.quadratic[0] - c.quadratic[0]).abs() < 1e-18);
    }

    #[test]
    fn membership_flags_the_violating_node() {
        let (tr, grid) = small();
        let mut path =
            FlowPath::constant(&SymmetryParams::identity(1, 0.52), grid, tr, 0.5).unwrap();
        let ok = membership_check(&path, 0.01, 10.0, 1.0, 2).unwrap();
        assert!(ok.pass && ok.decay.worst_margin.is_infinite());
        let mut bump = SpectralField::zeros(tr, 0.5);
        bump.coeffs[0] = 1.0;
        path.perturbation[17] = bump;
        let bad = membership_check(&path, 0.01, 10.0, 1.0, 2).unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.decay.worst_node, 17);
    }

    #[test]
    fn bounded_oracle_exponential_source() {
        let grid = UniformGrid::new(0.01, 40.0).unwrap();
        let taus = grid.taus();
        let f: Vec<f64> = taus.iter().map(|t| (-2.0 * t).exp()).collect();
        let sol = ode_bounded_solve(&taus, &vec![1.0; grid.len()], &f).unwrap();
        assert!((sol.x0 + 1.0 / 3.0).abs() < 1e-10, "{}", sol.x0 + 1.0 / 3.0);
        for (t, x) in taus.iter().zip(&sol.trajectory) {
            assert!((x + (-2.0 * t).exp() / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_integral_of_bracket_power() {
        let grid = UniformGrid::new(0.01, 40.0).unwrap();
        let taus = grid.taus();
        let h: Vec<f64> = taus.iter().map(|t| bracket(*t).powi(-4)).collect();
        let sol = backward_integral(&taus, &h).unwrap();
        // ∫_0^∞ (1+t²)^{-2} dt = π/4
        assert!(
            (sol.x0 + std::f64::consts::FRAC_PI_4).abs() < 1e-8,
            "{}",
            sol.x0 + std::f64::consts::FRAC_PI_4
        );
    }

    #[test]
    fn non_integrable_backward_source_is_rejected() {
        let grid = UniformGrid::new(0.1, 40.0).unwrap();
        let taus = grid.taus();
        let h: Vec<f64> = taus.iter().map(|t| bracket(*t).powf(-0.5)).collect();
        assert!(matches!(
            backward_integral(&taus, &h),
            Err(Error::TailFit(_))
        ));
    }
}
