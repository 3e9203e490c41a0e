//! Symmetry parameters and the modulation equations that keep the perturbation
//! orthogonal to the modes generated by dilation, translation and tilt.
//!
//! The orthogonality conditions `⟨ξ, Σ_j(σ)⟩_a = 0` are differentiated in time
//! including the derivative of the Gaussian weight itself, which contributes
//! `-(ȧ/2)⟨ξ, |y|² Σ_j⟩_a`. With that term the conditions are preserved exactly.

use crate::error::{Error, Result};
use crate::nonlinearity::{cylinder_radius, nonlinear_remainder};
use crate::spectral_operator::{eigenvalue, ModeFamily};
use crate::weighted_space::{
    check_weight, fourier_norm_sq, gaussian_mass, inner_product, SpectralField, Truncation,
};
use serde::{Deserialize, Serialize};

/// `σ = (g, z, a)`: the tilt block `g[l][j]` (rotation of `y^j` towards `ω^l`),
/// the transversal shift `z`, and the dilation weight `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryParams {
    pub n_axis: usize,
    /// Row-major `2 × n_axis`: entry `[l * n_axis + j]`.
    pub g_tilt: Vec<f64>,
    pub z: [f64; 2],
    pub a: f64,
}

impl SymmetryParams {
    pub fn identity(n_axis: usize, a: f64) -> Self {
        Self {
            n_axis,
            g_tilt: vec![0.0; 2 * n_axis],
            z: [0.0; 2],
            a,
        }
    }

    pub fn tilt(&self, l: usize, j: usize) -> f64 {
        self.g_tilt[l * self.n_axis + j]
    }

    /// Concatenated coordinates `(g, z, a)`.
    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.g_tilt.clone();
        v.extend_from_slice(&self.z);
        v.push(self.a);
        v
    }

    pub fn from_coords(n_axis: usize, c: &[f64]) -> Result<Self> {
        if c.len() != 2 * n_axis + 3 {
            return Err(Error::Shape(format!(
                "expected {} coordinates, got {}",
                2 * n_axis + 3,
                c.len()
            )));
        }
        Ok(Self {
            n_axis,
            g_tilt: c[..2 * n_axis].to_vec(),
            z: [c[2 * n_axis], c[2 * n_axis + 1]],
            a: c[2 * n_axis + 2],
        })
    }

    /// Euclidean distance between coordinate vectors.
    pub fn distance(&self, other: &Self) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `σ + h·σ̇`.
    pub fn advanced(&self, rate: &ModulationVector, h: f64) -> Self {
        let mut out = self.clone();
        for (g, d) in out.g_tilt.iter_mut().zip(&rate.dg) {
            *g += h * d;
        }
        out.z[0] += h * rate.dz[0];
        out.z[1] += h * rate.dz[1];
        out.a += h * rate.da;
        out
    }

    /// Checks `a > 0` and `λ > 0`.
    pub fn check_scale(&self, lambda: f64) -> Result<()> {
        check_weight(self.a)?;
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        Ok(())
    }

    /// Checks `a > 0` and boundedness `|z|/λ < sqrt(1/a)`.
    pub fn check_bounded(&self, lambda: f64) -> Result<()> {
        self.check_scale(lambda)?;
        let zn = (self.z[0].powi(2) + self.z[1].powi(2)).sqrt();
        if zn / lambda >= cylinder_radius(self.a) {
            return Err(Error::Domain(format!(
                "shift |z|/λ = {} reaches the cylinder radius {}",
                zn / lambda,
                cylinder_radius(self.a)
            )));
        }
        Ok(())
    }
}

/// Tangent vector `σ̇ = (ġ, ż, ȧ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationVector {
    pub dg: Vec<f64>,
    pub dz: [f64; 2],
    pub da: f64,
}

impl ModulationVector {
    pub fn zeros(n_axis: usize) -> Self {
        Self {
            dg: vec![0.0; 2 * n_axis],
            dz: [0.0; 2],
            da: 0.0,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.dg.clone();
        v.extend_from_slice(&self.dz);
        v.push(self.da);
        v
    }

    pub fn from_coords(n_axis: usize, c: &[f64]) -> Result<Self> {
        if c.len() != 2 * n_axis + 3 {
            return Err(Error::Shape(format!(
                "expected {} coordinates, got {}",
                2 * n_axis + 3,
                c.len()
            )));
        }
        Ok(Self {
            dg: c[..2 * n_axis].to_vec(),
            dz: [c[2 * n_axis], c[2 * n_axis + 1]],
            da: c[2 * n_axis + 2],
        })
    }

    pub fn norm(&self) -> f64 {
        self.coords().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        let c: Vec<f64> = self
            .coords()
            .iter()
            .zip(other.coords())
            .map(|(x, y)| x + y)
            .collect();
        Self::from_coords(self.dg.len() / 2, &c).expect("matching lengths")
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|v| v.is_finite())
    }
}

/// `y^j` stored at basis weight `b`.
fn axial(trunc: Truncation, b: f64, j: usize, slot: usize) -> SpectralField {
    let mut alpha = vec![0usize; trunc.n_axis];
    alpha[j] = 1;
    let mut f = SpectralField::zeros(trunc, b);
    f.set(&alpha, slot, 1.0 / b.sqrt());
    f
}

/// `W(σ) = sqrt(1/a) + g[l][j] y^j ω^l + ⟨z, λ^{-1} ω⟩`.
pub fn modulated_cylinder(
    sigma: &SymmetryParams,
    lambda: f64,
    trunc: Truncation,
    b: f64,
) -> Result<SpectralField> {
    sigma.check_bounded(lambda)?;
    check_dims(sigma.n_axis, trunc)?;
    let mut w = SpectralField::constant(trunc, b, cylinder_radius(sigma.a));
    add_tangent(&mut w, sigma, &sigma.g_tilt, &sigma.z, lambda)?;
    Ok(w)
}

fn check_dims(n_axis: usize, trunc: Truncation) -> Result<()> {
    if n_axis != trunc.n_axis {
        return Err(Error::Shape(format!(
            "parameters for {n_axis} axes, truncation has {}",
            trunc.n_axis
        )));
    }
    if trunc.n_y < 1 || trunc.m_omega < 1 {
        return Err(Error::Shape("truncation cannot hold y^j ω^l".into()));
    }
    Ok(())
}

fn add_tangent(
    w: &mut SpectralField,
    sigma: &SymmetryParams,
    g: &[f64],
    z: &[f64; 2],
    lambda: f64,
) -> Result<()> {
    let trunc = w.trunc;
    let b = w.basis_weight;
    let zero = vec![0usize; trunc.n_axis];
    for l in 0..2 {
        let slot = l + 1;
        let cur = w.get(&zero, slot);
        w.set(&zero, slot, cur + z[l] / lambda);
        for j in 0..sigma.n_axis {
            *w = w.axpy(g[l * sigma.n_axis + j], &axial(trunc, b, j, slot))?;
        }
    }
    Ok(())
}

/// `∂_σW(σ) σ̇ = -(1/2) a^{-3/2} ȧ + ġ[l][j] y^j ω^l + λ^{-1}⟨ż, ω⟩`. Independent of `z`,
/// so only `a > 0` and `λ > 0` are required.
pub fn modulated_cylinder_variation(
    sigma: &SymmetryParams,
    rate: &ModulationVector,
    lambda: f64,
    trunc: Truncation,
    b: f64,
) -> Result<SpectralField> {
    sigma.check_scale(lambda)?;
    check_dims(sigma.n_axis, trunc)?;
    if rate.dg.len() != 2 * sigma.n_axis {
        return Err(Error::Shape("tilt rate has the wrong length".into()));
    }
    let mut w = SpectralField::constant(trunc, b, -0.5 * sigma.a.powf(-1.5) * rate.da);
    add_tangent(&mut w, sigma, &rate.dg, &rate.dz, lambda)?;
    Ok(w)
}

/// One modulated direction: the pairing function `P`, its eigenvalue, the
/// explicit time derivative `∂_τP` per unit (ȧ for the dilation, 1 otherwise).
struct Direction {
    field: SpectralField,
    eigenvalue: f64,
    /// `⟨∂_σW e_j, P⟩_a` for the coordinate `e_j` this direction drives.
    pairing: f64,
    /// Explicit `∂_τ P` excluding the weight derivative.
    explicit_rate: SpectralField,
    /// `|y|² P`.
    radial: SpectralField,
}

fn radial_times(f: &SpectralField) -> Result<SpectralField> {
    let mut out = SpectralField::zeros(f.trunc, f.basis_weight);
    for i in 0..f.trunc.n_axis {
        out = out.add(&f.mul_y(i).mul_y(i))?;
    }
    Ok(out)
}

/// Directions in coordinate order `(g, z, a)`, built at basis weight `a`.
fn directions(
    sigma: &SymmetryParams,
    lambda: f64,
    a_dot: f64,
    trunc: Truncation,
) -> Result<Vec<Direction>> {
    let a = sigma.a;
    let n = sigma.n_axis;
    let mass = gaussian_mass(n, a);
    let mut out = Vec::with_capacity(2 * n + 3);
    for l in 0..2 {
        for j in 0..n {
            let p = axial(trunc, a, j, l + 1);
            let norm_sq = mass / a * fourier_norm_sq(l + 1) / (2.0 * std::f64::consts::PI);
            out.push(Direction {
                radial: radial_times(&p)?,
                explicit_rate: SpectralField::zeros(trunc, a),
                eigenvalue: eigenvalue(1, 1, a),
                pairing: norm_sq,
                field: p,
            });
        }
    }
    for l in 0..2 {
        let mut p = SpectralField::zeros(trunc, a);
        p.set(&vec![0; n], l + 1, 1.0 / lambda);
        let norm_sq =
            mass * fourier_norm_sq(l + 1) / (2.0 * std::f64::consts::PI) / (lambda * lambda);
        out.push(Direction {
            radial: radial_times(&p)?,
            explicit_rate: p.scaled(a),
            eigenvalue: eigenvalue(0, 1, a),
            pairing: norm_sq,
            field: p,
        });
    }
    let c = -0.5 * a.powf(-1.5);
    let p = SpectralField::constant(trunc, a, c);
    out.push(Direction {
        radial: radial_times(&p)?,
        explicit_rate: SpectralField::constant(trunc, a, 0.75 * a.powf(-2.5) * a_dot),
        eigenvalue: eigenvalue(0, 0, a),
        pairing: c * c * mass,
        field: p,
    });
    Ok(out)
}

/// Splits the modulation velocity into the part driven by `ξ` and the part
/// driven by the nonlinearity `n`, with the weight derivative evaluated at the
/// frame rate `a_dot`. `xi` and `n` may be stored at any basis weight.
pub fn modulation_split(
    sigma: &SymmetryParams,
    lambda: f64,
    a_dot: f64,
    xi: &SpectralField,
    n: &SpectralField,
) -> Result<(ModulationVector, ModulationVector)> {
    sigma.check_scale(lambda)?;
    check_dims(sigma.n_axis, xi.trunc)?;
    let a = sigma.a;
    let xi_a = xi.rebased(a)?;
    let n_a = n.rebased(a)?;
    let dirs = directions(sigma, lambda, a_dot, xi.trunc)?;
    let mut f = Vec::with_capacity(dirs.len());
    let mut m = Vec::with_capacity(dirs.len());
    for d in &dirs {
        let lin = -d.eigenvalue * inner_product(&xi_a, &d.field, a)?
            + inner_product(&xi_a, &d.explicit_rate, a)?
            - 0.5 * a_dot * inner_product(&xi_a, &d.radial, a)?;
        let non = -inner_product(&n_a, &d.field, a)?;
        if d.pairing == 0.0 {
            return Err(Error::Domain("vanishing modulation normalisation".into()));
        }
        f.push(lin / d.pairing);
        m.push(non / d.pairing);
    }
    Ok((
        ModulationVector::from_coords(sigma.n_axis, &f)?,
        ModulationVector::from_coords(sigma.n_axis, &m)?,
    ))
}

/// Result of [`modulation_rhs`]: `total = linear + nonlinear` coordinatewise.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationRhs {
    pub total: ModulationVector,
    pub linear: ModulationVector,
    pub nonlinear: ModulationVector,
    pub passes: usize,
}

/// Passes allowed for the implicit dependence on `ȧ`.
pub const MAX_PASSES: usize = 50;

/// Solves the modulation equations at `(σ, ξ)`. The weight-derivative term
/// depends on `ȧ` itself, so passes repeat (at least two) until `ȧ` is stable.
pub fn modulation_rhs(
    sigma: &SymmetryParams,
    lambda: f64,
    xi: &SpectralField,
) -> Result<ModulationRhs> {
    let n = nonlinear_remainder(sigma.a, xi)?;
    modulation_rhs_with(sigma, lambda, xi, &n)
}

/// [`modulation_rhs`] with the nonlinearity supplied.
pub fn modulation_rhs_with(
    sigma: &SymmetryParams,
    lambda: f64,
    xi: &SpectralField,
    n: &SpectralField,
) -> Result<ModulationRhs> {
    let mut a_dot = 0.0;
    for pass in 1..=MAX_PASSES {
        let (f, m) = modulation_split(sigma, lambda, a_dot, xi, n)?;
        let total = f.add(&m);
        let next = total.da;
        let settled = (next - a_dot).abs() <= 1e-15 * (1.0 + next.abs());
        a_dot = next;
        if pass >= 2 && settled {
            return Ok(ModulationRhs {
                total,
                linear: f,
                nonlinear: m,
                passes: pass,
            });
        }
    }
    Err(Error::Divergence {
        delta: f64::NAN,
        reason: "modulation passes did not settle".into(),
    })
}

/// Largest `|⟨ξ, Σ⟩_a| / ‖Σ‖_{0,a}` over the dilation, translation and tilt modes.
pub fn orthogonality_residual(xi: &SpectralField, a: f64) -> Result<f64> {
    check_weight(a)?;
    let xi_a = xi.rebased(a)?;
    let trunc = xi.trunc;
    let nf = trunc.fourier_len();
    let mass = gaussian_mass(trunc.n_axis, a) / (2.0 * std::f64::consts::PI);
    let mut worst = 0.0f64;
    for i in 0..trunc.len() {
        let (alpha, slot) = trunc.unflatten(i);
        let abs: usize = alpha.iter().sum();
        let m = crate::weighted_space::slot_frequency(slot);
        if let Some(fam) = ModeFamily::of_basis(abs, m) {
            if ModeFamily::MODULATED.contains(&fam) {
                // each such mode is one basis function of weight a
                let norm = (mass * fourier_norm_sq(i % nf)).sqrt();
                worst = worst.max(xi_a.coeffs[i].abs() * norm);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_operator::build_modes;

    fn t1() -> Truncation {
        Truncation::new(2, 8, 3)
    }

    #[test]
    fn static_profile_is_constant() {
        let s = SymmetryParams::identity(2, 0.52);
        let w = modulated_cylinder(&s, 1.7, t1(), 0.5).unwrap();
        let mut want = SpectralField::zeros(t1(), 0.5);
        want.coeffs[0] = cylinder_radius(0.52);
        assert_eq!(w, want);
    }

    #[test]
    fn tangent_lies_in_modulated_span() {
        let s = SymmetryParams {
            n_axis: 2,
            g_tilt: vec![0.1, -0.2, 0.3, 0.05],
            z: [0.01, 0.02],
            a: 0.52,
        };
        let rate = ModulationVector {
            dg: vec![1.0, 2.0, -1.0, 0.5],
            dz: [0.3, -0.7],
            da: 0.2,
        };
        let dw = modulated_cylinder_variation(&s, &rate, 0.8, t1(), 0.5).unwrap();
        let set = build_modes(0.52, t1(), 0.5).unwrap();
        let mut rest = dw.clone();
        for fam in ModeFamily::MODULATED {
            rest = rest.sub(&set.project(&dw, fam).unwrap()).unwrap();
        }
        assert!(crate::weighted_space::weighted_l2_norm(&rest, 0.52).unwrap() < 1e-10);
    }

    #[test]
    fn residual_matches_projection_set() {
        let set = build_modes(0.53, t1(), 0.5).unwrap();
        let f = SpectralField::from_fn(t1(), 0.5, |y, t| {
            0.3 + y[0] * t.cos() + y[1] * y[1] * t.sin() - 0.2 * t.cos()
        });
        let want = set.max_component(&f, &ModeFamily::MODULATED).unwrap();
        assert!((orthogonality_residual(&f, 0.53).unwrap() - want).abs() < 1e-12 * want);
    }
}
