//! The linearised operator about the cylinder, its explicit non-positive modes,
//! the associated projections and the propagator on the stable range.
//!
//! `L(a) = -Δ_y + a⟨y,∇_y⟩ - a Δ_θ - 2a` acts on the Hermite functions of
//! weight `a` diagonally with eigenvalue `a|α| + a m² - 2a`. On a field stored
//! at another basis weight `b` it is upper triangular: the drift term couples
//! degree `p` to `p + 2` with strength `(a - b)`.

use crate::error::{Error, Result};
use crate::quadrature::hermite_values;
use crate::weighted_space::{
    check_weight, fourier_value, gaussian_mass, inner_product, slot_frequency,
    slot_signed_frequency, weighted_l2_norm, Grid, SpectralField, Truncation,
};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::fmt;

/// `λ(α, m) = a|α| + a m² - 2a`.
pub fn eigenvalue(alpha_abs: usize, m: usize, a: f64) -> f64 {
    a * (alpha_abs + m * m) as f64 - 2.0 * a
}

/// Integer part `|α| + m² - 2` of the eigenvalue, which does not depend on `a`.
pub fn eigen_index(alpha_abs: usize, m: usize) -> i64 {
    (alpha_abs + m * m) as i64 - 2
}

/// `L(a)` restricted to a truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizedOp {
    pub a: f64,
    pub trunc: Truncation,
}

impl LinearizedOp {
    pub fn new(a: f64, trunc: Truncation) -> Result<Self> {
        check_weight(a)?;
        Ok(Self { a, trunc })
    }

    pub fn apply(&self, phi: &SpectralField) -> Result<SpectralField> {
        if phi.trunc != self.trunc {
            return Err(Error::Shape("operator and field truncations differ".into()));
        }
        apply_linearized(phi, self.a)
    }
}

/// `(-Δ_y + a⟨y,∇_y⟩ - aΔ_θ - 2a) φ`, exact on the truncated basis.
pub fn apply_linearized(phi: &SpectralField, a: f64) -> Result<SpectralField> {
    let drift = drift_apply(phi, a)?;
    let nf = phi.trunc.fourier_len();
    let mut out = phi.clone();
    for (i, c) in out.coeffs.iter_mut().enumerate() {
        let m = slot_frequency(i % nf) as f64;
        *c *= a * m * m - 2.0 * a;
    }
    out.axpy(1.0, &drift)
}

/// `(-Δ_y + a⟨y,∇_y⟩) φ`, exact on the truncated basis.
pub fn drift_apply(phi: &SpectralField, a: f64) -> Result<SpectralField> {
    check_weight(a)?;
    let b = phi.basis_weight;
    let n = phi.trunc.hermite_len();
    let mut drift = vec![0.0; n * n];
    for p in 0..n {
        drift[p * n + p] = a * p as f64;
        if p + 2 < n {
            drift[p * n + p + 2] = (a - b) * (((p + 1) * (p + 2)) as f64).sqrt();
        }
    }
    let mut out = SpectralField::zeros(phi.trunc, b);
    for axis in 0..phi.trunc.n_axis {
        let d = phi.apply_hermite(axis, &drift);
        for (o, x) in out.coeffs.iter_mut().zip(&d.coeffs) {
            *o += x;
        }
    }
    Ok(out)
}

/// The five families of non-positive modes, indexed by `(m, n)`: `m` the
/// polynomial degree in `y`, `n` the angular order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeFamily {
    /// `(0,0)`: the constant, generated by dilation.
    Dilation,
    /// `(0,1)`: `ω^l`, generated by transversal translation.
    Translation,
    /// `(1,0)`: `y^i`, the unstable axial directions.
    Axial,
    /// `(1,1)`: `y^i ω^l`, generated by tilting the axis.
    Tilt,
    /// `(2,0)`: `a y^i y^j - δ_ij`, the neutral quadratic directions.
    Quadratic,
}

impl ModeFamily {
    pub const ALL: [ModeFamily; 5] = [
        ModeFamily::Dilation,
        ModeFamily::Translation,
        ModeFamily::Axial,
        ModeFamily::Tilt,
        ModeFamily::Quadratic,
    ];

    /// Families held at zero by the modulation equations.
    pub const MODULATED: [ModeFamily; 3] = [
        ModeFamily::Dilation,
        ModeFamily::Translation,
        ModeFamily::Tilt,
    ];

    pub fn label(&self) -> (usize, usize) {
        match self {
            ModeFamily::Dilation => (0, 0),
            ModeFamily::Translation => (0, 1),
            ModeFamily::Axial => (1, 0),
            ModeFamily::Tilt => (1, 1),
            ModeFamily::Quadratic => (2, 0),
        }
    }

    pub fn from_label(m: usize, n: usize) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.label() == (m, n))
            .ok_or_else(|| Error::Domain(format!("no mode family labelled ({m},{n})")))
    }

    /// Family of the Hermite(a) ⊗ Fourier basis element `(|α|, m)`, if any.
    pub fn of_basis(alpha_abs: usize, m: usize) -> Option<Self> {
        match (alpha_abs, m) {
            (0, 0) => Some(ModeFamily::Dilation),
            (0, 1) => Some(ModeFamily::Translation),
            (1, 0) => Some(ModeFamily::Axial),
            (1, 1) => Some(ModeFamily::Tilt),
            (2, 0) => Some(ModeFamily::Quadratic),
            _ => None,
        }
    }
}

impl fmt::Display for ModeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (m, n) = self.label();
        write!(f, "({m},{n})")
    }
}

/// Family plus the axis indices `i ≤ j` and angular index `l` (1-based, 0 if unused).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub family: ModeFamily,
    pub i: usize,
    pub j: usize,
    pub l: usize,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(i={},j={},l={})", self.family, self.i, self.j, self.l)
    }
}

/// One explicit eigenfunction with its eigenvalue and prefactor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenMode {
    pub label: ModeLabel,
    pub eigenvalue: f64,
    pub field: SpectralField,
    pub normalization: f64,
}

/// All non-positive modes at one weight, with projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    pub a: f64,
    pub modes: Vec<EigenMode>,
    /// Numerical rank of the Gram matrix of `modes`.
    pub gram_rank: usize,
}

/// `‖y^i‖²_{0,a}`.
pub fn linear_norm_sq(n_axis: usize, a: f64) -> f64 {
    gaussian_mass(n_axis, a) / a
}

/// `‖a y^i y^j - δ_ij‖²_{0,a}`.
pub fn quadratic_norm_sq(n_axis: usize, a: f64, diagonal: bool) -> f64 {
    gaussian_mass(n_axis, a) * if diagonal { 2.0 } else { 1.0 }
}

/// Field `Π_axes h_{α}(sqrt(b) y) · F_slot` with a single coefficient.
fn basis_field(
    trunc: Truncation,
    b: f64,
    alpha: &[usize],
    slot: usize,
    value: f64,
) -> SpectralField {
    let mut f = SpectralField::zeros(trunc, b);
    f.set(alpha, slot, value);
    f
}

/// Builds every mode of the five families at weight `a`, stored at basis weight `b`.
pub fn build_modes(a: f64, trunc: Truncation, b: f64) -> Result<ProjectionSet> {
    check_weight(a)?;
    check_weight(b)?;
    trunc.validate()?;
    if trunc.n_y < 2 || trunc.m_omega < 1 {
        return Err(Error::Domain(
            "truncation too small to hold the non-positive modes".into(),
        ));
    }
    let n = trunc.n_axis;
    let zero = vec![0usize; n];
    let unit = |i: usize| {
        let mut e = vec![0usize; n];
        e[i] += 1;
        e
    };
    let mut modes = Vec::new();

    let pref00 = -0.5 * a.powf(-1.5);
    modes.push(EigenMode {
        label: ModeLabel {
            family: ModeFamily::Dilation,
            i: 0,
            j: 0,
            l: 0,
        },
        eigenvalue: eigenvalue(0, 0, a),
        field: SpectralField::constant(trunc, b, pref00),
        normalization: pref00,
    });
    for l in 1..=2 {
        modes.push(EigenMode {
            label: ModeLabel {
                family: ModeFamily::Translation,
                i: 0,
                j: 0,
                l,
            },
            eigenvalue: eigenvalue(0, 1, a),
            field: basis_field(trunc, b, &zero, l, 1.0),
            normalization: 1.0,
        });
    }
    let inv_lin = 1.0 / linear_norm_sq(n, a);
    for i in 0..n {
        modes.push(EigenMode {
            label: ModeLabel {
                family: ModeFamily::Axial,
                i: i + 1,
                j: 0,
                l: 0,
            },
            eigenvalue: eigenvalue(1, 0, a),
            field: basis_field(trunc, b, &unit(i), 0, inv_lin / b.sqrt()),
            normalization: inv_lin,
        });
    }
    for i in 0..n {
        for l in 1..=2 {
            modes.push(EigenMode {
                label: ModeLabel {
                    family: ModeFamily::Tilt,
                    i: i + 1,
                    j: 0,
                    l,
                },
                eigenvalue: eigenvalue(1, 1, a),
                field: basis_field(trunc, b, &unit(i), l, 1.0 / b.sqrt()),
                normalization: 1.0,
            });
        }
    }
    for i in 0..n {
        for j in i..n {
            let diag = i == j;
            let inv = 1.0 / quadratic_norm_sq(n, a, diag);
            let mut f = SpectralField::zeros(trunc, b);
            if diag {
                // a y^2 - 1 = (a/b)(sqrt(2) h_2 + 1) - 1
                let mut e2 = zero.clone();
                e2[i] = 2;
                f.set(&e2, 0, inv * (a / b) * 2f64.sqrt());
                f.set(&zero, 0, inv * (a / b - 1.0));
            } else {
                let mut e = zero.clone();
                e[i] = 1;
                e[j] = 1;
                f.set(&e, 0, inv * a / b);
            }
            modes.push(EigenMode {
                label: ModeLabel {
                    family: ModeFamily::Quadratic,
                    i: i + 1,
                    j: j + 1,
                    l: 0,
                },
                eigenvalue: eigenvalue(2, 0, a),
                field: f,
                normalization: inv,
            });
        }
    }
    let gram = gram_matrix(&modes, a)?;
    let gram_rank = numerical_rank(&gram);
    Ok(ProjectionSet {
        a,
        modes,
        gram_rank,
    })
}

fn gram_matrix(modes: &[EigenMode], a: f64) -> Result<DMatrix<f64>> {
    let k = modes.len();
    let mut g = DMatrix::zeros(k, k);
    for p in 0..k {
        for q in p..k {
            let v = inner_product(&modes[p].field, &modes[q].field, a)?;
            g[(p, q)] = v;
            g[(q, p)] = v;
        }
    }
    Ok(g)
}

fn numerical_rank(gram: &DMatrix<f64>) -> usize {
    let k = gram.nrows();
    let d = DMatrix::from_fn(k, k, |i, j| {
        gram[(i, j)] / (gram[(i, i)] * gram[(j, j)]).sqrt()
    });
    let eig = SymmetricEigen::new(d);
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    eig.eigenvalues
        .iter()
        .filter(|v| v.abs() > 1e-10 * top)
        .count()
}

/// Expected number of non-positive modes, `1 + 2 + n + 2n + n(n+1)/2`.
pub fn mode_count(n_axis: usize) -> usize {
    3 + 3 * n_axis + n_axis * (n_axis + 1) / 2
}

/// Multiplicity of the zero eigenvalue, `2n + n(n+1)/2`.
pub fn zero_multiplicity(n_axis: usize) -> usize {
    2 * n_axis + n_axis * (n_axis + 1) / 2
}

impl ProjectionSet {
    pub fn family(&self, family: ModeFamily) -> impl Iterator<Item = &EigenMode> {
        self.modes.iter().filter(move |m| m.label.family == family)
    }

    /// Orthogonal projection onto the span of the modes selected by `keep`,
    /// solved through the Gram system with small eigenvalues discarded.
    fn project_onto(
        &self,
        phi: &SpectralField,
        keep: impl Fn(&EigenMode) -> bool,
    ) -> Result<SpectralField> {
        let sel: Vec<&EigenMode> = self.modes.iter().filter(|m| keep(m)).collect();
        let k = sel.len();
        let mut gram = DMatrix::zeros(k, k);
        let mut rhs = nalgebra::DVector::zeros(k);
        for p in 0..k {
            rhs[p] = inner_product(phi, &sel[p].field, self.a)?;
            for q in p..k {
                let v = inner_product(&sel[p].field, &sel[q].field, self.a)?;
                gram[(p, q)] = v;
                gram[(q, p)] = v;
            }
        }
        let eig = SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut coef = nalgebra::DVector::zeros(k);
        for (idx, lam) in eig.eigenvalues.iter().enumerate() {
            if lam.abs() > 1e-12 * top {
                let v = eig.eigenvectors.column(idx);
                let s = v.dot(&rhs) / lam;
                coef += v * s;
            }
        }
        let mut out = SpectralField::zeros(phi.trunc, phi.basis_weight);
        for (m, c) in sel.iter().zip(coef.iter()) {
            let f = if m.field.basis_weight == phi.basis_weight {
                m.field.clone()
            } else {
                m.field.rebased(phi.basis_weight)?
            };
            out = out.axpy(*c, &f)?;
        }
        Ok(out)
    }

    /// `P^{(m,n)} φ`.
    pub fn project(&self, phi: &SpectralField, family: ModeFamily) -> Result<SpectralField> {
        self.project_onto(phi, |m| m.label.family == family)
    }

    /// `Q φ = φ - Σ P^{(m,n)} φ`.
    pub fn project_stable(&self, phi: &SpectralField) -> Result<SpectralField> {
        let p = self.project_onto(phi, |_| true)?;
        phi.sub(&p)
    }

    /// Largest `|⟨φ, Σ⟩_a| / ‖Σ‖_{0,a}` over the modes of `families`.
    pub fn max_component(&self, phi: &SpectralField, families: &[ModeFamily]) -> Result<f64> {
        let mut worst = 0.0f64;
        for m in self
            .modes
            .iter()
            .filter(|m| families.contains(&m.label.family))
        {
            let ip = inner_product(phi, &m.field, self.a)?;
            worst = worst.max(ip.abs() / weighted_l2_norm(&m.field, self.a)?);
        }
        Ok(worst)
    }
}

/// `e^{-τ L̄} φ` for `φ` in the range of `Q` at weight `a`.
pub fn propagate_stable(phi: &SpectralField, a: f64, tau: f64) -> Result<SpectralField> {
    check_weight(a)?;
    if tau < 0.0 {
        return Err(Error::Domain(
            "propagation time must be non-negative".into(),
        ));
    }
    let mut hat = phi.rebased(a)?;
    let trunc = phi.trunc;
    let scale = hat.max_abs().max(f64::MIN_POSITIVE);
    let nf = trunc.fourier_len();
    for i in 0..trunc.len() {
        let (alpha, slot) = trunc.unflatten(i);
        let abs: usize = alpha.iter().sum();
        let m = slot_frequency(slot);
        if ModeFamily::of_basis(abs, m).is_some() {
            if hat.coeffs[i].abs() > 1e-9 * scale {
                return Err(Error::Precondition(format!(
                    "field has a component {:.3e} along a non-positive mode (|α| = {abs}, slot {})",
                    hat.coeffs[i],
                    i % nf
                )));
            }
            hat.coeffs[i] = 0.0;
        } else {
            hat.coeffs[i] *= (-tau * eigenvalue(abs, m, a)).exp();
        }
    }
    hat.rebased(phi.basis_weight)
}

/// Smallest strictly positive eigenvalue within the truncation.
pub fn spectral_gap(a: f64, trunc: Truncation) -> f64 {
    let mut best = f64::INFINITY;
    for abs in 0..=trunc.n_axis * trunc.n_y {
        for m in 0..=trunc.m_omega {
            let idx = eigen_index(abs, m);
            if idx > 0 {
                best = best.min(idx as f64 * a);
            }
        }
    }
    best
}

/// Eigenvalues of the one-dimensional drift operator `-∂² + a y ∂` on Hermite
/// functions of weight `b`, from the Galerkin pencil assembled by quadrature.
fn drift_pencil_eigenvalues(a: f64, n_y: usize, b: f64) -> Result<Vec<f64>> {
    let n = n_y + 1;
    let grid = Grid::new(1, a, n + 1, 1);
    let mut mass = DMatrix::<f64>::zeros(n, n);
    let mut stiff = DMatrix::<f64>::zeros(n, n);
    let sb = b.sqrt();
    for (y, w) in grid.y.nodes.iter().zip(&grid.y.weights) {
        let h = hermite_values(sb * y, n);
        let dh: Vec<f64> = (0..n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else {
                    sb * (k as f64).sqrt() * h[k - 1]
                }
            })
            .collect();
        for p in 0..n {
            for q in 0..n {
                mass[(p, q)] += w * h[p] * h[q];
                stiff[(p, q)] += w * dh[p] * dh[q];
            }
        }
    }
    generalized_symmetric_eigenvalues(stiff, mass)
}

fn generalized_symmetric_eigenvalues(stiff: DMatrix<f64>, mass: DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = nalgebra::Cholesky::new(mass)
        .ok_or_else(|| Error::Resource("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Resource("singular Cholesky factor".into()))?;
    let c = &linv * stiff * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

fn angular_pencil_eigenvalues(a: f64, m_omega: usize) -> Result<Vec<f64>> {
    let nf = 2 * m_omega + 1;
    let nt = 2 * nf;
    let mut mass = DMatrix::<f64>::zeros(nf, nf);
    let mut stiff = DMatrix::<f64>::zeros(nf, nf);
    let w = 2.0 * std::f64::consts::PI / nt as f64;
    for j in 0..nt {
        let t = w * j as f64;
        let v: Vec<f64> = (0..nf).map(|f| fourier_value(f, t)).collect();
        let dv: Vec<f64> = (0..nf)
            .map(|f| {
                let m = slot_frequency(f) as f64;
                if f == 0 {
                    0.0
                } else if f % 2 == 1 {
                    -m * (m * t).sin()
                } else {
                    m * (m * t).cos()
                }
            })
            .collect();
        for p in 0..nf {
            for q in 0..nf {
                mass[(p, q)] += w * v[p] * v[q];
                stiff[(p, q)] += w * a * dv[p] * dv[q];
            }
        }
    }
    generalized_symmetric_eigenvalues(stiff, mass)
}

const DENSE_LIMIT: usize = 4_000_000;

/// Sorted eigenvalues of `L(a)` on the truncation, computed independently of the
/// closed-form formula: each one-dimensional factor is assembled as a dense
/// Galerkin pencil by quadrature and diagonalised, and the tensor spectrum is
/// the Kronecker sum of the factor spectra.
pub fn dense_spectrum(a: f64, trunc: Truncation, b: f64) -> Result<Vec<f64>> {
    check_weight(a)?;
    check_weight(b)?;
    trunc.validate()?;
    if trunc.len() > DENSE_LIMIT || trunc.n_y > 80 {
        return Err(Error::Resource(format!(
            "truncation {:?} too large for a dense scan",
            trunc
        )));
    }
    let axis = drift_pencil_eigenvalues(a, trunc.n_y, b)?;
    let ang = angular_pencil_eigenvalues(a, trunc.m_omega)?;
    let mut sums = vec![-2.0 * a];
    for _ in 0..trunc.n_axis {
        sums = sums
            .iter()
            .flat_map(|s| axis.iter().map(move |v| s + v))
            .collect();
    }
    let mut all: Vec<f64> = sums
        .iter()
        .flat_map(|s| ang.iter().map(move |v| s + v))
        .collect();
    all.sort_by(f64::total_cmp);
    Ok(all)
}

/// Sorted eigenvalues from a fully assembled tensor Galerkin pencil; cubic in
/// the basis size, so limited to small truncations.
pub fn dense_spectrum_full(a: f64, trunc: Truncation, b: f64) -> Result<Vec<f64>> {
    check_weight(a)?;
    if trunc.len() > 1500 {
        return Err(Error::Resource(format!(
            "{} basis functions exceed the full dense limit",
            trunc.len()
        )));
    }
    let grid = Grid::new(
        trunc.n_axis,
        a,
        trunc.hermite_len() + 1,
        2 * trunc.fourier_len(),
    );
    let nb = trunc.len();
    let np = grid.len();
    let basis: Vec<SpectralField> = (0..nb)
        .map(|i| {
            let mut f = SpectralField::zeros(trunc, b);
            f.coeffs[i] = 1.0;
            f
        })
        .collect();
    let tr = crate::weighted_space::Transform::new(trunc, b, grid.clone());
    let w = grid.weights();
    let eval = |f: &SpectralField| -> Vec<f64> {
        tr.evaluate(f)
            .iter()
            .zip(&w)
            .map(|(v, w)| v * w.sqrt())
            .collect()
    };
    let mut vals = DMatrix::<f64>::zeros(np, nb);
    let mut grads: Vec<DMatrix<f64>> = vec![DMatrix::zeros(np, nb); trunc.n_axis + 1];
    for (k, f) in basis.iter().enumerate() {
        vals.set_column(k, &nalgebra::DVector::from_vec(eval(f)));
        for axis in 0..trunc.n_axis {
            grads[axis].set_column(k, &nalgebra::DVector::from_vec(eval(&f.d_y(axis))));
        }
        let dt: Vec<f64> = eval(&f.d_theta()).iter().map(|v| v * a.sqrt()).collect();
        grads[trunc.n_axis].set_column(k, &nalgebra::DVector::from_vec(dt));
    }
    let mass = vals.transpose() * &vals;
    let mut stiff = &mass * (-2.0 * a);
    for g in &grads {
        stiff += g.transpose() * g;
    }
    generalized_symmetric_eigenvalues(stiff, mass)
}

/// One row of the spectrum table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub alpha: Vec<usize>,
    pub fourier_m: i64,
    pub eigenvalue: f64,
    pub classification: &'static str,
}

/// Every basis eigenvalue `λ(α, m)` with its sign class, sorted ascending.
pub fn spectrum_table(a: f64, trunc: Truncation) -> Result<Vec<SpectrumRow>> {
    check_weight(a)?;
    let mut rows: Vec<SpectrumRow> = (0..trunc.len())
        .map(|i| {
            let (alpha, slot) = trunc.unflatten(i);
            let abs: usize = alpha.iter().sum();
            let idx = eigen_index(abs, slot_frequency(slot));
            let classification = match idx.signum() {
                -1 => "unstable",
                0 => "zero",
                _ => "stable",
            };
            SpectrumRow {
                alpha,
                fourier_m: slot_signed_frequency(slot),
                eigenvalue: eigenvalue(abs, slot_frequency(slot), a),
                classification,
            }
        })
        .collect();
    rows.sort_by(|x, y| x.eigenvalue.total_cmp(&y.eigenvalue));
    Ok(rows)
}

/// Operator norm of `L(b): X^s(b) → X^{s-2}(b)`, exact because both the operator
/// and the two norms are diagonal in the Hermite basis of weight `b`.
pub fn operator_norm_at_basis(b: f64, trunc: Truncation, s: usize) -> Result<f64> {
    check_weight(b)?;
    let mut best = 0.0f64;
    for i in 0..trunc.len() {
        let mut e = SpectralField::zeros(trunc, b);
        e.coeffs[i] = 1.0;
        let le = apply_linearized(&e, b)?;
        let num = crate::weighted_space::sobolev_norm(&le, b, s.saturating_sub(2))?;
        let den = crate::weighted_space::sobolev_norm(&e, b, s)?;
        best = best.max(num / den);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weighted_space::{sobolev_norm, SpectralField};

    fn tr() -> Truncation {
        Truncation::new(1, 10, 3)
    }

    #[test]
    fn fourier_norms_match_slots() {
        assert_eq!(
            crate::weighted_space::fourier_norm_sq(0),
            2.0 * std::f64::consts::PI
        );
        assert_eq!(
            crate::weighted_space::fourier_norm_sq(3),
            std::f64::consts::PI
        );
    }

    #[test]
    fn linearized_operator_is_diagonal_at_its_own_weight() {
        let t = tr();
        let a = 0.6;
        let mut e = SpectralField::zeros(t, a);
        e.set(&[3], 0, 1.0);
        let le = apply_linearized(&e, a).unwrap();
        assert!((le.get(&[3], 0) - a).abs() < 1e-14);
        assert!(le.sub(&e.scaled(a)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn modes_are_eigenfunctions_at_other_basis_weight() {
        let t = Truncation::new(2, 6, 2);
        for a in [0.5, 0.52, 1.0] {
            let set = build_modes(a, t, 0.5).unwrap();
            assert_eq!(set.modes.len(), mode_count(2));
            assert_eq!(set.gram_rank, mode_count(2));
            for m in &set.modes {
                let r = apply_linearized(&m.field, a)
                    .unwrap()
                    .axpy(-m.eigenvalue, &m.field)
                    .unwrap();
                let res = weighted_l2_norm(&r, a).unwrap();
                assert!(
                    res <= 1e-10 * weighted_l2_norm(&m.field, a).unwrap().max(1.0),
                    "{} {res}",
                    m.label
                );
            }
        }
    }

    #[test]
    fn full_dense_matches_kronecker_dense() {
        let t = Truncation::new(1, 8, 3);
        let full = dense_spectrum_full(0.55, t, 0.5).unwrap();
        let kron = dense_spectrum(0.55, t, 0.5).unwrap();
        for (x, y) in full.iter().zip(&kron) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn propagator_rejects_unstable_component() {
        let t = tr();
        let f = SpectralField::constant(t, 0.5, 1.0);
        assert!(matches!(
            propagate_stable(&f, 0.5, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn operator_norm_dominates_random_quotients() {
        let t = tr();
        let nrm = operator_norm_at_basis(0.5, t, 2).unwrap();
        let f = SpectralField::from_fn(t, 0.5, |y, th| {
            (y[0].powi(3) - y[0]) * (2.0 * th).cos() + 0.1 * y[0].powi(5)
        });
        let q = sobolev_norm(&apply_linearized(&f, 0.5).unwrap(), 0.5, 0).unwrap()
            / sobolev_norm(&f, 0.5, 2).unwrap();
        assert!(q <= nrm * (1.0 + 1e-12));
    }
}
