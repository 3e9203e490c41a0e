//! Gaussian-weighted spaces over `R^n × S^1`.
//!
//! A [`SpectralField`] stores coefficients against the tensor basis
//! `Π_i h_{α_i}(sqrt(b) y_i) · F_f(θ)` where `b` is the field's basis weight,
//! `h_n` the normalised Hermite polynomials of [`crate::quadrature`] and
//! `F_0 = 1`, `F_{2m-1} = cos mθ`, `F_{2m} = sin mθ`. Coefficients are laid out
//! row-major with the Hermite axes first and the Fourier slot last.
//!
//! Inner products at a weight `a` other than `b` are evaluated with the Gauss
//! rule of weight `a`, which is exact for the band-limited products involved.

use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite_weighted, hermite_values, GaussRule};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Per-axis Hermite degree, Fourier order and number of `y` axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Truncation {
    pub n_axis: usize,
    pub n_y: usize,
    pub m_omega: usize,
}

impl Truncation {
    pub fn new(n_axis: usize, n_y: usize, m_omega: usize) -> Self {
        Self {
            n_axis,
            n_y,
            m_omega,
        }
    }

    /// Default desk-scale truncation: 24 Hermite degrees per axis, 8 Fourier orders.
    pub fn desk(n_axis: usize) -> Self {
        Self::new(n_axis, 24, 8)
    }

    pub fn hermite_len(&self) -> usize {
        self.n_y + 1
    }

    pub fn fourier_len(&self) -> usize {
        2 * self.m_omega + 1
    }

    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.hermite_len(); self.n_axis];
        s.push(self.fourier_len());
        s
    }

    pub fn len(&self) -> usize {
        self.hermite_len().pow(self.n_axis as u32) * self.fourier_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of Hermite multi-index `alpha` and Fourier slot `slot`.
    pub fn index(&self, alpha: &[usize], slot: usize) -> usize {
        let mut idx = 0;
        for &a in alpha {
            idx = idx * self.hermite_len() + a;
        }
        idx * self.fourier_len() + slot
    }

    /// Inverse of [`Truncation::index`].
    pub fn unflatten(&self, mut idx: usize) -> (Vec<usize>, usize) {
        let slot = idx % self.fourier_len();
        idx /= self.fourier_len();
        let mut alpha = vec![0; self.n_axis];
        for k in (0..self.n_axis).rev() {
            alpha[k] = idx % self.hermite_len();
            idx /= self.hermite_len();
        }
        (alpha, slot)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_axis == 0 {
            return Err(Error::Domain("n_axis must be at least 1".into()));
        }
        Ok(())
    }
}

/// Angular frequency carried by Fourier slot `slot`.
pub fn slot_frequency(slot: usize) -> usize {
    slot.div_ceil(2)
}

/// Signed frequency label: `+m` for cosine slots, `-m` for sine slots.
pub fn slot_signed_frequency(slot: usize) -> i64 {
    let m = slot_frequency(slot) as i64;
    if slot > 0 && slot.is_multiple_of(2) {
        -m
    } else {
        m
    }
}

/// Value of the Fourier basis function in `slot` at angle `theta`.
pub fn fourier_value(slot: usize, theta: f64) -> f64 {
    let m = slot_frequency(slot) as f64;
    if slot == 0 {
        1.0
    } else if slot % 2 == 1 {
        (m * theta).cos()
    } else {
        (m * theta).sin()
    }
}

/// `∫_0^{2π} F_f^2 dθ`.
pub fn fourier_norm_sq(slot: usize) -> f64 {
    if slot == 0 {
        2.0 * PI
    } else {
        PI
    }
}

/// Weighted space parameters `X^s(a)` over `R^{n_axis} × S^1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub a: f64,
    pub s: usize,
    pub n_axis: usize,
}

impl SpaceParams {
    pub fn new(a: f64, s: usize, n_axis: usize) -> Result<Self> {
        check_weight(a)?;
        if n_axis == 0 {
            return Err(Error::Domain("n_axis must be at least 1".into()));
        }
        Ok(Self { a, s, n_axis })
    }
}

pub(crate) fn check_weight(a: f64) -> Result<()> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("weight must be positive, got {a}")))
    }
}

/// Coefficients of a function on `R^{n_axis} × S^1` in the Hermite ⊗ Fourier basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    pub trunc: Truncation,
    pub basis_weight: f64,
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(trunc: Truncation, basis_weight: f64) -> Self {
        Self {
            trunc,
            basis_weight,
            coeffs: vec![0.0; trunc.len()],
        }
    }

    pub fn from_coeffs(trunc: Truncation, basis_weight: f64, coeffs: Vec<f64>) -> Result<Self> {
        check_weight(basis_weight)?;
        if coeffs.len() != trunc.len() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                trunc.len(),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        Ok(Self {
            trunc,
            basis_weight,
            coeffs,
        })
    }

    pub fn constant(trunc: Truncation, basis_weight: f64, value: f64) -> Self {
        let mut f = Self::zeros(trunc, basis_weight);
        f.coeffs[0] = value;
        f
    }

    /// Interpolates `f(y, θ)` on the exact grid; reproduces band-limited functions.
    pub fn from_fn(trunc: Truncation, basis_weight: f64, f: impl Fn(&[f64], f64) -> f64) -> Self {
        let tr = Transform::exact(trunc, basis_weight);
        let values = tr.grid.sample(&f);
        tr.project(&values)
    }

    pub fn get(&self, alpha: &[usize], slot: usize) -> f64 {
        self.coeffs[self.trunc.index(alpha, slot)]
    }

    pub fn set(&mut self, alpha: &[usize], slot: usize, value: f64) {
        let i = self.trunc.index(alpha, slot);
        self.coeffs[i] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.trunc != other.trunc {
            return Err(Error::Shape(format!(
                "truncation mismatch: {:?} vs {:?}",
                self.trunc, other.trunc
            )));
        }
        if self.basis_weight != other.basis_weight {
            return Err(Error::Shape(format!(
                "basis weight mismatch: {} vs {}",
                self.basis_weight, other.basis_weight
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `self + s * other`; both fields must share basis and truncation.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (o, x) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *o += s * x;
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Exact partial derivative in `y_axis`.
    pub fn d_y(&self, axis: usize) -> Self {
        let n = self.trunc.hermite_len();
        let sb = self.basis_weight.sqrt();
        let mut mat = vec![0.0; n * n];
        for p in 0..n - 1 {
            mat[p * n + p + 1] = sb * ((p + 1) as f64).sqrt();
        }
        self.apply_hermite(axis, &mat)
    }

    /// Exact derivative in the angle.
    pub fn d_theta(&self) -> Self {
        let nf = self.trunc.fourier_len();
        let mut out = Self::zeros(self.trunc, self.basis_weight);
        for (block, oblock) in self.coeffs.chunks(nf).zip(out.coeffs.chunks_mut(nf)) {
            for m in 1..=self.trunc.m_omega {
                let (c, s) = (2 * m - 1, 2 * m);
                oblock[c] = m as f64 * block[s];
                oblock[s] = -(m as f64) * block[c];
            }
        }
        out
    }

    /// Applies a square matrix along one Hermite axis.
    pub(crate) fn apply_hermite(&self, axis: usize, mat: &[f64]) -> Self {
        let shape = self.trunc.shape();
        let (coeffs, _) = apply_axis(&self.coeffs, &shape, axis, mat, shape[axis]);
        Self {
            trunc: self.trunc,
            basis_weight: self.basis_weight,
            coeffs,
        }
    }

    /// `y_axis · φ` via the three-term recurrence; the top degree is dropped, so
    /// the product is exact only when `φ` has degree below `N_y` in that axis.
    pub fn mul_y(&self, axis: usize) -> Self {
        let n = self.trunc.hermite_len();
        let inv = 1.0 / self.basis_weight.sqrt();
        let mut mat = vec![0.0; n * n];
        for p in 0..n {
            if p + 1 < n {
                mat[(p + 1) * n + p] = inv * ((p + 1) as f64).sqrt();
                mat[p * n + p + 1] = inv * ((p + 1) as f64).sqrt();
            }
        }
        self.apply_hermite(axis, &mat)
    }

    /// The same function expanded against Hermite functions of weight `new_weight`.
    pub fn rebased(&self, new_weight: f64) -> Result<Self> {
        check_weight(new_weight)?;
        if new_weight == self.basis_weight {
            return Ok(self.clone());
        }
        let r = (self.basis_weight / new_weight).sqrt();
        let mat = hermite_rescale_matrix(self.trunc.hermite_len(), r);
        let mut out = self.clone();
        for axis in 0..self.trunc.n_axis {
            out = out.apply_hermite(axis, &mat);
        }
        out.basis_weight = new_weight;
        Ok(out)
    }

    /// Little-endian binary encoding: header `n_axis, n_y, m_omega` as u64, then
    /// `basis_weight` and the coefficients as f64.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.coeffs.len());
        for v in [self.trunc.n_axis, self.trunc.n_y, self.trunc.m_omega] {
            out.extend_from_slice(&(v as u64).to_le_bytes());
        }
        out.extend_from_slice(&self.basis_weight.to_le_bytes());
        for c in &self.coeffs {
            out.extend_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 32 || !bytes.len().is_multiple_of(8) {
            return Err(Error::Shape("binary field too short or misaligned".into()));
        }
        let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().unwrap() };
        let trunc = Truncation::new(
            u64::from_le_bytes(word(0)) as usize,
            u64::from_le_bytes(word(1)) as usize,
            u64::from_le_bytes(word(2)) as usize,
        );
        let b = f64::from_le_bytes(word(3));
        let coeffs = (4..bytes.len() / 8)
            .map(|i| f64::from_le_bytes(word(i)))
            .collect();
        Self::from_coeffs(trunc, b, coeffs)
    }
}

/// Matrix `M` with `h_n(r x) = Σ_p M[p][n] h_p(x)`, so that applying `M` to
/// coefficients in the `x` variable re-expands them in the scaled variable.
pub fn hermite_rescale_matrix(n: usize, r: f64) -> Vec<f64> {
    let mut fact = vec![1.0f64; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1] * k as f64;
    }
    let q = 0.5 * (r * r - 1.0);
    let mut mat = vec![0.0; n * n];
    for col in 0..n {
        let mut j = 0;
        while 2 * j <= col {
            let p = col - 2 * j;
            let c =
                fact[col].sqrt() / (fact[j] * fact[p].sqrt()) * r.powi(p as i32) * q.powi(j as i32);
            mat[p * n + col] = c;
            j += 1;
        }
    }
    mat
}

/// Applies `mat` (rows × shape[axis], row-major) along `axis` of a row-major tensor.
pub(crate) fn apply_axis(
    data: &[f64],
    shape: &[usize],
    axis: usize,
    mat: &[f64],
    rows: usize,
) -> (Vec<f64>, Vec<usize>) {
    let cols = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        let src = &data[o * cols * inner..(o + 1) * cols * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let drow = &mut dst[r * inner..(r + 1) * inner];
            for c in 0..cols {
                let m = mat[r * cols + c];
                if m == 0.0 {
                    continue;
                }
                let srow = &src[c * inner..(c + 1) * inner];
                for (d, s) in drow.iter_mut().zip(srow) {
                    *d += m * s;
                }
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[axis] = rows;
    (out, new_shape)
}

/// Tensor collocation grid: a Gauss–Hermite rule per axis and an equispaced circle.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n_axis: usize,
    pub weight: f64,
    pub y: GaussRule,
    pub theta: Vec<f64>,
}

impl Grid {
    /// `q` Gauss nodes per axis for `exp(-a y^2/2)` and `n_theta` angles.
    pub fn new(n_axis: usize, a: f64, q: usize, n_theta: usize) -> Self {
        let theta = (0..n_theta)
            .map(|j| 2.0 * PI * j as f64 / n_theta as f64)
            .collect();
        Self {
            n_axis,
            weight: a,
            y: gauss_hermite_weighted(q, a),
            theta,
        }
    }

    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.y.nodes.len(); self.n_axis];
        s.push(self.theta.len());
        s
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta_weight(&self) -> f64 {
        2.0 * PI / self.theta.len() as f64
    }

    /// Node coordinates `(y, θ)` of flat grid index `idx`.
    pub fn node(&self, mut idx: usize) -> (Vec<f64>, f64) {
        let nt = self.theta.len();
        let q = self.y.nodes.len();
        let theta = self.theta[idx % nt];
        idx /= nt;
        let mut y = vec![0.0; self.n_axis];
        for k in (0..self.n_axis).rev() {
            y[k] = self.y.nodes[idx % q];
            idx /= q;
        }
        (y, theta)
    }

    /// Product quadrature weight of flat grid index `idx`.
    pub fn node_weight(&self, mut idx: usize) -> f64 {
        let nt = self.theta.len();
        let q = self.y.nodes.len();
        idx /= nt;
        let mut w = self.theta_weight();
        for _ in 0..self.n_axis {
            w *= self.y.weights[idx % q];
            idx /= q;
        }
        w
    }

    /// `|y|^2` at every node.
    pub fn radial_sq(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.node(i).0.iter().map(|v| v * v).sum())
            .collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node_weight(i)).collect()
    }

    pub fn sample(&self, f: &impl Fn(&[f64], f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (y, t) = self.node(i);
                f(&y, t)
            })
            .collect()
    }
}

/// Precomputed synthesis and analysis matrices between coefficients and a grid.
#[derive(Debug, Clone)]
pub struct Transform {
    pub trunc: Truncation,
    pub basis_weight: f64,
    pub grid: Grid,
    herm_eval: Vec<f64>,
    four_eval: Vec<f64>,
    herm_proj: Option<Vec<f64>>,
    four_proj: Vec<f64>,
}

impl Transform {
    /// Transform onto an arbitrary grid; analysis is available only when the
    /// grid weight equals the basis weight.
    pub fn new(trunc: Truncation, basis_weight: f64, grid: Grid) -> Self {
        let nh = trunc.hermite_len();
        let nf = trunc.fourier_len();
        let q = grid.y.nodes.len();
        let nt = grid.theta.len();
        let sb = basis_weight.sqrt();
        let mut herm_eval = vec![0.0; q * nh];
        for (i, y) in grid.y.nodes.iter().enumerate() {
            let h = hermite_values(sb * y, nh - 1);
            herm_eval[i * nh..(i + 1) * nh].copy_from_slice(&h);
        }
        let mut four_eval = vec![0.0; nt * nf];
        for (j, t) in grid.theta.iter().enumerate() {
            for f in 0..nf {
                four_eval[j * nf + f] = fourier_value(f, *t);
            }
        }
        let herm_proj = if grid.weight == basis_weight {
            let norm = (2.0 * PI / basis_weight).sqrt();
            let mut p = vec![0.0; nh * q];
            for n in 0..nh {
                for i in 0..q {
                    p[n * q + i] = grid.y.weights[i] * herm_eval[i * nh + n] / norm;
                }
            }
            Some(p)
        } else {
            None
        };
        let tw = grid.theta_weight();
        let mut four_proj = vec![0.0; nf * nt];
        for f in 0..nf {
            for j in 0..nt {
                four_proj[f * nt + j] = tw * four_eval[j * nf + f] / fourier_norm_sq(f);
            }
        }
        Self {
            trunc,
            basis_weight,
            grid,
            herm_eval,
            four_eval,
            herm_proj,
            four_proj,
        }
    }

    fn cached(trunc: Truncation, b: f64, q: usize, nt: usize) -> Arc<Transform> {
        type Key = (Truncation, u64, usize, usize);
        static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Transform>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (trunc, b.to_bits(), q, nt);
        if let Some(t) = cache.lock().expect("transform cache poisoned").get(&key) {
            return t.clone();
        }
        let t = Arc::new(Transform::new(trunc, b, Grid::new(trunc.n_axis, b, q, nt)));
        cache
            .lock()
            .expect("transform cache poisoned")
            .insert(key, t.clone());
        t
    }

    /// Grid with as many nodes as coefficients; interpolation is exact.
    pub fn exact(trunc: Truncation, b: f64) -> Arc<Transform> {
        Self::cached(trunc, b, trunc.hermite_len(), trunc.fourier_len())
    }

    /// Grid padded by 3/2 in every direction for pointwise nonlinear algebra.
    pub fn padded(trunc: Truncation, b: f64) -> Arc<Transform> {
        let q = (3 * trunc.hermite_len()).div_ceil(2);
        let nt = (3 * trunc.fourier_len()).div_ceil(2);
        Self::cached(trunc, b, q, nt)
    }

    /// Values of `field` at every grid node.
    pub fn evaluate(&self, field: &SpectralField) -> Vec<f64> {
        debug_assert_eq!(field.trunc, self.trunc);
        debug_assert_eq!(field.basis_weight, self.basis_weight);
        let mut data = field.coeffs.clone();
        let mut shape = self.trunc.shape();
        let q = self.grid.y.nodes.len();
        for axis in 0..self.trunc.n_axis {
            let (d, s) = apply_axis(&data, &shape, axis, &self.herm_eval, q);
            data = d;
            shape = s;
        }
        let last = self.trunc.n_axis;
        let (d, _) = apply_axis(&data, &shape, last, &self.four_eval, self.grid.theta.len());
        d
    }

    /// Discrete weighted projection of grid values onto the truncated basis.
    pub fn project(&self, values: &[f64]) -> SpectralField {
        let hp = self
            .herm_proj
            .as_ref()
            .expect("projection needs a grid built for the basis weight");
        let mut data = values.to_vec();
        let mut shape = self.grid.shape();
        let nh = self.trunc.hermite_len();
        for axis in 0..self.trunc.n_axis {
            let (d, s) = apply_axis(&data, &shape, axis, hp, nh);
            data = d;
            shape = s;
        }
        let last = self.trunc.n_axis;
        let (d, _) = apply_axis(
            &data,
            &shape,
            last,
            &self.four_proj,
            self.trunc.fourier_len(),
        );
        SpectralField {
            trunc: self.trunc,
            basis_weight: self.basis_weight,
            coeffs: d,
        }
    }
}

/// Values of `field` on `grid` (any weight).
pub fn to_values(field: &SpectralField, grid: &Grid) -> Vec<f64> {
    Transform::new(field.trunc, field.basis_weight, grid.clone()).evaluate(field)
}

/// Coefficients from values on a grid built for the basis weight `b`.
pub fn from_values(
    values: &[f64],
    grid: &Grid,
    trunc: Truncation,
    b: f64,
) -> Result<SpectralField> {
    check_weight(b)?;
    if grid.weight != b || grid.n_axis != trunc.n_axis {
        return Err(Error::Shape(
            "grid does not match basis weight or axis count".into(),
        ));
    }
    if values.len() != grid.len() {
        return Err(Error::Shape(format!(
            "expected {} values, got {}",
            grid.len(),
            values.len()
        )));
    }
    if grid.y.nodes.len() < trunc.hermite_len() || grid.theta.len() < trunc.fourier_len() {
        return Err(Error::Shape("grid coarser than truncation".into()));
    }
    Ok(Transform::new(trunc, b, grid.clone()).project(values))
}

fn mass(n_axis: usize, a: f64) -> f64 {
    (2.0 * PI / a).sqrt().powi(n_axis as i32)
}

/// `∫ exp(-a|y|^2/2) dy dθ` over `R^{n_axis} × S^1`.
pub fn gaussian_mass(n_axis: usize, a: f64) -> f64 {
    mass(n_axis, a) * 2.0 * PI
}

/// `⟨φ, ψ⟩_a = ∫ φ ψ exp(-a|y|^2/2) dy dθ`.
pub fn inner_product(phi: &SpectralField, psi: &SpectralField, a: f64) -> Result<f64> {
    check_weight(a)?;
    if phi.trunc != psi.trunc {
        return Err(Error::Shape("truncation mismatch".into()));
    }
    if phi.basis_weight == a && psi.basis_weight == a {
        let nf = phi.trunc.fourier_len();
        let m = mass(phi.trunc.n_axis, a);
        let s: f64 = phi
            .coeffs
            .iter()
            .zip(&psi.coeffs)
            .enumerate()
            .map(|(i, (x, y))| x * y * fourier_norm_sq(i % nf))
            .sum();
        return Ok(s * m);
    }
    let grid = Grid::new(
        phi.trunc.n_axis,
        a,
        phi.trunc.hermite_len(),
        phi.trunc.fourier_len(),
    );
    let vp = to_values(phi, &grid);
    let vq = if psi.basis_weight == phi.basis_weight {
        Transform::new(psi.trunc, psi.basis_weight, grid.clone()).evaluate(psi)
    } else {
        to_values(psi, &grid)
    };
    let w = grid.weights();
    Ok(vp
        .iter()
        .zip(&vq)
        .zip(&w)
        .map(|((x, y), w)| x * y * w)
        .sum())
}

/// `‖φ‖_{0,a}`.
pub fn weighted_l2_norm(phi: &SpectralField, a: f64) -> Result<f64> {
    Ok(inner_product(phi, phi, a)?.max(0.0).sqrt())
}

/// Derivative multi-indices `(β over y axes, j in θ)` with `|β| + j ≤ s`.
pub fn derivative_indices(n_axis: usize, s: usize) -> Vec<(Vec<usize>, usize)> {
    let mut out = Vec::new();
    let mut beta = vec![0usize; n_axis];
    fn rec(k: usize, left: usize, beta: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, usize)>) {
        if k == beta.len() {
            for j in 0..=left {
                out.push((beta.clone(), j));
            }
            return;
        }
        for b in 0..=left {
            beta[k] = b;
            rec(k + 1, left - b, beta, out);
        }
        beta[k] = 0;
    }
    rec(0, s, &mut beta, &mut out);
    out
}

fn differentiate(phi: &SpectralField, beta: &[usize], j: usize) -> SpectralField {
    let mut f = phi.clone();
    for (axis, &b) in beta.iter().enumerate() {
        for _ in 0..b {
            f = f.d_y(axis);
        }
    }
    for _ in 0..j {
        f = f.d_theta();
    }
    f
}

/// `(Σ_{|β|+j≤s} ‖∂_y^β ∂_θ^j φ‖_{0,a}^2)^{1/2}`.
pub fn sobolev_norm(phi: &SpectralField, a: f64, s: usize) -> Result<f64> {
    check_weight(a)?;
    if phi.basis_weight == a {
        return Ok(sobolev_norm_sq_diag(phi, s).sqrt());
    }
    // rebasing is exact on the truncated polynomial space
    Ok(sobolev_norm_sq_diag(&phi.rebased(a)?, s).sqrt())
}

/// [`sobolev_norm`] evaluated by Gauss–Hermite quadrature at weight `a`
/// instead of rebasing; slower, kept as an independent route.
pub fn sobolev_norm_quadrature(phi: &SpectralField, a: f64, s: usize) -> Result<f64> {
    check_weight(a)?;
    let mut total = 0.0;
    for (beta, j) in derivative_indices(phi.trunc.n_axis, s) {
        let d = differentiate(phi, &beta, j);
        total += inner_product(&d, &d, a)?;
    }
    Ok(total.max(0.0).sqrt())
}

/// Squared Sobolev norm at the basis weight by Parseval; derivatives map basis
/// functions to distinct basis functions, so the sum stays diagonal.
fn sobolev_norm_sq_diag(phi: &SpectralField, s: usize) -> f64 {
    let weights = sobolev_diag_weights(phi.trunc, phi.basis_weight, s);
    phi.coeffs
        .iter()
        .zip(weights.iter())
        .map(|(c, w)| c * c * w)
        .sum()
}

fn sobolev_diag_weights(trunc: Truncation, b: f64, s: usize) -> Arc<Vec<f64>> {
    type Key = (Truncation, u64, usize);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (trunc, b.to_bits(), s);
    if let Some(w) = cache.lock().expect("weight cache poisoned").get(&key) {
        return w.clone();
    }
    let m = mass(trunc.n_axis, b);
    let idx = derivative_indices(trunc.n_axis, s);
    let falling = |n: usize, k: usize| -> f64 {
        if k > n {
            0.0
        } else {
            (n - k + 1..=n).map(|v| v as f64).product::<f64>()
        }
    };
    let w: Vec<f64> = (0..trunc.len())
        .map(|i| {
            let (alpha, slot) = trunc.unflatten(i);
            let freq = slot_frequency(slot) as f64;
            let sum: f64 = idx
                .iter()
                .map(|(beta, j)| {
                    let mut f = freq.powi(2 * *j as i32);
                    for (a, bb) in alpha.iter().zip(beta) {
                        f *= b.powi(*bb as i32) * falling(*a, *bb);
                    }
                    f
                })
                .sum();
            sum * m * fourier_norm_sq(slot)
        })
        .collect();
    let w = Arc::new(w);
    cache
        .lock()
        .expect("weight cache poisoned")
        .insert(key, w.clone());
    w
}

/// Weight of the pivot norm for smallness `delta`.
pub fn pivot_weight(delta: f64) -> Result<f64> {
    if !(0.0..0.125).contains(&delta) {
        return Err(Error::Domain(format!(
            "pivot needs 0 <= delta < 1/8, got {delta}"
        )));
    }
    Ok(0.5 - 4.0 * delta)
}

/// `‖φ‖_{s,b}^2` with `b = 1/2 - 4δ`.
pub fn pivot_norm(phi: &SpectralField, delta: f64, s: usize) -> Result<f64> {
    let b = pivot_weight(delta)?;
    Ok(sobolev_norm(phi, b, s)?.powi(2))
}

/// Returns `(‖φ‖_s, c^{1/12} ‖φ‖_{s,a}^{2/3})` for the interpolation inequality.
pub fn interpolation_check(
    phi: &SpectralField,
    a: f64,
    c: f64,
    delta: f64,
    s: usize,
) -> Result<(f64, f64)> {
    check_weight(a)?;
    if !(a - 0.5 >= -1e-15 && a - 0.5 <= 2.0 * delta + 1e-15) {
        return Err(Error::Domain(format!(
            "need 0 <= a - 1/2 <= 2δ, got a = {a}, δ = {delta}"
        )));
    }
    let pivot = pivot_norm(phi, delta, s)?;
    if pivot > c {
        return Err(Error::Domain(format!(
            "pivot bound violated: {pivot} > {c}"
        )));
    }
    let lhs = sobolev_norm(phi, 0.5, s)?;
    let g = sobolev_norm(phi, a, s)?;
    Ok((lhs, c.powf(1.0 / 12.0) * g.powf(2.0 / 3.0)))
}

/// Random field with coefficients uniform in `[-amp, amp]` damped by
/// `rho^{|α| + m}`, so that high modes carry geometrically less energy.
pub fn random_field<R: rand::Rng + ?Sized>(
    rng: &mut R,
    trunc: Truncation,
    basis_weight: f64,
    rho: f64,
    amp: f64,
) -> SpectralField {
    let mut f = SpectralField::zeros(trunc, basis_weight);
    for i in 0..trunc.len() {
        let (alpha, slot) = trunc.unflatten(i);
        let deg = alpha.iter().sum::<usize>() + slot_frequency(slot);
        f.coeffs[i] = amp * rho.powi(deg as i32) * rng.gen_range(-1.0..=1.0);
    }
    f
}
