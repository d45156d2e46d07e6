//! Minkowski-space linear algebra for the hyperboloid model of H^n.
//!
//! Points are vectors in R^{n,1} with the form `<u,v> = -u0 v0 + sum ui vi`.
//! Material points live on the upper sheet `<x,x> = -1`, ideal points are
//! future lightlike rays, and isometries are matrices in SO(n,1) preserving
//! the upper sheet.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `<x,x>` for Material and Ideal vertices.
pub const POINT_TOL: f64 = 1e-12;
/// Entrywise tolerance on `A^T J A = J` for accepted isometries.
pub const FORM_TOL: f64 = 1e-10;
/// Residual above which products are re-projected onto SO(n,1).
pub const REPROJECT_TOL: f64 = 1e-9;
/// Default relative tolerance for eigenvalue clustering at 1.
pub const EIGEN_TOL: f64 = 1e-8;
/// Tolerance for equality of ideal points after normalizing `x0 = 1`.
pub const IDEAL_EQ_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LorentzError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("hyperbolic dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("invalid {kind:?} point: {reason}")]
    InvalidPoint { kind: PointKind, reason: String },
    #[error("expected a {expected:?} point, got {got:?}")]
    WrongKind { expected: PointKind, got: PointKind },
    #[error("matrix is not in SO(n,1): {0}")]
    NotIsometry(String),
    #[error("matrix is not in so(n,1): J X antisymmetry residual {0:e}")]
    NotLieAlgebra(f64),
    #[error("determinant {0} is not 1")]
    BadDeterminant(f64),
    #[error("classification ambiguous at tolerance: {first:?} vs {second:?}")]
    Ambiguous { first: IsometryClass, second: IsometryClass },
    #[error("eigen-decomposition failed: {0}")]
    Eigen(String),
    #[error("empty common fixed set")]
    EmptyFixedSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Material,
    Ideal,
    Raw,
}

/// A point of the closed hyperboloid model, or a raw Minkowski vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzVector {
    coords: DVector<f64>,
    kind: PointKind,
}

/// Minkowski form on raw coordinate vectors. No dimension check.
#[inline]
pub fn mdot(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let mut s = -u[0] * v[0];
    for i in 1..u.len() {
        s += u[i] * v[i];
    }
    s
}

/// `J = diag(-1, 1, ..., 1)` of size `n+1`.
pub fn form_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::identity(n + 1, n + 1);
    j[(0, 0)] = -1.0;
    j
}

impl LorentzVector {
    /// Validating constructor.
    pub fn new(coords: DVector<f64>, kind: PointKind) -> Result<Self, LorentzError> {
        let n = coords.len().saturating_sub(1);
        if n < 2 {
            return Err(LorentzError::DimensionTooSmall(n));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(LorentzError::InvalidPoint { kind, reason: "non-finite coordinate".into() });
        }
        let q = mdot(&coords, &coords);
        match kind {
            PointKind::Material => {
                if (q + 1.0).abs() > POINT_TOL * (1.0 + coords[0] * coords[0]) || coords[0] <= 0.0 {
                    return Err(LorentzError::InvalidPoint {
                        kind,
                        reason: format!("<x,x> = {q}, x0 = {}", coords[0]),
                    });
                }
            }
            PointKind::Ideal => {
                let n2 = coords.norm_squared();
                if q.abs() > POINT_TOL * n2 || coords[0] <= 0.0 {
                    return Err(LorentzError::InvalidPoint {
                        kind,
                        reason: format!("<x,x> = {q}, x0 = {}", coords[0]),
                    });
                }
            }
            PointKind::Raw => {}
        }
        Ok(Self { coords, kind })
    }

    pub fn raw(coords: DVector<f64>) -> Self {
        Self { coords, kind: PointKind::Raw }
    }

    /// Project a timelike future vector onto the upper sheet.
    pub fn material_from(v: &DVector<f64>) -> Result<Self, LorentzError> {
        let q = mdot(v, v);
        if q >= 0.0 || v[0] <= 0.0 {
            return Err(LorentzError::InvalidPoint {
                kind: PointKind::Material,
                reason: format!("vector is not future timelike (<v,v> = {q})"),
            });
        }
        Self::new(v / (-q).sqrt(), PointKind::Material)
    }

    /// Normalize a future lightlike vector to `x0 = 1`; the spatial part is
    /// rescaled to unit length to remove rounding drift.
    pub fn ideal_from(v: &DVector<f64>) -> Result<Self, LorentzError> {
        let n2 = v.norm_squared();
        let q = mdot(v, v);
        if v[0] <= 0.0 || q.abs() > 1e-6 * n2 {
            return Err(LorentzError::InvalidPoint {
                kind: PointKind::Ideal,
                reason: format!("vector is not future lightlike (<v,v> = {q})"),
            });
        }
        let spatial = v.rows(1, v.len() - 1).into_owned();
        let s = spatial.norm();
        let mut c = DVector::zeros(v.len());
        c[0] = 1.0;
        c.rows_mut(1, v.len() - 1).copy_from(&(spatial / s));
        Ok(Self { coords: c, kind: PointKind::Ideal })
    }

    /// The base point `e0` of H^n.
    pub fn origin(n: usize) -> Self {
        let mut c = DVector::zeros(n + 1);
        c[0] = 1.0;
        Self { coords: c, kind: PointKind::Material }
    }

    /// Point with Klein coordinates `k`; `|k| = 1` gives an ideal point.
    pub fn from_klein(k: &DVector<f64>) -> Result<Self, LorentzError> {
        let r2 = k.norm_squared();
        let n = k.len();
        let mut c = DVector::zeros(n + 1);
        if (r2 - 1.0).abs() <= 1e-12 {
            c[0] = 1.0;
            c.rows_mut(1, n).copy_from(&(k / r2.sqrt()));
            return Self::new(c, PointKind::Ideal);
        }
        if r2 > 1.0 {
            return Err(LorentzError::InvalidPoint {
                kind: PointKind::Material,
                reason: format!("Klein point outside the unit ball (|k|^2 = {r2})"),
            });
        }
        let x0 = 1.0 / (1.0 - r2).sqrt();
        c[0] = x0;
        c.rows_mut(1, n).copy_from(&(k * x0));
        Self::new(c, PointKind::Material)
    }

    /// Upper half-space point `(p, h)` with `p` in R^{n-1}, `h > 0`.
    pub fn from_upper_half_space(p: &[f64], h: f64) -> Result<Self, LorentzError> {
        let n = p.len() + 1;
        let p2: f64 = p.iter().map(|x| x * x).sum();
        let mut c = DVector::zeros(n + 1);
        c[0] = (p2 + h * h + 1.0) / (2.0 * h);
        for (i, x) in p.iter().enumerate() {
            c[i + 1] = x / h;
        }
        c[n] = (p2 + h * h - 1.0) / (2.0 * h);
        Self::material_from(&c)
    }

    /// Boundary point `p` of upper half-space, or `None` for the point at infinity.
    pub fn ideal_from_boundary(p: Option<&[f64]>, n: usize) -> Result<Self, LorentzError> {
        let mut c = DVector::zeros(n + 1);
        match p {
            None => {
                c[0] = 1.0;
                c[n] = 1.0;
            }
            Some(p) => {
                if p.len() + 1 != n {
                    return Err(LorentzError::DimensionMismatch(p.len() + 1, n));
                }
                let p2: f64 = p.iter().map(|x| x * x).sum();
                c[0] = (p2 + 1.0) / 2.0;
                for (i, x) in p.iter().enumerate() {
                    c[i + 1] = *x;
                }
                c[n] = (p2 - 1.0) / 2.0;
            }
        }
        Self::ideal_from(&c)
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn kind(&self) -> PointKind {
        self.kind
    }

    /// Hyperbolic dimension n.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn is_ideal(&self) -> bool {
        self.kind == PointKind::Ideal
    }

    /// Same point with coordinates scaled by `s > 0` (ideal representatives only).
    pub fn rescaled(&self, s: f64) -> Self {
        debug_assert!(self.kind != PointKind::Material);
        Self { coords: &self.coords * s, kind: self.kind }
    }

    /// Representative with `x0 = 1`.
    pub fn normalized(&self) -> DVector<f64> {
        &self.coords / self.coords[0]
    }

    /// Projective equality for ideal points, coordinate equality otherwise.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        if self.kind != other.kind || self.dim() != other.dim() {
            return false;
        }
        match self.kind {
            PointKind::Ideal => (self.normalized() - other.normalized()).amax() <= tol,
            _ => (&self.coords - &other.coords).amax() <= tol * (1.0 + self.coords[0].abs()),
        }
    }
}

/// `-u0 v0 + sum ui vi`.
pub fn minkowski_inner(u: &LorentzVector, v: &LorentzVector) -> Result<f64, LorentzError> {
    if u.coords.len() != v.coords.len() {
        return Err(LorentzError::DimensionMismatch(u.dim(), v.dim()));
    }
    Ok(mdot(&u.coords, &v.coords))
}

/// Hyperbolic distance between Material points.
pub fn distance(x: &LorentzVector, y: &LorentzVector) -> Result<f64, LorentzError> {
    for p in [x, y] {
        if p.kind != PointKind::Material {
            return Err(LorentzError::WrongKind { expected: PointKind::Material, got: p.kind });
        }
    }
    let c = -minkowski_inner(x, y)?;
    if c <= 1.0 {
        return Ok(0.0);
    }
    // acosh loses precision near 1; use the sinh form for nearby points.
    let diff = &x.coords - &y.coords;
    let chord = mdot(&diff, &diff).max(0.0).sqrt();
    if chord < 1e-3 {
        Ok(2.0 * (chord / 2.0).asinh())
    } else {
        Ok(c.acosh())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTarget {
    Klein,
    Hyperboloid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelPoint {
    Klein(DVector<f64>),
    Hyperboloid(LorentzVector),
}

/// Convert a Material or Ideal point to the Klein model or to its canonical
/// hyperboloid representative (ideal points normalized to `x0 = 1`).
pub fn model_convert(x: &LorentzVector, target: ModelTarget) -> Result<ModelPoint, LorentzError> {
    if x.kind == PointKind::Raw {
        return Err(LorentzError::WrongKind { expected: PointKind::Material, got: PointKind::Raw });
    }
    Ok(match target {
        ModelTarget::Klein => ModelPoint::Klein(klein(x)),
        ModelTarget::Hyperboloid => match x.kind {
            PointKind::Ideal => ModelPoint::Hyperboloid(LorentzVector::ideal_from(&x.coords)?),
            _ => ModelPoint::Hyperboloid(x.clone()),
        },
    })
}

/// Klein coordinates `(x1..xn)/x0`.
pub fn klein(x: &LorentzVector) -> DVector<f64> {
    let n = x.dim();
    x.coords.rows(1, n) / x.coords[0]
}

/// An element of SO(n,1) preserving the upper sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry {
    m: DMatrix<f64>,
}

fn form_residual(m: &DMatrix<f64>) -> f64 {
    let j = form_matrix(m.nrows() - 1);
    (m.transpose() * &j * m - j).amax()
}

/// Gram-Schmidt of the columns in the Minkowski metric.
fn minkowski_gram_schmidt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(d);
    for i in 0..d {
        let mut c = m.column(i).into_owned();
        for (j, b) in cols.iter().enumerate() {
            let sign = if j == 0 { -1.0 } else { 1.0 };
            let coef = mdot(&c, b) * sign;
            c -= b * coef;
        }
        let q = mdot(&c, &c);
        c /= q.abs().sqrt();
        cols.push(c);
    }
    DMatrix::from_columns(&cols)
}

impl Isometry {
    /// Validate `A^T J A = J`, `det A = 1`, `A00 > 0`.
    pub fn new(m: DMatrix<f64>) -> Result<Self, LorentzError> {
        if m.nrows() != m.ncols() {
            return Err(LorentzError::DimensionMismatch(m.nrows(), m.ncols()));
        }
        if m.nrows() < 3 {
            return Err(LorentzError::DimensionTooSmall(m.nrows().saturating_sub(1)));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(LorentzError::NotIsometry("non-finite entry".into()));
        }
        let r = form_residual(&m);
        if r > FORM_TOL * (1.0 + m.amax()).powi(2) {
            return Err(LorentzError::NotIsometry(format!("form residual {r:e}")));
        }
        let det = m.clone().determinant();
        if (det - 1.0).abs() > 1e-10 * (1.0 + m.amax()).powi(m.nrows() as i32) {
            return Err(LorentzError::NotIsometry(format!("determinant {det}")));
        }
        if m[(0, 0)] <= 0.0 {
            return Err(LorentzError::NotIsometry("A00 <= 0 swaps the sheets".into()));
        }
        Ok(Self { m })
    }

    /// Re-project onto SO(n,1) first if the form residual exceeds 1e-9.
    pub fn new_reprojected(m: DMatrix<f64>) -> Result<Self, LorentzError> {
        if m.nrows() == m.ncols() && m.nrows() >= 3 && form_residual(&m) > REPROJECT_TOL {
            return Self::new(minkowski_gram_schmidt(&m));
        }
        Self::new(m)
    }

    /// Wraps a product of validated isometries without re-checking it.
    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: DMatrix::identity(n + 1, n + 1) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows() - 1
    }

    /// `J A^T J`.
    pub fn inverse(&self) -> Self {
        let j = form_matrix(self.dim());
        Self { m: &j * self.m.transpose() * &j }
    }

    /// `self * other`, re-projected when drift exceeds the threshold.
    pub fn compose(&self, other: &Self) -> Self {
        let p = &self.m * &other.m;
        if form_residual(&p) > REPROJECT_TOL {
            Self { m: minkowski_gram_schmidt(&p) }
        } else {
            Self { m: p }
        }
    }

    pub fn conjugate_by(&self, g: &Self) -> Self {
        g.compose(self).compose(&g.inverse())
    }

    pub fn apply_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.m * v
    }

    /// Image of a point; Material images are re-normalized onto the sheet,
    /// Ideal images keep their (scaled) representative.
    pub fn apply(&self, x: &LorentzVector) -> LorentzVector {
        let c = &self.m * &x.coords;
        match x.kind {
            PointKind::Material => {
                let q = mdot(&c, &c);
                LorentzVector { coords: c / (-q).sqrt(), kind: PointKind::Material }
            }
            k => LorentzVector { coords: c, kind: k },
        }
    }

    /// `exp(X)` for `X` in so(n,1).
    pub fn exp_algebra(x: &DMatrix<f64>) -> Result<Self, LorentzError> {
        check_lie_algebra(x)?;
        Self::new_reprojected(x.clone().exp())
    }

    /// Max-entry distance to the identity.
    pub fn distance_to_identity(&self) -> f64 {
        (&self.m - DMatrix::identity(self.m.nrows(), self.m.ncols())).amax()
    }
}

/// Checks that `J X` is antisymmetric (the defining condition of so(n,1)).
pub fn check_lie_algebra(x: &DMatrix<f64>) -> Result<(), LorentzError> {
    if x.nrows() != x.ncols() {
        return Err(LorentzError::DimensionMismatch(x.nrows(), x.ncols()));
    }
    let jx = form_matrix(x.nrows() - 1) * x;
    let r = (&jx + jx.transpose()).amax();
    if r > 1e-10 * (1.0 + x.amax()) {
        return Err(LorentzError::NotLieAlgebra(r));
    }
    Ok(())
}

/// so(n,1) element with boost vector `b` (length n) and rotation generated by
/// the antisymmetric part of `r` (n x n).
pub fn lie_algebra_element(b: &[f64], r: &DMatrix<f64>) -> DMatrix<f64> {
    let n = b.len();
    let mut x = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        x[(0, i + 1)] = b[i];
        x[(i + 1, 0)] = b[i];
        for j in 0..n {
            x[(i + 1, j + 1)] = 0.5 * (r[(i, j)] - r[(j, i)]);
        }
    }
    x
}

/// Random so(n,1) element with entries of size about `scale`.
pub fn random_lie_algebra<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-scale..scale));
    lie_algebra_element(&b, &r)
}

/// Random isometry `exp(X)` with X of size about `scale`.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Isometry {
    let x = random_lie_algebra(rng, n, scale);
    Isometry::exp_algebra(&x).expect("random so(n,1) element exponentiates into SO(n,1)")
}

/// A 2x2 unimodular matrix, real (n = 2) or complex (n = 3).
#[derive(Debug, Clone, PartialEq)]
pub enum Moebius {
    Real(Matrix2<f64>),
    Complex(Matrix2<Complex64>),
}

impl Moebius {
    pub fn det(&self) -> Complex64 {
        match self {
            Moebius::Real(m) => Complex64::new(m.determinant(), 0.0),
            Moebius::Complex(m) => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        }
    }

    pub fn trace(&self) -> Complex64 {
        match self {
            Moebius::Real(m) => Complex64::new(m.trace(), 0.0),
            Moebius::Complex(m) => m[(0, 0)] + m[(1, 1)],
        }
    }
}

fn hermitian_basis() -> [Matrix2<Complex64>; 4] {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [
        Matrix2::new(o, z, z, o),
        Matrix2::new(z, o, o, z),
        Matrix2::new(z, i, -i, z),
        Matrix2::new(o, z, z, -o),
    ]
}

/// Adjoint lift SL(2,R) -> SO(2,1) or SL(2,C) -> SO(3,1).
///
/// For n = 3 a vector x corresponds to the Hermitian matrix
/// `[[x0+x3, x1+i x2],[x1-i x2, x0-x3]]` and m acts by `X -> m X m*`.
/// For n = 2 the symmetric matrix `[[x0+x2, x1],[x1, x0-x2]]` is acted on by `m X m^T`.
pub fn lift_moebius(m: &Moebius) -> Result<Isometry, LorentzError> {
    let det = m.det();
    if (det - 1.0).norm() > 1e-10 {
        return Err(LorentzError::BadDeterminant(det.norm()));
    }
    let mc = match m {
        Moebius::Real(r) => r.map(|x| Complex64::new(x, 0.0)),
        Moebius::Complex(c) => *c,
    };
    let basis = hermitian_basis();
    // Coordinates of a Hermitian matrix X in the basis above.
    let coords = |x: &Matrix2<Complex64>| -> [f64; 4] {
        [
            0.5 * (x[(0, 0)] + x[(1, 1)]).re,
            x[(0, 1)].re,
            x[(0, 1)].im,
            0.5 * (x[(0, 0)] - x[(1, 1)]).re,
        ]
    };
    let mstar = mc.adjoint();
    match m {
        Moebius::Complex(_) => {
            let mut a = DMatrix::zeros(4, 4);
            for (j, e) in basis.iter().enumerate() {
                let img = coords(&(mc * e * mstar));
                for i in 0..4 {
                    a[(i, j)] = img[i];
                }
            }
            Isometry::new_reprojected(a)
        }
        Moebius::Real(_) => {
            // Symmetric basis: e0 -> I, e1 -> [[0,1],[1,0]], e2 -> diag(1,-1).
            let b2 = [basis[0], basis[1], basis[3]];
            let mut a = DMatrix::zeros(3, 3);
            for (j, e) in b2.iter().enumerate() {
                let img = coords(&(mc * e * mc.transpose()));
                let v = [img[0], img[1], img[3]];
                for i in 0..3 {
                    a[(i, j)] = v[i];
                }
            }
            Isometry::new_reprojected(a)
        }
    }
}

/// Ideal point of H^3 corresponding to `z` in the Riemann sphere (`None` = infinity).
pub fn ideal_from_complex(z: Option<Complex64>) -> LorentzVector {
    match z {
        None => LorentzVector::ideal_from_boundary(None, 3).expect("infinity is ideal"),
        Some(z) => LorentzVector::ideal_from_boundary(Some(&[z.re, z.im]), 3)
            .expect("finite boundary point is ideal"),
    }
}

/// Ideal point of H^2 corresponding to `x` in the extended real line.
pub fn ideal_from_real(x: Option<f64>) -> LorentzVector {
    match x {
        None => LorentzVector::ideal_from_boundary(None, 2).expect("infinity is ideal"),
        Some(x) => LorentzVector::ideal_from_boundary(Some(&[x]), 2).expect("finite point is ideal"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IsometryClass {
    Elliptic,
    Parabolic,
    Loxodromic,
    Identity,
}

/// Fixed points on the sphere at infinity.
#[derive(Debug, Clone, PartialEq)]
pub enum IdealFixed {
    Points(Vec<LorentzVector>),
    /// Pointwise-fixed round sphere of the given dimension (n-1 for the whole boundary).
    Sphere { dim: usize },
}

impl IdealFixed {
    pub fn points(&self) -> &[LorentzVector] {
        match self {
            IdealFixed::Points(p) => p,
            IdealFixed::Sphere { .. } => &[],
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, IdealFixed::Points(p) if p.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsometryClassification {
    pub class: IsometryClass,
    pub interior_fixed: Option<LorentzVector>,
    pub ideal_fixed: IdealFixed,
}

/// Orthonormal basis (columns) of the numerical null space of `m`.
fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let d = m.ncols();
    let padded;
    let m = if m.nrows() < d {
        padded = m.clone().resize(d, d, 0.0);
        &padded
    } else {
        m
    };
    let svd = nalgebra::linalg::SVD::new(m.clone(), false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut cols = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol {
            cols.push(vt.row(i).transpose());
        }
    }
    if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Signature analysis of the restriction of the form to span(N).
struct SubspaceForm {
    n_basis: DMatrix<f64>,
    gram: DMatrix<f64>,
    eig: Vec<f64>,
    evecs: DMatrix<f64>,
}

impl SubspaceForm {
    fn new(n_basis: DMatrix<f64>) -> Self {
        let j = form_matrix(n_basis.nrows() - 1);
        let gram = n_basis.transpose() * &j * &n_basis;
        if gram.is_empty() {
            return Self { n_basis, evecs: gram.clone(), gram, eig: Vec::new() };
        }
        let se = nalgebra::linalg::SymmetricEigen::new(gram.clone());
        Self { n_basis, gram, eig: se.eigenvalues.iter().copied().collect(), evecs: se.eigenvectors }
    }

    fn dim(&self) -> usize {
        self.n_basis.ncols()
    }

    fn min_eig(&self) -> f64 {
        self.eig.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn has_timelike(&self, tol: f64) -> bool {
        self.dim() > 0 && self.min_eig() < -tol
    }

    /// Lightlike directions in the radical of a degenerate PSD restriction.
    fn radical(&self, tol: f64) -> Vec<DVector<f64>> {
        let mut out = Vec::new();
        for (i, e) in self.eig.iter().enumerate() {
            if e.abs() <= tol {
                out.push(&self.n_basis * self.evecs.column(i));
            }
        }
        out
    }

    /// Minkowski projection of `e0` onto the subspace, normalized.
    fn projected_origin(&self) -> Option<LorentzVector> {
        let d = self.n_basis.nrows();
        let j = form_matrix(d - 1);
        let mut e0 = DVector::zeros(d);
        e0[0] = 1.0;
        let rhs = self.n_basis.transpose() * &j * e0;
        let c = self.gram.clone().lu().solve(&rhs)?;
        let x = &self.n_basis * c;
        let x = if x[0] < 0.0 { -x } else { x };
        LorentzVector::material_from(&x).ok()
    }

    /// Both lightlike rays of a 2-dimensional Lorentzian subspace.
    fn lightlike_pair(&self) -> Vec<LorentzVector> {
        let x = match self.projected_origin() {
            Some(x) => x,
            None => return vec![],
        };
        let mut out = Vec::new();
        for k in 0..self.dim() {
            let mut u = self.n_basis.column(k).into_owned();
            u -= x.coords() * (-mdot(&u, x.coords()));
            let q = mdot(&u, &u);
            if q > 1e-8 {
                let u = u / q.sqrt();
                for s in [1.0, -1.0] {
                    if let Ok(p) = LorentzVector::ideal_from(&(x.coords() + &u * s)) {
                        out.push(p);
                    }
                }
                break;
            }
        }
        out
    }
}

fn future_ray(v: &DVector<f64>) -> Option<LorentzVector> {
    let v = if v[0] < 0.0 { -v } else { v.clone() };
    LorentzVector::ideal_from(&v).ok()
}

fn classify_at(a: &Isometry, tol: f64) -> Result<IsometryClassification, LorentzError> {
    let n = a.dim();
    let scale = 1.0 + a.m.amax();
    if a.distance_to_identity() <= tol * scale {
        return Ok(IsometryClassification {
            class: IsometryClass::Identity,
            interior_fixed: Some(LorentzVector::origin(n)),
            ideal_fixed: IdealFixed::Sphere { dim: n - 1 },
        });
    }
    let eye = DMatrix::identity(n + 1, n + 1);
    let v = null_space(&(&a.m - &eye), 10.0 * tol * scale);
    let sf = SubspaceForm::new(v);
    let gtol = 10.0 * tol;
    if sf.has_timelike(gtol) {
        let x = sf
            .projected_origin()
            .ok_or_else(|| LorentzError::Eigen("elliptic fixed subspace projection failed".into()))?;
        let ideal = if sf.dim() == 2 {
            IdealFixed::Points(sf.lightlike_pair())
        } else if sf.dim() > 2 {
            IdealFixed::Sphere { dim: sf.dim() - 2 }
        } else {
            IdealFixed::Points(vec![])
        };
        return Ok(IsometryClassification {
            class: IsometryClass::Elliptic,
            interior_fixed: Some(x),
            ideal_fixed: ideal,
        });
    }
    let rad = sf.radical(gtol);
    if !rad.is_empty() {
        let p = future_ray(&rad[0]).ok_or_else(|| LorentzError::Eigen("parabolic ray not lightlike".into()))?;
        return Ok(IsometryClassification {
            class: IsometryClass::Parabolic,
            interior_fixed: None,
            ideal_fixed: IdealFixed::Points(vec![p]),
        });
    }
    // Loxodromic: real eigenvalues lambda > 1 and 1/lambda on lightlike rays.
    let ev = a.m.clone().complex_eigenvalues();
    let lam = ev
        .iter()
        .filter(|z| z.im.abs() <= 1e-9 * z.norm().max(1.0) && z.re > 0.0)
        .map(|z| z.re)
        .fold(0.0_f64, f64::max);
    if lam <= 1.0 + 10.0 * tol {
        return Err(LorentzError::Ambiguous {
            first: IsometryClass::Loxodromic,
            second: IsometryClass::Parabolic,
        });
    }
    let mut pts = Vec::new();
    for l in [lam, 1.0 / lam] {
        let ns = null_space(&(&a.m - &eye * l), 1e-6 * scale);
        let p = (0..ns.ncols())
            .find_map(|k| future_ray(&ns.column(k).into_owned()))
            .ok_or_else(|| LorentzError::Eigen(format!("no lightlike eigenvector for {l}")))?;
        pts.push(p);
    }
    Ok(IsometryClassification {
        class: IsometryClass::Loxodromic,
        interior_fixed: None,
        ideal_fixed: IdealFixed::Points(pts),
    })
}

/// Classify by the fixed subspace of A and its signature; the class must be
/// stable between `tol` and `100 tol`, otherwise the result is Ambiguous.
pub fn classify_isometry(a: &Isometry, tol: f64) -> Result<IsometryClassification, LorentzError> {
    let fine = classify_at(a, tol)?;
    match classify_at(a, 100.0 * tol) {
        Ok(coarse) if coarse.class == fine.class => Ok(fine),
        Ok(coarse) => Err(LorentzError::Ambiguous { first: fine.class, second: coarse.class }),
        Err(_) => Ok(fine),
    }
}

/// Common fixed locus in the closed ball.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSet {
    pub interior: Option<LorentzVector>,
    pub ideal: IdealFixed,
    /// Dimension of the common eigenvalue-1 subspace.
    pub fixed_dim: usize,
    /// Unit spacelike fixed vector orthogonal to `interior`; `x + u` is a fixed ideal point.
    pub spacelike: Option<DVector<f64>>,
}

/// Whether `A x = lambda x` for some `lambda > 0`.
fn projectively_fixed(a: &Isometry, x: &LorentzVector, tol: f64) -> bool {
    let ax = a.apply_vec(x.coords());
    let lam = ax[0] / x.coords()[0];
    lam > 0.0 && (&ax - x.coords() * lam).amax() <= tol * ax.amax().max(1.0)
}

fn push_unique(list: &mut Vec<LorentzVector>, p: LorentzVector) {
    if !list.iter().any(|q| q.approx_eq(&p, IDEAL_EQ_TOL.max(1e-7))) {
        list.push(p);
    }
}

/// Intersection of the eigenvalue-1 eigenspaces of `gens` with the solid
/// hyperboloid, plus common (projectively) fixed ideal rays.
pub fn common_fixed_set(gens: &[Isometry], tol: f64) -> Result<FixedSet, LorentzError> {
    let first = gens.first().ok_or(LorentzError::EmptyFixedSet)?;
    let d = first.dim() + 1;
    for g in gens {
        if g.dim() + 1 != d {
            return Err(LorentzError::DimensionMismatch(first.dim(), g.dim()));
        }
    }
    let eye = DMatrix::identity(d, d);
    let mut stacked = DMatrix::zeros(d * gens.len(), d);
    let mut scale = 1.0_f64;
    for (k, g) in gens.iter().enumerate() {
        stacked.view_mut((k * d, 0), (d, d)).copy_from(&(g.matrix() - &eye));
        scale = scale.max(1.0 + g.matrix().amax());
    }
    let v = null_space(&stacked, 10.0 * tol * scale);
    let sf = SubspaceForm::new(v);
    let gtol = 10.0 * tol;
    if sf.has_timelike(gtol) {
        let x = sf.projected_origin().ok_or(LorentzError::EmptyFixedSet)?;
        let ideal = match sf.dim() {
            1 => IdealFixed::Points(vec![]),
            2 => IdealFixed::Points(sf.lightlike_pair()),
            k => IdealFixed::Sphere { dim: k - 2 },
        };
        let xc = x.coords().clone();
        let spacelike = (0..sf.n_basis.ncols())
            .map(|k| {
                let c = sf.n_basis.column(k).into_owned();
                &c + &xc * mdot(&c, &xc)
            })
            .max_by(|a, b| mdot(a, a).total_cmp(&mdot(b, b)))
            .filter(|u| mdot(u, u) > gtol)
            .map(|u| {
                let q = mdot(&u, &u).sqrt();
                u / q
            });
        return Ok(FixedSet { interior: Some(x), ideal, fixed_dim: sf.dim(), spacelike });
    }
    let mut cands: Vec<LorentzVector> = Vec::new();
    for r in sf.radical(gtol) {
        if let Some(p) = future_ray(&r) {
            push_unique(&mut cands, p);
        }
    }
    for g in gens {
        if let Ok(c) = classify_at(g, tol) {
            if matches!(c.class, IsometryClass::Parabolic | IsometryClass::Loxodromic) {
                for p in c.ideal_fixed.points() {
                    push_unique(&mut cands, p.clone());
                }
            }
        }
    }
    let ideal: Vec<LorentzVector> =
        cands.into_iter().filter(|p| gens.iter().all(|g| projectively_fixed(g, p, tol.sqrt()))).collect();
    if ideal.is_empty() {
        return Err(LorentzError::EmptyFixedSet);
    }
    Ok(FixedSet { interior: None, ideal: IdealFixed::Points(ideal), fixed_dim: sf.dim(), spacelike: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(n: usize, i: usize) -> LorentzVector {
        let mut c = DVector::zeros(n + 1);
        c[i] = 1.0;
        LorentzVector::raw(c)
    }

    #[test]
    fn inner_products_of_basis_vectors() {
        assert_eq!(minkowski_inner(&e(3, 0), &e(3, 0)).unwrap(), -1.0);
        assert_eq!(minkowski_inner(&e(3, 1), &e(3, 1)).unwrap(), 1.0);
        let v = LorentzVector::raw(DVector::from_vec(vec![2f64.sqrt(), 1.0, 0.0]));
        assert_relative_eq!(minkowski_inner(&v, &v).unwrap(), -1.0, epsilon = 1e-15);
        assert!(minkowski_inner(&e(2, 0), &e(3, 0)).is_err());
    }

    #[test]
    fn distance_basics() {
        let o = LorentzVector::origin(3);
        assert_eq!(distance(&o, &o).unwrap(), 0.0);
        let y = LorentzVector::new(DVector::from_vec(vec![1f64.cosh(), 1f64.sinh(), 0.0, 0.0]), PointKind::Material)
            .unwrap();
        assert_relative_eq!(distance(&o, &y).unwrap(), 1.0, epsilon = 1e-14);
        assert!(distance(&o, &e(3, 1)).is_err());
    }

    #[test]
    fn klein_conversions() {
        let o = LorentzVector::origin(3);
        assert_eq!(model_convert(&o, ModelTarget::Klein).unwrap(), ModelPoint::Klein(DVector::zeros(3)));
        let id = LorentzVector::new(DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]), PointKind::Ideal).unwrap();
        match model_convert(&id, ModelTarget::Klein).unwrap() {
            ModelPoint::Klein(k) => assert_relative_eq!((k - DVector::from_vec(vec![1.0, 0.0, 0.0])).amax(), 0.0),
            _ => unreachable!(),
        }
        assert!(model_convert(&e(3, 1), ModelTarget::Klein).is_err());
    }

    #[test]
    fn upper_half_space_infinity_and_lifts() {
        let inf = LorentzVector::ideal_from_boundary(None, 3).unwrap();
        let t = lift_moebius(&Moebius::Complex(Matrix2::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.3, 0.7),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        )))
        .unwrap();
        assert!(t.apply(&inf).approx_eq(&inf, 1e-12));
        // z -> z + b moves the boundary point 0 to b.
        let zero = ideal_from_complex(Some(Complex64::new(0.0, 0.0)));
        let b = ideal_from_complex(Some(Complex64::new(0.3, 0.7)));
        assert!(t.apply(&zero).approx_eq(&b, 1e-12));
    }

    #[test]
    fn parabolic_lift_is_parabolic() {
        let a = lift_moebius(&Moebius::Real(Matrix2::new(1.0, 1.0, 0.0, 1.0))).unwrap();
        let c = classify_isometry(&a, EIGEN_TOL).unwrap();
        assert_eq!(c.class, IsometryClass::Parabolic);
        // Oracle: the kernel of (A - I)^2 restricted to lightlike vectors is the ray of infinity.
        let inf = ideal_from_real(None);
        assert!(c.ideal_fixed.points()[0].approx_eq(&inf, 1e-9));
    }

    #[test]
    fn rotation_is_elliptic_about_origin() {
        let mut m = DMatrix::identity(3, 3);
        m[(1, 1)] = 0.0;
        m[(1, 2)] = -1.0;
        m[(2, 1)] = 1.0;
        m[(2, 2)] = 0.0;
        let c = classify_isometry(&Isometry::new(m).unwrap(), EIGEN_TOL).unwrap();
        assert_eq!(c.class, IsometryClass::Elliptic);
        assert!(c.interior_fixed.unwrap().approx_eq(&LorentzVector::origin(2), 1e-12));
    }

    #[test]
    fn identity_classification_and_fixed_set() {
        let c = classify_isometry(&Isometry::identity(3), EIGEN_TOL).unwrap();
        assert_eq!(c.class, IsometryClass::Identity);
        let fs = common_fixed_set(&[Isometry::identity(3)], EIGEN_TOL).unwrap();
        assert!(fs.interior.unwrap().approx_eq(&LorentzVector::origin(3), 1e-12));
        assert_eq!(fs.ideal, IdealFixed::Sphere { dim: 2 });
    }

    #[test]
    fn loxodromic_diagonal() {
        let m = Moebius::Real(Matrix2::new(2.0, 0.0, 0.0, 0.5));
        let c = classify_isometry(&lift_moebius(&m).unwrap(), EIGEN_TOL).unwrap();
        assert_eq!(c.class, IsometryClass::Loxodromic);
        let pts = c.ideal_fixed.points();
        assert_eq!(pts.len(), 2);
        let zero = ideal_from_real(Some(0.0));
        let inf = ideal_from_real(None);
        assert!(pts.iter().any(|p| p.approx_eq(&zero, 1e-9)));
        assert!(pts.iter().any(|p| p.approx_eq(&inf, 1e-9)));
    }

    #[test]
    fn shared_parabolic_fixed_point() {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let a = lift_moebius(&Moebius::Complex(Matrix2::new(one, one, zero, one))).unwrap();
        let b = lift_moebius(&Moebius::Complex(Matrix2::new(one, Complex64::new(0.5, 0.866), zero, one))).unwrap();
        let fs = common_fixed_set(&[a, b], EIGEN_TOL).unwrap();
        assert!(fs.interior.is_none());
        let pts = fs.ideal.points();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].approx_eq(&ideal_from_complex(None), 1e-9));
    }

    #[test]
    fn rotations_fix_origin_only() {
        let rot = |t: f64| {
            let mut m = DMatrix::identity(3, 3);
            m[(1, 1)] = t.cos();
            m[(1, 2)] = -t.sin();
            m[(2, 1)] = t.sin();
            m[(2, 2)] = t.cos();
            Isometry::new(m).unwrap()
        };
        let fs = common_fixed_set(&[rot(std::f64::consts::PI / 3.0), rot(std::f64::consts::PI / 5.0)], EIGEN_TOL)
            .unwrap();
        assert!(fs.interior.unwrap().approx_eq(&LorentzVector::origin(2), 1e-12));
        assert!(fs.ideal.is_empty());
    }

    #[test]
    fn lift_rejects_bad_determinant() {
        assert!(lift_moebius(&Moebius::Real(Matrix2::new(2.0, 0.0, 0.0, 1.0))).is_err());
    }

    #[test]
    fn lie_algebra_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_lie_algebra(&mut rng, 4, 1.0);
        assert!(check_lie_algebra(&x).is_ok());
        let mut bad = x.clone();
        bad[(0, 1)] += 0.1;
        assert!(check_lie_algebra(&bad).is_err());
    }

    #[test]
    fn reprojection_repairs_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_isometry(&mut rng, 3, 0.5);
        let mut m = g.matrix().clone();
        m[(1, 2)] += 1e-7;
        assert!(Isometry::new(m.clone()).is_err());
        let fixed = Isometry::new_reprojected(m).unwrap();
        assert!((fixed.matrix() - g.matrix()).amax() < 1e-6);
    }
}
