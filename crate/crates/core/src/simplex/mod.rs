//! Geodesic simplices in the closed hyperbolic n-ball.
//!
//! Signed volumes (the volume cocycle and its extension to ideal vertices),
//! dihedral angles, codimension-2 face measures, horoball-truncated edge
//! lengths, and smooth one-parameter simplex families.

pub mod cubature;
pub mod lobachevsky;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lorentz::{self, distance, mdot, Isometry, LorentzError, LorentzVector, PointKind};
pub use lobachevsky::{ideal_tet_volume, lobachevsky, regular_ideal_tet_volume};

/// Relative threshold on the x0-normalized determinant.
pub const DEGENERACY_TOL: f64 = 1e-12;
/// Default absolute tolerance for cubature-based volumes.
pub const DEFAULT_VOLUME_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
    #[error("a {n}-simplex needs {} vertices, got {got}", .n + 1)]
    VertexCount { n: usize, got: usize },
    #[error("vertex {0} is a raw vector")]
    RawVertex(usize),
    #[error("degenerate simplex")]
    Degenerate,
    #[error("invalid face {0:?}")]
    BadFace(Vec<usize>),
    #[error("cubature did not reach tolerance: estimate {estimate}, error bound {bound:e}")]
    NonConvergent { estimate: f64, bound: f64 },
    #[error("dihedral angles sum to {0}, not pi")]
    AngleSum(f64),
    #[error("edge with an ideal endpoint has infinite length; use the truncated length")]
    InfiniteFaceMeasure,
    #[error("operation requires dimension {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("no horoball assigned to ideal vertex {0}")]
    MissingHoroball(usize),
    #[error("horoballs at vertices {0} and {1} overlap")]
    OverlappingHoroballs(usize, usize),
    #[error("vertex slot {slot} changes type within the family")]
    TypeChange { slot: usize },
    #[error("family parameter {0} outside [0, 1]")]
    ParameterRange(f64),
    #[error("invalid keyframes: {0}")]
    Keyframes(String),
}

/// Ordered tuple of n+1 Material or Ideal vertices in the closed ball.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSimplex {
    vertices: Vec<LorentzVector>,
}

impl GeodesicSimplex {
    pub fn new(vertices: Vec<LorentzVector>) -> Result<Self, SimplexError> {
        let n = vertices.len().saturating_sub(1);
        if n < 2 {
            return Err(LorentzError::DimensionTooSmall(n).into());
        }
        for (i, v) in vertices.iter().enumerate() {
            if v.dim() != n {
                return Err(SimplexError::VertexCount { n: v.dim(), got: vertices.len() });
            }
            if v.kind() == PointKind::Raw {
                return Err(SimplexError::RawVertex(i));
            }
        }
        Ok(Self { vertices })
    }

    /// Simplex from Klein coordinates; unit vectors become ideal vertices.
    pub fn from_klein(points: &[DVector<f64>]) -> Result<Self, SimplexError> {
        let v = points.iter().map(LorentzVector::from_klein).collect::<Result<Vec<_>, _>>()?;
        Self::new(v)
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[LorentzVector] {
        &self.vertices
    }

    pub fn kinds(&self) -> Vec<PointKind> {
        self.vertices.iter().map(|v| v.kind()).collect()
    }

    pub fn ideal_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.is_ideal()).count()
    }

    pub fn klein_vertices(&self) -> Vec<DVector<f64>> {
        self.vertices.iter().map(lorentz::klein).collect()
    }

    /// Columns are the vertices scaled to `x0 = 1`.
    pub fn normalized_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.vertices.iter().map(|v| v.normalized()).collect::<Vec<_>>())
    }

    /// Determinant of the x0-normalized vertex matrix.
    pub fn normalized_det(&self) -> f64 {
        self.normalized_matrix().determinant()
    }

    /// Largest Euclidean edge length in the Klein model.
    pub fn klein_scale(&self) -> f64 {
        let k = self.klein_vertices();
        let mut s: f64 = 0.0;
        for i in 0..k.len() {
            for j in (i + 1)..k.len() {
                s = s.max((&k[i] - &k[j]).norm());
            }
        }
        s
    }

    /// `|det| < 1e-12 scale^n` on the x0-normalized matrix.
    pub fn is_degenerate(&self) -> bool {
        let scale = self.klein_scale();
        scale == 0.0 || self.normalized_det().abs() < DEGENERACY_TOL * scale.powi(self.dim() as i32)
    }

    /// Orientation sign: +1, -1, or 0 when degenerate.
    pub fn orientation(&self) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            self.normalized_det().signum()
        }
    }

    pub fn apply(&self, g: &Isometry) -> Self {
        Self { vertices: self.vertices.iter().map(|v| g.apply(v)).collect() }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { vertices: perm.iter().map(|&i| self.vertices[i].clone()).collect() }
    }

    /// Ideal vertex representatives rescaled by the given positive factors.
    pub fn rescaled_ideal(&self, scales: &BTreeMap<usize, f64>) -> Self {
        let vertices = self
            .vertices
            .iter()
            .enumerate()
            .map(|(i, v)| match scales.get(&i) {
                Some(s) if v.is_ideal() => v.rescaled(*s),
                _ => v.clone(),
            })
            .collect();
        Self { vertices }
    }

    /// Unit spacelike normals `m_i` to the facets opposite each vertex,
    /// oriented so that `<m_i, v_i> > 0`.
    fn inward_normals(&self) -> Result<Vec<DVector<f64>>, SimplexError> {
        if self.is_degenerate() {
            return Err(SimplexError::Degenerate);
        }
        let v = DMatrix::from_columns(&self.vertices.iter().map(|x| x.coords().clone()).collect::<Vec<_>>());
        let inv = v.try_inverse().ok_or(SimplexError::Degenerate)?;
        let d = self.dim() + 1;
        let j = lorentz::form_matrix(self.dim());
        let mut out = Vec::with_capacity(d);
        for i in 0..d {
            // Row i of V^{-1} pairs to delta_ik with the vertices; J maps it to
            // a Minkowski-orthogonal vector with <w, v_i> = 1.
            let w = &j * inv.row(i).transpose();
            let q = mdot(&w, &w);
            if q <= 0.0 {
                return Err(SimplexError::Degenerate);
            }
            out.push(w / q.sqrt());
        }
        Ok(out)
    }

    /// Faces as sorted pairs of omitted vertex indices.
    pub fn codim2_faces(&self) -> Vec<(usize, usize)> {
        let d = self.dim() + 1;
        let mut out = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                out.push((i, j));
            }
        }
        out
    }
}

fn check_face(s: &GeodesicSimplex, face: (usize, usize)) -> Result<(usize, usize), SimplexError> {
    let (i, j) = face;
    let d = s.dim() + 1;
    if i == j || i >= d || j >= d {
        return Err(SimplexError::BadFace(vec![i, j]));
    }
    Ok(if i < j { (i, j) } else { (j, i) })
}

/// Dihedral angle at the codimension-2 face spanned by the vertices other
/// than `face = (i, j)`: `arccos(-<m_i, m_j>)`.
pub fn dihedral_angle(s: &GeodesicSimplex, face: (usize, usize)) -> Result<f64, SimplexError> {
    let (i, j) = check_face(s, face)?;
    if let Some(a) = ideal_corner(s, (i, j)) {
        return Ok(a);
    }
    let m = s.inward_normals()?;
    Ok(angle_from_normals(&m[i], &m[j]))
}

/// In a triangle the angle at an ideal vertex is exactly 0.
fn ideal_corner(s: &GeodesicSimplex, (i, j): (usize, usize)) -> Option<f64> {
    if s.dim() != 2 {
        return None;
    }
    let v = 3 - i - j;
    s.vertices[v].is_ideal().then_some(0.0)
}

fn angle_from_normals(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (-mdot(a, b)).clamp(-1.0, 1.0).acos()
}

/// All dihedral angles keyed by omitted pair.
pub fn dihedral_angles(s: &GeodesicSimplex) -> Result<BTreeMap<(usize, usize), f64>, SimplexError> {
    let m = s.inward_normals()?;
    Ok(s.codim2_faces()
        .into_iter()
        .map(|f| (f, ideal_corner(s, f).unwrap_or_else(|| angle_from_normals(&m[f.0], &m[f.1]))))
        .collect())
}

/// Interior angle of a triangle at vertex `v`.
pub fn triangle_angle(s: &GeodesicSimplex, v: usize) -> Result<f64, SimplexError> {
    if s.dim() != 2 {
        return Err(SimplexError::WrongDimension { expected: 2, got: s.dim() });
    }
    let others: Vec<usize> = (0..3).filter(|&k| k != v).collect();
    if others.len() != 2 {
        return Err(SimplexError::BadFace(vec![v]));
    }
    dihedral_angle(s, (others[0], others[1]))
}

/// Closed form or cubature plan for the volume of a fixed combinatorial type.
#[derive(Debug, Clone, PartialEq)]
pub enum VolumePlan {
    AngleDefect,
    IdealLobachevsky,
    Cubature(cubature::CubaturePlan),
}

impl VolumePlan {
    /// Choose the evaluation strategy for `s` and, for cubature, refine cells to `tol`.
    pub fn build(s: &GeodesicSimplex, tol: f64) -> Result<Self, SimplexError> {
        if s.dim() == 2 {
            return Ok(Self::AngleDefect);
        }
        if s.dim() == 3 && s.ideal_count() == 4 {
            return Ok(Self::IdealLobachevsky);
        }
        if s.is_degenerate() {
            return Err(SimplexError::Degenerate);
        }
        let ideal: Vec<bool> = s.vertices.iter().map(|v| v.is_ideal()).collect();
        let (_, plan) = cubature::integrate(&s.klein_vertices(), &ideal, tol)
            .map_err(|f| SimplexError::NonConvergent { estimate: f.estimate, bound: f.bound })?;
        Ok(Self::Cubature(plan))
    }

    /// Unsigned volume of `s` with this plan (0 for degenerate input).
    pub fn unsigned_volume(&self, s: &GeodesicSimplex) -> Result<f64, SimplexError> {
        if s.is_degenerate() {
            return Ok(0.0);
        }
        match self {
            Self::AngleDefect => {
                let a = dihedral_angles(s)?;
                Ok((PI - a.values().sum::<f64>()).max(0.0))
            }
            Self::IdealLobachevsky => {
                let a = dihedral_angles(s)?;
                // Edges at vertex 0 are the faces omitting (2,3), (1,3), (1,2).
                ideal_tet_volume(a[&(2, 3)], a[&(1, 3)], a[&(1, 2)])
                    .or_else(|_| Ok((lobachevsky(a[&(2, 3)]) + lobachevsky(a[&(1, 3)]) + lobachevsky(a[&(1, 2)])).abs()))
            }
            Self::Cubature(p) => Ok(p.evaluate(&s.klein_vertices())),
        }
    }

    pub fn signed_volume(&self, s: &GeodesicSimplex) -> Result<f64, SimplexError> {
        Ok(s.orientation() * self.unsigned_volume(s)?)
    }
}

/// Signed volume: orientation sign times Riemannian volume, 0 when degenerate.
pub fn signed_volume(s: &GeodesicSimplex, tol: f64) -> Result<f64, SimplexError> {
    if s.is_degenerate() {
        return Ok(0.0);
    }
    VolumePlan::build(s, tol)?.signed_volume(s)
}

/// Unsigned volume by adaptive Klein-model cubature, ignoring closed forms.
pub fn numeric_volume(s: &GeodesicSimplex, tol: f64) -> Result<f64, SimplexError> {
    Ok(numeric_volume_with_error(s, tol)?.0)
}

/// Cubature value together with its error estimate.
pub fn numeric_volume_with_error(s: &GeodesicSimplex, tol: f64) -> Result<(f64, f64), SimplexError> {
    if s.is_degenerate() {
        return Err(SimplexError::Degenerate);
    }
    let ideal: Vec<bool> = s.vertices.iter().map(|v| v.is_ideal()).collect();
    let (r, _) = cubature::integrate(&s.klein_vertices(), &ideal, tol)
        .map_err(|f| SimplexError::NonConvergent { estimate: f.estimate, bound: f.bound })?;
    Ok((r.value, r.error))
}

/// Minkowski-orthonormal coordinates of a Lorentzian subspace spanned by `pts`.
fn restrict_to_span(pts: &[&LorentzVector]) -> Result<Vec<LorentzVector>, SimplexError> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut t: DVector<f64> = pts.iter().map(|p| p.coords().clone()).sum();
    let q = mdot(&t, &t);
    if q >= 0.0 {
        return Err(SimplexError::Degenerate);
    }
    t /= (-q).sqrt();
    basis.push(t);
    for p in pts {
        let mut v = p.coords().clone();
        for (k, b) in basis.iter().enumerate() {
            let sign = if k == 0 { -1.0 } else { 1.0 };
            v -= b * (sign * mdot(&v, b));
        }
        let q = mdot(&v, &v);
        let scale = p.coords().norm_squared();
        if q > 1e-20 * scale && basis.len() < pts.len() {
            basis.push(v / q.sqrt());
        }
    }
    if basis.len() != pts.len() {
        return Err(SimplexError::Degenerate);
    }
    pts.iter()
        .map(|p| {
            let c = DVector::from_iterator(
                basis.len(),
                basis.iter().enumerate().map(|(k, b)| if k == 0 { -mdot(p.coords(), b) } else { mdot(p.coords(), b) }),
            );
            match p.kind() {
                PointKind::Ideal => LorentzVector::ideal_from(&c),
                _ => LorentzVector::material_from(&c),
            }
            .map_err(SimplexError::from)
        })
        .collect()
}

/// (n-2)-volume of the codimension-2 face omitting `face = (i, j)`.
///
/// For n = 2 the measure of a point is 0 by convention; for n = 3 the face is
/// an edge and must have Material endpoints.
pub fn face_measure(s: &GeodesicSimplex, face: (usize, usize), tol: f64) -> Result<f64, SimplexError> {
    let (i, j) = check_face(s, face)?;
    let n = s.dim();
    if n == 2 {
        return Ok(0.0);
    }
    let pts: Vec<&LorentzVector> =
        s.vertices.iter().enumerate().filter(|(k, _)| *k != i && *k != j).map(|(_, v)| v).collect();
    if n == 3 {
        if pts.iter().any(|p| p.is_ideal()) {
            return Err(SimplexError::InfiniteFaceMeasure);
        }
        return Ok(distance(pts[0], pts[1])?);
    }
    let face_simplex = GeodesicSimplex::new(restrict_to_span(&pts)?)?;
    Ok(signed_volume(&face_simplex, tol)?.abs())
}

/// Horoball scales keyed by vertex index; horoball = `{x : <x, s l> >= -1}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HoroballAssignment {
    pub scales: BTreeMap<usize, f64>,
}

impl HoroballAssignment {
    pub fn new(scales: BTreeMap<usize, f64>) -> Self {
        Self { scales }
    }

    pub fn uniform(s: &GeodesicSimplex, scale: f64) -> Self {
        Self {
            scales: s.vertices.iter().enumerate().filter(|(_, v)| v.is_ideal()).map(|(i, _)| (i, scale)).collect(),
        }
    }

    fn scale(&self, v: usize) -> Result<f64, SimplexError> {
        match self.scales.get(&v) {
            Some(s) if *s > 0.0 => Ok(*s),
            _ => Err(SimplexError::MissingHoroball(v)),
        }
    }
}

/// Length of the edge `(a, b)` of a tetrahedron outside the assigned horoballs.
pub fn truncated_edge_length(
    s: &GeodesicSimplex,
    edge: (usize, usize),
    h: &HoroballAssignment,
) -> Result<f64, SimplexError> {
    if s.dim() != 3 {
        return Err(SimplexError::WrongDimension { expected: 3, got: s.dim() });
    }
    let (a, b) = edge;
    if a == b || a > 3 || b > 3 {
        return Err(SimplexError::BadFace(vec![a, b]));
    }
    let (x, y) = (&s.vertices[a], &s.vertices[b]);
    match (x.is_ideal(), y.is_ideal()) {
        (false, false) => Ok(distance(x, y)?),
        (true, false) => Ok((h.scale(a)? * -mdot(x.coords(), y.coords())).ln()),
        (false, true) => Ok((h.scale(b)? * -mdot(x.coords(), y.coords())).ln()),
        (true, true) => {
            let l = (h.scale(a)? * h.scale(b)? * -mdot(x.coords(), y.coords()) / 2.0).ln();
            if l <= 0.0 {
                return Err(SimplexError::OverlappingHoroballs(a, b));
            }
            Ok(l)
        }
    }
}

/// The edge `{0..3} \ {i, j}` as the pair of its endpoints.
pub fn edge_of_face(face: (usize, usize)) -> (usize, usize) {
    let rest: Vec<usize> = (0..4).filter(|&k| k != face.0 && k != face.1).collect();
    (rest[0], rest[1])
}

type FamilyFn = dyn Fn(f64) -> Result<GeodesicSimplex, SimplexError> + Send + Sync;

/// A C^1 one-parameter family of simplices of a fixed vertex-type pattern.
#[derive(Clone)]
pub struct SimplexFamily {
    kinds: Vec<PointKind>,
    f: Arc<FamilyFn>,
}

impl std::fmt::Debug for SimplexFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimplexFamily").field("kinds", &self.kinds).finish()
    }
}

impl SimplexFamily {
    pub fn from_fn<F>(kinds: Vec<PointKind>, f: F) -> Self
    where
        F: Fn(f64) -> Result<GeodesicSimplex, SimplexError> + Send + Sync + 'static,
    {
        Self { kinds, f: Arc::new(f) }
    }

    pub fn constant(s: GeodesicSimplex) -> Self {
        let kinds = s.kinds();
        Self::from_fn(kinds, move |_| Ok(s.clone()))
    }

    /// `t -> g(t) s`.
    pub fn isometry_orbit<G>(s: GeodesicSimplex, g: G) -> Self
    where
        G: Fn(f64) -> Isometry + Send + Sync + 'static,
    {
        let kinds = s.kinds();
        Self::from_fn(kinds, move |t| Ok(s.apply(&g(t))))
    }

    /// Vertices follow Klein-coordinate paths; ideal slots are projected to the sphere.
    pub fn from_klein_paths<P>(kinds: Vec<PointKind>, paths: P) -> Self
    where
        P: Fn(f64) -> Vec<DVector<f64>> + Send + Sync + 'static,
    {
        let k2 = kinds.clone();
        Self::from_fn(kinds, move |t| {
            let pts: Vec<DVector<f64>> = paths(t)
                .into_iter()
                .zip(&k2)
                .map(|(p, k)| if *k == PointKind::Ideal { p.normalize() } else { p })
                .collect();
            GeodesicSimplex::from_klein(&pts)
        })
    }

    pub fn kinds(&self) -> &[PointKind] {
        &self.kinds
    }

    pub fn dim(&self) -> usize {
        self.kinds.len() - 1
    }

    /// Member at `t`, checking the vertex-type pattern.
    pub fn at(&self, t: f64) -> Result<GeodesicSimplex, SimplexError> {
        if !(-1e-12..=1.0 + 1e-12).contains(&t) {
            return Err(SimplexError::ParameterRange(t));
        }
        let s = (self.f)(t)?;
        for (slot, (a, b)) in s.kinds().iter().zip(&self.kinds).enumerate() {
            if a != b {
                return Err(SimplexError::TypeChange { slot });
            }
        }
        Ok(s)
    }
}

/// Keyframed family: Klein positions at increasing times, natural cubic
/// spline interpolation per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeFamily {
    pub dim: usize,
    pub kinds: Vec<PointKind>,
    pub keyframes: Vec<Keyframe>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t: f64,
    pub klein: Vec<Vec<f64>>,
}

/// Second derivatives of the natural cubic spline through `(ts, ys)`.
pub(crate) fn spline_second_derivs(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let m = ts.len();
    let mut y2 = vec![0.0; m];
    if m < 3 {
        return y2;
    }
    let mut u = vec![0.0; m];
    for i in 1..m - 1 {
        let sig = (ts[i] - ts[i - 1]) / (ts[i + 1] - ts[i - 1]);
        let p = sig * y2[i - 1] + 2.0;
        y2[i] = (sig - 1.0) / p;
        let d = (ys[i + 1] - ys[i]) / (ts[i + 1] - ts[i]) - (ys[i] - ys[i - 1]) / (ts[i] - ts[i - 1]);
        u[i] = (6.0 * d / (ts[i + 1] - ts[i - 1]) - sig * u[i - 1]) / p;
    }
    y2[m - 1] = 0.0;
    for k in (0..m - 1).rev() {
        y2[k] = y2[k] * y2[k + 1] + u[k];
    }
    y2
}

pub(crate) fn spline_eval(ts: &[f64], ys: &[f64], y2: &[f64], t: f64) -> f64 {
    let m = ts.len();
    if m == 1 {
        return ys[0];
    }
    let mut k = 0;
    while k + 2 < m && t > ts[k + 1] {
        k += 1;
    }
    let h = ts[k + 1] - ts[k];
    let a = (ts[k + 1] - t) / h;
    let b = (t - ts[k]) / h;
    a * ys[k] + b * ys[k + 1] + ((a * a * a - a) * y2[k] + (b * b * b - b) * y2[k + 1]) * h * h / 6.0
}

impl KeyframeFamily {
    pub fn into_family(self) -> Result<SimplexFamily, SimplexError> {
        let n = self.dim;
        if self.kinds.len() != n + 1 {
            return Err(SimplexError::Keyframes("kinds length must be dim + 1".into()));
        }
        if self.keyframes.is_empty() {
            return Err(SimplexError::Keyframes("no keyframes".into()));
        }
        for w in self.keyframes.windows(2) {
            if w[1].t <= w[0].t {
                return Err(SimplexError::Keyframes("times must increase".into()));
            }
        }
        for k in &self.keyframes {
            if k.klein.len() != n + 1 || k.klein.iter().any(|p| p.len() != n) {
                return Err(SimplexError::Keyframes("vertex coordinate shape mismatch".into()));
            }
        }
        let ts: Vec<f64> = self.keyframes.iter().map(|k| k.t).collect();
        // (vertex, coordinate) -> (values, second derivatives)
        let mut tables = Vec::new();
        for v in 0..=n {
            for c in 0..n {
                let ys: Vec<f64> = self.keyframes.iter().map(|k| k.klein[v][c]).collect();
                let y2 = spline_second_derivs(&ts, &ys);
                tables.push((ys, y2));
            }
        }
        let kinds = self.kinds.clone();
        Ok(SimplexFamily::from_klein_paths(kinds, move |t| {
            (0..=n)
                .map(|v| {
                    DVector::from_iterator(
                        n,
                        (0..n).map(|c| {
                            let (ys, y2) = &tables[v * n + c];
                            spline_eval(&ts, ys, y2, t)
                        }),
                    )
                })
                .collect()
        }))
    }
}

/// JSON form of a simplex: `{dim, vertices: [{coords, kind}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexDoc {
    pub dim: usize,
    pub vertices: Vec<VertexDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexDoc {
    pub coords: Vec<f64>,
    pub kind: PointKind,
}

impl SimplexDoc {
    pub fn to_simplex(&self) -> Result<GeodesicSimplex, SimplexError> {
        if self.vertices.len() != self.dim + 1 {
            return Err(SimplexError::VertexCount { n: self.dim, got: self.vertices.len() });
        }
        let v = self
            .vertices
            .iter()
            .map(|v| LorentzVector::new(DVector::from_vec(v.coords.clone()), v.kind))
            .collect::<Result<Vec<_>, _>>()?;
        GeodesicSimplex::new(v)
    }

    pub fn from_simplex(s: &GeodesicSimplex) -> Self {
        Self {
            dim: s.dim(),
            vertices: s
                .vertices()
                .iter()
                .map(|v| VertexDoc { coords: v.coords().iter().copied().collect(), kind: v.kind() })
                .collect(),
        }
    }
}

/// Regular ideal tetrahedron inscribed in the unit sphere of the Klein model.
pub fn regular_ideal_tetrahedron() -> GeodesicSimplex {
    let c = 1.0 / 3f64.sqrt();
    let pts = [[c, c, c], [c, -c, -c], [-c, c, -c], [-c, -c, c]];
    GeodesicSimplex::from_klein(&pts.iter().map(|p| DVector::from_row_slice(p)).collect::<Vec<_>>())
        .expect("vertices lie on the unit sphere")
}

/// Ideal tetrahedron with dihedral angles `(alpha, beta, gamma)` at the edges
/// from vertex 0 to vertices 1, 2, 3: vertices `inf, 0, 1, z` in the upper
/// half-space with `z = (sin beta / sin gamma) e^{i alpha}`.
pub fn ideal_tetrahedron_from_angles(alpha: f64, beta: f64, gamma: f64) -> Result<GeodesicSimplex, SimplexError> {
    if (alpha + beta + gamma - PI).abs() > 1e-9 || alpha <= 0.0 || beta <= 0.0 || gamma <= 0.0 {
        return Err(SimplexError::AngleSum(alpha + beta + gamma));
    }
    let r = beta.sin() / gamma.sin();
    let z = [r * alpha.cos(), r * alpha.sin()];
    GeodesicSimplex::new(vec![
        LorentzVector::ideal_from_boundary(None, 3)?,
        LorentzVector::ideal_from_boundary(Some(&[0.0, 0.0]), 3)?,
        LorentzVector::ideal_from_boundary(Some(&[1.0, 0.0]), 3)?,
        LorentzVector::ideal_from_boundary(Some(&z), 3)?,
    ])
}
