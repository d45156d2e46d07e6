//! Representations into SO(n,1) and their volumes.
//!
//! `Vol(rho)` is the signed sum over the labeled triangulation of the volumes
//! of developed simplices. Orbit vertices are developed to sampled interior
//! points or to fixed points of peripheral images, and each slot `(v, w)`
//! goes to `rho(w) f(v)`.

pub mod gluing;
pub mod path;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::{
    peripheral_words, ComplexError, DevelopedMatching, GroupPresentation, LabeledSimplex, LabeledTriangulation,
    VertexKind, Word,
};
use crate::lorentz::{
    common_fixed_set, lift_moebius, IdealFixed, Isometry, LorentzError, LorentzVector, Moebius, EIGEN_TOL,
};
use crate::simplex::{signed_volume, triangle_angle, GeodesicSimplex, SimplexError};

pub use gluing::{shapes_volume, solve_gluing_equations, Filling, GluingSolution};
pub use path::{
    axis_boost, generate_path, scan_path, BaseRef, DeformationPath, PathDoc, PathSample, PathScanReport, PathSpec, Verdict,
};

/// Relator residual accepted for a representation.
pub const RELATOR_TOL: f64 = 1e-8;
/// Relator residual accepted along deformation paths.
pub const PATH_RELATOR_TOL: f64 = 1e-7;
/// Minimum `|det|` of developed simplices relative to their Klein scale.
pub const NONDEGENERACY_TOL: f64 = 1e-8;
/// Cubature tolerance for developed simplices.
pub const VOLUME_TOL: f64 = 1e-9;
/// Tolerance for peripheral fixed-point computations.
pub const PERIPHERAL_TOL: f64 = EIGEN_TOL;
/// Klein radius of the sampling ball (hyperbolic radius 1 around the origin).
pub const SAMPLE_RADIUS: f64 = 0.761_594_155_955_764_9;
pub const RETRIES_PER_VERTEX: usize = 200;
pub const RESTARTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RepError {
    #[error("no image for generator '{0}'")]
    MissingImage(String),
    #[error("image for unknown generator '{0}'")]
    UnknownGenerator(String),
    #[error("images of mixed dimensions ({0} and {1})")]
    DimensionMismatch(usize, usize),
    #[error("triangulation has dimension {tri}, representation {rep}")]
    WrongDimension { tri: usize, rep: usize },
    #[error("relator '{relator}' has residual {residual:e}")]
    Relator { relator: String, residual: f64 },
    #[error("bad matrix for '{name}': {reason}")]
    BadMatrix { name: String, reason: String },
    #[error("peripheral images of cusp '{cusp}' have no common fixed point in the closed ball")]
    Neither { cusp: String },
    #[error("nondegenerate developing assignment not found after {restarts} restarts")]
    Nondegeneracy { restarts: usize },
    #[error("simplex {0} develops degenerately and has no material vertex to move")]
    DegenerateIdeal(usize),
    #[error("Toledo number needs a 2-dimensional triangulation, got {0}")]
    NotSurface(usize),
    #[error("path: {0}")]
    Path(String),
    #[error("boundary image of '{word}' is elliptic at t = {t}")]
    EllipticBoundary { word: String, t: f64 },
    #[error("gluing equations: {reason} (last good t = {last_good_t})")]
    Gluing { reason: String, last_good_t: f64 },
    #[error("initial shapes must lie in the upper half plane")]
    RealShapes,
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("json: {0}")]
    Json(String),
}

/// Generator images with their relator residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    presentation: GroupPresentation,
    images: Vec<Isometry>,
    inverses: Vec<Isometry>,
    relator_residual: f64,
}

/// Max-entry residuals `|rho(r) - I|` per relator.
pub fn relator_residuals(pres: &GroupPresentation, images: &[Isometry]) -> Vec<f64> {
    let inverses: Vec<Isometry> = images.iter().map(|g| g.inverse()).collect();
    pres.relators.iter().map(|r| r.evaluate(images, &inverses).distance_to_identity()).collect()
}

/// Accepts `images` (in generator order) if every relator residual is at most 1e-8.
pub fn check_representation(pres: &GroupPresentation, images: Vec<Isometry>) -> Result<Representation, RepError> {
    check_representation_with(pres, images, RELATOR_TOL)
}

pub fn check_representation_with(
    pres: &GroupPresentation,
    images: Vec<Isometry>,
    tol: f64,
) -> Result<Representation, RepError> {
    if images.len() < pres.rank() {
        return Err(RepError::MissingImage(pres.generators()[images.len()].clone()));
    }
    if images.len() > pres.rank() {
        return Err(RepError::UnknownGenerator(format!("#{}", pres.rank())));
    }
    let d = images[0].dim();
    if let Some(g) = images.iter().find(|g| g.dim() != d) {
        return Err(RepError::DimensionMismatch(d, g.dim()));
    }
    let res = relator_residuals(pres, &images);
    let (worst, residual) = res.iter().copied().enumerate().fold((None, 0.0), |acc, (k, r)| {
        if r > acc.1 || r.is_nan() {
            (Some(k), r)
        } else {
            acc
        }
    });
    if let Some(k) = worst {
        if residual.is_nan() || residual > tol {
            return Err(RepError::Relator { relator: pres.format(&pres.relators[k]), residual });
        }
    }
    let inverses = images.iter().map(|g| g.inverse()).collect();
    Ok(Representation { presentation: pres.clone(), images, inverses, relator_residual: residual })
}

/// Accepts a map from generator names to images.
pub fn check_representation_named(
    pres: &GroupPresentation,
    images: &BTreeMap<String, Isometry>,
) -> Result<Representation, RepError> {
    for name in images.keys() {
        if !pres.generators().contains(name) {
            return Err(RepError::UnknownGenerator(name.clone()));
        }
    }
    let ordered = pres
        .generators()
        .iter()
        .map(|g| images.get(g).cloned().ok_or_else(|| RepError::MissingImage(g.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    check_representation(pres, ordered)
}

impl Representation {
    pub fn presentation(&self) -> &GroupPresentation {
        &self.presentation
    }

    pub fn images(&self) -> &[Isometry] {
        &self.images
    }

    pub fn dim(&self) -> usize {
        self.images[0].dim()
    }

    pub fn relator_residual(&self) -> f64 {
        self.relator_residual
    }

    pub fn evaluate(&self, w: &Word) -> Isometry {
        w.evaluate(&self.images, &self.inverses)
    }

    pub fn image(&self, generator: &str) -> Option<&Isometry> {
        self.presentation.generators().iter().position(|g| g == generator).map(|k| &self.images[k])
    }

    /// The trivial representation in dimension n.
    pub fn trivial(pres: &GroupPresentation, n: usize) -> Self {
        check_representation(pres, vec![Isometry::identity(n); pres.rank()]).expect("identity satisfies relators")
    }

    /// `g rho g^{-1}`.
    pub fn conjugated(&self, g: &Isometry) -> Result<Self, RepError> {
        let images = self.images.iter().map(|a| a.conjugate_by(g)).collect();
        check_representation_with(&self.presentation, images, PATH_RELATOR_TOL)
    }

    pub fn from_json(text: &str, pres: &GroupPresentation) -> Result<Self, RepError> {
        let doc: RepresentationDoc = serde_json::from_str(text).map_err(|e| RepError::Json(e.to_string()))?;
        Self::from_doc(&doc, pres)
    }

    pub fn from_doc(doc: &RepresentationDoc, pres: &GroupPresentation) -> Result<Self, RepError> {
        let images = doc
            .images
            .iter()
            .map(|(k, m)| Ok((k.clone(), m.to_isometry(k)?)))
            .collect::<Result<BTreeMap<_, _>, RepError>>()?;
        check_representation_named(pres, &images)
    }

    pub fn to_doc(&self) -> RepresentationDoc {
        RepresentationDoc {
            presentation_ref: None,
            images: self
                .presentation
                .generators()
                .iter()
                .zip(&self.images)
                .map(|(g, a)| {
                    let m = a.matrix();
                    (g.clone(), MatrixDoc::Real((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()))
                })
                .collect(),
        }
    }
}

/// A matrix in JSON: real `(n+1) x (n+1)`, real 2x2 (lifted to n = 2), or
/// complex 2x2 with `[re, im]` entries (lifted to n = 3).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixDoc {
    Real(Vec<Vec<f64>>),
    Complex(Vec<Vec<[f64; 2]>>),
}

impl MatrixDoc {
    pub fn to_isometry(&self, name: &str) -> Result<Isometry, RepError> {
        let bad = |reason: &str| RepError::BadMatrix { name: name.into(), reason: reason.into() };
        match self {
            MatrixDoc::Real(rows) => {
                let d = rows.len();
                if rows.iter().any(|r| r.len() != d) {
                    return Err(bad("not square"));
                }
                if d == 2 {
                    let m = Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]);
                    return lift_moebius(&Moebius::Real(m)).map_err(|e| bad(&e.to_string()));
                }
                let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
                Isometry::new_reprojected(m).map_err(|e| bad(&e.to_string()))
            }
            MatrixDoc::Complex(rows) => {
                if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
                    return Err(bad("complex matrices must be 2x2"));
                }
                let c = |i: usize, j: usize| Complex64::new(rows[i][j][0], rows[i][j][1]);
                let m = Matrix2::new(c(0, 0), c(0, 1), c(1, 0), c(1, 1));
                lift_moebius(&Moebius::Complex(m)).map_err(|e| bad(&e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presentation_ref: Option<String>,
    pub images: BTreeMap<String, MatrixDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeripheralClass {
    CompactFix,
    ParabolicFix,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeripheralClassification {
    pub cusp: String,
    pub class: PeripheralClass,
    pub interior: Option<LorentzVector>,
    pub ideal: Option<LorentzVector>,
}

/// Common fixed points of the peripheral images of a cusp.
///
/// A unique interior fixed point gives `CompactFix`; ideal fixed points only
/// give `ParabolicFix` (for loxodromic peripherals, the attracting fixed
/// point of the first peripheral word); a larger fixed subspace gives `Both`.
pub fn classify_peripheral(
    rho: &Representation,
    t: &LabeledTriangulation,
    cusp_id: &str,
    tol: f64,
) -> Result<PeripheralClassification, RepError> {
    let words = peripheral_words(t, cusp_id)?;
    let mut gens: Vec<Isometry> = words.iter().map(|w| rho.evaluate(w)).collect();
    if gens.is_empty() {
        gens.push(Isometry::identity(rho.dim()));
    }
    let fs = common_fixed_set(&gens, tol).map_err(|_| RepError::Neither { cusp: cusp_id.into() })?;
    let cusp = cusp_id.to_string();
    match (&fs.interior, fs.fixed_dim) {
        (Some(x), 1) => Ok(PeripheralClassification {
            cusp,
            class: PeripheralClass::CompactFix,
            interior: Some(x.clone()),
            ideal: None,
        }),
        (Some(x), _) => {
            let ideal = match &fs.ideal {
                IdealFixed::Points(p) if !p.is_empty() => Some(p[0].clone()),
                _ => fs.spacelike.as_ref().map(|u| {
                    LorentzVector::ideal_from(&(x.coords() + u)).expect("x + u is lightlike and future")
                }),
            };
            Ok(PeripheralClassification { cusp, class: PeripheralClass::Both, interior: Some(x.clone()), ideal })
        }
        (None, _) => {
            let p = fs.ideal.points().first().cloned().ok_or_else(|| RepError::Neither { cusp: cusp_id.into() })?;
            Ok(PeripheralClassification { cusp, class: PeripheralClass::ParabolicFix, interior: None, ideal: Some(p) })
        }
    }
}

/// Which fixed point a cone vertex uses when both kinds exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPreference {
    #[default]
    PreferIdeal,
    PreferInterior,
}

/// Developed positions of the orbit vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct DevelopingAssignment {
    pub points: Vec<LorentzVector>,
    pub seed: u64,
    pub preference: BoundaryPreference,
}

fn cone_points(
    rho: &Representation,
    t: &LabeledTriangulation,
    pref: BoundaryPreference,
) -> Result<Vec<Option<LorentzVector>>, RepError> {
    if rho.dim() != t.dim {
        return Err(RepError::WrongDimension { tri: t.dim, rep: rho.dim() });
    }
    t.orbit_vertices
        .iter()
        .map(|v| match &v.kind {
            VertexKind::Material => Ok(None),
            VertexKind::IdealCusp(c) => {
                let pc = classify_peripheral(rho, t, c, PERIPHERAL_TOL)?;
                let p = match (pc.class, pref) {
                    (PeripheralClass::CompactFix, _) | (PeripheralClass::Both, BoundaryPreference::PreferInterior) => {
                        pc.interior
                    }
                    (PeripheralClass::ParabolicFix, _) => pc.ideal,
                    (PeripheralClass::Both, BoundaryPreference::PreferIdeal) => pc.ideal.or(pc.interior),
                };
                p.map(Some).ok_or_else(|| RepError::Neither { cusp: c.clone() })
            }
        })
        .collect()
}

/// Uniform point of the Klein ball of radius `SAMPLE_RADIUS`.
fn sample_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> LorentzVector {
    loop {
        let k = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if k.norm() < 1.0 {
            return LorentzVector::from_klein(&(k * SAMPLE_RADIUS)).expect("inside the ball");
        }
    }
}

/// The simplex with vertices `rho(w_k) f(v_k)`.
pub fn develop(rho: &Representation, points: &[LorentzVector], s: &LabeledSimplex) -> Result<GeodesicSimplex, RepError> {
    let verts = s.slots.iter().map(|sl| rho.evaluate(&sl.word).apply(&points[sl.vertex])).collect();
    Ok(GeodesicSimplex::new(verts)?)
}

fn nondegenerate(s: &GeodesicSimplex) -> bool {
    s.normalized_det().abs() >= NONDEGENERACY_TOL * s.klein_scale().powi(s.dim() as i32)
}

/// Equivariant developing assignment with every developed simplex nondegenerate.
pub fn build_developing_assignment(
    rho: &Representation,
    t: &LabeledTriangulation,
    seed: u64,
    pref: BoundaryPreference,
) -> Result<DevelopingAssignment, RepError> {
    let fixed = cone_points(rho, t, pref)?;
    let n = t.dim;
    let material: Vec<usize> = (0..fixed.len()).filter(|&i| fixed[i].is_none()).collect();
    // Simplices become checkable once their last material orbit vertex is placed.
    let mut due: Vec<Vec<usize>> = vec![Vec::new(); material.len() + 1];
    for (si, s) in t.simplices.iter().enumerate() {
        let last = s
            .slots
            .iter()
            .filter_map(|sl| material.iter().position(|&m| m == sl.vertex))
            .max()
            .map_or(0, |p| p + 1);
        due[last].push(si);
    }
    let placeholder = LorentzVector::origin(n);
    let mut points: Vec<LorentzVector> = fixed.iter().map(|p| p.clone().unwrap_or_else(|| placeholder.clone())).collect();
    for &si in &due[0] {
        if !nondegenerate(&develop(rho, &points, &t.simplices[si])?) {
            return Err(RepError::DegenerateIdeal(si));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'restart: for _ in 0..=RESTARTS {
        for (k, &v) in material.iter().enumerate() {
            let mut placed = false;
            for _ in 0..RETRIES_PER_VERTEX {
                points[v] = sample_point(&mut rng, n);
                let ok = due[k + 1]
                    .iter()
                    .map(|&si| develop(rho, &points, &t.simplices[si]).map(|s| nondegenerate(&s)))
                    .collect::<Result<Vec<_>, _>>()?
                    .into_iter()
                    .all(|b| b);
                if ok {
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        return Ok(DevelopingAssignment { points, seed, preference: pref });
    }
    Err(RepError::Nondegeneracy { restarts: RESTARTS })
}

/// Same sampling without the nondegeneracy requirement, for the tolerant volume.
pub fn build_developing_assignment_tolerant(
    rho: &Representation,
    t: &LabeledTriangulation,
    seed: u64,
    pref: BoundaryPreference,
) -> Result<DevelopingAssignment, RepError> {
    let fixed = cone_points(rho, t, pref)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = fixed.into_iter().map(|p| p.unwrap_or_else(|| sample_point(&mut rng, t.dim))).collect();
    Ok(DevelopingAssignment { points, seed, preference: pref })
}

/// Signed volume of each developed simplex (0 when degenerate), times its sign.
pub fn simplex_contributions(
    rho: &Representation,
    t: &LabeledTriangulation,
    a: &DevelopingAssignment,
    tol: f64,
) -> Result<Vec<f64>, RepError> {
    let jobs: Vec<&LabeledSimplex> = t.simplices.iter().collect();
    let work = |s: &LabeledSimplex| -> Result<f64, RepError> {
        let d = develop(rho, &a.points, s)?;
        Ok(f64::from(s.sign) * signed_volume(&d, tol)?)
    };
    if t.dim <= 3 || jobs.len() < 4 {
        return jobs.into_iter().map(work).collect();
    }
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    let chunk = jobs.len().div_ceil(threads);
    std::thread::scope(|sc| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|c| sc.spawn(move || c.iter().map(|s| work(s)).collect::<Result<Vec<_>, _>>()))
            .collect();
        let mut out = Vec::with_capacity(jobs.len());
        for h in handles {
            out.extend(h.join().expect("volume worker panicked")?);
        }
        Ok(out)
    })
}

/// `Vol(rho) = sum sigma(s) Vol(developed s)`; degenerate simplices contribute 0.
pub fn representation_volume(
    rho: &Representation,
    t: &LabeledTriangulation,
    a: &DevelopingAssignment,
) -> Result<f64, RepError> {
    representation_volume_with(rho, t, a, VOLUME_TOL)
}

pub fn representation_volume_with(
    rho: &Representation,
    t: &LabeledTriangulation,
    a: &DevelopingAssignment,
    tol: f64,
) -> Result<f64, RepError> {
    let parts = simplex_contributions(rho, t, a, tol)?;
    let mut acc = 0.0;
    let mut c = 0.0;
    for x in parts {
        let s = acc + x;
        c += if acc.abs() >= x.abs() { (acc - s) + x } else { (x - s) + acc };
        acc = s;
    }
    Ok(acc + c)
}

/// Toledo number from angle sums: `sum sigma(s) eps(s) (pi - A(s))`.
pub fn toledo_number(rho: &Representation, t: &LabeledTriangulation, a: &DevelopingAssignment) -> Result<f64, RepError> {
    if t.dim != 2 {
        return Err(RepError::NotSurface(t.dim));
    }
    let mut acc = 0.0;
    for s in &t.simplices {
        let d = develop(rho, &a.points, s)?;
        if d.is_degenerate() {
            continue;
        }
        let angles: f64 = (0..3).map(|v| triangle_angle(&d, v)).sum::<Result<f64, _>>()?;
        acc += f64::from(s.sign) * d.orientation() * (PI - angles);
    }
    Ok(acc)
}

/// `reference_vol - |vol|`; nonnegative for genuine representations, zero when maximal.
pub fn milnor_wood_margin(vol: f64, reference_vol: f64) -> f64 {
    debug_assert!(reference_vol > 0.0);
    reference_vol - vol.abs()
}

/// Face matching through `rho` and a developing assignment.
pub fn developed_matching(rho: &Representation, a: &DevelopingAssignment, tol: f64) -> DevelopedMatching {
    DevelopedMatching::new(rho.images().to_vec(), a.points.clone(), tol)
}

/// Convenience: assignment plus volume.
pub fn volume_with_seed(rho: &Representation, t: &LabeledTriangulation, seed: u64) -> Result<f64, RepError> {
    let a = build_developing_assignment(rho, t, seed, BoundaryPreference::PreferIdeal)?;
    representation_volume(rho, t, &a)
}
