//! Deformation paths `t -> rho_t` and constancy scans of `Vol(rho_t)`.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::gluing::{solve_gluing_equations, Filling};
use super::{
    build_developing_assignment, check_representation_with, classify_peripheral, milnor_wood_margin,
    representation_volume, toledo_number, BoundaryPreference, MatrixDoc, PeripheralClass, RepError, Representation,
    RepresentationDoc, PATH_RELATOR_TOL, PERIPHERAL_TOL,
};
use crate::complex::{LabeledTriangulation, Word};
use crate::lorentz::{check_lie_algebra, classify_isometry, mdot, Isometry, IsometryClass, EIGEN_TOL};
use crate::simplex::{spline_eval, spline_second_derivs};

/// Gluing-equation tolerance used along Dehn paths.
pub const DEHN_TOL: f64 = 1e-12;
/// Samples at which Twist2D parameters are screened for elliptic boundary images.
const TWIST_SCREEN: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PathSpec {
    /// `rho_t = g_t rho g_t^{-1}` with `g_t = exp(t X)`.
    Conjugation { direction: Vec<Vec<f64>> },
    /// Entrywise natural cubic spline through keyframe images, re-projected to SO(n,1).
    Keyframes { times: Vec<f64>, frames: Vec<BTreeMap<String, MatrixDoc>> },
    /// `rho_t(generator) = rho(generator) exp(t s B)` with `B` the unit boost along the
    /// axis of `rho(centralizer_of)`.
    #[serde(rename = "twist2d")]
    Twist2D { generator: String, centralizer_of: String, twist_length: f64 },
    /// Holonomy of the solution of `p H(m) + q H(l) = 2 pi i tau`, with `tau`
    /// running linearly over `[t_start, t_end]`.
    #[serde(rename = "dehn3d")]
    Dehn3D {
        p: f64,
        q: f64,
        #[serde(default)]
        t_start: f64,
        #[serde(default = "one")]
        t_end: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Base representation, inline or as a file name relative to the path file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseRef {
    File(String),
    Inline(RepresentationDoc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDoc {
    #[serde(flatten)]
    pub spec: PathSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preference: Option<BoundaryPreference>,
}

impl PathDoc {
    pub fn from_json(text: &str) -> Result<Self, RepError> {
        serde_json::from_str(text).map_err(|e| RepError::Json(e.to_string()))
    }

    /// Loads the base representation, reading files relative to `dir`.
    pub fn base_representation(&self, t: &LabeledTriangulation, dir: &Path) -> Result<Option<Representation>, RepError> {
        match &self.base {
            None => Ok(None),
            Some(BaseRef::Inline(doc)) => Representation::from_doc(doc, &t.presentation).map(Some),
            Some(BaseRef::File(f)) => {
                let text = std::fs::read_to_string(dir.join(f)).map_err(|e| RepError::Json(format!("{f}: {e}")))?;
                Representation::from_json(&text, &t.presentation).map(Some)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Conjugation(DMatrix<f64>),
    Keyframes { times: Vec<f64>, values: Vec<Vec<DMatrix<f64>>>, second: Vec<Vec<DMatrix<f64>>> },
    Twist { generator: usize, y: DMatrix<f64> },
    Dehn { p: f64, q: f64, t_start: f64, t_end: f64 },
}

/// A C^1 path of representations on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct DeformationPath {
    kind: Kind,
    base: Representation,
    tri: LabeledTriangulation,
    boundary: Vec<(String, Word)>,
    pub preference: Option<BoundaryPreference>,
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, RepError> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        return Err(RepError::Path("direction must be a square matrix".into()));
    }
    Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

/// Unit boost generator along the axis of a loxodromic `a`; it fixes the
/// attracting endpoint direction with eigenvalue 1 and commutes with `a`.
pub fn axis_boost(a: &Isometry) -> Result<DMatrix<f64>, RepError> {
    let c = classify_isometry(a, EIGEN_TOL)?;
    if c.class != IsometryClass::Loxodromic {
        return Err(RepError::Path(format!("twist axis needs a loxodromic element, got {:?}", c.class)));
    }
    let pts = c.ideal_fixed.points();
    let (lp, lm) = (pts[0].coords(), pts[1].coords());
    let j = crate::lorentz::form_matrix(a.dim());
    let num = lp * (lm.transpose() * &j) - lm * (lp.transpose() * &j);
    Ok(num / mdot(lm, lp))
}

impl DeformationPath {
    pub fn base(&self) -> &Representation {
        &self.base
    }

    fn check_boundary(&self, rho: &Representation, t: f64) -> Result<(), RepError> {
        for (name, w) in &self.boundary {
            let g = rho.evaluate(w);
            if let Ok(c) = classify_isometry(&g, EIGEN_TOL) {
                if c.class == IsometryClass::Elliptic {
                    return Err(RepError::EllipticBoundary { word: name.clone(), t });
                }
            }
        }
        Ok(())
    }

    /// `rho_t`, checked against the relators at 1e-7.
    pub fn at(&self, t: f64) -> Result<Representation, RepError> {
        if !(-1e-12..=1.0 + 1e-12).contains(&t) {
            return Err(RepError::Path(format!("t = {t} outside [0, 1]")));
        }
        let pres = self.base.presentation();
        match &self.kind {
            Kind::Conjugation(x) => {
                let g = Isometry::exp_algebra(&(x * t))?;
                self.base.conjugated(&g)
            }
            Kind::Keyframes { times, values, second } => {
                let images = (0..pres.rank())
                    .map(|g| {
                        let (r, c) = values[0][g].shape();
                        let m = DMatrix::from_fn(r, c, |i, j| {
                            let ys: Vec<f64> = values.iter().map(|f| f[g][(i, j)]).collect();
                            let y2: Vec<f64> = second.iter().map(|f| f[g][(i, j)]).collect();
                            spline_eval(times, &ys, &y2, t)
                        });
                        Isometry::new_reprojected(m)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                check_representation_with(pres, images, PATH_RELATOR_TOL)
            }
            Kind::Twist { generator, y } => {
                let mut images = self.base.images().to_vec();
                let e = Isometry::exp_algebra(&(y * t))?;
                images[*generator] = images[*generator].compose(&e);
                let rho = check_representation_with(pres, images, PATH_RELATOR_TOL)?;
                self.check_boundary(&rho, t)?;
                Ok(rho)
            }
            Kind::Dehn { p, q, t_start, t_end } => {
                let tau = t_start + (t_end - t_start) * t;
                let sol = solve_gluing_equations(&self.tri, Filling::Dehn { p: *p, q: *q, t: tau }, None, DEHN_TOL)?;
                Ok(sol.representation)
            }
        }
    }
}

/// Builds and validates a deformation path over triangulation `t`.
pub fn generate_path(
    spec: &PathSpec,
    base: Option<Representation>,
    t: &LabeledTriangulation,
    preference: Option<BoundaryPreference>,
) -> Result<DeformationPath, RepError> {
    let pres = &t.presentation;
    let boundary: Vec<(String, Word)> = t
        .cusps
        .iter()
        .flat_map(|c| c.peripheral.iter().map(|w| (pres.format(w), w.clone())))
        .collect();
    let need_base = |b: Option<Representation>| b.ok_or_else(|| RepError::Path("path needs a base representation".into()));
    let (kind, base) = match spec {
        PathSpec::Conjugation { direction } => {
            let base = need_base(base)?;
            let x = matrix_from_rows(direction)?;
            if x.nrows() != base.dim() + 1 {
                return Err(RepError::Path(format!("direction is {}x{}, expected {}", x.nrows(), x.ncols(), base.dim() + 1)));
            }
            check_lie_algebra(&x)?;
            (Kind::Conjugation(x), base)
        }
        PathSpec::Keyframes { times, frames } => {
            if times.len() != frames.len() || times.len() < 2 {
                return Err(RepError::Path("keyframes need matching times and frames (at least 2)".into()));
            }
            if times.windows(2).any(|w| w[1] <= w[0]) || times[0] != 0.0 || *times.last().expect("nonempty") != 1.0 {
                return Err(RepError::Path("keyframe times must increase from 0 to 1".into()));
            }
            let reps = frames
                .iter()
                .map(|f| {
                    Representation::from_doc(&RepresentationDoc { presentation_ref: None, images: f.clone() }, pres)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let values: Vec<Vec<DMatrix<f64>>> =
                reps.iter().map(|r| r.images().iter().map(|g| g.matrix().clone()).collect()).collect();
            let second = (0..frames.len()).map(|_| Vec::new()).collect::<Vec<Vec<DMatrix<f64>>>>();
            let mut second = second;
            for g in 0..pres.rank() {
                let (r, c) = values[0][g].shape();
                let mut per_frame = vec![DMatrix::zeros(r, c); frames.len()];
                for i in 0..r {
                    for j in 0..c {
                        let ys: Vec<f64> = values.iter().map(|f| f[g][(i, j)]).collect();
                        for (k, v) in spline_second_derivs(times, &ys).into_iter().enumerate() {
                            per_frame[k][(i, j)] = v;
                        }
                    }
                }
                for (k, m) in per_frame.into_iter().enumerate() {
                    second[k].push(m);
                }
            }
            let base = reps.into_iter().next().expect("at least two frames");
            (Kind::Keyframes { times: times.clone(), values, second }, base)
        }
        PathSpec::Twist2D { generator, centralizer_of, twist_length } => {
            let base = need_base(base)?;
            let gi = pres
                .generators()
                .iter()
                .position(|g| g == generator)
                .ok_or_else(|| RepError::UnknownGenerator(generator.clone()))?;
            let a = base.image(centralizer_of).ok_or_else(|| RepError::UnknownGenerator(centralizer_of.clone()))?;
            let y = axis_boost(a)? * *twist_length;
            (Kind::Twist { generator: gi, y }, base)
        }
        PathSpec::Dehn3D { p, q, t_start, t_end } => {
            if !(0.0..=1.0).contains(t_start) || !(0.0..=1.0).contains(t_end) || t_start >= t_end {
                return Err(RepError::Path("Dehn parameters need 0 <= t_start < t_end <= 1".into()));
            }
            let kind = Kind::Dehn { p: *p, q: *q, t_start: *t_start, t_end: *t_end };
            let sol = solve_gluing_equations(t, Filling::Complete, None, DEHN_TOL)?;
            (kind, base.unwrap_or(sol.representation))
        }
    };
    let path = DeformationPath { kind, base, tri: t.clone(), boundary, preference };
    if matches!(path.kind, Kind::Twist { .. }) {
        for k in 0..TWIST_SCREEN {
            path.at(k as f64 / (TWIST_SCREEN - 1) as f64)?;
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Constant,
    NonConstant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub t: f64,
    pub volume: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub toledo: Option<f64>,
    pub relator_residual: f64,
    pub classes: BTreeMap<String, PeripheralClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathScanReport {
    pub samples: Vec<PathSample>,
    pub verdict: Verdict,
    pub max_deviation: f64,
    /// Constancy tolerance the verdict was computed at.
    pub tolerance: f64,
    pub volume_tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub milnor_wood_margin_min: Option<f64>,
    /// Sample times where some cusp classification differs from the previous sample.
    pub classification_changes: Vec<f64>,
    pub preference: BoundaryPreference,
    pub seed: u64,
}

/// Evaluates `Vol(rho_t)` at `n` uniform samples with one seed.
///
/// The default tolerance is `1e-6 (1 + |Vol(rho_0)|)`.
pub fn scan_path(
    path: &DeformationPath,
    t: &LabeledTriangulation,
    n: usize,
    tol: Option<f64>,
    reference_vol: Option<f64>,
    seed: u64,
) -> Result<PathScanReport, RepError> {
    if n < 3 {
        return Err(RepError::Path(format!("need at least 3 samples, got {n}")));
    }
    let rho0 = path.at(0.0)?;
    let preference = path.preference.unwrap_or_else(|| {
        let all_compact = t.cusps.iter().all(|c| {
            matches!(classify_peripheral(&rho0, t, &c.id, PERIPHERAL_TOL), Ok(pc) if pc.class == PeripheralClass::CompactFix)
        });
        if all_compact && !t.cusps.is_empty() {
            BoundaryPreference::PreferInterior
        } else {
            BoundaryPreference::PreferIdeal
        }
    });
    let mut samples = Vec::with_capacity(n);
    let mut changes = Vec::new();
    for k in 0..n {
        let tk = k as f64 / (n - 1) as f64;
        let rho = if k == 0 { rho0.clone() } else { path.at(tk)? };
        let classes = t
            .cusps
            .iter()
            .map(|c| Ok((c.id.clone(), classify_peripheral(&rho, t, &c.id, PERIPHERAL_TOL)?.class)))
            .collect::<Result<BTreeMap<_, _>, RepError>>()?;
        let a = build_developing_assignment(&rho, t, seed, preference)?;
        let volume = representation_volume(&rho, t, &a)?;
        let toledo = if t.dim == 2 { Some(toledo_number(&rho, t, &a)?) } else { None };
        if let Some(prev) = samples.last() {
            let prev: &PathSample = prev;
            if prev.classes != classes {
                changes.push(tk);
            }
        }
        samples.push(PathSample { t: tk, volume, toledo, relator_residual: rho.relator_residual(), classes });
    }
    let v0 = samples[0].volume;
    let max_deviation = samples.iter().map(|s| (s.volume - v0).abs()).fold(0.0, f64::max);
    let tolerance = tol.unwrap_or(1e-6 * (1.0 + v0.abs()));
    let verdict = if max_deviation <= tolerance { Verdict::Constant } else { Verdict::NonConstant };
    let milnor_wood_margin_min =
        reference_vol.map(|r| samples.iter().map(|s| milnor_wood_margin(s.volume, r)).fold(f64::INFINITY, f64::min));
    Ok(PathScanReport {
        samples,
        verdict,
        max_deviation,
        tolerance,
        volume_tolerance: super::VOLUME_TOL,
        milnor_wood_margin_min,
        classification_changes: changes,
        preference,
        seed,
    })
}
