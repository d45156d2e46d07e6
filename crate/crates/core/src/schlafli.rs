//! Numerical Schläfli identities and transverse degrees.
//!
//! Derivatives along simplex families are central differences with one
//! cubature plan shared across the stencil, so the quadrature error varies
//! smoothly with the parameter and does not pollute the difference quotients.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use thiserror::Error;

use crate::lorentz::{self, Isometry, LorentzVector};
use crate::simplex::{
    dihedral_angle, dihedral_angles, edge_of_face, face_measure, truncated_edge_length, triangle_angle,
    GeodesicSimplex, HoroballAssignment, SimplexError, SimplexFamily, VolumePlan,
};

/// Default finite-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;
/// Cubature tolerance used inside finite differences.
pub const DERIVATIVE_VOLUME_TOL: f64 = 1e-12;
/// Distance to the nearest integer accepted for degrees.
pub const DEGREE_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchlafliError {
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("stencil [{lo}, {hi}] leaves [0, 1]")]
    Stencil { lo: f64, hi: f64 },
    #[error("step must be positive, got {0}")]
    Step(f64),
    #[error("face of measure infinity (ideal edge in dimension 3); use the truncated residual")]
    InfiniteFace,
    #[error("angle sum {value} is not an integer multiple of 2 pi (distance {distance:e})")]
    NonIntegral { value: f64, distance: f64 },
    #[error("simplex {0} of the star does not contain the face")]
    FaceNotFound(usize),
    #[error("empty star")]
    EmptyStar,
}

/// Face of a simplex identified by its pair of omitted vertex indices.
pub type Face = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyDerivativeReport {
    pub t: f64,
    pub h: f64,
    pub vol: f64,
    pub dvol: f64,
    pub dtheta: BTreeMap<Face, f64>,
    /// Finite face measures at `t`; faces with ideal edges in dimension 3 are omitted.
    pub face_measures: BTreeMap<Face, f64>,
    /// Step-halving estimate of the O(h^2) truncation error of `dvol`.
    pub dvol_truncation: f64,
}

struct Stencil {
    plan: VolumePlan,
    members: Vec<GeodesicSimplex>,
    offsets: Vec<f64>,
}

impl Stencil {
    /// Members at `t - h, t + h, t - h/2, t + h/2` and `t`.
    fn new(fam: &SimplexFamily, t: f64, h: f64, tol: f64) -> Result<Self, SchlafliError> {
        if h <= 0.0 || !h.is_finite() {
            return Err(SchlafliError::Step(h));
        }
        let (lo, hi) = (t - h, t + h);
        if lo < -1e-12 || hi > 1.0 + 1e-12 {
            return Err(SchlafliError::Stencil { lo, hi });
        }
        let offsets = vec![-h, h, -0.5 * h, 0.5 * h, 0.0];
        let members = offsets.iter().map(|d| fam.at(t + d)).collect::<Result<Vec<_>, _>>()?;
        let plan = VolumePlan::build(&members[4], tol)?;
        Ok(Self { plan, members, offsets })
    }

    fn volumes(&self) -> Result<Vec<f64>, SchlafliError> {
        Ok(self.members.iter().map(|s| self.plan.unsigned_volume(s)).collect::<Result<Vec<_>, _>>()?)
    }

    fn angles(&self) -> Result<Vec<BTreeMap<Face, f64>>, SchlafliError> {
        Ok(self.members.iter().map(dihedral_angles).collect::<Result<Vec<_>, _>>()?)
    }

    /// Central differences with steps h and h/2.
    fn diff(&self, v: &[f64]) -> (f64, f64) {
        let h = self.offsets[1];
        ((v[1] - v[0]) / (2.0 * h), (v[3] - v[2]) / h)
    }
}

/// Central-difference derivatives of volume and dihedral angles at `t`.
pub fn family_derivatives(
    fam: &SimplexFamily,
    t: f64,
    h: f64,
    tol: f64,
) -> Result<FamilyDerivativeReport, SchlafliError> {
    let st = Stencil::new(fam, t, h, tol)?;
    let vols = st.volumes()?;
    let angles = st.angles()?;
    let (dvol, dvol_half) = st.diff(&vols);
    let mut dtheta = BTreeMap::new();
    let mut face_measures = BTreeMap::new();
    let s0 = &st.members[4];
    for f in s0.codim2_faces() {
        let a: Vec<f64> = angles.iter().map(|m| m[&f]).collect();
        dtheta.insert(f, st.diff(&a).0);
        match face_measure(s0, f, tol) {
            Ok(m) => {
                face_measures.insert(f, m);
            }
            Err(SimplexError::InfiniteFaceMeasure) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(FamilyDerivativeReport {
        t,
        h,
        vol: vols[4],
        dvol,
        dtheta,
        face_measures,
        dvol_truncation: (dvol - dvol_half).abs() * 4.0 / 3.0,
    })
}

/// Residuals at steps h and h/2 with a round-off floor estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualPair {
    pub r_h: f64,
    pub r_half: f64,
    pub dvol: f64,
    /// Cancellation error of the difference quotients, `eps * sum |terms| / h`.
    pub noise_floor: f64,
}

impl ResidualPair {
    /// `r_h / r_half`, or `None` if either residual is within twice its
    /// round-off floor (the floor doubles at step h/2).
    pub fn step_halving_ratio(&self) -> Option<f64> {
        let above = self.r_h.abs() > 2.0 * self.noise_floor && self.r_half.abs() > 4.0 * self.noise_floor;
        above.then(|| self.r_h / self.r_half)
    }
}

/// Residual of `(1 - n) dVol = sum_F Vol_{n-2}(F) dtheta_F` with steps h and h/2.
///
/// For n = 2 the codimension-2 faces are points and enter with measure 1,
/// which turns the identity into the derivative of the angle-defect formula.
pub fn schlafli_residual_pair(fam: &SimplexFamily, t: f64, h: f64, tol: f64) -> Result<ResidualPair, SchlafliError> {
    let st = Stencil::new(fam, t, h, tol)?;
    let s0 = &st.members[4];
    let n = s0.dim();
    let vols = st.volumes()?;
    let angles = st.angles()?;
    let (dv, dv2) = st.diff(&vols);
    let nf = 1.0 - n as f64;
    let (mut r1, mut r2) = (nf * dv, nf * dv2);
    let mut mass = nf.abs() * vols[4];
    for f in s0.codim2_faces() {
        let m = if n == 2 {
            1.0
        } else {
            match face_measure(s0, f, tol) {
                Ok(m) => m,
                Err(SimplexError::InfiniteFaceMeasure) => return Err(SchlafliError::InfiniteFace),
                Err(e) => return Err(e.into()),
            }
        };
        let a: Vec<f64> = angles.iter().map(|x| x[&f]).collect();
        let (d1, d2) = st.diff(&a);
        r1 -= m * d1;
        r2 -= m * d2;
        mass += m * a[4];
    }
    Ok(ResidualPair { r_h: r1, r_half: r2, dvol: dv, noise_floor: f64::EPSILON * mass / h })
}

/// `(1 - n) dVol/dt - sum_F Vol_{n-2}(F) dtheta_F/dt`.
pub fn schlafli_residual(fam: &SimplexFamily, t: f64, h: f64) -> Result<f64, SchlafliError> {
    Ok(schlafli_residual_pair(fam, t, h, DERIVATIVE_VOLUME_TOL)?.r_h)
}

/// Truncated 3D residual with steps h and h/2.
pub fn schlafli_residual_truncated_3d_pair(
    fam: &SimplexFamily,
    t: f64,
    h: f64,
    horoballs: &HoroballAssignment,
    tol: f64,
) -> Result<ResidualPair, SchlafliError> {
    if fam.dim() != 3 {
        return Err(SimplexError::WrongDimension { expected: 3, got: fam.dim() }.into());
    }
    let st = Stencil::new(fam, t, h, tol)?;
    let s0 = &st.members[4];
    let vols = st.volumes()?;
    let angles = st.angles()?;
    let (dv, dv2) = st.diff(&vols);
    let (mut r1, mut r2) = (dv, dv2);
    let mut mass = vols[4];
    for f in s0.codim2_faces() {
        let l = truncated_edge_length(s0, edge_of_face(f), horoballs)?;
        let a: Vec<f64> = angles.iter().map(|x| x[&f]).collect();
        let (d1, d2) = st.diff(&a);
        r1 += 0.5 * l * d1;
        r2 += 0.5 * l * d2;
        mass += 0.5 * l.abs() * a[4];
    }
    Ok(ResidualPair { r_h: r1, r_half: r2, dvol: dv, noise_floor: f64::EPSILON * mass / h })
}

/// `dVol/dt + (1/2) sum_e l(e) dtheta_e/dt` with horoball-truncated lengths.
pub fn schlafli_residual_truncated_3d(
    fam: &SimplexFamily,
    t: f64,
    h: f64,
    horoballs: &HoroballAssignment,
) -> Result<f64, SchlafliError> {
    Ok(schlafli_residual_truncated_3d_pair(fam, t, h, horoballs, DERIVATIVE_VOLUME_TOL)?.r_h)
}

/// Rounds `value` to an integer, failing beyond `DEGREE_TOL`.
fn integral(value: f64) -> Result<i64, SchlafliError> {
    let r = value.round();
    let distance = (value - r).abs();
    if distance > DEGREE_TOL {
        return Err(SchlafliError::NonIntegral { value, distance });
    }
    Ok(r as i64)
}

fn locate(s: &GeodesicSimplex, p: &LorentzVector) -> Option<usize> {
    s.vertices().iter().position(|v| v.approx_eq(p, 1e-9))
}

/// Signed angle sum around a codimension-2 face over 2 pi.
pub fn transverse_degree_value(star: &[(GeodesicSimplex, i8)], face: &[LorentzVector]) -> Result<f64, SchlafliError> {
    if star.is_empty() {
        return Err(SchlafliError::EmptyStar);
    }
    let mut acc = 0.0;
    for (k, (s, eps)) in star.iter().enumerate() {
        if face.len() + 1 != s.dim() {
            return Err(SchlafliError::FaceNotFound(k));
        }
        let mut idx = Vec::with_capacity(face.len());
        for p in face {
            idx.push(locate(s, p).ok_or(SchlafliError::FaceNotFound(k))?);
        }
        let rest: Vec<usize> = (0..=s.dim()).filter(|i| !idx.contains(i)).collect();
        if rest.len() != 2 {
            return Err(SchlafliError::FaceNotFound(k));
        }
        acc += f64::from(*eps) * dihedral_angle(s, (rest[0], rest[1]))?;
    }
    Ok(acc / (2.0 * PI))
}

/// Transverse degree: the signed dihedral-angle sum over 2 pi, which must be
/// an integer. The sign follows the ambient orientation of the inputs.
pub fn transverse_degree(star: &[(GeodesicSimplex, i8)], face: &[LorentzVector]) -> Result<i64, SchlafliError> {
    integral(transverse_degree_value(star, face)?)
}

/// Degree of a star of triangles around `vertex` (0 at an ideal vertex).
pub fn vertex_degree_2d(star: &[(GeodesicSimplex, i8)], vertex: &LorentzVector) -> Result<i64, SchlafliError> {
    if star.is_empty() {
        return Err(SchlafliError::EmptyStar);
    }
    let mut acc = 0.0;
    for (k, (s, eps)) in star.iter().enumerate() {
        if s.dim() != 2 {
            return Err(SimplexError::WrongDimension { expected: 2, got: s.dim() }.into());
        }
        let v = locate(s, vertex).ok_or(SchlafliError::FaceNotFound(k))?;
        acc += f64::from(*eps) * triangle_angle(s, v)?;
    }
    integral(acc / (2.0 * PI))
}

/// Rotation by `phi` in the plane of the last two coordinates; it fixes the
/// span of `e0, ..., e_{n-2}` pointwise.
pub fn normal_rotation(n: usize, phi: f64) -> Isometry {
    let mut m = nalgebra::DMatrix::identity(n + 1, n + 1);
    let (c, s) = (phi.cos(), phi.sin());
    m[(n - 1, n - 1)] = c;
    m[(n - 1, n)] = -s;
    m[(n, n - 1)] = s;
    m[(n, n)] = c;
    Isometry::new(m).expect("planar rotation is an isometry")
}

/// A star of n-simplices around a codimension-2 face, winding `k` times.
#[derive(Debug, Clone)]
pub struct RingStar {
    pub face: Vec<LorentzVector>,
    pub star: Vec<(GeodesicSimplex, i8)>,
    pub winding: i64,
}

/// Face points in the fixed plane of `normal_rotation`, ring points rotated
/// about it by angles with increments in `(-pi, pi)`, all moved by `g`.
/// Signs are the orientations of the simplices, as for a simplicial map.
pub fn ring_star(
    face: &[LorentzVector],
    base: &LorentzVector,
    angles: &[f64],
    g: &Isometry,
) -> Result<RingStar, SimplexError> {
    let n = base.dim();
    let ring: Vec<LorentzVector> = angles.iter().map(|a| normal_rotation(n, *a).apply(base)).collect();
    let m = ring.len();
    let mut star = Vec::with_capacity(m);
    for j in 0..m {
        let mut v: Vec<LorentzVector> = face.to_vec();
        v.push(ring[j].clone());
        v.push(ring[(j + 1) % m].clone());
        let s = GeodesicSimplex::new(v)?.apply(g);
        let eps = if s.orientation() >= 0.0 { 1 } else { -1 };
        star.push((s, eps));
    }
    let total: f64 = (0..m)
        .map(|j| {
            let d = angles[(j + 1) % m] - angles[j];
            if j + 1 == m {
                d.rem_euclid(2.0 * PI) - if d.rem_euclid(2.0 * PI) > PI { 2.0 * PI } else { 0.0 }
            } else {
                d
            }
        })
        .sum();
    let face = face.iter().map(|p| g.apply(p)).collect();
    Ok(RingStar { face, star, winding: (total / (2.0 * PI)).round() as i64 })
}

/// Random ring angles with winding `k != 0`: monotone steps in `(0, 2pi/3]`
/// plus occasional back-steps, all of magnitude below pi.
pub fn random_ring_angles<R: Rng + ?Sized>(rng: &mut R, k: i64) -> Vec<f64> {
    let target = 2.0 * PI * k.unsigned_abs() as f64;
    let dir = k.signum() as f64;
    let mut out = vec![rng.gen_range(0.0..2.0 * PI)];
    let mut travelled = 0.0;
    loop {
        let step = if rng.gen_bool(0.15) && travelled > 1.0 {
            -rng.gen_range(0.1..1.0)
        } else {
            rng.gen_range(0.3..2.0)
        };
        if travelled + step >= target - 0.3 {
            break;
        }
        travelled += step;
        out.push(out[0] + dir * travelled);
    }
    out
}

/// Random face points on the fixed plane of `normal_rotation` in H^n, some ideal.
pub fn random_face<R: Rng + ?Sized>(rng: &mut R, n: usize, ideal_prob: f64) -> Vec<LorentzVector> {
    let m = n - 1;
    loop {
        let mut pts = Vec::with_capacity(m);
        for _ in 0..m {
            let mut k = nalgebra::DVector::zeros(n);
            for c in 0..(n - 2) {
                k[c] = rng.gen_range(-1.0..1.0);
            }
            let r = k.norm();
            if rng.gen_bool(ideal_prob) && r > 0.0 {
                k /= r;
            } else if r >= 0.9 {
                k *= 0.9 / r;
            }
            pts.push(LorentzVector::from_klein(&k).expect("inside the closed ball"));
        }
        let sum: nalgebra::DVector<f64> = pts.iter().map(|p| p.normalized()).sum();
        if lorentz::mdot(&sum, &sum) < -1e-3 && pts.len() == m {
            // Reject nearly collinear faces.
            let mat = nalgebra::DMatrix::from_columns(&pts.iter().map(|p| p.normalized()).collect::<Vec<_>>());
            let rows = mat.rows(0, n - 1).into_owned();
            if rows.determinant().abs() > 1e-2 {
                return pts;
            }
        }
    }
}

/// Random smooth family in H^n whose first `ideal` vertices are ideal.
///
/// Vertices follow `c + a sin(w t + phi)` in Klein coordinates; ideal slots
/// are projected to the sphere. Members stay away from degeneracy.
pub fn random_family<R: Rng + ?Sized>(rng: &mut R, n: usize, ideal: usize) -> SimplexFamily {
    use nalgebra::DVector;
    let mut kinds = vec![lorentz::PointKind::Ideal; ideal];
    kinds.extend(std::iter::repeat_n(lorentz::PointKind::Material, n + 1 - ideal));
    loop {
        let mut data = Vec::with_capacity(n + 1);
        for slot in 0..=n {
            let mut c = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            if slot >= ideal {
                let r = c.norm();
                if r > 0.6 {
                    c *= 0.6 / r;
                }
            }
            let a = DVector::from_fn(n, |_, _| rng.gen_range(-0.15..0.15));
            let w = rng.gen_range(0.5..3.0);
            let phi = rng.gen_range(0.0..2.0 * PI);
            data.push((c, a, w, phi));
        }
        let paths = move |t: f64| {
            data.iter().map(|(c, a, w, phi)| c + a * (w * t + phi).sin()).collect::<Vec<DVector<f64>>>()
        };
        let fam = SimplexFamily::from_klein_paths(kinds.clone(), paths);
        let ok = (0..=10).all(|k| match fam.at(k as f64 / 10.0) {
            Ok(s) => s.normalized_det().abs() > 0.02 * s.klein_scale().powi(n as i32),
            Err(_) => false,
        });
        if ok {
            return fam;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::{random_isometry, PointKind};
    use crate::simplex::regular_ideal_tetrahedron;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_family_has_zero_derivatives() {
        let s = GeodesicSimplex::from_klein(&[
            DVector::from_vec(vec![0.1, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.4, 0.1]),
            DVector::from_vec(vec![-0.2, 0.1, 0.5]),
            DVector::from_vec(vec![0.3, -0.3, -0.2]),
        ])
        .unwrap();
        let fam = SimplexFamily::constant(s);
        let r = family_derivatives(&fam, 0.5, DEFAULT_STEP, 1e-10).unwrap();
        assert!(r.dvol.abs() < 1e-10);
        assert!(r.dtheta.values().all(|d| d.abs() < 1e-10));
        assert!(schlafli_residual(&fam, 0.5, DEFAULT_STEP).unwrap().abs() < 1e-10);
    }

    #[test]
    fn ideal_edges_need_truncation() {
        let fam = SimplexFamily::constant(regular_ideal_tetrahedron());
        assert!(matches!(schlafli_residual(&fam, 0.5, 1e-4), Err(SchlafliError::InfiniteFace)));
        let h = HoroballAssignment::uniform(&regular_ideal_tetrahedron(), 10.0);
        assert!(schlafli_residual_truncated_3d(&fam, 0.5, 1e-4, &h).unwrap().abs() < 1e-10);
    }

    #[test]
    fn six_equal_wedges_give_degree_one() {
        let a = LorentzVector::from_klein(&DVector::from_vec(vec![0.5, 0.0, 0.0])).unwrap();
        let b = LorentzVector::from_klein(&DVector::from_vec(vec![-0.4, 0.0, 0.0])).unwrap();
        let base = LorentzVector::from_klein(&DVector::from_vec(vec![0.1, 0.5, 0.0])).unwrap();
        let angles: Vec<f64> = (0..6).map(|j| j as f64 * PI / 3.0).collect();
        let rs = ring_star(&[a, b], &base, &angles, &Isometry::identity(3)).unwrap();
        for (s, _) in &rs.star {
            assert!((dihedral_angle(s, (2, 3)).unwrap() - PI / 3.0).abs() < 1e-12);
        }
        assert_eq!(transverse_degree(&rs.star, &rs.face).unwrap().abs(), 1);
        let mut folded = vec![rs.star[0].clone()];
        folded.push((rs.star[0].0.clone(), -rs.star[0].1));
        assert_eq!(transverse_degree(&folded, &rs.face).unwrap(), 0);
        let broken = &rs.star[..5];
        assert!(matches!(transverse_degree(broken, &rs.face), Err(SchlafliError::NonIntegral { .. })));
    }

    #[test]
    fn fan_around_material_and_ideal_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = LorentzVector::origin(2);
        let base = LorentzVector::from_klein(&DVector::from_vec(vec![0.0, 0.6])).unwrap();
        let angles: Vec<f64> = (0..5).map(|j| j as f64 * 2.0 * PI / 5.0).collect();
        let g = random_isometry(&mut rng, 2, 0.7);
        let rs = ring_star(&[c], &base, &angles, &g).unwrap();
        let d = vertex_degree_2d(&rs.star, &rs.face[0]).unwrap();
        assert_eq!(d.abs(), 1);
        let flipped: Vec<_> = rs.star.iter().map(|(s, e)| (s.clone(), -e)).collect();
        assert_eq!(vertex_degree_2d(&flipped, &rs.face[0]).unwrap(), -d);

        let id = LorentzVector::from_klein(&DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let t1 = GeodesicSimplex::from_klein(&[
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.5]),
            DVector::from_vec(vec![0.0, -0.5]),
        ])
        .unwrap();
        assert_eq!(t1.kinds()[0], PointKind::Ideal);
        assert_eq!(vertex_degree_2d(&[(t1, 1)], &id).unwrap(), 0);
    }
}
