//! Gluing and cusp equations for all-ideal 3D triangulations.
//!
//! Unknowns are `w_j = log z_j`. Rows combine `log z`, `log z'`, `log z''`
//! with `z' = 1/(1-z)` and `z'' = 1 - 1/z`; edge rows sum to `2 pi i`. The
//! overdetermined system is solved by complex Gauss-Newton.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use super::{check_representation, RepError, Representation};
use crate::complex::{GluingData, LabeledTriangulation, RileyRecipe};
use crate::lorentz::{lift_moebius, Moebius};
use crate::simplex::ideal_tet_volume;

const MAX_NEWTON: usize = 60;
/// Largest continuation step in the filling parameter.
const CONTINUATION_STEP: f64 = 0.05;

/// Cusp condition for the single cusp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filling {
    /// Meridian and longitude holonomies are trivial.
    Complete,
    /// `p H(meridian) + q H(longitude) = 2 pi i t`; `t = 1` is the `(p, q)` filling.
    Dehn { p: f64, q: f64, t: f64 },
}

#[derive(Debug, Clone)]
pub struct GluingSolution {
    pub shapes: Vec<Complex64>,
    /// Max modulus of the edge-equation residuals.
    pub edge_residual: f64,
    pub meridian_log: Complex64,
    pub longitude_log: Complex64,
    pub representation: Representation,
}

fn i2pi() -> Complex64 {
    Complex64::new(0.0, 2.0 * PI)
}

/// `(log z, log z', log z'')` and their derivatives in `w = log z`.
fn logs(z: Complex64) -> ([Complex64; 3], [Complex64; 3]) {
    let one = Complex64::new(1.0, 0.0);
    let v = [z.ln(), -(one - z).ln(), ((z - one) / z).ln()];
    let d = [one, z / (one - z), one / (z - one)];
    (v, d)
}

fn row_value(row: &[i32], lg: &[[Complex64; 3]]) -> Complex64 {
    lg.iter().enumerate().map(|(j, l)| (0..3).map(|k| l[k] * f64::from(row[3 * j + k])).sum::<Complex64>()).sum()
}

fn row_grad(row: &[i32], dl: &[[Complex64; 3]]) -> Vec<Complex64> {
    dl.iter().enumerate().map(|(j, d)| (0..3).map(|k| d[k] * f64::from(row[3 * j + k])).sum()).collect()
}

struct System<'a> {
    g: &'a GluingData,
    filling: Filling,
}

impl System<'_> {
    fn eval(&self, z: &[Complex64]) -> (DVector<Complex64>, DMatrix<Complex64>) {
        let (lg, dl): (Vec<_>, Vec<_>) = z.iter().map(|&x| logs(x)).unzip();
        let mut f = Vec::new();
        let mut jac: Vec<Vec<Complex64>> = Vec::new();
        for row in &self.g.edges {
            f.push(row_value(row, &lg) - i2pi());
            jac.push(row_grad(row, &dl));
        }
        let (m, l) = (&self.g.meridians[0], &self.g.longitudes[0]);
        match self.filling {
            Filling::Complete => {
                f.push(row_value(m, &lg));
                jac.push(row_grad(m, &dl));
                f.push(row_value(l, &lg));
                jac.push(row_grad(l, &dl));
            }
            Filling::Dehn { p, q, t } => {
                f.push(row_value(m, &lg) * p + row_value(l, &lg) * q - i2pi() * t);
                let gm = row_grad(m, &dl);
                let gl = row_grad(l, &dl);
                jac.push(gm.iter().zip(&gl).map(|(a, b)| a * p + b * q).collect());
            }
        }
        let nz = z.len();
        (DVector::from_vec(f), DMatrix::from_fn(jac.len(), nz, |i, j| jac[i][j]))
    }

    /// Gauss-Newton in `w = log z` from `z0`.
    fn solve(&self, z0: &[Complex64], tol: f64) -> Result<Vec<Complex64>, String> {
        let mut w: Vec<Complex64> = z0.iter().map(|z| z.ln()).collect();
        for _ in 0..MAX_NEWTON {
            let z: Vec<Complex64> = w.iter().map(|x| x.exp()).collect();
            if z.iter().any(|x| x.im <= 0.0) {
                return Err("shape left the upper half plane".into());
            }
            let (f, j) = self.eval(&z);
            if f.iter().map(|x| x.norm()).fold(0.0, f64::max) <= tol {
                return Ok(z);
            }
            let svd = j.svd(true, true);
            let dw = svd.solve(&(-f), 1e-13).map_err(|e| e.to_string())?;
            for (x, d) in w.iter_mut().zip(dw.iter()) {
                *x += d;
            }
        }
        let z: Vec<Complex64> = w.iter().map(|x| x.exp()).collect();
        let r = self.eval(&z).0.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if r <= tol {
            Ok(z)
        } else {
            Err(format!("Newton did not converge (residual {r:e})"))
        }
    }
}

/// Sum of ideal tetrahedron volumes of the shapes.
pub fn shapes_volume(shapes: &[Complex64]) -> Result<f64, RepError> {
    let one = Complex64::new(1.0, 0.0);
    let mut v = 0.0;
    for &z in shapes {
        v += ideal_tet_volume(z.arg(), (one / (one - z)).arg(), (one - one / z).arg())?;
    }
    Ok(v)
}

fn riley_matrices(m: Complex64, u: Complex64) -> (Matrix2<Complex64>, Matrix2<Complex64>) {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    (Matrix2::new(m, one, zero, one / m), Matrix2::new(m, zero, -u, one / m))
}

fn riley_residual(t: &LabeledTriangulation, recipe: &RileyRecipe, m: Complex64, u: Complex64) -> Vec<Complex64> {
    let (a, b) = riley_matrices(m, u);
    let pres = &t.presentation;
    let ia = pres.generators().iter().position(|g| *g == recipe.generators[0]).expect("validated");
    let mut out = Vec::new();
    for r in &pres.relators {
        let mut w = Matrix2::<Complex64>::identity();
        for &l in r.letters() {
            let g = (l.unsigned_abs() - 1) as usize;
            let base = if g == ia { a } else { b };
            w *= if l > 0 { base } else { base.try_inverse().expect("det 1") };
        }
        let d = w - Matrix2::<Complex64>::identity();
        out.extend(d.iter().copied());
    }
    out
}

/// Solves the relators for `u` at meridian eigenvalue `m` by Gauss-Newton.
fn riley_u(t: &LabeledTriangulation, recipe: &RileyRecipe, m: Complex64, u0: Complex64) -> Option<Complex64> {
    let mut u = u0;
    let h = 1e-7;
    for _ in 0..MAX_NEWTON {
        let r = riley_residual(t, recipe, m, u);
        let norm = r.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if norm < 1e-14 {
            return Some(u);
        }
        let rp = riley_residual(t, recipe, m, u + h);
        let rm = riley_residual(t, recipe, m, u - h);
        let jac: Vec<Complex64> = rp.iter().zip(&rm).map(|(p, q)| (p - q) / (2.0 * h)).collect();
        let num: Complex64 = jac.iter().zip(&r).map(|(j, x)| j.conj() * x).sum();
        let den: f64 = jac.iter().map(|j| j.norm_sqr()).sum();
        if den == 0.0 {
            return None;
        }
        let du = -num / den;
        u += du;
        if du.norm() < 1e-15 * (1.0 + u.norm()) {
            break;
        }
    }
    let norm = riley_residual(t, recipe, m, u).iter().map(|x| x.norm()).fold(0.0, f64::max);
    (norm < 1e-10).then_some(u)
}

/// Representation with meridian eigenvalue `exp(meridian_log / 2)`, continued from the complete structure.
pub fn riley_representation(t: &LabeledTriangulation, meridian_log: Complex64) -> Result<Representation, RepError> {
    let g = t.gluing.as_ref().ok_or_else(|| RepError::Path("triangulation has no gluing data".into()))?;
    let recipe = &g.holonomy;
    let pres = &t.presentation;
    if pres.rank() != 2 {
        return Err(RepError::Path("holonomy recipe needs a two-generator presentation".into()));
    }
    let half = meridian_log / 2.0;
    let steps = ((half.norm() / 0.02).ceil() as usize).max(1);
    let mut u = Complex64::new(recipe.u_complete[0], recipe.u_complete[1]);
    for k in 1..=steps {
        let m = (half * (k as f64 / steps as f64)).exp();
        u = riley_u(t, recipe, m, u).ok_or_else(|| RepError::Gluing {
            reason: "holonomy reconstruction failed".into(),
            last_good_t: (k - 1) as f64 / steps as f64,
        })?;
    }
    let m = half.exp();
    let (a, b) = riley_matrices(m, u);
    let ia = pres.generators().iter().position(|x| *x == recipe.generators[0]).expect("validated");
    let mut images = vec![lift_moebius(&Moebius::Complex(b))?; 2];
    images[ia] = lift_moebius(&Moebius::Complex(a))?;
    check_representation(pres, images)
}

fn solution(t: &LabeledTriangulation, g: &GluingData, shapes: Vec<Complex64>) -> Result<GluingSolution, RepError> {
    let lg: Vec<_> = shapes.iter().map(|&z| logs(z).0).collect();
    let edge_residual = g.edges.iter().map(|r| (row_value(r, &lg) - i2pi()).norm()).fold(0.0, f64::max);
    let meridian_log = row_value(&g.meridians[0], &lg);
    let longitude_log = row_value(&g.longitudes[0], &lg);
    let representation = riley_representation(t, meridian_log)?;
    Ok(GluingSolution { shapes, edge_residual, meridian_log, longitude_log, representation })
}

/// Solves the gluing equations of an all-ideal 3D triangulation with one cusp.
///
/// Dehn fillings are reached by continuation in `t` from the complete structure.
pub fn solve_gluing_equations(
    t: &LabeledTriangulation,
    filling: Filling,
    init: Option<&[Complex64]>,
    tol: f64,
) -> Result<GluingSolution, RepError> {
    let g = t.gluing.as_ref().ok_or_else(|| RepError::Path("triangulation has no gluing data".into()))?;
    if t.dim != 3 || g.meridians.len() != 1 || g.longitudes.len() != 1 {
        return Err(RepError::Path("gluing solver handles one-cusped 3D triangulations".into()));
    }
    let default = vec![Complex64::new(0.5, 0.8); g.tetrahedra];
    let z0 = init.unwrap_or(&default);
    if z0.len() != g.tetrahedra {
        return Err(RepError::Path(format!("{} initial shapes for {} tetrahedra", z0.len(), g.tetrahedra)));
    }
    if z0.iter().any(|z| z.im.is_nan() || z.im <= 0.0) {
        return Err(RepError::RealShapes);
    }
    let complete = System { g, filling: Filling::Complete }
        .solve(z0, tol)
        .map_err(|reason| RepError::Gluing { reason, last_good_t: 0.0 })?;
    let Filling::Dehn { p, q, t: target } = filling else {
        return solution(t, g, complete);
    };
    let steps = ((target.abs() / CONTINUATION_STEP).ceil() as usize).max(1);
    let mut z = complete;
    let mut done = 0.0;
    for k in 1..=steps {
        let s = target * k as f64 / steps as f64;
        let sys = System { g, filling: Filling::Dehn { p, q, t: s } };
        z = sys.solve(&z, tol).map_err(|reason| RepError::Gluing { reason, last_good_t: done })?;
        done = s;
    }
    solution(t, g, z)
}
