//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::PathBuf;

use hypvol::complex::LabeledTriangulation;
use hypvol::lorentz::{lift_moebius, Isometry, LorentzVector, Moebius};
use hypvol::repvol::{check_representation, Representation};
use nalgebra::{DVector, Matrix2};
use rand::Rng;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn load(name: &str) -> String {
    std::fs::read_to_string(fixtures().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn tri(name: &str) -> LabeledTriangulation {
    LabeledTriangulation::from_json(&load(name)).unwrap()
}

pub fn rep(name: &str, t: &LabeledTriangulation) -> Representation {
    Representation::from_json(&load(name), &t.presentation).unwrap()
}

/// Lobachevsky function by its Fourier series `(1/2) sum sin(2k theta)/k^2`
/// truncated after `k_max` terms, with a rigorous tail bound.
///
/// Summation by parts: the partial sums of `sin(2k theta)` are bounded by
/// `1/|sin theta|`, so the tail is at most `1 / (k_max^2 |sin theta|)`.
pub fn lobachevsky_fourier(theta: f64, k_max: usize) -> (f64, f64) {
    let mut acc = 0.0;
    let mut comp = 0.0;
    for k in (1..=k_max).rev() {
        let kf = k as f64;
        let term = (2.0 * kf * theta).sin() / (kf * kf);
        let y = term - comp;
        let s = acc + y;
        comp = (s - acc) - y;
        acc = s;
    }
    let tail = 1.0 / ((k_max as f64).powi(2) * theta.sin().abs());
    (0.5 * acc, tail)
}

/// Oracle value of `3 Л(pi/3)` and its error bound.
pub fn regular_ideal_tet_oracle() -> (f64, f64) {
    let (l, tail) = lobachevsky_fourier(PI / 3.0, 2_000_000);
    (3.0 * l, 3.0 * tail + 1e-13)
}

/// Uniform point of the Klein ball of radius `r`.
pub fn klein_point<R: Rng + ?Sized>(rng: &mut R, n: usize, r: f64) -> DVector<f64> {
    loop {
        let k = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if k.norm() < 1.0 {
            return k * r;
        }
    }
}

pub fn material<R: Rng + ?Sized>(rng: &mut R, n: usize, r: f64) -> LorentzVector {
    LorentzVector::from_klein(&klein_point(rng, n, r)).unwrap()
}

pub fn ideal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> LorentzVector {
    let k = klein_point(rng, n, 1.0);
    LorentzVector::from_klein(&(&k / k.norm())).unwrap()
}

/// Random element of SL(2,R) with entries of moderate size.
pub fn random_sl2r<R: Rng + ?Sized>(rng: &mut R) -> Matrix2<f64> {
    loop {
        let a: f64 = rng.gen_range(-2.0..2.0);
        let b: f64 = rng.gen_range(-2.0..2.0);
        let c: f64 = rng.gen_range(-2.0..2.0);
        if a.abs() > 0.3 {
            return Matrix2::new(a, b, c, (1.0 + b * c) / a);
        }
    }
}

pub fn lift2(m: Matrix2<f64>) -> Isometry {
    lift_moebius(&Moebius::Real(m)).unwrap()
}

/// Random representation of the punctured-torus group (free of rank 2).
pub fn random_free_rep<R: Rng + ?Sized>(rng: &mut R, t: &LabeledTriangulation) -> Representation {
    check_representation(&t.presentation, vec![lift2(random_sl2r(rng)), lift2(random_sl2r(rng))]).unwrap()
}
