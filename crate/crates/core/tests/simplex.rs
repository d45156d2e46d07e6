mod common;

use std::f64::consts::PI;

use hypvol::lorentz::{random_isometry, LorentzVector};
use hypvol::simplex::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_simplex(r: &mut ChaCha8Rng, n: usize, ideal: usize) -> GeodesicSimplex {
    loop {
        let v: Vec<LorentzVector> = (0..=n)
            .map(|i| if i < ideal { common::ideal(r, n) } else { common::material(r, n, 0.9) })
            .collect();
        let s = GeodesicSimplex::new(v).unwrap();
        if s.normalized_det().abs() > 1e-3 {
            return s;
        }
    }
}

fn cocycle_residual(pts: &[LorentzVector]) -> f64 {
    let mut acc = 0.0;
    let mut mass = 0.0;
    for i in 0..pts.len() {
        let face: Vec<LorentzVector> =
            pts.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, p)| p.clone()).collect();
        let v = signed_volume(&GeodesicSimplex::new(face).unwrap(), 1e-10).unwrap();
        acc += if i % 2 == 0 { v } else { -v };
        mass += v.abs();
    }
    acc.abs() / (1.0 + mass)
}

#[test]
fn regular_ideal_tetrahedron_matches_fourier_oracle() {
    let (oracle, bound) = common::regular_ideal_tet_oracle();
    let s = regular_ideal_tetrahedron();
    assert!((signed_volume(&s, 1e-10).unwrap().abs() - oracle).abs() <= bound + 1e-12);
    assert!((regular_ideal_tet_volume() - oracle).abs() <= bound + 1e-12);
    let cub = numeric_volume(&s, 1e-8).unwrap();
    assert!((cub - oracle).abs() < 1e-6, "cubature {cub}");
    for a in dihedral_angles(&s).unwrap().values() {
        assert!((a - PI / 3.0).abs() < 1e-12);
    }
}

#[test]
fn ideal_tetrahedra_closed_form_against_cubature() {
    for (a, b) in [(0.5, 1.1), (1.2, 0.9), (0.3, 0.4), (2.0, 0.6)] {
        let g = PI - a - b;
        let s = ideal_tetrahedron_from_angles(a, b, g).unwrap();
        let closed = ideal_tet_volume(a, b, g).unwrap();
        let cub = numeric_volume(&s, 1e-8).unwrap();
        assert!((closed - cub).abs() < 1e-6, "{a} {b}: {closed} vs {cub}");
        assert!((signed_volume(&s, 1e-10).unwrap().abs() - closed).abs() < 1e-10);
    }
}

#[test]
fn triangle_area_by_cubature_matches_angle_defect() {
    let mut r = rng(3);
    for ideal in 0..=3 {
        let s = random_simplex(&mut r, 2, ideal);
        let defect = PI - (0..3).map(|v| triangle_angle(&s, v).unwrap()).sum::<f64>();
        let cub = numeric_volume(&s, 1e-9).unwrap();
        assert!((defect - cub).abs() < 1e-7, "ideal {ideal}: {defect} vs {cub}");
    }
}

#[test]
fn repeated_vertex_is_degenerate_and_has_zero_volume() {
    let mut r = rng(4);
    let p = common::material(&mut r, 3, 0.5);
    let q = common::material(&mut r, 3, 0.5);
    let s = GeodesicSimplex::new(vec![p.clone(), q.clone(), p, common::material(&mut r, 3, 0.5)]).unwrap();
    assert!(s.is_degenerate());
    assert_eq!(signed_volume(&s, 1e-10).unwrap(), 0.0);
}

#[test]
fn document_round_trip() {
    let s = regular_ideal_tetrahedron();
    let doc = SimplexDoc::from_simplex(&s);
    let text = serde_json::to_string(&doc).unwrap();
    let back: SimplexDoc = serde_json::from_str(&text).unwrap();
    assert_eq!(back.to_simplex().unwrap(), s);
    let fixture: SimplexDoc = serde_json::from_str(&common::load("regular_ideal_tet.json")).unwrap();
    let v = signed_volume(&fixture.to_simplex().unwrap(), 1e-10).unwrap().abs();
    assert!((v - common::regular_ideal_tet_oracle().0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lobachevsky_matches_fourier_series(theta in 0.05f64..3.09) {
        let (oracle, tail) = common::lobachevsky_fourier(theta, 200_000);
        prop_assert!((lobachevsky(theta) - oracle).abs() <= tail + 1e-12);
    }

    #[test]
    fn volume_is_isometry_invariant(seed in any::<u64>(), n in 2usize..4, ideal in 0usize..3) {
        let mut r = rng(seed);
        let s = random_simplex(&mut r, n, ideal);
        let g = random_isometry(&mut r, n, 1.0);
        let v0 = signed_volume(&s, 1e-10).unwrap();
        let v1 = signed_volume(&s.apply(&g), 1e-10).unwrap();
        prop_assert!((v0 - v1).abs() < 1e-8, "{v0} vs {v1}");
    }

    #[test]
    fn odd_permutation_flips_the_sign(seed in any::<u64>(), n in 2usize..4) {
        let mut r = rng(seed);
        let s = random_simplex(&mut r, n, 1);
        let mut v = s.vertices().to_vec();
        v.swap(0, n);
        let t = GeodesicSimplex::new(v).unwrap();
        let (a, b) = (signed_volume(&s, 1e-10).unwrap(), signed_volume(&t, 1e-10).unwrap());
        prop_assert!((a + b).abs() < 1e-9);
    }

    #[test]
    fn volumes_are_bounded_by_the_regular_ideal_simplex(seed in any::<u64>(), n in 2usize..4, ideal in 0usize..5) {
        let mut r = rng(seed);
        let s = random_simplex(&mut r, n, ideal.min(n + 1));
        let bound = if n == 2 { PI } else { common::regular_ideal_tet_oracle().0 };
        prop_assert!(signed_volume(&s, 1e-10).unwrap().abs() <= bound + 1e-6);
    }

    #[test]
    fn straight_simplices_form_a_cocycle(seed in any::<u64>(), n in 2usize..4) {
        let mut r = rng(seed);
        let pts: Vec<LorentzVector> = (0..n + 2).map(|_| common::material(&mut r, n, 0.9)).collect();
        prop_assert!(cocycle_residual(&pts) <= 1e-6);
    }
}
