mod common;

use std::collections::HashSet;

use hypvol::complex::*;
use hypvol::repvol::{build_developing_assignment, developed_matching, BoundaryPreference};
use proptest::prelude::*;

fn letters() -> impl Strategy<Value = Vec<i32>> {
    proptest::collection::vec(prop_oneof![1..=3i32, -3..=-1i32], 0..12)
}

fn matching_for(tri: &str, rep: &str) -> (LabeledTriangulation, DevelopedMatching) {
    let t = common::tri(tri);
    let rho = common::rep(rep, &t);
    let a = build_developing_assignment(&rho, &t, 0, BoundaryPreference::PreferIdeal).unwrap();
    let m = developed_matching(&rho, &a, 1e-7);
    (t, m)
}

proptest! {
    #[test]
    fn reduction_is_idempotent(w in letters()) {
        let r = Word(w).reduce();
        prop_assert!(r.is_reduced());
        prop_assert_eq!(r.reduce(), r);
    }

    #[test]
    fn inverse_cancels(w in letters()) {
        let w = Word(w).reduce();
        prop_assert!(w.mul(&w.inverse()).is_empty());
        prop_assert_eq!(w.inverse().inverse(), w);
    }

    #[test]
    fn multiplication_is_associative(a in letters(), b in letters(), c in letters()) {
        let (a, b, c) = (Word(a), Word(b), Word(c));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
    }

    #[test]
    fn format_parse_round_trip(w in letters()) {
        let alpha = Alphabet::new(vec!["a".into(), "b".into(), "c".into()]);
        let w = Word(w).reduce();
        prop_assert_eq!(alpha.parse(&alpha.format(&w)).unwrap(), w.clone());
        let long = Alphabet::new(vec!["g1".into(), "g2".into(), "h".into()]);
        prop_assert_eq!(long.parse(&long.format(&w)).unwrap(), w);
    }

    #[test]
    fn cycle_check_is_translation_invariant(w in letters()) {
        let t = common::tri("punctured_torus.json");
        let g = Word(w.into_iter().map(|l| if l.abs() == 3 { l.signum() } else { l }).collect()).reduce();
        let mut moved = t.clone();
        moved.simplices = t.simplices.iter().map(|s| s.translated(&g)).collect();
        prop_assert!(check_cycle(&moved).closed);
    }
}

#[test]
fn word_syntax_variants() {
    let alpha = Alphabet::new(vec!["a".into(), "b".into()]);
    let ab = Word(vec![1, 2, -1, -2]);
    for s in ["abAB", "a b A B", "[a,b]", "a b a^-1 b^-1", "a b a⁻¹ b⁻¹"] {
        assert_eq!(alpha.parse(s).unwrap(), ab, "{s}");
    }
    assert_eq!(alpha.parse("(ab)^2").unwrap(), Word(vec![1, 2, 1, 2]));
    assert!(alpha.parse("1").unwrap().is_empty());
    assert!(alpha.parse("").unwrap().is_empty());
    assert!(matches!(alpha.parse("ac"), Err(WordError::UnknownGenerator(_))));
}

#[test]
fn shipped_fixtures_are_valid() {
    for name in ["fig8.json", "punctured_torus.json", "t3_core.json", "t3_coned.json"] {
        let t = common::tri(name);
        assert!(validate_triangulation(&t).is_valid(), "{name}");
        let doc: TriangulationDoc = serde_json::from_str(&common::load(name)).unwrap();
        assert!(validate_document(&doc).is_valid(), "{name}");
        assert_eq!(LabeledTriangulation::from_doc(&t.to_doc()).unwrap(), t);
    }
}

#[test]
fn broken_fixture_reports_violations() {
    let doc: TriangulationDoc = serde_json::from_str(&common::load("broken.json")).unwrap();
    let r = validate_document(&doc);
    let kinds: HashSet<&str> = r.violations.iter().map(|v| v.kind.as_str()).collect();
    assert!(kinds.contains("unknown generator"));
    assert!(kinds.contains("degenerate slot"));
    assert!(matches!(LabeledTriangulation::from_json(&common::load("broken.json")), Err(ComplexError::Invalid(_))));
}

#[test]
fn peripheral_words_of_fixtures() {
    let t = common::tri("punctured_torus.json");
    assert_eq!(peripheral_words(&t, "c").unwrap(), &[Word::commutator(&Word::generator(0), &Word::generator(1))]);
    let f = common::tri("fig8.json");
    let p = peripheral_words(&f, "c").unwrap();
    assert_eq!(f.presentation.format(&p[0]), "a");
    assert_eq!(p[1], f.presentation.parse("baBAABab").unwrap());
}

#[test]
fn torus_closes_exactly_and_with_flipped_signs() {
    let t = common::tri("punctured_torus.json");
    assert!(check_cycle(&t).closed);
    assert!(check_cycle(&t.with_flipped_signs()).closed);
    let mut one = t.clone();
    one.simplices.pop();
    assert!(!check_cycle(&one).closed);
}

#[test]
fn figure_eight_closes_under_developed_matching() {
    let (t, m) = matching_for("fig8.json", "fig8_geometric.json");
    let r = check_cycle_with(&t, FaceMatching::Developed(&m));
    assert!(r.closed, "{r:?}");
    assert_eq!(r.faces, 8);
    assert_eq!(r.classes, 4);
    let mut half = t.clone();
    half.simplices.pop();
    assert!(!check_cycle_with(&half, FaceMatching::Developed(&m)).closed);
}

#[test]
fn coning_the_t3_core_closes_it() {
    let (core, m) = matching_for("t3_core.json", "t3_parabolic.json");
    let dm = FaceMatching::Developed(&m);
    let r = check_cycle_with(&core, dm);
    assert!(!r.closed);
    assert_eq!(r.unmatched.len(), 12);
    let boundary = boundary_complex(&core, dm);
    let mut coned = core.clone();
    for (cusp, vertex) in [("c0", "m0"), ("c1", "m1")] {
        let v = core.orbit_vertices.iter().position(|o| o.id == vertex).unwrap();
        let part: Vec<LabeledSimplex> =
            boundary.iter().filter(|s| s.slots.iter().all(|x| x.vertex == v)).cloned().collect();
        assert_eq!(part.len(), 6);
        let cones = cone_boundary(&core, &part, cusp, dm).unwrap();
        for c in &cones {
            let slots: HashSet<(usize, Word)> = c.slots.iter().map(|s| (s.vertex, s.word.clone())).collect();
            assert_eq!(slots.len(), c.slots.len());
        }
        coned.simplices.extend(cones);
        let open: Vec<LabeledSimplex> = part[..5].to_vec();
        assert!(matches!(cone_boundary(&core, &open, cusp, dm), Err(ComplexError::OpenBoundary(_))));
    }
    assert!(check_cycle_with(&coned, dm).closed);
    assert!(check_cycle_with(&common::tri("t3_coned.json"), dm).closed);
}
