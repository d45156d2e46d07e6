//! Formal boundary of the signed simplex sum modulo face pairings.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::{ComplexError, LabeledSimplex, LabeledTriangulation, Slot, Word};
use crate::lorentz::{Isometry, LorentzVector};

/// Peripheral products `p_a^i p_b^j` with `|i|, |j| <= PERIPHERAL_RANGE`.
pub const PERIPHERAL_RANGE: i64 = 4;

/// Numerical face matching through a representation: slot `(v, w)` is the
/// point `rho(w) points[v]`.
#[derive(Debug, Clone)]
pub struct DevelopedMatching {
    pub images: Vec<Isometry>,
    inverses: Vec<Isometry>,
    pub points: Vec<LorentzVector>,
    pub tol: f64,
}

impl DevelopedMatching {
    pub fn new(images: Vec<Isometry>, points: Vec<LorentzVector>, tol: f64) -> Self {
        let inverses = images.iter().map(|g| g.inverse()).collect();
        Self { images, inverses, points, tol }
    }

    pub fn eval(&self, w: &Word) -> Isometry {
        w.evaluate(&self.images, &self.inverses)
    }

    fn same_point(&self, x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>) -> bool {
        (x - y).amax() <= self.tol * (1.0 + x.amax().max(y.amax()))
    }
}

/// How codimension-1 faces are identified.
#[derive(Debug, Clone, Copy)]
pub enum FaceMatching<'a> {
    /// Literal equality of reduced words after left translation by one
    /// word; cone-vertex slots are compared modulo bounded peripheral products.
    Exact,
    /// Developed points agree after applying the image of a candidate word.
    Developed(&'a DevelopedMatching),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnmatchedFace {
    pub simplex: usize,
    pub omitted: usize,
    pub slots: Vec<(String, String)>,
    /// Net multiplicity of the face class in the boundary.
    pub net: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleReport {
    pub closed: bool,
    pub faces: usize,
    pub classes: usize,
    pub unmatched: Vec<UnmatchedFace>,
}

struct Face {
    simplex: usize,
    omitted: usize,
    slots: Vec<Slot>,
    coef: i32,
}

struct Dsu {
    parent: Vec<usize>,
    /// Orientation of the face relative to its parent.
    flip: Vec<bool>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), flip: vec![false; n] }
    }

    fn find(&mut self, x: usize) -> (usize, bool) {
        let p = self.parent[x];
        if p == x {
            return (x, false);
        }
        let (r, f) = self.find(p);
        self.parent[x] = r;
        self.flip[x] ^= f;
        (r, self.flip[x])
    }

    /// Records `a = (-1)^flip b`.
    fn union(&mut self, a: usize, b: usize, flip: bool) {
        let (ra, fa) = self.find(a);
        let (rb, fb) = self.find(b);
        if ra != rb {
            self.parent[ra] = rb;
            self.flip[ra] = fa ^ fb ^ flip;
        }
    }
}

fn permutation_is_odd(p: &[usize]) -> bool {
    let mut inv = 0usize;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inv += 1;
            }
        }
    }
    inv % 2 == 1
}

struct Context<'a> {
    t: &'a LabeledTriangulation,
    periph_list: Vec<Vec<Word>>,
    periph_set: Vec<HashSet<Word>>,
    matching: FaceMatching<'a>,
    cache: HashMap<Word, Isometry>,
}

impl<'a> Context<'a> {
    fn new(t: &'a LabeledTriangulation, matching: FaceMatching<'a>) -> Self {
        let mut periph_list = Vec::new();
        let mut periph_set = Vec::new();
        for c in &t.cusps {
            let mut set = HashSet::new();
            let mut list = Vec::new();
            let mut add = |w: Word| {
                if set.insert(w.clone()) {
                    list.push(w);
                }
            };
            add(Word::identity());
            for a in &c.peripheral {
                for b in &c.peripheral {
                    for i in -PERIPHERAL_RANGE..=PERIPHERAL_RANGE {
                        for j in -PERIPHERAL_RANGE..=PERIPHERAL_RANGE {
                            add(a.pow(i).mul(&b.pow(j)));
                        }
                    }
                }
            }
            list.sort_by_key(|w| w.len());
            periph_list.push(list);
            periph_set.push(set);
        }
        Self { t, periph_list, periph_set, matching, cache: HashMap::new() }
    }

    fn cusp_of(&self, v: usize) -> Option<usize> {
        self.t.vertex_cusp(v)
    }

    fn eval(&mut self, dm: &DevelopedMatching, w: &Word) -> Isometry {
        if let Some(g) = self.cache.get(w) {
            return g.clone();
        }
        let g = dm.eval(w);
        self.cache.insert(w.clone(), g.clone());
        g
    }

    fn developed(&mut self, dm: &DevelopedMatching, s: &Slot) -> nalgebra::DVector<f64> {
        let g = self.eval(dm, &s.word);
        g.apply(&dm.points[s.vertex]).normalized()
    }

    /// Candidate translations carrying the reference slot of `a` to slots of `b`.
    fn candidates(&self, a: &Face, b: &Face) -> Vec<Word> {
        let k = a.slots.iter().position(|s| self.cusp_of(s.vertex).is_none()).unwrap_or(0);
        let r = &a.slots[k];
        let rinv = r.word.inverse();
        let mut out = Vec::new();
        for s in b.slots.iter().filter(|s| s.vertex == r.vertex) {
            match self.cusp_of(r.vertex) {
                None => out.push(s.word.mul(&rinv)),
                Some(c) => {
                    for p in &self.periph_list[c] {
                        out.push(s.word.mul(p).mul(&rinv));
                    }
                }
            }
        }
        out
    }

    /// Orientation parity of a pairing `a -> b`, if any candidate works.
    fn pairing(&mut self, a: &Face, b: &Face) -> Option<bool> {
        let cands = self.candidates(a, b);
        match self.matching {
            FaceMatching::Exact => cands.iter().find_map(|g| self.map_exact(g, a, b)),
            FaceMatching::Developed(dm) => {
                let ya: Vec<_> = a.slots.iter().map(|s| self.developed(dm, s)).collect();
                let yb: Vec<_> = b.slots.iter().map(|s| self.developed(dm, s)).collect();
                for g in &cands {
                    let gi = self.eval(dm, g);
                    let moved: Vec<_> = a
                        .slots
                        .iter()
                        .zip(&ya)
                        .map(|(_, y)| {
                            let c = gi.apply_vec(y);
                            let x0 = c[0];
                            c / x0
                        })
                        .collect();
                    let mut perm = Vec::with_capacity(a.slots.len());
                    let mut used = vec![false; b.slots.len()];
                    for (j, x) in moved.iter().enumerate() {
                        let hit = (0..b.slots.len()).find(|&l| {
                            !used[l] && b.slots[l].vertex == a.slots[j].vertex && dm.same_point(x, &yb[l])
                        });
                        match hit {
                            Some(l) => {
                                used[l] = true;
                                perm.push(l);
                            }
                            None => break,
                        }
                    }
                    if perm.len() == a.slots.len() {
                        return Some(permutation_is_odd(&perm));
                    }
                }
                None
            }
        }
    }

    fn map_exact(&self, g: &Word, a: &Face, b: &Face) -> Option<bool> {
        let mut perm = Vec::with_capacity(a.slots.len());
        let mut used = vec![false; b.slots.len()];
        for s in &a.slots {
            let target = g.mul(&s.word);
            let cusp = self.cusp_of(s.vertex);
            let hit = (0..b.slots.len()).find(|&l| {
                !used[l]
                    && b.slots[l].vertex == s.vertex
                    && match cusp {
                        None => b.slots[l].word == target,
                        Some(c) => self.periph_set[c].contains(&b.slots[l].word.inverse().mul(&target)),
                    }
            })?;
            used[hit] = true;
            perm.push(hit);
        }
        Some(permutation_is_odd(&perm))
    }
}

struct Analysis {
    faces: Vec<Face>,
    net: BTreeMap<usize, i32>,
}

fn analyse(t: &LabeledTriangulation, simplices: &[LabeledSimplex], matching: FaceMatching<'_>) -> Analysis {
    let mut faces = Vec::new();
    for (si, s) in simplices.iter().enumerate() {
        for i in 0..s.slots.len() {
            let slots: Vec<Slot> =
                s.slots.iter().enumerate().filter(|(k, _)| *k != i).map(|(_, sl)| sl.clone()).collect();
            let coef = i32::from(s.sign) * if i % 2 == 0 { 1 } else { -1 };
            faces.push(Face { simplex: si, omitted: i, slots, coef });
        }
    }
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (fi, f) in faces.iter().enumerate() {
        let mut key: Vec<usize> = f.slots.iter().map(|s| s.vertex).collect();
        key.sort_unstable();
        groups.entry(key).or_default().push(fi);
    }
    let mut ctx = Context::new(t, matching);
    let mut dsu = Dsu::new(faces.len());
    for members in groups.values() {
        for (x, &a) in members.iter().enumerate() {
            for &b in &members[x + 1..] {
                if dsu.find(a).0 == dsu.find(b).0 {
                    continue;
                }
                if let Some(odd) = ctx.pairing(&faces[a], &faces[b]) {
                    dsu.union(a, b, odd);
                }
            }
        }
    }
    let mut net: BTreeMap<usize, i32> = BTreeMap::new();
    for (fi, f) in faces.iter().enumerate() {
        let (r, fl) = dsu.find(fi);
        *net.entry(r).or_default() += if fl { -f.coef } else { f.coef };
    }
    Analysis { faces, net }
}

fn report(t: &LabeledTriangulation, an: &Analysis) -> CycleReport {
    let p = &t.presentation;
    let mut unmatched = Vec::new();
    for (&r, &n) in &an.net {
        if n != 0 {
            let f = &an.faces[r];
            unmatched.push(UnmatchedFace {
                simplex: f.simplex,
                omitted: f.omitted,
                slots: f.slots.iter().map(|s| (t.orbit_vertices[s.vertex].id.clone(), p.format(&s.word))).collect(),
                net: n,
            });
        }
    }
    CycleReport { closed: unmatched.is_empty(), faces: an.faces.len(), classes: an.net.len(), unmatched }
}

/// Exact-word cycle check.
pub fn check_cycle(t: &LabeledTriangulation) -> CycleReport {
    check_cycle_with(t, FaceMatching::Exact)
}

/// Cycle check: every face class of the signed boundary must cancel.
pub fn check_cycle_with(t: &LabeledTriangulation, matching: FaceMatching<'_>) -> CycleReport {
    report(t, &analyse(t, &t.simplices, matching))
}

/// The unmatched faces of `t` as a signed (n-1)-dimensional complex.
pub fn boundary_complex(t: &LabeledTriangulation, matching: FaceMatching<'_>) -> Vec<LabeledSimplex> {
    let an = analyse(t, &t.simplices, matching);
    let mut out = Vec::new();
    for (&r, &n) in &an.net {
        for _ in 0..n.unsigned_abs() {
            out.push(LabeledSimplex { slots: an.faces[r].slots.clone(), sign: n.signum() as i8 });
        }
    }
    out
}

/// Cones a closed boundary complex to the cone vertex of `cusp_id`.
///
/// The cone vertex is appended last with the identity word; signs are
/// chosen so that the cones cancel the boundary they are built on.
pub fn cone_boundary(
    t: &LabeledTriangulation,
    boundary: &[LabeledSimplex],
    cusp_id: &str,
    matching: FaceMatching<'_>,
) -> Result<Vec<LabeledSimplex>, ComplexError> {
    let v = t.cone_vertex(cusp_id)?;
    for s in boundary {
        if s.slots.len() != t.dim {
            return Err(ComplexError::BoundaryDimension { expected: t.dim, got: s.slots.len() });
        }
    }
    let an = analyse(t, boundary, matching);
    let open = an.net.values().filter(|n| **n != 0).count();
    if open > 0 {
        return Err(ComplexError::OpenBoundary(open));
    }
    let sgn: i8 = if t.dim.is_multiple_of(2) { -1 } else { 1 };
    Ok(boundary
        .iter()
        .map(|s| {
            let mut slots = s.slots.clone();
            slots.push(Slot { vertex: v, word: Word::identity() });
            LabeledSimplex { slots, sign: sgn * s.sign }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::super::tests::torus_doc;
    use super::*;

    #[test]
    fn punctured_torus_closes_exactly() {
        let t = LabeledTriangulation::from_doc(&torus_doc()).unwrap();
        let r = check_cycle(&t);
        assert!(r.closed, "{r:?}");
        assert_eq!(r.faces, 6);
        assert_eq!(r.classes, 3);
    }

    #[test]
    fn single_and_doubled_simplex() {
        let mut t = LabeledTriangulation::from_doc(&torus_doc()).unwrap();
        t.simplices.truncate(1);
        let r = check_cycle(&t);
        assert!(!r.closed);
        assert_eq!(r.unmatched.len(), 3);
        let mut s = t.simplices[0].clone();
        s.sign = -1;
        t.simplices.push(s);
        assert!(check_cycle(&t).closed);
    }

    #[test]
    fn boundary_of_one_triangle_is_a_closed_loop() {
        let mut doc = torus_doc();
        doc.orbit_vertices.push(crate::complex::OrbitVertexDoc { id: "m".into(), kind: crate::complex::VertexKind::Material });
        doc.orbit_vertices.push(crate::complex::OrbitVertexDoc { id: "q".into(), kind: crate::complex::VertexKind::Material });
        doc.simplices = vec![crate::complex::SimplexSlotsDoc {
            slots: vec![("m".into(), "".into()), ("q".into(), "".into()), ("m".into(), "a".into())],
            sign: 1,
        }];
        let t = LabeledTriangulation::from_doc(&doc).unwrap();
        let b = boundary_complex(&t, FaceMatching::Exact);
        assert_eq!(b.len(), 3);
        let cones = cone_boundary(&t, &b, "c", FaceMatching::Exact).unwrap();
        assert_eq!(cones.len(), 3);
        assert!(cones.iter().all(|s| s.slots.iter().filter(|x| x.vertex == 0).count() == 1));
        let mut with_cones = t.clone();
        with_cones.simplices.extend(cones);
        assert!(check_cycle(&with_cones).closed);
        let open: Vec<_> = b.iter().filter(|s| s.slots.iter().any(|x| !x.word.is_empty())).cloned().collect();
        assert!(matches!(cone_boundary(&t, &open, "c", FaceMatching::Exact), Err(ComplexError::OpenBoundary(_))));
        assert!(cone_boundary(&t, &[], "c", FaceMatching::Exact).unwrap().is_empty());
    }
}
