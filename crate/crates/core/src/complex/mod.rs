//! Labeled triangulations of coned-off cusped manifolds.
//!
//! A simplex is a tuple of slots `(orbit vertex, word)`; the slot stands for
//! the point `rho(word) * f(orbit vertex)` of a developing map. The signed
//! sum of simplices is the fundamental cycle, checked by [`check_cycle`].

mod cycle;
pub mod word;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cycle::{
    boundary_complex, check_cycle, check_cycle_with, cone_boundary, CycleReport, DevelopedMatching, FaceMatching,
    UnmatchedFace,
};
pub use word::{Alphabet, Word, WordError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComplexError {
    #[error("invalid triangulation: {}", .0.summary())]
    Invalid(ValidationReport),
    #[error("unknown cusp '{0}'")]
    UnknownCusp(String),
    #[error("cusp '{0}' has no cone vertex")]
    NoConeVertex(String),
    #[error("boundary is not closed: {0} unmatched faces")]
    OpenBoundary(usize),
    #[error("boundary simplices must have {expected} slots, got {got}")]
    BoundaryDimension { expected: usize, got: usize },
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPresentation {
    pub alphabet: Alphabet,
    pub relators: Vec<Word>,
}

impl GroupPresentation {
    pub fn new(generators: Vec<String>, relators: &[&str]) -> Result<Self, WordError> {
        let alphabet = Alphabet::new(generators);
        let relators = relators.iter().map(|r| alphabet.parse(r)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { alphabet, relators })
    }

    pub fn generators(&self) -> &[String] {
        self.alphabet.names()
    }

    pub fn rank(&self) -> usize {
        self.alphabet.names().len()
    }

    pub fn parse(&self, s: &str) -> Result<Word, WordError> {
        self.alphabet.parse(s)
    }

    pub fn format(&self, w: &Word) -> String {
        self.alphabet.format(w)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexKind {
    Material,
    IdealCusp(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitVertex {
    pub id: String,
    pub kind: VertexKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cusp {
    pub id: String,
    pub peripheral: Vec<Word>,
}

/// A vertex slot: orbit-vertex index and group word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub vertex: usize,
    pub word: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSimplex {
    pub slots: Vec<Slot>,
    pub sign: i8,
}

impl LabeledSimplex {
    /// Left-translates every word by `g`.
    pub fn translated(&self, g: &Word) -> Self {
        Self {
            slots: self.slots.iter().map(|s| Slot { vertex: s.vertex, word: g.mul(&s.word) }).collect(),
            sign: self.sign,
        }
    }
}

/// Linear gluing-equation data for an all-ideal 3D triangulation.
///
/// Each row has three integer coefficients per tetrahedron, for
/// `log z`, `log z'`, `log z''` with `z' = 1/(1-z)`, `z'' = 1 - 1/z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingData {
    pub tetrahedra: usize,
    /// Edge rows; each sums to `2 pi i`.
    pub edges: Vec<Vec<i32>>,
    /// Per-cusp meridian and longitude rows (log-holonomies).
    pub meridians: Vec<Vec<i32>>,
    pub longitudes: Vec<Vec<i32>>,
    /// Two-bridge holonomy recipe: meridian generators and the complete-structure parameter.
    pub holonomy: RileyRecipe,
}

/// `a = [[m, 1], [0, 1/m]]`, `b = [[m, 0], [-u, 1/m]]` with the relator solved for `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RileyRecipe {
    pub generators: [String; 2],
    /// `u` at the complete structure, `[re, im]`.
    pub u_complete: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTriangulation {
    pub dim: usize,
    pub presentation: GroupPresentation,
    pub cusps: Vec<Cusp>,
    pub orbit_vertices: Vec<OrbitVertex>,
    pub simplices: Vec<LabeledSimplex>,
    pub gluing: Option<GluingData>,
}

impl LabeledTriangulation {
    pub fn cusp_index(&self, id: &str) -> Result<usize, ComplexError> {
        self.cusps.iter().position(|c| c.id == id).ok_or_else(|| ComplexError::UnknownCusp(id.into()))
    }

    /// Index of the cone vertex of a cusp.
    pub fn cone_vertex(&self, cusp: &str) -> Result<usize, ComplexError> {
        self.cusp_index(cusp)?;
        self.orbit_vertices
            .iter()
            .position(|v| v.kind == VertexKind::IdealCusp(cusp.to_string()))
            .ok_or_else(|| ComplexError::NoConeVertex(cusp.into()))
    }

    /// Cusp index of an orbit vertex, if it is a cone vertex.
    pub fn vertex_cusp(&self, v: usize) -> Option<usize> {
        match &self.orbit_vertices[v].kind {
            VertexKind::Material => None,
            VertexKind::IdealCusp(c) => self.cusps.iter().position(|k| &k.id == c),
        }
    }

    pub fn with_flipped_signs(&self) -> Self {
        let mut t = self.clone();
        for s in &mut t.simplices {
            s.sign = -s.sign;
        }
        t
    }

    pub fn from_json(text: &str) -> Result<Self, ComplexError> {
        let doc: TriangulationDoc = serde_json::from_str(text).map_err(|e| ComplexError::Json(e.to_string()))?;
        Self::from_doc(&doc)
    }

    pub fn from_doc(doc: &TriangulationDoc) -> Result<Self, ComplexError> {
        let report = validate_document(doc);
        if !report.is_valid() {
            return Err(ComplexError::Invalid(report));
        }
        let alphabet = Alphabet::new(doc.generators.clone());
        let relators = doc.relators.iter().map(|r| alphabet.parse(r)).collect::<Result<Vec<_>, _>>()?;
        let cusps = doc
            .cusps
            .iter()
            .map(|c| {
                Ok(Cusp {
                    id: c.id.clone(),
                    peripheral: c.peripheral.iter().map(|w| alphabet.parse(w).map(|w| w.reduce())).collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<Vec<_>, WordError>>()?;
        let orbit_vertices: Vec<OrbitVertex> =
            doc.orbit_vertices.iter().map(|v| OrbitVertex { id: v.id.clone(), kind: v.kind.clone() }).collect();
        let index: BTreeMap<&str, usize> = doc.orbit_vertices.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();
        let simplices = doc
            .simplices
            .iter()
            .map(|s| {
                Ok(LabeledSimplex {
                    slots: s
                        .slots
                        .iter()
                        .map(|(v, w)| Ok(Slot { vertex: index[v.as_str()], word: alphabet.parse(w)?.reduce() }))
                        .collect::<Result<_, WordError>>()?,
                    sign: s.sign,
                })
            })
            .collect::<Result<Vec<_>, WordError>>()?;
        Ok(Self {
            dim: doc.dim,
            presentation: GroupPresentation { alphabet, relators },
            cusps,
            orbit_vertices,
            simplices,
            gluing: doc.gluing.clone(),
        })
    }

    pub fn to_doc(&self) -> TriangulationDoc {
        let p = &self.presentation;
        TriangulationDoc {
            dim: self.dim,
            generators: p.generators().to_vec(),
            relators: p.relators.iter().map(|r| p.format(r)).collect(),
            cusps: self
                .cusps
                .iter()
                .map(|c| CuspDoc { id: c.id.clone(), peripheral: c.peripheral.iter().map(|w| p.format(w)).collect() })
                .collect(),
            orbit_vertices: self
                .orbit_vertices
                .iter()
                .map(|v| OrbitVertexDoc { id: v.id.clone(), kind: v.kind.clone() })
                .collect(),
            simplices: self
                .simplices
                .iter()
                .map(|s| SimplexSlotsDoc {
                    slots: s.slots.iter().map(|sl| (self.orbit_vertices[sl.vertex].id.clone(), p.format(&sl.word))).collect(),
                    sign: s.sign,
                })
                .collect(),
            gluing: self.gluing.clone(),
        }
    }
}

/// Stored generators of a cusp's peripheral subgroup.
pub fn peripheral_words<'a>(t: &'a LabeledTriangulation, cusp_id: &str) -> Result<&'a [Word], ComplexError> {
    Ok(&t.cusps[t.cusp_index(cusp_id)?].peripheral)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspDoc {
    pub id: String,
    pub peripheral: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitVertexDoc {
    pub id: String,
    pub kind: VertexKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexSlotsDoc {
    pub slots: Vec<(String, String)>,
    pub sign: i8,
}

/// JSON form of a labeled triangulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangulationDoc {
    pub dim: usize,
    pub generators: Vec<String>,
    #[serde(default)]
    pub relators: Vec<String>,
    #[serde(default)]
    pub cusps: Vec<CuspDoc>,
    pub orbit_vertices: Vec<OrbitVertexDoc>,
    pub simplices: Vec<SimplexSlotsDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gluing: Option<GluingData>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: &str, detail: String) {
        self.violations.push(Violation { kind: kind.into(), detail });
    }

    pub fn summary(&self) -> String {
        self.violations.iter().map(|v| format!("{}: {}", v.kind, v.detail)).collect::<Vec<_>>().join("; ")
    }

    fn word(&mut self, alphabet: &Alphabet, w: &str, context: &str) -> Option<Word> {
        match alphabet.parse(w) {
            Ok(w) => Some(w),
            Err(WordError::UnknownGenerator(g)) => {
                self.push("unknown generator", format!("'{g}' in {context}"));
                None
            }
            Err(e) => {
                self.push("malformed word", format!("{e} in {context}"));
                None
            }
        }
    }
}

/// Structural checks on a parsed document; never fails, reports violations.
pub fn validate_document(doc: &TriangulationDoc) -> ValidationReport {
    let mut r = ValidationReport::default();
    if doc.dim < 2 {
        r.push("dimension", format!("dim {} < 2", doc.dim));
    }
    if doc.generators.is_empty() {
        r.push("presentation", "no generators".into());
    }
    let mut seen = HashSet::new();
    for g in &doc.generators {
        if g.is_empty() || !g.chars().all(|c| c.is_alphanumeric() || c == '_') {
            r.push("presentation", format!("bad generator name '{g}'"));
        }
        if !seen.insert(g) {
            r.push("presentation", format!("duplicate generator '{g}'"));
        }
    }
    let alphabet = Alphabet::new(doc.generators.clone());
    for (k, rel) in doc.relators.iter().enumerate() {
        if let Some(w) = r.word(&alphabet, rel, &format!("relator {k}")) {
            if !w.is_reduced() {
                r.push("unreduced relator", format!("relator {k} '{rel}'"));
            }
        }
    }
    let mut cusp_ids = HashSet::new();
    for c in &doc.cusps {
        if !cusp_ids.insert(c.id.as_str()) {
            r.push("duplicate cusp", c.id.clone());
        }
        for w in &c.peripheral {
            r.word(&alphabet, w, &format!("cusp '{}'", c.id));
        }
    }
    let mut vids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut cone_vertices: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, v) in doc.orbit_vertices.iter().enumerate() {
        if vids.insert(v.id.as_str(), i).is_some() {
            r.push("duplicate orbit vertex", v.id.clone());
        }
        if let VertexKind::IdealCusp(c) = &v.kind {
            if !cusp_ids.contains(c.as_str()) {
                r.push("unknown cusp", format!("orbit vertex '{}' references '{c}'", v.id));
            }
            *cone_vertices.entry(c.as_str()).or_default() += 1;
        }
    }
    for (c, k) in cone_vertices {
        if k > 1 {
            r.push("multiple cone vertices", format!("cusp '{c}' has {k} ideal orbit vertices"));
        }
    }
    for (si, s) in doc.simplices.iter().enumerate() {
        if s.slots.len() != doc.dim + 1 {
            r.push("slot count", format!("simplex {si} has {} slots, expected {}", s.slots.len(), doc.dim + 1));
        }
        if s.sign != 1 && s.sign != -1 {
            r.push("bad sign", format!("simplex {si} has sign {}", s.sign));
        }
        let mut slots = HashSet::new();
        for (v, w) in &s.slots {
            if !vids.contains_key(v.as_str()) {
                r.push("unknown orbit vertex", format!("'{v}' in simplex {si}"));
            }
            if let Some(w) = r.word(&alphabet, w, &format!("simplex {si}")) {
                if !slots.insert((v.clone(), w.reduce())) {
                    r.push("degenerate slot", format!("repeated slot ('{v}', '{}') in simplex {si}", alphabet.format(&w.reduce())));
                }
            }
        }
    }
    if let Some(g) = &doc.gluing {
        if doc.dim != 3 {
            r.push("gluing", "gluing data needs dim 3".into());
        }
        let width = 3 * g.tetrahedra;
        for row in g.edges.iter().chain(&g.meridians).chain(&g.longitudes) {
            if row.len() != width {
                r.push("gluing", format!("row of length {} (expected {width})", row.len()));
            }
        }
        if g.tetrahedra != doc.simplices.len() {
            r.push("gluing", format!("{} shapes for {} simplices", g.tetrahedra, doc.simplices.len()));
        }
        for name in &g.holonomy.generators {
            if !doc.generators.contains(name) {
                r.push("unknown generator", format!("'{name}' in holonomy recipe"));
            }
        }
    }
    r
}

/// Structural checks on an already built triangulation.
pub fn validate_triangulation(t: &LabeledTriangulation) -> ValidationReport {
    let mut r = validate_document(&t.to_doc());
    let rank = t.presentation.rank();
    for (si, s) in t.simplices.iter().enumerate() {
        for sl in &s.slots {
            if sl.vertex >= t.orbit_vertices.len() {
                r.push("unknown orbit vertex", format!("index {} in simplex {si}", sl.vertex));
            }
            if sl.word.max_generator().is_some_and(|g| g >= rank) {
                r.push("unknown generator", format!("letter out of range in simplex {si}"));
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn torus_doc() -> TriangulationDoc {
        serde_json::from_str(
            r#"{
            "dim": 2,
            "generators": ["a", "b"],
            "relators": [],
            "cusps": [{"id": "c", "peripheral": ["[a,b]"]}],
            "orbit_vertices": [{"id": "p", "kind": {"ideal_cusp": "c"}}],
            "simplices": [
                {"slots": [["p", ""], ["p", "a"], ["p", "a b"]], "sign": 1},
                {"slots": [["p", ""], ["p", "a b"], ["p", "a b A"]], "sign": 1}
            ]
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn torus_document_round_trips() {
        let doc = torus_doc();
        assert!(validate_document(&doc).is_valid());
        let t = LabeledTriangulation::from_doc(&doc).unwrap();
        assert_eq!(peripheral_words(&t, "c").unwrap(), &[Word(vec![1, 2, -1, -2])]);
        assert!(peripheral_words(&t, "d").is_err());
        assert_eq!(LabeledTriangulation::from_doc(&t.to_doc()).unwrap(), t);
        assert!(validate_triangulation(&t).is_valid());
    }

    #[test]
    fn violations_are_reported() {
        let mut doc = torus_doc();
        doc.simplices[0].slots[1].1 = "c".into();
        let r = validate_document(&doc);
        assert!(r.violations.iter().any(|v| v.kind == "unknown generator"));
        let mut doc = torus_doc();
        doc.simplices[0].slots[1] = ("p".into(), "a b B".into());
        doc.simplices[0].slots[2] = ("p".into(), "a".into());
        let r = validate_document(&doc);
        assert!(r.violations.iter().any(|v| v.kind == "degenerate slot"));
        let mut doc = torus_doc();
        doc.orbit_vertices[0].kind = VertexKind::IdealCusp("zz".into());
        assert!(validate_document(&doc).violations.iter().any(|v| v.kind == "unknown cusp"));
    }
}
