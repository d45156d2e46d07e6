//! Adaptive Klein-model cubature of the hyperbolic volume element
//! `dx / (1 - |x|^2)^{(n+1)/2}` over a straight Euclidean simplex.
//!
//! The simplex is cut along ideal-ideal edges until every piece has at most
//! one ideal vertex. Each piece is pulled back to the unit cube by the
//! collapsed (Duffy) map with the ideal vertex as apex; the substitution
//! `u1 = s^2` then turns the apex singularity into a smooth integrand.
//! Cells of the cube are refined adaptively with tensor Gauss-Legendre rules.

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

const HI: usize = 9;
const LO: usize = 7;

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(m, x);
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `(P_m(x), P_m'(x))`.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn rule(m: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static R9: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static R7: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match m {
        HI => R9.get_or_init(|| gauss_legendre(HI)),
        LO => R7.get_or_init(|| gauss_legendre(LO)),
        _ => unreachable!("only the two embedded orders are used"),
    }
}

/// Legendre polynomials P_7, P_8 at the HI nodes mapped to [-1, 1].
fn tail_basis() -> &'static [[f64; 2]] {
    static B: OnceLock<Vec<[f64; 2]>> = OnceLock::new();
    B.get_or_init(|| {
        rule(HI)
            .0
            .iter()
            .map(|u| {
                let x = 1.0 - 2.0 * u;
                [legendre(HI - 2, x).0, legendre(HI - 1, x).0]
            })
            .collect()
    })
}

/// Compensated (Neumaier) summation.
#[derive(Default, Clone, Copy)]
struct Acc {
    s: f64,
    c: f64,
}

impl Acc {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }
    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Axis-aligned box in the parameter cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// A piece of the simplex: barycentric weights of its vertices over the
/// original vertices, apex first.
#[derive(Debug, Clone, PartialEq)]
struct Piece {
    weights: Vec<Vec<f64>>,
    ideal_apex: bool,
    cells: Vec<Cell>,
}

/// Reusable subdivision: evaluating the same cells at nearby vertex
/// positions keeps the quadrature error a smooth function of the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct CubaturePlan {
    n: usize,
    pieces: Vec<Piece>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubatureResult {
    pub value: f64,
    pub error: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubatureFailure {
    pub estimate: f64,
    pub bound: f64,
}

/// Maximum number of integrand evaluations for one adaptive integration.
pub const EVAL_BUDGET: usize = 60_000_000;

fn split_pieces(weights: Vec<Vec<f64>>, ideal: Vec<bool>, out: &mut Vec<Piece>) {
    let m = weights.len();
    for i in 0..m {
        for j in (i + 1)..m {
            if ideal[i] && ideal[j] {
                let mid: Vec<f64> = weights[i].iter().zip(&weights[j]).map(|(a, b)| 0.5 * (a + b)).collect();
                for replace in [i, j] {
                    let mut w = weights.clone();
                    let mut id = ideal.clone();
                    w[replace] = mid.clone();
                    id[replace] = false;
                    split_pieces(w, id, out);
                }
                return;
            }
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    if let Some(k) = ideal.iter().position(|b| *b) {
        order.swap(0, k);
    }
    out.push(Piece {
        weights: order.iter().map(|&k| weights[k].clone()).collect(),
        ideal_apex: ideal.iter().any(|b| *b),
        cells: Vec::new(),
    });
}

/// Geometry of one piece at concrete vertex positions.
struct PieceMap {
    n: usize,
    apex: DVector<f64>,
    diffs: Vec<DVector<f64>>,
    jac: f64,
    ideal_apex: bool,
}

impl PieceMap {
    fn new(piece: &Piece, verts: &[DVector<f64>]) -> Self {
        let n = verts[0].len();
        let pts: Vec<DVector<f64>> = piece
            .weights
            .iter()
            .map(|w| {
                let mut p = DVector::zeros(n);
                for (c, v) in w.iter().zip(verts) {
                    if *c != 0.0 {
                        p += v * *c;
                    }
                }
                p
            })
            .collect();
        let mut apex = pts[0].clone();
        if piece.ideal_apex {
            apex /= apex.norm();
        }
        let diffs: Vec<DVector<f64>> = (1..=n).map(|k| &pts[k] - &pts[k - 1]).collect();
        let jac = DMatrix::from_columns(&diffs).determinant().abs();
        Self { n, apex, diffs, jac, ideal_apex: piece.ideal_apex }
    }

    /// Integrand at cube point `u`, including all Jacobian factors.
    #[inline]
    fn eval(&self, u: &[f64], w: &mut DVector<f64>) -> f64 {
        let n = self.n;
        w.copy_from(&self.diffs[n - 1]);
        for k in (0..n - 1).rev() {
            *w *= u[k + 1];
            *w += &self.diffs[k];
        }
        let mut pw = 1.0;
        for (k, uk) in u.iter().enumerate().skip(1) {
            pw *= uk.powi((n - 1 - k) as i32);
        }
        let expo = -0.5 * (n as f64 + 1.0);
        if self.ideal_apex {
            let s = u[0];
            let s2 = s * s;
            let q = -2.0 * self.apex.dot(w) - s2 * w.norm_squared();
            if q <= 0.0 {
                return 0.0;
            }
            self.jac * 2.0 * s.powi(n as i32 - 2) * pw * q.powf(expo)
        } else {
            let u1 = u[0];
            let mut r2 = 0.0;
            for i in 0..n {
                let xi = self.apex[i] + u1 * w[i];
                r2 += xi * xi;
            }
            let q = 1.0 - r2;
            if q <= 0.0 {
                return 0.0;
            }
            self.jac * u1.powi(n as i32 - 1) * pw * q.powf(expo)
        }
    }
}

/// Tensor rule of order `m` on `cell`. Returns the integral and, when
/// `marginals` is set, per-axis Legendre tail sizes of the sampled values.
fn tensor(map: &PieceMap, cell: &Cell, m: usize, mut marginals: Option<&mut Vec<f64>>) -> f64 {
    let n = map.n;
    let (nodes, weights) = rule(m);
    let vol: f64 = cell.lo.iter().zip(&cell.hi).map(|(a, b)| b - a).product();
    let mut idx = vec![0usize; n];
    let mut u = vec![0.0; n];
    let mut w = DVector::zeros(n);
    let mut acc = Acc::default();
    let mut marg = vec![vec![0.0; m]; n];
    loop {
        let mut wt = 1.0;
        for k in 0..n {
            u[k] = cell.lo[k] + (cell.hi[k] - cell.lo[k]) * nodes[idx[k]];
            wt *= weights[idx[k]];
        }
        let f = map.eval(&u, &mut w) * wt;
        acc.add(f);
        if marginals.is_some() {
            for k in 0..n {
                marg[k][idx[k]] += f / weights[idx[k]];
            }
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == n {
                if let Some(out) = marginals.as_deref_mut() {
                    out.clear();
                    let basis = tail_basis();
                    for mk in &marg {
                        let mut c7 = 0.0;
                        let mut c8 = 0.0;
                        for j in 0..m {
                            c7 += weights[j] * mk[j] * basis[j][0];
                            c8 += weights[j] * mk[j] * basis[j][1];
                        }
                        out.push(c7.abs() + c8.abs());
                    }
                }
                return acc.value() * vol;
            }
        }
    }
}

#[derive(Debug)]
struct Entry {
    err: f64,
    piece: usize,
    cell: Cell,
    value: f64,
    axis: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.err.total_cmp(&o.err).is_eq()
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

fn assess(map: &PieceMap, piece: usize, cell: Cell) -> Entry {
    let mut tails = Vec::new();
    let hi = tensor(map, &cell, HI, Some(&mut tails));
    let lo = tensor(map, &cell, LO, None);
    let mut axis = 0;
    for k in 1..tails.len() {
        let w = |a: usize| tails[a] * (cell.hi[a] - cell.lo[a]).sqrt();
        if w(k) > w(axis) {
            axis = k;
        }
    }
    Entry { err: (hi - lo).abs(), piece, cell, value: hi, axis }
}

/// Adaptive integration of the hyperbolic volume of the Klein simplex with
/// vertices `verts`; `ideal[k]` marks vertices on the unit sphere.
pub fn integrate(
    verts: &[DVector<f64>],
    ideal: &[bool],
    tol: f64,
) -> Result<(CubatureResult, CubaturePlan), CubatureFailure> {
    let n = verts[0].len();
    let m = verts.len();
    let identity: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut pieces = Vec::new();
    split_pieces(identity, ideal.to_vec(), &mut pieces);
    let maps: Vec<PieceMap> = pieces.iter().map(|p| PieceMap::new(p, verts)).collect();
    let per_cell = HI.pow(n as u32) + LO.pow(n as u32);
    let max_cells = (EVAL_BUDGET / per_cell).max(16);

    let mut heap = BinaryHeap::new();
    for (i, map) in maps.iter().enumerate() {
        heap.push(assess(map, i, Cell { lo: vec![0.0; n], hi: vec![1.0; n] }));
    }
    let mut cells = heap.len();
    loop {
        let (mut err, mut val) = (Acc::default(), Acc::default());
        for e in heap.iter() {
            err.add(e.err);
            val.add(e.value);
        }
        let (err, val) = (err.value(), val.value());
        if err <= tol {
            break;
        }
        if cells >= max_cells {
            return Err(CubatureFailure { estimate: val, bound: err });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let a = worst.axis;
        let mid = 0.5 * (worst.cell.lo[a] + worst.cell.hi[a]);
        let mut left = worst.cell.clone();
        left.hi[a] = mid;
        let mut right = worst.cell;
        right.lo[a] = mid;
        heap.push(assess(&maps[worst.piece], worst.piece, left));
        heap.push(assess(&maps[worst.piece], worst.piece, right));
        cells += 1;
    }
    let mut entries = heap.into_vec();
    // Deterministic order independent of heap layout.
    entries.sort_by(|a, b| {
        a.piece.cmp(&b.piece).then_with(|| {
            a.cell.lo.partial_cmp(&b.cell.lo).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let (mut err, mut val) = (Acc::default(), Acc::default());
    for e in &entries {
        err.add(e.err);
        val.add(e.value);
        pieces[e.piece].cells.push(e.cell.clone());
    }
    let result = CubatureResult { value: val.value(), error: err.value(), cells: entries.len() };
    Ok((result, CubaturePlan { n, pieces }))
}

impl CubaturePlan {
    /// Evaluate the high-order rule on the stored cells at new vertex positions.
    pub fn evaluate(&self, verts: &[DVector<f64>]) -> f64 {
        debug_assert_eq!(verts[0].len(), self.n);
        let mut acc = Acc::default();
        for p in &self.pieces {
            let map = PieceMap::new(p, verts);
            for c in &p.cells {
                acc.add(tensor(&map, c, HI, None));
            }
        }
        acc.value()
    }

    pub fn cell_count(&self) -> usize {
        self.pieces.iter().map(|p| p.cells.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for m in [LO, HI] {
            let (x, w) = gauss_legendre(m);
            for d in 0..(2 * m) {
                let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d as i32)).sum();
                assert!((s - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "m={m} d={d}");
            }
        }
    }

    #[test]
    fn small_triangle_is_nearly_euclidean() {
        let v = vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![1e-3, 0.0]),
            DVector::from_vec(vec![0.0, 1e-3]),
        ];
        let (r, _) = integrate(&v, &[false; 3], 1e-14).unwrap();
        assert!((r.value / 0.5e-6 - 1.0).abs() < 1e-5);
    }
}
