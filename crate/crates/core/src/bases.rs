//! Product, unentangled and twisted product bases.
//!
//! An unentangled basis is an orthonormal basis of product states. A twist
//! move rotates two of its elements inside a two-dimensional local subspace
//! `x ⊗ span{v, v'}`, where both elements share every factor except the one
//! at `site`. Bases reachable from a product basis by such moves are the
//! twisted product bases; [`twist_search`] certifies membership constructively.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{invalid, usage, Error, Result};
use crate::hilbert::tensor;
use crate::{ComplexVector, C64};

/// Overlap modulus above which two unit factors count as the same ray.
pub const SAME_RAY_TOL: f64 = 1e-10;
/// Pairwise orthogonality tolerance for unentangled bases.
pub const ORTHO_TOL: f64 = 1e-10;

/// `v_1 ⊗ ... ⊗ v_n`, stored factorwise with canonical phases.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    factors: Vec<ComplexVector>,
}

impl ProductState {
    pub fn new(factors: Vec<ComplexVector>) -> Result<Self> {
        if factors.is_empty() {
            return usage("product state needs at least one factor");
        }
        for (i, f) in factors.iter().enumerate() {
            if (f.norm() - 1.0).abs() > 1e-10 {
                return invalid(format!("factor {i} has norm {} (expected 1)", f.norm()));
            }
        }
        Ok(Self { factors: factors.iter().map(ComplexVector::canonical_phase).collect() })
    }

    pub fn computational(dims: &[usize], digits: &[usize]) -> Self {
        Self { factors: dims.iter().zip(digits).map(|(&d, &k)| ComplexVector::basis(d, k)).collect() }
    }

    pub fn factors(&self) -> &[ComplexVector] {
        &self.factors
    }

    pub fn factor(&self, site: usize) -> &ComplexVector {
        &self.factors[site]
    }

    pub fn sites(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(ComplexVector::dim).collect()
    }

    /// The full vector in `C^D`; avoid for large `D`.
    pub fn vector(&self) -> ComplexVector {
        tensor(&self.factors).expect("nonempty")
    }

    /// `<self|other>` computed factorwise.
    pub fn overlap(&self, other: &Self) -> C64 {
        self.factors.iter().zip(&other.factors).fold(Complex::new(1.0, 0.0), |acc, (a, b)| acc * a.inner(b))
    }

    pub fn with_factor(&self, site: usize, v: ComplexVector) -> Self {
        let mut factors = self.factors.clone();
        factors[site] = v.canonical_phase();
        Self { factors }
    }

    /// Sites on which the two states are different rays.
    pub fn differing_sites(&self, other: &Self) -> Vec<usize> {
        (0..self.factors.len())
            .filter(|&s| self.factors[s].inner(&other.factors[s]).norm() < 1.0 - SAME_RAY_TOL)
            .collect()
    }

    /// Bit pattern of the canonical factors; equal keys mean bit-identical states.
    pub fn key(&self) -> Vec<u64> {
        let bits = |x: f64| if x == 0.0 { 0u64 } else { x.to_bits() };
        let mut key = Vec::new();
        for f in &self.factors {
            key.push(f.dim() as u64);
            for z in f.entries() {
                key.push(bits(z.re));
                key.push(bits(z.im));
            }
        }
        key
    }
}

/// A product basis `{v_{j_1,1} ⊗ ... ⊗ v_{j_n,n}}` given by its local bases.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductBasis {
    local_bases: Vec<Vec<ComplexVector>>,
}

impl ProductBasis {
    pub fn new(local_bases: Vec<Vec<ComplexVector>>) -> Result<Self> {
        if local_bases.is_empty() {
            return usage("product basis needs at least one site");
        }
        for (site, basis) in local_bases.iter().enumerate() {
            let Some(first) = basis.first() else {
                return invalid(format!("site {site} has an empty local basis"));
            };
            let d = first.dim();
            if basis.len() != d || basis.iter().any(|v| v.dim() != d) {
                return invalid(format!("site {site}: local basis must have {d} vectors of dimension {d}"));
            }
            for (i, u) in basis.iter().enumerate() {
                for (j, v) in basis.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    if (u.inner(v) - Complex::new(want, 0.0)).norm() > 1e-10 {
                        return invalid(format!("site {site}: Gram matrix entry ({i},{j}) off identity"));
                    }
                }
            }
        }
        Ok(Self { local_bases: local_bases.into_iter().map(|b| b.iter().map(ComplexVector::canonical_phase).collect()).collect() })
    }

    pub fn computational(dims: &[usize]) -> Self {
        Self { local_bases: dims.iter().map(|&d| (0..d).map(|k| ComplexVector::basis(d, k)).collect()).collect() }
    }

    pub fn local_bases(&self) -> &[Vec<ComplexVector>] {
        &self.local_bases
    }

    pub fn dims(&self) -> Vec<usize> {
        self.local_bases.iter().map(Vec::len).collect()
    }

    /// Elements in lexicographic order of local indices.
    pub fn elements(&self) -> Vec<ProductState> {
        let dims = self.dims();
        let total: usize = dims.iter().product();
        (0..total)
            .map(|idx| {
                let digits = crate::hilbert::digits(idx, &dims);
                ProductState {
                    factors: digits.iter().enumerate().map(|(s, &k)| self.local_bases[s][k].clone()).collect(),
                }
            })
            .collect()
    }

    pub fn to_unentangled(&self) -> UnentangledBasis {
        UnentangledBasis { dims: self.dims(), elements: self.elements() }
    }
}

/// An ordered family of product states claimed to be an orthonormal basis.
///
/// Construction only checks shapes; use [`validate_unentangled`] to check
/// orthonormality and completeness.
#[derive(Clone, Debug, PartialEq)]
pub struct UnentangledBasis {
    dims: Vec<usize>,
    elements: Vec<ProductState>,
}

impl UnentangledBasis {
    pub fn new(dims: Vec<usize>, elements: Vec<ProductState>) -> Result<Self> {
        if dims.is_empty() {
            return usage("basis needs at least one site");
        }
        if let Some(e) = elements.iter().find(|e| e.dims() != dims) {
            return Err(Error::DimensionMismatch { expected: dims.clone(), got: e.dims() });
        }
        Ok(Self { dims, elements })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn elements(&self) -> &[ProductState] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// `Σ_b <b|t|b>` over the basis elements.
    pub fn trace_of(&self, t: &crate::HermitianOperator) -> f64 {
        self.elements.iter().map(|e| t.expectation(&e.vector())).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub cardinality: usize,
    pub expected_cardinality: usize,
    pub normalized: bool,
    pub orthonormal: bool,
    pub complete: bool,
    /// Largest `|<a|b>|` over distinct pairs, computed factorwise.
    pub worst_overlap: f64,
    pub worst_pair: Option<(usize, usize)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.normalized && self.orthonormal && self.complete
    }
}

/// Orthonormality (factorwise), completeness and worst pairwise overlap.
pub fn validate_unentangled(b: &UnentangledBasis) -> ValidationReport {
    validate_with_tol(b, ORTHO_TOL)
}

pub fn validate_with_tol(b: &UnentangledBasis, tol: f64) -> ValidationReport {
    let els = &b.elements;
    let normalized = els.iter().all(|e| e.factors.iter().all(|f| (f.norm() - 1.0).abs() <= tol));
    let (worst_overlap, worst_pair) = (0..els.len())
        .into_par_iter()
        .map(|i| {
            let mut best = (0.0f64, None);
            for j in i + 1..els.len() {
                let ov = els[i].overlap(&els[j]).norm();
                if ov > best.0 || best.1.is_none() {
                    best = (ov, Some((i, j)));
                }
            }
            best
        })
        .reduce(|| (0.0, None), |a, b| pick_worse(a, b));
    let expected = b.total_dim();
    ValidationReport {
        cardinality: els.len(),
        expected_cardinality: expected,
        normalized,
        orthonormal: worst_overlap <= tol,
        complete: els.len() == expected,
        worst_overlap,
        worst_pair,
    }
}

fn pick_worse(a: (f64, Option<(usize, usize)>), b: (f64, Option<(usize, usize)>)) -> (f64, Option<(usize, usize)>) {
    match (a.1, b.1) {
        (None, _) => b,
        (_, None) => a,
        (Some(pa), Some(pb)) => {
            if b.0 > a.0 || (b.0 == a.0 && pb < pa) {
                b
            } else {
                a
            }
        }
    }
}

/// A local unitary acting on `x ⊗ span{v_i, v_j}` at `site`.
///
/// The rotation maps `(v_i, v_j)` to `(U00 v_i + U10 v_j, U01 v_i + U11 v_j)`,
/// i.e. the columns of `U` hold the new vectors in the old pair's coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistMove {
    pub site: usize,
    pub pair: (usize, usize),
    pub rotation: [[C64; 2]; 2],
}

impl TwistMove {
    pub fn hadamard(site: usize, pair: (usize, usize)) -> Self {
        let s = Complex::new(0.5f64.sqrt(), 0.0);
        Self { site, pair, rotation: [[s, s], [s, -s]] }
    }

    pub fn identity(site: usize, pair: (usize, usize)) -> Self {
        let (o, z) = (Complex::new(1.0, 0.0), Complex::new(0.0, 0.0));
        Self { site, pair, rotation: [[o, z], [z, o]] }
    }

    pub fn unitarity_defect(&self) -> f64 {
        let u = &self.rotation;
        let mut worst = 0.0f64;
        for a in 0..2 {
            for b in 0..2 {
                let g = u[0][a].conj() * u[0][b] + u[1][a].conj() * u[1][b];
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - Complex::new(want, 0.0)).norm());
            }
        }
        worst
    }
}

/// A pair of elements that agree everywhere except at `site`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LocalPair {
    pub site: usize,
    pub pair: (usize, usize),
}

/// Every pair of states differing (as rays) on exactly one site, sorted by
/// site and then by element indices.
pub fn find_local_pairs(states: &[ProductState]) -> Vec<LocalPair> {
    let mut out: Vec<LocalPair> = (0..states.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut found = Vec::new();
            for j in i + 1..states.len() {
                let mut differing = None;
                let mut count = 0;
                for s in 0..states[i].factors.len() {
                    if states[i].factors[s].inner(&states[j].factors[s]).norm() < 1.0 - SAME_RAY_TOL {
                        count += 1;
                        differing = Some(s);
                        if count > 1 {
                            break;
                        }
                    }
                }
                if count == 1 {
                    found.push(LocalPair { site: differing.unwrap(), pair: (i, j) });
                }
            }
            found
        })
        .collect();
    out.sort();
    out
}

/// Local factors of a locally matched pair, with the phase of the shared
/// factors folded into the second vector so that
/// `element_i = x ⊗ v` and `element_j = x ⊗ w` exactly.
fn local_pair_vectors(b: &UnentangledBasis, site: usize, (i, j): (usize, usize)) -> Result<(ComplexVector, ComplexVector)> {
    let n = b.elements.len();
    if i >= n || j >= n || i == j {
        return usage(format!("pair ({i},{j}) invalid for a basis of {n} elements"));
    }
    if site >= b.dims.len() {
        return usage(format!("site {site} out of range"));
    }
    let (ei, ej) = (&b.elements[i], &b.elements[j]);
    let mut phase = Complex::new(1.0, 0.0);
    for s in 0..b.dims.len() {
        if s == site {
            continue;
        }
        let ov = ei.factors[s].inner(&ej.factors[s]);
        if ov.norm() < 1.0 - SAME_RAY_TOL {
            return Err(Error::Precondition(format!("elements {i} and {j} differ on site {s}, not only on site {site}")));
        }
        phase *= ov / ov.norm();
    }
    Ok((ei.factors[site].clone(), ej.factors[site].scale(phase)))
}

/// Applies one twist move, returning the new basis.
pub fn apply_twist(b: &UnentangledBasis, m: &TwistMove) -> Result<UnentangledBasis> {
    if m.unitarity_defect() > 1e-10 {
        return Err(Error::Precondition(format!("rotation is not unitary (defect {:e})", m.unitarity_defect())));
    }
    let (i, j) = m.pair;
    let (v, w) = local_pair_vectors(b, m.site, m.pair)?;
    let u = &m.rotation;
    let new_i = v.scale(u[0][0]).add(&w.scale(u[1][0]));
    let new_j = v.scale(u[0][1]).add(&w.scale(u[1][1]));
    let mut elements = b.elements.clone();
    let shared = b.elements[i].clone();
    elements[i] = shared.with_factor(m.site, new_i);
    elements[j] = shared.with_factor(m.site, new_j);
    Ok(UnentangledBasis { dims: b.dims.clone(), elements })
}

/// A constructive witness that `initial` is a twisted product basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TwistCertificate {
    pub moves: Vec<TwistMove>,
    pub initial: UnentangledBasis,
    pub final_basis: ProductBasis,
}

impl TwistCertificate {
    /// Every basis along the move sequence, starting with `initial`.
    pub fn replay(&self) -> Result<Vec<UnentangledBasis>> {
        let mut out = vec![self.initial.clone()];
        for m in &self.moves {
            let next = apply_twist(out.last().unwrap(), m)?;
            out.push(next);
        }
        Ok(out)
    }

    /// Largest deviation `1 - |<a|b>|` when matching the replayed basis
    /// one-to-one against the final product basis.
    pub fn replay_error(&self) -> Result<f64> {
        let end = self.replay()?.pop().unwrap();
        let target = self.final_basis.elements();
        if end.len() != target.len() {
            return Ok(1.0);
        }
        let mut used = vec![false; target.len()];
        let mut worst = 0.0f64;
        for e in end.elements() {
            let best = target
                .iter()
                .enumerate()
                .filter(|(k, _)| !used[*k])
                .map(|(k, t)| (k, e.overlap(t).norm()))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((k, ov)) => {
                    used[k] = true;
                    worst = worst.max(1.0 - ov);
                }
                None => return Ok(1.0),
            }
        }
        Ok(worst)
    }

    pub fn verify(&self) -> Result<bool> {
        Ok(self.replay_error()? <= 1e-8)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExhaustionReport {
    pub moves_applied: Vec<TwistMove>,
    pub aligned: usize,
    pub total: usize,
    pub local_pairs_available: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TwistOutcome {
    Certified(TwistCertificate),
    Exhausted(ExhaustionReport),
}

/// Candidate local frame per site: factors ranked by how many elements use
/// them, taken greedily while orthogonal, completed with computational vectors.
fn candidate_frame(b: &UnentangledBasis) -> Vec<Vec<ComplexVector>> {
    b.dims
        .iter()
        .enumerate()
        .map(|(site, &d)| {
            let mut groups: Vec<(ComplexVector, usize, usize)> = Vec::new();
            for (idx, e) in b.elements.iter().enumerate() {
                let f = &e.factors[site];
                match groups.iter_mut().find(|(g, _, _)| g.inner(f).norm() >= 1.0 - SAME_RAY_TOL) {
                    Some(g) => g.1 += 1,
                    None => groups.push((f.clone(), 1, idx)),
                }
            }
            groups.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
            let mut frame: Vec<ComplexVector> = Vec::with_capacity(d);
            for (g, _, _) in groups {
                if frame.len() == d {
                    break;
                }
                if frame.iter().all(|f| f.inner(&g).norm() <= ORTHO_TOL) {
                    frame.push(g);
                }
            }
            for k in 0..d {
                if frame.len() == d {
                    break;
                }
                let mut v = ComplexVector::basis(d, k);
                for f in &frame {
                    let ov = f.inner(&v);
                    v = v.add(&f.scale(-ov));
                }
                if v.norm() > 1e-6 {
                    frame.push(v.normalized().unwrap().canonical_phase());
                }
            }
            // order by dominant computational component
            frame.sort_by_key(|f| {
                f.entries().iter().enumerate().fold((0, 0.0f64), |best, (k, z)| if z.norm() > best.1 + 1e-12 { (k, z.norm()) } else { best }).0
            });
            frame
        })
        .collect()
}

fn frame_index(frame: &[ComplexVector], v: &ComplexVector) -> Option<usize> {
    frame.iter().position(|f| f.inner(v).norm() >= 1.0 - SAME_RAY_TOL)
}

fn is_aligned(frame: &[Vec<ComplexVector>], e: &ProductState) -> bool {
    e.factors.iter().enumerate().all(|(s, f)| frame_index(&frame[s], f).is_some())
}

/// Greedy search for a move sequence turning `b` into a product basis.
///
/// Each step applies the move that most increases the number of elements
/// aligned with the candidate product frame (ties: lowest site, then lowest
/// element indices). Exhaustion is not a proof that `b` is untwistable.
pub fn twist_search(b: &UnentangledBasis, budget: usize) -> Result<TwistOutcome> {
    let report = validate_unentangled(b);
    if !report.is_valid() {
        return Err(Error::Precondition(format!(
            "input is not a valid unentangled basis (worst overlap {:e}, {} of {} elements)",
            report.worst_overlap, report.cardinality, report.expected_cardinality
        )));
    }
    let frame = candidate_frame(b);
    let mut current = b.clone();
    let mut moves = Vec::new();
    loop {
        let aligned = current.elements.iter().filter(|e| is_aligned(&frame, e)).count();
        if aligned == current.len() {
            let final_basis = ProductBasis::new(frame.clone())?;
            return Ok(TwistOutcome::Certified(TwistCertificate { moves, initial: b.clone(), final_basis }));
        }
        let pairs = find_local_pairs(&current.elements);
        if moves.len() >= budget {
            return Ok(TwistOutcome::Exhausted(ExhaustionReport {
                moves_applied: moves,
                aligned,
                total: current.len(),
                local_pairs_available: pairs.len(),
                reason: "move budget exhausted".into(),
            }));
        }
        let mut best: Option<(isize, TwistMove)> = None;
        for lp in &pairs {
            let (i, j) = lp.pair;
            let (v, w) = local_pair_vectors(&current, lp.site, lp.pair)?;
            let site_frame = &frame[lp.site];
            if frame_index(site_frame, &v).is_some() && frame_index(site_frame, &w).is_some() {
                continue;
            }
            let inside: Vec<&ComplexVector> = site_frame
                .iter()
                .filter(|f| v.inner(f).norm_sqr() + w.inner(f).norm_sqr() >= 1.0 - SAME_RAY_TOL)
                .take(2)
                .collect();
            if inside.len() < 2 {
                continue;
            }
            let before = is_aligned(&frame, &current.elements[i]) as isize + is_aligned(&frame, &current.elements[j]) as isize;
            let rest_aligned = current.elements[i]
                .factors
                .iter()
                .enumerate()
                .all(|(s, f)| s == lp.site || frame_index(&frame[s], f).is_some());
            let after = if rest_aligned { 2 } else { 0 };
            let gain = after - before;
            if gain <= 0 {
                continue;
            }
            let (fa, fb) = (inside[0], inside[1]);
            let rotation = [[v.inner(fa), v.inner(fb)], [w.inner(fa), w.inner(fb)]];
            let m = TwistMove { site: lp.site, pair: lp.pair, rotation };
            if best.as_ref().map_or(true, |(g, _)| gain > *g) {
                best = Some((gain, m));
            }
        }
        match best {
            Some((_, m)) => {
                current = apply_twist(&current, &m)?;
                moves.push(m);
            }
            None => {
                return Ok(TwistOutcome::Exhausted(ExhaustionReport {
                    moves_applied: moves,
                    aligned,
                    total: current.len(),
                    local_pairs_available: pairs.len(),
                    reason: if pairs.is_empty() {
                        "no locally matched pairs: no twist move applies".into()
                    } else {
                        "no move increases alignment with the candidate product frame".into()
                    },
                }));
            }
        }
    }
}

/// The nine-element unentangled basis of `C^3 ⊗ C^3` that the worked
/// example untwists in four Hadamard moves.
///
/// Element order (`|x±y> = (|x> ± |y>)/√2`):
/// `|0>|0+1>, |0>|0-1>, |0+1>|2>, |1+2>|0>, |1>|1>, |0-1>|2>, |1-2>|0>, |2>|1+2>, |2>|1-2>`.
pub fn twisted_qutrit_basis() -> UnentangledBasis {
    let k = |i: usize| ComplexVector::basis(3, i);
    let s = 0.5f64.sqrt();
    let plus = |a: usize, b: usize| k(a).add(&k(b)).scale(Complex::new(s, 0.0));
    let minus = |a: usize, b: usize| k(a).add(&k(b).scale(Complex::new(-1.0, 0.0))).scale(Complex::new(s, 0.0));
    let ps = |a: ComplexVector, b: ComplexVector| ProductState::new(vec![a, b]).expect("unit factors");
    let elements = vec![
        ps(k(0), plus(0, 1)),
        ps(k(0), minus(0, 1)),
        ps(plus(0, 1), k(2)),
        ps(plus(1, 2), k(0)),
        ps(k(1), k(1)),
        ps(minus(0, 1), k(2)),
        ps(minus(1, 2), k(0)),
        ps(k(2), plus(1, 2)),
        ps(k(2), minus(1, 2)),
    ];
    UnentangledBasis { dims: vec![3, 3], elements }
}

/// The shipped certificate for [`twisted_qutrit_basis`]: first `(|2>|1±2>) → (|2>|1>, |2>|2>)`,
/// then the `|0>|0±1>`, `|0±1>|2>` and `|1±2>|0>` blocks.
pub fn twisted_qutrit_certificate() -> TwistCertificate {
    TwistCertificate {
        moves: vec![
            TwistMove::hadamard(1, (7, 8)),
            TwistMove::hadamard(1, (0, 1)),
            TwistMove::hadamard(0, (2, 5)),
            TwistMove::hadamard(0, (3, 6)),
        ],
        initial: twisted_qutrit_basis(),
        final_basis: ProductBasis::computational(&[3, 3]),
    }
}
