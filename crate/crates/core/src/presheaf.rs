//! Finite families of measurement contexts and the sections over them.
//!
//! A context is a projective measurement on one site; coarse-graining merges
//! outcomes. Product contexts are ordered componentwise and a section assigns
//! a joint distribution to each, which must agree under every coarse-graining.
//! Edges that coarsen one site to the trivial context compare marginals across
//! remote measurement choices, i.e. they encode no-signalling.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bases::ProductState;
use crate::error::{invalid, usage, Error, Result};
use crate::framefn::{evaluate, FrameFunction};
use crate::random::{orthonormal_basis, rng_from_seed};
use crate::wire::OperatorJson;
use crate::{ComplexVector, HermitianOperator, Matrix};

pub const PVM_TOL: f64 = 1e-10;
pub const NORMALIZATION_TOL: f64 = 1e-10;
pub const ENTRY_TOL: f64 = 1e-12;

/// Outcome-pair distribution, `p[A][B]`.
pub type Distribution = Vec<Vec<f64>>;

/// A projective measurement on one site.
#[derive(Clone, Debug)]
pub struct Context {
    label: String,
    projectors: Vec<HermitianOperator>,
    /// Measurement vectors when every projector has rank one.
    vectors: Option<Vec<ComplexVector>>,
}

impl Context {
    pub fn new(label: impl Into<String>, projectors: Vec<HermitianOperator>) -> Result<Self> {
        let label = label.into();
        let Some(first) = projectors.first() else { return usage(format!("context {label} has no projectors")) };
        let d = first.dim();
        let mut total = Matrix::zeros(d, d);
        for (i, p) in projectors.iter().enumerate() {
            if p.dim() != d {
                return Err(Error::DimensionMismatch { expected: vec![d], got: vec![p.dim()] });
            }
            for q in &projectors[i + 1..] {
                let defect = p.matrix().matmul(q.matrix()).frobenius_norm();
                if defect > PVM_TOL {
                    return invalid(format!("context {label}: projectors overlap (defect {defect:e})"));
                }
            }
            total = total.add(p.matrix());
        }
        let defect = total.max_abs_diff(&Matrix::identity(d));
        if defect > PVM_TOL {
            return invalid(format!("context {label}: projectors do not sum to the identity (defect {defect:e})"));
        }
        Ok(Self { label, projectors, vectors: None })
    }

    /// Rank-one context from an orthonormal basis.
    pub fn from_basis(label: impl Into<String>, basis: &[ComplexVector]) -> Result<Self> {
        let d = basis.first().map_or(0, ComplexVector::dim);
        if basis.len() != d {
            return usage("a basis context needs exactly one vector per dimension");
        }
        let vectors: Vec<ComplexVector> = basis.iter().map(ComplexVector::canonical_phase).collect();
        let projectors = vectors.iter().map(|v| HermitianOperator::projector(vec![d], v)).collect::<Result<_>>()?;
        let mut c = Self::new(label, projectors)?;
        c.vectors = Some(vectors);
        Ok(c)
    }

    /// The one-outcome context `{I}`.
    pub fn trivial(d: usize) -> Self {
        Self { label: "1".into(), projectors: vec![HermitianOperator::identity(vec![d])], vectors: None }
    }

    /// Merges outcomes: fine outcome `i` goes to coarse outcome `map[i]`.
    pub fn coarsen(&self, label: impl Into<String>, map: &[usize]) -> Result<Self> {
        let groups = check_partition(map, self.projectors.len())?;
        let d = self.dim();
        let projectors = (0..groups)
            .map(|g| {
                let m = map
                    .iter()
                    .zip(&self.projectors)
                    .filter(|(&k, _)| k == g)
                    .fold(Matrix::zeros(d, d), |acc, (_, p)| acc.add(p.matrix()));
                HermitianOperator::new(vec![d], m)
            })
            .collect::<Result<_>>()?;
        Self::new(label, projectors)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn projectors(&self) -> &[HermitianOperator] {
        &self.projectors
    }

    pub fn vectors(&self) -> Option<&[ComplexVector]> {
        self.vectors.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    pub fn outcomes(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.projectors.len() == 1
    }
}

/// Number of groups in a surjective map onto `0..groups`; errors otherwise.
fn check_partition(map: &[usize], fine: usize) -> Result<usize> {
    if map.len() != fine {
        return invalid(format!("aggregation map has {} entries for {fine} outcomes", map.len()));
    }
    let groups = map.iter().max().map_or(0, |m| m + 1);
    let mut hit = vec![false; groups];
    for &g in map {
        hit[g] = true;
    }
    if hit.iter().any(|h| !h) {
        return invalid("aggregation map is not onto its coarse outcomes");
    }
    Ok(groups)
}

#[derive(Clone, Debug)]
pub struct ProductContext {
    pub left: Context,
    pub right: Context,
}

impl ProductContext {
    pub fn new(left: Context, right: Context) -> Self {
        Self { left, right }
    }

    pub fn key(&self) -> String {
        format!("{}|{}", self.left.label, self.right.label)
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.left.outcomes(), self.right.outcomes()]
    }
}

/// `coarse ≤ fine`, with the outcome map per site.
#[derive(Clone, Debug)]
pub struct RefinementEdge {
    coarse: ProductContext,
    fine: ProductContext,
    aggregation: [Vec<usize>; 2],
}

impl RefinementEdge {
    /// Checks that every coarse projector is the sum of the fine projectors
    /// mapped to it.
    pub fn new(coarse: ProductContext, fine: ProductContext, aggregation: [Vec<usize>; 2]) -> Result<Self> {
        for (site, (c, f)) in [(&coarse.left, &fine.left), (&coarse.right, &fine.right)].into_iter().enumerate() {
            let groups = check_partition(&aggregation[site], f.outcomes())?;
            if groups != c.outcomes() {
                return invalid(format!("site {site}: map has {groups} coarse outcomes, context {} has {}", c.label, c.outcomes()));
            }
            let rebuilt = f.coarsen(c.label.clone(), &aggregation[site])?;
            for (p, q) in rebuilt.projectors.iter().zip(&c.projectors) {
                let defect = p.matrix().max_abs_diff(q.matrix());
                if defect > PVM_TOL {
                    return invalid(format!(
                        "site {site}: {} is not a coarse-graining of {} (defect {defect:e})",
                        c.label, f.label
                    ));
                }
            }
        }
        Ok(Self { coarse, fine, aggregation })
    }

    pub fn coarse(&self) -> &ProductContext {
        &self.coarse
    }

    pub fn fine(&self) -> &ProductContext {
        &self.fine
    }

    pub fn aggregation(&self) -> &[Vec<usize>; 2] {
        &self.aggregation
    }

    /// Site coarsened to the trivial context while the other is kept, if any:
    /// such an edge compares marginals across remote measurement choices.
    pub fn traced_site(&self) -> Option<usize> {
        let left = self.coarse.left.is_trivial() && !self.fine.left.is_trivial();
        let right = self.coarse.right.is_trivial() && !self.fine.right.is_trivial();
        match (left, right) {
            (true, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        }
    }

    pub fn to_json(&self) -> EdgeJson {
        EdgeJson {
            coarse: [self.coarse.left.label.clone(), self.coarse.right.label.clone()],
            fine: [self.fine.left.label.clone(), self.fine.right.label.clone()],
            aggregation: self.aggregation.clone(),
        }
    }
}

/// Sums fine outcomes into coarse ones along `e`.
pub fn restrict(d: &Distribution, e: &RefinementEdge) -> Result<Distribution> {
    restrict_with(d, &e.aggregation)
}

fn restrict_with(d: &Distribution, aggregation: &[Vec<usize>; 2]) -> Result<Distribution> {
    let rows = check_partition(&aggregation[0], d.len())?;
    let cols = check_partition(&aggregation[1], d.first().map_or(0, Vec::len))?;
    if d.iter().any(|r| r.len() != aggregation[1].len()) {
        return invalid("distribution rows have unequal lengths");
    }
    let mut out = vec![vec![0.0; cols]; rows];
    for (a, row) in d.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            out[aggregation[0][a]][aggregation[1][b]] += p;
        }
    }
    Ok(out)
}

/// One distribution per product context, keyed by `left|right` labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SectionTable {
    entries: BTreeMap<String, Distribution>,
}

impl SectionTable {
    pub fn new(entries: BTreeMap<String, Distribution>) -> Result<Self> {
        for (key, d) in &entries {
            if d.iter().flatten().any(|&p| !p.is_finite() || p < -ENTRY_TOL) {
                return invalid(format!("context {key}: negative or non-finite entry"));
            }
            let total: f64 = d.iter().flatten().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return invalid(format!("context {key}: distribution sums to {total}"));
            }
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&Distribution> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> &BTreeMap<String, Distribution> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> SectionJson {
        SectionJson { distributions: self.entries.clone() }
    }

    pub fn from_json(j: &SectionJson) -> Result<Self> {
        Self::new(j.distributions.clone())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SectionJson {
    pub distributions: BTreeMap<String, Distribution>,
}

fn product_value(t: &HermitianOperator, f: &FrameFunction, c: &ProductContext, a: usize, b: usize) -> Result<f64> {
    if let (Some(v), Some(w)) = (c.left.vectors(), c.right.vectors()) {
        return evaluate(f, &ProductState::new(vec![v[a].clone(), w[b].clone()])?);
    }
    let e = c.left.projectors[a].matrix().kron(c.right.projectors[b].matrix());
    Ok(t.matrix().matmul(&e).trace().re)
}

/// `P(A,B) = tr(t (p_A ⊗ q_B))` on every product context.
pub fn section_from_operator(t: &HermitianOperator, family: &[ProductContext]) -> Result<SectionTable> {
    if t.dims().len() != 2 {
        return usage("sections are defined for two sites");
    }
    let f = FrameFunction::from_operator(t.clone());
    let rows = family
        .par_iter()
        .map(|c| {
            let dims = [c.left.dim(), c.right.dim()];
            if dims != t.dims() {
                return Err(Error::DimensionMismatch { expected: t.dims().to_vec(), got: dims.to_vec() });
            }
            let [na, nb] = c.shape();
            let mut d = vec![vec![0.0; nb]; na];
            for (a, row) in d.iter_mut().enumerate() {
                for (b, p) in row.iter_mut().enumerate() {
                    *p = product_value(t, &f, c, a, b)?;
                    if *p < -ENTRY_TOL {
                        return invalid(format!("operator is negative ({p:e}) on a product of projectors in {}", c.key()));
                    }
                }
            }
            Ok((c.key(), d))
        })
        .collect::<Result<Vec<_>>>()?;
    SectionTable::new(rows.into_iter().collect())
}

/// Tabulates a frame function: rank-one contexts take `f(v_A ⊗ w_B)`;
/// every other context takes the restriction of the first rank-one context
/// that an edge connects to it, falling back to already filled contexts.
pub fn section_from_framefn(f: &FrameFunction, family: &[ProductContext], edges: &[RefinementEdge]) -> Result<SectionTable> {
    let mut entries = BTreeMap::new();
    for c in family {
        let (Some(v), Some(w)) = (c.left.vectors(), c.right.vectors()) else { continue };
        let mut d = Vec::with_capacity(v.len());
        for va in v {
            let row = w
                .iter()
                .map(|wb| evaluate(f, &ProductState::new(vec![va.clone(), wb.clone()])?))
                .collect::<Result<Vec<_>>>()?;
            d.push(row);
        }
        entries.insert(c.key(), d);
    }
    // Rank-one sources first, then whatever has been filled so far.
    let mut pending: Vec<String> = family.iter().map(ProductContext::key).filter(|k| !entries.contains_key(k)).collect();
    let mut rank_one_only = true;
    while !pending.is_empty() {
        let before = pending.len();
        let mut rest = Vec::new();
        for key in pending {
            let source = edges.iter().find(|e| {
                e.coarse.key() == key
                    && entries.contains_key(&e.fine.key())
                    && (!rank_one_only || (e.fine.left.vectors().is_some() && e.fine.right.vectors().is_some()))
            });
            match source {
                Some(e) => {
                    let d = restrict(&entries[&e.fine.key()], e)?;
                    entries.insert(key, d);
                }
                None => rest.push(key),
            }
        }
        if rest.len() == before {
            if !rank_one_only {
                return usage(format!("context {} is not reachable from a rank-one context", rest[0]));
            }
            rank_one_only = false;
        } else {
            rank_one_only = true;
        }
        pending = rest;
    }
    SectionTable::new(entries)
}

#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    /// Largest total-variation distance between a restricted fine
    /// distribution and the stored coarse one.
    pub max_distance: f64,
    pub worst_edge: Option<EdgeJson>,
    /// Whether the worst edge coarsens one site to the trivial context.
    pub worst_traced_site: Option<usize>,
    pub edges: usize,
}

impl ConsistencyReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_distance <= tol
    }

    pub fn to_json(&self) -> Value {
        json!({
            "max_distance": self.max_distance,
            "edges": self.edges,
            "worst_edge": self.worst_edge,
            "worst_edge_traced_site": self.worst_traced_site,
        })
    }
}

fn total_variation(p: &Distribution, q: &Distribution) -> f64 {
    0.5 * p.iter().flatten().zip(q.iter().flatten()).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn check_section(s: &SectionTable, edges: &[RefinementEdge]) -> Result<ConsistencyReport> {
    let distances = edges
        .par_iter()
        .map(|e| {
            let (ck, fk) = (e.coarse.key(), e.fine.key());
            let fine = s.get(&fk).ok_or_else(|| Error::Usage(format!("section has no entry for {fk}")))?;
            let coarse = s.get(&ck).ok_or_else(|| Error::Usage(format!("section has no entry for {ck}")))?;
            let restricted = restrict(fine, e)?;
            if restricted.len() != coarse.len() || restricted.iter().zip(coarse).any(|(a, b)| a.len() != b.len()) {
                return invalid(format!("entry for {ck} does not match the edge's coarse shape"));
            }
            Ok(total_variation(&restricted, coarse))
        })
        .collect::<Result<Vec<f64>>>()?;
    let worst = distances.iter().enumerate().fold(None, |best: Option<(usize, f64)>, (i, &d)| match best {
        Some((_, b)) if b >= d => best,
        _ => Some((i, d)),
    });
    Ok(ConsistencyReport {
        max_distance: worst.map_or(0.0, |(_, d)| d),
        worst_edge: worst.map(|(i, _)| edges[i].to_json()),
        worst_traced_site: worst.and_then(|(i, _)| edges[i].traced_site()),
        edges: edges.len(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EdgeJson {
    pub coarse: [String; 2],
    pub fine: [String; 2],
    pub aggregation: [Vec<usize>; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContextJson {
    pub label: String,
    pub site: usize,
    pub projectors: Vec<OperatorJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyJson {
    pub dims: [usize; 2],
    pub contexts: Vec<ContextJson>,
    pub product_contexts: Vec<[String; 2]>,
    pub edges: Vec<EdgeJson>,
}

/// Product contexts with the refinement edges between them.
#[derive(Clone, Debug)]
pub struct ContextFamily {
    pub dims: [usize; 2],
    pub contexts: Vec<ProductContext>,
    pub edges: Vec<RefinementEdge>,
}

impl ContextFamily {
    /// `bases` random rank-one contexts per site, each with a coarse-graining
    /// that merges its first two outcomes, plus the trivial context. Product
    /// contexts pair them up; edges link each fine pair to its coarsenings
    /// (including the traced ones) and continue down to `1|1`.
    pub fn seeded(dims: [usize; 2], bases: usize, seed: u64) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) || bases == 0 {
            return usage("seeded families need local dimension >= 2 and at least one basis");
        }
        let mut rng = rng_from_seed(seed);
        let names = ["A", "B"];
        let mut fine: [Vec<Context>; 2] = [Vec::new(), Vec::new()];
        let mut coarse: [Vec<Context>; 2] = [Vec::new(), Vec::new()];
        for site in 0..2 {
            let d = dims[site];
            let mut merge: Vec<usize> = (0..d).map(|i| i.saturating_sub(1)).collect();
            merge[0] = 0;
            for k in 0..bases {
                let c = Context::from_basis(format!("{}{k}", names[site]), &orthonormal_basis(d, &mut rng))?;
                coarse[site].push(c.coarsen(format!("{}{k}c", names[site]), &merge)?);
                fine[site].push(c);
            }
        }
        let trivial = [Context::trivial(dims[0]), Context::trivial(dims[1])];
        let merge = |d: usize| -> Vec<usize> { (0..d).map(|i| i.saturating_sub(1)).collect() };
        let keep = |d: usize| -> Vec<usize> { (0..d).collect() };
        let all = |d: usize| vec![0; d];
        let pc = |l: &Context, r: &Context| ProductContext::new(l.clone(), r.clone());

        let mut contexts = Vec::new();
        let mut edges = Vec::new();
        for a in 0..bases {
            for b in 0..bases {
                let (l, r) = (&fine[0][a], &fine[1][b]);
                let (lc, rc) = (&coarse[0][a], &coarse[1][b]);
                let top = pc(l, r);
                contexts.push(top.clone());
                contexts.push(pc(lc, r));
                contexts.push(pc(l, rc));
                let (d0, d1) = (dims[0], dims[1]);
                edges.push(RefinementEdge::new(pc(lc, r), top.clone(), [merge(d0), keep(d1)])?);
                edges.push(RefinementEdge::new(pc(l, rc), top.clone(), [keep(d0), merge(d1)])?);
                edges.push(RefinementEdge::new(pc(&trivial[0], r), top.clone(), [all(d0), keep(d1)])?);
                edges.push(RefinementEdge::new(pc(l, &trivial[1]), top.clone(), [keep(d0), all(d1)])?);
                edges.push(RefinementEdge::new(pc(&trivial[0], r), pc(lc, r), [all(lc.outcomes()), keep(d1)])?);
                edges.push(RefinementEdge::new(pc(l, &trivial[1]), pc(l, rc), [keep(d0), all(rc.outcomes())])?);
            }
        }
        let bottom = pc(&trivial[0], &trivial[1]);
        for b in 0..bases {
            let ctx = pc(&trivial[0], &fine[1][b]);
            contexts.push(ctx.clone());
            edges.push(RefinementEdge::new(bottom.clone(), ctx, [vec![0], all(dims[1])])?);
        }
        for a in 0..bases {
            let ctx = pc(&fine[0][a], &trivial[1]);
            contexts.push(ctx.clone());
            edges.push(RefinementEdge::new(bottom.clone(), ctx, [all(dims[0]), vec![0]])?);
        }
        contexts.push(bottom);
        Ok(Self { dims, contexts, edges })
    }

    pub fn to_json(&self) -> FamilyJson {
        let mut seen: BTreeMap<(usize, String), &Context> = BTreeMap::new();
        for c in &self.contexts {
            seen.entry((0, c.left.label.clone())).or_insert(&c.left);
            seen.entry((1, c.right.label.clone())).or_insert(&c.right);
        }
        FamilyJson {
            dims: self.dims,
            contexts: seen
                .iter()
                .map(|((site, label), c)| ContextJson {
                    label: label.clone(),
                    site: *site,
                    projectors: c.projectors.iter().map(OperatorJson::from).collect(),
                })
                .collect(),
            product_contexts: self.contexts.iter().map(|c| [c.left.label.clone(), c.right.label.clone()]).collect(),
            edges: self.edges.iter().map(RefinementEdge::to_json).collect(),
        }
    }

    /// Rebuilds the family, re-validating every context and edge.
    pub fn from_json(j: &FamilyJson) -> Result<Self> {
        let mut by_label: [HashMap<String, Context>; 2] = [HashMap::new(), HashMap::new()];
        for c in &j.contexts {
            if c.site > 1 {
                return usage(format!("context {} names site {}", c.label, c.site));
            }
            let projectors = c.projectors.iter().map(HermitianOperator::try_from).collect::<Result<Vec<_>>>()?;
            let mut ctx = Context::new(c.label.clone(), projectors)?;
            ctx.vectors = rank_one_vectors(&ctx);
            if ctx.dim() != j.dims[c.site] {
                return Err(Error::DimensionMismatch { expected: vec![j.dims[c.site]], got: vec![ctx.dim()] });
            }
            by_label[c.site].insert(c.label.clone(), ctx);
        }
        let lookup = |pair: &[String; 2]| -> Result<ProductContext> {
            let get = |site: usize| {
                by_label[site].get(&pair[site]).cloned().ok_or_else(|| Error::Usage(format!("unknown context {}", pair[site])))
            };
            Ok(ProductContext::new(get(0)?, get(1)?))
        };
        let contexts = j.product_contexts.iter().map(lookup).collect::<Result<Vec<_>>>()?;
        let edges = j
            .edges
            .iter()
            .map(|e| RefinementEdge::new(lookup(&e.coarse)?, lookup(&e.fine)?, e.aggregation.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dims: j.dims, contexts, edges })
    }
}

/// Unit vectors of a context whose projectors all have rank one.
fn rank_one_vectors(c: &Context) -> Option<Vec<ComplexVector>> {
    if c.outcomes() != c.dim() {
        return None;
    }
    c.projectors
        .iter()
        .map(|p| {
            let spec = p.spectrum();
            ((spec.eigenvalues[0] - 1.0).abs() <= PVM_TOL).then(|| spec.eigenvectors[0].canonical_phase())
        })
        .collect()
}
