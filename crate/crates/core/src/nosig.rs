//! No-signalling checks for correlation boxes and frame functions, CHSH
//! evaluation and optimization, and the LP test of whether a box extends to a
//! product-positive operator.

use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bases::ProductState;
use crate::coords::HermitianCoordinates;
use crate::error::{invalid, usage, Error, Result};
use crate::fixtures::paulis;
use crate::framefn::{evaluate, FrameFunction};
use crate::linalg::{dot, min_norm_solve};
use crate::lp::{maximize, LpStatus};
use crate::random::{orthonormal_basis, rng_from_seed, substream, unit_vector};
use crate::seesaw::minimize_product_expectation;
use crate::wire::{OperatorJson, Pair, ProductStateJson, VectorJson};
use crate::{ComplexVector, HermitianOperator};

pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Residual floor above which an extension problem is declared infeasible.
pub const INFEASIBILITY_THRESHOLD: f64 = 1e-4;
/// Largest equality residual accepted for a feasible extension.
pub const FEASIBLE_TOL: f64 = 1e-8;
/// Product-state values above `-POSITIVITY_TOL` count as non-negative.
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Bound on every Hilbert-Schmidt coordinate in the LPs.
pub const COORDINATE_BOUND: f64 = 4.0;
const CUT_ROUNDS: usize = 30;
const CUT_RESTARTS: usize = 16;

// ---------------------------------------------------------------- boxes

/// A bipartite correlation table `P(A,B|a,b)`, optionally with a projective
/// realization of every setting.
#[derive(Clone, Debug)]
pub struct CorrelationBox {
    settings: [Vec<String>; 2],
    outcomes: [Vec<String>; 2],
    /// `table[a][b][A][B]`
    table: Vec<Vec<Vec<Vec<f64>>>>,
    /// `realizations[site][setting][outcome]`
    realizations: Option<[Vec<Vec<ComplexVector>>; 2]>,
}

impl CorrelationBox {
    pub fn new(settings: [Vec<String>; 2], outcomes: [Vec<String>; 2], table: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        for site in 0..2 {
            if settings[site].is_empty() || outcomes[site].is_empty() {
                return usage("every site needs at least one setting and one outcome");
            }
        }
        if table.len() != settings[0].len() {
            return invalid("table rows do not match the first site's settings");
        }
        for (a, row) in table.iter().enumerate() {
            if row.len() != settings[1].len() {
                return invalid("table columns do not match the second site's settings");
            }
            for (b, p) in row.iter().enumerate() {
                if p.len() != outcomes[0].len() || p.iter().any(|r| r.len() != outcomes[1].len()) {
                    return invalid(format!("table entry ({a},{b}) has the wrong outcome shape"));
                }
                if p.iter().flatten().any(|&x| !x.is_finite() || x < -NORMALIZATION_TOL) {
                    return invalid(format!("table entry ({a},{b}) has a negative or non-finite probability"));
                }
                let total: f64 = p.iter().flatten().sum();
                if (total - 1.0).abs() > NORMALIZATION_TOL {
                    return invalid(format!(
                        "distribution for ({},{}) sums to {total}",
                        settings[0][a], settings[1][b]
                    ));
                }
            }
        }
        Ok(Self { settings, outcomes, table, realizations: None })
    }

    /// Attaches an orthonormal basis per setting, one vector per outcome.
    pub fn with_realizations(mut self, realizations: [Vec<Vec<ComplexVector>>; 2]) -> Result<Self> {
        for site in 0..2 {
            if realizations[site].len() != self.settings[site].len() {
                return invalid(format!("site {site}: realization count does not match settings"));
            }
            let dim = realizations[site][0].first().map_or(0, ComplexVector::dim);
            for (s, basis) in realizations[site].iter().enumerate() {
                if basis.len() != self.outcomes[site].len() || basis.len() != dim || basis.iter().any(|v| v.dim() != dim) {
                    return invalid(format!(
                        "site {site}, setting {}: a realization needs one vector per outcome spanning the site",
                        self.settings[site][s]
                    ));
                }
                for (i, u) in basis.iter().enumerate() {
                    for (j, v) in basis.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        if (u.inner(v) - Complex::new(want, 0.0)).norm() > 1e-10 {
                            return invalid(format!("site {site}, setting {}: basis not orthonormal", self.settings[site][s]));
                        }
                    }
                }
            }
        }
        self.realizations = Some(realizations);
        Ok(self)
    }

    pub fn settings(&self) -> &[Vec<String>; 2] {
        &self.settings
    }

    pub fn outcomes(&self) -> &[Vec<String>; 2] {
        &self.outcomes
    }

    pub fn probability(&self, a: usize, b: usize, oa: usize, ob: usize) -> f64 {
        self.table[a][b][oa][ob]
    }

    pub fn realizations(&self) -> Option<&[Vec<Vec<ComplexVector>>; 2]> {
        self.realizations.as_ref()
    }

    /// Local dimensions of the realizations.
    pub fn realization_dims(&self) -> Option<[usize; 2]> {
        self.realizations.as_ref().map(|r| [r[0][0][0].dim(), r[1][0][0].dim()])
    }

    pub fn to_json(&self) -> BoxJson {
        let mut table = BTreeMap::new();
        for (a, row) in self.table.iter().enumerate() {
            for (b, p) in row.iter().enumerate() {
                table.insert(format!("{},{}", self.settings[0][a], self.settings[1][b]), p.clone());
            }
        }
        let realizations = self.realizations.as_ref().map(|r| {
            let mut out = BTreeMap::new();
            for site in 0..2 {
                for (s, basis) in r[site].iter().enumerate() {
                    out.insert(
                        self.settings[site][s].clone(),
                        basis.iter().map(|v| VectorJson::from(v).entries).collect(),
                    );
                }
            }
            out
        });
        BoxJson {
            settings: self.settings.to_vec(),
            outcomes: self.outcomes.to_vec(),
            table,
            realizations,
        }
    }

    pub fn from_json(j: &BoxJson) -> Result<Self> {
        if j.settings.len() != 2 || j.outcomes.len() != 2 {
            return usage("box JSON needs settings and outcomes for exactly two sites");
        }
        let settings = [j.settings[0].clone(), j.settings[1].clone()];
        let outcomes = [j.outcomes[0].clone(), j.outcomes[1].clone()];
        let mut table = Vec::with_capacity(settings[0].len());
        for a in &settings[0] {
            let mut row = Vec::with_capacity(settings[1].len());
            for b in &settings[1] {
                let key = format!("{a},{b}");
                row.push(j.table.get(&key).cloned().ok_or_else(|| Error::Validation(format!("missing table entry \"{key}\"")))?);
            }
            table.push(row);
        }
        let boxed = Self::new(settings, outcomes, table)?;
        let Some(map) = &j.realizations else { return Ok(boxed) };
        if boxed.settings[0].iter().any(|s| boxed.settings[1].contains(s)) {
            return usage("realizations need setting labels that differ between the two sites");
        }
        let mut per_site: [Vec<Vec<ComplexVector>>; 2] = [Vec::new(), Vec::new()];
        for site in 0..2 {
            for s in &boxed.settings[site] {
                let basis = map.get(s).ok_or_else(|| Error::Usage(format!("setting \"{s}\" has no realization")))?;
                let vecs = basis
                    .iter()
                    .map(|v| ComplexVector::new(v.iter().map(|p| Complex::new(p[0], p[1])).collect()))
                    .collect::<Result<Vec<_>>>()?;
                per_site[site].push(vecs);
            }
        }
        boxed.with_realizations(per_site)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxJson {
    pub settings: Vec<Vec<String>>,
    pub outcomes: Vec<Vec<String>>,
    /// `"a,b"` → rows indexed by the first site's outcome.
    pub table: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realizations: Option<BTreeMap<String, Vec<Vec<Pair>>>>,
}

fn labels(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn two_setting_box(p: impl Fn(usize, usize, usize, usize) -> f64) -> Result<CorrelationBox> {
    let table = (0..2)
        .map(|a| (0..2).map(|b| (0..2).map(|oa| (0..2).map(|ob| p(a, b, oa, ob)).collect()).collect()).collect())
        .collect();
    CorrelationBox::new([labels(&["a", "a'"]), labels(&["b", "b'"])], [labels(&["0", "1"]), labels(&["0", "1"])], table)
}

/// `P = 1/2` when `A ⊕ B = a·b`, else 0.
pub fn pr_box() -> CorrelationBox {
    two_setting_box(|a, b, oa, ob| if (oa ^ ob) == (a & b) { 0.5 } else { 0.0 }).expect("normalized")
}

/// Outcome `first[a]` for setting `a` at the first site, `second[b]` at the second.
pub fn deterministic_box(first: [usize; 2], second: [usize; 2]) -> Result<CorrelationBox> {
    if first.iter().chain(&second).any(|&o| o > 1) {
        return usage("deterministic outcomes must be 0 or 1");
    }
    two_setting_box(|a, b, oa, ob| if oa == first[a] && ob == second[b] { 1.0 } else { 0.0 })
}

pub fn white_noise_box() -> CorrelationBox {
    two_setting_box(|_, _, _, _| 0.25).expect("normalized")
}

/// Box induced by `t` under the given realizations:
/// `P(A,B|a,b) = tr(t (p_A ⊗ q_B))`.
pub fn box_from_operator(
    t: &HermitianOperator,
    settings: [Vec<String>; 2],
    outcomes: [Vec<String>; 2],
    realizations: [Vec<Vec<ComplexVector>>; 2],
) -> Result<CorrelationBox> {
    let mut table = Vec::new();
    for pa in &realizations[0] {
        let mut row = Vec::new();
        for pb in &realizations[1] {
            let mut p = Vec::new();
            for u in pa {
                let mut r = Vec::new();
                for v in pb {
                    let s = ProductState::new(vec![u.clone(), v.clone()])?;
                    r.push(t.expectation(&s.vector()));
                }
                p.push(r);
            }
            row.push(p);
        }
        table.push(row);
    }
    CorrelationBox::new(settings, outcomes, table)?.with_realizations(realizations)
}

/// Measurement basis `{|+n>, |-n>}` for a Bloch direction `n`; the first
/// vector projects onto `(I + n·σ)/2`.
pub fn bloch_basis(n: [f64; 3]) -> Result<[ComplexVector; 2]> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return usage(format!("Bloch direction must be a unit vector, got norm {norm}"));
    }
    let theta = (n[2] / norm).clamp(-1.0, 1.0).acos();
    let phase = Complex::from_polar(1.0, n[1].atan2(n[0]));
    let (s, c) = (theta / 2.0).sin_cos();
    let plus = ComplexVector::new(vec![Complex::new(c, 0.0), phase * s])?;
    let minus = ComplexVector::new(vec![Complex::new(s, 0.0), -phase * c])?;
    Ok([plus, minus])
}

/// Bloch directions `[a, a', b, b']` on the equator at angles `0, π/2`
/// (first site) and `π/4, 3π/4` (second site). The `π/4` basis carries
/// its outcomes in reverse order so the singlet scores `+2√2`.
pub fn standard_settings() -> [[f64; 3]; 4] {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-c, -c, 0.0], [-c, c, 0.0]]
}

pub fn qubit_realizations(dirs: [[f64; 3]; 4]) -> Result<[Vec<Vec<ComplexVector>>; 2]> {
    let b = dirs.iter().map(|&n| bloch_basis(n).map(|x| x.to_vec())).collect::<Result<Vec<_>>>()?;
    Ok([vec![b[0].clone(), b[1].clone()], vec![b[2].clone(), b[3].clone()]])
}

/// The singlet measured at `standard_settings`.
pub fn singlet_box() -> CorrelationBox {
    let base = pr_box();
    box_from_operator(
        &crate::fixtures::singlet(),
        base.settings.clone(),
        base.outcomes.clone(),
        qubit_realizations(standard_settings()).expect("unit directions"),
    )
    .expect("realized singlet box")
}

// ---------------------------------------------------------------- reports

#[derive(Clone, Debug, PartialEq)]
pub struct BoxWitness {
    pub site: usize,
    pub setting: String,
    pub outcome: String,
    /// Remote settings giving the largest and smallest marginal.
    pub remote_settings: [String; 2],
    pub marginals: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameWitness {
    /// Site whose local basis varies.
    pub site: usize,
    /// Fixed factors of the other sites, in site order.
    pub remote: Vec<ComplexVector>,
    pub bases: [Vec<ComplexVector>; 2],
    pub sums: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    Box(BoxWitness),
    Frame(FrameWitness),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoSigReport {
    pub max_discrepancy: f64,
    pub witness: Option<Witness>,
    pub configurations: usize,
}

impl NoSigReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_discrepancy <= tol
    }

    pub fn to_json(&self) -> Value {
        let witness = match &self.witness {
            None => Value::Null,
            Some(Witness::Box(w)) => json!({
                "kind": "box",
                "site": w.site,
                "setting": w.setting,
                "outcome": w.outcome,
                "remote_settings": w.remote_settings,
                "marginals": w.marginals,
            }),
            Some(Witness::Frame(w)) => json!({
                "kind": "frame",
                "site": w.site,
                "remote": w.remote.iter().map(VectorJson::from).collect::<Vec<_>>(),
                "bases": w.bases.iter().map(|b| b.iter().map(VectorJson::from).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "sums": w.sums,
            }),
        };
        json!({
            "max_discrepancy": self.max_discrepancy,
            "configurations": self.configurations,
            "witness": witness,
        })
    }
}

/// Compares the local marginals of every setting/outcome across remote settings.
pub fn check_box(b: &CorrelationBox) -> Result<NoSigReport> {
    let ns = [b.settings[0].len(), b.settings[1].len()];
    let no = [b.outcomes[0].len(), b.outcomes[1].len()];
    for a in 0..ns[0] {
        for bb in 0..ns[1] {
            let total: f64 = b.table[a][bb].iter().flatten().sum();
            if (total - 1.0).abs() > NORMALIZATION_TOL {
                return invalid(format!("distribution ({a},{bb}) sums to {total}"));
            }
        }
    }
    let mut best: Option<(f64, BoxWitness)> = None;
    let mut configurations = 0;
    for site in 0..2 {
        let other = 1 - site;
        for s in 0..ns[site] {
            for o in 0..no[site] {
                let marginals: Vec<f64> = (0..ns[other])
                    .map(|r| {
                        let (a, bb) = if site == 0 { (s, r) } else { (r, s) };
                        let p = &b.table[a][bb];
                        if site == 0 {
                            p[o].iter().sum()
                        } else {
                            p.iter().map(|row| row[o]).sum()
                        }
                    })
                    .collect();
                configurations += 1;
                let (hi, lo) = extreme_indices(&marginals);
                let gap = marginals[hi] - marginals[lo];
                if best.as_ref().map_or(true, |(g, _)| gap > *g) {
                    best = Some((
                        gap,
                        BoxWitness {
                            site,
                            setting: b.settings[site][s].clone(),
                            outcome: b.outcomes[site][o].clone(),
                            remote_settings: [b.settings[other][hi].clone(), b.settings[other][lo].clone()],
                            marginals: [marginals[hi], marginals[lo]],
                        },
                    ));
                }
            }
        }
    }
    let (max_discrepancy, w) = best.expect("non-empty box");
    let witness = (max_discrepancy > 0.0).then_some(Witness::Box(w));
    Ok(NoSigReport { max_discrepancy, witness, configurations })
}

fn extreme_indices(xs: &[f64]) -> (usize, usize) {
    let mut hi = 0;
    let mut lo = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[hi] {
            hi = i;
        }
        if x < xs[lo] {
            lo = i;
        }
    }
    (hi, lo)
}

/// One randomized test of the frame-function no-signalling condition.
#[derive(Clone, Debug)]
pub struct FrameConfiguration {
    pub site: usize,
    pub remote: Vec<ComplexVector>,
    pub bases: [Vec<ComplexVector>; 2],
}

impl FrameConfiguration {
    fn state(&self, v: &ComplexVector) -> ProductState {
        let mut factors = self.remote.clone();
        factors.insert(self.site, v.clone());
        ProductState::new(factors).expect("unit factors")
    }

    /// The product states evaluated by this configuration, basis by basis.
    pub fn states(&self) -> [Vec<ProductState>; 2] {
        [
            self.bases[0].iter().map(|v| self.state(v)).collect(),
            self.bases[1].iter().map(|v| self.state(v)).collect(),
        ]
    }
}

/// Configurations used by `check_framefn`; trial `k` tests site `k mod n`.
pub fn framefn_configurations(dims: &[usize], trials: usize, seed: u64) -> Vec<FrameConfiguration> {
    (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let site = k % dims.len();
            let remote = dims
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != site)
                .map(|(_, &d)| unit_vector(d, &mut rng))
                .collect();
            let bases = [orthonormal_basis(dims[site], &mut rng), orthonormal_basis(dims[site], &mut rng)];
            FrameConfiguration { site, remote, bases }
        })
        .collect()
}

/// Every product state `check_framefn(_, trials, seed)` will query, so a
/// tabulated frame function can be sampled to cover them.
pub fn framefn_design(dims: &[usize], trials: usize, seed: u64) -> Vec<ProductState> {
    framefn_configurations(dims, trials, seed).iter().flat_map(|c| c.states().into_iter().flatten()).collect()
}

/// For random remote states `x` and local basis pairs `{v}`, `{w}`, compares
/// `Σ f(x⊗v_j)` with `Σ f(x⊗w_k)`.
pub fn check_framefn(f: &FrameFunction, trials: usize, seed: u64) -> Result<NoSigReport> {
    let dims = f.dims();
    if dims.len() < 2 {
        return usage("no-signalling needs at least two sites");
    }
    let configs = framefn_configurations(&dims, trials, seed);
    let sums = configs
        .par_iter()
        .map(|c| {
            let [s0, s1] = c.states();
            let a = s0.iter().map(|s| evaluate(f, s)).sum::<Result<f64>>()?;
            let b = s1.iter().map(|s| evaluate(f, s)).sum::<Result<f64>>()?;
            Ok([a, b])
        })
        .collect::<Result<Vec<[f64; 2]>>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in sums.iter().enumerate() {
        let gap = (s[0] - s[1]).abs();
        if best.map_or(true, |(_, g)| gap > g) {
            best = Some((k, gap));
        }
    }
    let Some((k, max_discrepancy)) = best else {
        return Ok(NoSigReport { max_discrepancy: 0.0, witness: None, configurations: 0 });
    };
    let c = &configs[k];
    let witness = Witness::Frame(FrameWitness { site: c.site, remote: c.remote.clone(), bases: c.bases.clone(), sums: sums[k] });
    Ok(NoSigReport { max_discrepancy, witness: Some(witness), configurations: configs.len() })
}

// ---------------------------------------------------------------- CHSH

/// Two-outcome settings on each qubit and an operator to evaluate them on.
/// The first vector of each basis is the `+1` outcome.
#[derive(Clone, Debug)]
pub struct ChshInstance {
    pub a: [ComplexVector; 2],
    pub a_prime: [ComplexVector; 2],
    pub b: [ComplexVector; 2],
    pub b_prime: [ComplexVector; 2],
    pub t: HermitianOperator,
}

impl ChshInstance {
    pub fn new(settings: [[ComplexVector; 2]; 4], t: HermitianOperator) -> Result<Self> {
        if t.dims() != [2, 2] {
            return Err(Error::DimensionMismatch { expected: vec![2, 2], got: t.dims().to_vec() });
        }
        for (k, s) in settings.iter().enumerate() {
            let ok = s.iter().all(|v| v.dim() == 2 && v.is_unit()) && s[0].inner(&s[1]).norm() <= 1e-10;
            if !ok {
                return invalid(format!("setting {k} is not an orthonormal qubit basis"));
            }
        }
        let [a, a_prime, b, b_prime] = settings;
        Ok(Self { a, a_prime, b, b_prime, t })
    }

    pub fn from_bloch(dirs: [[f64; 3]; 4], t: HermitianOperator) -> Result<Self> {
        Self::new([bloch_basis(dirs[0])?, bloch_basis(dirs[1])?, bloch_basis(dirs[2])?, bloch_basis(dirs[3])?], t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChshValue {
    pub value: f64,
    pub warning: Option<String>,
}

fn correlator(t: &HermitianOperator, x: &[ComplexVector; 2], y: &[ComplexVector; 2]) -> f64 {
    let mut e = 0.0;
    for (i, u) in x.iter().enumerate() {
        for (j, v) in y.iter().enumerate() {
            let sign = if i == j { 1.0 } else { -1.0 };
            let s = crate::hilbert::tensor(&[u.clone(), v.clone()]).expect("two factors");
            e += sign * t.expectation(&s);
        }
    }
    e
}

/// `E(a,b) + E(a,b') + E(a',b) - E(a',b')`.
pub fn chsh_value(inst: &ChshInstance) -> ChshValue {
    let t = &inst.t;
    let value = correlator(t, &inst.a, &inst.b) + correlator(t, &inst.a, &inst.b_prime) + correlator(t, &inst.a_prime, &inst.b)
        - correlator(t, &inst.a_prime, &inst.b_prime);
    let tr = t.trace();
    let warning = ((tr - 1.0).abs() > 1e-10).then(|| format!("operator trace is {tr}, not 1"));
    ChshValue { value, warning }
}

/// CHSH combination of a two-setting, two-outcome table; the first outcome
/// of each setting counts as `+1`.
pub fn chsh_value_box(b: &CorrelationBox) -> Result<f64> {
    if b.settings.iter().any(|s| s.len() != 2) || b.outcomes.iter().any(|o| o.len() != 2) {
        return usage("CHSH needs two settings and two outcomes per site");
    }
    let e = |x: usize, y: usize| {
        let p = &b.table[x][y];
        p[0][0] - p[0][1] - p[1][0] + p[1][1]
    };
    Ok(e(0, 0) + e(0, 1) + e(1, 0) - e(1, 1))
}

/// `T_ij = tr(t σ_i ⊗ σ_j)` for `i, j ∈ {x, y, z}`.
pub fn correlation_matrix(t: &HermitianOperator) -> Result<[[f64; 3]; 3]> {
    if t.dims() != [2, 2] {
        return Err(Error::DimensionMismatch { expected: vec![2, 2], got: t.dims().to_vec() });
    }
    let p = paulis();
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let s = p[i + 1].kron(&p[j + 1]);
            m[i][j] = t.matrix().matmul(&s).trace().re;
        }
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct ChshOptimum {
    pub value: f64,
    /// Bloch directions `[a, a', b, b']`.
    pub settings: [[f64; 3]; 4],
    pub restart: usize,
}

fn mat_vec(m: &[[f64; 3]; 3], v: &[f64; 3], transpose: bool) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i] += if transpose { m[j][i] } else { m[i][j] } * v[j];
        }
    }
    out
}

fn unit_or(v: [f64; 3], fallback: [f64; 3]) -> [f64; 3] {
    let n = dot(&v, &v).sqrt();
    if n <= 1e-300 {
        fallback
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

fn bilinear(m: &[[f64; 3]; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    dot(a, &mat_vec(m, b, false))
}

fn chsh_bilinear(m: &[[f64; 3]; 3], s: &[[f64; 3]; 4]) -> f64 {
    bilinear(m, &s[0], &s[2]) + bilinear(m, &s[0], &s[3]) + bilinear(m, &s[1], &s[2]) - bilinear(m, &s[1], &s[3])
}

fn add3(a: &[f64; 3], b: &[f64; 3], sign: f64) -> [f64; 3] {
    [a[0] + sign * b[0], a[1] + sign * b[1], a[2] + sign * b[2]]
}

/// Multi-start alternating ascent over the four Bloch directions. Each half
/// step is the exact optimum of one side given the other, so the value is
/// non-decreasing; the result is a lower bound on the true maximum.
pub fn chsh_optimize(t: &HermitianOperator, restarts: usize, seed: u64) -> Result<ChshOptimum> {
    if restarts == 0 {
        return usage("optimizer needs at least one restart");
    }
    let m = correlation_matrix(t)?;
    let runs: Vec<(f64, [[f64; 3]; 4])> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let mut random_dir = || {
                let v: ComplexVector = unit_vector(3, &mut rng);
                unit_or([v[0].re, v[1].re, v[2].re], [0.0, 0.0, 1.0])
            };
            let mut s = [random_dir(), random_dir(), random_dir(), random_dir()];
            let mut value = f64::NEG_INFINITY;
            for _ in 0..1000 {
                s[2] = unit_or(mat_vec(&m, &add3(&s[0], &s[1], 1.0), true), s[2]);
                s[3] = unit_or(mat_vec(&m, &add3(&s[0], &s[1], -1.0), true), s[3]);
                s[0] = unit_or(mat_vec(&m, &add3(&s[2], &s[3], 1.0), false), s[0]);
                s[1] = unit_or(mat_vec(&m, &add3(&s[2], &s[3], -1.0), false), s[1]);
                let next = chsh_bilinear(&m, &s);
                if next - value <= 1e-15 * (1.0 + next.abs()) {
                    value = value.max(next);
                    break;
                }
                value = next;
            }
            (value, s)
        })
        .collect();
    let (restart, (_, settings)) = runs
        .into_iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(j.cmp(i)))
        .expect("restarts > 0");
    // report the value of the realized measurement bases
    let value = chsh_value(&ChshInstance::from_bloch(settings, t.clone())?).value;
    Ok(ChshOptimum { value, settings, restart })
}

// ---------------------------------------------------------------- extension LP

#[derive(Clone, Debug)]
pub enum ExtensionVerdict {
    /// `t` reproduces the table within `residual` and is non-negative on every
    /// tested product state (smallest value found: `product_minimum`).
    Feasible { t: HermitianOperator, residual: f64, product_minimum: f64, method: &'static str },
    /// No operator in the sampled relaxation matches the table better than
    /// `residual_floor` in the max norm; the positivity constraints with
    /// non-zero multipliers certify the floor.
    Infeasible { residual_floor: f64, certificate: Vec<(ProductState, f64)>, constraints: usize, bound_active: bool },
    /// Floor between the feasibility and infeasibility tolerances.
    Undecided { residual_floor: f64, constraints: usize },
}

impl ExtensionVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Feasible { .. } => "FEASIBLE",
            Self::Infeasible { .. } => "INFEASIBLE",
            Self::Undecided { .. } => "UNDECIDED",
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Self::Feasible { t, residual, product_minimum, method } => json!({
                "verdict": self.label(),
                "t": OperatorJson::from(t),
                "residual": residual,
                "residual_tolerance": FEASIBLE_TOL,
                "product_minimum": product_minimum,
                "method": method,
            }),
            Self::Infeasible { residual_floor, certificate, constraints, bound_active } => json!({
                "verdict": self.label(),
                "residual_floor": residual_floor,
                "threshold": INFEASIBILITY_THRESHOLD,
                "constraints": constraints,
                "bound_active": bound_active,
                "certificate": certificate
                    .iter()
                    .map(|(s, w)| json!({"state": ProductStateJson::from(s), "weight": w}))
                    .collect::<Vec<_>>(),
            }),
            Self::Undecided { residual_floor, constraints } => json!({
                "verdict": self.label(),
                "residual_floor": residual_floor,
                "feasible_tolerance": FEASIBLE_TOL,
                "threshold": INFEASIBILITY_THRESHOLD,
                "constraints": constraints,
            }),
        }
    }
}

fn realized_rows(b: &CorrelationBox, coords: &HermitianCoordinates) -> Result<Vec<(Vec<f64>, f64)>> {
    let r = b.realizations.as_ref().ok_or_else(|| Error::Usage("box settings have no realizations".into()))?;
    let mut rows = Vec::new();
    for (a, pa) in r[0].iter().enumerate() {
        for (bb, pb) in r[1].iter().enumerate() {
            for (oa, u) in pa.iter().enumerate() {
                for (ob, v) in pb.iter().enumerate() {
                    let s = crate::hilbert::tensor(&[u.clone(), v.clone()])?;
                    rows.push((coords.of_vector(&s), b.table[a][bb][oa][ob]));
                }
            }
        }
    }
    Ok(rows)
}

fn trace_row(coords: &HermitianCoordinates) -> Vec<f64> {
    coords.coordinates(&HermitianOperator::identity(coords.dims().to_vec()))
}

/// Random product states drawn from one stream, so any prefix of a longer
/// sample is the shorter sample.
pub fn positivity_sample(dims: &[usize], count: usize, seed: u64) -> Vec<ProductState> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| ProductState::new(dims.iter().map(|&d| unit_vector(d, &mut rng)).collect()).expect("unit factors"))
        .collect()
}

fn bound_rows(n: usize) -> Vec<(Vec<f64>, f64)> {
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut up = vec![0.0; n];
        up[i] = -1.0;
        rows.push((up, -COORDINATE_BOUND));
        let mut down = vec![0.0; n];
        down[i] = 1.0;
        rows.push((down, -COORDINATE_BOUND));
    }
    rows
}

fn bound_active(x: &[f64]) -> bool {
    x.iter().any(|v| (v.abs() - COORDINATE_BOUND).abs() <= 1e-7)
}

/// Searches for a product-positive operator with unit trace reproducing the
/// realized table. The minimum-norm solution of the equalities is tried
/// first; otherwise an LP minimizes the max-norm residual subject to sampled
/// positivity constraints, refined by see-saw cutting planes.
pub fn quantum_extension(b: &CorrelationBox, positivity_samples: usize, seed: u64) -> Result<ExtensionVerdict> {
    let dims = b.realization_dims().ok_or_else(|| Error::Usage("box settings have no realizations".into()))?;
    let coords = HermitianCoordinates::new(&dims);
    let n = coords.len();
    let equalities = realized_rows(b, &coords)?;
    let trace = trace_row(&coords);
    let samples = positivity_sample(&dims, positivity_samples, seed);

    // minimum-norm candidate
    let mut rows: Vec<Vec<f64>> = equalities.iter().map(|(r, _)| r.clone()).collect();
    let mut rhs: Vec<f64> = equalities.iter().map(|(_, p)| *p).collect();
    rows.push(trace.clone());
    rhs.push(1.0);
    let x0 = min_norm_solve(&rows, &rhs, n);
    let residual0 = rows.iter().zip(&rhs).map(|(r, p)| (dot(r, &x0) - p).abs()).fold(0.0, f64::max);
    if residual0 <= FEASIBLE_TOL {
        let t = coords.operator(&x0)?;
        let sampled_ok = samples.iter().all(|s| t.expectation(&s.vector()) >= -POSITIVITY_TOL);
        if sampled_ok {
            let min = minimize_product_expectation(&t, crate::seesaw::DEFAULT_RESTARTS, seed)?.value;
            if min >= -POSITIVITY_TOL {
                return Ok(ExtensionVerdict::Feasible { t, residual: residual0, product_minimum: min, method: "minimum-norm" });
            }
        }
    }

    // LP over (x, ε): maximize -ε
    let width = n + 1;
    let extend = |r: &[f64], eps: f64| {
        let mut v = r.to_vec();
        v.push(eps);
        v
    };
    let mut inequalities: Vec<(Vec<f64>, f64)> = Vec::new();
    for (r, p) in &equalities {
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        inequalities.push((extend(&neg, 1.0), -p));
        inequalities.push((extend(r, 1.0), *p));
    }
    for (r, h) in bound_rows(n) {
        inequalities.push((extend(&r, 0.0), h));
    }
    let fixed = inequalities.len();
    let mut states: Vec<ProductState> = Vec::new();
    for s in samples {
        inequalities.push((extend(&coords.of_vector(&s.vector()), 0.0), 0.0));
        states.push(s);
    }
    let eq = vec![(extend(&trace, 0.0), 1.0)];
    let mut objective = vec![0.0; width];
    objective[n] = -1.0;

    let mut round = 0;
    loop {
        let sol = maximize(&objective, &inequalities, &eq)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Unsupported(format!("extension LP ended with status {:?}", sol.status)));
        }
        let eps = sol.x[n].max(0.0);
        let x = &sol.x[..n];
        if eps > INFEASIBILITY_THRESHOLD {
            let certificate = sol.inequality_weights[fixed..]
                .iter()
                .zip(&states)
                .filter(|(w, _)| **w > 1e-12)
                .map(|(w, s)| (s.clone(), *w))
                .collect();
            return Ok(ExtensionVerdict::Infeasible {
                residual_floor: eps,
                certificate,
                constraints: states.len(),
                bound_active: bound_active(x),
            });
        }
        let t = coords.operator(x)?;
        let min = minimize_product_expectation(&t, CUT_RESTARTS, seed.wrapping_add(round as u64 + 1))?;
        if min.value >= -POSITIVITY_TOL || round >= CUT_ROUNDS {
            if eps <= FEASIBLE_TOL && min.value >= -POSITIVITY_TOL {
                return Ok(ExtensionVerdict::Feasible { t, residual: eps, product_minimum: min.value, method: "lp" });
            }
            return Ok(ExtensionVerdict::Undecided { residual_floor: eps, constraints: states.len() });
        }
        inequalities.push((extend(&coords.of_vector(&min.state.vector()), 0.0), 0.0));
        states.push(min.state);
        round += 1;
    }
}

/// Observable `Σ ± P ⊗ Q` whose expectation is the CHSH combination.
pub fn chsh_operator(dirs: [[f64; 3]; 4]) -> Result<HermitianOperator> {
    let p = paulis();
    let obs = |n: &[f64; 3]| {
        p[1].scale(Complex::new(n[0], 0.0)).add(&p[2].scale(Complex::new(n[1], 0.0))).add(&p[3].scale(Complex::new(n[2], 0.0)))
    };
    let (a, a2, b, b2) = (obs(&dirs[0]), obs(&dirs[1]), obs(&dirs[2]), obs(&dirs[3]));
    let m = a.kron(&b).add(&a.kron(&b2)).add(&a2.kron(&b)).sub(&a2.kron(&b2));
    HermitianOperator::new(vec![2, 2], m)
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderStep {
    pub samples: usize,
    pub value: f64,
    pub bound_active: bool,
}

/// LP upper bound on CHSH over unit-trace operators that are non-negative on
/// the first `k` sampled product states, for each `k` in `counts`. Samples
/// are nested, so the bound cannot increase along an increasing schedule.
pub fn chsh_lp_ladder(dirs: [[f64; 3]; 4], counts: &[usize], seed: u64) -> Result<Vec<LadderStep>> {
    let dims = [2, 2];
    let coords = HermitianCoordinates::new(&dims);
    let n = coords.len();
    let c = coords.coordinates(&chsh_operator(dirs)?);
    let max = counts.iter().copied().max().unwrap_or(0);
    let features: Vec<(Vec<f64>, f64)> =
        positivity_sample(&dims, max, seed).iter().map(|s| (coords.of_vector(&s.vector()), 0.0)).collect();
    let eq = vec![(trace_row(&coords), 1.0)];
    counts
        .iter()
        .map(|&k| {
            let mut ineq = bound_rows(n);
            ineq.extend_from_slice(&features[..k]);
            let sol = maximize(&c, &ineq, &eq)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Unsupported(format!("CHSH LP ended with status {:?}", sol.status)));
            }
            Ok(LadderStep { samples: k, value: sol.value, bound_active: bound_active(&sol.x) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{singlet, swap};
    use crate::framefn::{make_signalling_example, sample_from_operator};
    use crate::random::density_matrix;

    const SQRT8: f64 = 2.0 * std::f64::consts::SQRT_2;

    #[test]
    fn pr_box_is_non_signalling() {
        let b = pr_box();
        let r = check_box(&b).unwrap();
        assert_eq!(r.max_discrepancy, 0.0);
        assert!(r.witness.is_none());
        for a in 0..2 {
            for bb in 0..2 {
                for o in 0..2 {
                    let m: f64 = (0..2).map(|ob| b.probability(a, bb, o, ob)).sum();
                    assert_eq!(m, 0.5);
                }
            }
        }
    }

    #[test]
    fn deterministic_box_matching_settings() {
        let b = deterministic_box([0, 1], [0, 1]).unwrap();
        assert_eq!(check_box(&b).unwrap().max_discrepancy, 0.0);
    }

    #[test]
    fn shifted_marginal_is_caught() {
        let table = vec![
            vec![vec![vec![0.25, 0.25], vec![0.25, 0.25]], vec![vec![0.35, 0.25], vec![0.15, 0.25]]],
            vec![vec![vec![0.25, 0.25], vec![0.25, 0.25]], vec![vec![0.25, 0.25], vec![0.25, 0.25]]],
        ];
        let b = CorrelationBox::new([labels(&["a", "a'"]), labels(&["b", "b'"])], [labels(&["0", "1"]), labels(&["0", "1"])], table)
            .unwrap();
        let r = check_box(&b).unwrap();
        assert!((r.max_discrepancy - 0.1).abs() < 1e-12);
        let Some(Witness::Box(w)) = r.witness else { panic!("expected a box witness") };
        assert_eq!((w.site, w.setting.as_str()), (0, "a"));
    }

    #[test]
    fn unnormalized_box_rejected() {
        let table = vec![vec![vec![vec![0.5, 0.25], vec![0.0, 0.0]]]];
        let err = CorrelationBox::new([labels(&["a"]), labels(&["b"])], [labels(&["0", "1"]), labels(&["0", "1"])], table);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn box_json_round_trip() {
        let b = singlet_box();
        let text = serde_json::to_string(&b.to_json()).unwrap();
        assert!(text.contains("\"a,b'\""));
        let back = CorrelationBox::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.realization_dims(), Some([2, 2]));
        assert!((back.probability(1, 1, 0, 1) - b.probability(1, 1, 0, 1)).abs() < 1e-15);
    }

    #[test]
    fn operator_frame_functions_do_not_signal() {
        let mut rng = rng_from_seed(12);
        let f = FrameFunction::from_operator(density_matrix(&[3, 3], &mut rng));
        assert!(check_framefn(&f, 50, 1).unwrap().max_discrepancy <= 1e-10);
        let f = FrameFunction::from_operator(swap(2).scale(0.5));
        assert!(check_framefn(&f, 50, 2).unwrap().max_discrepancy <= 1e-10);
    }

    #[test]
    fn signalling_family_is_caught() {
        let ex = make_signalling_example(&[3, 3], std::f64::consts::FRAC_PI_4).unwrap();
        let r = check_framefn(&ex.f, 200, 5).unwrap();
        assert!(r.max_discrepancy >= 1e-3, "{}", r.max_discrepancy);
        let Some(Witness::Frame(w)) = &r.witness else { panic!("expected a frame witness") };
        assert!(((w.sums[0] - w.sums[1]).abs() - r.max_discrepancy).abs() < 1e-15);
    }

    #[test]
    fn tabulated_frame_function_on_its_design() {
        let mut rng = rng_from_seed(21);
        let rho = density_matrix(&[3, 3], &mut rng);
        let design = framefn_design(&[3, 3], 40, 8);
        let f = sample_from_operator(&rho, &design, true).unwrap();
        assert!(check_framefn(&f, 40, 8).unwrap().max_discrepancy <= 1e-10);
        assert!(matches!(check_framefn(&f, 40, 9), Err(Error::LookupMiss)));
    }

    #[test]
    fn singlet_at_standard_settings() {
        let inst = ChshInstance::from_bloch(standard_settings(), singlet()).unwrap();
        let v = chsh_value(&inst);
        assert!((v.value - SQRT8).abs() < 1e-6);
        assert!(v.warning.is_none());
        assert!((chsh_value_box(&singlet_box()).unwrap() - SQRT8).abs() < 1e-12);
    }

    #[test]
    fn product_state_is_classical() {
        let mut rng = rng_from_seed(3);
        let zero = ComplexVector::basis(4, 0);
        let t = HermitianOperator::projector(vec![2, 2], &zero).unwrap();
        for _ in 0..20 {
            let dirs = std::array::from_fn(|_| {
                let v: ComplexVector = unit_vector(3, &mut rng);
                unit_or([v[0].re, v[1].re, v[2].re], [0.0, 0.0, 1.0])
            });
            assert!(chsh_value(&ChshInstance::from_bloch(dirs, t.clone()).unwrap()).value <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn table_mode_values() {
        assert!((chsh_value_box(&pr_box()).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(chsh_value_box(&deterministic_box([0, 0], [0, 0]).unwrap()).unwrap(), 2.0);
        assert_eq!(chsh_value_box(&white_noise_box()).unwrap(), 0.0);
    }

    #[test]
    fn trace_warning() {
        let inst = ChshInstance::from_bloch(standard_settings(), singlet().scale(2.0)).unwrap();
        assert!(chsh_value(&inst).warning.is_some());
    }

    #[test]
    fn optimizer_examples() {
        let s = chsh_optimize(&singlet(), 32, 7).unwrap();
        assert!((s.value - SQRT8).abs() < 1e-4);
        let mixed = chsh_optimize(&HermitianOperator::maximally_mixed(vec![2, 2]), 8, 7).unwrap();
        assert!(mixed.value.abs() < 1e-6);
        let sw = chsh_optimize(&swap(2).scale(0.5), 16, 7).unwrap();
        assert!(sw.value <= SQRT8 + 1e-4);
    }

    #[test]
    fn chsh_operator_matches_value() {
        let op = chsh_operator(standard_settings()).unwrap();
        assert!((singlet().trace_product(&op) - SQRT8).abs() < 1e-12);
    }

    #[test]
    fn white_noise_extends_to_maximally_mixed() {
        let v = quantum_extension(&white_noise_box().with_realizations(qubit_realizations(standard_settings()).unwrap()).unwrap(), 200, 1)
            .unwrap();
        let ExtensionVerdict::Feasible { t, residual, .. } = v else { panic!("expected FEASIBLE, got {}", v.label()) };
        assert!(residual <= 1e-12);
        assert!(t.matrix().max_abs_diff(HermitianOperator::maximally_mixed(vec![2, 2]).matrix()) < 1e-12);
    }

    #[test]
    fn singlet_box_extends() {
        let b = singlet_box();
        let v = quantum_extension(&b, 500, 2).unwrap();
        let ExtensionVerdict::Feasible { t, residual, .. } = v else { panic!("expected FEASIBLE, got {}", v.label()) };
        assert!(residual <= 1e-8);
        let induced = box_from_operator(&t, b.settings.clone(), b.outcomes.clone(), b.realizations.clone().unwrap()).unwrap();
        for a in 0..2 {
            for bb in 0..2 {
                for oa in 0..2 {
                    for ob in 0..2 {
                        assert!((induced.probability(a, bb, oa, ob) - b.probability(a, bb, oa, ob)).abs() <= 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn unrealized_box_is_usage_error() {
        assert!(matches!(quantum_extension(&pr_box(), 10, 1), Err(Error::Usage(_))));
    }
}
