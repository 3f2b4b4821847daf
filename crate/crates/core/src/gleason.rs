//! Reconstruction of the operator behind a frame function.
//!
//! Values on an informationally complete set of product states determine a
//! Hermitian `t` with `f(v) = <v|t|v>` by linear least squares over the real
//! Hilbert-Schmidt coordinates, so Hermiticity holds by construction.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bases::ProductState;
use crate::coords::HermitianCoordinates;
use crate::error::{invalid, usage, Error, Result};
use crate::framefn::{evaluate, FrameFunction};
use crate::linalg::{dot, lstsq_normal, rank};
use crate::random::{orthonormal_basis, rng_from_seed, substream, unit_vector};
use crate::seesaw::{minimize_product_expectation, ProductMinimum, DEFAULT_RESTARTS};
use crate::wire::{OperatorJson, ProductStateJson};
use crate::{ComplexVector, HermitianOperator, Matrix};

pub const DEFAULT_HOLDOUT: f64 = 0.2;
/// Holdout residual above which a reconstruction is flagged.
pub const ANOMALY_RESIDUAL: f64 = 1e-6;
pub const PSD_TOL: f64 = 1e-10;
pub const PRODUCT_TOL: f64 = 1e-8;
const MAX_GROWTH: usize = 10;

#[derive(Clone, Debug)]
pub struct SpanningDesign {
    pub dims: Vec<usize>,
    pub states: Vec<ProductState>,
    pub rank: usize,
    pub seed: u64,
}

/// Draws `ceil(oversample · D²)` random product states and keeps drawing
/// until the feature rank reaches `D²` (at most ten times that budget).
pub fn spanning_design(dims: &[usize], oversample: f64, seed: u64) -> Result<SpanningDesign> {
    if dims.is_empty() || dims.contains(&0) {
        return usage(format!("design dims must be positive, got {dims:?}"));
    }
    if !(oversample.is_finite() && oversample > 0.0) {
        return usage("oversample factor must be positive");
    }
    let coords = HermitianCoordinates::new(dims);
    let full = coords.len();
    let budget = ((oversample * full as f64).ceil() as usize).max(1);
    let mut rng = rng_from_seed(seed);
    let mut draw = |count: usize| -> Vec<ProductState> {
        (0..count)
            .map(|_| ProductState::new(dims.iter().map(|&d| unit_vector(d, &mut rng)).collect()).expect("unit"))
            .collect()
    };
    let mut states = draw(budget);
    loop {
        let rows: Vec<Vec<f64>> = states.par_iter().map(|s| coords.of_vector(&s.vector())).collect();
        let r = rank(&rows, full);
        if r >= full {
            return Ok(SpanningDesign { dims: dims.to_vec(), states, rank: r, seed });
        }
        if states.len() >= MAX_GROWTH * budget {
            return Err(Error::Precondition(format!(
                "design rank {r} < {full} after {} states (non-generic seed)",
                states.len()
            )));
        }
        let more = draw(full.min(MAX_GROWTH * budget - states.len()));
        states.extend(more);
    }
}

/// Wraps given states (e.g. the sample points of a table) as a design,
/// failing when they do not span the operator space.
pub fn design_from_states(dims: &[usize], states: Vec<ProductState>, seed: u64) -> Result<SpanningDesign> {
    if let Some(s) = states.iter().find(|s| s.dims() != dims) {
        return Err(Error::DimensionMismatch { expected: dims.to_vec(), got: s.dims() });
    }
    let coords = HermitianCoordinates::new(dims);
    let rows: Vec<Vec<f64>> = states.par_iter().map(|s| coords.of_vector(&s.vector())).collect();
    let r = rank(&rows, coords.len());
    if r < coords.len() {
        return Err(Error::Precondition(format!("{} states reach rank {r} of {}", states.len(), coords.len())));
    }
    Ok(SpanningDesign { dims: dims.to_vec(), states, rank: r, seed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Positivity {
    DensityMatrix,
    ProductPositiveOnly,
    IndefiniteOnProducts,
}

impl Positivity {
    pub fn label(self) -> &'static str {
        match self {
            Self::DensityMatrix => "DENSITY_MATRIX",
            Self::ProductPositiveOnly => "PRODUCT_POSITIVE_ONLY",
            Self::IndefiniteOnProducts => "INDEFINITE_ON_PRODUCTS",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PositivityReport {
    pub classification: Positivity,
    pub min_eigenvalue: f64,
    /// Smallest product-state value found by the see-saw; the state is the witness.
    pub product_minimum: ProductMinimum,
}

impl PositivityReport {
    pub fn to_json(&self) -> Value {
        json!({
            "classification": self.classification.label(),
            "min_eigenvalue": self.min_eigenvalue,
            "psd_tolerance": PSD_TOL,
            "product_minimum": self.product_minimum.value,
            "product_tolerance": PRODUCT_TOL,
            "witness": ProductStateJson::from(&self.product_minimum.state),
        })
    }
}

/// Density matrix if PSD with unit trace; otherwise product-positive or not
/// according to the see-saw minimum over product states.
pub fn classify_product_positivity(t: &HermitianOperator, restarts: usize, seed: u64) -> Result<PositivityReport> {
    let min_eigenvalue = t.min_eigenvalue();
    let product_minimum = minimize_product_expectation(t, restarts, seed)?;
    let classification = if min_eigenvalue >= -PSD_TOL && (t.trace() - 1.0).abs() <= 1e-8 {
        Positivity::DensityMatrix
    } else if product_minimum.value >= -PRODUCT_TOL {
        Positivity::ProductPositiveOnly
    } else {
        Positivity::IndefiniteOnProducts
    };
    Ok(PositivityReport { classification, min_eigenvalue, product_minimum })
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub t: HermitianOperator,
    /// Max absolute deviation on held-out samples (training samples when
    /// nothing is held out).
    pub residual: f64,
    pub training_residual: f64,
    pub positivity: PositivityReport,
    pub rank: usize,
    pub flags: Vec<String>,
}

impl Reconstruction {
    pub fn classification(&self) -> Positivity {
        self.positivity.classification
    }

    pub fn to_json(&self) -> Value {
        json!({
            "t": OperatorJson::from(&self.t),
            "trace": self.t.trace(),
            "residual": self.residual,
            "residual_tolerance": ANOMALY_RESIDUAL,
            "training_residual": self.training_residual,
            "rank": self.rank,
            "classification": self.positivity.classification.label(),
            "min_eigenvalue": self.positivity.min_eigenvalue,
            "witness": {
                "value": self.positivity.product_minimum.value,
                "state": ProductStateJson::from(&self.positivity.product_minimum.state),
            },
            "flags": self.flags,
        })
    }
}

fn max_deviation(rows: &[Vec<f64>], values: &[f64], x: &[f64]) -> f64 {
    rows.iter().zip(values).map(|(r, v)| (dot(r, x) - v).abs()).fold(0.0, f64::max)
}

fn solve(
    dims: &[usize],
    rows: Vec<Vec<f64>>,
    values: Vec<f64>,
    holdout: usize,
    seed: u64,
    mut flags: Vec<String>,
) -> Result<Reconstruction> {
    let coords = HermitianCoordinates::new(dims);
    let split = rows.len() - holdout;
    let (train_rows, test_rows) = rows.split_at(split);
    let (train_vals, test_vals) = values.split_at(split);
    let fit = lstsq_normal(train_rows, train_vals, coords.len())?;
    let t = coords.operator(&fit.x)?;
    let training_residual = max_deviation(train_rows, train_vals, &fit.x);
    let residual = if test_rows.is_empty() { training_residual } else { max_deviation(test_rows, test_vals, &fit.x) };
    if residual > ANOMALY_RESIDUAL {
        flags.push(format!("anomaly: residual {residual:e} exceeds {ANOMALY_RESIDUAL:e}"));
    }
    let positivity = classify_product_positivity(&t, DEFAULT_RESTARTS, seed)?;
    Ok(Reconstruction { t, residual, training_residual, positivity, rank: fit.rank, flags })
}

/// Least-squares inversion of `f(s) = <s|t|s>` over the design. The last
/// `ceil(holdout · N)` design states are held out for the residual.
pub fn reconstruct_pvm(f: &FrameFunction, design: &SpanningDesign, holdout: f64) -> Result<Reconstruction> {
    let dims = f.dims();
    if dims != design.dims {
        return Err(Error::DimensionMismatch { expected: dims, got: design.dims.clone() });
    }
    if dims.len() != 2 {
        return usage("reconstruction is defined for two sites");
    }
    if dims.iter().any(|&d| d < 3) {
        return usage(format!("projective reconstruction needs local dimension >= 3, got {dims:?}; use the effect path"));
    }
    if !(0.0..1.0).contains(&holdout) {
        return usage("holdout fraction must lie in [0, 1)");
    }
    let coords = HermitianCoordinates::new(&dims);
    let held = (holdout * design.states.len() as f64).ceil() as usize;
    let values = design.states.par_iter().map(|s| evaluate(f, s)).collect::<Result<Vec<f64>>>()?;
    let rows = design.states.par_iter().map(|s| coords.of_vector(&s.vector())).collect();
    let mut flags = Vec::new();
    if matches!(f, FrameFunction::Tabulated(_)) {
        flags.push("tabulated input: values off the design are not constrained".to_string());
    }
    solve(&dims, rows, values, held, design.seed, flags)
}

/// A product effect `e_1 ⊗ e_2 ⊗ …` with its frame-function value.
#[derive(Clone, Debug)]
pub struct EffectSample {
    pub factors: Vec<HermitianOperator>,
    pub value: f64,
}

fn effect_matrix(factors: &[HermitianOperator]) -> Matrix {
    let mut m = factors[0].matrix().clone();
    for f in &factors[1..] {
        m = m.kron(f.matrix());
    }
    m
}

fn check_effect(e: &HermitianOperator) -> Result<()> {
    let spec = e.spectrum();
    let hi = spec.eigenvalues.first().copied().unwrap_or(0.0);
    let lo = spec.eigenvalues.last().copied().unwrap_or(0.0);
    if lo < -PSD_TOL || hi > 1.0 + PSD_TOL {
        return invalid(format!("effect spectrum [{lo}, {hi}] leaves [0, 1]"));
    }
    Ok(())
}

/// Least-squares inversion of `f(e) = tr(t e)` over product effects; the
/// residual is the max deviation over all samples.
pub fn reconstruct_povm(samples: &[EffectSample], dims: &[usize], seed: u64) -> Result<Reconstruction> {
    if dims.len() != 2 || dims.contains(&0) {
        return usage("effect reconstruction is defined for two sites");
    }
    let coords = HermitianCoordinates::new(dims);
    for s in samples {
        let got: Vec<usize> = s.factors.iter().map(HermitianOperator::dim).collect();
        if got != dims {
            return Err(Error::DimensionMismatch { expected: dims.to_vec(), got });
        }
        for e in &s.factors {
            check_effect(e)?;
        }
    }
    let rows = samples.par_iter().map(|s| coords.of_operator(&effect_matrix(&s.factors))).collect();
    let values = samples.iter().map(|s| s.value).collect();
    solve(dims, rows, values, 0, seed, Vec::new())
}

/// The four qubit effects `(I + n·σ)/4` of a tetrahedral SIC.
pub fn sic_effects() -> Vec<HermitianOperator> {
    let s = 1.0 / 3f64.sqrt();
    let dirs = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
    let p = crate::fixtures::paulis();
    dirs.iter()
        .map(|n| {
            let m = p[0]
                .add(&p[1].scale(n[0].into()))
                .add(&p[2].scale(n[1].into()))
                .add(&p[3].scale(n[2].into()))
                .scale(0.25.into());
            HermitianOperator::new(vec![2], m).expect("Hermitian")
        })
        .collect()
}

/// Random effect `U diag(λ) U*` with `λ` uniform in `[0, 1]`.
fn random_effect(d: usize, rng: &mut crate::random::SeededRng) -> HermitianOperator {
    use rand::Rng;
    let basis: Vec<ComplexVector> = orthonormal_basis(d, rng);
    let mut m = Matrix::zeros(d, d);
    for u in &basis {
        let l: f64 = rng.gen_range(0.0..=1.0);
        m = m.add(&Matrix::outer(u, u).scale(l.into()));
    }
    HermitianOperator::new(vec![d], m).expect("Hermitian")
}

/// Products of local effects: all SIC products when both sites are qubits,
/// followed by `extra` random product effects.
pub fn effect_design(dims: &[usize], extra: usize, seed: u64) -> Vec<Vec<HermitianOperator>> {
    let mut out = Vec::new();
    if dims == [2, 2] {
        let sic = sic_effects();
        for a in &sic {
            for b in &sic {
                out.push(vec![a.clone(), b.clone()]);
            }
        }
    }
    let mut rng = substream(seed, 1);
    for _ in 0..extra {
        out.push(dims.iter().map(|&d| random_effect(d, &mut rng)).collect());
    }
    out
}

/// `tr(t e)` on each product effect.
pub fn sample_effects(t: &HermitianOperator, design: &[Vec<HermitianOperator>]) -> Vec<EffectSample> {
    design
        .par_iter()
        .map(|factors| EffectSample { factors: factors.clone(), value: t.matrix().matmul(&effect_matrix(factors)).trace().re })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{phi_plus, singlet, swap};
    use crate::framefn::{make_signalling_example, sample_from_operator};
    use crate::random::{density_matrix, hermitian};

    #[test]
    fn design_ranks() {
        let d = spanning_design(&[3, 3], 1.5, 1).unwrap();
        assert_eq!((d.states.len(), d.rank), (122, 81));
        assert_eq!(spanning_design(&[2, 2], 1.5, 2).unwrap().rank, 16);
        assert_eq!(spanning_design(&[1, 1], 1.0, 3).unwrap().rank, 1);
    }

    #[test]
    fn density_matrix_round_trip() {
        let mut rng = rng_from_seed(17);
        let rho = density_matrix(&[3, 3], &mut rng);
        let design = spanning_design(&[3, 3], 1.5, 4).unwrap();
        let r = reconstruct_pvm(&FrameFunction::from_operator(rho.clone()), &design, DEFAULT_HOLDOUT).unwrap();
        assert!(r.t.matrix().sub(rho.matrix()).frobenius_norm() <= 1e-8);
        assert_eq!(r.classification(), Positivity::DensityMatrix);
        assert!((r.t.trace() - 1.0).abs() <= 1e-8);
        assert!(r.flags.is_empty());
    }

    #[test]
    fn partially_transposed_projector() {
        let t = phi_plus(3).partial_transpose(1).unwrap();
        assert!((t.min_eigenvalue() + 1.0 / 3.0).abs() < 1e-10);
        let design = spanning_design(&[3, 3], 1.5, 5).unwrap();
        let f = sample_from_operator(&t, &design.states, false).unwrap();
        let r = reconstruct_pvm(&f, &design, DEFAULT_HOLDOUT).unwrap();
        assert!(r.residual <= 1e-8);
        assert!(r.t.matrix().max_abs_diff(t.matrix()) <= 1e-8);
        assert_eq!(r.classification(), Positivity::ProductPositiveOnly);
        assert!(r.flags.iter().any(|f| f.starts_with("tabulated")));
    }

    #[test]
    fn signalling_family_leaves_a_residual() {
        let ex = make_signalling_example(&[3, 3], std::f64::consts::FRAC_PI_4).unwrap();
        let design = spanning_design(&[3, 3], 1.5, 6).unwrap();
        let r = reconstruct_pvm(&ex.f, &design, DEFAULT_HOLDOUT).unwrap();
        assert!(r.residual > 1e-3, "{}", r.residual);
        assert!(r.flags.iter().any(|f| f.starts_with("anomaly")));
    }

    #[test]
    fn qubits_need_the_effect_path() {
        let design = spanning_design(&[2, 2], 1.5, 2).unwrap();
        let f = FrameFunction::from_operator(singlet());
        assert!(matches!(reconstruct_pvm(&f, &design, 0.2), Err(Error::Usage(_))));
    }

    #[test]
    fn effect_path_examples() {
        let design = effect_design(&[2, 2], 16, 3);
        let r = reconstruct_povm(&sample_effects(&singlet(), &design), &[2, 2], 3).unwrap();
        assert!(r.t.matrix().max_abs_diff(singlet().matrix()) <= 1e-8);

        let flat: Vec<EffectSample> = design
            .iter()
            .map(|f| EffectSample { factors: f.clone(), value: effect_matrix(f).trace().re / 4.0 })
            .collect();
        let r = reconstruct_povm(&flat, &[2, 2], 3).unwrap();
        assert!(r.t.matrix().max_abs_diff(HermitianOperator::maximally_mixed(vec![2, 2]).matrix()) <= 1e-10);

        let half_swap = swap(2).scale(0.5);
        let r = reconstruct_povm(&sample_effects(&half_swap, &design), &[2, 2], 3).unwrap();
        assert!(r.t.matrix().max_abs_diff(half_swap.matrix()) <= 1e-8);
        assert_eq!(r.classification(), Positivity::ProductPositiveOnly);
    }

    #[test]
    fn effect_outside_unit_interval_rejected() {
        let big = HermitianOperator::identity(vec![2]).scale(1.5);
        let s = EffectSample { factors: vec![big.clone(), big], value: 1.0 };
        assert!(matches!(reconstruct_povm(&[s], &[2, 2], 0), Err(Error::Validation(_))));
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_product_positivity(&phi_plus(2), 16, 1).unwrap().classification, Positivity::DensityMatrix);
        let sw = classify_product_positivity(&swap(2).scale(0.5), 16, 1).unwrap();
        assert_eq!(sw.classification, Positivity::ProductPositiveOnly);
        assert!(sw.product_minimum.value.abs() < 1e-10);
        let shifted = swap(2).scale(0.5).sub(&HermitianOperator::identity(vec![2, 2]).scale(0.3)).unwrap();
        let r = classify_product_positivity(&shifted, 16, 1).unwrap();
        assert_eq!(r.classification, Positivity::IndefiniteOnProducts);
        assert!(r.product_minimum.value <= -0.05);
    }

    #[test]
    fn general_hermitian_round_trip() {
        let mut rng = rng_from_seed(33);
        let t = hermitian(&[3, 4], &mut rng);
        let coords = HermitianCoordinates::new(&[3, 4]);
        let design = spanning_design(&[3, 4], 1.3, 7).unwrap();
        let rows: Vec<Vec<f64>> = design.states.iter().map(|s| coords.of_vector(&s.vector())).collect();
        let vals: Vec<f64> = design.states.iter().map(|s| t.expectation(&s.vector())).collect();
        let fit = lstsq_normal(&rows, &vals, coords.len()).unwrap();
        assert!(coords.operator(&fit.x).unwrap().matrix().sub(t.matrix()).frobenius_norm() <= 1e-8);
    }
}
