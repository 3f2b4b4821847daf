//! Alternating minimization of `<x|t|x>` over product states `x`.
//!
//! Each step fixes every factor but one and replaces it by the lowest
//! eigenvector of the resulting local operator, so the value never increases.
//! Restarts run in parallel from independent seeded substreams.

use num_complex::Complex;
use rayon::prelude::*;

use crate::bases::ProductState;
use crate::error::{usage, Result};
use crate::hilbert::{eigh, tensor};
use crate::random::{substream, unit_vector};
use crate::{ComplexVector, HermitianOperator, Matrix};

pub const DEFAULT_RESTARTS: usize = 64;
const MAX_SWEEPS: usize = 500;
const STALL: f64 = 1e-15;

#[derive(Clone, Debug)]
pub struct ProductMinimum {
    pub value: f64,
    pub state: ProductState,
    /// Restart that produced the minimum.
    pub restart: usize,
}

fn local_operator(t: &HermitianOperator, factors: &[ComplexVector], site: usize) -> Matrix {
    let d = factors[site].dim();
    let mut probes = Vec::with_capacity(d);
    for i in 0..d {
        let mut fs = factors.to_vec();
        fs[site] = ComplexVector::basis(d, i);
        probes.push(tensor(&fs).expect("non-empty"));
    }
    let images: Vec<ComplexVector> = probes.iter().map(|u| t.matrix().apply(u)).collect();
    Matrix::from_fn(d, d, |i, j| probes[i].inner(&images[j]))
}

fn descend(t: &HermitianOperator, mut factors: Vec<ComplexVector>) -> (f64, Vec<ComplexVector>) {
    let mut value = t.expectation(&tensor(&factors).expect("non-empty"));
    for _ in 0..MAX_SWEEPS {
        let before = value;
        for site in 0..factors.len() {
            let m = local_operator(t, &factors, site);
            let m = m.add(&m.adjoint()).scale(Complex::new(0.5, 0.0));
            let spec = eigh(&m).expect("symmetrized");
            let last = spec.eigenvalues.len() - 1;
            factors[site] = spec.eigenvectors[last].canonical_phase();
            value = spec.eigenvalues[last];
        }
        if (before - value).abs() <= STALL * (1.0 + value.abs()) {
            break;
        }
    }
    (value, factors)
}

/// Smallest product-state expectation found from `restarts` random starts.
pub fn minimize_product_expectation(t: &HermitianOperator, restarts: usize, seed: u64) -> Result<ProductMinimum> {
    if restarts == 0 {
        return usage("see-saw needs at least one restart");
    }
    let dims = t.dims().to_vec();
    let runs: Vec<(f64, Vec<ComplexVector>)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k as u64);
            let start = dims.iter().map(|&d| unit_vector(d, &mut rng)).collect();
            descend(t, start)
        })
        .collect();
    let (restart, (value, factors)) = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.0.total_cmp(&b.0).then(i.cmp(j)))
        .expect("restarts > 0");
    let state = ProductState::new(factors)?;
    // report the value at the normalized state actually returned
    let value = value.min(t.expectation(&state.vector()));
    Ok(ProductMinimum { value, state, restart })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{phi_plus, swap};

    #[test]
    fn half_swap_reaches_zero() {
        let m = minimize_product_expectation(&swap(2).scale(0.5), 8, 1).unwrap();
        assert!(m.value.abs() < 1e-12);
        assert!(m.state.factor(0).inner(m.state.factor(1)).norm() < 1e-6);
    }

    #[test]
    fn product_minimum_of_shifted_swap() {
        let t = swap(3).scale(0.5).sub(&HermitianOperator::identity(vec![3, 3]).scale(0.3)).unwrap();
        let m = minimize_product_expectation(&t, 16, 2).unwrap();
        assert!((m.value + 0.3).abs() < 1e-10);
    }

    #[test]
    fn entangled_projector_is_product_positive() {
        let m = minimize_product_expectation(&phi_plus(3), 16, 3).unwrap();
        assert!(m.value > -1e-12 && m.value < 1e-10);
    }

    #[test]
    fn seeded_runs_repeat() {
        let t = swap(2).scale(0.5);
        let a = minimize_product_expectation(&t, 4, 9).unwrap();
        let b = minimize_product_expectation(&t, 4, 9).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.state, b.state);
    }
}
