//! Standard operators used throughout the examples and tests.

use num_complex::Complex;

use crate::{ComplexVector, HermitianOperator, Matrix};

/// `|Φ+><Φ+|` on `C^d ⊗ C^d` with `|Φ+> = Σ_k |kk> / √d`.
pub fn phi_plus(d: usize) -> HermitianOperator {
    let amp = 1.0 / (d as f64).sqrt();
    let v = ComplexVector::new((0..d * d).map(|i| if i / d == i % d { Complex::new(amp, 0.0) } else { Complex::new(0.0, 0.0) }).collect())
        .expect("d > 0");
    HermitianOperator::projector(vec![d, d], &v).expect("dims match")
}

/// The swap operator on `C^d ⊗ C^d`.
pub fn swap(d: usize) -> HermitianOperator {
    let m = Matrix::from_fn(d * d, d * d, |i, j| {
        if j == (i % d) * d + i / d {
            Complex::new(1.0, 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    HermitianOperator::new(vec![d, d], m).expect("swap is Hermitian")
}

/// The singlet `(|01> - |10>)/√2` as a density matrix.
pub fn singlet() -> HermitianOperator {
    let s = 0.5f64.sqrt();
    let v = ComplexVector::from_real(&[0.0, s, -s, 0.0]).expect("nonempty");
    HermitianOperator::projector(vec![2, 2], &v).expect("dims match")
}

/// Pauli matrices `[I, X, Y, Z]`.
pub fn paulis() -> [Matrix; 4] {
    let c = |re: f64, im: f64| Complex::new(re, im);
    let m = |d: [Complex<f64>; 4]| Matrix::from_rows(2, 2, d.to_vec()).expect("2x2");
    [
        m([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
        m([c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        m([c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
        m([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
    ]
}

/// Looks up an operator by name: `singlet`, `phi-plus`, `half-swap`,
/// `mixed2`, `mixed3`, `phi-plus3-pt` and `orientation-mix`.
pub fn named(name: &str) -> Option<HermitianOperator> {
    Some(match name {
        "singlet" => singlet(),
        "phi-plus" => phi_plus(2),
        "half-swap" => swap(2).scale(0.5),
        "mixed2" => HermitianOperator::maximally_mixed(vec![2, 2]),
        "mixed3" => HermitianOperator::maximally_mixed(vec![3, 3]),
        "phi-plus3-pt" => phi_plus(3).partial_transpose(1).expect("two sites"),
        "orientation-mix" => phi_plus(2).add(&swap(2).scale(0.5)).expect("same dims").scale(0.5),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_is_partial_transpose_of_phi_plus() {
        for d in 2..4 {
            let pt = phi_plus(d).partial_transpose(1).unwrap();
            assert!(pt.matrix().max_abs_diff(swap(d).scale(1.0 / d as f64).matrix()) < 1e-15);
        }
    }

    #[test]
    fn singlet_is_antisymmetric() {
        let s = singlet();
        assert!((s.trace_product(&swap(2)) + 1.0).abs() < 1e-15);
    }
}
