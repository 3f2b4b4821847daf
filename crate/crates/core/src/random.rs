//! Seeded sampling of states, bases and operators.
//!
//! All randomness comes from a ChaCha stream keyed by a single `u64` seed, so
//! every experiment is reproducible across platforms.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hilbert::{ComplexVector, HermitianOperator, Matrix};
use crate::scalar::Real;

pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::of(re), T::of(im))
}

/// Haar-random unit vector.
pub fn unit_vector<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexVector<T> {
    loop {
        let v = ComplexVector::new((0..dim).map(|_| gaussian(rng)).collect()).expect("dim > 0");
        if let Ok(u) = v.normalized() {
            return u.canonical_phase();
        }
    }
}

/// Haar-random orthonormal basis (Gram-Schmidt on Gaussian vectors).
pub fn orthonormal_basis<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<ComplexVector<T>> {
    let mut basis: Vec<ComplexVector<T>> = Vec::with_capacity(dim);
    while basis.len() < dim {
        let mut v = ComplexVector::new((0..dim).map(|_| gaussian(rng)).collect()).expect("dim > 0");
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let ov = b.inner(&v);
                v = v.add(&b.scale(-ov));
            }
        }
        if v.norm() > T::of(1e-6) {
            basis.push(v.normalized().expect("nonzero").canonical_phase());
        }
    }
    basis
}

/// Ginibre-distributed density matrix `G G* / tr(G G*)`.
pub fn density_matrix<T: Real, R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> HermitianOperator<T> {
    let d: usize = dims.iter().product();
    let g = Matrix::from_fn(d, d, |_, _| gaussian(rng));
    let rho = g.matmul(&g.adjoint());
    let tr = rho.trace().re;
    HermitianOperator::new(dims.to_vec(), rho.scale(Complex::new(T::one() / tr, T::zero()))).expect("G G* is Hermitian")
}

/// Gaussian Hermitian operator (GUE-like, unnormalized).
pub fn hermitian<T: Real, R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> HermitianOperator<T> {
    let d: usize = dims.iter().product();
    let g = Matrix::from_fn(d, d, |_, _| gaussian(rng));
    let h = g.add(&g.adjoint()).scale(Complex::new(T::of(0.5), T::zero()));
    HermitianOperator::new(dims.to_vec(), h).expect("symmetrized")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bases_are_orthonormal() {
        let mut rng = rng_from_seed(1);
        let b = orthonormal_basis::<f64, _>(5, &mut rng);
        for (i, u) in b.iter().enumerate() {
            for (j, v) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((u.inner(v) - Complex::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn density_matrices_are_states() {
        let mut rng = rng_from_seed(2);
        let rho = density_matrix::<f64, _>(&[3, 3], &mut rng);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
        assert!(rho.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn seeds_reproduce() {
        let a = unit_vector::<f64, _>(4, &mut rng_from_seed(9));
        let b = unit_vector::<f64, _>(4, &mut rng_from_seed(9));
        assert_eq!(a, b);
    }
}
