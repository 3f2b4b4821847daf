//! Real coordinates on Hermitian operators.
//!
//! The basis is orthonormal in the Hilbert-Schmidt inner product:
//! `E_kk`, `(E_kl + E_lk)/√2` and `i(E_kl - E_lk)/√2` for `k < l`. A feature
//! vector of an operator `e` lists `tr(B_m e)`, so `tr(t e) = x · feature(e)`
//! whenever `t = Σ x_m B_m`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::{ComplexVector, HermitianOperator, Matrix};

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianCoordinates {
    dims: Vec<usize>,
    d: usize,
}

impl HermitianCoordinates {
    pub fn new(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), d: dims.iter().product() }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of real coordinates, `D²`.
    pub fn len(&self) -> usize {
        self.d * self.d
    }

    pub fn is_empty(&self) -> bool {
        self.d == 0
    }

    fn fill(&self, entry: impl Fn(usize, usize) -> Complex<f64>) -> Vec<f64> {
        let d = self.d;
        let mut out = Vec::with_capacity(d * d);
        for k in 0..d {
            out.push(entry(k, k).re);
        }
        for k in 0..d {
            for l in k + 1..d {
                let e = entry(k, l);
                out.push(2.0 * INV_SQRT2 * e.re);
                out.push(2.0 * INV_SQRT2 * e.im);
            }
        }
        out
    }

    /// Features of the rank-one projector onto `v` (need not be normalized).
    pub fn of_vector(&self, v: &ComplexVector) -> Vec<f64> {
        let e = v.entries();
        self.fill(|k, l| e[k] * e[l].conj())
    }

    pub fn of_operator(&self, e: &Matrix) -> Vec<f64> {
        self.fill(|k, l| e[(k, l)])
    }

    /// Coordinates of a Hermitian operator (inverse of `operator`).
    pub fn coordinates(&self, t: &HermitianOperator) -> Vec<f64> {
        self.of_operator(t.matrix())
    }

    pub fn operator(&self, x: &[f64]) -> Result<HermitianOperator> {
        if x.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: vec![self.len()], got: vec![x.len()] });
        }
        let d = self.d;
        let mut m = Matrix::zeros(d, d);
        for k in 0..d {
            m[(k, k)] = Complex::new(x[k], 0.0);
        }
        let mut idx = d;
        for k in 0..d {
            for l in k + 1..d {
                let (s, a) = (x[idx] * INV_SQRT2, x[idx + 1] * INV_SQRT2);
                m[(k, l)] = Complex::new(s, a);
                m[(l, k)] = Complex::new(s, -a);
                idx += 2;
            }
        }
        HermitianOperator::new(self.dims.clone(), m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::random::{hermitian, rng_from_seed, unit_vector};

    #[test]
    fn features_reproduce_expectations() {
        let mut rng = rng_from_seed(4);
        let t = hermitian::<f64, _>(&[2, 3], &mut rng);
        let c = HermitianCoordinates::new(&[2, 3]);
        let x = c.coordinates(&t);
        assert!(c.operator(&x).unwrap().matrix().max_abs_diff(t.matrix()) < 1e-14);
        for _ in 0..5 {
            let v: ComplexVector = unit_vector(6, &mut rng);
            assert!((dot(&x, &c.of_vector(&v)) - t.expectation(&v)).abs() < 1e-12);
            let e = HermitianOperator::projector(vec![6], &v).unwrap();
            assert!((dot(&x, &c.of_operator(e.matrix())) - t.trace_product(&e)).abs() < 1e-12);
        }
    }

    #[test]
    fn coordinates_are_hilbert_schmidt_isometric() {
        let mut rng = rng_from_seed(8);
        let t = hermitian::<f64, _>(&[3], &mut rng);
        let x = HermitianCoordinates::new(&[3]).coordinates(&t);
        assert!((dot(&x, &x).sqrt() - t.frobenius_norm()).abs() < 1e-12);
    }
}
