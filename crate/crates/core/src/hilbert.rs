//! Dense complex linear algebra over finite tensor-product Hilbert spaces.
//!
//! Everything here is generic over the real scalar (`f32` or `f64`). Matrices
//! are stored row-major; multi-site indices are laid out with site 0 as the
//! most significant digit, matching the usual Kronecker ordering.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::{invalid, usage, Result};
use crate::scalar::Real;

/// A finite complex vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector<T: Real> {
    entries: Vec<Complex<T>>,
}

impl<T: Real> ComplexVector<T> {
    pub fn new(entries: Vec<Complex<T>>) -> Result<Self> {
        if entries.is_empty() {
            return usage("vector must have at least one entry");
        }
        Ok(Self { entries })
    }

    pub fn from_real(entries: &[T]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| Complex::new(x, T::zero())).collect())
    }

    /// Computational basis vector `|k>` of dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut entries = vec![Complex::new(T::zero(), T::zero()); dim];
        entries[k] = Complex::new(T::one(), T::zero());
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Complex<T>> {
        self.entries
    }

    pub fn norm(&self) -> T {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - T::one()).abs() <= T::orthonormal_tol()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n <= T::epsilon() {
            return invalid("cannot normalize a zero vector");
        }
        Ok(self.scale(Complex::new(T::one() / n, T::zero())))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { entries: self.entries.iter().map(|&z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            entries: self.entries.iter().zip(&other.entries).map(|(&a, &b)| a + b).collect(),
        }
    }

    /// `<self|other>`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert_eq!(self.dim(), other.dim(), "inner product of unequal dimensions");
        self.entries
            .iter()
            .zip(&other.entries)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b)
    }

    /// Entrywise complex conjugate in the computational basis.
    pub fn conj(&self) -> Self {
        Self { entries: self.entries.iter().map(|z| z.conj()).collect() }
    }

    /// Same ray with the first nonzero amplitude made real and positive.
    pub fn canonical_phase(&self) -> Self {
        let cutoff = T::orthonormal_tol();
        match self.entries.iter().find(|z| z.norm() > cutoff) {
            Some(z) => {
                let phase = z.conj() / z.norm();
                let mut out = self.scale(phase);
                if let Some(first) = out.entries.iter_mut().find(|z| z.norm() > cutoff) {
                    first.im = T::zero();
                }
                out
            }
            None => self.clone(),
        }
    }
}

impl<T: Real> Index<usize> for ComplexVector<T> {
    type Output = Complex<T>;
    fn index(&self, i: usize) -> &Complex<T> {
        &self.entries[i]
    }
}

/// Kronecker product `v_1 ⊗ ... ⊗ v_n`.
pub fn tensor<T: Real>(factors: &[ComplexVector<T>]) -> Result<ComplexVector<T>> {
    let Some((first, rest)) = factors.split_first() else {
        return usage("tensor product of an empty factor list");
    };
    let mut acc = first.entries.clone();
    for f in rest {
        let mut next = Vec::with_capacity(acc.len() * f.dim());
        for &a in &acc {
            next.extend(f.entries.iter().map(|&b| a * b));
        }
        acc = next;
    }
    Ok(ComplexVector { entries: acc })
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::new(T::zero(), T::zero()); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { Complex::new(T::one(), T::zero()) } else { Complex::new(T::zero(), T::zero()) })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!("expected {} entries for a {rows}x{cols} matrix, got {}", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    /// `|v><w|`
    pub fn outer(v: &ComplexVector<T>, w: &ComplexVector<T>) -> Self {
        Self::from_fn(v.dim(), w.dim(), |i, j| v[i] * w[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(orow) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &ComplexVector<T>) -> ComplexVector<T> {
        assert_eq!(self.cols, v.dim());
        let entries = (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v.entries())
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (&a, &b)| acc + a * b)
            })
            .collect();
        ComplexVector { entries }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex::new(-T::one(), T::zero())))
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |i, j| {
            self[(i / other.rows, j / other.cols)] * other[(i % other.rows, j % other.cols)]
        })
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols)).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self[(i, i)])
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= T::hermitian_tol()
    }
}

impl<T: Real> Index<(usize, usize)> for Matrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Self-adjoint operator on `C^{d_1} ⊗ ... ⊗ C^{d_n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator<T: Real> {
    dims: Vec<usize>,
    matrix: Matrix<T>,
}

impl<T: Real> HermitianOperator<T> {
    /// Validates shape and Hermiticity, then stores the exactly symmetrized matrix.
    pub fn new(dims: Vec<usize>, matrix: Matrix<T>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if dims.iter().any(|&x| x == 0) {
            return invalid("local dimensions must be positive");
        }
        if matrix.rows() != d || matrix.cols() != d {
            return invalid(format!("dims {dims:?} need a {d}x{d} matrix, got {}x{}", matrix.rows(), matrix.cols()));
        }
        let defect = matrix.hermiticity_defect();
        if defect > T::hermitian_tol() {
            return invalid(format!("matrix is not Hermitian (defect {defect:e})"));
        }
        Ok(Self::symmetrized(dims, matrix))
    }

    fn symmetrized(dims: Vec<usize>, matrix: Matrix<T>) -> Self {
        let half = T::of(0.5);
        let sym = Matrix::from_fn(matrix.rows(), matrix.cols(), |i, j| {
            if i == j {
                Complex::new(matrix[(i, i)].re, T::zero())
            } else {
                (matrix[(i, j)] + matrix[(j, i)].conj()) * half
            }
        });
        Self { dims, matrix: sym }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let d = dims.iter().product();
        Self { dims, matrix: Matrix::zeros(d, d) }
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let d = dims.iter().product();
        Self { dims, matrix: Matrix::identity(d) }
    }

    /// `I / D`
    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d: usize = dims.iter().product();
        Self::identity(dims).scale(T::one() / T::of(d as f64))
    }

    /// `|v><v|` on the given factorization.
    pub fn projector(dims: Vec<usize>, v: &ComplexVector<T>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if v.dim() != d {
            return Err(crate::Error::DimensionMismatch { expected: vec![d], got: vec![v.dim()] });
        }
        Ok(Self::symmetrized(dims, Matrix::outer(v, v)))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.matrix
    }

    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }

    pub fn frobenius_norm(&self) -> T {
        self.matrix.frobenius_norm()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { dims: self.dims.clone(), matrix: self.matrix.scale(Complex::new(s, T::zero())) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self { dims: self.dims.clone(), matrix: self.matrix.add(&other.matrix) })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-T::one()))
    }

    fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims != other.dims {
            return Err(crate::Error::DimensionMismatch { expected: self.dims.clone(), got: other.dims.clone() });
        }
        Ok(())
    }

    /// `<v|A|v>`; the imaginary part is discarded (it is round-off for Hermitian `A`).
    pub fn expectation(&self, v: &ComplexVector<T>) -> T {
        v.inner(&self.matrix.apply(v)).re
    }

    /// `tr(A B)` for another operator on the same space.
    pub fn trace_product(&self, other: &Self) -> T {
        let d = self.dim();
        let mut acc = T::zero();
        for i in 0..d {
            for j in 0..d {
                acc = acc + (self.matrix[(i, j)] * other.matrix[(j, i)]).re;
            }
        }
        acc
    }

    /// Kronecker product of operators on disjoint factors.
    pub fn kron(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { dims, matrix: self.matrix.kron(&other.matrix) }
    }

    pub fn spectrum(&self) -> Spectrum<T> {
        jacobi_eigh(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> T {
        *self.spectrum().eigenvalues.last().expect("nonempty spectrum")
    }

    /// Transpose of tensor factor `site` in the computational basis.
    pub fn partial_transpose(&self, site: usize) -> Result<Self> {
        if site >= self.dims.len() {
            return usage(format!("site {site} out of range for {} factors", self.dims.len()));
        }
        let d = self.dim();
        let stride: usize = self.dims[site + 1..].iter().product();
        let ds = self.dims[site];
        let digit = |idx: usize| (idx / stride) % ds;
        let matrix = Matrix::from_fn(d, d, |i, j| {
            let (di, dj) = (digit(i), digit(j));
            let i2 = i - di * stride + dj * stride;
            let j2 = j - dj * stride + di * stride;
            self.matrix[(i2, j2)]
        });
        Ok(Self { dims: self.dims.clone(), matrix })
    }

    /// Trace over tensor factor `site`; the result acts on the remaining factors.
    pub fn partial_trace(&self, site: usize) -> Result<Self> {
        if site >= self.dims.len() {
            return usage(format!("site {site} out of range for {} factors", self.dims.len()));
        }
        let ds = self.dims[site];
        let inner: usize = self.dims[site + 1..].iter().product();
        let outer: usize = self.dims[..site].iter().product();
        let d_out = outer * inner;
        let full = |o: usize, k: usize, r: usize| (o * ds + k) * inner + r;
        let matrix = Matrix::from_fn(d_out, d_out, |i, j| {
            let (oi, ri) = (i / inner, i % inner);
            let (oj, rj) = (j / inner, j % inner);
            (0..ds).fold(Complex::new(T::zero(), T::zero()), |acc, k| acc + self.matrix[(full(oi, k, ri), full(oj, k, rj))])
        });
        let mut dims = self.dims.clone();
        dims.remove(site);
        Ok(Self { dims, matrix })
    }
}

/// Eigendecomposition of a Hermitian operator, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Vec<ComplexVector<T>>,
}

impl<T: Real> Spectrum<T> {
    /// `Σ λ_i |u_i><u_i|`
    pub fn reconstruct(&self) -> Matrix<T> {
        let d = self.eigenvectors.first().map_or(0, ComplexVector::dim);
        let mut out = Matrix::zeros(d, d);
        for (&l, u) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            out = out.add(&Matrix::outer(u, u).scale(Complex::new(l, T::zero())));
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.eigenvalues.iter().fold(T::zero(), |m, &l| m.max(l.abs()))
    }
}

pub fn hermitian_eig<T: Real>(a: &HermitianOperator<T>) -> Spectrum<T> {
    a.spectrum()
}

/// Eigendecomposition of a raw matrix, rejecting non-Hermitian input.
pub fn eigh<T: Real>(a: &Matrix<T>) -> Result<Spectrum<T>> {
    if !a.is_square() {
        return invalid("eigendecomposition needs a square matrix");
    }
    let defect = a.hermiticity_defect();
    if defect > T::hermitian_tol() {
        return invalid(format!("matrix is not Hermitian (defect {defect:e})"));
    }
    Ok(jacobi_eigh(a))
}

/// Cyclic complex Jacobi. Each rotation first removes the phase of the pivot
/// and then applies a real Givens rotation, so the iteration is fully
/// deterministic for identical input bits.
fn jacobi_eigh<T: Real>(input: &Matrix<T>) -> Spectrum<T> {
    let n = input.rows();
    let zero = Complex::new(T::zero(), T::zero());
    let mut a = input.clone();
    for i in 0..n {
        a[(i, i)].im = T::zero();
    }
    let mut v = Matrix::<T>::identity(n);
    let scale = input.frobenius_norm().max(T::min_positive_value());
    let tiny = T::epsilon() * T::epsilon() * scale * scale;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[(p, q)].norm_sqr();
            }
        }
        if off <= tiny {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let r = apq.norm();
                if r <= T::min_positive_value() || r * r <= tiny / T::of((n * n) as f64) {
                    continue;
                }
                let phase = apq / r; // e^{iφ}
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (T::of(2.0) * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // G = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                let gpp = Complex::new(c, T::zero());
                let gpq = Complex::new(s, T::zero());
                let gqp = phase.conj() * (-s);
                let gqq = phase.conj() * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * gpp + akq * gqp;
                    a[(k, q)] = akp * gpq + akq * gqq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = gpp.conj() * apk + gqp.conj() * aqk;
                    a[(q, k)] = gpq.conj() * apk + gqq.conj() * aqk;
                }
                a[(p, q)] = zero;
                a[(q, p)] = zero;
                a[(p, p)].im = T::zero();
                a[(q, q)].im = T::zero();
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * gpp + vkq * gqp;
                    v[(k, q)] = vkp * gpq + vkq * gqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.partial_cmp(&a[(i, i)].re).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| a[(i, i)].re).collect();
    let eigenvectors = order
        .iter()
        .map(|&i| ComplexVector { entries: (0..n).map(|k| v[(k, i)]).collect() })
        .collect();
    Spectrum { eigenvalues, eigenvectors }
}

/// Splits a flat index into per-site digits (site 0 most significant).
pub fn digits(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = idx % d;
        idx /= d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        Complex::new(re, im)
    }

    fn phi_plus() -> HermitianOperator<f64> {
        let s = 0.5f64.sqrt();
        let v = ComplexVector::from_real(&[s, 0.0, 0.0, s]).unwrap();
        HermitianOperator::projector(vec![2, 2], &v).unwrap()
    }

    fn swap(d: usize) -> HermitianOperator<f64> {
        let m = Matrix::from_fn(d * d, d * d, |i, j| {
            let (a, b) = (i / d, i % d);
            if j == b * d + a {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        HermitianOperator::new(vec![d, d], m).unwrap()
    }

    #[test]
    fn tensor_of_basis_vectors() {
        let z = ComplexVector::<f64>::basis(2, 0);
        let v = tensor(&[z.clone(), z.clone()]).unwrap();
        assert_eq!(v.entries(), &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);

        let s = 0.5f64.sqrt();
        let plus = ComplexVector::from_real(&[s, s]).unwrap();
        let v = tensor(&[plus, z]).unwrap();
        let expect = [s, 0.0, s, 0.0];
        for (a, b) in v.entries().iter().zip(expect) {
            assert!((a - c(b, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn tensor_of_nothing_is_usage_error() {
        assert!(matches!(tensor::<f64>(&[]), Err(crate::Error::Usage(_))));
    }

    #[test]
    fn diagonal_and_pauli_spectra() {
        let m = Matrix::from_fn(3, 3, |i, j| if i == j { c([1.0, 3.0, 2.0][i], 0.0) } else { c(0.0, 0.0) });
        let s = eigh(&m).unwrap();
        assert_eq!(s.eigenvalues, vec![3.0, 2.0, 1.0]);

        let x = Matrix::from_rows(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let s = eigh(&x).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14 && (s.eigenvalues[1] + 1.0).abs() < 1e-14);

        let s = phi_plus().spectrum();
        let expect = [1.0, 0.0, 0.0, 0.0];
        for (l, e) in s.eigenvalues.iter().zip(expect) {
            assert!((l - e).abs() < 1e-14);
        }
    }

    #[test]
    fn complex_offdiagonal_spectrum() {
        // Pauli-Y has eigenvalues ±1 and purely imaginary off-diagonals.
        let y = Matrix::from_rows(2, 2, vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        let s = eigh(&y).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!(s.reconstruct().max_abs_diff(&y) < 1e-14);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = Matrix::from_rows(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(matches!(eigh(&m), Err(crate::Error::Validation(_))));
        assert!(HermitianOperator::new(vec![2], m).is_err());
    }

    #[test]
    fn partial_transpose_of_phi_plus_is_half_swap() {
        let pt = phi_plus().partial_transpose(1).unwrap();
        assert!(pt.matrix().max_abs_diff(swap(2).scale(0.5).matrix()) < 1e-15);
        let s = pt.spectrum();
        let expect = [0.5, 0.5, 0.5, -0.5];
        for (l, e) in s.eigenvalues.iter().zip(expect) {
            assert!((l - e).abs() < 1e-14, "{:?}", s.eigenvalues);
        }
        assert_eq!(pt.partial_transpose(1).unwrap(), phi_plus());
        assert!(phi_plus().partial_transpose(2).is_err());
    }

    #[test]
    fn partial_transpose_of_product() {
        let a = Matrix::from_rows(2, 2, vec![c(1.0, 0.0), c(0.0, 2.0), c(0.0, -2.0), c(3.0, 0.0)]).unwrap();
        let b = Matrix::from_rows(3, 3, (0..9).map(|k| c(k as f64, 0.0)).collect()).unwrap();
        let b = b.add(&b.adjoint()).add(&Matrix::from_fn(3, 3, |i, j| if i < j { c(0.0, 1.0) } else if i > j { c(0.0, -1.0) } else { c(0.0, 0.0) }));
        let ab = HermitianOperator::new(vec![2, 3], a.kron(&b)).unwrap();
        let expect = a.kron(&b.transpose());
        assert!(ab.partial_transpose(1).unwrap().matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn partial_trace_examples() {
        let half_id = HermitianOperator::<f64>::maximally_mixed(vec![2]);
        let tr = phi_plus().partial_trace(1).unwrap();
        assert_eq!(tr.dims(), &[2]);
        assert!(tr.matrix().max_abs_diff(half_id.matrix()) < 1e-15);

        let a = HermitianOperator::new(vec![2], Matrix::from_rows(2, 2, vec![c(1.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(2.0, 0.0)]).unwrap()).unwrap();
        let b = HermitianOperator::<f64>::identity(vec![3]).scale(0.25);
        let tr = a.kron(&b).partial_trace(1).unwrap();
        assert!(tr.matrix().max_abs_diff(a.scale(0.75).matrix()) < 1e-15);
        let tr0 = a.kron(&b).partial_trace(0).unwrap();
        assert!(tr0.matrix().max_abs_diff(b.scale(3.0).matrix()) < 1e-15);
    }

    #[test]
    fn canonical_phase_is_idempotent() {
        let v = ComplexVector::new(vec![c(0.0, 0.0), c(0.0, 0.6), c(0.8, 0.0)]).unwrap();
        let cv = v.canonical_phase();
        assert_eq!(cv[1], c(0.6, 0.0));
        assert_eq!(cv.canonical_phase(), cv);
    }

    #[test]
    fn single_precision_path() {
        let x = Matrix::<f32>::from_rows(
            2,
            2,
            vec![Complex::new(0.0, 0.0), Complex::new(1.0, 0.0), Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)],
        )
        .unwrap();
        let s = eigh(&x).unwrap();
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-6);
        assert!((s.eigenvalues[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn digits_round_trip() {
        assert_eq!(digits(5, &[2, 3]), vec![1, 2]);
        assert_eq!(digits(0, &[4, 4, 4]), vec![0, 0, 0]);
    }
}
