//! Small dense real solvers: symmetric eigendecomposition, normal-equation
//! least squares and minimum-norm solves.

use crate::error::{Error, Result};

/// Eigenpairs of a real symmetric `n x n` matrix (row-major), descending.
pub fn sym_eig(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tiny = (f64::EPSILON * scale).powi(2);
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).map(|(p, q)| m[p * n + q].powi(2)).sum();
        if off <= tiny {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * kp - s * kq;
                    m[k * n + q] = s * kp + c * kq;
                }
                for k in 0..n {
                    let (pk, qk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * pk - s * qk;
                    m[q * n + k] = s * pk + c * qk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let (kp, kq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * kp - s * kq;
                    v[k * n + q] = s * kp + c * kq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let vals = order.iter().map(|&i| m[i * n + i]).collect();
    let vecs = order.iter().map(|&i| (0..n).map(|k| v[k * n + i]).collect()).collect();
    (vals, vecs)
}

/// Numerical rank of a set of rows (relative cutoff on the Gram spectrum).
pub fn rank(rows: &[Vec<f64>], cols: usize) -> usize {
    let (vals, _) = sym_eig(&gram(rows, cols), cols);
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    vals.iter().filter(|&&l| l > top * 1e-20 && l > 0.0).count().min(rows.len())
}

fn gram(rows: &[Vec<f64>], cols: usize) -> Vec<f64> {
    let mut g = vec![0.0; cols * cols];
    for r in rows {
        for i in 0..cols {
            if r[i] == 0.0 {
                continue;
            }
            for j in 0..cols {
                g[i * cols + j] += r[i] * r[j];
            }
        }
    }
    g
}

#[derive(Clone, Debug)]
pub struct LeastSquares {
    pub x: Vec<f64>,
    pub rank: usize,
    /// Ratio of extreme Gram eigenvalues.
    pub gram_condition: f64,
}

/// Full-rank least squares through the normal equations `FᵀF x = Fᵀy`
/// (rank checked on the Gram spectrum, solved by Cholesky).
pub fn lstsq_normal(rows: &[Vec<f64>], y: &[f64], cols: usize) -> Result<LeastSquares> {
    assert_eq!(rows.len(), y.len());
    let g = gram(rows, cols);
    let (vals, _) = sym_eig(&g, cols);
    let top = vals.first().copied().unwrap_or(0.0);
    let bottom = vals.last().copied().unwrap_or(0.0);
    let rank = vals.iter().filter(|&&l| l > top * 1e-20 && l > 0.0).count();
    if rank < cols || bottom <= top * 1e-20 {
        return Err(Error::Usage(format!("design is rank deficient: rank {rank} < {cols}")));
    }
    let mut rhs = vec![0.0; cols];
    for (r, &yi) in rows.iter().zip(y) {
        for (acc, &ri) in rhs.iter_mut().zip(r) {
            *acc += ri * yi;
        }
    }
    let x = cholesky_solve(&g, cols, &rhs)?;
    Ok(LeastSquares { x, rank, gram_condition: top / bottom })
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Usage("matrix is not positive definite".into()));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * n + i];
    }
    Ok(x)
}

/// Minimum-norm least-squares solution `x = Fᵀ (F Fᵀ)⁺ y`.
pub fn min_norm_solve(rows: &[Vec<f64>], y: &[f64], cols: usize) -> Vec<f64> {
    let m = rows.len();
    let mut g = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            g[i * m + j] = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
        }
    }
    let (vals, vecs) = sym_eig(&g, m);
    let top = vals.first().copied().unwrap_or(0.0);
    let mut coef = vec![0.0; m];
    for (l, u) in vals.iter().zip(&vecs) {
        if *l <= top * 1e-12 || *l <= 0.0 {
            continue;
        }
        let proj: f64 = u.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / l;
        for (c, ui) in coef.iter_mut().zip(u) {
            *c += proj * ui;
        }
    }
    let mut x = vec![0.0; cols];
    for (r, c) in rows.iter().zip(&coef) {
        for (xi, ri) in x.iter_mut().zip(r) {
            *xi += c * ri;
        }
    }
    x
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_eig_2x2() {
        let (vals, vecs) = sym_eig(&[2.0, 1.0, 1.0, 2.0], 2);
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        assert!((vecs[0][0].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn overdetermined_fit() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let sol = lstsq_normal(&rows, &[1.0, 2.0, 3.0], 2).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] - 2.0).abs() < 1e-14);
        assert_eq!(sol.rank, 2);
    }

    #[test]
    fn rank_deficient_rejected() {
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(lstsq_normal(&rows, &[1.0, 2.0], 2).is_err());
        assert_eq!(rank(&rows, 2), 1);
    }

    #[test]
    fn min_norm_picks_shortest() {
        let rows = vec![vec![1.0, 1.0]];
        let x = min_norm_solve(&rows, &[2.0], 2);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
