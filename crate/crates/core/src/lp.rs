//! Dense two-phase simplex.
//!
//! `solve_standard` handles `min cᵀz, Az = b, z ≥ 0` and returns the optimal
//! duals. `maximize` handles the free-variable form used by the feasibility
//! problems (`max cᵀx, Gx ≥ h, Ex = e`) by solving its dual in standard form;
//! the primal solution is read off the simplex multipliers.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 200_000;
/// After this many non-improving pivots, switch to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct StandardSolution {
    pub status: LpStatus,
    pub z: Vec<f64>,
    pub objective: f64,
    /// Multipliers `π` with `Aᵀπ ≤ c` at optimality.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

struct Tableau {
    m: usize,
    n: usize,
    /// `m` rows of `n + m + 1` entries: original columns, artificials, rhs.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.n + self.m + 1
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let w = self.width() - 1;
        let mut d = cost.to_vec();
        for (r, row) in self.rows.iter().enumerate() {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for j in 0..w {
                    d[j] -= cb * row[j];
                }
            }
        }
        d
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width();
        let p = self.rows[r][j];
        for k in 0..w {
            self.rows[r][k] /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[j];
            if f != 0.0 {
                for k in 0..w {
                    row[k] -= f * pivot_row[k];
                }
                row[j] = 0.0;
            }
        }
        self.basis[r] = j;
        self.iterations += 1;
    }

    /// Runs simplex with `cost` over columns where `allowed` holds.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<LpStatus> {
        let rhs = self.width() - 1;
        let mut last = f64::INFINITY;
        let mut stalled = 0usize;
        loop {
            if self.iterations > MAX_ITERATIONS {
                return Err(Error::Unsupported("simplex iteration limit reached".into()));
            }
            let d = self.reduced_costs(cost);
            let bland = stalled >= DEGENERATE_LIMIT;
            let mut entering = None;
            let mut best = -PIVOT_TOL;
            for j in 0..rhs {
                if !allowed(j) || d[j] >= -PIVOT_TOL {
                    continue;
                }
                if bland {
                    entering = Some(j);
                    break;
                }
                if d[j] < best {
                    best = d[j];
                    entering = Some(j);
                }
            }
            let Some(j) = entering else { return Ok(LpStatus::Optimal) };
            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[j] > PIVOT_TOL {
                    let ratio = row[rhs] / row[j];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-12 || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else { return Ok(LpStatus::Unbounded) };
            self.pivot(r, j);
            let value: f64 = self.rows.iter().enumerate().map(|(i, row)| cost[self.basis[i]] * row[rhs]).sum();
            if value < last - 1e-12 {
                last = value;
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
    }
}

/// `min cᵀz s.t. Az = b, z ≥ 0` with `A` given as rows.
pub fn solve_standard(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<StandardSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(Error::Usage("inconsistent LP dimensions".into()));
    }
    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut rows = Vec::with_capacity(m);
    for r in 0..m {
        let mut row = vec![0.0; n + m + 1];
        for j in 0..n {
            row[j] = sign[r] * a[r][j];
        }
        row[n + r] = 1.0;
        row[n + m] = sign[r] * b[r];
        rows.push(row);
    }
    let mut tab = Tableau { m, n, rows, basis: (n..n + m).collect(), iterations: 0 };

    let mut phase1 = vec![0.0; n + m];
    for c1 in phase1.iter_mut().skip(n) {
        *c1 = 1.0;
    }
    tab.optimize(&phase1, &|_| true)?;
    let infeasibility: f64 = tab.rows.iter().enumerate().filter(|(r, _)| tab.basis[*r] >= n).map(|(_, row)| row[n + m]).sum();
    let scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if infeasibility > 1e-7 * scale {
        return Ok(StandardSolution {
            status: LpStatus::Infeasible,
            z: vec![0.0; n],
            objective: f64::NAN,
            duals: vec![0.0; m],
            iterations: tab.iterations,
        });
    }
    // drive zero-level artificials out of the basis where possible
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(j) = (0..n).find(|&j| tab.rows[r][j].abs() > PIVOT_TOL) {
                tab.pivot(r, j);
            }
        }
    }

    let mut phase2 = vec![0.0; n + m];
    phase2[..n].copy_from_slice(c);
    let status = tab.optimize(&phase2, &|j| j < n)?;
    let mut z = vec![0.0; n];
    for (r, &j) in tab.basis.iter().enumerate() {
        if j < n {
            z[j] = tab.rows[r][n + m];
        }
    }
    let objective = c.iter().zip(&z).map(|(ci, zi)| ci * zi).sum();
    // π' = c_Bᵀ B⁻¹, with B⁻¹ sitting in the artificial columns
    let mut duals = vec![0.0; m];
    for (r, &j) in tab.basis.iter().enumerate() {
        let cb = phase2[j];
        if cb != 0.0 {
            for (k, d) in duals.iter_mut().enumerate() {
                *d += cb * tab.rows[r][n + k];
            }
        }
    }
    for (d, s) in duals.iter_mut().zip(&sign) {
        *d *= s;
    }
    Ok(StandardSolution { status, z, objective, duals, iterations: tab.iterations })
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    /// Multipliers of the inequality rows (non-negative); they certify the
    /// optimum as a combination of active constraints.
    pub inequality_weights: Vec<f64>,
    pub iterations: usize,
}

/// `max cᵀx s.t. g_k·x ≥ h_k, e_j·x = f_j`, `x` free.
pub fn maximize(c: &[f64], inequalities: &[(Vec<f64>, f64)], equalities: &[(Vec<f64>, f64)]) -> Result<LpSolution> {
    let nx = c.len();
    let ni = inequalities.len();
    let ne = equalities.len();
    // dual: min Σ f_j(μ⁺-μ⁻)_j - Σ h_k λ_k  s.t.  Σ e_j (μ⁺-μ⁻)_j - Σ g_k λ_k = c
    let cols = ni + 2 * ne;
    let mut a = vec![vec![0.0; cols]; nx];
    let mut cost = vec![0.0; cols];
    for (k, (g, h)) in inequalities.iter().enumerate() {
        cost[k] = -h;
        for i in 0..nx {
            a[i][k] = -g[i];
        }
    }
    for (j, (e, f)) in equalities.iter().enumerate() {
        cost[ni + j] = *f;
        cost[ni + ne + j] = -f;
        for i in 0..nx {
            a[i][ni + j] = e[i];
            a[i][ni + ne + j] = -e[i];
        }
    }
    let dual = solve_standard(&a, c, &cost)?;
    let status = match dual.status {
        LpStatus::Optimal => LpStatus::Optimal,
        // an infeasible dual means the primal is unbounded (or infeasible); an
        // unbounded dual means the primal is infeasible
        LpStatus::Infeasible => LpStatus::Unbounded,
        LpStatus::Unbounded => LpStatus::Infeasible,
    };
    let x = dual.duals.clone();
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { status, x, value, inequality_weights: dual.z[..ni].to_vec(), iterations: dual.iterations })
}
