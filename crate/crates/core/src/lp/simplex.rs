//! Revised simplex over a dense explicit basis inverse.
//!
//! Problems are in standard form `min c'x, Ax = b, x >= 0` with sparse columns.
//! The caller supplies a starting basis that is either primal feasible
//! ([`primal_simplex`]) or dual feasible ([`dual_simplex`]). Pricing uses
//! Dantzig's rule and falls back to Bland's rule after a run of degenerate
//! pivots, which rules out cycling.

use thiserror::Error;

/// Consecutive non-improving pivots before switching to Bland's rule.
const DEGENERATE_RUN: usize = 40;
/// Pivots between basis re-inversions.
const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimplexError {
    #[error("problem is unbounded")]
    Unbounded,
    #[error("problem is infeasible")]
    Infeasible,
    #[error("iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("basis became singular")]
    Singular,
}

#[derive(Clone, Debug, Default)]
pub struct SparseCol {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseCol {
    pub fn new(idx: Vec<usize>, val: Vec<f64>) -> Self {
        debug_assert_eq!(idx.len(), val.len());
        SparseCol { idx, val }
    }

    pub fn unit(i: usize, v: f64) -> Self {
        SparseCol {
            idx: vec![i],
            val: vec![v],
        }
    }

    fn dot(&self, dense: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| dense[i] * v).sum()
    }
}

#[derive(Clone, Debug)]
pub struct StandardLp {
    pub n_rows: usize,
    pub cols: Vec<SparseCol>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SimplexSolution {
    /// Value of every structural variable.
    pub x: Vec<f64>,
    /// Row duals `c_B' B^-1`.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Vec<usize>,
}

struct Tableau<'a> {
    lp: &'a StandardLp,
    m: usize,
    /// Row-major m x m basis inverse.
    binv: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    xb: Vec<f64>,
    since_refactor: usize,
    opt_tol: f64,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a StandardLp, basis: Vec<usize>, opt_tol: f64) -> Result<Self, SimplexError> {
        let m = lp.n_rows;
        assert_eq!(basis.len(), m, "basis size must equal row count");
        let mut is_basic = vec![false; lp.cols.len()];
        for &b in &basis {
            is_basic[b] = true;
        }
        let mut t = Tableau {
            lp,
            m,
            binv: vec![0.0; m * m],
            basis,
            is_basic,
            xb: vec![0.0; m],
            since_refactor: 0,
            opt_tol,
        };
        t.refactor()?;
        Ok(t)
    }

    /// Rebuilds `B^-1` by Gauss-Jordan elimination with partial pivoting.
    fn refactor(&mut self) -> Result<(), SimplexError> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = &self.lp.cols[j];
            for (&i, &v) in c.idx.iter().zip(&c.val) {
                b[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&a, &c| b[a * m + col].abs().total_cmp(&b[c * m + col].abs()))
                .ok_or(SimplexError::Singular)?;
            if b[piv * m + col].abs() < 1e-12 {
                return Err(SimplexError::Singular);
            }
            if piv != col {
                for k in 0..m {
                    b.swap(piv * m + k, col * m + k);
                    inv.swap(piv * m + k, col * m + k);
                }
            }
            let p = b[col * m + col];
            for k in 0..m {
                b[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = b[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        b[r * m + k] -= f * b[col * m + k];
                        inv[r * m + k] -= f * inv[col * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_xb();
        Ok(())
    }

    fn recompute_xb(&mut self) {
        let m = self.m;
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = row.iter().zip(&self.lp.rhs).map(|(a, b)| a * b).sum();
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let cb = self.lp.cost[j];
            if cb != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (p, &r) in pi.iter_mut().zip(row) {
                    *p += cb * r;
                }
            }
        }
        pi
    }

    fn reduced_cost(&self, j: usize, pi: &[f64]) -> f64 {
        self.lp.cost[j] - self.lp.cols[j].dot(pi)
    }

    /// `B^-1 a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let c = &self.lp.cols[j];
        let mut out = vec![0.0; m];
        for (&i, &v) in c.idx.iter().zip(&c.val) {
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.binv[r * m + i] * v;
            }
        }
        out
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) -> Result<(), SimplexError> {
        let m = self.m;
        let ar = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= ar;
        }
        for i in 0..m {
            if i == r || alpha[i] == 0.0 {
                continue;
            }
            let f = alpha[i];
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        } else {
            self.recompute_xb();
        }
        Ok(())
    }

    fn objective(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .map(|(&j, &v)| self.lp.cost[j] * v)
            .sum()
    }

    fn finish(self, iterations: usize) -> SimplexSolution {
        let mut x = vec![0.0; self.lp.cols.len()];
        for (&j, &v) in self.basis.iter().zip(&self.xb) {
            x[j] = v;
        }
        let duals = self.duals();
        let objective = self.objective();
        SimplexSolution {
            x,
            duals,
            objective,
            iterations,
            basis: self.basis,
        }
    }
}

fn iteration_limit(lp: &StandardLp) -> usize {
    50 * (lp.n_rows + lp.cols.len()) + 10_000
}

/// Tracks improvement of the objective and decides when Bland's rule is active.
struct CycleGuard {
    best: f64,
    stalled: usize,
}

impl CycleGuard {
    fn new() -> Self {
        CycleGuard {
            best: f64::INFINITY,
            stalled: 0,
        }
    }

    /// `value` is oriented so that progress means decreasing.
    fn bland(&mut self, value: f64) -> bool {
        if value < self.best - 1e-12 * self.best.abs().max(1.0) {
            self.best = value;
            self.stalled = 0;
        } else {
            self.stalled += 1;
        }
        self.stalled >= DEGENERATE_RUN
    }
}

/// Primal simplex from a primal-feasible basis.
pub fn primal_simplex(lp: &StandardLp, basis: Vec<usize>, opt_tol: f64) -> Result<SimplexSolution, SimplexError> {
    let mut t = Tableau::new(lp, basis, opt_tol)?;
    if t.xb.iter().any(|&v| v < -FEAS_TOL) {
        return Err(SimplexError::Infeasible);
    }
    let limit = iteration_limit(lp);
    let mut guard = CycleGuard::new();
    for it in 0..limit {
        let bland = guard.bland(t.objective());
        let pi = t.duals();
        let mut entering: Option<(usize, f64)> = None;
        for j in 0..lp.cols.len() {
            if t.is_basic[j] {
                continue;
            }
            let d = t.reduced_cost(j, &pi);
            if d < -t.opt_tol {
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d < best) {
                    entering = Some((j, d));
                }
            }
        }
        let Some((q, _)) = entering else {
            return Ok(t.finish(it));
        };
        let alpha = t.ftran(q);
        let mut leave: Option<(usize, f64)> = None;
        for (i, &a) in alpha.iter().enumerate() {
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = t.xb[i].max(0.0) / a;
            leave = match leave {
                None => Some((i, ratio)),
                Some((r, best)) => {
                    let better = ratio < best - 1e-12
                        || (ratio <= best + 1e-12
                            && if bland {
                                t.basis[i] < t.basis[r]
                            } else {
                                a > alpha[r]
                            });
                    if better {
                        Some((i, ratio))
                    } else {
                        Some((r, best))
                    }
                }
            };
        }
        let Some((r, _)) = leave else {
            return Err(SimplexError::Unbounded);
        };
        t.pivot(r, q, &alpha)?;
    }
    Err(SimplexError::IterationLimit(limit))
}

/// Dual simplex from a dual-feasible basis.
pub fn dual_simplex(lp: &StandardLp, basis: Vec<usize>, opt_tol: f64) -> Result<SimplexSolution, SimplexError> {
    let mut t = Tableau::new(lp, basis, opt_tol)?;
    let limit = iteration_limit(lp);
    let mut guard = CycleGuard::new();
    let m = t.m;
    for it in 0..limit {
        // dual objective increases; feed its negation to the guard
        let bland = guard.bland(-t.objective());
        let mut leaving: Option<usize> = None;
        for i in 0..m {
            if t.xb[i] >= -FEAS_TOL {
                continue;
            }
            leaving = match leaving {
                None => Some(i),
                Some(r) => {
                    let better = if bland {
                        t.basis[i] < t.basis[r]
                    } else {
                        t.xb[i] < t.xb[r]
                    };
                    Some(if better { i } else { r })
                }
            };
        }
        let Some(r) = leaving else {
            return Ok(t.finish(it));
        };
        let pi = t.duals();
        let rho = &t.binv[r * m..(r + 1) * m];
        let mut entering: Option<(usize, f64, f64)> = None;
        for j in 0..lp.cols.len() {
            if t.is_basic[j] {
                continue;
            }
            let arj = lp.cols[j].dot(rho);
            if arj >= -PIVOT_TOL {
                continue;
            }
            let d = t.reduced_cost(j, &pi).max(0.0);
            let ratio = d / -arj;
            entering = match entering {
                None => Some((j, ratio, arj)),
                Some((q, best, aq)) => {
                    let better = ratio < best - 1e-12
                        || (ratio <= best + 1e-12 && !bland && arj.abs() > aq.abs());
                    if better {
                        Some((j, ratio, arj))
                    } else {
                        Some((q, best, aq))
                    }
                }
            };
        }
        let Some((q, _, _)) = entering else {
            return Err(SimplexError::Infeasible);
        };
        let alpha = t.ftran(q);
        if alpha[r].abs() < PIVOT_TOL {
            t.refactor()?;
            continue;
        }
        t.pivot(r, q, &alpha)?;
    }
    Err(SimplexError::IterationLimit(limit))
}

#[cfg(test)]
mod tests {
    use super::*;

    // min -x1 - x2  s.t. x1 + 2x2 + s1 = 4, 3x1 + x2 + s2 = 6
    fn small() -> StandardLp {
        StandardLp {
            n_rows: 2,
            cols: vec![
                SparseCol::new(vec![0, 1], vec![1.0, 3.0]),
                SparseCol::new(vec![0, 1], vec![2.0, 1.0]),
                SparseCol::unit(0, 1.0),
                SparseCol::unit(1, 1.0),
            ],
            cost: vec![-1.0, -1.0, 0.0, 0.0],
            rhs: vec![4.0, 6.0],
        }
    }

    #[test]
    fn primal_small() {
        let s = primal_simplex(&small(), vec![2, 3], 1e-9).unwrap();
        // vertex x1 = 1.6, x2 = 1.2
        assert!((s.x[0] - 1.6).abs() < 1e-9);
        assert!((s.x[1] - 1.2).abs() < 1e-9);
        assert!((s.objective + 2.8).abs() < 1e-9);
        // strong duality: b'pi = objective
        let bpi: f64 = s.duals.iter().zip([4.0, 6.0]).map(|(p, b)| p * b).sum();
        assert!((bpi - s.objective).abs() < 1e-9);
    }

    #[test]
    fn dual_small_covering() {
        // min 2x1 + 3x2 s.t. x1 + x2 >= 1, x1 >= 0.5 ; surplus form
        let lp = StandardLp {
            n_rows: 2,
            cols: vec![
                SparseCol::new(vec![0, 1], vec![1.0, 1.0]),
                SparseCol::unit(0, 1.0),
                SparseCol::unit(0, -1.0),
                SparseCol::unit(1, -1.0),
            ],
            cost: vec![2.0, 3.0, 0.0, 0.0],
            rhs: vec![1.0, 0.5],
        };
        let s = dual_simplex(&lp, vec![2, 3], 1e-9).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9, "{}", s.objective);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_detected() {
        let lp = StandardLp {
            n_rows: 1,
            cols: vec![SparseCol::unit(0, -1.0), SparseCol::unit(0, 1.0)],
            cost: vec![-1.0, 0.0],
            rhs: vec![1.0],
        };
        assert_eq!(primal_simplex(&lp, vec![1], 1e-9).unwrap_err(), SimplexError::Unbounded);
    }

    #[test]
    fn infeasible_detected() {
        // x >= 1 with x's column absent: only surplus
        let lp = StandardLp {
            n_rows: 1,
            cols: vec![SparseCol::unit(0, -1.0)],
            cost: vec![0.0],
            rhs: vec![1.0],
        };
        assert_eq!(dual_simplex(&lp, vec![0], 1e-9).unwrap_err(), SimplexError::Infeasible);
    }
}
