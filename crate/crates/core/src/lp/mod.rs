//! Restricted-master LP for crew pairing set covering.
//!
//! The primal minimizes `sum_j (c_j + psi_D * |a_j|) x_j - F * psi_D` subject to
//! every flight being covered at least once. The dual is solved as a separate
//! LP over the primal support only, which yields the shadow prices used for
//! pricing new pairings.

pub mod simplex;

use std::collections::HashSet;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rules::PairingRef;
use simplex::{dual_simplex, primal_simplex, SimplexError, SparseCol, StandardLp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("flight row {0} is not covered by any column")]
    Infeasible(usize),
    #[error("simplex iteration limit reached ({0} iterations)")]
    IterationLimit(usize),
    #[error("dual has {rows} rows but row {row} is never covered by the support")]
    DimensionMismatch { rows: usize, row: usize },
    #[error("duplicate column key {0}")]
    DuplicateKey(String),
    #[error("column {key} references row {row} outside 0..{n_rows}")]
    RowOutOfRange { key: String, row: usize, n_rows: usize },
    #[error("numerical failure in simplex: {0}")]
    Numerical(String),
}

impl From<SimplexError> for LpError {
    fn from(e: SimplexError) -> Self {
        match e {
            SimplexError::IterationLimit(n) => LpError::IterationLimit(n),
            other => LpError::Numerical(other.to_string()),
        }
    }
}

/// One set-covering column: a pairing's cost and the rows (flights) it covers.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub key: String,
    /// Pairing cost `c_j`, without the deadhead adjustment.
    pub cost: f64,
    /// Zero-based covered rows, ascending and distinct.
    pub rows: Vec<usize>,
}

impl Column {
    pub fn new(key: impl Into<String>, cost: f64, mut rows: Vec<usize>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        Column {
            key: key.into(),
            cost,
            rows,
        }
    }

    pub fn from_pairing(p: &PairingRef) -> Self {
        Column::new(
            p.key(),
            p.cost.total,
            p.flights().map(|f| f as usize - 1).collect(),
        )
    }

    pub fn adjusted_cost(&self, deadhead_penalty: f64) -> f64 {
        self.cost + deadhead_penalty * self.rows.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnPool {
    n_rows: usize,
    columns: Vec<Column>,
}

impl ColumnPool {
    pub fn new(n_rows: usize, columns: Vec<Column>) -> Result<Self, LpError> {
        let mut keys = HashSet::with_capacity(columns.len());
        for c in &columns {
            if !keys.insert(c.key.as_str()) {
                return Err(LpError::DuplicateKey(c.key.clone()));
            }
            if let Some(&row) = c.rows.iter().find(|&&r| r >= n_rows) {
                return Err(LpError::RowOutOfRange {
                    key: c.key.clone(),
                    row,
                    n_rows,
                });
            }
        }
        Ok(ColumnPool { n_rows, columns })
    }

    pub fn from_pairings(n_flights: usize, pairings: &[PairingRef]) -> Result<Self, LpError> {
        ColumnPool::new(n_flights, pairings.iter().map(Column::from_pairing).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn first_uncovered_row(&self) -> Option<usize> {
        let mut covered = vec![false; self.n_rows];
        for c in &self.columns {
            for &r in &c.rows {
                covered[r] = true;
            }
        }
        covered.iter().position(|&c| !c)
    }

    /// Pool restricted to the given column indices, in that order.
    pub fn subset(&self, idx: &[usize]) -> ColumnPool {
        ColumnPool {
            n_rows: self.n_rows,
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
        }
    }

    /// Covering objective with deadhead penalties, for an integral or fractional selection.
    pub fn objective(&self, x: &[f64], deadhead_penalty: f64) -> f64 {
        self.columns
            .iter()
            .zip(x)
            .map(|(c, &v)| c.adjusted_cost(deadhead_penalty) * v)
            .sum::<f64>()
            - self.n_rows as f64 * deadhead_penalty
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LpOptions {
    /// Columns with `x_j` above this are in the support.
    pub support_eps: f64,
    /// Reduced-cost tolerance for optimality of either solve.
    pub optimality_tol: f64,
    /// Number of extra optimal dual vertices averaged into the returned duals.
    /// Zero returns the plain simplex vertex.
    pub dual_centering: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            support_eps: 1e-6,
            optimality_tol: 1e-7,
            dual_centering: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Indices of columns with `x_j > support_eps`, ascending.
    pub support: Vec<usize>,
    /// Row duals of the optimal basis; the optimality certificate.
    pub basis_duals: Vec<f64>,
    /// Optimal basis of the covering LP: pool columns first, then one surplus per row.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualVector {
    /// One shadow price per flight row, all non-negative.
    pub y: Vec<f64>,
    pub objective: f64,
}

impl DualVector {
    pub fn zeros(n_rows: usize) -> Self {
        DualVector {
            y: vec![0.0; n_rows],
            objective: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Solver backend for the two restricted-master solves.
pub trait LpBackend {
    fn solve_primal(&self, pool: &ColumnPool, deadhead_penalty: f64) -> Result<PrimalSolution, LpError>;

    /// Dual over the given support columns of `pool`.
    fn solve_dual(
        &self,
        pool: &ColumnPool,
        support: &[usize],
        deadhead_penalty: f64,
    ) -> Result<DualVector, LpError>;
}

/// Built-in revised simplex backend.
#[derive(Clone, Copy, Debug, Default)]
pub struct RevisedSimplex {
    pub options: LpOptions,
}

impl LpBackend for RevisedSimplex {
    fn solve_primal(&self, pool: &ColumnPool, deadhead_penalty: f64) -> Result<PrimalSolution, LpError> {
        let cover = solve_covering(
            pool.n_rows,
            pool.columns.iter().map(|c| (c.rows.as_slice(), c.adjusted_cost(deadhead_penalty))),
            self.options.optimality_tol,
        )?;
        let support = cover
            .x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > self.options.support_eps)
            .map(|(j, _)| j)
            .collect();
        Ok(PrimalSolution {
            objective: cover.objective - pool.n_rows as f64 * deadhead_penalty,
            x: cover.x,
            support,
            basis_duals: cover.duals,
            basis: cover.basis,
            iterations: cover.iterations,
        })
    }

    fn solve_dual(
        &self,
        pool: &ColumnPool,
        support: &[usize],
        deadhead_penalty: f64,
    ) -> Result<DualVector, LpError> {
        let n = pool.n_rows;
        let m = support.len();
        // variables: y_0..y_{n-1}, then one slack per support column
        let mut cols: Vec<SparseCol> = vec![SparseCol::default(); n + m];
        let mut rhs = Vec::with_capacity(m);
        for (k, &j) in support.iter().enumerate() {
            let c = &pool.columns[j];
            for &r in &c.rows {
                cols[r].idx.push(k);
                cols[r].val.push(1.0);
            }
            cols[n + k] = SparseCol::unit(k, 1.0);
            rhs.push(c.adjusted_cost(deadhead_penalty));
        }
        if let Some(row) = cols[..n].iter().position(|c| c.idx.is_empty()) {
            return Err(LpError::DimensionMismatch { rows: n, row });
        }
        let mut cost = vec![-1.0; n];
        cost.extend(std::iter::repeat_n(0.0, m));
        let lp = StandardLp {
            n_rows: m,
            cols,
            cost,
            rhs,
        };
        let sol = primal_simplex(&lp, (n..n + m).collect(), self.options.optimality_tol)?;
        let y: Vec<f64> = sol.x[..n].iter().map(|&v| v.max(0.0)).collect();
        let objective = y.iter().sum::<f64>() - n as f64 * deadhead_penalty;
        Ok(DualVector { y, objective })
    }
}

/// Moves the support duals `y0` towards the middle of the optimal dual face.
///
/// The support dual is highly degenerate: a simplex vertex tends to load a
/// column's whole cost onto one of its flights, and most of its optimal face
/// prices columns the pool already dominates. The result is the mean of the
/// primal basis duals and of the vertices maximizing a fixed sequence of random
/// directions (and their negations) over
/// `{y >= 0, y respects every pool column, sum y >= Z - delta}`.
/// Each direction is solved through its covering-form dual, warm-started from
/// the optimal primal basis. The mean still respects every support column and
/// reaches the support optimum, so it is an optimal support dual.
pub fn stabilize_dual(
    pool: &ColumnPool,
    primal: &PrimalSolution,
    y0: &DualVector,
    deadhead_penalty: f64,
    options: LpOptions,
) -> Result<DualVector, LpError> {
    let n = pool.n_rows;
    if options.dual_centering == 0 || primal.basis.len() != n {
        return Ok(y0.clone());
    }
    let z = primal.objective + n as f64 * deadhead_penalty;
    let delta = 1e-9 * z.abs().max(1.0);
    let mut cols = Vec::with_capacity(pool.len() + n + 1);
    let mut cost = Vec::with_capacity(pool.len() + n + 1);
    for c in &pool.columns {
        cols.push(SparseCol::new(c.rows.clone(), vec![1.0; c.rows.len()]));
        cost.push(c.adjusted_cost(deadhead_penalty));
    }
    for i in 0..n {
        cols.push(SparseCol::unit(i, -1.0));
        cost.push(0.0);
    }
    cols.push(SparseCol::new((0..n).collect(), vec![-1.0; n]));
    cost.push(-(z - delta));
    let mut lp = StandardLp {
        n_rows: n,
        cols,
        cost,
        rhs: vec![0.0; n],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d0a1);
    let mut sum: Vec<f64> = primal.basis_duals.iter().map(|&v| v.max(0.0)).collect();
    let mut count = 1.0;
    let mut w = vec![0.0; n];
    for k in 0..options.dual_centering {
        if k % 2 == 0 {
            for v in &mut w {
                *v = rng.gen_range(-1.0..1.0);
            }
        } else {
            for v in &mut w {
                *v = -*v;
            }
        }
        lp.rhs.copy_from_slice(&w);
        let Ok(sol) = dual_simplex(&lp, primal.basis.clone(), options.optimality_tol) else {
            log::debug!("dual stabilization skipped after a failed direction solve");
            return Ok(y0.clone());
        };
        for (acc, &v) in sum.iter_mut().zip(&sol.duals) {
            *acc += v.max(0.0);
        }
        count += 1.0;
    }
    let y: Vec<f64> = sum.into_iter().map(|v| v / count).collect();
    let objective = y.iter().sum::<f64>() - n as f64 * deadhead_penalty;
    Ok(DualVector { y, objective })
}

pub fn solve_primal(pool: &ColumnPool, deadhead_penalty: f64) -> Result<PrimalSolution, LpError> {
    RevisedSimplex::default().solve_primal(pool, deadhead_penalty)
}

pub fn solve_dual(pool: &ColumnPool, support: &[usize], deadhead_penalty: f64) -> Result<DualVector, LpError> {
    RevisedSimplex::default().solve_dual(pool, support, deadhead_penalty)
}

pub(crate) struct CoverSolution {
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    /// `sum_j cost_j x_j` for the costs passed in.
    pub objective: f64,
    pub iterations: usize,
    pub basis: Vec<usize>,
}

/// `min sum cost_j x_j, sum_{j covers i} x_j >= 1, x >= 0` over `n_rows` rows,
/// solved by dual simplex from the all-surplus basis. Costs must be non-negative.
pub(crate) fn solve_covering<'a>(
    n_rows: usize,
    columns: impl Iterator<Item = (&'a [usize], f64)>,
    opt_tol: f64,
) -> Result<CoverSolution, LpError> {
    let mut cols = Vec::new();
    let mut cost = Vec::new();
    let mut covered = vec![false; n_rows];
    for (rows, c) in columns {
        debug_assert!(c >= 0.0);
        for &r in rows {
            covered[r] = true;
        }
        cols.push(SparseCol::new(rows.to_vec(), vec![1.0; rows.len()]));
        cost.push(c);
    }
    if let Some(row) = covered.iter().position(|&c| !c) {
        return Err(LpError::Infeasible(row));
    }
    let n = cols.len();
    for i in 0..n_rows {
        cols.push(SparseCol::unit(i, -1.0));
        cost.push(0.0);
    }
    let lp = StandardLp {
        n_rows,
        cols,
        cost,
        rhs: vec![1.0; n_rows],
    };
    let sol = match dual_simplex(&lp, (n..n + n_rows).collect(), opt_tol) {
        Ok(s) => s,
        Err(SimplexError::Infeasible) => return Err(LpError::Infeasible(0)),
        Err(e) => return Err(e.into()),
    };
    let mut x = sol.x;
    x.truncate(n);
    for v in &mut x {
        if v.abs() < 1e-12 {
            *v = 0.0;
        }
    }
    Ok(CoverSolution {
        x,
        duals: sol.duals,
        objective: sol.objective,
        iterations: sol.iterations,
        basis: sol.basis,
    })
}

/// Reduced cost of a column under `y`, using the deadhead-adjusted cost.
pub fn column_reduced_cost(col: &Column, y: &[f64], deadhead_penalty: f64) -> f64 {
    col.adjusted_cost(deadhead_penalty) - col.rows.iter().map(|&r| y[r]).sum::<f64>()
}

/// Writes pool, primal values and duals in a line-oriented text format.
pub fn write_dump<W: Write>(
    mut w: W,
    pool: &ColumnPool,
    deadhead_penalty: f64,
    primal: &PrimalSolution,
    dual: Option<&DualVector>,
) -> io::Result<()> {
    writeln!(w, "# crewpair-lp-dump v1")?;
    writeln!(w, "rows {}", pool.n_rows)?;
    writeln!(w, "deadhead_penalty {}", deadhead_penalty)?;
    writeln!(w, "objective {}", primal.objective)?;
    for (c, x) in pool.columns.iter().zip(&primal.x) {
        let rows: Vec<String> = c.rows.iter().map(|r| r.to_string()).collect();
        writeln!(w, "col {} {} {} {}", c.key, c.cost, x, rows.join(","))?;
    }
    if let Some(d) = dual {
        for (i, y) in d.y.iter().enumerate() {
            writeln!(w, "dual {} {}", i, y)?;
        }
        writeln!(w, "dual_objective {}", d.objective)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PSI: f64 = 5000.0;

    fn pool(n: usize, cols: &[(&str, f64, &[usize])]) -> ColumnPool {
        ColumnPool::new(
            n,
            cols.iter()
                .map(|(k, c, r)| Column::new(*k, *c, r.to_vec()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_column() {
        let p = pool(1, &[("a", 100.0, &[0])]);
        let s = solve_primal(&p, PSI).unwrap();
        assert_eq!(s.x, vec![1.0]);
        assert!((s.objective - 100.0).abs() < 1e-9);
        let d = solve_dual(&p, &s.support, PSI).unwrap();
        assert!((d.y[0] - (100.0 + PSI)).abs() < 1e-9);
        assert!((d.objective - 100.0).abs() < 1e-9);
    }

    #[test]
    fn pair_column_wins() {
        // brute force over the 8 0/1 selections: {C} at 100 is cheapest; the LP is integral here
        let p = pool(2, &[("A", 60.0, &[0]), ("B", 60.0, &[1]), ("C", 100.0, &[0, 1])]);
        let s = solve_primal(&p, PSI).unwrap();
        assert!((s.objective - 100.0).abs() < 1e-9);
        assert!((s.x[2] - 1.0).abs() < 1e-9);
        assert_eq!(s.support, vec![2]);
        let d = solve_dual(&p, &s.support, PSI).unwrap();
        assert!((d.objective - s.objective).abs() < 1e-6);
    }

    #[test]
    fn duplicate_cost_alternatives_share_objective() {
        let p = pool(2, &[("A", 100.0, &[0, 1]), ("B", 100.0, &[0, 1])]);
        let s = solve_primal(&p, PSI).unwrap();
        assert!((s.objective - 100.0).abs() < 1e-9);
        assert!((s.x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uncovered_row_is_infeasible() {
        let p = pool(2, &[("A", 1.0, &[0])]);
        assert_eq!(solve_primal(&p, PSI).unwrap_err(), LpError::Infeasible(1));
    }

    #[test]
    fn dual_rejects_uncovered_support() {
        let p = pool(2, &[("A", 1.0, &[0]), ("B", 1.0, &[1])]);
        assert!(matches!(
            solve_dual(&p, &[0], PSI),
            Err(LpError::DimensionMismatch { row: 1, .. })
        ));
    }

    #[test]
    fn duplicate_keys_rejected() {
        let cols = vec![Column::new("A", 1.0, vec![0]), Column::new("A", 2.0, vec![0])];
        assert!(matches!(ColumnPool::new(1, cols), Err(LpError::DuplicateKey(_))));
    }

    #[test]
    fn fractional_triangle() {
        // odd cycle: LP optimum is x = 1/2 on each edge column
        let p = pool(3, &[("a", 0.0, &[0, 1]), ("b", 0.0, &[1, 2]), ("c", 0.0, &[0, 2])]);
        let s = solve_primal(&p, 1.0).unwrap();
        for v in &s.x {
            assert!((v - 0.5).abs() < 1e-9);
        }
        // 3 * 0.5 * 2 - 3 = 0
        assert!(s.objective.abs() < 1e-9);
        let d = solve_dual(&p, &s.support, 1.0).unwrap();
        assert!((d.objective - s.objective).abs() < 1e-9);
    }

    #[test]
    fn dump_format() {
        let p = pool(1, &[("a", 100.0, &[0])]);
        let s = solve_primal(&p, PSI).unwrap();
        let d = solve_dual(&p, &s.support, PSI).unwrap();
        let mut buf = Vec::new();
        write_dump(&mut buf, &p, PSI, &s, Some(&d)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# crewpair-lp-dump v1\nrows 1\n"));
        assert!(text.contains("col a 100 1 0\n"));
        assert!(text.contains("dual 0 5100\n"));
    }

    #[test]
    fn stabilized_duals_stay_optimal_and_pool_feasible() {
        // the support is one 3-flight column, so its own dual face is a whole simplex;
        // the pool columns cut it down
        let p = pool(
            3,
            &[
                ("abc", 300.0, &[0, 1, 2]),
                ("a", 9000.0, &[0]),
                ("ab", 5200.0, &[0, 1]),
                ("c", 5150.0, &[2]),
            ],
        );
        let s = solve_primal(&p, PSI).unwrap();
        assert_eq!(s.support, vec![0]);
        let y0 = solve_dual(&p, &s.support, PSI).unwrap();
        let y = stabilize_dual(&p, &s, &y0, PSI, LpOptions::default()).unwrap();
        assert!((y.objective - s.objective).abs() < 1e-6 * s.objective.abs().max(1.0));
        for c in p.columns() {
            assert!(column_reduced_cost(c, &y.y, PSI) >= -1e-6, "{} priced negative", c.key);
        }
        assert!(y.y.iter().all(|&v| v >= 0.0));
        // strictly inside: no flight carries the whole column cost
        assert!(y.y.iter().all(|&v| v < 300.0 + 3.0 * PSI - 1.0));
        let off = stabilize_dual(&p, &s, &y0, PSI, LpOptions { dual_centering: 0, ..LpOptions::default() }).unwrap();
        assert_eq!(off, y0);
    }
}
