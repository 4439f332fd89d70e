//! Branch-and-bound integerization of the set-covering model.
//!
//! Depth-first search over binary column decisions. Each node solves the LP
//! relaxation of the rows left uncovered by its fixed-to-one columns; the
//! down branch (`x_j = 0`) is explored first. The search stops at proven
//! optimality, at the wall-clock budget, or at the node cap.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::lp::{solve_covering, Column, ColumnPool, LpError, LpOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MipError {
    #[error("flight row {0} is not covered by any column")]
    Infeasible(usize),
    #[error("flight row {0} is not covered by the selection")]
    UncoveredFlight(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MipOptions {
    /// Wall-clock budget; `None` searches to optimality.
    pub time_limit: Option<Duration>,
    pub node_cap: u64,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            time_limit: Some(Duration::from_secs(1200)),
            node_cap: 10_000_000,
        }
    }
}

impl MipOptions {
    pub fn untimed() -> Self {
        MipOptions {
            time_limit: None,
            ..MipOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SearchEvent {
    Root,
    Incumbent,
    Finish,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchLogEntry {
    pub node: u64,
    pub elapsed: Duration,
    pub bound: f64,
    pub incumbent: f64,
    pub event: SearchEvent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MipResult {
    /// Selected column indices, ascending.
    pub incumbent: Vec<usize>,
    /// Set-covering objective including deadhead penalties.
    pub objective: f64,
    /// Best lower bound known when the search stopped.
    pub bound: f64,
    pub status: MipStatus,
    pub nodes: u64,
    pub log: Vec<SearchLogEntry>,
}

/// Absolute optimality gap tolerance for an objective of magnitude `z`.
pub fn gap_tolerance(z: f64) -> f64 {
    1e-6 * z.abs().max(1.0)
}

struct Node {
    /// Branching decisions from the root: (column, value).
    fixes: Vec<(usize, bool)>,
    /// LP bound of the parent.
    parent_bound: f64,
}

struct Search<'a> {
    pool: &'a ColumnPool,
    adjusted: Vec<f64>,
    offset: f64,
    opt_tol: f64,
    best: Vec<usize>,
    best_obj: f64,
}

enum NodeOutcome {
    Pruned,
    Integral,
    Branch { bound: f64, var: usize },
}

impl<'a> Search<'a> {
    fn selection_cost(&self, sel: &[usize]) -> f64 {
        sel.iter().map(|&j| self.adjusted[j]).sum::<f64>() - self.offset
    }

    fn offer(&mut self, mut sel: Vec<usize>) -> bool {
        sel.sort_unstable();
        sel.dedup();
        let obj = self.selection_cost(&sel);
        if obj < self.best_obj - 1e-9 * self.best_obj.abs().max(1.0) {
            self.best_obj = obj;
            self.best = sel;
            true
        } else {
            false
        }
    }

    /// Drops columns whose rows stay covered without them, most expensive first.
    fn prune_redundant(&self, sel: &mut Vec<usize>) {
        let mut count = vec![0u32; self.pool.n_rows()];
        for &j in sel.iter() {
            for &r in &self.pool.columns()[j].rows {
                count[r] += 1;
            }
        }
        let mut order = sel.clone();
        order.sort_by(|&a, &b| self.adjusted[b].total_cmp(&self.adjusted[a]).then(a.cmp(&b)));
        for j in order {
            let rows = &self.pool.columns()[j].rows;
            if rows.iter().all(|&r| count[r] > 1) {
                for &r in rows {
                    count[r] -= 1;
                }
                sel.retain(|&k| k != j);
            }
        }
    }

    fn evaluate(&mut self, node: &Node, changed: &mut bool) -> Result<NodeOutcome, MipError> {
        let cols = self.pool.columns();
        let n_rows = self.pool.n_rows();
        let mut fixed = vec![None; cols.len()];
        for &(j, v) in &node.fixes {
            fixed[j] = Some(v);
        }
        let mut covered = vec![false; n_rows];
        let mut ones = Vec::new();
        let mut fixed_cost = 0.0;
        for (j, f) in fixed.iter().enumerate() {
            if *f == Some(true) {
                ones.push(j);
                fixed_cost += self.adjusted[j];
                for &r in &cols[j].rows {
                    covered[r] = true;
                }
            }
        }
        // remaining rows re-indexed densely
        let mut remap = vec![usize::MAX; n_rows];
        let mut n_left = 0;
        for r in 0..n_rows {
            if !covered[r] {
                remap[r] = n_left;
                n_left += 1;
            }
        }
        if n_left == 0 {
            let obj = fixed_cost - self.offset;
            if obj < self.best_obj - gap_tolerance(self.best_obj) {
                *changed |= self.offer(ones);
            }
            return Ok(NodeOutcome::Integral);
        }
        let mut free = Vec::new();
        let mut sub_rows: Vec<Vec<usize>> = Vec::new();
        for (j, c) in cols.iter().enumerate() {
            if fixed[j].is_some() {
                continue;
            }
            let rows: Vec<usize> = c.rows.iter().filter(|&&r| !covered[r]).map(|&r| remap[r]).collect();
            if !rows.is_empty() {
                free.push(j);
                sub_rows.push(rows);
            }
        }
        let lp = match solve_covering(
            n_left,
            free.iter().zip(&sub_rows).map(|(&j, r)| (r.as_slice(), self.adjusted[j])),
            self.opt_tol,
        ) {
            Ok(lp) => lp,
            Err(LpError::Infeasible(_)) => return Ok(NodeOutcome::Pruned),
            Err(e) => return Err(e.into()),
        };
        let bound = fixed_cost + lp.objective - self.offset;
        if bound >= self.best_obj - gap_tolerance(self.best_obj) {
            return Ok(NodeOutcome::Pruned);
        }
        let mut most: Option<(usize, f64)> = None;
        for (k, &v) in lp.x.iter().enumerate() {
            let frac = v - v.floor();
            if frac <= 1e-6 || frac >= 1.0 - 1e-6 {
                continue;
            }
            let j = free[k];
            let dist = (frac - 0.5).abs();
            let better = match most {
                None => true,
                Some((b, bd)) => {
                    dist < bd - 1e-12
                        || (dist <= bd + 1e-12
                            && (self.adjusted[j] < self.adjusted[b]
                                || (self.adjusted[j] == self.adjusted[b] && cols[j].key < cols[b].key)))
                }
            };
            if better {
                most = Some((j, dist));
            }
        }
        // round the LP support up into a cover
        let mut sel = ones;
        sel.extend(
            lp.x.iter()
                .enumerate()
                .filter(|(_, &v)| v > 1e-6)
                .map(|(k, _)| free[k]),
        );
        match most {
            None => {
                *changed |= self.offer(sel);
                Ok(NodeOutcome::Integral)
            }
            Some((var, _)) => {
                self.prune_redundant(&mut sel);
                *changed |= self.offer(sel);
                Ok(NodeOutcome::Branch { bound, var })
            }
        }
    }
}

/// Exact branch-and-bound for `min sum_j c_j x_j + psi_D * sum_i (sum_j a_ij x_j - 1)`.
pub fn solve_ip(pool: &ColumnPool, deadhead_penalty: f64, options: MipOptions) -> Result<MipResult, MipError> {
    if let Some(row) = pool.first_uncovered_row() {
        return Err(MipError::Infeasible(row));
    }
    let start = Instant::now();
    let adjusted: Vec<f64> = pool
        .columns()
        .iter()
        .map(|c| c.adjusted_cost(deadhead_penalty))
        .collect();
    let offset = pool.n_rows() as f64 * deadhead_penalty;
    let all: Vec<usize> = (0..pool.len()).collect();
    let mut search = Search {
        pool,
        best_obj: adjusted.iter().sum::<f64>() - offset,
        adjusted,
        offset,
        opt_tol: LpOptions::default().optimality_tol,
        best: all,
    };
    let mut log = Vec::new();
    let mut stack = vec![Node {
        fixes: Vec::new(),
        parent_bound: f64::NEG_INFINITY,
    }];
    let mut nodes = 0u64;
    let mut root_bound = f64::NEG_INFINITY;
    let status = loop {
        let Some(node) = stack.pop() else {
            break MipStatus::Optimal;
        };
        if node.parent_bound >= search.best_obj - gap_tolerance(search.best_obj) {
            continue;
        }
        if options.time_limit.is_some_and(|t| start.elapsed() >= t) {
            stack.push(node);
            break MipStatus::TimeLimit;
        }
        if nodes >= options.node_cap {
            stack.push(node);
            break MipStatus::NodeLimit;
        }
        nodes += 1;
        let mut changed = false;
        let outcome = search.evaluate(&node, &mut changed)?;
        if nodes == 1 {
            root_bound = match outcome {
                NodeOutcome::Branch { bound, .. } => bound,
                _ => search.best_obj,
            };
            log.push(SearchLogEntry {
                node: 1,
                elapsed: start.elapsed(),
                bound: root_bound,
                incumbent: search.best_obj,
                event: SearchEvent::Root,
            });
        }
        if changed {
            log.push(SearchLogEntry {
                node: nodes,
                elapsed: start.elapsed(),
                bound: root_bound,
                incumbent: search.best_obj,
                event: SearchEvent::Incumbent,
            });
        }
        if let NodeOutcome::Branch { bound, var } = outcome {
            let mut up = node.fixes.clone();
            up.push((var, true));
            let mut down = node.fixes;
            down.push((var, false));
            stack.push(Node {
                fixes: up,
                parent_bound: bound,
            });
            stack.push(Node {
                fixes: down,
                parent_bound: bound,
            });
        }
    };
    let bound = match status {
        MipStatus::Optimal => search.best_obj,
        _ => stack
            .iter()
            .map(|n| n.parent_bound)
            .fold(search.best_obj, f64::min)
            .max(root_bound),
    };
    log.push(SearchLogEntry {
        node: nodes,
        elapsed: start.elapsed(),
        bound,
        incumbent: search.best_obj,
        event: SearchEvent::Finish,
    });
    Ok(MipResult {
        incumbent: search.best,
        objective: search.best_obj,
        bound,
        status,
        nodes,
        log,
    })
}

/// Per-row overcoverage `sum_j a_ij x_j - 1` of a selection.
pub fn count_deadheads<'c>(
    selected: impl IntoIterator<Item = &'c Column>,
    n_rows: usize,
) -> Result<Vec<u32>, MipError> {
    let mut cover = vec![0u32; n_rows];
    for c in selected {
        for &r in &c.rows {
            cover[r] += 1;
        }
    }
    if let Some(row) = cover.iter().position(|&c| c == 0) {
        return Err(MipError::UncoveredFlight(row));
    }
    Ok(cover.into_iter().map(|c| c - 1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const PSI: f64 = 5000.0;

    fn pool(n: usize, cols: &[(&str, f64, &[usize])]) -> ColumnPool {
        ColumnPool::new(
            n,
            cols.iter().map(|(k, c, r)| Column::new(*k, *c, r.to_vec())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_column_is_optimal() {
        let p = pool(1, &[("a", 100.0, &[0])]);
        let r = solve_ip(&p, PSI, MipOptions::untimed()).unwrap();
        assert_eq!(r.incumbent, vec![0]);
        assert_eq!(r.status, MipStatus::Optimal);
        assert!((r.objective - 100.0).abs() < 1e-9);
    }

    #[test]
    fn pair_fixture() {
        // enumerated by hand: {A,B}=120, {C}=100, {A,C}=5160, ... => {C}
        let p = pool(2, &[("A", 60.0, &[0]), ("B", 60.0, &[1]), ("C", 100.0, &[0, 1])]);
        let r = solve_ip(&p, PSI, MipOptions::untimed()).unwrap();
        assert_eq!(r.incumbent, vec![2]);
        assert!((r.objective - 100.0).abs() < 1e-9);
        assert_eq!(r.status, MipStatus::Optimal);
    }

    #[test]
    fn fractional_root_is_branched() {
        // odd cycle plus expensive singletons; LP is half-integral, IP needs two edges
        let p = pool(
            3,
            &[("a", 10.0, &[0, 1]), ("b", 10.0, &[1, 2]), ("c", 10.0, &[0, 2]), ("d", 5.0, &[2])],
        );
        let r = solve_ip(&p, 1.0, MipOptions::untimed()).unwrap();
        // {a, d}: 12 + 6 - 3 = 15
        assert_eq!(r.incumbent, vec![0, 3]);
        assert!((r.objective - 15.0).abs() < 1e-9);
        assert!(r.bound <= r.objective + 1e-9);
    }

    #[test]
    fn triple_cover_penalty() {
        let cols = [
            Column::new("a", 0.0, vec![0]),
            Column::new("b", 0.0, vec![0, 1]),
            Column::new("c", 0.0, vec![0, 2]),
        ];
        let dh = count_deadheads(cols.iter(), 3).unwrap();
        assert_eq!(dh, vec![2, 0, 0]);
        let p = ColumnPool::new(3, cols.to_vec()).unwrap();
        // all three selected: deadhead term 2 * psi
        let obj = p.objective(&[1.0, 1.0, 1.0], PSI);
        assert!((obj - 2.0 * PSI).abs() < 1e-9);
    }

    #[test]
    fn deadhead_counts() {
        let cols = [Column::new("a", 0.0, vec![0, 1]), Column::new("b", 0.0, vec![2])];
        assert_eq!(count_deadheads(cols.iter(), 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(count_deadheads(cols[..1].iter(), 3).unwrap_err(), MipError::UncoveredFlight(2));
        let twice = [cols[0].clone(), Column::new("c", 0.0, vec![1, 2])];
        assert_eq!(count_deadheads(twice.iter(), 3).unwrap(), vec![0, 1, 0]);
    }

    #[test]
    fn infeasible_pool() {
        let p = pool(2, &[("a", 1.0, &[0])]);
        assert_eq!(solve_ip(&p, PSI, MipOptions::untimed()).unwrap_err(), MipError::Infeasible(1));
    }

    #[test]
    fn zero_time_budget_returns_feasible_incumbent() {
        let p = pool(2, &[("A", 60.0, &[0]), ("B", 60.0, &[1]), ("C", 100.0, &[0, 1])]);
        let r = solve_ip(
            &p,
            PSI,
            MipOptions {
                time_limit: Some(Duration::ZERO),
                node_cap: 10,
            },
        )
        .unwrap();
        assert_eq!(r.status, MipStatus::TimeLimit);
        assert_eq!(r.incumbent, vec![0, 1, 2]);
        count_deadheads(r.incumbent.iter().map(|&j| &p.columns()[j]), 2).unwrap();
    }
}
