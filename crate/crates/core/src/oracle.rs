//! Exhaustive reference solver for small instances.
//!
//! Duties come from scanning every time-ordered flight sequence and pairings
//! from scanning every duty sequence, with no connection graphs or indexes.
//! The optimum is an untimed branch-and-bound over the full pairing set.

use thiserror::Error;

use crate::lp::{ColumnPool, LpError};
use crate::mip::{solve_ip, MipError, MipOptions, MipStatus};
use crate::rules::{check_duty, check_pairing, check_partial_pairing, Duty, FlightId, Instance, Pairing, PairingRef};

/// Largest schedule the oracle accepts.
pub const ORACLE_MAX_FLIGHTS: usize = 60;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{flights} flights exceed the oracle limit of {limit}")]
    TooLarge { flights: usize, limit: usize },
    #[error("flight {0} has no legal pairing")]
    Uncoverable(FlightId),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Mip(#[from] MipError),
}

/// Every legal duty as a flight-id sequence, in key order.
pub fn all_duties(inst: &Instance) -> Vec<Duty> {
    let schedule = &inst.schedule;
    let rules = &inst.rules;
    let Some(base) = schedule.crew_bases().into_iter().next() else {
        return Vec::new();
    };
    let mut by_dep: Vec<FlightId> = schedule.flights().iter().map(|f| f.id).collect();
    by_dep.sort_by_key(|&id| (schedule.flight(id).dep, id));
    let mut out = Vec::new();
    let mut seq = Vec::new();
    fn extend(
        seq: &mut Vec<FlightId>,
        by_dep: &[FlightId],
        from: usize,
        inst: &Instance,
        base: &str,
        out: &mut Vec<Duty>,
    ) {
        for k in from..by_dep.len() {
            seq.push(by_dep[k]);
            // an illegal prefix never becomes legal by appending flights
            if let Ok(d) = check_duty(seq, base, &inst.schedule, &inst.rules) {
                out.push(d);
                extend(seq, by_dep, k + 1, inst, base, out);
            }
            seq.pop();
        }
    }
    if rules.max_flights_per_duty > 0 {
        extend(&mut seq, &by_dep, 0, inst, &base, &mut out);
    }
    out.sort_by_cached_key(Duty::key);
    out
}

/// Every legal pairing for every crew base, in key order.
pub fn all_pairings(inst: &Instance) -> Vec<Pairing> {
    let schedule = &inst.schedule;
    let rules = &inst.rules;
    let duties = all_duties(inst);
    let mut out = Vec::new();
    for base in schedule.crew_bases() {
        let based: Vec<Duty> = duties
            .iter()
            .map(|d| Duty {
                crew_base: base.clone(),
                ..d.clone()
            })
            .collect();
        let mut seq: Vec<Duty> = Vec::new();
        let mut stack: Vec<usize> = vec![0];
        while let Some(next) = stack.last_mut() {
            if *next >= based.len() {
                stack.pop();
                seq.pop();
                continue;
            }
            let cand = &based[*next];
            *next += 1;
            seq.push(cand.clone());
            if check_partial_pairing(&seq, &base, schedule, rules).is_ok() {
                if let Ok(p) = check_pairing(&seq, &base, schedule, rules, &inst.cost) {
                    out.push(p);
                    seq.pop();
                } else if seq.len() < rules.max_duties_per_pairing {
                    stack.push(0);
                } else {
                    seq.pop();
                }
            } else {
                seq.pop();
            }
        }
    }
    out.sort_by(|a, b| a.key().cmp(b.key()));
    out
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub objective: f64,
    /// Key-sorted optimal pairings.
    pub pairings: Vec<PairingRef>,
    pub n_candidates: usize,
}

/// Exact optimum over the complete pairing set.
pub fn solve_exact(inst: &Instance) -> Result<OracleSolution, OracleError> {
    let n = inst.n_flights();
    if n > ORACLE_MAX_FLIGHTS {
        return Err(OracleError::TooLarge {
            flights: n,
            limit: ORACLE_MAX_FLIGHTS,
        });
    }
    let pairings: Vec<PairingRef> = all_pairings(inst).into_iter().map(PairingRef::new).collect();
    let pool = ColumnPool::from_pairings(n, &pairings)?;
    if let Some(row) = pool.first_uncovered_row() {
        return Err(OracleError::Uncoverable(row as FlightId + 1));
    }
    let res = solve_ip(&pool, inst.deadhead_penalty(), MipOptions::untimed())?;
    debug_assert_eq!(res.status, MipStatus::Optimal);
    Ok(OracleSolution {
        objective: res.objective,
        pairings: res.incumbent.iter().map(|&j| pairings[j].clone()).collect(),
        n_candidates: pairings.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{generate_schedule, NetSpec};
    use crate::rules::fixtures::{airports, flight};
    use crate::rules::{CostModel, RuleSet, Schedule};

    #[test]
    fn round_trip_and_two_day_trip() {
        let flights = vec![
            flight(1, "DAL", "AUS", 600, 660, "A"),
            flight(2, "AUS", "DAL", 720, 780, "A"),
            flight(3, "DAL", "MEM", 2040, 2130, "A"),
            flight(4, "MEM", "DAL", 3000, 3090, "A"),
        ];
        let inst = Instance::new(Schedule::new(flights, airports()).unwrap(), RuleSet::default(), CostModel::default());
        let keys: Vec<String> = all_pairings(&inst).iter().map(|p| p.key().to_string()).collect();
        assert!(keys.contains(&"DAL:1_2".to_string()));
        assert!(keys.contains(&"DAL:3_4".to_string()));
        let sol = solve_exact(&inst).unwrap();
        let chosen: Vec<&str> = sol.pairings.iter().map(|p| p.key()).collect();
        assert_eq!(chosen, vec!["DAL:1_2", "DAL:3_4"]);
    }

    #[test]
    fn refuses_large_inputs() {
        let inst = Instance::new(
            generate_schedule(&NetSpec::tiny(62, 0)).unwrap(),
            RuleSet::default(),
            CostModel::default(),
        );
        assert!(matches!(solve_exact(&inst), Err(OracleError::TooLarge { flights: 62, .. })));
    }
}
