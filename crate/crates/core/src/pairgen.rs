//! Legal duty and pairing enumeration.
//!
//! The duty network is built once per schedule: a flight-connection graph of
//! legal sit connections, then per crew base every legal duty (depth-first
//! extension of each flight along the graph) and the overnight-rest graph
//! between those duties. Pairings are enumerated on demand from a flight
//! subset or a duty subset by a depth-first walk over the overnight graph.
//!
//! Each crew base is processed by its own worker. Results are merged and
//! sorted by key, so output never depends on worker scheduling.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::rules::{
    assemble_pairing, check_duty, ConnectionKind, Duty, FlightId, Instance, PairingRef, Schedule,
};

/// Default cap on the number of pairings a single enumeration may produce.
pub const DEFAULT_PAIRING_CAP: usize = 5_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PairgenError {
    #[error("flights without any legal duty: {0:?}")]
    UncoverableFlights(Vec<FlightId>),
    #[error("pairing enumeration exceeded the cap of {cap} pairings")]
    Capacity { cap: usize },
    #[error("unknown flight {0} in input set")]
    UnknownFlight(FlightId),
    #[error("duty reference {base}/{index} out of range")]
    BadDutyRef { base: usize, index: usize },
}

/// Legal sit connections between flights.
#[derive(Clone, Debug)]
pub struct FlightConnectionGraph {
    /// Successor flight ids per flight row, ascending.
    adjacency: Vec<Vec<FlightId>>,
}

impl FlightConnectionGraph {
    pub fn build(schedule: &Schedule, rules: &crate::rules::RuleSet) -> Self {
        let mut by_origin: HashMap<&str, Vec<(i64, FlightId)>> = HashMap::new();
        for f in schedule.flights() {
            by_origin.entry(&f.origin).or_default().push((f.dep, f.id));
        }
        for v in by_origin.values_mut() {
            v.sort_unstable();
        }
        let adjacency = schedule
            .flights()
            .iter()
            .map(|f| {
                let Some(deps) = by_origin.get(f.destination.as_str()) else {
                    return Vec::new();
                };
                let lo = f.arr + rules.sit_min;
                let hi = f.arr + rules.sit_max;
                let from = deps.partition_point(|&(dep, _)| dep < lo);
                let mut succ: Vec<FlightId> = deps[from..]
                    .iter()
                    .take_while(|&&(dep, _)| dep <= hi)
                    .map(|&(_, id)| id)
                    .collect();
                succ.sort_unstable();
                debug_assert!(succ.iter().all(|&s| {
                    crate::rules::check_connection(f, schedule.flight(s), rules) == ConnectionKind::Sit
                }));
                succ
            })
            .collect();
        FlightConnectionGraph { adjacency }
    }

    pub fn successors(&self, id: FlightId) -> &[FlightId] {
        &self.adjacency[id as usize - 1]
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }
}

/// Legal duties of one crew base and their overnight-rest graph.
#[derive(Clone, Debug)]
pub struct BaseDuties {
    pub base: String,
    /// Sorted by duty key.
    pub duties: Vec<Arc<Duty>>,
    /// Overnight successors per duty index, ascending.
    pub overnight: Vec<Vec<u32>>,
}

impl BaseDuties {
    pub fn n_overnight_edges(&self) -> usize {
        self.overnight.iter().map(Vec::len).sum()
    }
}

#[derive(Clone, Debug)]
pub struct DutyNetwork {
    pub flight_graph: FlightConnectionGraph,
    /// One entry per crew base, ordered by base code.
    pub bases: Vec<BaseDuties>,
}

/// Identifies one duty of one crew base in a [`DutyNetwork`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DutyRef {
    pub base: usize,
    pub index: usize,
}

impl DutyNetwork {
    pub fn duty(&self, r: DutyRef) -> &Duty {
        &self.bases[r.base].duties[r.index]
    }

    pub fn n_duties(&self) -> usize {
        self.bases.iter().map(|b| b.duties.len()).sum()
    }

    /// All duty references, base-major.
    pub fn duty_refs(&self) -> Vec<DutyRef> {
        self.bases
            .iter()
            .enumerate()
            .flat_map(|(base, b)| (0..b.duties.len()).map(move |index| DutyRef { base, index }))
            .collect()
    }
}

/// Enumerates legal duties per crew base and the overnight-rest graphs.
pub fn build_duty_network(inst: &Instance) -> Result<DutyNetwork, PairgenError> {
    let schedule = &inst.schedule;
    let flight_graph = FlightConnectionGraph::build(schedule, &inst.rules);
    let bases: Vec<BaseDuties> = schedule
        .crew_bases()
        .into_par_iter()
        .map(|base| {
            let duties: Vec<Arc<Duty>> = enumerate_duties(&base, inst, &flight_graph)
                .into_iter()
                .map(Arc::new)
                .collect();
            let overnight = overnight_graph(&duties, &inst.rules);
            BaseDuties {
                base,
                duties,
                overnight,
            }
        })
        .collect();

    if let Some(first) = bases.first() {
        let mut seen = vec![false; schedule.len()];
        for d in &first.duties {
            for &f in &d.flights {
                seen[f as usize - 1] = true;
            }
        }
        let missing: Vec<FlightId> = seen
            .iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(i, _)| i as FlightId + 1)
            .collect();
        if !missing.is_empty() {
            return Err(PairgenError::UncoverableFlights(missing));
        }
    }
    Ok(DutyNetwork {
        flight_graph,
        bases,
    })
}

fn enumerate_duties(base: &str, inst: &Instance, graph: &FlightConnectionGraph) -> Vec<Duty> {
    let schedule = &inst.schedule;
    let rules = &inst.rules;
    let mut out = Vec::new();
    let mut seq: Vec<FlightId> = Vec::with_capacity(rules.max_flights_per_duty);
    // (flight, position of the next successor to try)
    let mut stack: Vec<(FlightId, usize)> = Vec::new();
    for f in schedule.flights() {
        seq.clear();
        seq.push(f.id);
        let Ok(duty) = check_duty(&seq, base, schedule, rules) else {
            continue;
        };
        out.push(duty);
        stack.push((f.id, 0));
        while let Some(top) = stack.last_mut() {
            let (parent, pos) = *top;
            let succ = graph.successors(parent);
            if pos >= succ.len() {
                stack.pop();
                seq.pop();
                continue;
            }
            top.1 += 1;
            let child = succ[pos];
            seq.push(child);
            match check_duty(&seq, base, schedule, rules) {
                Ok(duty) => {
                    out.push(duty);
                    stack.push((child, 0));
                }
                Err(_) => {
                    seq.pop();
                }
            }
        }
    }
    out.sort_by_cached_key(Duty::key);
    out.dedup_by(|a, b| a.flights == b.flights);
    out
}

fn overnight_graph(duties: &[Arc<Duty>], rules: &crate::rules::RuleSet) -> Vec<Vec<u32>> {
    let mut by_origin: HashMap<&str, Vec<(i64, u32)>> = HashMap::new();
    for (i, d) in duties.iter().enumerate() {
        by_origin
            .entry(&d.origin)
            .or_default()
            .push((d.first_dep, i as u32));
    }
    for v in by_origin.values_mut() {
        v.sort_unstable();
    }
    duties
        .iter()
        .map(|d| {
            let Some(deps) = by_origin.get(d.destination.as_str()) else {
                return Vec::new();
            };
            let lo = d.last_arr + rules.night_min;
            let hi = d.last_arr + rules.night_max;
            let from = deps.partition_point(|&(dep, _)| dep < lo);
            let mut succ: Vec<u32> = deps[from..]
                .iter()
                .take_while(|&&(dep, _)| dep <= hi)
                .map(|&(_, i)| i)
                .collect();
            succ.sort_unstable();
            succ
        })
        .collect()
}

/// Restricts pairing enumeration to a flight set or a duty set.
#[derive(Clone, Copy, Debug)]
pub enum PairingInput<'a> {
    All,
    Flights(&'a [FlightId]),
    Duties(&'a [DutyRef]),
}

/// Per-base active duty masks for an input restriction. Duties covering any
/// flight outside a flight set are dropped.
fn active_masks(
    input: PairingInput<'_>,
    net: &DutyNetwork,
    n_flights: usize,
) -> Result<Vec<Vec<bool>>, PairgenError> {
    match input {
        PairingInput::All => Ok(net.bases.iter().map(|b| vec![true; b.duties.len()]).collect()),
        PairingInput::Flights(ids) => {
            let mut allowed = vec![false; n_flights];
            for &id in ids {
                let slot = (id as usize)
                    .checked_sub(1)
                    .and_then(|i| allowed.get_mut(i))
                    .ok_or(PairgenError::UnknownFlight(id))?;
                *slot = true;
            }
            Ok(net
                .bases
                .iter()
                .map(|b| {
                    b.duties
                        .iter()
                        .map(|d| d.flights.iter().all(|&f| allowed[f as usize - 1]))
                        .collect()
                })
                .collect())
        }
        PairingInput::Duties(refs) => {
            let mut masks: Vec<Vec<bool>> =
                net.bases.iter().map(|b| vec![false; b.duties.len()]).collect();
            for r in refs {
                let slot = masks
                    .get_mut(r.base)
                    .and_then(|m| m.get_mut(r.index))
                    .ok_or(PairgenError::BadDutyRef {
                        base: r.base,
                        index: r.index,
                    })?;
                *slot = true;
            }
            Ok(masks)
        }
    }
}

/// Depth-first walk over the overnight graph of one base, calling `emit` with
/// the duty-index sequence of every legal pairing. Returns early with `false`
/// when `emit` asks to stop.
fn walk_base<F>(bd: &BaseDuties, active: &[bool], schedule: &Schedule, inst: &Instance, mut emit: F) -> bool
where
    F: FnMut(&[u32]) -> bool,
{
    let rules = &inst.rules;
    let base = bd.base.as_str();
    let base_city = schedule.airport(base).map(|a| a.city.as_str());
    let overnight_allowed = |airport: &str| {
        !rules.forbid_overnight_in_base_city
            || schedule.airport(airport).map(|a| a.city.as_str()) != base_city
    };
    let mut seq: Vec<u32> = Vec::with_capacity(rules.max_duties_per_pairing);
    let mut stack: Vec<(u32, usize)> = Vec::new();
    for (seed, duty) in bd.duties.iter().enumerate() {
        if !active[seed] || duty.origin != base {
            continue;
        }
        seq.clear();
        seq.push(seed as u32);
        if duty.destination == base {
            if !emit(&seq) {
                return false;
            }
            continue;
        }
        if rules.max_duties_per_pairing < 2 {
            continue;
        }
        stack.clear();
        stack.push((seed as u32, 0));
        while let Some(top) = stack.last_mut() {
            let (parent, pos) = *top;
            let succ = &bd.overnight[parent as usize];
            if pos >= succ.len() {
                stack.pop();
                seq.pop();
                continue;
            }
            top.1 += 1;
            let child = succ[pos];
            if !active[child as usize] {
                continue;
            }
            // the rest happens at the parent's arrival airport
            if !overnight_allowed(&bd.duties[parent as usize].destination) {
                continue;
            }
            seq.push(child);
            let cd = &bd.duties[child as usize];
            if cd.destination == base {
                if !emit(&seq) {
                    return false;
                }
                seq.pop();
            } else if seq.len() < rules.max_duties_per_pairing && !bd.overnight[child as usize].is_empty() {
                stack.push((child, 0));
            } else {
                seq.pop();
            }
        }
    }
    true
}

/// Enumerates legal pairings for a flight set or duty set, costed and sorted by key.
pub fn enumerate_pairings(
    input: PairingInput<'_>,
    net: &DutyNetwork,
    inst: &Instance,
) -> Result<Vec<PairingRef>, PairgenError> {
    enumerate_pairings_capped(input, net, inst, DEFAULT_PAIRING_CAP)
}

pub fn enumerate_pairings_capped(
    input: PairingInput<'_>,
    net: &DutyNetwork,
    inst: &Instance,
    cap: usize,
) -> Result<Vec<PairingRef>, PairgenError> {
    let masks = active_masks(input, net, inst.n_flights())?;
    let per_base: Vec<Option<Vec<PairingRef>>> = net
        .bases
        .par_iter()
        .zip(masks.par_iter())
        .map(|(bd, active)| {
            let mut out = Vec::new();
            let finished = walk_base(bd, active, &inst.schedule, inst, |seq| {
                let duties = seq.iter().map(|&i| bd.duties[i as usize].clone()).collect();
                out.push(PairingRef::new(assemble_pairing(duties, &bd.base, &inst.cost)));
                out.len() <= cap
            });
            finished.then_some(out)
        })
        .collect();
    let mut all = Vec::new();
    for part in per_base {
        all.extend(part.ok_or(PairgenError::Capacity { cap })?);
    }
    if all.len() > cap {
        return Err(PairgenError::Capacity { cap });
    }
    all.sort_unstable_by(|a, b| a.key().cmp(b.key()));
    all.dedup_by(|a, b| a.key() == b.key());
    Ok(all)
}

/// Same traversal as [`enumerate_pairings`] without materializing pairings.
pub fn count_pairings(input: PairingInput<'_>, net: &DutyNetwork, inst: &Instance) -> Result<usize, PairgenError> {
    let masks = active_masks(input, net, inst.n_flights())?;
    Ok(net
        .bases
        .par_iter()
        .zip(masks.par_iter())
        .map(|(bd, active)| {
            let mut n = 0usize;
            walk_base(bd, active, &inst.schedule, inst, |_| {
                n += 1;
                true
            });
            n
        })
        .sum())
}

/// Flights that no legal pairing covers.
pub fn uncoverable_flights(net: &DutyNetwork, inst: &Instance) -> Vec<FlightId> {
    let n = inst.n_flights();
    let covered: Vec<Vec<bool>> = net
        .bases
        .par_iter()
        .map(|bd| {
            let active = vec![true; bd.duties.len()];
            let mut covered = vec![false; n];
            walk_base(bd, &active, &inst.schedule, inst, |seq| {
                for &d in seq {
                    for &f in &bd.duties[d as usize].flights {
                        covered[f as usize - 1] = true;
                    }
                }
                true
            });
            covered
        })
        .collect();
    (0..n)
        .filter(|&i| !covered.iter().any(|c| c[i]))
        .map(|i| i as FlightId + 1)
        .collect()
}

/// Per-base duty and pairing counts, for diagnostics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseCounts {
    pub base: String,
    pub duties: usize,
    pub overnight_edges: usize,
    pub pairings: usize,
}

pub fn base_counts(net: &DutyNetwork, inst: &Instance) -> Vec<BaseCounts> {
    net.bases
        .par_iter()
        .map(|bd| {
            let active = vec![true; bd.duties.len()];
            let mut pairings = 0;
            walk_base(bd, &active, &inst.schedule, inst, |_| {
                pairings += 1;
                true
            });
            BaseCounts {
                base: bd.base.clone(),
                duties: bd.duties.len(),
                overnight_edges: bd.n_overnight_edges(),
                pairings,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::fixtures::{airports, flight};
    use crate::rules::{CostModel, RuleSet};

    const H: i64 = 60;

    fn inst(flights: Vec<crate::rules::Flight>) -> Instance {
        Instance::new(
            Schedule::new(flights, airports()).unwrap(),
            RuleSet::default(),
            CostModel::default(),
        )
    }

    fn duty_keys(bd: &BaseDuties) -> Vec<String> {
        bd.duties.iter().map(|d| d.key()).collect()
    }

    #[test]
    fn unconnected_flights_give_single_flight_duties() {
        let i = inst(vec![
            flight(1, "DAL", "AUS", 6 * H, 8 * H, "A"),
            flight(2, "ORD", "MEM", 6 * H, 8 * H, "B"),
        ]);
        let net = build_duty_network(&i).unwrap();
        assert_eq!(net.bases.len(), 2);
        for bd in &net.bases {
            assert_eq!(duty_keys(bd), vec!["1", "2"]);
            assert_eq!(bd.n_overnight_edges(), 0);
        }
        assert_eq!(net.flight_graph.n_edges(), 0);
    }

    #[test]
    fn chain_prefix_enumeration() {
        let i = inst(vec![
            flight(1, "DAL", "AUS", 6 * H, 7 * H, "A"),
            flight(2, "AUS", "MEM", 8 * H, 9 * H, "A"),
            flight(3, "MEM", "ORD", 10 * H, 11 * H, "A"),
        ]);
        let net = build_duty_network(&i).unwrap();
        let mut keys = duty_keys(&net.bases[0]);
        keys.sort();
        assert_eq!(keys, vec!["1", "1_2", "1_2_3", "2", "2_3", "3"]);
    }

    #[test]
    fn round_trip_gives_one_pairing() {
        let i = inst(vec![
            flight(1, "DAL", "AUS", 6 * H, 7 * H, "A"),
            flight(2, "AUS", "DAL", 7 * H + 45, 9 * H, "A"),
        ]);
        let net = build_duty_network(&i).unwrap();
        let ps = enumerate_pairings(PairingInput::Flights(&[1, 2]), &net, &i).unwrap();
        let keys: Vec<_> = ps.iter().map(|p| p.key().to_string()).collect();
        assert_eq!(keys, vec!["DAL:1_2"]);
        assert_eq!(count_pairings(PairingInput::Flights(&[1, 2]), &net, &i).unwrap(), 1);
        assert_eq!(count_pairings(PairingInput::Flights(&[]), &net, &i).unwrap(), 0);
    }

    #[test]
    fn flights_away_from_bases_give_nothing() {
        let i = inst(vec![
            flight(1, "AUS", "MEM", 6 * H, 7 * H, "A"),
            flight(2, "MEM", "AUS", 8 * H, 9 * H, "A"),
        ]);
        let net = build_duty_network(&i).unwrap();
        assert!(enumerate_pairings(PairingInput::All, &net, &i).unwrap().is_empty());
        assert_eq!(uncoverable_flights(&net, &i), vec![1, 2]);
    }

    #[test]
    fn partial_overlap_duties_are_dropped() {
        let i = inst(vec![
            flight(1, "DAL", "AUS", 6 * H, 7 * H, "A"),
            flight(2, "AUS", "DAL", 8 * H, 9 * H, "A"),
            flight(3, "DAL", "MEM", 10 * H, 11 * H, "A"),
            flight(4, "MEM", "DAL", 12 * H, 13 * H, "A"),
        ]);
        let net = build_duty_network(&i).unwrap();
        let all = enumerate_pairings(PairingInput::All, &net, &i).unwrap();
        let keys: Vec<_> = all.iter().map(|p| p.key()).collect();
        assert_eq!(keys, vec!["DAL:1_2", "DAL:1_2_3_4", "DAL:3_4"]);
        let sub = enumerate_pairings(PairingInput::Flights(&[1, 2, 3]), &net, &i).unwrap();
        let keys: Vec<_> = sub.iter().map(|p| p.key()).collect();
        assert_eq!(keys, vec!["DAL:1_2"]);
    }

    #[test]
    fn duty_input_mode() {
        let i = inst(vec![
            flight(1, "DAL", "AUS", 6 * H, 7 * H, "A"),
            flight(2, "AUS", "DAL", 8 * H, 9 * H, "A"),
        ]);
        let net = build_duty_network(&i).unwrap();
        let dal = net.bases.iter().position(|b| b.base == "DAL").unwrap();
        let idx = net.bases[dal].duties.iter().position(|d| d.key() == "1_2").unwrap();
        let refs = [DutyRef { base: dal, index: idx }];
        let ps = enumerate_pairings(PairingInput::Duties(&refs), &net, &i).unwrap();
        assert_eq!(ps.len(), 1);
        let bad = [DutyRef { base: 9, index: 0 }];
        assert!(enumerate_pairings(PairingInput::Duties(&bad), &net, &i).is_err());
    }

    #[test]
    fn capacity_guard() {
        let i = inst(vec![
            flight(1, "DAL", "AUS", 6 * H, 7 * H, "A"),
            flight(2, "AUS", "DAL", 8 * H, 9 * H, "A"),
            flight(3, "DAL", "MEM", 10 * H, 11 * H, "A"),
            flight(4, "MEM", "DAL", 12 * H, 13 * H, "A"),
        ]);
        let net = build_duty_network(&i).unwrap();
        assert_eq!(
            enumerate_pairings_capped(PairingInput::All, &net, &i, 2).unwrap_err(),
            PairgenError::Capacity { cap: 2 }
        );
    }

    #[test]
    fn flight_without_duty_is_reported() {
        let i = inst(vec![flight(1, "DAL", "AUS", 0, 9 * H, "A")]);
        assert_eq!(
            build_duty_network(&i).unwrap_err(),
            PairgenError::UncoverableFlights(vec![1])
        );
    }
}
