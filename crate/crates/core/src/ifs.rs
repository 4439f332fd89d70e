//! Initial feasible solutions.
//!
//! The divide-and-cover heuristic repeatedly samples `K` uncovered flights,
//! enumerates the legal pairings that stay inside the sample, and covers the
//! coverable part of the sample exactly with a small set-covering IP. The
//! alternative seeds the optimizer with one artificial pairing per flight.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lp::{Column, ColumnPool, LpError};
use crate::mip::{solve_ip, MipError, MipOptions};
use crate::pairgen::{enumerate_pairings, DutyNetwork, PairgenError, PairingInput};
use crate::rules::{FlightId, Instance, Pairing, PairingRef, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IfsMethod {
    Ipdch,
    Artificial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IfsConfig {
    pub method: IfsMethod,
    pub k_lo_frac: f64,
    pub k_hi_frac: f64,
    pub artificial_pseudo_cost: f64,
    pub seed: u64,
}

impl Default for IfsConfig {
    fn default() -> Self {
        IfsConfig {
            method: IfsMethod::Ipdch,
            k_lo_frac: 0.125,
            k_hi_frac: 0.25,
            artificial_pseudo_cost: 1e6,
            seed: 0,
        }
    }
}

impl IfsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.k_lo_frac > 0.0 && self.k_lo_frac <= self.k_hi_frac && self.k_hi_frac < 1.0) {
            return Err("need 0 < k_lo_frac <= k_hi_frac < 1".into());
        }
        if !(self.artificial_pseudo_cost > 0.0) {
            return Err("artificial_pseudo_cost must be positive".into());
        }
        Ok(())
    }

    /// Inclusive range for the subset size `K` on `n` flights.
    pub fn k_range(&self, n: usize) -> (usize, usize) {
        let lo = ((self.k_lo_frac * n as f64).ceil() as usize).max(1);
        let hi = ((self.k_hi_frac * n as f64).floor() as usize).max(lo);
        (lo, hi)
    }
}

#[derive(Debug, Error)]
pub enum IfsError {
    #[error("no new flights covered in consecutive iterations ({uncovered} flights left)")]
    NoProgress { uncovered: usize },
    #[error(transparent)]
    Pairgen(#[from] PairgenError),
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// One divide-and-cover iteration, kept for auditing the sub-IPs.
#[derive(Clone, Debug)]
pub struct IpdchStep {
    /// Flights handed to pairing enumeration, ascending.
    pub sample: Vec<FlightId>,
    /// Sampled flights that were already covered; non-empty only after a stall.
    pub already_covered: Vec<FlightId>,
    /// Uncovered sampled flights that some enumerated pairing covers.
    pub coverable: Vec<FlightId>,
    pub n_candidates: usize,
    /// Sub-IP objective: pairing costs plus the penalty on every extra coverage.
    pub objective: f64,
    pub chosen: Vec<PairingRef>,
}

#[derive(Clone, Debug)]
pub struct IpdchRun {
    /// Chosen pairings, key-sorted.
    pub pairings: Vec<PairingRef>,
    pub steps: Vec<IpdchStep>,
}

/// Divide-and-cover initial solution.
pub fn ipdch(net: &DutyNetwork, inst: &Instance, cfg: &IfsConfig) -> Result<IpdchRun, IfsError> {
    let n = inst.n_flights();
    let psi = inst.deadhead_penalty();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (k_lo, k_hi) = cfg.k_range(n);
    let mut covered = vec![false; n];
    let mut n_covered = 0;
    let mut pool: Vec<FlightId> = (1..=n as FlightId).collect();
    let mut chosen: HashMap<String, PairingRef> = HashMap::new();
    let mut steps = Vec::new();
    // 0: plain sampling; 1: pad the sample with covered flights; 2: use every flight
    let mut stall = 0u8;

    while n_covered < n {
        if pool.is_empty() {
            pool = (1..=n as FlightId).filter(|&f| !covered[f as usize - 1]).collect();
        }
        let k = rng.gen_range(k_lo..=k_hi);
        let mut sample: Vec<FlightId> = if k >= pool.len() {
            std::mem::take(&mut pool)
        } else {
            let mut picks = index::sample(&mut rng, pool.len(), k).into_vec();
            picks.sort_unstable_by(|a, b| b.cmp(a));
            picks.into_iter().map(|i| pool.swap_remove(i)).collect()
        };
        match stall {
            0 => {}
            1 => {
                let done: Vec<FlightId> = (1..=n as FlightId).filter(|&f| covered[f as usize - 1]).collect();
                let pad = k.min(done.len());
                sample.extend(index::sample(&mut rng, done.len(), pad).into_iter().map(|i| done[i]));
            }
            _ => sample = (1..=n as FlightId).collect(),
        }
        sample.sort_unstable();
        sample.dedup();

        let step = cover_sample(&sample, &covered, net, inst, psi)?;
        let gained = step.coverable.len();
        for p in &step.chosen {
            for f in p.flights() {
                let slot = &mut covered[f as usize - 1];
                if !*slot {
                    *slot = true;
                    n_covered += 1;
                }
            }
            chosen.entry(p.key().to_string()).or_insert_with(|| p.clone());
        }
        // flights that found no pairing go back to the pool
        for &f in &sample {
            if !covered[f as usize - 1] && !pool.contains(&f) {
                pool.push(f);
            }
        }
        pool.retain(|&f| !covered[f as usize - 1]);
        pool.sort_unstable();
        steps.push(step);

        if gained > 0 {
            stall = 0;
        } else if stall < 2 {
            stall += 1;
            log::debug!("divide-and-cover stalled, widening samples (level {stall})");
        } else {
            return Err(IfsError::NoProgress {
                uncovered: n - n_covered,
            });
        }
    }

    let mut pairings: Vec<PairingRef> = chosen.into_values().collect();
    pairings.sort_by(|a, b| a.key().cmp(b.key()));
    Ok(IpdchRun { pairings, steps })
}

/// Exactly covers the uncovered coverable flights of `sample`. Rows are the
/// uncovered coverable flights; every already-covered flight a pairing touches
/// is charged as a deadhead.
fn cover_sample(
    sample: &[FlightId],
    covered: &[bool],
    net: &DutyNetwork,
    inst: &Instance,
    psi: f64,
) -> Result<IpdchStep, IfsError> {
    let candidates = enumerate_pairings(PairingInput::Flights(sample), net, inst)?;
    let coverable: BTreeSet<FlightId> = candidates
        .iter()
        .flat_map(|p| p.flights())
        .filter(|&f| !covered[f as usize - 1])
        .collect();
    let already_covered: Vec<FlightId> = sample.iter().copied().filter(|&f| covered[f as usize - 1]).collect();
    let coverable: Vec<FlightId> = coverable.into_iter().collect();
    let mut step = IpdchStep {
        sample: sample.to_vec(),
        already_covered,
        coverable,
        n_candidates: candidates.len(),
        objective: 0.0,
        chosen: Vec::new(),
    };
    if step.coverable.is_empty() {
        return Ok(step);
    }
    let row_of: HashMap<FlightId, usize> = step.coverable.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    let mut useful = Vec::new();
    let mut columns = Vec::new();
    for p in &candidates {
        let rows: Vec<usize> = p.flights().filter_map(|f| row_of.get(&f).copied()).collect();
        if rows.is_empty() {
            continue;
        }
        let extra = (p.n_flights() - rows.len()) as f64;
        columns.push(Column::new(p.key(), p.cost.total + psi * extra, rows));
        useful.push(p.clone());
    }
    let sub = ColumnPool::new(step.coverable.len(), columns)?;
    let res = solve_ip(&sub, psi, MipOptions::untimed())?;
    step.objective = res.objective;
    step.chosen = res.incumbent.iter().map(|&j| useful[j].clone()).collect();
    Ok(step)
}

/// One pseudo-pairing per flight at the configured flat cost.
pub fn artificial_pairings(schedule: &Schedule, cfg: &IfsConfig) -> Vec<PairingRef> {
    let mut out: Vec<PairingRef> = schedule
        .flights()
        .iter()
        .map(|f| PairingRef::new(Pairing::artificial(f, cfg.artificial_pseudo_cost)))
        .collect();
    out.sort_by(|a, b| a.key().cmp(b.key()));
    out
}

/// Initial solution by the configured method.
pub fn initial_solution(net: &DutyNetwork, inst: &Instance, cfg: &IfsConfig) -> Result<Vec<PairingRef>, IfsError> {
    match cfg.method {
        IfsMethod::Ipdch => Ok(ipdch(net, inst, cfg)?.pairings),
        IfsMethod::Artificial => Ok(artificial_pairings(&inst.schedule, cfg)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{generate_schedule, NetSpec};
    use crate::pairgen::build_duty_network;
    use crate::rules::fixtures::{airports, flight};
    use crate::rules::{CostModel, RuleSet};

    fn covers_all(pairings: &[PairingRef], n: usize) -> bool {
        let mut seen = vec![false; n];
        for p in pairings {
            for f in p.flights() {
                seen[f as usize - 1] = true;
            }
        }
        seen.into_iter().all(|b| b)
    }

    #[test]
    fn round_trip_fixture_yields_its_pairing() {
        let flights = vec![flight(1, "DAL", "AUS", 600, 660, "A"), flight(2, "AUS", "DAL", 720, 780, "A")];
        let inst = Instance::new(Schedule::new(flights, airports()).unwrap(), RuleSet::default(), CostModel::default());
        let net = build_duty_network(&inst).unwrap();
        for seed in 0..5 {
            let run = ipdch(&net, &inst, &IfsConfig { seed, ..IfsConfig::default() }).unwrap();
            assert_eq!(run.pairings.len(), 1);
            assert_eq!(run.pairings[0].key(), "DAL:1_2");
        }
    }

    #[test]
    fn k_range_matches_fractions() {
        let c = IfsConfig::default();
        assert_eq!(c.k_range(3200), (400, 800));
        assert_eq!(c.k_range(60), (8, 15));
        assert_eq!(c.k_range(2), (1, 1));
    }

    #[test]
    fn full_coverage_and_determinism_on_small_tier() {
        let inst = Instance::new(
            generate_schedule(&NetSpec::small(0)).unwrap(),
            RuleSet::default(),
            CostModel::default(),
        );
        let net = build_duty_network(&inst).unwrap();
        let cfg = IfsConfig { seed: 7, ..IfsConfig::default() };
        let a = ipdch(&net, &inst, &cfg).unwrap();
        let b = ipdch(&net, &inst, &cfg).unwrap();
        assert!(covers_all(&a.pairings, inst.n_flights()));
        let keys = |r: &IpdchRun| r.pairings.iter().map(|p| p.key().to_string()).collect::<Vec<_>>();
        assert_eq!(keys(&a), keys(&b));
        assert!(a.pairings.iter().all(|p| p.is_legal()));
    }

    #[test]
    fn artificial_set() {
        let flights: Vec<_> = (1..=5)
            .map(|i| flight(i, "DAL", "AUS", i as i64 * 1000, i as i64 * 1000 + 60, "A"))
            .collect();
        let s = Schedule::new(flights, airports()).unwrap();
        let cfg = IfsConfig::default();
        let ps = artificial_pairings(&s, &cfg);
        assert_eq!(ps.len(), 5);
        assert!((ps.iter().map(|p| p.cost.total).sum::<f64>() - 5e6).abs() < 1e-6);
        assert!(ps.iter().all(|p| !p.is_legal()));
        assert!(covers_all(&ps, 5));
    }

    #[test]
    fn config_validation() {
        assert!(IfsConfig::default().validate().is_ok());
        assert!(IfsConfig { k_lo_frac: 0.5, k_hi_frac: 0.25, ..IfsConfig::default() }.validate().is_err());
        assert!(IfsConfig { k_hi_frac: 1.0, ..IfsConfig::default() }.validate().is_err());
    }
}
