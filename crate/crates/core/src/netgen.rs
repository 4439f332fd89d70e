//! Seeded synthetic hub-and-spoke schedules.
//!
//! Every tail is based at a hub and flies out-and-back rotations to spokes of
//! that hub, overnighting at the hub. Every hub is a crew base, so each
//! out-and-back leg pair is already a legal one-duty pairing and every flight
//! is coverable. Crews may still change aircraft at hubs and overnight at
//! spokes, which is where the interesting pairings come from.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rules::{
    check_duty, check_pairing, Airport, CostModel, Flight, FlightId, Minutes, RuleSet, Schedule,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetSpec {
    pub n_airports: usize,
    pub n_hubs: usize,
    pub n_crew_bases: usize,
    pub n_flights: usize,
    pub n_days: usize,
    pub n_tails: usize,
    pub seed: u64,
}

impl NetSpec {
    /// Small tier: 60 flights over two hubs and three crew bases.
    pub fn small(seed: u64) -> Self {
        NetSpec {
            n_airports: 10,
            n_hubs: 2,
            n_crew_bases: 3,
            n_flights: 60,
            n_days: 3,
            n_tails: 5,
            seed,
        }
    }

    /// Tiny tier, for exhaustive oracles.
    pub fn tiny(n_flights: usize, seed: u64) -> Self {
        NetSpec {
            n_airports: 6,
            n_hubs: 2,
            n_crew_bases: 2,
            n_flights,
            n_days: 2,
            n_tails: (n_flights / 6).max(1),
            seed,
        }
    }

    /// Medium tier, for property tests only.
    pub fn medium(seed: u64) -> Self {
        NetSpec {
            n_airports: 30,
            n_hubs: 3,
            n_crew_bases: 5,
            n_flights: 600,
            n_days: 5,
            n_tails: 40,
            seed,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetgenError {
    #[error("infeasible network spec: {0}")]
    SpecInfeasible(String),
}

const DAY: Minutes = 1440;
const FIRST_DEPARTURE: Minutes = 6 * 60;
const LATEST_ARRIVAL: Minutes = 23 * 60 + 30;
const MIN_BLOCK: Minutes = 45;
const MAX_BLOCK: Minutes = 150;

fn airport_code(prefix: char, i: usize) -> String {
    let a = (b'A' + (i / 26) as u8) as char;
    let b = (b'A' + (i % 26) as u8) as char;
    format!("{prefix}{a}{b}")
}

pub fn generate(spec: &NetSpec) -> Result<(Vec<Flight>, Vec<Airport>), NetgenError> {
    let infeasible = |m: &str| Err(NetgenError::SpecInfeasible(m.to_string()));
    if spec.n_hubs == 0 {
        return infeasible("at least one hub is required");
    }
    if !(spec.n_hubs <= spec.n_crew_bases && spec.n_crew_bases <= spec.n_airports) {
        return infeasible("need n_hubs <= n_crew_bases <= n_airports");
    }
    if spec.n_airports <= spec.n_hubs {
        return infeasible("need at least one spoke airport");
    }
    if spec.n_tails == 0 || spec.n_flights < 2 * spec.n_tails {
        return infeasible("need n_flights >= 2 * n_tails");
    }
    if !spec.n_flights.is_multiple_of(2) {
        return infeasible("rotations are out-and-back, n_flights must be even");
    }
    if spec.n_days == 0 {
        return infeasible("need at least one day");
    }
    let total_pairs = spec.n_flights / 2;
    let max_pairs_per_tail = total_pairs.div_ceil(spec.n_tails);
    let max_pairs_per_day = max_pairs_per_tail.div_ceil(spec.n_days);
    // best case: two minimal blocks and two minimal turns per leg pair
    let shortest = max_pairs_per_day as Minutes * (2 * MIN_BLOCK + 2 * 35);
    if FIRST_DEPARTURE + shortest > LATEST_ARRIVAL + 35 {
        return infeasible("rotations do not fit into the day count");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_spokes = spec.n_airports - spec.n_hubs;
    let coords: Vec<(f64, f64)> = (0..spec.n_airports)
        .map(|_| (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)))
        .collect();
    let mut codes: Vec<String> = (0..spec.n_hubs).map(|i| airport_code('H', i)).collect();
    codes.extend((0..n_spokes).map(|i| airport_code('S', i)));
    let dist = |a: usize, b: usize| {
        let (dx, dy) = (coords[a].0 - coords[b].0, coords[a].1 - coords[b].1);
        (dx * dx + dy * dy).sqrt()
    };
    let mut spokes_of: Vec<Vec<usize>> = vec![Vec::new(); spec.n_hubs];
    for s in spec.n_hubs..spec.n_airports {
        let hub = (0..spec.n_hubs)
            .min_by(|&a, &b| dist(s, a).total_cmp(&dist(s, b)))
            .expect("n_hubs > 0");
        spokes_of[hub].push(s);
    }
    // a hub without spokes flies to the other hubs instead
    for h in 0..spec.n_hubs {
        if spokes_of[h].is_empty() {
            spokes_of[h] = if spec.n_hubs > 1 {
                (0..spec.n_hubs).filter(|&o| o != h).collect()
            } else {
                (spec.n_hubs..spec.n_airports).collect()
            };
        }
    }
    let block = |a: usize, b: usize| ((40.0 + dist(a, b) / 8.0).round() as Minutes).clamp(MIN_BLOCK, MAX_BLOCK);

    // spoke bases are the spokes nearest to their hubs
    let mut spoke_rank: Vec<usize> = (spec.n_hubs..spec.n_airports).collect();
    spoke_rank.sort_by(|&a, &b| {
        let da = (0..spec.n_hubs).map(|h| dist(a, h)).fold(f64::INFINITY, f64::min);
        let db = (0..spec.n_hubs).map(|h| dist(b, h)).fold(f64::INFINITY, f64::min);
        da.total_cmp(&db).then(a.cmp(&b))
    });
    let mut is_base = vec![false; spec.n_airports];
    for b in is_base.iter_mut().take(spec.n_hubs) {
        *b = true;
    }
    for &s in spoke_rank.iter().take(spec.n_crew_bases - spec.n_hubs) {
        is_base[s] = true;
    }
    let airports: Vec<Airport> = (0..spec.n_airports)
        .map(|i| Airport {
            code: codes[i].clone(),
            city: format!("C{}", &codes[i][1..]) + if i < spec.n_hubs { "H" } else { "S" },
            is_crew_base: is_base[i],
        })
        .collect();

    struct Leg {
        origin: usize,
        destination: usize,
        dep: Minutes,
        arr: Minutes,
        tail: usize,
    }
    let mut legs = Vec::with_capacity(spec.n_flights);
    for tail in 0..spec.n_tails {
        let pairs = total_pairs / spec.n_tails + usize::from(tail < total_pairs % spec.n_tails);
        let hub = tail % spec.n_hubs;
        for day in 0..spec.n_days {
            let today = pairs / spec.n_days + usize::from(day < pairs % spec.n_days);
            let mut t = day as Minutes * DAY + FIRST_DEPARTURE + rng.gen_range(0..=90);
            for _ in 0..today {
                let spoke = *spokes_of[hub].choose(&mut rng).expect("non-empty");
                let out = block(hub, spoke);
                let turn = rng.gen_range(35..=110);
                let back = block(spoke, hub);
                legs.push(Leg { origin: hub, destination: spoke, dep: t, arr: t + out, tail });
                let dep_back = t + out + turn;
                legs.push(Leg { origin: spoke, destination: hub, dep: dep_back, arr: dep_back + back, tail });
                if dep_back + back > day as Minutes * DAY + LATEST_ARRIVAL {
                    return infeasible("rotations do not fit into the day count");
                }
                t = dep_back + back + rng.gen_range(35..=110);
            }
        }
    }
    legs.sort_by_key(|l| (l.dep, l.tail, l.origin));
    let flights: Vec<Flight> = legs
        .iter()
        .enumerate()
        .map(|(i, l)| Flight {
            id: i as FlightId + 1,
            origin: codes[l.origin].clone(),
            destination: codes[l.destination].clone(),
            dep: l.dep,
            arr: l.arr,
            tail: format!("T{:02}", l.tail + 1),
        })
        .collect();

    verify_coverable(&flights, &airports)?;
    Ok((flights, airports))
}

/// Checks that every flight sits in a legal out-and-back pairing under default rules.
fn verify_coverable(flights: &[Flight], airports: &[Airport]) -> Result<(), NetgenError> {
    let schedule = Schedule::new(flights.to_vec(), airports.to_vec())
        .map_err(|e| NetgenError::SpecInfeasible(e.to_string()))?;
    let rules = RuleSet::default();
    let cm = CostModel::default();
    let mut covered = vec![false; flights.len()];
    for out in flights {
        if covered[out.row()] || !schedule.airport(&out.origin).is_some_and(|a| a.is_crew_base) {
            continue;
        }
        let back = flights.iter().find(|b| {
            b.tail == out.tail && b.origin == out.destination && b.destination == out.origin && b.dep > out.arr
        });
        if let Some(back) = back {
            let legal = check_duty(&[out.id, back.id], &out.origin, &schedule, &rules)
                .ok()
                .and_then(|d| check_pairing(&[d], &out.origin, &schedule, &rules, &cm).ok())
                .is_some();
            if legal {
                covered[out.row()] = true;
                covered[back.row()] = true;
            }
        }
    }
    match covered.iter().position(|&c| !c) {
        None => Ok(()),
        Some(i) => Err(NetgenError::SpecInfeasible(format!(
            "flight {} has no legal out-and-back pairing",
            i + 1
        ))),
    }
}

pub fn generate_schedule(spec: &NetSpec) -> Result<Schedule, NetgenError> {
    let (flights, airports) = generate(spec)?;
    Schedule::new(flights, airports).map_err(|e| NetgenError::SpecInfeasible(e.to_string()))
}
