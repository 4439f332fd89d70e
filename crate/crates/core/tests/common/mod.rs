#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crewpair::lp::{Column, ColumnPool};
use crewpair::netgen::{generate_schedule, NetSpec};
use crewpair::rules::{CostModel, Flight, FlightId, Instance, Pairing, RuleSet};

pub fn instance(spec: &NetSpec) -> Instance {
    Instance::new(generate_schedule(spec).unwrap(), RuleSet::default(), CostModel::default())
}

/// Five seeded oracle-sized fixtures.
pub fn tiny_fixtures() -> Vec<Instance> {
    [(24, 0), (20, 1), (24, 2), (22, 3), (24, 4)]
        .iter()
        .map(|&(n, seed)| instance(&NetSpec::tiny(n, seed)))
        .collect()
}

pub fn small_fixtures() -> Vec<Instance> {
    (0..3).map(|seed| instance(&NetSpec::small(seed))).collect()
}

fn fl(inst: &Instance, id: FlightId) -> &Flight {
    &inst.schedule.flights()[id as usize - 1]
}

fn city<'a>(inst: &'a Instance, code: &'a str) -> &'a str {
    inst.schedule
        .airports()
        .iter()
        .find(|a| a.code == code)
        .map(|a| a.city.as_str())
        .unwrap_or(code)
}

/// Legality of a duty split, re-derived from the raw flights and rule values.
pub fn independently_legal(duties: &[Vec<FlightId>], base: &str, inst: &Instance) -> bool {
    let r = &inst.rules;
    if duties.is_empty() || duties.len() > r.max_duties_per_pairing {
        return false;
    }
    if !inst.schedule.airports().iter().any(|a| a.code == base && a.is_crew_base) {
        return false;
    }
    for d in duties {
        if d.is_empty() || d.len() > r.max_flights_per_duty {
            return false;
        }
        let mut block = 0;
        for (i, &id) in d.iter().enumerate() {
            let f = fl(inst, id);
            block += f.arr - f.dep;
            if i > 0 {
                let p = fl(inst, d[i - 1]);
                let gap = f.dep - p.arr;
                if p.destination != f.origin || gap < r.sit_min || gap > r.sit_max {
                    return false;
                }
            }
        }
        let (a, b) = (fl(inst, d[0]), fl(inst, *d.last().unwrap()));
        if b.arr + r.debriefing - (a.dep - r.briefing) > r.max_duty_elapsed || block > r.max_duty_flying {
            return false;
        }
    }
    let first = fl(inst, duties[0][0]);
    let last = fl(inst, *duties.last().unwrap().last().unwrap());
    if first.origin != base || last.destination != base {
        return false;
    }
    for w in duties.windows(2) {
        let p = fl(inst, *w[0].last().unwrap());
        let n = fl(inst, w[1][0]);
        let gap = n.dep - p.arr;
        if p.destination == base || p.destination != n.origin || gap < r.night_min || gap > r.night_max {
            return false;
        }
        if r.forbid_overnight_in_base_city && city(inst, &p.destination) == city(inst, base) {
            return false;
        }
    }
    true
}

/// Pairing cost re-derived from the raw flights.
pub fn independent_cost(duties: &[Vec<FlightId>], cm: &CostModel, r: &RuleSet, inst: &Instance) -> f64 {
    let flights: Vec<&Flight> = duties.iter().flatten().map(|&id| fl(inst, id)).collect();
    let hours = flights.iter().map(|f| (f.arr - f.dep) as f64).sum::<f64>() / 60.0;
    let first = flights[0];
    let last = flights[flights.len() - 1];
    let tafb = (last.arr + r.debriefing - (first.dep - r.briefing)) as f64 / 60.0;
    let changes: usize = duties
        .iter()
        .map(|d| d.windows(2).filter(|w| fl(inst, w[0]).tail != fl(inst, w[1]).tail).count())
        .sum();
    cm.flying_rate * hours
        + cm.flying_rate * (cm.mg_hours_per_duty * duties.len() as f64 - hours).max(0.0)
        + cm.hotel_per_night * (duties.len() - 1) as f64
        + cm.meal_rate * tafb
        + cm.crew_change_cost * changes as f64
}

pub fn duty_split(p: &Pairing) -> Vec<Vec<FlightId>> {
    p.duties.iter().map(|d| d.flights.clone()).collect()
}

/// Random covering pool; every row is covered at least once.
pub fn random_pool(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize) -> ColumnPool {
    let n_rows = rng.gen_range(5..=max_rows);
    let n_cols = rng.gen_range(n_rows..=max_cols);
    let mut cols = Vec::with_capacity(n_cols);
    let mut covered = vec![false; n_rows];
    for j in 0..n_cols {
        let k = rng.gen_range(1..=5.min(n_rows));
        let rows: Vec<usize> = rand::seq::index::sample(rng, n_rows, k).into_vec();
        for &r in &rows {
            covered[r] = true;
        }
        let cost = rng.gen_range(300.0..1500.0) * (k as f64).sqrt();
        cols.push(Column::new(format!("c{j}"), (cost * 100.0_f64).round() / 100.0, rows));
    }
    for (r, c) in covered.iter().enumerate() {
        if !c {
            cols.push(Column::new(format!("s{r}"), 2000.0, vec![r]));
        }
    }
    ColumnPool::new(n_rows, cols).unwrap()
}

/// Exact minimum of `sum (c_j + psi |a_j|) x_j - n_rows psi` over covers, by
/// depth-first search branching on the uncovered row with fewest options.
pub fn exact_cover(n_rows: usize, cols: &[(f64, Vec<usize>)], psi: f64) -> Option<f64> {
    let adj: Vec<f64> = cols.iter().map(|(c, rows)| c + psi * rows.len() as f64).collect();
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
    for (j, (_, rows)) in cols.iter().enumerate() {
        for &r in rows {
            by_row[r].push(j);
        }
    }
    if by_row.iter().any(Vec::is_empty) {
        return None;
    }
    // cheapest per-row share of any column through the row
    let share: Vec<f64> = by_row
        .iter()
        .map(|js| js.iter().map(|&j| adj[j] / cols[j].1.len() as f64).fold(f64::INFINITY, f64::min))
        .collect();

    struct S<'a> {
        cols: &'a [(f64, Vec<usize>)],
        adj: &'a [f64],
        by_row: &'a [Vec<usize>],
        share: &'a [f64],
        best: f64,
    }
    fn go(s: &mut S, cover: &mut [u32], cost: f64) {
        let mut bound = cost;
        let mut pick: Option<usize> = None;
        for r in 0..cover.len() {
            if cover[r] == 0 {
                bound += s.share[r];
                if pick.is_none_or(|p| s.by_row[r].len() < s.by_row[p].len()) {
                    pick = Some(r);
                }
            }
        }
        if bound >= s.best - 1e-9 {
            return;
        }
        let Some(r) = pick else {
            s.best = cost;
            return;
        };
        for k in 0..s.by_row[r].len() {
            let j = s.by_row[r][k];
            for &i in &s.cols[j].1 {
                cover[i] += 1;
            }
            go(s, cover, cost + s.adj[j]);
            for &i in &s.cols[j].1 {
                cover[i] -= 1;
            }
        }
    }
    let mut s = S {
        cols,
        adj: &adj,
        by_row: &by_row,
        share: &share,
        best: f64::INFINITY,
    };
    go(&mut s, &mut vec![0; n_rows], 0.0);
    Some(s.best - n_rows as f64 * psi)
}

pub fn pool_cols(pool: &ColumnPool) -> Vec<(f64, Vec<usize>)> {
    pool.columns().iter().map(|c| (c.cost, c.rows.clone())).collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
