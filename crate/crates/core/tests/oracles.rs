mod common;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use crewpair::engine::{self, EngineConfig};
use crewpair::ifs::{self, IfsConfig};
use crewpair::lp::{self, column_reduced_cost, LpOptions};
use crewpair::mip::{solve_ip, MipOptions, MipStatus};
use crewpair::netgen::NetSpec;
use crewpair::oracle;
use crewpair::pairgen::{build_duty_network, enumerate_pairings, PairingInput};
use crewpair::report::features;
use crewpair::rules::{check_duty, check_pairing, Duty, FlightId};

#[test]
fn pairgen_matches_brute_force_enumeration() {
    let mut fixtures = tiny_fixtures();
    fixtures.extend((5..12).map(|s| instance(&NetSpec::tiny(8 + 2 * (s as usize % 9), s))));
    for inst in &fixtures {
        let net = build_duty_network(inst).unwrap();
        let duties: BTreeSet<String> = oracle::all_duties(inst).iter().map(Duty::key).collect();
        for b in &net.bases {
            let got: BTreeSet<String> = b.duties.iter().map(|d| d.key()).collect();
            assert_eq!(got, duties, "duties of {}", b.base);
        }
        let got: Vec<String> = enumerate_pairings(PairingInput::All, &net, inst)
            .unwrap()
            .iter()
            .map(|p| p.key().to_string())
            .collect();
        let want: Vec<String> = oracle::all_pairings(inst).iter().map(|p| p.key().to_string()).collect();
        assert_eq!(got, want);
    }
}

#[test]
fn enumerated_pairings_pass_the_independent_checker() {
    for inst in small_fixtures() {
        let net = build_duty_network(&inst).unwrap();
        for p in enumerate_pairings(PairingInput::All, &net, &inst).unwrap() {
            let split = duty_split(&p);
            assert!(independently_legal(&split, &p.crew_base, &inst), "{}", p.key());
            let c = independent_cost(&split, &inst.cost, &inst.rules, &inst);
            assert!(close(p.cost.total, c, 1e-12), "{} {} vs {c}", p.key(), p.cost.total);
        }
    }
}

/// Every ordered sequence of at most four distinct flights, split into duties every possible way.
#[test]
fn rule_checks_agree_with_independent_checker() {
    for seed in 0..3 {
        let inst = instance(&NetSpec { n_tails: 2, ..NetSpec::tiny(10, seed) });
        let n = inst.n_flights() as FlightId;
        let bases = inst.schedule.crew_bases();
        let (mut legal, mut total) = (0, 0);
        let mut seqs: Vec<Vec<FlightId>> = (1..=n).map(|f| vec![f]).collect();
        let mut frontier = seqs.clone();
        for _ in 1..4 {
            let mut next = Vec::new();
            for s in &frontier {
                for f in 1..=n {
                    if !s.contains(&f) {
                        let mut t = s.clone();
                        t.push(f);
                        next.push(t);
                    }
                }
            }
            seqs.extend(next.iter().cloned());
            frontier = next;
        }
        for seq in &seqs {
            for mask in 0..(1u32 << (seq.len() - 1)) {
                let mut split = vec![vec![seq[0]]];
                for (i, &f) in seq[1..].iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        split.push(Vec::new());
                    }
                    split.last_mut().unwrap().push(f);
                }
                for base in &bases {
                    total += 1;
                    let duties: Result<Vec<Duty>, _> = split
                        .iter()
                        .map(|d| check_duty(d, base, &inst.schedule, &inst.rules))
                        .collect();
                    let ours = duties
                        .map(|ds| check_pairing(&ds, base, &inst.schedule, &inst.rules, &inst.cost).is_ok())
                        .unwrap_or(false);
                    let theirs = independently_legal(&split, base, &inst);
                    assert_eq!(ours, theirs, "{split:?} from {base}");
                    legal += usize::from(ours);
                }
            }
        }
        assert!(legal > 0 && legal < total);
    }
}

#[test]
fn lp_on_random_pools_is_optimal_with_bounded_primal() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let pool = random_pool(&mut rng, 40, 300);
        let psi = if rand::Rng::gen_bool(&mut rng, 0.5) { 5000.0 } else { 150.0 };
        let p = lp::solve_primal(&pool, psi).unwrap();
        let d = lp::solve_dual(&pool, &p.support, psi).unwrap();
        assert!(close(p.objective, d.objective, 1e-6), "{} vs {}", p.objective, d.objective);
        assert!(p.x.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
        let y = lp::stabilize_dual(&pool, &p, &d, psi, LpOptions::default()).unwrap();
        assert!(close(p.objective, y.objective, 1e-6));
        for c in pool.columns() {
            assert!(column_reduced_cost(c, &p.basis_duals, psi) >= -1e-6);
            assert!(column_reduced_cost(c, &y.y, psi) >= -1e-6);
        }
        // primal feasibility recomputed from scratch
        let mut cover = vec![0.0; pool.n_rows()];
        for (c, &x) in pool.columns().iter().zip(&p.x) {
            for &r in &c.rows {
                cover[r] += x;
            }
        }
        assert!(cover.iter().all(|&v| v >= 1.0 - 1e-9));
    }
}

#[test]
fn branch_and_bound_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..40 {
        let pool = random_pool(&mut rng, 30, 200);
        let psi = if rand::Rng::gen_bool(&mut rng, 0.5) { 5000.0 } else { 150.0 };
        let res = solve_ip(&pool, psi, MipOptions::untimed()).unwrap();
        assert_eq!(res.status, MipStatus::Optimal);
        let want = exact_cover(pool.n_rows(), &pool_cols(&pool), psi).unwrap();
        assert!(close(res.objective, want, 1e-9), "{} vs {want}", res.objective);
        let x: Vec<f64> = (0..pool.len()).map(|j| f64::from(u8::from(res.incumbent.contains(&j)))).collect();
        assert!(close(pool.objective(&x, psi), res.objective, 1e-9));
        for w in res.log.windows(2) {
            assert!(w[1].incumbent <= w[0].incumbent + 1e-9);
        }
        assert!(res.bound <= res.objective + 1e-6);
    }
}

#[test]
fn oracle_optimum_matches_independent_search() {
    for inst in tiny_fixtures() {
        let sol = oracle::solve_exact(&inst).unwrap();
        let cols: Vec<(f64, Vec<usize>)> = oracle::all_pairings(&inst)
            .iter()
            .map(|p| (p.cost.total, p.flights().map(|f| f as usize - 1).collect()))
            .collect();
        let want = exact_cover(inst.n_flights(), &cols, inst.deadhead_penalty()).unwrap();
        assert!(close(sol.objective, want, 1e-9));
        assert_eq!(sol.n_candidates, cols.len());
    }
}

#[test]
fn features_match_a_second_pass_tally() {
    let inst = instance(&NetSpec::small(0));
    let net = build_duty_network(&inst).unwrap();
    let init = ifs::ipdch(&net, &inst, &IfsConfig::default()).unwrap().pairings;
    let res = engine::run(&net, &inst, init, &EngineConfig::test_profile()).unwrap();
    let rep = features(&res.solution, &inst).unwrap();

    let mut count = vec![0u64; inst.n_flights()];
    let mut hist = BTreeMap::new();
    let (mut rests, mut changes, mut tafb) = (0, 0, 0);
    let mut sum = 0.0;
    for p in &res.solution {
        let split = duty_split(p);
        for &f in split.iter().flatten() {
            count[f as usize - 1] += 1;
        }
        *hist.entry(split.iter().map(Vec::len).sum::<usize>()).or_insert(0) += 1;
        rests += split.len() - 1;
        changes += split
            .iter()
            .map(|d| d.windows(2).filter(|w| inst.schedule.flight(w[0]).tail != inst.schedule.flight(w[1]).tail).count())
            .sum::<usize>();
        let (a, b) = (inst.schedule.flight(split[0][0]), inst.schedule.flight(*split.last().unwrap().last().unwrap()));
        tafb += b.arr + inst.rules.debriefing - a.dep + inst.rules.briefing;
        sum += independent_cost(&split, &inst.cost, &inst.rules, &inst);
    }
    let deadheads: u64 = count.iter().map(|&c| c.saturating_sub(1)).sum();
    assert!(count.iter().all(|&c| c > 0));
    assert_eq!(rep.n_pairings, res.solution.len());
    assert_eq!(rep.unique_flights, inst.n_flights());
    assert_eq!(rep.deadheads, deadheads);
    assert_eq!(rep.histogram, hist);
    assert_eq!(rep.overnight_rests, rests);
    assert_eq!(rep.crew_changes, changes);
    assert_eq!(rep.tafb_minutes, tafb);
    assert!(close(rep.total, sum, 1e-9));
    assert!(close(rep.objective(), sum + inst.deadhead_penalty() * deadheads as f64, 1e-9));
}
