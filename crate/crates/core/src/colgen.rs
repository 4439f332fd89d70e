//! Pricing: fresh negative-reduced-cost pairings for the restricted master.
//!
//! Four strategies share one interface:
//!
//! * deadhead reduction: re-cover the flights of a random subset of the LP
//!   support, preferring mutually disjoint pairings;
//! * crew utilization: harvest the flights of the support pairings with the
//!   largest dual cost component and keep the best-utilized new pairings;
//! * random exploration: enumerate pairings over a random sample of legal duties;
//! * archive: re-use earlier pairings through the flight pairs with the lowest
//!   reduced-cost estimate.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lp::DualVector;
use crate::pairgen::{enumerate_pairings, DutyNetwork, PairgenError, PairingInput};
use crate::rules::{CostModel, FlightId, Instance, Pairing, PairingRef, RuleSet, Schedule};

/// Returns `(mu_j, mud_j)`: reduced cost with the deadhead-adjusted cost and the dual cost component.
pub fn reduced_cost(p: &Pairing, y: &DualVector, deadhead_penalty: f64) -> (f64, f64) {
    let mud: f64 = p.flights().map(|f| y.y[f as usize - 1]).sum();
    (p.adjusted_cost(deadhead_penalty) - mud, mud)
}

/// Mean over duties of elapsed time over the permissible elapsed time.
pub fn crew_utilization(p: &Pairing, rules: &RuleSet) -> f64 {
    if p.duties.is_empty() {
        return 0.0;
    }
    let permissible = rules.max_duty_elapsed as f64;
    p.duties
        .iter()
        .map(|d| d.elapsed_minutes as f64 / permissible)
        .sum::<f64>()
        / p.duties.len() as f64
}

/// Flight-pair level estimate of the reduced cost of pairings containing `(m, n)`.
pub fn rc_estimator(m: FlightId, n: FlightId, y: &DualVector, schedule: &Schedule, cm: &CostModel) -> f64 {
    [m, n]
        .iter()
        .map(|&f| cm.flying_cost(schedule.flight(f)) - y.y[f as usize - 1])
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgConfig {
    pub target_size: usize,
    /// Quotas in strategy order: deadhead, utilization, random, archive.
    pub quotas: [usize; 4],
    pub cgr_duty_sample: usize,
    pub cgd_subset_frac: f64,
    pub cgu_top_frac: f64,
    pub seed: u64,
    /// Archive size limit; `None` keeps everything.
    pub archive_cap: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig::with_target(4000)
    }
}

impl CgConfig {
    /// Equal quotas summing to `n`.
    pub fn with_target(n: usize) -> Self {
        let q = n / 4;
        let r = n % 4;
        let mut quotas = [q; 4];
        for slot in quotas.iter_mut().take(r) {
            *slot += 1;
        }
        CgConfig {
            target_size: n,
            quotas,
            cgr_duty_sample: 2000,
            cgd_subset_frac: 0.25,
            cgu_top_frac: 0.25,
            seed: 0,
            archive_cap: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.quotas.iter().sum::<usize>() != self.target_size {
            return Err("strategy quotas must sum to the target size".into());
        }
        for (name, f) in [("cgd_subset_frac", self.cgd_subset_frac), ("cgu_top_frac", self.cgu_top_frac)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(format!("{name} must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Previously generated pairings indexed by every consecutive flight pair they contain.
#[derive(Clone, Debug, Default)]
pub struct PairingArchive {
    by_pair: BTreeMap<(FlightId, FlightId), BTreeSet<String>>,
    pairings: HashMap<String, PairingRef>,
    last_used: HashMap<String, u64>,
    clock: u64,
    cap: Option<usize>,
}

impl PairingArchive {
    pub fn new(cap: Option<usize>) -> Self {
        PairingArchive {
            cap,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.pairings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairings.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.pairings.contains_key(key)
    }

    pub fn n_flight_pairs(&self) -> usize {
        self.by_pair.len()
    }

    pub fn flight_pairs(&self) -> impl Iterator<Item = (FlightId, FlightId)> + '_ {
        self.by_pair.keys().copied()
    }

    /// Pairings indexed under `(m, n)`, in key order.
    pub fn retrieve(&self, m: FlightId, n: FlightId) -> impl Iterator<Item = &PairingRef> + '_ {
        self.by_pair
            .get(&(m, n))
            .into_iter()
            .flat_map(|keys| keys.iter().map(|k| &self.pairings[k]))
    }

    /// Returns false when the pairing was already archived.
    pub fn insert(&mut self, p: PairingRef) -> bool {
        if self.pairings.contains_key(p.key()) {
            return false;
        }
        if let Some(cap) = self.cap {
            while self.pairings.len() >= cap && !self.pairings.is_empty() {
                self.evict_one();
            }
            if cap == 0 {
                return false;
            }
        }
        let ids = p.flight_ids();
        for w in ids.windows(2) {
            self.by_pair
                .entry((w[0], w[1]))
                .or_default()
                .insert(p.key().to_string());
        }
        self.clock += 1;
        self.last_used.insert(p.key().to_string(), self.clock);
        self.pairings.insert(p.key().to_string(), p);
        true
    }

    pub fn mark_retrieved<'k>(&mut self, keys: impl IntoIterator<Item = &'k str>) {
        for k in keys {
            if let Some(t) = self.last_used.get_mut(k) {
                self.clock += 1;
                *t = self.clock;
            }
        }
    }

    fn evict_one(&mut self) {
        let Some(victim) = self
            .last_used
            .iter()
            .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
            .map(|(k, _)| k.clone())
        else {
            return;
        };
        self.last_used.remove(&victim);
        if let Some(p) = self.pairings.remove(&victim) {
            let ids = p.flight_ids();
            for w in ids.windows(2) {
                if let Some(set) = self.by_pair.get_mut(&(w[0], w[1])) {
                    set.remove(&victim);
                    if set.is_empty() {
                        self.by_pair.remove(&(w[0], w[1]));
                    }
                }
            }
        }
    }
}

/// A generated pairing with its reduced cost at generation time.
#[derive(Clone, Debug)]
pub struct Priced {
    pub pairing: PairingRef,
    pub mu: f64,
}

/// Everything a strategy may look at.
pub struct PricingContext<'a> {
    pub inst: &'a Instance,
    pub net: &'a DutyNetwork,
    /// Pairings of the current LP support.
    pub support: &'a [PairingRef],
    /// Primal values of the support pairings.
    pub x: &'a [f64],
    pub y: &'a DualVector,
    support_keys: HashSet<&'a str>,
}

impl<'a> PricingContext<'a> {
    pub fn new(
        inst: &'a Instance,
        net: &'a DutyNetwork,
        support: &'a [PairingRef],
        x: &'a [f64],
        y: &'a DualVector,
    ) -> Self {
        PricingContext {
            inst,
            net,
            support,
            x,
            y,
            support_keys: support.iter().map(|p| p.key()).collect(),
        }
    }

    pub fn mu(&self, p: &Pairing) -> f64 {
        reduced_cost(p, self.y, self.inst.deadhead_penalty()).0
    }

    /// Negative-reduced-cost pairings not already in the support, most negative first.
    fn negative(&self, pairings: Vec<PairingRef>) -> Vec<Priced> {
        let mut out: Vec<Priced> = pairings
            .into_iter()
            .filter(|p| !self.support_keys.contains(p.key()))
            .map(|p| Priced { mu: self.mu(&p), pairing: p })
            .filter(|c| c.mu < -NEGATIVE_TOL)
            .collect();
        out.sort_by(|a, b| a.mu.total_cmp(&b.mu).then_with(|| a.pairing.key().cmp(b.pairing.key())));
        out
    }

    fn flights_of<'p>(pairings: impl Iterator<Item = &'p PairingRef>) -> Vec<FlightId> {
        let set: BTreeSet<FlightId> = pairings.flat_map(|p| p.flights()).collect();
        set.into_iter().collect()
    }
}

/// Reduced costs above `-NEGATIVE_TOL` are treated as non-negative.
pub const NEGATIVE_TOL: f64 = 1e-7;

pub trait PricingStrategy: Sync {
    fn name(&self) -> &'static str;

    fn generate(
        &self,
        ctx: &PricingContext<'_>,
        archive: &PairingArchive,
        quota: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Priced>, PairgenError>;
}

fn take_count(frac: f64, n: usize) -> usize {
    ((frac * n as f64).ceil() as usize).clamp(usize::from(n > 0), n)
}

pub struct DeadheadReduction {
    pub subset_frac: f64,
}

impl PricingStrategy for DeadheadReduction {
    fn name(&self) -> &'static str {
        "cgd"
    }

    fn generate(
        &self,
        ctx: &PricingContext<'_>,
        _archive: &PairingArchive,
        quota: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Priced>, PairgenError> {
        if quota == 0 || ctx.support.is_empty() {
            return Ok(Vec::new());
        }
        let k = take_count(self.subset_frac, ctx.support.len());
        let mut picked: Vec<usize> = index::sample(rng, ctx.support.len(), k).into_vec();
        picked.sort_unstable();
        let flights = PricingContext::flights_of(picked.iter().map(|&i| &ctx.support[i]));
        let candidates = ctx.negative(enumerate_pairings(PairingInput::Flights(&flights), ctx.net, ctx.inst)?);

        // zero-overcoverage partial cover first, then the most negative of the rest
        let mut used = HashSet::new();
        let mut chosen = vec![false; candidates.len()];
        let mut out = Vec::new();
        for (i, c) in candidates.iter().enumerate() {
            if out.len() >= quota {
                break;
            }
            if c.pairing.flights().all(|f| !used.contains(&f)) {
                used.extend(c.pairing.flights());
                chosen[i] = true;
                out.push(c.clone());
            }
        }
        for (i, c) in candidates.iter().enumerate() {
            if out.len() >= quota {
                break;
            }
            if !chosen[i] {
                out.push(c.clone());
            }
        }
        Ok(out)
    }
}

pub struct CrewUtilization {
    pub top_frac: f64,
}

impl PricingStrategy for CrewUtilization {
    fn name(&self) -> &'static str {
        "cgu"
    }

    fn generate(
        &self,
        ctx: &PricingContext<'_>,
        _archive: &PairingArchive,
        quota: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Priced>, PairgenError> {
        if quota == 0 || ctx.support.is_empty() {
            return Ok(Vec::new());
        }
        let mut ranked: Vec<(f64, &PairingRef)> = ctx
            .support
            .iter()
            .map(|p| (reduced_cost(p, ctx.y, ctx.inst.deadhead_penalty()).1, p))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.key().cmp(b.1.key())));
        let k = take_count(self.top_frac, ranked.len());
        let flights = PricingContext::flights_of(ranked[..k].iter().map(|(_, p)| *p));
        let rules = &ctx.inst.rules;
        let mut candidates: Vec<(f64, Priced)> = ctx
            .negative(enumerate_pairings(PairingInput::Flights(&flights), ctx.net, ctx.inst)?)
            .into_iter()
            .map(|c| (crew_utilization(&c.pairing, rules), c))
            .collect();
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.mu.total_cmp(&b.1.mu))
                .then_with(|| a.1.pairing.key().cmp(b.1.pairing.key()))
        });
        Ok(candidates.into_iter().take(quota).map(|(_, c)| c).collect())
    }
}

pub struct RandomExploration {
    pub duty_sample: usize,
}

impl PricingStrategy for RandomExploration {
    fn name(&self) -> &'static str {
        "cgr"
    }

    fn generate(
        &self,
        ctx: &PricingContext<'_>,
        _archive: &PairingArchive,
        quota: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Priced>, PairgenError> {
        if quota == 0 {
            return Ok(Vec::new());
        }
        let refs = ctx.net.duty_refs();
        let k = self.duty_sample.min(refs.len());
        let mut sample: Vec<_> = index::sample(rng, refs.len(), k).into_iter().map(|i| refs[i]).collect();
        sample.sort_unstable();
        let candidates = ctx.negative(enumerate_pairings(PairingInput::Duties(&sample), ctx.net, ctx.inst)?);
        Ok(candidates.into_iter().take(quota).collect())
    }
}

pub struct ArchiveReuse;

impl PricingStrategy for ArchiveReuse {
    fn name(&self) -> &'static str {
        "cga"
    }

    fn generate(
        &self,
        ctx: &PricingContext<'_>,
        archive: &PairingArchive,
        quota: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Priced>, PairgenError> {
        if quota == 0 || archive.is_empty() {
            return Ok(Vec::new());
        }
        let schedule = &ctx.inst.schedule;
        let mut pairs: Vec<(f64, (FlightId, FlightId))> = archive
            .flight_pairs()
            .map(|(m, n)| (rc_estimator(m, n, ctx.y, schedule, &ctx.inst.cost), (m, n)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        'pairs: for (_, (m, n)) in pairs {
            for p in archive.retrieve(m, n) {
                if !seen.insert(p.key()) || ctx.support_keys.contains(p.key()) {
                    continue;
                }
                let mu = ctx.mu(p);
                if mu < -NEGATIVE_TOL {
                    out.push(Priced { pairing: p.clone(), mu });
                    if out.len() >= quota {
                        break 'pairs;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Result of one pricing round.
#[derive(Clone, Debug, Default)]
pub struct Generated {
    /// Deduplicated and sorted by key.
    pub columns: Vec<Priced>,
    /// Yield of each strategy before deduplication, in strategy order.
    pub yields: [usize; 4],
}

impl Generated {
    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn min_mu(&self) -> Option<f64> {
        self.columns.iter().map(|c| c.mu).min_by(f64::total_cmp)
    }

    pub fn median_mu(&self) -> Option<f64> {
        let mut mus: Vec<f64> = self.columns.iter().map(|c| c.mu).collect();
        if mus.is_empty() {
            return None;
        }
        mus.sort_by(f64::total_cmp);
        let n = mus.len();
        Some(if n % 2 == 1 {
            mus[n / 2]
        } else {
            0.5 * (mus[n / 2 - 1] + mus[n / 2])
        })
    }

    pub fn pairings(&self) -> impl Iterator<Item = &PairingRef> + '_ {
        self.columns.iter().map(|c| &c.pairing)
    }
}

/// Column generator holding the strategy set and the archive across rounds.
pub struct ColumnGenerator {
    pub config: CgConfig,
    pub archive: PairingArchive,
    strategies: [Box<dyn PricingStrategy>; 4],
}

impl ColumnGenerator {
    pub fn new(config: CgConfig) -> Self {
        let strategies: [Box<dyn PricingStrategy>; 4] = [
            Box::new(DeadheadReduction {
                subset_frac: config.cgd_subset_frac,
            }),
            Box::new(CrewUtilization {
                top_frac: config.cgu_top_frac,
            }),
            Box::new(RandomExploration {
                duty_sample: config.cgr_duty_sample,
            }),
            Box::new(ArchiveReuse),
        ];
        ColumnGenerator {
            archive: PairingArchive::new(config.archive_cap),
            config,
            strategies,
        }
    }

    /// Replaces one strategy; `slot` follows the quota order.
    pub fn set_strategy(&mut self, slot: usize, strategy: Box<dyn PricingStrategy>) {
        self.strategies[slot] = strategy;
    }

    pub fn strategy_names(&self) -> [&'static str; 4] {
        [0, 1, 2, 3].map(|i| self.strategies[i].name())
    }

    /// One pricing round. `round` distinguishes successive calls under one seed.
    pub fn generate(&mut self, ctx: &PricingContext<'_>, round: u64) -> Result<Generated, PairgenError> {
        let mut yields = [0; 4];
        let mut merged: BTreeMap<String, Priced> = BTreeMap::new();
        for (slot, strategy) in self.strategies.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.config.seed, round, slot as u64));
            let found = strategy.generate(ctx, &self.archive, self.config.quotas[slot], &mut rng)?;
            yields[slot] = found.len();
            for c in found {
                merged.entry(c.pairing.key().to_string()).or_insert(c);
            }
        }
        let columns: Vec<Priced> = merged.into_values().collect();
        let retrieved: Vec<String> = columns
            .iter()
            .filter(|c| self.archive.contains(c.pairing.key()))
            .map(|c| c.pairing.key().to_string())
            .collect();
        self.archive.mark_retrieved(retrieved.iter().map(String::as_str));
        for c in &columns {
            self.archive.insert(c.pairing.clone());
        }
        Ok(Generated { columns, yields })
    }
}

fn mix_seed(seed: u64, round: u64, slot: u64) -> u64 {
    // splitmix64 finalizer over the combined inputs
    let mut z = seed
        .wrapping_add(round.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(slot.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
