//! Optimization engine: alternates column-generation LP solving with
//! integerization of the LP support until the two costs lock in.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::colgen::{CgConfig, ColumnGenerator, PricingContext};
use crate::lp::{stabilize_dual, ColumnPool, LpBackend, LpError, LpOptions, RevisedSimplex};
use crate::mip::{gap_tolerance, solve_ip, MipError, MipOptions, MipStatus};
use crate::pairgen::{DutyNetwork, PairgenError};
use crate::rules::{Instance, PairingRef};

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    /// Minimum total LP improvement over the window before the LP loop stops, USD.
    pub th_cost: f64,
    /// Window length in LP iterations.
    pub th_t: usize,
    pub th_ipt: Duration,
    pub t_max: usize,
    pub wall_max: Duration,
    pub seed: u64,
    pub cg: CgConfig,
    pub lp: LpOptions,
    /// Integerize over the whole final LP pool instead of its support.
    pub ip_over_full_pool: bool,
    /// Carry every column of the current interaction into the next LP
    /// iteration; when false only the support and the new columns are kept.
    pub retain_pool: bool,
    /// Keep duals and priced columns of every iteration in the trace.
    pub audit: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            th_cost: 100.0,
            th_t: 10,
            th_ipt: Duration::from_secs(1200),
            t_max: 30,
            wall_max: Duration::from_secs(30 * 3600),
            seed: 0,
            cg: CgConfig::default(),
            lp: LpOptions::default(),
            ip_over_full_pool: false,
            retain_pool: true,
            audit: false,
        }
    }
}

impl EngineConfig {
    /// Short budgets for tests and quick runs.
    pub fn test_profile() -> Self {
        EngineConfig {
            th_ipt: Duration::from_secs(10),
            wall_max: Duration::from_secs(600),
            ..EngineConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.th_cost > 0.0) || self.th_t == 0 || self.t_max == 0 {
            return Err("th_cost, th_t and t_max must be positive".into());
        }
        if self.th_ipt.is_zero() || self.wall_max.is_zero() {
            return Err("th_ipt and wall_max must be positive".into());
        }
        self.cg.validate()
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("initial pairing set does not cover flight {0}")]
    Uncovered(u32),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error(transparent)]
    Pairgen(#[from] PairgenError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Lp,
    Ip,
}

/// Why an LP loop ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpExit {
    Threshold,
    PricingExhausted,
    WallClock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    InteractionCap,
    WallClock,
}

/// One LP iteration or one integerization.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub interaction: usize,
    /// LP iteration within the interaction; for IP rows the last LP iteration.
    pub iteration: usize,
    pub phase: Phase,
    pub cost: f64,
    pub pool_size: usize,
    /// LP support size, or number of selected pairings.
    pub support: usize,
    pub yields: [usize; 4],
    pub generated: usize,
    pub min_mu: Option<f64>,
    pub median_mu: Option<f64>,
    pub ip_status: Option<MipStatus>,
    pub lp_exit: Option<LpExit>,
    pub elapsed: Duration,
}

/// Duals and priced columns of one LP iteration.
#[derive(Clone, Debug)]
pub struct PricingAudit {
    pub interaction: usize,
    pub iteration: usize,
    pub y: Vec<f64>,
    pub columns: Vec<(PairingRef, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct EngineTrace {
    pub rows: Vec<TraceRow>,
    pub pricing: Vec<PricingAudit>,
}

pub const TRACE_HEADER: &str = "# crewpair-trace v1";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl EngineTrace {
    /// CSV of the deterministic columns; wall times are left out so equal seeds give equal files.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        writeln!(
            w,
            "T,t,phase,cost,pool,support,cgd,cgu,cgr,cga,generated,min_mu,median_mu,status"
        )?;
        for r in &self.rows {
            let status = match (r.phase, r.ip_status, r.lp_exit) {
                (Phase::Ip, Some(s), _) => format!("{s:?}"),
                (Phase::Lp, _, Some(e)) => format!("{e:?}"),
                _ => String::new(),
            };
            writeln!(
                w,
                "{},{},{},{:.6},{},{},{},{},{},{},{},{},{},{}",
                r.interaction,
                r.iteration,
                if r.phase == Phase::Lp { "lp" } else { "ip" },
                r.cost,
                r.pool_size,
                r.support,
                r.yields[0],
                r.yields[1],
                r.yields[2],
                r.yields[3],
                r.generated,
                fmt_opt(r.min_mu),
                fmt_opt(r.median_mu),
                status
            )?;
        }
        Ok(())
    }

    /// Per-interaction summary: the final LP and IP cost with cumulative wall time.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>16} {:>12} {:>10}", "Set", "Cost (USD)", "Time", "LP iters");
        let mut best: Option<f64> = None;
        for r in self.rows.iter().filter(|r| r.phase == Phase::Ip) {
            if let Some(lp) = self
                .rows
                .iter()
                .rev()
                .find(|l| l.phase == Phase::Lp && l.interaction == r.interaction)
            {
                let _ = writeln!(
                    s,
                    "{:<10} {:>16.2} {:>12} {:>10}",
                    format!("P_LP^{}", r.interaction),
                    lp.cost,
                    hhmm_ss(lp.elapsed),
                    lp.iteration
                );
            }
            let _ = writeln!(
                s,
                "{:<10} {:>16.2} {:>12} {:>10}",
                format!("P_IP^{}", r.interaction),
                r.cost,
                hhmm_ss(r.elapsed),
                ""
            );
            best = Some(best.map_or(r.cost, |b: f64| b.min(r.cost)));
        }
        if let Some(b) = best {
            let total = self.rows.last().map(|r| r.elapsed).unwrap_or_default();
            let _ = writeln!(s, "{:<10} {:>16.2} {:>12}", "Final", b, hhmm_ss(total));
        }
        s
    }

    pub fn lp_iterations(&self) -> usize {
        self.rows.iter().filter(|r| r.phase == Phase::Lp).count()
    }
}

fn hhmm_ss(d: Duration) -> String {
    let s = d.as_secs();
    format!("{:02}:{:02}:{:02}", s / 3600, (s / 60) % 60, s % 60)
}

#[derive(Clone, Debug)]
pub struct EngineResult {
    /// Best integer solution across interactions, key-sorted.
    pub solution: Vec<PairingRef>,
    pub objective: f64,
    pub stop: StopReason,
    pub trace: EngineTrace,
}

fn pool_of(inst: &Instance, pairings: &[PairingRef]) -> Result<ColumnPool, EngineError> {
    let pool = ColumnPool::from_pairings(inst.n_flights(), pairings)?;
    if let Some(row) = pool.first_uncovered_row() {
        return Err(EngineError::Uncovered(row as u32 + 1));
    }
    Ok(pool)
}

/// Runs the LP/IP alternation from an initial covering pairing set.
pub fn run(
    net: &DutyNetwork,
    inst: &Instance,
    initial: Vec<PairingRef>,
    cfg: &EngineConfig,
) -> Result<EngineResult, EngineError> {
    let clock = Instant::now();
    let psi = inst.deadhead_penalty();
    let lp = RevisedSimplex { options: cfg.lp };
    let mut cg = ColumnGenerator::new(CgConfig {
        seed: cfg.seed,
        ..cfg.cg.clone()
    });
    let mut trace = EngineTrace::default();
    let mut ip_input = initial;
    ip_input.sort_by(|a, b| a.key().cmp(b.key()));
    ip_input.dedup_by(|a, b| a.key() == b.key());
    let mut best: Option<(f64, Vec<PairingRef>)> = None;
    let mut round = 0u64;
    let mut stop = StopReason::InteractionCap;

    for interaction in 1..=cfg.t_max {
        let mut columns = ip_input.clone();
        let mut history: Vec<f64> = Vec::new();
        let mut t = 0;
        let (lp_obj, lp_pairings, lp_all) = loop {
            t += 1;
            let pool = pool_of(inst, &columns)?;
            let primal = lp.solve_primal(&pool, psi)?;
            history.push(primal.objective);
            let support: Vec<PairingRef> = primal.support.iter().map(|&j| columns[j].clone()).collect();
            let mut row = TraceRow {
                interaction,
                iteration: t,
                phase: Phase::Lp,
                cost: primal.objective,
                pool_size: columns.len(),
                support: support.len(),
                yields: [0; 4],
                generated: 0,
                min_mu: None,
                median_mu: None,
                ip_status: None,
                lp_exit: None,
                elapsed: clock.elapsed(),
            };
            let windowed = t > cfg.th_t && history[t - 1 - cfg.th_t] - primal.objective <= cfg.th_cost;
            let exit = if windowed {
                Some(LpExit::Threshold)
            } else if clock.elapsed() >= cfg.wall_max {
                Some(LpExit::WallClock)
            } else {
                None
            };
            if let Some(e) = exit {
                row.lp_exit = Some(e);
                trace.rows.push(row);
                break (primal.objective, support, columns);
            }
            let dual = lp.solve_dual(&pool, &primal.support, psi)?;
            let dual = stabilize_dual(&pool, &primal, &dual, psi, cfg.lp)?;
            let x: Vec<f64> = primal.support.iter().map(|&j| primal.x[j]).collect();
            let ctx = PricingContext::new(inst, net, &support, &x, &dual);
            round += 1;
            let gen = cg.generate(&ctx, round)?;
            row.yields = gen.yields;
            row.generated = gen.columns.len();
            row.min_mu = gen.min_mu();
            row.median_mu = gen.median_mu();
            if cfg.audit {
                trace.pricing.push(PricingAudit {
                    interaction,
                    iteration: t,
                    y: dual.y.clone(),
                    columns: gen.columns.iter().map(|c| (c.pairing.clone(), c.mu)).collect(),
                });
            }
            if gen.is_empty() {
                row.lp_exit = Some(LpExit::PricingExhausted);
                trace.rows.push(row);
                break (primal.objective, support, columns);
            }
            trace.rows.push(row);
            let mut next = if cfg.retain_pool { columns } else { support };
            next.extend(gen.pairings().cloned());
            next.sort_by(|a, b| a.key().cmp(b.key()));
            next.dedup_by(|a, b| a.key() == b.key());
            columns = next;
        };

        let ip_columns = if cfg.ip_over_full_pool { lp_all } else { lp_pairings };
        let pool = pool_of(inst, &ip_columns)?;
        let remaining = cfg.wall_max.saturating_sub(clock.elapsed());
        let ip = solve_ip(
            &pool,
            psi,
            MipOptions {
                time_limit: Some(cfg.th_ipt.min(remaining.max(Duration::from_millis(1)))),
                ..MipOptions::default()
            },
        )?;
        let selected: Vec<PairingRef> = ip.incumbent.iter().map(|&j| ip_columns[j].clone()).collect();
        trace.rows.push(TraceRow {
            interaction,
            iteration: t,
            phase: Phase::Ip,
            cost: ip.objective,
            pool_size: ip_columns.len(),
            support: selected.len(),
            yields: [0; 4],
            generated: 0,
            min_mu: None,
            median_mu: None,
            ip_status: Some(ip.status),
            lp_exit: None,
            elapsed: clock.elapsed(),
        });
        log::info!(
            "interaction {interaction}: LP {lp_obj:.2} after {t} iterations, IP {:.2} ({:?})",
            ip.objective,
            ip.status
        );
        if best.as_ref().is_none_or(|(b, _)| ip.objective < *b - gap_tolerance(*b)) {
            best = Some((ip.objective, selected.clone()));
        }
        ip_input = selected;
        if (ip.objective - lp_obj).abs() <= gap_tolerance(lp_obj) {
            stop = StopReason::Converged;
            break;
        }
        if clock.elapsed() >= cfg.wall_max {
            stop = StopReason::WallClock;
            break;
        }
    }

    let (objective, mut solution) = best.expect("at least one interaction runs");
    solution.sort_by(|a, b| a.key().cmp(b.key()));
    Ok(EngineResult {
        solution,
        objective,
        stop,
        trace,
    })
}
