//! Solution features and the pairing-set file format.
//!
//! Pairing-set files are line oriented:
//!
//! ```text
//! # crewpair-pairings v1
//! DAL|1,2;7,9|1834.500000
//! *|12|1000000.000000
//! ```
//!
//! Each line holds the crew base, the flight ids of every duty (comma
//! separated, duties separated by `;`) and the pairing cost. Base `*` marks an
//! artificial single-flight pseudo-pairing. Legal pairings are re-validated
//! against the rules when read.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::lp::Column;
use crate::mip::{count_deadheads, MipError};
use crate::rules::{check_duty, check_pairing, FlightId, Instance, Minutes, Pairing, PairingRef, Violation};

pub const PAIRINGS_HEADER: &str = "# crewpair-pairings v1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("flight {0} is not covered")]
    UncoveredFlight(FlightId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: illegal pairing ({constraint}): {violation:?}")]
    Illegal {
        line: usize,
        constraint: &'static str,
        violation: Violation,
    },
    #[error("line {line}: stored cost {stored} differs from recomputed cost {computed}")]
    CostMismatch { line: usize, stored: f64, computed: f64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Solution-level statistics in the layout of a pairing feature panel.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureReport {
    pub n_pairings: usize,
    pub n_artificial: usize,
    pub n_flights: usize,
    /// Distinct flights covered.
    pub unique_flights: usize,
    pub deadheads: u64,
    pub overnight_rests: usize,
    pub crew_changes: usize,
    pub avg_crew_changes: f64,
    pub tafb_minutes: Minutes,
    /// Legal pairings by number of flights covered.
    pub histogram: BTreeMap<usize, usize>,
    pub flying: f64,
    pub hotel: f64,
    pub meal: f64,
    pub excess_pay: f64,
    pub hard: f64,
    pub soft: f64,
    pub total: f64,
    pub artificial_cost: f64,
    pub deadhead_penalty: f64,
}

impl FeatureReport {
    /// Set-covering objective: all pairing costs plus the deadhead penalties.
    pub fn objective(&self) -> f64 {
        self.total + self.artificial_cost + self.deadhead_penalty * self.deadheads as f64
    }

    pub fn tafb_hhmm(&self) -> String {
        hhmm(self.tafb_minutes)
    }
}

/// `HH:MM` with hours allowed beyond 24.
pub fn hhmm(minutes: Minutes) -> String {
    format!("{}:{:02}", minutes / 60, minutes % 60)
}

/// Statistics of a covering pairing set. Artificial pairings count toward
/// coverage and deadheads but not toward the legal-pairing features.
pub fn features(pairings: &[PairingRef], inst: &Instance) -> Result<FeatureReport, ReportError> {
    let n = inst.n_flights();
    let cols: Vec<Column> = pairings.iter().map(Column::from_pairing).collect();
    let over = count_deadheads(cols.iter(), n).map_err(|e| match e {
        MipError::UncoveredFlight(row) => ReportError::UncoveredFlight(row as FlightId + 1),
        other => ReportError::Parse {
            line: 0,
            msg: other.to_string(),
        },
    })?;
    let mut r = FeatureReport {
        n_pairings: pairings.len(),
        n_artificial: 0,
        n_flights: n,
        unique_flights: n,
        deadheads: over.iter().map(|&d| d as u64).sum(),
        overnight_rests: 0,
        crew_changes: 0,
        avg_crew_changes: 0.0,
        tafb_minutes: 0,
        histogram: BTreeMap::new(),
        flying: 0.0,
        hotel: 0.0,
        meal: 0.0,
        excess_pay: 0.0,
        hard: 0.0,
        soft: 0.0,
        total: 0.0,
        artificial_cost: 0.0,
        deadhead_penalty: inst.deadhead_penalty(),
    };
    let mut n_legal = 0;
    for p in pairings {
        if !p.is_legal() {
            r.n_artificial += 1;
            r.artificial_cost += p.cost.total;
            continue;
        }
        n_legal += 1;
        r.overnight_rests += p.n_overnight_rests;
        r.crew_changes += p.n_crew_changes;
        r.tafb_minutes += p.tafb_minutes;
        *r.histogram.entry(p.n_flights()).or_insert(0) += 1;
        r.flying += p.cost.flying;
        r.hotel += p.cost.hotel;
        r.meal += p.cost.meal;
        r.excess_pay += p.cost.excess_pay;
        r.soft += p.cost.soft;
        r.total += p.cost.total;
    }
    r.hard = r.hotel + r.meal + r.excess_pay;
    if n_legal > 0 {
        r.avg_crew_changes = r.crew_changes as f64 / n_legal as f64;
    }
    Ok(r)
}

impl fmt::Display for FeatureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let row = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k:<34} {v:>16}");
        };
        row(&mut s, "# pairings", self.n_pairings.to_string());
        if self.n_artificial > 0 {
            row(&mut s, "# artificial pairings", self.n_artificial.to_string());
        }
        row(&mut s, "# unique flights covered", self.unique_flights.to_string());
        row(&mut s, "# deadhead flights", self.deadheads.to_string());
        row(&mut s, "# overnight-rests", self.overnight_rests.to_string());
        row(&mut s, "# crew changes", self.crew_changes.to_string());
        row(&mut s, "avg crew changes per pairing", format!("{:.2}", self.avg_crew_changes));
        row(&mut s, "Total TAFB (HH:MM)", self.tafb_hhmm());
        let _ = writeln!(s, "Pairings covering k flights:");
        for (k, c) in &self.histogram {
            row(&mut s, &format!("  k = {k}"), c.to_string());
        }
        let _ = writeln!(s, "Cost (USD):");
        row(&mut s, "  Hotel", format!("{:.2}", self.hotel));
        row(&mut s, "  Meal", format!("{:.2}", self.meal));
        row(&mut s, "  Excess pay", format!("{:.2}", self.excess_pay));
        row(&mut s, "  Hard", format!("{:.2}", self.hard));
        row(&mut s, "  Soft", format!("{:.2}", self.soft));
        row(&mut s, "  Flying", format!("{:.2}", self.flying));
        row(&mut s, "  Total", format!("{:.2}", self.total));
        if self.n_artificial > 0 {
            row(&mut s, "  Artificial", format!("{:.2}", self.artificial_cost));
        }
        row(&mut s, "  Deadhead penalty", format!("{:.2}", self.deadhead_penalty * self.deadheads as f64));
        row(&mut s, "Objective", format!("{:.2}", self.objective()));
        f.write_str(&s)
    }
}

/// Writes pairings in key order.
pub fn write_pairings<W: Write>(mut w: W, pairings: &[PairingRef]) -> io::Result<()> {
    let mut sorted: Vec<&PairingRef> = pairings.iter().collect();
    sorted.sort_by(|a, b| a.key().cmp(b.key()));
    writeln!(w, "{PAIRINGS_HEADER}")?;
    for p in sorted {
        let base = if p.is_legal() { p.crew_base.as_str() } else { "*" };
        let duties: Vec<String> = p
            .duties
            .iter()
            .map(|d| d.flights.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        writeln!(w, "{}|{}|{:.6}", base, duties.join(";"), p.cost.total)?;
    }
    Ok(())
}

/// Reads a pairing-set file, re-checking every legal pairing and its cost.
pub fn read_pairings<R: BufRead>(r: R, inst: &Instance) -> Result<Vec<PairingRef>, ReportError> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if !saw_header {
            if text != PAIRINGS_HEADER {
                return Err(ReportError::Parse {
                    line: line_no,
                    msg: format!("expected header `{PAIRINGS_HEADER}`"),
                });
            }
            saw_header = true;
            continue;
        }
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        out.push(PairingRef::new(parse_pairing_line(text, line_no, inst)?));
    }
    if !saw_header {
        return Err(ReportError::Parse {
            line: 1,
            msg: "empty file".into(),
        });
    }
    out.sort_by(|a, b| a.key().cmp(b.key()));
    Ok(out)
}

fn parse_pairing_line(text: &str, line: usize, inst: &Instance) -> Result<Pairing, ReportError> {
    let bad = |msg: String| ReportError::Parse { line, msg };
    let fields: Vec<&str> = text.split('|').collect();
    let [base, duties, cost] = fields[..] else {
        return Err(bad(format!("expected 3 `|`-separated fields, found {}", fields.len())));
    };
    let stored: f64 = cost.trim().parse().map_err(|_| bad(format!("bad cost `{cost}`")))?;
    let mut duty_ids: Vec<Vec<FlightId>> = Vec::new();
    for d in duties.split(';') {
        let ids = d
            .split(',')
            .map(|s| s.trim().parse::<FlightId>().map_err(|_| bad(format!("bad flight id `{s}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(&id) = ids.iter().find(|&&id| inst.schedule.get(id).is_none()) {
            return Err(bad(format!("unknown flight {id}")));
        }
        duty_ids.push(ids);
    }
    let base = base.trim();
    let pairing = if base == "*" {
        let [ids] = &duty_ids[..] else {
            return Err(bad("artificial pairings cover exactly one flight".into()));
        };
        let [id] = ids[..] else {
            return Err(bad("artificial pairings cover exactly one flight".into()));
        };
        Pairing::artificial(inst.schedule.flight(id), stored)
    } else {
        let illegal = |v: Violation| ReportError::Illegal {
            line,
            constraint: v.constraint(),
            violation: v,
        };
        let duties = duty_ids
            .iter()
            .map(|ids| check_duty(ids, base, &inst.schedule, &inst.rules))
            .collect::<Result<Vec<_>, _>>()
            .map_err(illegal)?;
        check_pairing(&duties, base, &inst.schedule, &inst.rules, &inst.cost).map_err(illegal)?
    };
    if (pairing.cost.total - stored).abs() > 1e-5 * stored.abs().max(1.0) {
        return Err(ReportError::CostMismatch {
            line,
            stored,
            computed: pairing.cost.total,
        });
    }
    Ok(pairing)
}
