//! Flight-schedule domain types, pairing legality and pairing costs.
//!
//! Times are absolute UTC minutes. A "working day" is never tied to a calendar
//! day; duties are bounded only by the elapsed/flying limits of the [`RuleSet`].

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// 1-based dense flight index.
pub type FlightId = u32;

/// Absolute time or duration in minutes.
pub type Minutes = i64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flight {
    pub id: FlightId,
    pub origin: String,
    pub destination: String,
    pub dep: Minutes,
    pub arr: Minutes,
    pub tail: String,
}

impl Flight {
    pub fn flying_minutes(&self) -> Minutes {
        self.arr - self.dep
    }

    /// Zero-based row index of this flight in covering models.
    pub fn row(&self) -> usize {
        self.id as usize - 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Airport {
    pub code: String,
    pub city: String,
    pub is_crew_base: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("flight ids must be dense 1..={expected_max}, found id {found} at position {position}")]
    NonDenseIds {
        position: usize,
        found: FlightId,
        expected_max: usize,
    },
    #[error("flight {0}: arrival must be after departure")]
    NonPositiveBlock(FlightId),
    #[error("flight {0}: origin equals destination")]
    SameAirport(FlightId),
    #[error("flight {flight}: unknown airport {code}")]
    UnknownAirport { flight: FlightId, code: String },
    #[error("duplicate airport code {0}")]
    DuplicateAirport(String),
    #[error("no crew base among airports")]
    NoCrewBase,
}

/// A validated flight schedule together with its airport table.
#[derive(Clone, Debug)]
pub struct Schedule {
    flights: Vec<Flight>,
    airports: Vec<Airport>,
    airport_index: HashMap<String, usize>,
}

impl Schedule {
    /// Flights may be given in any order; they are stored by id.
    pub fn new(mut flights: Vec<Flight>, airports: Vec<Airport>) -> Result<Self, ScheduleError> {
        let mut airport_index = HashMap::with_capacity(airports.len());
        for (i, a) in airports.iter().enumerate() {
            if airport_index.insert(a.code.clone(), i).is_some() {
                return Err(ScheduleError::DuplicateAirport(a.code.clone()));
            }
        }
        if !airports.iter().any(|a| a.is_crew_base) {
            return Err(ScheduleError::NoCrewBase);
        }
        flights.sort_by_key(|f| f.id);
        let n = flights.len();
        for (position, f) in flights.iter().enumerate() {
            if f.id as usize != position + 1 {
                return Err(ScheduleError::NonDenseIds {
                    position,
                    found: f.id,
                    expected_max: n,
                });
            }
            if f.arr <= f.dep {
                return Err(ScheduleError::NonPositiveBlock(f.id));
            }
            if f.origin == f.destination {
                return Err(ScheduleError::SameAirport(f.id));
            }
            for code in [&f.origin, &f.destination] {
                if !airport_index.contains_key(code) {
                    return Err(ScheduleError::UnknownAirport {
                        flight: f.id,
                        code: code.clone(),
                    });
                }
            }
        }
        Ok(Schedule {
            flights,
            airports,
            airport_index,
        })
    }

    pub fn flights(&self) -> &[Flight] {
        &self.flights
    }

    pub fn airports(&self) -> &[Airport] {
        &self.airports
    }

    pub fn len(&self) -> usize {
        self.flights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flights.is_empty()
    }

    /// Panics if `id` is outside `1..=len()`.
    pub fn flight(&self, id: FlightId) -> &Flight {
        &self.flights[id as usize - 1]
    }

    pub fn get(&self, id: FlightId) -> Option<&Flight> {
        (id as usize).checked_sub(1).and_then(|i| self.flights.get(i))
    }

    pub fn airport(&self, code: &str) -> Option<&Airport> {
        self.airport_index.get(code).map(|&i| &self.airports[i])
    }

    /// Crew base codes in ascending order.
    pub fn crew_bases(&self) -> Vec<String> {
        let mut bases: Vec<String> = self
            .airports
            .iter()
            .filter(|a| a.is_crew_base)
            .map(|a| a.code.clone())
            .collect();
        bases.sort();
        bases
    }

    fn same_city(&self, a: &str, b: &str) -> bool {
        match (self.airport(a), self.airport(b)) {
            (Some(x), Some(y)) => x.city == y.city,
            _ => a == b,
        }
    }
}

/// A schedule with the rules and cost coefficients it is solved under.
#[derive(Clone, Debug)]
pub struct Instance {
    pub schedule: Schedule,
    pub rules: RuleSet,
    pub cost: CostModel,
}

impl Instance {
    pub fn new(schedule: Schedule, rules: RuleSet, cost: CostModel) -> Self {
        Instance { schedule, rules, cost }
    }

    pub fn n_flights(&self) -> usize {
        self.schedule.len()
    }

    pub fn deadhead_penalty(&self) -> f64 {
        self.cost.deadhead_penalty
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet {
    pub sit_min: Minutes,
    pub sit_max: Minutes,
    pub night_min: Minutes,
    pub night_max: Minutes,
    pub briefing: Minutes,
    pub debriefing: Minutes,
    pub max_flights_per_duty: usize,
    pub max_duty_elapsed: Minutes,
    pub max_duty_flying: Minutes,
    pub max_duties_per_pairing: usize,
    pub forbid_overnight_in_base_city: bool,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            sit_min: 30,
            sit_max: 240,
            night_min: 540,
            night_max: 2880,
            briefing: 45,
            debriefing: 30,
            max_flights_per_duty: 6,
            max_duty_elapsed: 720,
            max_duty_flying: 480,
            max_duties_per_pairing: 4,
            forbid_overnight_in_base_city: true,
        }
    }
}

impl RuleSet {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("sit_min", self.sit_min),
            ("sit_max", self.sit_max),
            ("night_min", self.night_min),
            ("night_max", self.night_max),
            ("max_duty_elapsed", self.max_duty_elapsed),
            ("max_duty_flying", self.max_duty_flying),
            ("max_flights_per_duty", self.max_flights_per_duty as Minutes),
            ("max_duties_per_pairing", self.max_duties_per_pairing as Minutes),
        ];
        for (name, v) in positive {
            if v <= 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.briefing < 0 || self.debriefing < 0 {
            return Err("briefing/debriefing must be non-negative".into());
        }
        if self.sit_min >= self.sit_max {
            return Err("sit_min must be below sit_max".into());
        }
        if self.night_min >= self.night_max {
            return Err("night_min must be below night_max".into());
        }
        // sit and overnight windows must not overlap
        if self.night_min <= self.sit_max {
            return Err("night_min must exceed sit_max".into());
        }
        Ok(())
    }

    pub fn connection_kind(&self, gap: Minutes) -> ConnectionKind {
        if (self.sit_min..=self.sit_max).contains(&gap) {
            ConnectionKind::Sit
        } else if (self.night_min..=self.night_max).contains(&gap) {
            ConnectionKind::Overnight
        } else {
            ConnectionKind::None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    /// USD per flying hour.
    pub flying_rate: f64,
    /// Guaranteed pay hours per duty.
    pub mg_hours_per_duty: f64,
    pub hotel_per_night: f64,
    /// USD per hour of time away from base.
    pub meal_rate: f64,
    pub crew_change_cost: f64,
    /// Penalty per deadhead (flight covered more than once).
    pub deadhead_penalty: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            flying_rate: 100.0,
            mg_hours_per_duty: 4.75,
            hotel_per_night: 120.0,
            meal_rate: 4.0,
            crew_change_cost: 50.0,
            deadhead_penalty: 5000.0,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), String> {
        let coefs = [
            ("flying_rate", self.flying_rate),
            ("mg_hours_per_duty", self.mg_hours_per_duty),
            ("hotel_per_night", self.hotel_per_night),
            ("meal_rate", self.meal_rate),
            ("crew_change_cost", self.crew_change_cost),
            ("deadhead_penalty", self.deadhead_penalty),
        ];
        for (name, v) in coefs {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be a finite non-negative number"));
            }
        }
        Ok(())
    }

    pub fn flying_cost(&self, flight: &Flight) -> f64 {
        self.flying_rate * flight.flying_minutes() as f64 / 60.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CostBreakdown {
    pub flying: f64,
    pub hotel: f64,
    pub meal: f64,
    pub excess_pay: f64,
    pub soft: f64,
    pub total: f64,
}

impl CostBreakdown {
    /// Hotel, meal and excess pay: everything but flying pay and soft cost.
    pub fn hard(&self) -> f64 {
        self.hotel + self.meal + self.excess_pay
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConnectionKind {
    Sit,
    Overnight,
    None,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("empty flight or duty sequence")]
    Empty,
    #[error("unknown flight {0}")]
    UnknownFlight(FlightId),
    #[error("flight {to} does not depart from the arrival airport of flight {from}")]
    Connect { from: FlightId, to: FlightId },
    #[error("sit time {gap} min between flights {from} and {to} outside window")]
    Sit {
        from: FlightId,
        to: FlightId,
        gap: Minutes,
    },
    #[error("duty has {0} flights, above the limit")]
    DutyMaxFlights(usize),
    #[error("duty elapsed time {0} min above the limit")]
    DutyElapsed(Minutes),
    #[error("duty flying time {0} min above the limit")]
    DutyFlying(Minutes),
    #[error("overnight rest of {gap} min between duties {index} and {next}", next = index + 1)]
    Night { index: usize, gap: Minutes },
    #[error("duty {index} does not depart from the arrival airport of the previous duty")]
    NightConnect { index: usize },
    #[error("pairing does not start at crew base {0}")]
    BaseStart(String),
    #[error("pairing does not end at crew base {0}")]
    BaseEnd(String),
    #[error("pairing returns to crew base {0} before its last duty")]
    BaseEarlyReturn(String),
    #[error("pairing has {0} duties, above the limit")]
    MaxDuties(usize),
    #[error("overnight rest at {airport} in the crew base city")]
    OvernightInBaseCity { airport: String },
    #[error("duty enumerated for base {found}, pairing base is {expected}")]
    BaseMismatch { expected: String, found: String },
}

impl Violation {
    /// Constraint class that failed.
    pub fn constraint(&self) -> &'static str {
        match self {
            Violation::Empty | Violation::UnknownFlight(_) => "input",
            Violation::Connect { .. } | Violation::NightConnect { .. } => "connect",
            Violation::Sit { .. } => "sit",
            Violation::DutyMaxFlights(_) => "duty:max_flights",
            Violation::DutyElapsed(_) => "duty:elapsed",
            Violation::DutyFlying(_) => "duty:flying",
            Violation::Night { .. } => "night",
            Violation::BaseStart(_)
            | Violation::BaseEnd(_)
            | Violation::BaseEarlyReturn(_)
            | Violation::BaseMismatch { .. } => "base",
            Violation::MaxDuties(_) => "other:max_duties",
            Violation::OvernightInBaseCity { .. } => "other:overnight_in_base_city",
        }
    }
}

/// Legal one-working-day flight sequence for one crew base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Duty {
    pub flights: Vec<FlightId>,
    pub crew_base: String,
    pub origin: String,
    pub destination: String,
    /// First departure.
    pub first_dep: Minutes,
    /// Last arrival.
    pub last_arr: Minutes,
    /// First departure minus briefing.
    pub start: Minutes,
    /// Last arrival plus de-briefing.
    pub end: Minutes,
    pub flying_minutes: Minutes,
    pub elapsed_minutes: Minutes,
    /// Sit connections on which the aircraft changes.
    pub n_crew_changes: usize,
}

impl Duty {
    pub fn key(&self) -> String {
        join_ids(self.flights.iter().copied())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingKind {
    Legal,
    /// Single-flight placeholder used to seed the optimizer; never legal.
    Artificial,
}

/// Legal duty sequence leaving from and returning to one crew base.
#[derive(Clone, Debug, PartialEq)]
pub struct Pairing {
    pub duties: Vec<Arc<Duty>>,
    pub crew_base: String,
    pub tafb_minutes: Minutes,
    pub n_overnight_rests: usize,
    pub n_crew_changes: usize,
    pub cost: CostBreakdown,
    pub kind: PairingKind,
    key: String,
}

pub type PairingRef = Arc<Pairing>;

impl Pairing {
    /// Unique identity: crew base followed by the covered flight ids, e.g. `DAL:1_10_100_200`.
    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn flights(&self) -> impl Iterator<Item = FlightId> + '_ {
        self.duties.iter().flat_map(|d| d.flights.iter().copied())
    }

    pub fn flight_ids(&self) -> Vec<FlightId> {
        self.flights().collect()
    }

    pub fn n_flights(&self) -> usize {
        self.duties.iter().map(|d| d.flights.len()).sum()
    }

    pub fn flying_minutes(&self) -> Minutes {
        self.duties.iter().map(|d| d.flying_minutes).sum()
    }

    pub fn is_legal(&self) -> bool {
        self.kind == PairingKind::Legal
    }

    /// Deadhead-adjusted column cost `c_j + psi_D * n_flights`.
    pub fn adjusted_cost(&self, deadhead_penalty: f64) -> f64 {
        self.cost.total + deadhead_penalty * self.n_flights() as f64
    }

    /// Pseudo-pairing covering `flight` at a flat cost; it bypasses all legality checks.
    pub fn artificial(flight: &Flight, pseudo_cost: f64) -> Pairing {
        let duty = Duty {
            flights: vec![flight.id],
            crew_base: flight.origin.clone(),
            origin: flight.origin.clone(),
            destination: flight.destination.clone(),
            first_dep: flight.dep,
            last_arr: flight.arr,
            start: flight.dep,
            end: flight.arr,
            flying_minutes: flight.flying_minutes(),
            elapsed_minutes: flight.flying_minutes(),
            n_crew_changes: 0,
        };
        Pairing {
            key: format!("{}{}", ARTIFICIAL_PREFIX, flight.id),
            crew_base: flight.origin.clone(),
            tafb_minutes: duty.elapsed_minutes,
            duties: vec![Arc::new(duty)],
            n_overnight_rests: 0,
            n_crew_changes: 0,
            cost: CostBreakdown {
                soft: pseudo_cost,
                total: pseudo_cost,
                ..CostBreakdown::default()
            },
            kind: PairingKind::Artificial,
        }
    }
}

/// Key prefix of artificial pairings; sorts after every airport code.
pub const ARTIFICIAL_PREFIX: &str = "~art:";

pub fn join_ids(ids: impl Iterator<Item = FlightId>) -> String {
    let mut s = String::new();
    for (i, id) in ids.enumerate() {
        if i > 0 {
            s.push('_');
        }
        s.push_str(&id.to_string());
    }
    s
}

pub fn pairing_key(base: &str, ids: impl Iterator<Item = FlightId>) -> String {
    format!("{}:{}", base, join_ids(ids))
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:.2} USD)", self.key, self.cost.total)
    }
}

pub fn check_connection(f1: &Flight, f2: &Flight, rules: &RuleSet) -> ConnectionKind {
    if f1.destination != f2.origin {
        return ConnectionKind::None;
    }
    rules.connection_kind(f2.dep - f1.arr)
}

pub fn check_duty(
    flights: &[FlightId],
    crew_base: &str,
    schedule: &Schedule,
    rules: &RuleSet,
) -> Result<Duty, Violation> {
    let first_id = *flights.first().ok_or(Violation::Empty)?;
    let first = schedule
        .get(first_id)
        .ok_or(Violation::UnknownFlight(first_id))?;
    let mut prev = first;
    let mut flying = first.flying_minutes();
    let mut changes = 0;
    for &id in &flights[1..] {
        let next = schedule.get(id).ok_or(Violation::UnknownFlight(id))?;
        if prev.destination != next.origin {
            return Err(Violation::Connect {
                from: prev.id,
                to: id,
            });
        }
        let gap = next.dep - prev.arr;
        if rules.connection_kind(gap) != ConnectionKind::Sit {
            return Err(Violation::Sit {
                from: prev.id,
                to: id,
                gap,
            });
        }
        if prev.tail != next.tail {
            changes += 1;
        }
        flying += next.flying_minutes();
        prev = next;
    }
    if flights.len() > rules.max_flights_per_duty {
        return Err(Violation::DutyMaxFlights(flights.len()));
    }
    let start = first.dep - rules.briefing;
    let end = prev.arr + rules.debriefing;
    let elapsed = end - start;
    if elapsed > rules.max_duty_elapsed {
        return Err(Violation::DutyElapsed(elapsed));
    }
    if flying > rules.max_duty_flying {
        return Err(Violation::DutyFlying(flying));
    }
    Ok(Duty {
        flights: flights.to_vec(),
        crew_base: crew_base.to_string(),
        origin: first.origin.clone(),
        destination: prev.destination.clone(),
        first_dep: first.dep,
        last_arr: prev.arr,
        start,
        end,
        flying_minutes: flying,
        elapsed_minutes: elapsed,
        n_crew_changes: changes,
    })
}

/// Checks the overnight rest between two consecutive duties.
pub fn check_overnight(prev: &Duty, next: &Duty, rules: &RuleSet) -> bool {
    prev.destination == next.origin
        && rules.connection_kind(next.first_dep - prev.last_arr) == ConnectionKind::Overnight
}

/// Pairing-level checks that can be applied to a partial duty sequence:
/// overnight connections, duty count and overnights in the base city.
/// `C_base` closure at the end is checked separately by [`check_pairing`].
pub fn check_partial_pairing<D: Borrow<Duty>>(
    duties: &[D],
    base: &str,
    schedule: &Schedule,
    rules: &RuleSet,
) -> Result<(), Violation> {
    let first = duties.first().ok_or(Violation::Empty)?.borrow();
    if first.origin != base {
        return Err(Violation::BaseStart(base.to_string()));
    }
    if duties.len() > rules.max_duties_per_pairing {
        return Err(Violation::MaxDuties(duties.len()));
    }
    for (index, w) in duties.windows(2).enumerate() {
        let (a, b) = (w[0].borrow(), w[1].borrow());
        if a.destination == base {
            return Err(Violation::BaseEarlyReturn(base.to_string()));
        }
        if a.destination != b.origin {
            return Err(Violation::NightConnect { index: index + 1 });
        }
        let gap = b.first_dep - a.last_arr;
        if rules.connection_kind(gap) != ConnectionKind::Overnight {
            return Err(Violation::Night { index, gap });
        }
        if rules.forbid_overnight_in_base_city && schedule.same_city(&a.destination, base) {
            return Err(Violation::OvernightInBaseCity {
                airport: a.destination.clone(),
            });
        }
    }
    Ok(())
}

pub fn check_pairing(
    duties: &[Duty],
    base: &str,
    schedule: &Schedule,
    rules: &RuleSet,
    cm: &CostModel,
) -> Result<Pairing, Violation> {
    check_partial_pairing(duties, base, schedule, rules)?;
    for d in duties {
        if d.crew_base != base {
            return Err(Violation::BaseMismatch {
                expected: base.to_string(),
                found: d.crew_base.clone(),
            });
        }
    }
    let last = duties.last().expect("non-empty after partial check");
    if last.destination != base {
        return Err(Violation::BaseEnd(base.to_string()));
    }
    Ok(assemble_pairing(duties.iter().cloned().map(Arc::new).collect(), base, cm))
}

/// Builds a pairing from duties already known to be legal together.
pub(crate) fn assemble_pairing(duties: Vec<Arc<Duty>>, base: &str, cm: &CostModel) -> Pairing {
    let tafb = duties.last().map(|d| d.end).unwrap_or(0) - duties.first().map(|d| d.start).unwrap_or(0);
    let mut p = Pairing {
        key: pairing_key(base, duties.iter().flat_map(|d| d.flights.iter().copied())),
        crew_base: base.to_string(),
        tafb_minutes: tafb,
        n_overnight_rests: duties.len().saturating_sub(1),
        n_crew_changes: duties.iter().map(|d| d.n_crew_changes).sum(),
        duties,
        cost: CostBreakdown::default(),
        kind: PairingKind::Legal,
    };
    p.cost = cost_pairing(&p, cm);
    p
}

pub fn cost_pairing(p: &Pairing, cm: &CostModel) -> CostBreakdown {
    let flying_hours = p.flying_minutes() as f64 / 60.0;
    let guaranteed = cm.mg_hours_per_duty * p.duties.len() as f64;
    let flying = cm.flying_rate * flying_hours;
    let excess_pay = cm.flying_rate * (guaranteed - flying_hours).max(0.0);
    let hotel = cm.hotel_per_night * p.n_overnight_rests as f64;
    let meal = cm.meal_rate * p.tafb_minutes as f64 / 60.0;
    let soft = cm.crew_change_cost * p.n_crew_changes as f64;
    CostBreakdown {
        flying,
        hotel,
        meal,
        excess_pay,
        soft,
        total: flying + hotel + meal + excess_pay + soft,
    }
}
