//! Plain-text `key = value` configuration with `[rules]`, `[cost]`, `[ifs]`,
//! `[cg]` and `[engine]` sections. Blank lines and `#` comments are ignored;
//! unknown sections and keys are rejected.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use crate::colgen::CgConfig;
use crate::engine::EngineConfig;
use crate::ifs::{IfsConfig, IfsMethod};
use crate::rules::{CostModel, RuleSet};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    pub rules: RuleSet,
    pub cost: CostModel,
    pub ifs: IfsConfig,
    pub engine: EngineConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let bad = |msg: String| ConfigError::Parse { line, msg };
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if !matches!(name, "rules" | "cost" | "ifs" | "cg" | "engine") {
                    return Err(bad(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = s.split_once('=') else {
                return Err(bad(format!("expected `key = value`, found `{s}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some(sec) = section.as_deref() else {
                return Err(bad(format!("key `{key}` outside any section")));
            };
            cfg.set(sec, key, value).map_err(bad)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.rules.validate().map_err(ConfigError::Invalid)?;
        self.cost.validate().map_err(ConfigError::Invalid)?;
        self.ifs.validate().map_err(ConfigError::Invalid)?;
        self.engine.validate().map_err(ConfigError::Invalid)
    }

    /// Sets every seed at once.
    pub fn set_seed(&mut self, seed: u64) {
        self.ifs.seed = seed;
        self.engine.seed = seed;
        self.engine.cg.seed = seed;
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        let r = &mut self.rules;
        let c = &mut self.cost;
        let f = &mut self.ifs;
        let e = &mut self.engine;
        match (section, key) {
            ("rules", "sit_min") => r.sit_min = num(key, value)?,
            ("rules", "sit_max") => r.sit_max = num(key, value)?,
            ("rules", "night_min") => r.night_min = num(key, value)?,
            ("rules", "night_max") => r.night_max = num(key, value)?,
            ("rules", "briefing") => r.briefing = num(key, value)?,
            ("rules", "debriefing") => r.debriefing = num(key, value)?,
            ("rules", "max_flights_per_duty") => r.max_flights_per_duty = num(key, value)?,
            ("rules", "max_duty_elapsed") => r.max_duty_elapsed = num(key, value)?,
            ("rules", "max_duty_flying") => r.max_duty_flying = num(key, value)?,
            ("rules", "max_duties_per_pairing") => r.max_duties_per_pairing = num(key, value)?,
            ("rules", "forbid_overnight_in_base_city") => r.forbid_overnight_in_base_city = num(key, value)?,
            ("cost", "flying_rate") => c.flying_rate = num(key, value)?,
            ("cost", "mg_hours_per_duty") => c.mg_hours_per_duty = num(key, value)?,
            ("cost", "hotel_per_night") => c.hotel_per_night = num(key, value)?,
            ("cost", "meal_rate") => c.meal_rate = num(key, value)?,
            ("cost", "crew_change_cost") => c.crew_change_cost = num(key, value)?,
            ("cost", "deadhead_penalty") => c.deadhead_penalty = num(key, value)?,
            ("ifs", "method") => {
                f.method = match value {
                    "ipdch" => IfsMethod::Ipdch,
                    "artificial" => IfsMethod::Artificial,
                    _ => return Err(format!("method must be `ipdch` or `artificial`, found `{value}`")),
                }
            }
            ("ifs", "k_lo_frac") => f.k_lo_frac = num(key, value)?,
            ("ifs", "k_hi_frac") => f.k_hi_frac = num(key, value)?,
            ("ifs", "artificial_pseudo_cost") => f.artificial_pseudo_cost = num(key, value)?,
            ("ifs", "seed") => f.seed = num(key, value)?,
            ("cg", "target_size") => {
                let n = num(key, value)?;
                e.cg.target_size = n;
                e.cg.quotas = CgConfig::with_target(n).quotas;
            }
            ("cg", "quota_cgd") => e.cg.quotas[0] = num(key, value)?,
            ("cg", "quota_cgu") => e.cg.quotas[1] = num(key, value)?,
            ("cg", "quota_cgr") => e.cg.quotas[2] = num(key, value)?,
            ("cg", "quota_cga") => e.cg.quotas[3] = num(key, value)?,
            ("cg", "cgr_duty_sample") => e.cg.cgr_duty_sample = num(key, value)?,
            ("cg", "cgd_subset_frac") => e.cg.cgd_subset_frac = num(key, value)?,
            ("cg", "cgu_top_frac") => e.cg.cgu_top_frac = num(key, value)?,
            ("cg", "archive_cap") => e.cg.archive_cap = Some(num(key, value)?),
            ("engine", "th_cost") => e.th_cost = num(key, value)?,
            ("engine", "th_t") => e.th_t = num(key, value)?,
            ("engine", "th_ipt") => e.th_ipt = Duration::from_secs_f64(num(key, value)?),
            ("engine", "t_max") => e.t_max = num(key, value)?,
            ("engine", "wall_max") => e.wall_max = Duration::from_secs_f64(num(key, value)?),
            ("engine", "seed") => e.seed = num(key, value)?,
            ("engine", "retain_pool") => e.retain_pool = num(key, value)?,
            ("engine", "ip_over_full_pool") => e.ip_over_full_pool = num(key, value)?,
            ("engine", "dual_centering") => e.lp.dual_centering = num(key, value)?,
            ("engine", "support_eps") => e.lp.support_eps = num(key, value)?,
            ("engine", "optimality_tol") => e.lp.optimality_tol = num(key, value)?,
            _ => return Err(format!("unknown key `{key}` in [{section}]")),
        }
        Ok(())
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("bad value `{value}` for `{key}`"))
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.rules;
        writeln!(f, "[rules]")?;
        writeln!(f, "sit_min = {}", r.sit_min)?;
        writeln!(f, "sit_max = {}", r.sit_max)?;
        writeln!(f, "night_min = {}", r.night_min)?;
        writeln!(f, "night_max = {}", r.night_max)?;
        writeln!(f, "briefing = {}", r.briefing)?;
        writeln!(f, "debriefing = {}", r.debriefing)?;
        writeln!(f, "max_flights_per_duty = {}", r.max_flights_per_duty)?;
        writeln!(f, "max_duty_elapsed = {}", r.max_duty_elapsed)?;
        writeln!(f, "max_duty_flying = {}", r.max_duty_flying)?;
        writeln!(f, "max_duties_per_pairing = {}", r.max_duties_per_pairing)?;
        writeln!(f, "forbid_overnight_in_base_city = {}", r.forbid_overnight_in_base_city)?;
        let c = &self.cost;
        writeln!(f, "\n[cost]")?;
        writeln!(f, "flying_rate = {}", c.flying_rate)?;
        writeln!(f, "mg_hours_per_duty = {}", c.mg_hours_per_duty)?;
        writeln!(f, "hotel_per_night = {}", c.hotel_per_night)?;
        writeln!(f, "meal_rate = {}", c.meal_rate)?;
        writeln!(f, "crew_change_cost = {}", c.crew_change_cost)?;
        writeln!(f, "deadhead_penalty = {}", c.deadhead_penalty)?;
        let i = &self.ifs;
        writeln!(f, "\n[ifs]")?;
        let method = match i.method {
            IfsMethod::Ipdch => "ipdch",
            IfsMethod::Artificial => "artificial",
        };
        writeln!(f, "method = {method}")?;
        writeln!(f, "k_lo_frac = {}", i.k_lo_frac)?;
        writeln!(f, "k_hi_frac = {}", i.k_hi_frac)?;
        writeln!(f, "artificial_pseudo_cost = {}", i.artificial_pseudo_cost)?;
        writeln!(f, "seed = {}", i.seed)?;
        let g = &self.engine.cg;
        writeln!(f, "\n[cg]")?;
        writeln!(f, "target_size = {}", g.target_size)?;
        for (name, q) in ["quota_cgd", "quota_cgu", "quota_cgr", "quota_cga"].iter().zip(g.quotas) {
            writeln!(f, "{name} = {q}")?;
        }
        writeln!(f, "cgr_duty_sample = {}", g.cgr_duty_sample)?;
        writeln!(f, "cgd_subset_frac = {}", g.cgd_subset_frac)?;
        writeln!(f, "cgu_top_frac = {}", g.cgu_top_frac)?;
        if let Some(cap) = g.archive_cap {
            writeln!(f, "archive_cap = {cap}")?;
        }
        let e = &self.engine;
        writeln!(f, "\n[engine]")?;
        writeln!(f, "th_cost = {}", e.th_cost)?;
        writeln!(f, "th_t = {}", e.th_t)?;
        writeln!(f, "th_ipt = {}", e.th_ipt.as_secs_f64())?;
        writeln!(f, "t_max = {}", e.t_max)?;
        writeln!(f, "wall_max = {}", e.wall_max.as_secs_f64())?;
        writeln!(f, "seed = {}", e.seed)?;
        writeln!(f, "retain_pool = {}", e.retain_pool)?;
        writeln!(f, "ip_over_full_pool = {}", e.ip_over_full_pool)?;
        writeln!(f, "dual_centering = {}", e.lp.dual_centering)?;
        writeln!(f, "support_eps = {}", e.lp.support_eps)?;
        writeln!(f, "optimality_tol = {}", e.lp.optimality_tol)
    }
}
