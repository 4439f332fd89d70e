//! Crew pairing optimization.
//!
//! Pipeline: enumerate legal duties and pairings over a flight schedule
//! ([`pairgen`]), build an initial feasible cover ([`ifs`]), improve it with
//! column generation over the set-covering LP relaxation ([`lp`], [`colgen`])
//! and integerize with branch-and-bound ([`mip`]), alternating the two in the
//! [`engine`] loop.

pub mod colgen;
pub mod config;
pub mod engine;
pub mod files;
pub mod ifs;
pub mod lp;
pub mod mip;
pub mod netgen;
pub mod oracle;
pub mod pairgen;
pub mod report;
pub mod rules;
