//! Deterministic simulator of a heterogeneous cellular network governed by a
//! near-real-time RAN controller running two xApps — mobility load balancing
//! (MLB, steering Cell Individual Offset) and mobility robustness optimization
//! (MRO, steering Time-To-Trigger and handover hysteresis) — whose control
//! decisions are routed through a conflict-mitigation pipeline.
//!
//! Module map:
//! - [`cm`] — parameter-group registry, conflict detection and resolution,
//!   decision store, verdict log.
//! - [`ran`] — network geometry, propagation, link budget, PRB scheduling.
//! - [`ue`] — user mobility, traffic sessions, the A3/TTT handover state
//!   machine, radio-link-failure and call-blockade bookkeeping.
//! - [`xapp`] — the MLB and MRO decision rules and applying accepted decisions.
//! - [`config`] — scenario configuration, validation, defaults.
//! - [`engine`] — the fixed-step event loop tying everything together.
//! - [`metrics`] — run summaries, tick traces, cross-variant comparison.
//!
//! Pure math (propagation, link budget, control laws) is generic over the
//! scalar type via [`num::Float`]; the simulator itself runs on the
//! [`Scalar`] alias.

pub mod cm;
pub mod config;
pub mod engine;
pub mod geom;
pub mod metrics;
pub mod num;
pub mod ran;
pub mod ue;
pub mod xapp;

/// Scalar type the simulation state is instantiated at.
pub type Scalar = f64;

/// Identifier of a simulated user terminal.
pub type UserId = u32;

/// Simulation clock, in integer milliseconds since run start.
///
/// Keeping time integral makes TTL and timer arithmetic exact, which the
/// byte-identical-output guarantee depends on. Conversions to seconds are
/// for display and export only.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: u64) -> Self {
        SimTime(ms)
    }

    /// Converts whole seconds; fractional input is rounded to the nearest ms.
    pub fn from_secs_f64(secs: f64) -> Self {
        SimTime((secs * 1000.0).round() as u64)
    }

    pub fn as_ms(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl std::fmt::Display for SimTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}s", self.as_secs_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simtime_second_conversions_are_exact_at_tick_granularity() {
        assert_eq!(SimTime::from_secs_f64(0.1).as_ms(), 100);
        assert_eq!(SimTime::from_secs_f64(200.0).as_ms(), 200_000);
        assert_eq!(SimTime::from_ms(12_300).as_secs_f64(), 12.3);
    }
}
