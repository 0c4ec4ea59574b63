//! Scenario configuration: one serde tree covering every tunable constant,
//! with shipped defaults describing the reference deployment and a
//! path-qualified validator run before any simulation state is built.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cm::{CmConfig, CmMode, ParameterGroup, ParameterId, TargetKind, XAppId};
use crate::ran::{InitialCellParams, LayoutParams, RadioParams};
use crate::ue::{MobilityParams, RlfParams, SessionParams};
use crate::xapp::{MlbParams, MroParams, MLB_XAPP_ID, MRO_XAPP_ID, TTT_STEPS_MS};
use crate::Scalar;

#[derive(Error, Debug, PartialEq)]
#[error("{key}: {reason}")]
pub struct ConfigError {
    /// Dotted path of the offending key.
    pub key: String,
    pub reason: String,
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError { key: key.to_string(), reason: reason.into() }
}

// ---------------------------------------------------------------------------
// Sections
// ---------------------------------------------------------------------------

/// Conflict-mitigation operating mode, as written in configuration files and
/// on the command line.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum CmModeSetting {
    /// Pipeline observes but accepts everything.
    #[serde(rename = "off")]
    Off,
    /// MLB wins all conflicts.
    #[serde(rename = "prio-mlb")]
    PrioMlb,
    /// MRO wins all conflicts.
    #[serde(rename = "prio-mro")]
    PrioMro,
}

impl CmModeSetting {
    pub fn as_str(&self) -> &'static str {
        match self {
            CmModeSetting::Off => "off",
            CmModeSetting::PrioMlb => "prio-mlb",
            CmModeSetting::PrioMro => "prio-mro",
        }
    }

    pub fn to_cm_mode(self) -> CmMode {
        match self {
            CmModeSetting::Off => CmMode::Off,
            CmModeSetting::PrioMlb => CmMode::Prioritize(XAppId::new(MLB_XAPP_ID)),
            CmModeSetting::PrioMro => CmMode::Prioritize(XAppId::new(MRO_XAPP_ID)),
        }
    }
}

impl std::str::FromStr for CmModeSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(CmModeSetting::Off),
            "prio-mlb" => Ok(CmModeSetting::PrioMlb),
            "prio-mro" => Ok(CmModeSetting::PrioMro),
            other => Err(format!("unknown variant `{other}` (expected off, prio-mlb, prio-mro)")),
        }
    }
}

impl std::fmt::Display for CmModeSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Conflict-mitigation section.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CmSection {
    pub mode: CmModeSetting,
    pub effect_ttl_s: Scalar,
    pub cooldown_s: Scalar,
    pub groups: Vec<ParameterGroup>,
}

impl Default for CmSection {
    fn default() -> Self {
        CmSection {
            mode: CmModeSetting::Off,
            // Outlives the slowest emitter's cadence, so a protected effect
            // does not silently lapse between two of its refreshes.
            effect_ttl_s: 30.0,
            cooldown_s: 5.0,
            groups: vec![ParameterGroup::new(
                "handover-boundary",
                TargetKind::Cell,
                [ParameterId::Cio, ParameterId::Ttt, ParameterId::Hh],
            )],
        }
    }
}

impl CmSection {
    pub fn to_cm_config(&self) -> CmConfig {
        CmConfig {
            mode: self.mode.to_cm_mode(),
            effect_ttl: crate::SimTime::from_secs_f64(self.effect_ttl_s),
            cooldown_duration: crate::SimTime::from_secs_f64(self.cooldown_s),
            groups: self.groups.clone(),
        }
    }
}

/// One traffic profile row: selection probability and demanded bitrate.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    pub probability: Scalar,
    pub bitrate_bps: Scalar,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection { probability: 0.0, bitrate_bps: 0.0 }
    }
}

/// Traffic-profile mix.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfilesSection {
    pub low: ProfileSection,
    pub medium: ProfileSection,
    pub high: ProfileSection,
}

impl Default for ProfilesSection {
    fn default() -> Self {
        ProfilesSection {
            low: ProfileSection { probability: 0.4, bitrate_bps: 2.0e6 },
            medium: ProfileSection { probability: 0.3, bitrate_bps: 6.0e6 },
            high: ProfileSection { probability: 0.3, bitrate_bps: 12.0e6 },
        }
    }
}

/// User population and initial placement.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersSection {
    /// Users placed around the central macro site.
    pub macro_count: u32,
    /// Users placed around each micro site.
    pub per_micro_count: u32,
    /// Placement disc radius for the macro population.
    pub macro_radius_m: Scalar,
    /// Placement disc radius for each micro population.
    pub micro_radius_m: Scalar,
    pub profiles: ProfilesSection,
}

impl Default for UsersSection {
    fn default() -> Self {
        UsersSection {
            macro_count: 100,
            per_micro_count: 30,
            macro_radius_m: 750.0,
            micro_radius_m: 200.0,
            profiles: ProfilesSection::default(),
        }
    }
}

/// Handover/RLF behaviour shared by all users.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandoverSection {
    pub initial: InitialCellParams,
    /// Window within which a reverse handover counts as a ping-pong.
    pub pingpong_window_s: Scalar,
    /// Data-plane stall while a handover executes: the user keeps its
    /// grants (the transition consumes the resources) but no payload is
    /// delivered until the stall elapses. This is what makes excessive
    /// handovers and ping-pongs cost throughput and capacity.
    pub interruption_ms: u64,
    /// Extra PRBs the transition itself occupies while stalled (access
    /// signalling, data forwarding), competing with payload traffic.
    pub overhead_prbs: u32,
    pub rlf: RlfParams,
}

impl Default for HandoverSection {
    fn default() -> Self {
        HandoverSection {
            initial: InitialCellParams::default(),
            pingpong_window_s: 3.0,
            interruption_ms: 100,
            overhead_prbs: 2,
            rlf: RlfParams::default(),
        }
    }
}

/// Emission order of the two xApps within one control period.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum XappOrder {
    #[serde(rename = "mlb-mro")]
    MlbThenMro,
    #[serde(rename = "mro-mlb")]
    MroThenMlb,
}

/// xApp controller constants.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XappSection {
    pub control_period_s: Scalar,
    pub order: XappOrder,
    pub mlb: MlbParams,
    pub mro: MroParams,
}

impl Default for XappSection {
    fn default() -> Self {
        XappSection {
            control_period_s: 1.0,
            order: XappOrder::MlbThenMro,
            mlb: MlbParams::default(),
            mro: MroParams::default(),
        }
    }
}

/// The complete scenario: everything a run needs besides the output paths.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_s: Scalar,
    pub tick_ms: u64,
    /// Metrics ignore everything up to this time.
    pub warmup_s: Scalar,
    pub cm: CmSection,
    pub layout: LayoutParams,
    pub radio: RadioParams,
    pub mobility: MobilityParams,
    pub session: SessionParams,
    pub users: UsersSection,
    pub handover: HandoverSection,
    pub xapps: XappSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            duration_s: 200.0,
            tick_ms: 100,
            warmup_s: 10.0,
            cm: CmSection::default(),
            layout: LayoutParams::default(),
            radio: RadioParams::default(),
            mobility: MobilityParams::default(),
            session: SessionParams::default(),
            users: UsersSection::default(),
            handover: HandoverSection::default(),
            xapps: XappSection::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn total_users(&self) -> u32 {
        let micro_sites =
            self.layout.micro_ring_count + if self.layout.collocated_micro { 1 } else { 0 };
        self.users.macro_count + self.users.per_micro_count * micro_sites
    }

    pub fn control_period_ms(&self) -> u64 {
        (self.xapps.control_period_s * 1000.0).round() as u64
    }

    pub fn mro_eval_every_ms(&self) -> u64 {
        (self.xapps.mro.eval_every_s * 1000.0).round() as u64
    }

    pub fn mlb_eval_every_ms(&self) -> u64 {
        (self.xapps.mlb.eval_every_s * 1000.0).round() as u64
    }

    /// Validates every invariant the simulator depends on. Errors name the
    /// offending key with its dotted path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.duration_s < 0.0 || !self.duration_s.is_finite() {
            return Err(invalid("duration_s", "must be a finite value ≥ 0"));
        }
        if self.tick_ms == 0 {
            return Err(invalid("tick_ms", "must be > 0"));
        }
        if self.warmup_s < 0.0 {
            return Err(invalid("warmup_s", "must be ≥ 0"));
        }
        let period_ms = self.control_period_ms();
        if period_ms == 0 || period_ms % self.tick_ms != 0 {
            return Err(invalid(
                "xapps.control_period_s",
                format!("{period_ms} ms must be a positive multiple of tick_ms"),
            ));
        }
        let mro_every_ms = self.mro_eval_every_ms();
        if mro_every_ms == 0 || mro_every_ms % period_ms != 0 {
            return Err(invalid(
                "xapps.mro.eval_every_s",
                format!("{mro_every_ms} ms must be a positive multiple of the control period"),
            ));
        }
        let mlb_every_ms = self.mlb_eval_every_ms();
        if mlb_every_ms == 0 || mlb_every_ms % period_ms != 0 {
            return Err(invalid(
                "xapps.mlb.eval_every_s",
                format!("{mlb_every_ms} ms must be a positive multiple of the control period"),
            ));
        }
        if self.cm.effect_ttl_s <= 0.0 {
            return Err(invalid("cm.effect_ttl_s", "must be > 0"));
        }
        if self.cm.cooldown_s < 0.0 {
            return Err(invalid("cm.cooldown_s", "must be ≥ 0"));
        }
        crate::cm::register_groups(self.cm.groups.clone())
            .map_err(|e| invalid("cm.groups", e.to_string()))?;
        crate::ran::prb_count(self.layout.macro_site.bandwidth_mhz)
            .map_err(|e| invalid("layout.macro_site.bandwidth_mhz", e.to_string()))?;
        crate::ran::prb_count(self.layout.micro_site.bandwidth_mhz)
            .map_err(|e| invalid("layout.micro_site.bandwidth_mhz", e.to_string()))?;
        if self.layout.sector_azimuths_deg.is_empty() {
            return Err(invalid("layout.sector_azimuths_deg", "needs at least one sector"));
        }
        if self.layout.micro_ring_count > 0 && self.layout.micro_ring_radius_m <= 0.0 {
            return Err(invalid("layout.micro_ring_radius_m", "must be > 0 for a non-empty ring"));
        }
        if self.radio.min_distance_m <= 0.0 {
            return Err(invalid("radio.min_distance_m", "must be > 0"));
        }
        if self.radio.shannon_cap_bps_hz <= 0.0 {
            return Err(invalid("radio.shannon_cap_bps_hz", "must be > 0"));
        }
        if self.radio.shadowing_sigma_db < 0.0 {
            return Err(invalid("radio.shadowing_sigma_db", "must be ≥ 0"));
        }
        if self.radio.fading.sigma_db < 0.0 {
            return Err(invalid("radio.fading.sigma_db", "must be ≥ 0"));
        }
        if self.radio.fading.coherence_time_s <= 0.0 {
            return Err(invalid("radio.fading.coherence_time_s", "must be > 0"));
        }
        if self.mobility.speed_min_mps <= 0.0
            || self.mobility.speed_max_mps < self.mobility.speed_min_mps
        {
            return Err(invalid(
                "mobility.speed_min_mps",
                "speeds must satisfy 0 < min ≤ max",
            ));
        }
        if self.mobility.bounds_half_width_m <= 0.0 {
            return Err(invalid("mobility.bounds_half_width_m", "must be > 0"));
        }
        if self.session.idle_mean_s <= 0.0 || self.session.active_mean_s <= 0.0 {
            return Err(invalid("session.idle_mean_s", "session means must be > 0"));
        }
        if self.session.blocked_backoff_s <= 0.0 {
            return Err(invalid("session.blocked_backoff_s", "must be > 0"));
        }
        let p = &self.users.profiles;
        let prob_sum = p.low.probability + p.medium.probability + p.high.probability;
        if (prob_sum - 1.0).abs() > 1e-9 {
            return Err(invalid(
                "users.profiles",
                format!("probabilities sum to {prob_sum}, expected 1"),
            ));
        }
        for (key, profile) in [
            ("users.profiles.low", p.low),
            ("users.profiles.medium", p.medium),
            ("users.profiles.high", p.high),
        ] {
            if profile.probability < 0.0 {
                return Err(invalid(key, "probability must be ≥ 0"));
            }
            if profile.bitrate_bps <= 0.0 {
                return Err(invalid(key, "bitrate_bps must be > 0"));
            }
        }
        if self.users.macro_radius_m <= 0.0 || self.users.micro_radius_m <= 0.0 {
            return Err(invalid("users.macro_radius_m", "placement radii must be > 0"));
        }
        let initial = &self.handover.initial;
        if !TTT_STEPS_MS.contains(&initial.ttt_ms) {
            return Err(invalid(
                "handover.initial.ttt_ms",
                format!("{} is not in the TTT step set {:?}", initial.ttt_ms, TTT_STEPS_MS),
            ));
        }
        if initial.cio_db < self.xapps.mlb.cio_min_db || initial.cio_db > self.xapps.mlb.cio_max_db
        {
            return Err(invalid("handover.initial.cio_db", "outside the CIO control range"));
        }
        if initial.hh_db < self.xapps.mro.hh_min_db || initial.hh_db > self.xapps.mro.hh_max_db {
            return Err(invalid("handover.initial.hh_db", "outside the HH control range"));
        }
        if self.handover.pingpong_window_s <= 0.0 {
            return Err(invalid("handover.pingpong_window_s", "must be > 0"));
        }
        if self.handover.rlf.qin_db < self.handover.rlf.qout_db {
            return Err(invalid(
                "handover.rlf.qin_db",
                "recovery threshold must be ≥ outage threshold",
            ));
        }
        if self.handover.rlf.timer_ms == 0 {
            return Err(invalid("handover.rlf.timer_ms", "must be > 0"));
        }
        if self.xapps.mlb.cio_min_db > self.xapps.mlb.cio_max_db {
            return Err(invalid("xapps.mlb.cio_min_db", "min must be ≤ max"));
        }
        if self.xapps.mro.hh_min_db > self.xapps.mro.hh_max_db {
            return Err(invalid("xapps.mro.hh_min_db", "min must be ≤ max"));
        }
        if !(0.0..=1.0).contains(&self.xapps.mro.pp_low)
            || !(0.0..=1.0).contains(&self.xapps.mro.pp_high)
            || self.xapps.mro.pp_low > self.xapps.mro.pp_high
        {
            return Err(invalid("xapps.mro.pp_low", "bands must satisfy 0 ≤ low ≤ high ≤ 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_describes_the_reference_scenario() {
        let config = ScenarioConfig::default();
        config.validate().unwrap();
        assert_eq!(config.total_users(), 310);
        assert_eq!(config.layout.cell_count(), 24);
        assert_eq!(config.control_period_ms(), 1000);
        assert_eq!(config.duration_s, 200.0);
        assert_eq!(config.cm.mode, CmModeSetting::Off);
    }

    #[test]
    fn json_round_trip_preserves_the_config() {
        let config = ScenarioConfig::default();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn partial_json_fills_defaults_at_every_level() {
        let text = r#"{ "seed": 9, "radio": { "noise_figure_db": 7.0 } }"#;
        let config: ScenarioConfig = serde_json::from_str(text).unwrap();
        assert_eq!(config.seed, 9);
        assert_eq!(config.radio.noise_figure_db, 7.0);
        // Untouched values keep their defaults.
        assert_eq!(config.radio.shannon_cap_bps_hz, 6.0);
        assert_eq!(config.duration_s, 200.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{ "radio": { "noise_temperature": 290 } }"#;
        let err = serde_json::from_str::<ScenarioConfig>(text).unwrap_err();
        assert!(err.to_string().contains("noise_temperature"), "{err}");
    }

    #[test]
    fn off_grid_initial_ttt_is_rejected_with_the_key_path() {
        let mut config = ScenarioConfig::default();
        config.handover.initial.ttt_ms = 90;
        let err = config.validate().unwrap_err();
        assert_eq!(err.key, "handover.initial.ttt_ms");
        assert!(err.to_string().contains("90"));
    }

    #[test]
    fn profile_probabilities_must_sum_to_one() {
        let mut config = ScenarioConfig::default();
        config.users.profiles.low.probability = 0.5;
        let err = config.validate().unwrap_err();
        assert_eq!(err.key, "users.profiles");
    }

    #[test]
    fn tick_must_divide_the_control_period() {
        let mut config = ScenarioConfig::default();
        config.tick_ms = 300;
        let err = config.validate().unwrap_err();
        assert_eq!(err.key, "xapps.control_period_s");
    }

    #[test]
    fn robustness_cadence_must_align_with_control_boundaries() {
        let mut config = ScenarioConfig::default();
        config.xapps.mro.eval_every_s = 2.5;
        config.xapps.control_period_s = 2.0;
        config.xapps.mlb.eval_every_s = 2.0;
        let err = config.validate().unwrap_err();
        assert_eq!(err.key, "xapps.mro.eval_every_s");
        config.xapps.mro.eval_every_s = 4.0;
        config.validate().unwrap();
    }

    #[test]
    fn balancing_cadence_must_align_with_control_boundaries() {
        let mut config = ScenarioConfig::default();
        config.xapps.mlb.eval_every_s = 1.5;
        let err = config.validate().unwrap_err();
        assert_eq!(err.key, "xapps.mlb.eval_every_s");
        config.xapps.mlb.eval_every_s = 3.0;
        config.validate().unwrap();
    }

    #[test]
    fn mode_setting_round_trips_through_strings() {
        for setting in [CmModeSetting::Off, CmModeSetting::PrioMlb, CmModeSetting::PrioMro] {
            let parsed: CmModeSetting = setting.as_str().parse().unwrap();
            assert_eq!(parsed, setting);
        }
        assert!("prio-both".parse::<CmModeSetting>().is_err());
    }

    #[test]
    fn to_cm_config_maps_modes_to_priorities() {
        let mut section = CmSection::default();
        section.mode = CmModeSetting::PrioMro;
        let cm = section.to_cm_config();
        assert_eq!(cm.mode, CmMode::Prioritize(XAppId::new("mro")));
        assert_eq!(cm.effect_ttl.as_ms(), 10_000);
        assert_eq!(cm.cooldown_duration.as_ms(), 5_000);
        assert_eq!(cm.groups.len(), 1);
    }
}
