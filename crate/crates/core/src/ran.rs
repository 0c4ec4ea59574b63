//! Radio access network model: site layout, propagation, link budgets, and
//! per-cell PRB scheduling.
//!
//! The layout is a heterogeneous deployment: one macro site, optionally a
//! micro site collocated with it, and a ring of micro sites around the
//! center. Every site is split into three 120-degree sectors; each sector is
//! one cell and one control target. Pure link computations (path loss,
//! antenna pattern, SINR, spectral efficiency) are generic over the scalar
//! type; stateful cell bookkeeping uses the crate-level [`Scalar`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{wrap_angle_deg, Vec2};
use crate::num::Float;
use crate::{Scalar, UserId};

pub type CellId = u32;

/// Bandwidth of one LTE physical resource block.
pub const PRB_BANDWIDTH_HZ: f64 = 180_000.0;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SiteKind {
    Macro,
    Micro,
}

/// Physical configuration of one base-station site.
#[derive(Clone, PartialEq, Debug)]
pub struct SiteConfig {
    pub position: Vec2,
    pub height_m: Scalar,
    pub eirp_dbm: Scalar,
    pub frequency_mhz: Scalar,
    pub bandwidth_mhz: u32,
    pub kind: SiteKind,
}

/// Radio and control state of one sector (= one cell).
#[derive(Clone, Debug)]
pub struct CellState {
    pub cell_id: CellId,
    pub site: SiteConfig,
    pub azimuth_deg: Scalar,
    pub n_prb: u32,
    pub assigned_prb: u32,
    pub cio_db: Scalar,
    pub ttt_ms: u64,
    pub hh_db: Scalar,
}

impl CellState {
    /// Assigned-to-total PRB ratio in [0, 1].
    pub fn load(&self) -> Scalar {
        self.assigned_prb as Scalar / self.n_prb as Scalar
    }

    pub fn free_prb(&self) -> u32 {
        self.n_prb - self.assigned_prb
    }
}

/// Per-PRB link quality between one cell and one user position.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct LinkBudget {
    pub rsrp_dbm: Scalar,
    pub sinr_db: Scalar,
    pub per_prb_rate_bps: Scalar,
}

#[derive(Error, Debug, PartialEq)]
pub enum RanError {
    #[error("unsupported bandwidth {0} MHz (supported: 10, 20)")]
    UnsupportedBandwidth(u32),
    #[error("layout needs at least one sector azimuth")]
    NoSectors,
}

// ---------------------------------------------------------------------------
// Tunable radio constants (all surfaced in the scenario configuration)
// ---------------------------------------------------------------------------

/// Macro-layer path loss `offset + slope * log10(d_km)`.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacroPathLoss {
    pub offset_db: Scalar,
    pub slope_db_per_decade: Scalar,
}

impl Default for MacroPathLoss {
    fn default() -> Self {
        MacroPathLoss { offset_db: 120.9, slope_db_per_decade: 37.6 }
    }
}

/// Micro-layer path loss `offset + freq_coeff * log10(f_GHz) + slope * log10(d_m)`.
///
/// The default slope is a line-of-sight street-level value; it gives the
/// low-power micro layer a coverage footprint of its own instead of letting
/// the high-power macro umbrella win everywhere.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MicroPathLoss {
    pub offset_db: Scalar,
    pub freq_coeff_db: Scalar,
    pub slope_db_per_decade: Scalar,
}

impl Default for MicroPathLoss {
    fn default() -> Self {
        MicroPathLoss { offset_db: 22.7, freq_coeff_db: 26.0, slope_db_per_decade: 22.0 }
    }
}

/// Sector antenna pattern `-min(coefficient * (angle/beamwidth)^2, floor)`.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SectorPattern {
    pub coefficient: Scalar,
    pub beamwidth_deg: Scalar,
    pub max_attenuation_db: Scalar,
}

impl Default for SectorPattern {
    fn default() -> Self {
        SectorPattern { coefficient: 12.0, beamwidth_deg: 70.0, max_attenuation_db: 25.0 }
    }
}

/// Temporally correlated small-scale fading, modeled per (user, cell) as a
/// stationary AR(1) process in dB: zero mean, standard deviation `sigma_db`,
/// autocorrelation `exp(-dt / coherence_time_s)` across a step of `dt`.
///
/// The correlation time is what lets fades persist long enough to matter:
/// a dip must outlive the outage timer to cause a link failure, and margin
/// flicker across the hysteresis threshold is what produces handover churn.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FadingParams {
    /// Standard deviation in dB; 0 disables fading.
    pub sigma_db: Scalar,
    pub coherence_time_s: Scalar,
}

impl Default for FadingParams {
    fn default() -> Self {
        FadingParams { sigma_db: 5.0, coherence_time_s: 1.0 }
    }
}

/// All tunable radio constants.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioParams {
    pub macro_pl: MacroPathLoss,
    pub micro_pl: MicroPathLoss,
    pub sector: SectorPattern,
    /// Distances below this are clamped before the path-loss formula.
    pub min_distance_m: Scalar,
    pub noise_figure_db: Scalar,
    /// Spectral-efficiency cap of the truncated-Shannon link adaptation.
    pub shannon_cap_bps_hz: Scalar,
    /// Log-normal shadowing standard deviation; 0 disables shadowing.
    pub shadowing_sigma_db: Scalar,
    pub fading: FadingParams,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            macro_pl: MacroPathLoss::default(),
            micro_pl: MicroPathLoss::default(),
            sector: SectorPattern::default(),
            min_distance_m: 10.0,
            noise_figure_db: 9.0,
            shannon_cap_bps_hz: 6.0,
            shadowing_sigma_db: 4.0,
            fading: FadingParams::default(),
        }
    }
}

// ---------------------------------------------------------------------------
// Pure link computations (generic over the scalar type)
// ---------------------------------------------------------------------------

pub fn db_to_linear<F: Float>(db: F) -> F {
    F::c(10.0).powf(db / F::c(10.0))
}

pub fn linear_to_db<F: Float>(linear: F) -> F {
    F::c(10.0) * linear.log10()
}

/// Macro path loss in dB at `d_m` meters (clamped at `min_d_m`).
pub fn macro_path_loss_db<F: Float>(offset_db: F, slope: F, d_m: F, min_d_m: F) -> F {
    let d_km = d_m.max(min_d_m) / F::c(1000.0);
    offset_db + slope * d_km.log10()
}

/// Micro path loss in dB at `d_m` meters for carrier `f_ghz` (clamped).
pub fn micro_path_loss_db<F: Float>(
    offset_db: F,
    freq_coeff_db: F,
    slope: F,
    f_ghz: F,
    d_m: F,
    min_d_m: F,
) -> F {
    offset_db + freq_coeff_db * f_ghz.log10() + slope * d_m.max(min_d_m).log10()
}

/// Angular attenuation of a sector antenna at `delta_deg` off boresight.
pub fn sector_attenuation_db<F: Float>(pattern_coeff: F, beamwidth_deg: F, floor_db: F, delta_deg: F) -> F {
    let ratio = delta_deg / beamwidth_deg;
    (pattern_coeff * ratio * ratio).min(floor_db)
}

/// Thermal noise power per PRB in dBm, including the receiver noise figure.
pub fn noise_per_prb_dbm<F: Float>(noise_figure_db: F) -> F {
    F::c(-174.0) + F::c(10.0) * F::c(PRB_BANDWIDTH_HZ).log10() + noise_figure_db
}

/// Linear SINR combiner: serving power over noise plus summed interference,
/// all in dBm per PRB.
pub fn sinr_db<F: Float>(
    serving_rsrp_dbm: F,
    interferers_dbm: impl IntoIterator<Item = F>,
    noise_dbm: F,
) -> F {
    let s = db_to_linear(serving_rsrp_dbm);
    let mut denom = db_to_linear(noise_dbm);
    for i in interferers_dbm {
        denom += db_to_linear(i);
    }
    linear_to_db(s / denom)
}

/// Truncated-Shannon rate of one PRB in bits/s.
pub fn per_prb_rate_bps<F: Float>(sinr_db: F, cap_bps_hz: F) -> F {
    let efficiency = (F::one() + db_to_linear(sinr_db)).log2().min(cap_bps_hz);
    F::c(PRB_BANDWIDTH_HZ) * efficiency
}

// ---------------------------------------------------------------------------
// Concrete cell-level operations
// ---------------------------------------------------------------------------

/// PRBs available in a carrier of the given bandwidth.
pub fn prb_count(bandwidth_mhz: u32) -> Result<u32, RanError> {
    match bandwidth_mhz {
        10 => Ok(50),
        20 => Ok(100),
        other => Err(RanError::UnsupportedBandwidth(other)),
    }
}

/// Path loss between a site and a user position under the given constants.
pub fn path_loss_db(site: &SiteConfig, user_pos: Vec2, radio: &RadioParams) -> Scalar {
    let d = site.position.distance(user_pos);
    match site.kind {
        SiteKind::Macro => macro_path_loss_db(
            radio.macro_pl.offset_db,
            radio.macro_pl.slope_db_per_decade,
            d,
            radio.min_distance_m,
        ),
        SiteKind::Micro => micro_path_loss_db(
            radio.micro_pl.offset_db,
            radio.micro_pl.freq_coeff_db,
            radio.micro_pl.slope_db_per_decade,
            site.frequency_mhz / 1000.0,
            d,
            radio.min_distance_m,
        ),
    }
}

/// Antenna gain (≤ 0 dB) of a sector toward a user position.
pub fn sector_gain_db(cell: &CellState, user_pos: Vec2, radio: &RadioParams) -> Scalar {
    let bearing = cell.site.position.bearing_deg(user_pos);
    let delta = wrap_angle_deg(bearing - cell.azimuth_deg);
    -sector_attenuation_db(
        radio.sector.coefficient,
        radio.sector.beamwidth_deg,
        radio.sector.max_attenuation_db,
        delta,
    )
}

/// Per-PRB reference signal power received from a cell at a position.
pub fn rsrp_dbm(cell: &CellState, user_pos: Vec2, radio: &RadioParams) -> Scalar {
    let per_prb_eirp = cell.site.eirp_dbm - 10.0 * (cell.n_prb as Scalar).log10();
    per_prb_eirp + sector_gain_db(cell, user_pos, radio) - path_loss_db(&cell.site, user_pos, radio)
}

/// SINR of `serving` given precomputed per-cell RSRPs; only co-frequency
/// cells interfere.
pub fn serving_sinr_db(
    serving: CellId,
    rsrps: &[(CellId, Scalar)],
    cells: &[CellState],
    radio: &RadioParams,
) -> Scalar {
    let serving_freq = cells[serving as usize].site.frequency_mhz;
    let serving_rsrp = rsrps[serving as usize].1;
    let interferers = rsrps.iter().filter_map(|&(id, rsrp)| {
        (id != serving && cells[id as usize].site.frequency_mhz == serving_freq).then_some(rsrp)
    });
    sinr_db(serving_rsrp, interferers, noise_per_prb_dbm(radio.noise_figure_db))
}

/// One user's scheduling request toward its serving cell.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct PrbDemand {
    pub user_id: UserId,
    pub required_bitrate_bps: Scalar,
    pub per_prb_rate_bps: Scalar,
    /// PRBs requested on top of the payload demand — control-plane work
    /// such as an in-flight handover — competing for capacity like any
    /// other request.
    pub overhead_prbs: u32,
}

/// PRBs one demand asks for: `ceil(required_bitrate / per_prb_rate)` plus
/// any overhead, capped at the whole grid (a user in hopeless radio asks
/// for everything).
pub fn requested_prbs(demand: &PrbDemand, n_prb: u32) -> u32 {
    if demand.per_prb_rate_bps <= 0.0 {
        n_prb
    } else {
        let payload = (demand.required_bitrate_bps / demand.per_prb_rate_bps).ceil() as u32;
        payload.saturating_add(demand.overhead_prbs).min(n_prb)
    }
}

/// Round-robin PRB allocation: each user requests
/// `ceil(required_bitrate / per_prb_rate)` PRBs and PRBs are dealt one at a
/// time in ascending user id until capacity or demand runs out. Updates
/// `cell.assigned_prb` and returns the per-user allocation.
pub fn schedule_prbs(cell: &mut CellState, demands: &[PrbDemand]) -> BTreeMap<UserId, u32> {
    let mut order: Vec<usize> = (0..demands.len()).collect();
    order.sort_by_key(|&i| demands[i].user_id);

    let requested: Vec<u32> = demands.iter().map(|d| requested_prbs(d, cell.n_prb)).collect();

    let mut allocation: BTreeMap<UserId, u32> =
        demands.iter().map(|d| (d.user_id, 0)).collect();
    let mut free = cell.n_prb;
    let mut any_unmet = true;
    while free > 0 && any_unmet {
        any_unmet = false;
        for &i in &order {
            let got = allocation.get_mut(&demands[i].user_id).expect("user present");
            if *got < requested[i] {
                *got += 1;
                free -= 1;
                if *got < requested[i] {
                    any_unmet = true;
                }
                if free == 0 {
                    break;
                }
            }
        }
    }
    cell.assigned_prb = cell.n_prb - free;
    allocation
}

// ---------------------------------------------------------------------------
// Layout construction
// ---------------------------------------------------------------------------

/// Per-site radio template (position and kind are derived from the layout).
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SiteTemplate {
    pub height_m: Scalar,
    pub eirp_dbm: Scalar,
    pub frequency_mhz: Scalar,
    pub bandwidth_mhz: u32,
}

impl Default for SiteTemplate {
    fn default() -> Self {
        // Macro defaults; the layout overrides for micros.
        SiteTemplate { height_m: 28.0, eirp_dbm: 42.0, frequency_mhz: 800.0, bandwidth_mhz: 10 }
    }
}

/// Geometry of the deployment: one central macro site, an optional micro
/// collocated with it, and a ring of micro sites at equal angular spacing.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayoutParams {
    pub macro_site: SiteTemplate,
    pub micro_site: SiteTemplate,
    pub collocated_micro: bool,
    pub micro_ring_count: u32,
    pub micro_ring_radius_m: Scalar,
    pub sector_azimuths_deg: Vec<Scalar>,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            macro_site: SiteTemplate::default(),
            micro_site: SiteTemplate {
                height_m: 12.0,
                eirp_dbm: 26.0,
                frequency_mhz: 2100.0,
                bandwidth_mhz: 20,
            },
            collocated_micro: true,
            micro_ring_count: 6,
            micro_ring_radius_m: 500.0,
            sector_azimuths_deg: vec![0.0, 120.0, 240.0],
        }
    }
}

impl LayoutParams {
    /// Site positions in construction order: macro, collocated micro, ring.
    pub fn site_positions(&self) -> Vec<(Vec2, SiteKind)> {
        let mut sites = vec![(Vec2::new(0.0, 0.0), SiteKind::Macro)];
        if self.collocated_micro {
            sites.push((Vec2::new(0.0, 0.0), SiteKind::Micro));
        }
        for k in 0..self.micro_ring_count {
            let angle = (k as Scalar) * std::f64::consts::TAU / self.micro_ring_count as Scalar;
            let pos = Vec2::new(
                self.micro_ring_radius_m * angle.cos(),
                self.micro_ring_radius_m * angle.sin(),
            );
            sites.push((pos, SiteKind::Micro));
        }
        sites
    }

    pub fn cell_count(&self) -> usize {
        self.site_positions().len() * self.sector_azimuths_deg.len()
    }
}

/// Initial control-parameter values every cell starts from.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialCellParams {
    pub cio_db: Scalar,
    pub hh_db: Scalar,
    pub ttt_ms: u64,
}

impl Default for InitialCellParams {
    fn default() -> Self {
        InitialCellParams { cio_db: 0.0, hh_db: 2.0, ttt_ms: 160 }
    }
}

/// Instantiates every sector of every site, in deterministic cell-id order.
pub fn build_cells(
    layout: &LayoutParams,
    initial: &InitialCellParams,
) -> Result<Vec<CellState>, RanError> {
    if layout.sector_azimuths_deg.is_empty() {
        return Err(RanError::NoSectors);
    }
    let mut cells = Vec::with_capacity(layout.cell_count());
    for (position, kind) in layout.site_positions() {
        let template = match kind {
            SiteKind::Macro => &layout.macro_site,
            SiteKind::Micro => &layout.micro_site,
        };
        let n_prb = prb_count(template.bandwidth_mhz)?;
        for &azimuth in &layout.sector_azimuths_deg {
            cells.push(CellState {
                cell_id: cells.len() as CellId,
                site: SiteConfig {
                    position,
                    height_m: template.height_m,
                    eirp_dbm: template.eirp_dbm,
                    frequency_mhz: template.frequency_mhz,
                    bandwidth_mhz: template.bandwidth_mhz,
                    kind,
                },
                azimuth_deg: azimuth,
                n_prb,
                assigned_prb: 0,
                cio_db: initial.cio_db,
                hh_db: initial.hh_db,
                ttt_ms: initial.ttt_ms,
            });
        }
    }
    Ok(cells)
}
