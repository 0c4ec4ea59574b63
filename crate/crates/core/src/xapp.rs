//! The two control applications and the plumbing that applies their
//! accepted decisions to cell state.
//!
//! MLB (load balancing) maps each cell's PRB load to a Cell Individual
//! Offset: the more loaded a cell, the higher its CIO, which pushes border
//! users toward neighbors. MRO (mobility robustness) watches each cell's
//! ping-pong ratio and radio-link failures and nudges Time-To-Trigger and
//! hysteresis up or down one step at a time. Both emit a message only when
//! the computed value differs from the currently applied one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cm::{ControlTarget, E2ControlMessage, ParameterId, Verdict, XAppId};
use crate::ran::{CellId, CellState};
use crate::{Scalar, SimTime};

pub const MLB_XAPP_ID: &str = "mlb";
pub const MRO_XAPP_ID: &str = "mro";

/// The standard A3 time-to-trigger value ladder, in milliseconds.
pub const TTT_STEPS_MS: [u64; 16] =
    [0, 40, 64, 80, 100, 128, 160, 256, 320, 480, 512, 640, 1024, 1280, 2560, 5120];

/// Next value up the TTT ladder (saturates at the top).
pub fn ttt_step_up(current_ms: u64) -> u64 {
    match TTT_STEPS_MS.iter().find(|&&v| v > current_ms) {
        Some(&v) => v,
        None => *TTT_STEPS_MS.last().unwrap(),
    }
}

/// Next value down the TTT ladder (saturates at zero).
pub fn ttt_step_down(current_ms: u64) -> u64 {
    match TTT_STEPS_MS.iter().rev().find(|&&v| v < current_ms) {
        Some(&v) => v,
        None => TTT_STEPS_MS[0],
    }
}

/// Snaps a value to the nearest half unit (0.5 dB control granularity).
pub fn quantize_half(value: Scalar) -> Scalar {
    (value * 2.0).round() / 2.0
}

// ---------------------------------------------------------------------------
// KPI reporting
// ---------------------------------------------------------------------------

/// Per-cell KPIs over one reporting window.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct KpiCellStats {
    /// Assigned-to-total PRB ratio at report time.
    pub load: Scalar,
    pub handover_count: u32,
    pub pingpong_count: u32,
    pub rlf_count: u32,
}

/// KPI snapshot handed to the xApps once per control period.
#[derive(Clone, PartialEq, Debug)]
pub struct KpiReport {
    pub time: SimTime,
    pub per_cell: BTreeMap<CellId, KpiCellStats>,
}

// ---------------------------------------------------------------------------
// Decision rules
// ---------------------------------------------------------------------------

/// Load-balancing controller constants.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlbParams {
    /// dB of offset per unit of load deviation.
    pub gain_db_per_load: Scalar,
    /// Load the controller steers toward.
    pub target_load: Scalar,
    pub cio_min_db: Scalar,
    pub cio_max_db: Scalar,
    /// Seconds of load averaged per decision. Instantaneous load jitters
    /// with every session arrival, and a quantized offset chasing that
    /// jitter shuffles users instead of steering them. Must be a multiple
    /// of the control period.
    pub eval_every_s: Scalar,
}

impl Default for MlbParams {
    fn default() -> Self {
        MlbParams {
            gain_db_per_load: 10.0,
            target_load: 0.7,
            cio_min_db: -6.0,
            cio_max_db: 6.0,
            eval_every_s: 5.0,
        }
    }
}

/// Mobility-robustness controller constants.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MroParams {
    /// Ping-pong ratio above which handovers are damped.
    pub pp_high: Scalar,
    /// Ping-pong ratio below which (with failures present) damping relaxes.
    pub pp_low: Scalar,
    pub hh_step_db: Scalar,
    pub hh_min_db: Scalar,
    pub hh_max_db: Scalar,
    /// Seconds of handover statistics accumulated per decision. Handover
    /// ratios need tens of samples per cell to mean anything; evaluating on
    /// every control boundary would react to noise. Must be a multiple of
    /// the control period.
    pub eval_every_s: Scalar,
}

impl Default for MroParams {
    fn default() -> Self {
        MroParams {
            pp_high: 0.5,
            pp_low: 0.2,
            hh_step_db: 0.5,
            hh_min_db: 0.0,
            hh_max_db: 10.0,
            eval_every_s: 10.0,
        }
    }
}

/// Mints sequential message ids; shared by all emitters so arrival order is
/// total and deterministic.
#[derive(Clone, Debug, Default)]
pub struct MsgSeq(u64);

impl MsgSeq {
    pub fn next(&mut self) -> u64 {
        self.0 += 1;
        self.0
    }
}

/// MLB: per cell, target CIO = clamp(gain · (load − target)), quantized to
/// 0.5 dB; a message is emitted only when that differs from the applied CIO.
pub fn mlb_decide(
    report: &KpiReport,
    cells: &[CellState],
    params: &MlbParams,
    seq: &mut MsgSeq,
    now: SimTime,
) -> Vec<E2ControlMessage> {
    let mut messages = Vec::new();
    for (&cell_id, stats) in &report.per_cell {
        let raw = params.gain_db_per_load * (stats.load - params.target_load);
        let target_cio = quantize_half(raw.clamp(params.cio_min_db, params.cio_max_db));
        let current = cells[cell_id as usize].cio_db;
        if target_cio != current {
            messages.push(E2ControlMessage {
                msg_id: seq.next(),
                xapp_id: XAppId::new(MLB_XAPP_ID),
                target: ControlTarget::cell(cell_id),
                parameter: ParameterId::Cio,
                value: target_cio,
                issued_at: now,
            });
        }
    }
    messages
}

/// MRO: per cell with handovers in the window, compare the ping-pong ratio
/// against the two bands; step TTT along the ladder and HH by one step in
/// the corresponding direction. Messages only on value change.
pub fn mro_decide(
    report: &KpiReport,
    cells: &[CellState],
    params: &MroParams,
    seq: &mut MsgSeq,
    now: SimTime,
) -> Vec<E2ControlMessage> {
    let mut messages = Vec::new();
    for (&cell_id, stats) in &report.per_cell {
        if stats.handover_count == 0 {
            continue;
        }
        let pp_ratio = stats.pingpong_count as Scalar / stats.handover_count as Scalar;
        let cell = &cells[cell_id as usize];
        let (target_ttt, target_hh) = if pp_ratio > params.pp_high {
            (
                ttt_step_up(cell.ttt_ms),
                quantize_half((cell.hh_db + params.hh_step_db).min(params.hh_max_db)),
            )
        } else if pp_ratio < params.pp_low && stats.rlf_count > 0 {
            (
                ttt_step_down(cell.ttt_ms),
                quantize_half((cell.hh_db - params.hh_step_db).max(params.hh_min_db)),
            )
        } else {
            continue;
        };
        if target_ttt != cell.ttt_ms {
            messages.push(E2ControlMessage {
                msg_id: seq.next(),
                xapp_id: XAppId::new(MRO_XAPP_ID),
                target: ControlTarget::cell(cell_id),
                parameter: ParameterId::Ttt,
                value: target_ttt as Scalar,
                issued_at: now,
            });
        }
        if target_hh != cell.hh_db {
            messages.push(E2ControlMessage {
                msg_id: seq.next(),
                xapp_id: XAppId::new(MRO_XAPP_ID),
                target: ControlTarget::cell(cell_id),
                parameter: ParameterId::Hh,
                value: target_hh,
                issued_at: now,
            });
        }
    }
    messages
}

// ---------------------------------------------------------------------------
// Applying accepted decisions
// ---------------------------------------------------------------------------

#[derive(Error, Debug, PartialEq)]
pub enum XappError {
    #[error("control message targets unknown cell {0}")]
    UnknownCell(u32),
    #[error("control message carries parameter {0} no cell accepts")]
    UnsupportedParameter(String),
}

/// Journal entry for one accepted parameter write.
#[derive(Clone, PartialEq, Debug)]
pub struct AppliedChange {
    pub time: SimTime,
    pub msg_id: u64,
    pub xapp_id: XAppId,
    pub cell_id: CellId,
    pub parameter: ParameterId,
    pub old_value: Scalar,
    pub new_value: Scalar,
}

/// Writes exactly the accepted messages' values to their target cells and
/// returns a journal of every write. Rejected messages leave no trace.
pub fn apply_accepted(
    cells: &mut [CellState],
    processed: &[(E2ControlMessage, Verdict)],
) -> Result<Vec<AppliedChange>, XappError> {
    let mut journal = Vec::new();
    for (msg, verdict) in processed {
        if !verdict.accepted() {
            continue;
        }
        let idx = msg.target.id as usize;
        let cell = cells.get_mut(idx).ok_or(XappError::UnknownCell(msg.target.id))?;
        let old_value = match msg.parameter {
            ParameterId::Cio => {
                let old = cell.cio_db;
                cell.cio_db = msg.value;
                old
            }
            ParameterId::Ttt => {
                let old = cell.ttt_ms as Scalar;
                cell.ttt_ms = msg.value.round() as u64;
                old
            }
            ParameterId::Hh => {
                let old = cell.hh_db;
                cell.hh_db = msg.value;
                old
            }
            ref other => return Err(XappError::UnsupportedParameter(other.to_string())),
        };
        journal.push(AppliedChange {
            time: msg.issued_at,
            msg_id: msg.msg_id,
            xapp_id: msg.xapp_id.clone(),
            cell_id: msg.target.id,
            parameter: msg.parameter.clone(),
            old_value,
            new_value: msg.value,
        });
    }
    Ok(journal)
}
