//! User-side modeling: random-waypoint mobility, on/off traffic sessions
//! with admission control, the A3/TTT handover state machine, ping-pong
//! classification, and radio-link-failure detection.
//!
//! Each user is an independent state machine stepped once per tick against
//! an immutable snapshot of cell state. All randomness comes through
//! caller-provided RNGs so a run is fully reproducible.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Bounds, Vec2};
use crate::ran::CellId;
use crate::{Scalar, SimTime, UserId};

// ---------------------------------------------------------------------------
// Profiles and parameters
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileClass {
    Low,
    Medium,
    High,
}

/// Traffic profile: a fixed bitrate the user demands while active.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct UserProfile {
    pub class: ProfileClass,
    pub required_bitrate_bps: Scalar,
}

/// Random-waypoint mobility constants.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityParams {
    pub speed_min_mps: Scalar,
    pub speed_max_mps: Scalar,
    /// Half-width of the square simulation area, centered on the origin.
    pub bounds_half_width_m: Scalar,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams { speed_min_mps: 0.8, speed_max_mps: 8.0, bounds_half_width_m: 750.0 }
    }
}

impl MobilityParams {
    pub fn bounds(&self) -> Bounds {
        Bounds::centered_square(self.bounds_half_width_m)
    }
}

/// On/off session process constants.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionParams {
    pub idle_mean_s: Scalar,
    pub active_mean_s: Scalar,
    /// Wait after a blocked activation before retrying.
    pub blocked_backoff_s: Scalar,
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams { idle_mean_s: 20.0, active_mean_s: 30.0, blocked_backoff_s: 5.0 }
    }
}

/// Radio-link-failure thresholds and timers.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlfParams {
    /// SINR below which the outage timer runs.
    pub qout_db: Scalar,
    /// SINR above which the outage timer resets.
    pub qin_db: Scalar,
    /// Continuous outage time that declares a failure.
    pub timer_ms: u64,
    /// Delay before the user re-attaches after a failure.
    pub reestablish_ms: u64,
}

impl Default for RlfParams {
    fn default() -> Self {
        RlfParams { qout_db: -8.0, qin_db: -6.0, timer_ms: 1000, reestablish_ms: 200 }
    }
}

// ---------------------------------------------------------------------------
// User state
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SessionState {
    Idle,
    Active,
    BlockedBackoff,
}

/// Full per-user simulation state.
#[derive(Clone, Debug)]
pub struct UserState {
    pub user_id: UserId,
    pub position: Vec2,
    pub waypoint: Vec2,
    pub speed_mps: Scalar,
    pub profile: UserProfile,
    pub serving: Option<CellId>,
    pub session: SessionState,
    /// When the current session phase ends (next transition attempt).
    pub session_deadline: SimTime,
    /// Milliseconds each neighbor's entering condition has held continuously.
    pub a3_timers_ms: BTreeMap<CellId, u64>,
    /// Milliseconds spent continuously below the outage threshold.
    pub rlf_timer_ms: u64,
    /// Set while detached: earliest time re-attachment is allowed.
    pub reattach_at: Option<SimTime>,
    pub last_ho: Option<(CellId, CellId, SimTime)>,
    /// Data stalls until this instant after a handover executes; the user
    /// stays attached but is not scheduled.
    pub interrupted_until: SimTime,
}

impl UserState {
    pub fn is_attached(&self) -> bool {
        self.serving.is_some()
    }

    pub fn is_active(&self) -> bool {
        self.session == SessionState::Active
    }

    /// Forgets all neighbor timers, e.g. after any serving-cell change.
    pub fn reset_a3(&mut self) {
        self.a3_timers_ms.clear();
    }
}

// ---------------------------------------------------------------------------
// Events
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Handover,
    Pingpong,
    Rlf,
    CallBlock,
}

impl std::fmt::Display for EventKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventKind::Handover => write!(f, "handover"),
            EventKind::Pingpong => write!(f, "pingpong"),
            EventKind::Rlf => write!(f, "rlf"),
            EventKind::CallBlock => write!(f, "call_block"),
        }
    }
}

/// One logged occurrence of a handover, ping-pong, RLF, or call blockade.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct EventRecord {
    pub kind: EventKind,
    pub time: SimTime,
    pub user_id: UserId,
    pub from_cell: Option<CellId>,
    pub to_cell: Option<CellId>,
}

/// Renders events as CSV with header `time,kind,user_id,from_cell,to_cell`.
pub fn events_csv(events: &[EventRecord]) -> String {
    let mut out = String::from("time,kind,user_id,from_cell,to_cell\n");
    for e in events {
        let from = e.from_cell.map(|c| c.to_string()).unwrap_or_default();
        let to = e.to_cell.map(|c| c.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.time.as_secs_f64(),
            e.kind,
            e.user_id,
            from,
            to
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Mobility
// ---------------------------------------------------------------------------

/// Draws a fresh waypoint and travel speed for a user.
pub fn draw_waypoint(
    bounds: &Bounds,
    params: &MobilityParams,
    rng: &mut impl Rng,
) -> (Vec2, Scalar) {
    let x = rng.gen_range(bounds.min.x..=bounds.max.x);
    let y = rng.gen_range(bounds.min.y..=bounds.max.y);
    let speed = rng.gen_range(params.speed_min_mps..=params.speed_max_mps);
    (Vec2::new(x, y), speed)
}

/// Advances a user along its waypoint path for `dt_s` seconds. On arrival a
/// new waypoint and speed are drawn; any residual time in the arrival tick
/// is spent at the waypoint.
pub fn step_mobility(
    user: &mut UserState,
    dt_s: Scalar,
    bounds: &Bounds,
    params: &MobilityParams,
    rng: &mut impl Rng,
) {
    if dt_s <= 0.0 {
        return;
    }
    let to_target = user.waypoint - user.position;
    let remaining = to_target.length();
    let step = user.speed_mps * dt_s;
    if step >= remaining {
        user.position = user.waypoint;
        let (waypoint, speed) = draw_waypoint(bounds, params, rng);
        user.waypoint = waypoint;
        user.speed_mps = speed;
    } else {
        user.position = user.position + to_target * (step / remaining);
    }
}

// ---------------------------------------------------------------------------
// A3 handover state machine
// ---------------------------------------------------------------------------

/// One neighbor measurement for the A3 evaluation.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct NeighborMeasurement {
    pub cell_id: CellId,
    pub rsrp_dbm: Scalar,
}

/// Serving-side parameters the A3 comparison uses.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ServingParams {
    pub rsrp_dbm: Scalar,
    pub cio_db: Scalar,
    pub hh_db: Scalar,
    pub ttt_ms: u64,
}

/// The A3 entering condition: the neighbor, boosted by the serving cell's
/// offset, beats the serving cell by more than its hysteresis.
pub fn a3_condition(neighbor_rsrp: Scalar, serving: &ServingParams) -> bool {
    neighbor_rsrp + serving.cio_db > serving.rsrp_dbm + serving.hh_db
}

/// Advances every neighbor's time-to-trigger timer by one tick and executes
/// a handover once a timer reaches the serving cell's TTT. Returns the
/// `(from, to)` pair when a handover happened this tick.
///
/// On handover the user switches serving cell, clears all timers, and
/// records the hop; the caller logs events and applies ping-pong
/// classification.
pub fn evaluate_a3(
    user: &mut UserState,
    serving: &ServingParams,
    neighbors: &[NeighborMeasurement],
    dt_ms: u64,
    now: SimTime,
) -> Option<(CellId, CellId)> {
    let from = user.serving?;
    let mut best: Option<(Scalar, CellId)> = None;
    let mut timers = std::mem::take(&mut user.a3_timers_ms);
    timers.retain(|cell, _| neighbors.iter().any(|n| n.cell_id == *cell));
    for n in neighbors {
        if n.cell_id == from {
            continue;
        }
        if a3_condition(n.rsrp_dbm, serving) {
            let timer = timers.entry(n.cell_id).or_insert(0);
            *timer += dt_ms;
            if *timer >= serving.ttt_ms {
                let better = match best {
                    Some((rsrp, id)) => {
                        n.rsrp_dbm > rsrp || (n.rsrp_dbm == rsrp && n.cell_id < id)
                    }
                    None => true,
                };
                if better {
                    best = Some((n.rsrp_dbm, n.cell_id));
                }
            }
        } else {
            timers.remove(&n.cell_id);
        }
    }
    user.a3_timers_ms = timers;
    match best {
        Some((_, to)) => {
            user.serving = Some(to);
            user.reset_a3();
            user.last_ho = Some((from, to, now));
            Some((from, to))
        }
        None => None,
    }
}

/// A handover `from → to` at `now` is a ping-pong iff the user's previous
/// handover was the exact reverse hop and happened within the window.
pub fn classify_pingpong(
    from: CellId,
    to: CellId,
    now: SimTime,
    previous_ho: Option<(CellId, CellId, SimTime)>,
    window: SimTime,
) -> bool {
    match previous_ho {
        Some((prev_from, prev_to, prev_time)) => {
            prev_from == to && prev_to == from && now.saturating_sub(prev_time) <= window
        }
        None => false,
    }
}

// ---------------------------------------------------------------------------
// Radio link failure
// ---------------------------------------------------------------------------

/// Runs the outage timer for an attached, active user. Declares an RLF after
/// sustained outage: the user detaches and may re-attach only after the
/// re-establishment delay.
pub fn check_rlf(
    user: &mut UserState,
    serving_sinr_db: Scalar,
    params: &RlfParams,
    dt_ms: u64,
    now: SimTime,
) -> Option<EventRecord> {
    let serving = match user.serving {
        Some(c) if user.is_active() => c,
        _ => return None,
    };
    if serving_sinr_db < params.qout_db {
        user.rlf_timer_ms += dt_ms;
        if user.rlf_timer_ms >= params.timer_ms {
            user.serving = None;
            user.rlf_timer_ms = 0;
            user.reset_a3();
            user.reattach_at = Some(now + SimTime::from_ms(params.reestablish_ms));
            return Some(EventRecord {
                kind: EventKind::Rlf,
                time: now,
                user_id: user.user_id,
                from_cell: Some(serving),
                to_cell: None,
            });
        }
    } else if serving_sinr_db > params.qin_db {
        user.rlf_timer_ms = 0;
    }
    None
}

// ---------------------------------------------------------------------------
// Sessions and admission
// ---------------------------------------------------------------------------

/// Inverse-CDF exponential draw with the given mean.
pub fn exponential_s(mean_s: Scalar, rng: &mut impl Rng) -> Scalar {
    let u: Scalar = rng.gen();
    -mean_s * (1.0 - u).ln()
}

/// Drives the idle/active/backoff session process for one user at `now`.
///
/// An activation is admitted only when the serving cell still has a free
/// PRB; otherwise a call blockade is recorded and the user backs off. A
/// detached user silently defers activation by `retry` until re-attached.
pub fn step_session(
    user: &mut UserState,
    free_prb_of_serving: Option<u32>,
    params: &SessionParams,
    retry: SimTime,
    now: SimTime,
    rng: &mut impl Rng,
) -> Option<EventRecord> {
    if now < user.session_deadline {
        return None;
    }
    match user.session {
        SessionState::Active => {
            user.session = SessionState::Idle;
            user.session_deadline = now + SimTime::from_secs_f64(exponential_s(params.idle_mean_s, rng));
            None
        }
        SessionState::Idle | SessionState::BlockedBackoff => match free_prb_of_serving {
            None => {
                // Detached: keep trying shortly after re-attachment.
                user.session_deadline = now + retry;
                None
            }
            Some(0) => {
                let serving = user.serving;
                user.session = SessionState::BlockedBackoff;
                user.session_deadline =
                    now + SimTime::from_secs_f64(params.blocked_backoff_s);
                Some(EventRecord {
                    kind: EventKind::CallBlock,
                    time: now,
                    user_id: user.user_id,
                    from_cell: serving,
                    to_cell: None,
                })
            }
            Some(_) => {
                user.session = SessionState::Active;
                user.session_deadline =
                    now + SimTime::from_secs_f64(exponential_s(params.active_mean_s, rng));
                None
            }
        },
    }
}
