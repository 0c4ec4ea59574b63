//! The deterministic fixed-step simulation loop.
//!
//! Each tick advances mobility, recomputes the radio picture, runs the
//! per-user handover/failure/session machines, and schedules PRBs. On
//! control-period boundaries the per-cell KPI windows are reported to the
//! xApps, their messages run through the conflict-mitigation pipeline in
//! arrival order, and exactly the accepted values are applied to the cells.
//!
//! All randomness is drawn from per-purpose ChaCha streams derived from the
//! scenario seed, so identical `(seed, config)` pairs produce byte-identical
//! outputs, and user mobility is identical across variants of the same seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cm::{CmError, ConflictMitigation, E2ControlMessage, ProcessedMessage, Verdict};
use crate::config::{ConfigError, ScenarioConfig, XappOrder};
use crate::geom::Vec2;
use crate::metrics::{mean_bs_load, mean_user_satisfaction, MetricsSummary, TickRow};
use crate::ran::{
    self, build_cells, rsrp_dbm, schedule_prbs, CellState, PrbDemand, RanError, SiteKind,
};
use crate::ue::{
    self, classify_pingpong, draw_waypoint, evaluate_a3, events_csv, step_mobility, step_session,
    EventKind, EventRecord, NeighborMeasurement, ProfileClass, ServingParams, SessionState,
    UserProfile, UserState,
};
use crate::xapp::{self, mlb_decide, mro_decide, AppliedChange, KpiCellStats, KpiReport, MsgSeq, XappError};
use crate::{Scalar, SimTime, UserId};

#[derive(Error, Debug)]
pub enum EngineError {
    #[error("configuration invalid: {0}")]
    Config(#[from] ConfigError),
    #[error("layout invalid: {0}")]
    Ran(#[from] RanError),
    #[error("conflict-mitigation setup invalid: {0}")]
    Cm(#[from] CmError),
    #[error("control application failed: {0}")]
    Xapp(#[from] XappError),
}

/// Switches used by tests; the default is the ordinary full pipeline.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct EngineOptions {
    /// Skip the conflict-mitigation component entirely: every message is
    /// applied directly and no verdicts are recorded.
    pub bypass_cm: bool,
}

/// Everything one run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub config: ScenarioConfig,
    pub summary: MetricsSummary,
    pub trace: Vec<TickRow>,
    pub events: Vec<EventRecord>,
    pub verdicts: Vec<ProcessedMessage>,
    pub applied: Vec<AppliedChange>,
    pub n_cells: usize,
    pub n_users: usize,
}

impl RunOutput {
    /// Summary JSON: headline metrics plus a config echo that reloads into
    /// an identical scenario.
    pub fn summary_json(&self) -> String {
        let value = serde_json::json!({
            "seed": self.config.seed,
            "variant": self.config.cm.mode.as_str(),
            "summary": self.summary,
            "config": self.config,
        });
        let mut text = serde_json::to_string_pretty(&value).expect("summary serializes");
        text.push('\n');
        text
    }

    pub fn trace_csv(&self) -> String {
        crate::metrics::trace_csv(&self.trace, self.n_cells, self.n_users)
    }

    pub fn verdicts_jsonl(&self) -> String {
        crate::cm::verdicts_jsonl(&self.verdicts)
    }

    pub fn events_csv(&self) -> String {
        events_csv(&self.events)
    }
}

/// Runs the scenario with the ordinary pipeline.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput, EngineError> {
    run_with_options(config, EngineOptions::default())
}

// RNG stream layout derived from the scenario seed. Mobility, session, and
// fading draws get one stream per user so the radio environment does not
// depend on how control state evolves (and is identical across variants of
// one seed: any metric difference between variants is then attributable to
// the control decisions alone).
const STREAM_INIT: u64 = 0;
const STREAM_SHADOWING: u64 = 1;
const STREAM_USER_BASE: u64 = 16;
const STREAMS_PER_USER: u64 = 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn user_mobility_rng(seed: u64, user: UserId) -> ChaCha8Rng {
    stream_rng(seed, STREAM_USER_BASE + STREAMS_PER_USER * user as u64)
}

fn user_session_rng(seed: u64, user: UserId) -> ChaCha8Rng {
    stream_rng(seed, STREAM_USER_BASE + STREAMS_PER_USER * user as u64 + 1)
}

fn user_fading_rng(seed: u64, user: UserId) -> ChaCha8Rng {
    stream_rng(seed, STREAM_USER_BASE + STREAMS_PER_USER * user as u64 + 2)
}

/// Standard normal via Box–Muller; consumes exactly two uniforms.
fn standard_normal(rng: &mut impl Rng) -> Scalar {
    let u1: Scalar = 1.0 - rng.gen::<Scalar>();
    let u2: Scalar = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn uniform_in_disc(center: Vec2, radius: Scalar, rng: &mut impl Rng) -> Vec2 {
    let r = radius * rng.gen::<Scalar>().sqrt();
    let theta = std::f64::consts::TAU * rng.gen::<Scalar>();
    Vec2::new(center.x + r * theta.cos(), center.y + r * theta.sin())
}

fn draw_profile(config: &ScenarioConfig, rng: &mut impl Rng) -> UserProfile {
    let p = &config.users.profiles;
    let u: Scalar = rng.gen();
    if u < p.low.probability {
        UserProfile { class: ProfileClass::Low, required_bitrate_bps: p.low.bitrate_bps }
    } else if u < p.low.probability + p.medium.probability {
        UserProfile { class: ProfileClass::Medium, required_bitrate_bps: p.medium.bitrate_bps }
    } else {
        UserProfile { class: ProfileClass::High, required_bitrate_bps: p.high.bitrate_bps }
    }
}

struct Simulation {
    config: ScenarioConfig,
    cells: Vec<CellState>,
    users: Vec<UserState>,
    mobility_rngs: Vec<ChaCha8Rng>,
    session_rngs: Vec<ChaCha8Rng>,
    /// `shadowing[user][cell]` in dB; empty when shadowing is disabled.
    shadowing: Vec<Vec<Scalar>>,
    /// `fading[user][cell]` in dB, advanced each tick; empty when disabled.
    fading: Vec<Vec<Scalar>>,
    fading_rngs: Vec<ChaCha8Rng>,
    cm: Option<ConflictMitigation>,
    seq: MsgSeq,
    // Per-tick scratch, indexed by user.
    rsrp: Vec<Vec<Scalar>>,
    sinr: Vec<Scalar>,
    per_prb_rate: Vec<Scalar>,
    // Each app accumulates KPIs over its own evaluation window, reset only
    // when that app actually evaluates.
    // The load balancer averages offered load over several control periods;
    // a quantized offset chasing per-second load jitter shuffles users
    // instead of steering them.
    mlb_window_ho: Vec<u32>,
    mlb_window_pp: Vec<u32>,
    mlb_window_rlf: Vec<u32>,
    mlb_window_load: Vec<Scalar>,
    mlb_window_ticks: u32,
    // The mobility-robustness app needs the longest window of all:
    // handover ratios are meaningless at per-second sample sizes.
    mro_window_ho: Vec<u32>,
    mro_window_pp: Vec<u32>,
    mro_window_rlf: Vec<u32>,
    mro_window_load: Vec<Scalar>,
    mro_window_ticks: u32,
    // Outputs.
    events: Vec<EventRecord>,
    applied: Vec<AppliedChange>,
    trace: Vec<TickRow>,
    cum: (u64, u64, u64, u64),
}

impl Simulation {
    fn new(config: &ScenarioConfig, options: EngineOptions) -> Result<Self, EngineError> {
        config.validate()?;
        let cells = build_cells(&config.layout, &config.handover.initial)?;
        let cm = if options.bypass_cm {
            None
        } else {
            Some(ConflictMitigation::new(config.cm.to_cm_config())?)
        };

        let n_cells = cells.len();
        let n_users = config.total_users() as usize;
        let mut init_rng = stream_rng(config.seed, STREAM_INIT);

        // Placement: the macro population around the center, then each micro
        // site's population around that site, in site order.
        let mut positions = Vec::with_capacity(n_users);
        for _ in 0..config.users.macro_count {
            positions.push(uniform_in_disc(
                Vec2::new(0.0, 0.0),
                config.users.macro_radius_m,
                &mut init_rng,
            ));
        }
        for (site_pos, kind) in config.layout.site_positions() {
            if kind == SiteKind::Micro {
                for _ in 0..config.users.per_micro_count {
                    positions.push(uniform_in_disc(
                        site_pos,
                        config.users.micro_radius_m,
                        &mut init_rng,
                    ));
                }
            }
        }
        let bounds = config.mobility.bounds();
        for pos in &mut positions {
            *pos = bounds.clamp(*pos);
        }

        let profiles: Vec<UserProfile> =
            (0..n_users).map(|_| draw_profile(config, &mut init_rng)).collect();

        let shadowing = if config.radio.shadowing_sigma_db > 0.0 {
            let mut rng = stream_rng(config.seed, STREAM_SHADOWING);
            (0..n_users)
                .map(|_| {
                    (0..n_cells)
                        .map(|_| config.radio.shadowing_sigma_db * standard_normal(&mut rng))
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };

        // Fading starts in its stationary distribution, one stream per user.
        let mut fading_rngs: Vec<ChaCha8Rng> = Vec::new();
        let mut fading: Vec<Vec<Scalar>> = Vec::new();
        if config.radio.fading.sigma_db > 0.0 {
            for u in 0..n_users {
                let mut rng = user_fading_rng(config.seed, u as UserId);
                fading.push(
                    (0..n_cells)
                        .map(|_| config.radio.fading.sigma_db * standard_normal(&mut rng))
                        .collect(),
                );
                fading_rngs.push(rng);
            }
        }

        let mut mobility_rngs = Vec::with_capacity(n_users);
        let mut session_rngs = Vec::with_capacity(n_users);
        let mut users = Vec::with_capacity(n_users);
        let p_active = config.session.active_mean_s
            / (config.session.active_mean_s + config.session.idle_mean_s);
        for (idx, (&position, &profile)) in positions.iter().zip(&profiles).enumerate() {
            let user_id = idx as UserId;
            let mut mob_rng = user_mobility_rng(config.seed, user_id);
            let mut ses_rng = user_session_rng(config.seed, user_id);
            let (waypoint, speed) = draw_waypoint(&bounds, &config.mobility, &mut mob_rng);
            // Stationary start: users begin mid-phase with memoryless
            // residual durations, so traffic needs no ramp-up period.
            let (session, hold_s) = if ses_rng.gen::<Scalar>() < p_active {
                (SessionState::Active, ue::exponential_s(config.session.active_mean_s, &mut ses_rng))
            } else {
                (SessionState::Idle, ue::exponential_s(config.session.idle_mean_s, &mut ses_rng))
            };
            users.push(UserState {
                user_id,
                position,
                waypoint,
                speed_mps: speed,
                profile,
                serving: None,
                session,
                session_deadline: SimTime::from_secs_f64(hold_s),
                a3_timers_ms: Default::default(),
                rlf_timer_ms: 0,
                reattach_at: None,
                last_ho: None,
                interrupted_until: SimTime::from_ms(0),
            });
            mobility_rngs.push(mob_rng);
            session_rngs.push(ses_rng);
        }

        let mut sim = Simulation {
            config: config.clone(),
            cells,
            users,
            mobility_rngs,
            session_rngs,
            shadowing,
            fading,
            fading_rngs,
            cm,
            seq: MsgSeq::default(),
            rsrp: vec![vec![0.0; n_cells]; n_users],
            sinr: vec![0.0; n_users],
            per_prb_rate: vec![0.0; n_users],
            mlb_window_ho: vec![0; n_cells],
            mlb_window_pp: vec![0; n_cells],
            mlb_window_rlf: vec![0; n_cells],
            mlb_window_load: vec![0.0; n_cells],
            mlb_window_ticks: 0,
            mro_window_ho: vec![0; n_cells],
            mro_window_pp: vec![0; n_cells],
            mro_window_rlf: vec![0; n_cells],
            mro_window_load: vec![0.0; n_cells],
            mro_window_ticks: 0,
            events: Vec::new(),
            applied: Vec::new(),
            trace: Vec::new(),
            cum: (0, 0, 0, 0),
        };

        // Initial attachment: strongest received power, no admission gate.
        sim.measure_all();
        for u in 0..sim.users.len() {
            sim.users[u].serving = Some(sim.strongest_cell(u));
        }
        Ok(sim)
    }

    fn measure_user(&mut self, u: usize) {
        let pos = self.users[u].position;
        for (c, cell) in self.cells.iter().enumerate() {
            let mut rsrp = rsrp_dbm(cell, pos, &self.config.radio);
            if !self.shadowing.is_empty() {
                rsrp += self.shadowing[u][c];
            }
            if !self.fading.is_empty() {
                rsrp += self.fading[u][c];
            }
            self.rsrp[u][c] = rsrp;
        }
    }

    fn measure_all(&mut self) {
        for u in 0..self.users.len() {
            self.measure_user(u);
        }
    }

    /// One AR(1) step of every fading process. Draw order is fixed (users
    /// ascending, cells ascending) and unconditional, keeping consumption of
    /// the fading streams independent of control state.
    fn advance_fading(&mut self) {
        if self.fading.is_empty() {
            return;
        }
        let sigma = self.config.radio.fading.sigma_db;
        let dt_s = self.config.tick_ms as Scalar / 1000.0;
        let rho = (-dt_s / self.config.radio.fading.coherence_time_s).exp();
        let innovation = sigma * (1.0 - rho * rho).sqrt();
        for (row, rng) in self.fading.iter_mut().zip(&mut self.fading_rngs) {
            for f in row.iter_mut() {
                *f = rho * *f + innovation * standard_normal(rng);
            }
        }
    }

    fn strongest_cell(&self, u: usize) -> ran::CellId {
        let mut best = 0usize;
        for c in 1..self.rsrp[u].len() {
            if self.rsrp[u][c] > self.rsrp[u][best] {
                best = c;
            }
        }
        best as ran::CellId
    }

    /// Serving SINR and per-PRB rate for one user from current measurements.
    fn update_link(&mut self, u: usize) {
        if let Some(serving) = self.users[u].serving {
            let rsrps: Vec<(ran::CellId, Scalar)> = self.rsrp[u]
                .iter()
                .enumerate()
                .map(|(c, &r)| (c as ran::CellId, r))
                .collect();
            let sinr = ran::serving_sinr_db(serving, &rsrps, &self.cells, &self.config.radio);
            self.sinr[u] = sinr;
            self.per_prb_rate[u] =
                ran::per_prb_rate_bps(sinr, self.config.radio.shannon_cap_bps_hz);
        } else {
            self.sinr[u] = Scalar::NEG_INFINITY;
            self.per_prb_rate[u] = 0.0;
        }
    }

    fn record_event(&mut self, record: EventRecord, warmup: SimTime) {
        if record.time > warmup {
            match record.kind {
                EventKind::Handover => self.cum.0 += 1,
                EventKind::Pingpong => self.cum.1 += 1,
                EventKind::Rlf => self.cum.2 += 1,
                EventKind::CallBlock => self.cum.3 += 1,
            }
        }
        self.events.push(record);
    }

    fn control_step(&mut self, now: SimTime) -> Result<(), EngineError> {
        let report = |ho: &[u32], pp: &[u32], rlf: &[u32], load: &[Scalar], ticks: u32| {
            let ticks = ticks.max(1) as Scalar;
            KpiReport {
                time: now,
                per_cell: self
                    .cells
                    .iter()
                    .map(|cell| {
                        let c = cell.cell_id as usize;
                        (
                            cell.cell_id,
                            KpiCellStats {
                                load: load[c] / ticks,
                                handover_count: ho[c],
                                pingpong_count: pp[c],
                                rlf_count: rlf[c],
                            },
                        )
                    })
                    .collect(),
            }
        };
        let mlb_report = report(
            &self.mlb_window_ho,
            &self.mlb_window_pp,
            &self.mlb_window_rlf,
            &self.mlb_window_load,
            self.mlb_window_ticks,
        );
        // The robustness app works from its own longer accumulation window
        // and only acts on its own boundaries.
        let mro_report = if now.as_ms() % self.config.mro_eval_every_ms() == 0 {
            Some(report(
                &self.mro_window_ho,
                &self.mro_window_pp,
                &self.mro_window_rlf,
                &self.mro_window_load,
                self.mro_window_ticks,
            ))
        } else {
            None
        };

        let mut messages: Vec<E2ControlMessage> = Vec::new();
        let mlb = |seq: &mut MsgSeq| {
            mlb_decide(&mlb_report, &self.cells, &self.config.xapps.mlb, seq, now)
        };
        let mro = |seq: &mut MsgSeq| match &mro_report {
            Some(report) => mro_decide(report, &self.cells, &self.config.xapps.mro, seq, now),
            None => Vec::new(),
        };
        match self.config.xapps.order {
            XappOrder::MlbThenMro => {
                messages.extend(mlb(&mut self.seq));
                messages.extend(mro(&mut self.seq));
            }
            XappOrder::MroThenMlb => {
                messages.extend(mro(&mut self.seq));
                messages.extend(mlb(&mut self.seq));
            }
        }

        let processed: Vec<(E2ControlMessage, Verdict)> = match &mut self.cm {
            Some(cm) => messages
                .into_iter()
                .map(|msg| {
                    let verdict = cm.process(msg.clone(), now);
                    (msg, verdict)
                })
                .collect(),
            None => messages
                .into_iter()
                .map(|msg| {
                    let verdict = Verdict {
                        outcome: crate::cm::Outcome::Accepted,
                        conflicts: Vec::new(),
                        cooldowns: Vec::new(),
                    };
                    (msg, verdict)
                })
                .collect(),
        };

        let journal = xapp::apply_accepted(&mut self.cells, &processed)?;
        self.applied.extend(journal);
        if let Some(cm) = &mut self.cm {
            cm.purge_expired(now);
        }
        self.mlb_window_ho.iter_mut().for_each(|w| *w = 0);
        self.mlb_window_pp.iter_mut().for_each(|w| *w = 0);
        self.mlb_window_rlf.iter_mut().for_each(|w| *w = 0);
        self.mlb_window_load.iter_mut().for_each(|w| *w = 0.0);
        self.mlb_window_ticks = 0;
        if mro_report.is_some() {
            self.mro_window_ho.iter_mut().for_each(|w| *w = 0);
            self.mro_window_pp.iter_mut().for_each(|w| *w = 0);
            self.mro_window_rlf.iter_mut().for_each(|w| *w = 0);
            self.mro_window_load.iter_mut().for_each(|w| *w = 0.0);
            self.mro_window_ticks = 0;
        }
        Ok(())
    }

    fn tick(&mut self, now: SimTime) -> Result<(), EngineError> {
        let dt_ms = self.config.tick_ms;
        let dt_s = dt_ms as Scalar / 1000.0;
        let bounds = self.config.mobility.bounds();
        let warmup = SimTime::from_secs_f64(self.config.warmup_s);
        let pp_window = SimTime::from_secs_f64(self.config.handover.pingpong_window_s);

        // 1. Mobility.
        for u in 0..self.users.len() {
            step_mobility(
                &mut self.users[u],
                dt_s,
                &bounds,
                &self.config.mobility,
                &mut self.mobility_rngs[u],
            );
        }

        // 2. Radio picture and re-attachment of recovered users.
        self.advance_fading();
        self.measure_all();
        for u in 0..self.users.len() {
            let due = match self.users[u].reattach_at {
                Some(at) => now >= at,
                None => self.users[u].serving.is_none(),
            };
            if self.users[u].serving.is_none() && due {
                self.users[u].serving = Some(self.strongest_cell(u));
                self.users[u].reattach_at = None;
                self.users[u].reset_a3();
            }
            self.update_link(u);
        }

        // 3. Handover, failure, and session machines per user.
        for u in 0..self.users.len() {
            if let Some(serving) = self.users[u].serving {
                let cell = &self.cells[serving as usize];
                let serving_params = ServingParams {
                    rsrp_dbm: self.rsrp[u][serving as usize],
                    cio_db: cell.cio_db,
                    hh_db: cell.hh_db,
                    ttt_ms: cell.ttt_ms,
                };
                let neighbors: Vec<NeighborMeasurement> = self.rsrp[u]
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c as ran::CellId != serving)
                    .map(|(c, &rsrp)| NeighborMeasurement {
                        cell_id: c as ran::CellId,
                        rsrp_dbm: rsrp,
                    })
                    .collect();
                let previous_ho = self.users[u].last_ho;
                if let Some((from, to)) =
                    evaluate_a3(&mut self.users[u], &serving_params, &neighbors, dt_ms, now)
                {
                    let user_id = self.users[u].user_id;
                    self.users[u].interrupted_until =
                        now + SimTime::from_ms(self.config.handover.interruption_ms);
                    self.mlb_window_ho[from as usize] += 1;
                    self.mro_window_ho[from as usize] += 1;
                    self.record_event(
                        EventRecord {
                            kind: EventKind::Handover,
                            time: now,
                            user_id,
                            from_cell: Some(from),
                            to_cell: Some(to),
                        },
                        warmup,
                    );
                    if classify_pingpong(from, to, now, previous_ho, pp_window) {
                        self.mlb_window_pp[from as usize] += 1;
                        self.mro_window_pp[from as usize] += 1;
                        self.record_event(
                            EventRecord {
                                kind: EventKind::Pingpong,
                                time: now,
                                user_id,
                                from_cell: Some(from),
                                to_cell: Some(to),
                            },
                            warmup,
                        );
                    }
                    self.update_link(u);
                }
            }

            if let Some(record) = ue::check_rlf(
                &mut self.users[u],
                self.sinr[u],
                &self.config.handover.rlf,
                dt_ms,
                now,
            ) {
                let failed_cell = record.from_cell.expect("failures name their cell") as usize;
                self.mlb_window_rlf[failed_cell] += 1;
                self.mro_window_rlf[failed_cell] += 1;
                self.record_event(record, warmup);
                self.update_link(u);
            }

            let free = self.users[u]
                .serving
                .map(|serving| self.cells[serving as usize].free_prb());
            if let Some(record) = step_session(
                &mut self.users[u],
                free,
                &self.config.session,
                SimTime::from_ms(dt_ms),
                now,
                &mut self.session_rngs[u],
            ) {
                self.record_event(record, warmup);
            }
        }

        // 4. PRB scheduling and satisfaction.
        let mut satisfaction: Vec<Option<Scalar>> = vec![None; self.users.len()];
        let mut offered_load: Vec<Scalar> = vec![0.0; self.cells.len()];
        for c in 0..self.cells.len() {
            let demands: Vec<PrbDemand> = self
                .users
                .iter()
                .filter(|user| {
                    user.is_active() && user.serving == Some(c as ran::CellId)
                })
                .map(|user| PrbDemand {
                    user_id: user.user_id,
                    required_bitrate_bps: user.profile.required_bitrate_bps,
                    per_prb_rate_bps: self.per_prb_rate[user.user_id as usize],
                    overhead_prbs: if now < user.interrupted_until {
                        self.config.handover.overhead_prbs
                    } else {
                        0
                    },
                })
                .collect();
            let n_prb = self.cells[c].n_prb;
            offered_load[c] = demands
                .iter()
                .map(|d| ran::requested_prbs(d, n_prb) as Scalar)
                .sum::<Scalar>()
                / n_prb as Scalar;
            let allocation = schedule_prbs(&mut self.cells[c], &demands);
            for (&user_id, &prbs) in &allocation {
                let u = user_id as usize;
                // A handover in flight holds its grant (the resources are
                // spent on the transition) but delivers nothing.
                let achieved = if now < self.users[u].interrupted_until {
                    0.0
                } else {
                    prbs as Scalar * self.per_prb_rate[u]
                };
                let required = self.users[u].profile.required_bitrate_bps;
                satisfaction[u] = Some((achieved / required).min(1.0));
            }
        }
        // Active but detached users are getting nothing.
        for (u, user) in self.users.iter().enumerate() {
            if user.is_active() && !user.is_attached() {
                satisfaction[u] = Some(0.0);
            }
        }

        // The balancing app steers on offered traffic (what users ask for,
        // which exceeds 1.0 under congestion), while carried load — what the
        // grid actually assigned — is what the KPIs report.
        for (c, cell) in self.cells.iter().enumerate() {
            self.mlb_window_load[c] += offered_load[c];
            self.mro_window_load[c] += cell.load();
        }
        self.mlb_window_ticks += 1;
        self.mro_window_ticks += 1;

        self.trace.push(TickRow {
            time: now,
            cell_load: self.cells.iter().map(|c| c.load()).collect(),
            user_satisfaction: satisfaction,
            cum_handover: self.cum.0,
            cum_pingpong: self.cum.1,
            cum_rlf: self.cum.2,
            cum_call_block: self.cum.3,
        });

        // 5. Control-period boundary.
        if now.as_ms() % self.config.control_period_ms() == 0 {
            self.control_step(now)?;
        }
        Ok(())
    }

    fn finish(self) -> RunOutput {
        let warmup_ms = SimTime::from_secs_f64(self.config.warmup_s).as_ms();
        let measured: Vec<TickRow> =
            self.trace.iter().filter(|row| row.time.as_ms() > warmup_ms).cloned().collect();
        let summary = MetricsSummary {
            mean_bs_load_pct: mean_bs_load(&measured),
            mean_user_satisfaction_pct: mean_user_satisfaction(&measured),
            call_block_count: self.cum.3,
            rlf_count: self.cum.2,
            handover_count: self.cum.0,
            pingpong_count: self.cum.1,
        };
        let verdicts = match self.cm {
            Some(cm) => cm.store().verdict_log().to_vec(),
            None => Vec::new(),
        };
        RunOutput {
            n_cells: self.cells.len(),
            n_users: self.users.len(),
            config: self.config,
            summary,
            trace: self.trace,
            events: self.events,
            verdicts,
            applied: self.applied,
        }
    }
}

/// Runs the scenario, optionally with the conflict-mitigation component
/// bypassed (used to verify the observation-only mode is transparent).
pub fn run_with_options(
    config: &ScenarioConfig,
    options: EngineOptions,
) -> Result<RunOutput, EngineError> {
    let mut sim = Simulation::new(config, options)?;
    let n_ticks = (sim.config.duration_s * 1000.0).round() as u64 / sim.config.tick_ms;
    for i in 1..=n_ticks {
        let now = SimTime::from_ms(i * sim.config.tick_ms);
        sim.tick(now)?;
    }
    Ok(sim.finish())
}
