//! Conflict mitigation for xApp control decisions.
//!
//! Every control message an active xApp emits is routed through
//! [`ConflictMitigation::process`]. The detection half compares the incoming
//! message's control target and parameter against the decisions still in
//! effect: a clash on the same parameter is a direct conflict, a clash on
//! different parameters that share a registered [`ParameterGroup`] is an
//! indirect conflict. The resolution half either lets everything through
//! (mode off), or prioritizes one xApp: the prioritized xApp's message wins,
//! conflicting in-effect decisions are superseded, and the losing xApps are
//! put on a per-target cooldown during which all their messages toward that
//! target are rejected outright.
//!
//! Rejected messages never touch the network configuration; whoever applies
//! accepted values does so strictly from the returned [`Verdict`]s.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Scalar, SimTime};

// ---------------------------------------------------------------------------
// Identifiers and message types
// ---------------------------------------------------------------------------

/// Controlled parameter of a network entity.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParameterId {
    /// Cell Individual Offset, dB.
    Cio,
    /// Time-To-Trigger, ms.
    Ttt,
    /// Handover hysteresis, dB.
    Hh,
    /// Electrical antenna tilt, degrees.
    Tilt,
    /// Any other parameter, named by its label.
    Other(String),
}

impl std::fmt::Display for ParameterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParameterId::Cio => write!(f, "cio"),
            ParameterId::Ttt => write!(f, "ttt"),
            ParameterId::Hh => write!(f, "hh"),
            ParameterId::Tilt => write!(f, "tilt"),
            ParameterId::Other(label) => write!(f, "{label}"),
        }
    }
}

/// Kind of entity a control decision is addressed to.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Cell,
    Bearer,
    User,
}

impl std::fmt::Display for TargetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetKind::Cell => write!(f, "cell"),
            TargetKind::Bearer => write!(f, "bearer"),
            TargetKind::User => write!(f, "user"),
        }
    }
}

/// One network entity: a kind plus an opaque identifier within that kind.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct ControlTarget {
    pub kind: TargetKind,
    pub id: u32,
}

impl ControlTarget {
    pub fn cell(id: u32) -> Self {
        ControlTarget { kind: TargetKind::Cell, id }
    }
}

impl std::fmt::Display for ControlTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.kind, self.id)
    }
}

/// Identifier of an xApp instance.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct XAppId(pub String);

impl XAppId {
    pub fn new(id: impl Into<String>) -> Self {
        XAppId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for XAppId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for XAppId {
    fn from(s: &str) -> Self {
        XAppId(s.to_string())
    }
}

/// One control decision sent by an xApp toward a network entity.
///
/// `msg_id` is assigned by the message router in arrival order and is
/// strictly increasing; `value` is in the parameter's native unit (dB for
/// CIO/HH, ms for TTT).
#[derive(Clone, PartialEq, Debug)]
pub struct E2ControlMessage {
    pub msg_id: u64,
    pub xapp_id: XAppId,
    pub target: ControlTarget,
    pub parameter: ParameterId,
    pub value: Scalar,
    pub issued_at: SimTime,
}

// ---------------------------------------------------------------------------
// Parameter groups
// ---------------------------------------------------------------------------

/// Name of a parameter group.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub String);

impl std::fmt::Display for GroupId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GroupId {
    fn from(s: &str) -> Self {
        GroupId(s.to_string())
    }
}

/// Named set of parameters that influence the same area of network operation
/// for one kind of control target.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterGroup {
    pub group_id: GroupId,
    pub target_kind: TargetKind,
    pub members: BTreeSet<ParameterId>,
}

impl ParameterGroup {
    pub fn new(
        group_id: impl Into<String>,
        target_kind: TargetKind,
        members: impl IntoIterator<Item = ParameterId>,
    ) -> Self {
        ParameterGroup {
            group_id: GroupId(group_id.into()),
            target_kind,
            members: members.into_iter().collect(),
        }
    }
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum CmError {
    #[error("duplicate parameter group id `{0}`")]
    DuplicateGroup(GroupId),
    #[error("parameter group `{0}` must have at least two members")]
    GroupTooSmall(GroupId),
}

/// Immutable registry of parameter groups with O(1) expected membership
/// lookup per (target kind, parameter).
#[derive(Clone, Debug, Default)]
pub struct PgRegistry {
    groups: BTreeMap<GroupId, ParameterGroup>,
    membership: HashMap<(TargetKind, ParameterId), Vec<GroupId>>,
}

/// Builds a registry from a group list. Group ids must be unique and each
/// group needs at least two members to relate distinct parameters.
pub fn register_groups(groups: Vec<ParameterGroup>) -> Result<PgRegistry, CmError> {
    let mut by_id = BTreeMap::new();
    let mut membership: HashMap<(TargetKind, ParameterId), Vec<GroupId>> = HashMap::new();
    for group in groups {
        if group.members.len() < 2 {
            return Err(CmError::GroupTooSmall(group.group_id));
        }
        if by_id.contains_key(&group.group_id) {
            return Err(CmError::DuplicateGroup(group.group_id));
        }
        for member in &group.members {
            membership
                .entry((group.target_kind, member.clone()))
                .or_default()
                .push(group.group_id.clone());
        }
        by_id.insert(group.group_id.clone(), group);
    }
    for ids in membership.values_mut() {
        ids.sort();
    }
    Ok(PgRegistry { groups: by_id, membership })
}

impl PgRegistry {
    /// All groups a (target kind, parameter) pair belongs to, sorted by id.
    pub fn groups_for(&self, kind: TargetKind, parameter: &ParameterId) -> &[GroupId] {
        self.membership
            .get(&(kind, parameter.clone()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Smallest group id (if any) containing both parameters for this kind.
    pub fn shared_group(
        &self,
        kind: TargetKind,
        a: &ParameterId,
        b: &ParameterId,
    ) -> Option<&GroupId> {
        let ga = self.groups_for(kind, a);
        let gb = self.groups_for(kind, b);
        // Both slices are sorted; walk them like a merge.
        let (mut i, mut j) = (0, 0);
        while i < ga.len() && j < gb.len() {
            match ga[i].cmp(&gb[j]) {
                std::cmp::Ordering::Equal => return Some(&ga[i]),
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, id: &GroupId) -> Option<&ParameterGroup> {
        self.groups.get(id)
    }
}

// ---------------------------------------------------------------------------
// Decision store
// ---------------------------------------------------------------------------

/// An accepted decision that is still shaping the network configuration.
#[derive(Clone, Debug)]
pub struct InEffectDecision {
    pub message: E2ControlMessage,
    pub expires_at: SimTime,
    pub superseded: bool,
}

impl InEffectDecision {
    pub fn in_effect(&self, now: SimTime) -> bool {
        !self.superseded && self.expires_at > now
    }
}

/// Cooldown barring one xApp from influencing one target until a deadline.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CooldownEntry {
    pub xapp_id: XAppId,
    pub target: ControlTarget,
    pub until: SimTime,
}

/// Why a conflict pair was flagged.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConflictClass {
    /// Same target, same parameter, different xApps.
    Direct,
    /// Same target, different parameters sharing a registered group.
    Indirect,
    /// Cross-goal interference; never produced by pre-action detection.
    Implicit,
}

/// One detected conflict: the in-effect decision clashed with, the group that
/// relates the parameters (absent for direct clashes), and the class.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ConflictHit {
    pub msg_id: u64,
    pub group_id: Option<GroupId>,
    pub class: ConflictClass,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accepted,
    RejectedConflict,
    RejectedCooldown,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Accepted => write!(f, "accepted"),
            Outcome::RejectedConflict => write!(f, "rejected_conflict"),
            Outcome::RejectedCooldown => write!(f, "rejected_cooldown"),
        }
    }
}

/// The resolution of one processed message.
#[derive(Clone, PartialEq, Debug)]
pub struct Verdict {
    pub outcome: Outcome,
    pub conflicts: Vec<ConflictHit>,
    /// Cooldowns created while resolving this message (at most one per
    /// distinct losing xApp).
    pub cooldowns: Vec<CooldownEntry>,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

/// A message together with its verdict, as recorded in the log.
#[derive(Clone, Debug)]
pub struct ProcessedMessage {
    pub message: E2ControlMessage,
    pub verdict: Verdict,
}

/// In-effect accepted decisions, the cooldown ledger, and the append-only
/// chronology of processed messages.
///
/// Mutations must be externally serialized; the read-only queries here are
/// safe to interleave with each other.
#[derive(Clone, Debug, Default)]
pub struct DecisionStore {
    decisions: Vec<InEffectDecision>,
    by_target: HashMap<ControlTarget, Vec<usize>>,
    cooldowns: HashMap<(XAppId, ControlTarget), SimTime>,
    log: Vec<ProcessedMessage>,
}

impl DecisionStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decisions toward `target` that are in effect at `now`, in insertion
    /// (msg_id) order.
    pub fn in_effect_at<'a>(
        &'a self,
        target: ControlTarget,
        now: SimTime,
    ) -> impl Iterator<Item = &'a InEffectDecision> {
        self.by_target
            .get(&target)
            .into_iter()
            .flatten()
            .map(|&i| &self.decisions[i])
            .filter(move |d| d.in_effect(now))
    }

    pub fn decisions(&self) -> &[InEffectDecision] {
        &self.decisions
    }

    /// Deadline of an active cooldown for (xapp, target) at `now`, if any.
    pub fn active_cooldown(
        &self,
        xapp_id: &XAppId,
        target: ControlTarget,
        now: SimTime,
    ) -> Option<SimTime> {
        self.cooldowns
            .get(&(xapp_id.clone(), target))
            .copied()
            .filter(|&until| now < until)
    }

    fn insert_accepted(&mut self, message: E2ControlMessage, effect_ttl: SimTime) {
        // A fresh decision from the same xApp for the same (target, parameter)
        // replaces its predecessor silently.
        for &i in self.by_target.get(&message.target).into_iter().flatten() {
            let d = &mut self.decisions[i];
            if d.message.xapp_id == message.xapp_id && d.message.parameter == message.parameter {
                d.superseded = true;
            }
        }
        let expires_at = message.issued_at + effect_ttl;
        let idx = self.decisions.len();
        self.by_target.entry(message.target).or_default().push(idx);
        self.decisions.push(InEffectDecision { message, expires_at, superseded: false });
    }

    fn supersede(&mut self, msg_id: u64) {
        if let Some(d) = self.decisions.iter_mut().find(|d| d.message.msg_id == msg_id) {
            d.superseded = true;
        }
    }

    fn set_cooldown(&mut self, entry: &CooldownEntry) {
        let key = (entry.xapp_id.clone(), entry.target);
        let until = self.cooldowns.get(&key).copied().unwrap_or(SimTime::ZERO);
        self.cooldowns.insert(key, until.max(entry.until));
    }

    /// Drops decisions whose effect has lapsed and cooldowns that have run
    /// out. Returns how many entries were removed.
    pub fn purge_expired(&mut self, now: SimTime) -> usize {
        let before = self.decisions.len() + self.cooldowns.len();
        self.decisions.retain(|d| d.expires_at > now && !d.superseded);
        self.by_target.clear();
        for (i, d) in self.decisions.iter().enumerate() {
            self.by_target.entry(d.message.target).or_default().push(i);
        }
        self.cooldowns.retain(|_, &mut until| until > now);
        before - (self.decisions.len() + self.cooldowns.len())
    }

    /// Append-only chronology of every processed message and its verdict.
    pub fn verdict_log(&self) -> &[ProcessedMessage] {
        &self.log
    }
}

// ---------------------------------------------------------------------------
// Detection and resolution
// ---------------------------------------------------------------------------

/// Resolution mode of the conflict-mitigation pipeline.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum CmMode {
    /// Every message is accepted; the pipeline is observation-only.
    Off,
    /// The named xApp wins every conflict; everyone else is rejected and
    /// cooled down.
    Prioritize(XAppId),
}

/// Configuration of the conflict-mitigation pipeline.
#[derive(Clone, Debug)]
pub struct CmConfig {
    pub mode: CmMode,
    /// How long an accepted decision stays in effect.
    pub effect_ttl: SimTime,
    /// How long a losing xApp is barred from the contested target.
    pub cooldown_duration: SimTime,
    pub groups: Vec<ParameterGroup>,
}

/// Pure conflict detection: every in-effect, non-superseded decision toward
/// `msg.target` from a different xApp whose parameter either equals the
/// incoming one (direct) or shares a registered group with it for that
/// target kind (indirect). Sorted by conflicting msg_id.
pub fn detect_conflicts(
    msg: &E2ControlMessage,
    store: &DecisionStore,
    registry: &PgRegistry,
    now: SimTime,
) -> Vec<ConflictHit> {
    let mut hits: Vec<ConflictHit> = store
        .in_effect_at(msg.target, now)
        .filter(|d| d.message.xapp_id != msg.xapp_id)
        .filter_map(|d| {
            if d.message.parameter == msg.parameter {
                Some(ConflictHit {
                    msg_id: d.message.msg_id,
                    group_id: None,
                    class: ConflictClass::Direct,
                })
            } else {
                registry
                    .shared_group(msg.target.kind, &msg.parameter, &d.message.parameter)
                    .map(|g| ConflictHit {
                        msg_id: d.message.msg_id,
                        group_id: Some(g.clone()),
                        class: ConflictClass::Indirect,
                    })
            }
        })
        .collect();
    hits.sort_by_key(|h| h.msg_id);
    hits
}

/// Resolves one message given its detected conflicts, mutating the store and
/// appending to the verdict log. `conflicts` must be the output of
/// [`detect_conflicts`] for `msg` (or empty when detection was skipped for a
/// cooled-down sender).
pub fn resolve(
    msg: E2ControlMessage,
    conflicts: Vec<ConflictHit>,
    config: &CmConfig,
    store: &mut DecisionStore,
    now: SimTime,
) -> Verdict {
    let verdict = if store.active_cooldown(&msg.xapp_id, msg.target, now).is_some() {
        Verdict {
            outcome: Outcome::RejectedCooldown,
            conflicts: Vec::new(),
            cooldowns: Vec::new(),
        }
    } else if conflicts.is_empty() || config.mode == CmMode::Off {
        store.insert_accepted(msg.clone(), config.effect_ttl);
        Verdict { outcome: Outcome::Accepted, conflicts, cooldowns: Vec::new() }
    } else if config.mode == CmMode::Prioritize(msg.xapp_id.clone()) {
        // The prioritized xApp wins: conflicting decisions stop participating
        // in future detection and their owners are cooled down per target.
        let mut losers = BTreeSet::new();
        for hit in &conflicts {
            if let Some(d) = store.decisions.iter().find(|d| d.message.msg_id == hit.msg_id) {
                losers.insert(d.message.xapp_id.clone());
            }
            store.supersede(hit.msg_id);
        }
        let cooldowns: Vec<CooldownEntry> = losers
            .into_iter()
            .map(|xapp_id| CooldownEntry {
                xapp_id,
                target: msg.target,
                until: now + config.cooldown_duration,
            })
            .collect();
        for entry in &cooldowns {
            store.set_cooldown(entry);
        }
        store.insert_accepted(msg.clone(), config.effect_ttl);
        Verdict { outcome: Outcome::Accepted, conflicts, cooldowns }
    } else {
        let entry = CooldownEntry {
            xapp_id: msg.xapp_id.clone(),
            target: msg.target,
            until: now + config.cooldown_duration,
        };
        store.set_cooldown(&entry);
        Verdict {
            outcome: Outcome::RejectedConflict,
            conflicts,
            cooldowns: vec![entry],
        }
    };
    store.log.push(ProcessedMessage { message: msg, verdict: verdict.clone() });
    verdict
}

/// The assembled pipeline: registry, store, and configuration.
#[derive(Clone, Debug)]
pub struct ConflictMitigation {
    config: CmConfig,
    registry: PgRegistry,
    store: DecisionStore,
}

impl ConflictMitigation {
    pub fn new(config: CmConfig) -> Result<Self, CmError> {
        let registry = register_groups(config.groups.clone())?;
        Ok(ConflictMitigation { config, registry, store: DecisionStore::new() })
    }

    /// Runs one message through cooldown check, detection, and resolution.
    pub fn process(&mut self, msg: E2ControlMessage, now: SimTime) -> Verdict {
        // A cooled-down xApp cannot influence the target at all, so detection
        // is skipped for it.
        let conflicts = if self.store.active_cooldown(&msg.xapp_id, msg.target, now).is_some() {
            Vec::new()
        } else {
            detect_conflicts(&msg, &self.store, &self.registry, now)
        };
        resolve(msg, conflicts, &self.config, &mut self.store, now)
    }

    pub fn purge_expired(&mut self, now: SimTime) -> usize {
        self.store.purge_expired(now)
    }

    pub fn store(&self) -> &DecisionStore {
        &self.store
    }

    pub fn registry(&self) -> &PgRegistry {
        &self.registry
    }

    pub fn config(&self) -> &CmConfig {
        &self.config
    }
}

// ---------------------------------------------------------------------------
// Verdict log export
// ---------------------------------------------------------------------------

/// Renders the verdict log as JSON lines, one object per processed message.
pub fn verdicts_jsonl(log: &[ProcessedMessage]) -> String {
    let mut out = String::new();
    for entry in log {
        let msg = &entry.message;
        let verdict = &entry.verdict;
        let conflicts: Vec<serde_json::Value> = verdict
            .conflicts
            .iter()
            .map(|hit| {
                serde_json::json!({
                    "msg_id": hit.msg_id,
                    "group_id": hit.group_id.as_ref().map(|g| g.0.clone()),
                    "class": hit.class,
                })
            })
            .collect();
        let cooldown_until = verdict
            .cooldowns
            .iter()
            .map(|c| c.until)
            .max()
            .map(|t| t.as_secs_f64());
        let line = serde_json::json!({
            "msg_id": msg.msg_id,
            "xapp_id": msg.xapp_id,
            "target_kind": msg.target.kind,
            "target_id": msg.target.id,
            "parameter": msg.parameter,
            "value": msg.value,
            "issued_at": msg.issued_at.as_secs_f64(),
            "outcome": verdict.outcome,
            "conflicts": conflicts,
            "cooldown_until": cooldown_until,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}
