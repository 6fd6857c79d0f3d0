//! Domain model for preference-driven scheduling problems.
//!
//! An instance assigns agents to a pool of desks over a set of calendar days.
//! The Principal fixes the number of desks per day and a total order over
//! preference types; agents bring their own limits (maximum days, days out of
//! office) and typed preferences. Identifiers from the JSON documents are
//! interned into dense indices when an instance is parsed.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("reference error: {0}")]
    Reference(String),
    #[error("preference type `{0}` is not part of the preference order")]
    UnknownType(PrefType),
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),
}

/// The four preference types of the desk-booking domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefType {
    /// At least `n` days in the office over the horizon.
    Min,
    /// A desk on a given day because of a meeting.
    Meet,
    /// A desk on the same day as a colleague.
    Group,
    /// A desk on a preferred day.
    Pref,
}

impl PrefType {
    pub const ALL: [PrefType; 4] = [PrefType::Min, PrefType::Meet, PrefType::Group, PrefType::Pref];

    pub fn as_str(self) -> &'static str {
        match self {
            PrefType::Min => "min",
            PrefType::Meet => "meet",
            PrefType::Group => "group",
            PrefType::Pref => "pref",
        }
    }

    pub fn parse(s: &str) -> Option<PrefType> {
        PrefType::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for PrefType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stable identifier of a preference, as written in the instance file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefId(pub String);

impl PrefId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PrefId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PrefId {
    fn from(s: &str) -> Self {
        PrefId(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSlot {
    pub date: NaiveDate,
}

impl TimeSlot {
    pub fn weekday(&self) -> Weekday {
        self.date.weekday()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Agent {
    pub id: String,
    pub max_days: u32,
    /// Indices into the instance's time slots.
    pub days_out: BTreeSet<usize>,
}

/// Typed payload of a preference; agents and days are instance indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreferenceKind {
    Min { agent: usize, n: u32 },
    Meet { agent: usize, day: usize },
    Group { agent: usize, with: usize, day: usize },
    Pref { agent: usize, day: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Preference {
    pub id: PrefId,
    pub kind: PreferenceKind,
}

impl Preference {
    pub fn pref_type(&self) -> PrefType {
        match self.kind {
            PreferenceKind::Min { .. } => PrefType::Min,
            PreferenceKind::Meet { .. } => PrefType::Meet,
            PreferenceKind::Group { .. } => PrefType::Group,
            PreferenceKind::Pref { .. } => PrefType::Pref,
        }
    }

    /// The agent holding the preference.
    pub fn agent(&self) -> usize {
        match self.kind {
            PreferenceKind::Min { agent, .. }
            | PreferenceKind::Meet { agent, .. }
            | PreferenceKind::Group { agent, .. }
            | PreferenceKind::Pref { agent, .. } => agent,
        }
    }

    /// The day the preference is anchored to, if any.
    pub fn day(&self) -> Option<usize> {
        match self.kind {
            PreferenceKind::Min { .. } => None,
            PreferenceKind::Meet { day, .. } | PreferenceKind::Group { day, .. } | PreferenceKind::Pref { day, .. } => {
                Some(day)
            }
        }
    }
}

/// Total order over preference types, most important first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceOrder(Vec<PrefType>);

impl PreferenceOrder {
    pub fn new(types: Vec<PrefType>) -> Result<Self, ModelError> {
        let mut seen = HashSet::new();
        for t in &types {
            if !seen.insert(*t) {
                return Err(ModelError::Schema(format!("preference type `{t}` appears twice in the order")));
            }
        }
        Ok(PreferenceOrder(types))
    }

    /// The order used for the return-to-office setting: min, meet, group, pref.
    pub fn return_to_office() -> Self {
        PreferenceOrder(PrefType::ALL.to_vec())
    }

    pub fn types(&self) -> &[PrefType] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, t: PrefType) -> bool {
        self.0.contains(&t)
    }

    /// 1-based position of `t` in the order; smaller is more important.
    pub fn rank_of(&self, t: PrefType) -> Result<u32, ModelError> {
        self.0.iter().position(|x| *x == t).map(|i| i as u32 + 1).ok_or(ModelError::UnknownType(t))
    }

    pub fn rank(&self, p: &Preference) -> Result<u32, ModelError> {
        self.rank_of(p.pref_type())
    }

    /// True when `p` is at least as important as `u`.
    pub fn rank_ok(&self, p: &Preference, u: &Preference) -> Result<bool, ModelError> {
        Ok(self.rank(p)? <= self.rank(u)?)
    }
}

impl Default for PreferenceOrder {
    fn default() -> Self {
        PreferenceOrder::return_to_office()
    }
}

/// How the per-day desk count is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupancy {
    /// Every desk is occupied every day.
    #[default]
    Exact,
    /// At most `n_desks` agents per day.
    AtMost,
}

pub const DEFAULT_RESOURCE: &str = "desk";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PresInstance {
    pub time_slots: Vec<TimeSlot>,
    pub n_desks: u32,
    pub resource: String,
    pub occupancy: Occupancy,
    pub agents: Vec<Agent>,
    pub preferences: Vec<Preference>,
    pub order: PreferenceOrder,
    agent_index: HashMap<String, usize>,
    pref_index: HashMap<PrefId, usize>,
}

impl PresInstance {
    /// Assembles an instance from already-resolved parts, checking references.
    pub fn new(
        time_slots: Vec<TimeSlot>,
        n_desks: u32,
        agents: Vec<Agent>,
        preferences: Vec<Preference>,
        order: PreferenceOrder,
    ) -> Result<Self, ModelError> {
        let mut agent_index = HashMap::new();
        for (i, a) in agents.iter().enumerate() {
            if agent_index.insert(a.id.clone(), i).is_some() {
                return Err(ModelError::Schema(format!("duplicate agent id `{}`", a.id)));
            }
            if let Some(d) = a.days_out.iter().find(|d| **d >= time_slots.len()) {
                return Err(ModelError::Reference(format!("agent `{}` is out on unknown day index {d}", a.id)));
            }
        }
        for w in time_slots.windows(2) {
            if w[0].date >= w[1].date {
                return Err(ModelError::Schema("time slots must be strictly increasing".into()));
            }
        }
        let mut pref_index = HashMap::new();
        for (i, p) in preferences.iter().enumerate() {
            if pref_index.insert(p.id.clone(), i).is_some() {
                return Err(ModelError::Schema(format!("duplicate preference id `{}`", p.id)));
            }
            let agents_ok = match p.kind {
                PreferenceKind::Group { agent, with, .. } => agent < agents.len() && with < agents.len(),
                _ => p.agent() < agents.len(),
            };
            if !agents_ok {
                return Err(ModelError::Reference(format!("preference `{}` names an unknown agent", p.id)));
            }
            if p.day().is_some_and(|d| d >= time_slots.len()) {
                return Err(ModelError::Reference(format!("preference `{}` names an unknown day", p.id)));
            }
        }
        Ok(PresInstance {
            time_slots,
            n_desks,
            resource: DEFAULT_RESOURCE.to_string(),
            occupancy: Occupancy::Exact,
            agents,
            preferences,
            order,
            agent_index,
            pref_index,
        })
    }

    pub fn with_occupancy(mut self, occupancy: Occupancy) -> Self {
        self.occupancy = occupancy;
        self
    }

    pub fn n_days(&self) -> usize {
        self.time_slots.len()
    }

    pub fn agent_by_id(&self, id: &str) -> Option<usize> {
        self.agent_index.get(id).copied()
    }

    pub fn pref_index(&self, id: &PrefId) -> Option<usize> {
        self.pref_index.get(id).copied()
    }

    pub fn preference(&self, id: &PrefId) -> Option<&Preference> {
        self.pref_index(id).map(|i| &self.preferences[i])
    }

    pub fn day_by_date(&self, date: NaiveDate) -> Option<usize> {
        self.time_slots.binary_search_by(|t| t.date.cmp(&date)).ok()
    }

    /// Days on which the agent is not out of office.
    pub fn available_days(&self, agent: usize) -> usize {
        self.n_days() - self.agents[agent].days_out.len()
    }

    pub fn is_day_out(&self, agent: usize, day: usize) -> bool {
        self.agents[agent].days_out.contains(&day)
    }

    pub fn date_label(&self, day: usize) -> String {
        self.time_slots[day].date.format("%Y-%m-%d").to_string()
    }

    pub fn rank(&self, p: &Preference) -> Result<u32, ModelError> {
        self.order.rank(p)
    }

    /// Parses an instance document; see [`InstanceDoc`] for the schema.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))?;
        doc.resolve()
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc::from_instance(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance documents always serialize")
    }
}

/// A single booking: `agent` holds a desk on `day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment {
    pub agent: usize,
    pub day: usize,
}

impl Assignment {
    pub fn new(agent: usize, day: usize) -> Self {
        Assignment { agent, day }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schedule {
    assignments: BTreeSet<Assignment>,
}

impl Schedule {
    pub fn new() -> Self {
        Schedule::default()
    }

    pub fn from_assignments(items: impl IntoIterator<Item = Assignment>) -> Self {
        Schedule { assignments: items.into_iter().collect() }
    }

    /// Returns false if the pair was already present.
    pub fn insert(&mut self, a: Assignment) -> bool {
        self.assignments.insert(a)
    }

    pub fn contains(&self, agent: usize, day: usize) -> bool {
        self.assignments.contains(&Assignment { agent, day })
    }

    /// Assignments ordered by agent, then day.
    pub fn iter(&self) -> impl Iterator<Item = &Assignment> {
        self.assignments.iter()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn days_of(&self, agent: usize) -> usize {
        self.assignments.range(Assignment::new(agent, 0)..Assignment::new(agent + 1, 0)).count()
    }

    pub fn on_day(&self, day: usize) -> impl Iterator<Item = &Assignment> {
        self.assignments.iter().filter(move |a| a.day == day)
    }

    /// Checks occupancy, per-agent maxima and out-of-office days.
    pub fn check(&self, instance: &PresInstance) -> Result<(), ModelError> {
        let mut per_day = vec![0u32; instance.n_days()];
        let mut per_agent = vec![0u32; instance.agents.len()];
        for a in &self.assignments {
            if a.agent >= instance.agents.len() || a.day >= instance.n_days() {
                return Err(ModelError::Reference(format!("assignment {a:?} is out of range")));
            }
            if instance.is_day_out(a.agent, a.day) {
                return Err(ModelError::InfeasibleSchedule(format!(
                    "{} is assigned on {} but is out of office",
                    instance.agents[a.agent].id,
                    instance.date_label(a.day)
                )));
            }
            per_day[a.day] += 1;
            per_agent[a.agent] += 1;
        }
        for (day, &count) in per_day.iter().enumerate() {
            let ok = match instance.occupancy {
                Occupancy::Exact => count == instance.n_desks,
                Occupancy::AtMost => count <= instance.n_desks,
            };
            if !ok {
                return Err(ModelError::InfeasibleSchedule(format!(
                    "{} has {count} assignments for {} desks",
                    instance.date_label(day),
                    instance.n_desks
                )));
            }
        }
        for (agent, &count) in per_agent.iter().enumerate() {
            if count > instance.agents[agent].max_days {
                return Err(ModelError::InfeasibleSchedule(format!(
                    "{} is assigned {count} days, above the maximum of {}",
                    instance.agents[agent].id, instance.agents[agent].max_days
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(instance: &PresInstance, text: &str) -> Result<Self, ModelError> {
        let doc: ScheduleDoc = serde_json::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))?;
        let mut schedule = Schedule::new();
        for entry in doc.assignments {
            let agent = instance
                .agent_by_id(&entry.agent)
                .ok_or_else(|| ModelError::Reference(format!("unknown agent `{}`", entry.agent)))?;
            let day = instance
                .day_by_date(entry.day)
                .ok_or_else(|| ModelError::Reference(format!("unknown day {}", entry.day)))?;
            if !schedule.insert(Assignment::new(agent, day)) {
                return Err(ModelError::Schema(format!("duplicate assignment of `{}` on {}", entry.agent, entry.day)));
            }
        }
        Ok(schedule)
    }

    pub fn to_doc(&self, instance: &PresInstance) -> ScheduleDoc {
        let mut assignments: Vec<_> = self.assignments.iter().collect();
        assignments.sort_by_key(|a| (a.day, a.agent));
        ScheduleDoc {
            assignments: assignments
                .into_iter()
                .map(|a| AssignmentDoc {
                    agent: instance.agents[a.agent].id.clone(),
                    day: instance.time_slots[a.day].date,
                })
                .collect(),
        }
    }

    pub fn to_json(&self, instance: &PresInstance) -> String {
        serde_json::to_string_pretty(&self.to_doc(instance)).expect("schedule documents always serialize")
    }
}

/// Whether `p` holds under `schedule`.
pub fn is_satisfied(p: &Preference, schedule: &Schedule) -> bool {
    match p.kind {
        PreferenceKind::Min { agent, n } => schedule.days_of(agent) >= n as usize,
        PreferenceKind::Meet { agent, day } | PreferenceKind::Pref { agent, day } => schedule.contains(agent, day),
        PreferenceKind::Group { agent, with, day } => schedule.contains(agent, day) && schedule.contains(with, day),
    }
}

/// Partition of the preferences into satisfied and unsatisfied ones.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatReport {
    pub sat: BTreeSet<PrefId>,
    pub unsat: BTreeSet<PrefId>,
}

impl SatReport {
    pub fn is_sat(&self, id: &PrefId) -> bool {
        self.sat.contains(id)
    }

    pub fn is_unsat(&self, id: &PrefId) -> bool {
        self.unsat.contains(id)
    }
}

pub fn partition_preferences(instance: &PresInstance, schedule: &Schedule) -> Result<SatReport, ModelError> {
    schedule.check(instance)?;
    let mut report = SatReport::default();
    for p in &instance.preferences {
        if is_satisfied(p, schedule) {
            report.sat.insert(p.id.clone());
        } else {
            report.unsat.insert(p.id.clone());
        }
    }
    Ok(report)
}

/// Why a preference (or the instance itself) cannot be admitted to solving.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    MinExceedsHorizon,
    MinExceedsAvailableDays,
    MinExceedsMaxDays,
    MeetingOnDayOut,
    PreferredDayOut,
    GroupOnDayOut,
    GroupWithSelf,
    TypeNotInOrder,
    MaxDaysExceedsHorizon,
    DesksExceedAgents,
}

impl ViolationKind {
    pub fn describe(&self) -> &'static str {
        match self {
            ViolationKind::MinExceedsHorizon => "min exceeds horizon",
            ViolationKind::MinExceedsAvailableDays => "min exceeds available days",
            ViolationKind::MinExceedsMaxDays => "min exceeds max days",
            ViolationKind::MeetingOnDayOut => "meeting on out-of-office day",
            ViolationKind::PreferredDayOut => "preferred day on out-of-office day",
            ViolationKind::GroupOnDayOut => "working group on out-of-office day",
            ViolationKind::GroupWithSelf => "working group with oneself",
            ViolationKind::TypeNotInOrder => "preference type not in the order",
            ViolationKind::MaxDaysExceedsHorizon => "max days exceeds horizon",
            ViolationKind::DesksExceedAgents => "more desks than agents",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Preference id, agent id, or `"instance"`.
    pub subject: String,
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: &ViolationKind) -> bool {
        self.violations.iter().any(|v| &v.kind == kind)
    }

    fn push(&mut self, subject: &str, kind: ViolationKind) {
        let message = format!("{subject}: {}", kind.describe());
        self.violations.push(Violation { subject: subject.to_string(), kind, message });
    }
}

/// Lists every preference that contradicts its agent's own limits or the
/// Principal's, plus instance-level inconsistencies.
pub fn validate(instance: &PresInstance) -> ValidationReport {
    let mut report = ValidationReport::default();
    let horizon = instance.n_days() as u32;
    if instance.n_desks as usize > instance.agents.len() {
        report.push("instance", ViolationKind::DesksExceedAgents);
    }
    for a in &instance.agents {
        if a.max_days > horizon {
            report.push(&a.id, ViolationKind::MaxDaysExceedsHorizon);
        }
    }
    for p in &instance.preferences {
        let id = p.id.as_str();
        if !instance.order.contains(p.pref_type()) {
            report.push(id, ViolationKind::TypeNotInOrder);
        }
        match p.kind {
            PreferenceKind::Min { agent, n } => {
                if n > horizon {
                    report.push(id, ViolationKind::MinExceedsHorizon);
                } else if n as usize > instance.available_days(agent) {
                    report.push(id, ViolationKind::MinExceedsAvailableDays);
                }
                if n > instance.agents[agent].max_days {
                    report.push(id, ViolationKind::MinExceedsMaxDays);
                }
            }
            PreferenceKind::Meet { agent, day } => {
                if instance.is_day_out(agent, day) {
                    report.push(id, ViolationKind::MeetingOnDayOut);
                }
            }
            PreferenceKind::Pref { agent, day } => {
                if instance.is_day_out(agent, day) {
                    report.push(id, ViolationKind::PreferredDayOut);
                }
            }
            PreferenceKind::Group { agent, with, day } => {
                if agent == with {
                    report.push(id, ViolationKind::GroupWithSelf);
                }
                if instance.is_day_out(agent, day) {
                    report.push(id, ViolationKind::GroupOnDayOut);
                }
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Wire formats

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub time_slots: Vec<NaiveDate>,
    pub n_desks: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupancy: Option<Occupancy>,
    pub order: Vec<String>,
    pub agents: Vec<AgentDoc>,
    pub preferences: Vec<PreferenceDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub id: String,
    pub max_days: u32,
    #[serde(default)]
    pub days_out: Vec<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceDoc {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub agent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDoc {
    pub assignments: Vec<AssignmentDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentDoc {
    pub agent: String,
    pub day: NaiveDate,
}

impl InstanceDoc {
    pub fn resolve(self) -> Result<PresInstance, ModelError> {
        let mut dates = self.time_slots.clone();
        dates.sort();
        if dates.windows(2).any(|w| w[0] == w[1]) {
            return Err(ModelError::Schema("duplicate time slot".into()));
        }
        let time_slots: Vec<TimeSlot> = dates.iter().map(|&date| TimeSlot { date }).collect();
        let day_of = |date: NaiveDate| {
            dates.binary_search(&date).map_err(|_| ModelError::Reference(format!("unknown day {date}")))
        };

        let mut order = Vec::with_capacity(self.order.len());
        for tag in &self.order {
            order.push(
                PrefType::parse(tag).ok_or_else(|| ModelError::Schema(format!("unknown preference type `{tag}`")))?,
            );
        }
        let order = PreferenceOrder::new(order)?;

        let mut agent_index = HashMap::new();
        let mut agents = Vec::with_capacity(self.agents.len());
        for (i, a) in self.agents.into_iter().enumerate() {
            let mut days_out = BTreeSet::new();
            for d in a.days_out {
                days_out.insert(day_of(d)?);
            }
            agent_index.insert(a.id.clone(), i);
            agents.push(Agent { id: a.id, max_days: a.max_days, days_out });
        }
        let agent_of = |id: &str| {
            agent_index.get(id).copied().ok_or_else(|| ModelError::Reference(format!("unknown agent `{id}`")))
        };

        let mut preferences = Vec::with_capacity(self.preferences.len());
        for p in self.preferences {
            let t = PrefType::parse(&p.kind)
                .ok_or_else(|| ModelError::Schema(format!("preference `{}` has unknown type `{}`", p.id, p.kind)))?;
            let field_err = |what: &str| ModelError::Schema(format!("preference `{}` of type `{t}` {what}", p.id));
            let agent = agent_of(&p.agent)?;
            let kind = match t {
                PrefType::Min => {
                    if p.day.is_some() || p.with.is_some() {
                        return Err(field_err("only takes `n`"));
                    }
                    PreferenceKind::Min { agent, n: p.n.ok_or_else(|| field_err("requires `n`"))? }
                }
                PrefType::Meet | PrefType::Pref => {
                    if p.n.is_some() || p.with.is_some() {
                        return Err(field_err("only takes `day`"));
                    }
                    let day = day_of(p.day.ok_or_else(|| field_err("requires `day`"))?)?;
                    if t == PrefType::Meet {
                        PreferenceKind::Meet { agent, day }
                    } else {
                        PreferenceKind::Pref { agent, day }
                    }
                }
                PrefType::Group => {
                    if p.n.is_some() {
                        return Err(field_err("does not take `n`"));
                    }
                    let with = agent_of(p.with.as_deref().ok_or_else(|| field_err("requires `with`"))?)?;
                    let day = day_of(p.day.ok_or_else(|| field_err("requires `day`"))?)?;
                    PreferenceKind::Group { agent, with, day }
                }
            };
            preferences.push(Preference { id: PrefId(p.id), kind });
        }

        let mut instance = PresInstance::new(time_slots, self.n_desks, agents, preferences, order)?;
        if let Some(r) = self.resource {
            instance.resource = r;
        }
        if let Some(o) = self.occupancy {
            instance.occupancy = o;
        }
        Ok(instance)
    }

    pub fn from_instance(instance: &PresInstance) -> Self {
        let date = |d: usize| instance.time_slots[d].date;
        let agent_id = |a: usize| instance.agents[a].id.clone();
        InstanceDoc {
            time_slots: instance.time_slots.iter().map(|t| t.date).collect(),
            n_desks: instance.n_desks,
            resource: (instance.resource != DEFAULT_RESOURCE).then(|| instance.resource.clone()),
            occupancy: (instance.occupancy != Occupancy::Exact).then_some(instance.occupancy),
            order: instance.order.types().iter().map(|t| t.as_str().to_string()).collect(),
            agents: instance
                .agents
                .iter()
                .map(|a| AgentDoc {
                    id: a.id.clone(),
                    max_days: a.max_days,
                    days_out: a.days_out.iter().map(|&d| date(d)).collect(),
                })
                .collect(),
            preferences: instance
                .preferences
                .iter()
                .map(|p| {
                    let mut doc = PreferenceDoc {
                        id: p.id.0.clone(),
                        kind: p.pref_type().as_str().to_string(),
                        agent: agent_id(p.agent()),
                        n: None,
                        day: p.day().map(date),
                        with: None,
                    };
                    match p.kind {
                        PreferenceKind::Min { n, .. } => doc.n = Some(n),
                        PreferenceKind::Group { with, .. } => doc.with = Some(agent_id(with)),
                        _ => {}
                    }
                    doc
                })
                .collect(),
        }
    }
}
