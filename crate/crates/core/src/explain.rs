//! Explanations for unsatisfied preferences.
//!
//! An explanation assigns to every assignment involved in an unsatisfied
//! target preference one satisfied preference that the assignment is
//! affected by and that is at least as important as the target. The optimal
//! explanation minimises the summed ranks of the preferences used. Which
//! assignments are involved and which preferences affect an assignment is
//! domain knowledge; both are looked up per preference type in
//! [`DomainRules`].

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ilp::{self, Constraint, IlpError, IlpProblem, IlpSolution, Relation, SolveStatus, StopReason, VarId};
use crate::model::{
    partition_preferences, Assignment, ModelError, PrefId, PrefType, Preference, PreferenceKind, PresInstance,
    SatReport, Schedule,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExplainError {
    #[error("unknown preference `{0}`")]
    UnknownPreference(PrefId),
    #[error("preference `{0}` is satisfied by the schedule")]
    TargetSatisfied(PrefId),
    #[error("no explanation exists for `{target}`: {unexplained} involved assignment(s) have no admissible reason")]
    NoExplanation { target: PrefId, unexplained: usize },
    #[error("explanation search ran out of time")]
    Timeout,
    #[error("explanations target different preferences (`{0}` and `{1}`)")]
    TargetMismatch(PrefId, PrefId),
    #[error("malformed explanation: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ilp(#[from] IlpError),
}

/// Assignments that have to be justified for an unsatisfied target.
pub type InvolvedFn = fn(&PresInstance, &Schedule, &Preference) -> Vec<Assignment>;
/// Whether a satisfied preference bears on an assignment.
pub type AffectedFn = fn(&PresInstance, &Schedule, &Preference, Assignment) -> bool;

/// Per-type domain functions. `involved` is keyed by the target's type,
/// `affected` by the satisfied preference's type.
#[derive(Clone, Copy)]
pub struct DomainRules {
    involved: [InvolvedFn; 4],
    affected: [AffectedFn; 4],
}

fn slot(t: PrefType) -> usize {
    match t {
        PrefType::Min => 0,
        PrefType::Meet => 1,
        PrefType::Group => 2,
        PrefType::Pref => 3,
    }
}

impl DomainRules {
    /// The desk-booking rules.
    pub fn return_to_office() -> Self {
        DomainRules {
            involved: [involved_other_agents, involved_same_day, involved_same_day, involved_same_day],
            affected: [affected_min, affected_own_day, affected_group, affected_own_day],
        }
    }

    pub fn with_involved(mut self, t: PrefType, f: InvolvedFn) -> Self {
        self.involved[slot(t)] = f;
        self
    }

    pub fn with_affected(mut self, t: PrefType, f: AffectedFn) -> Self {
        self.affected[slot(t)] = f;
        self
    }

    pub fn involved(&self, instance: &PresInstance, schedule: &Schedule, target: &Preference) -> Vec<Assignment> {
        let mut out = (self.involved[slot(target.pref_type())])(instance, schedule, target);
        out.sort();
        out.dedup();
        out
    }

    pub fn affected(&self, instance: &PresInstance, schedule: &Schedule, p: &Preference, a: Assignment) -> bool {
        (self.affected[slot(p.pref_type())])(instance, schedule, p, a)
    }
}

impl Default for DomainRules {
    fn default() -> Self {
        DomainRules::return_to_office()
    }
}

impl std::fmt::Debug for DomainRules {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("DomainRules")
    }
}

fn involved_other_agents(_: &PresInstance, schedule: &Schedule, target: &Preference) -> Vec<Assignment> {
    schedule.iter().filter(|a| a.agent != target.agent()).copied().collect()
}

fn involved_same_day(_: &PresInstance, schedule: &Schedule, target: &Preference) -> Vec<Assignment> {
    match target.day() {
        Some(day) => schedule.on_day(day).copied().collect(),
        None => Vec::new(),
    }
}

fn affected_min(instance: &PresInstance, _: &Schedule, p: &Preference, a: Assignment) -> bool {
    match p.kind {
        PreferenceKind::Min { agent, n } => agent == a.agent && instance.available_days(agent) == n as usize,
        _ => false,
    }
}

fn affected_own_day(_: &PresInstance, _: &Schedule, p: &Preference, a: Assignment) -> bool {
    p.agent() == a.agent && p.day() == Some(a.day)
}

fn affected_group(_: &PresInstance, schedule: &Schedule, p: &Preference, a: Assignment) -> bool {
    match p.kind {
        PreferenceKind::Group { agent, with, day } => agent == a.agent && day == a.day && schedule.contains(with, day),
        _ => false,
    }
}

/// A target preference to explain against a fixed schedule.
#[derive(Debug, Clone)]
pub struct ExpresProblem<'a> {
    pub instance: &'a PresInstance,
    pub schedule: &'a Schedule,
    pub sat_report: SatReport,
    pub target: PrefId,
    rules: DomainRules,
}

impl<'a> ExpresProblem<'a> {
    /// The schedule is taken to be optimal; only its feasibility is checked.
    pub fn new(instance: &'a PresInstance, schedule: &'a Schedule, target: &PrefId) -> Result<Self, ExplainError> {
        Self::with_rules(instance, schedule, target, DomainRules::return_to_office())
    }

    pub fn with_rules(
        instance: &'a PresInstance,
        schedule: &'a Schedule,
        target: &PrefId,
        rules: DomainRules,
    ) -> Result<Self, ExplainError> {
        if instance.preference(target).is_none() {
            return Err(ExplainError::UnknownPreference(target.clone()));
        }
        let sat_report = partition_preferences(instance, schedule)?;
        if sat_report.is_sat(target) {
            return Err(ExplainError::TargetSatisfied(target.clone()));
        }
        Ok(ExpresProblem { instance, schedule, sat_report, target: target.clone(), rules })
    }

    /// Shares the satisfaction report across targets of the same schedule.
    pub fn for_target(&self, target: &PrefId) -> Result<Self, ExplainError> {
        if self.instance.preference(target).is_none() {
            return Err(ExplainError::UnknownPreference(target.clone()));
        }
        if self.sat_report.is_sat(target) {
            return Err(ExplainError::TargetSatisfied(target.clone()));
        }
        Ok(ExpresProblem { target: target.clone(), sat_report: self.sat_report.clone(), ..*self })
    }

    pub fn target_preference(&self) -> &'a Preference {
        self.instance.preference(&self.target).expect("target checked on construction")
    }

    pub fn rules(&self) -> &DomainRules {
        &self.rules
    }

    /// Satisfied preferences in instance order.
    pub fn satisfied(&self) -> impl Iterator<Item = &'a Preference> + '_ {
        self.instance.preferences.iter().filter(|p| self.sat_report.is_sat(&p.id))
    }
}

pub fn involved(problem: &ExpresProblem) -> Vec<Assignment> {
    problem.rules.involved(problem.instance, problem.schedule, problem.target_preference())
}

/// False for preferences that are not satisfied.
pub fn affected(problem: &ExpresProblem, p: &PrefId, a: Assignment) -> bool {
    let Some(pref) = problem.instance.preference(p) else {
        return false;
    };
    problem.sat_report.is_sat(p) && problem.rules.affected(problem.instance, problem.schedule, pref, a)
}

/// Satisfied preference `satisfied_pref` is why `assignment` stands instead
/// of `unsatisfied_pref` being met.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reason {
    pub satisfied_pref: PrefId,
    pub assignment: Assignment,
    pub unsatisfied_pref: PrefId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Explanation {
    pub target: PrefId,
    /// Sum of the ranks of the satisfied preferences used.
    pub objective: u64,
    /// Ordered by assignment.
    pub reasons: Vec<Reason>,
}

impl Explanation {
    fn from_reasons(instance: &PresInstance, target: PrefId, mut reasons: Vec<Reason>) -> Result<Self, ExplainError> {
        reasons.sort_by(|a, b| a.assignment.cmp(&b.assignment).then_with(|| a.satisfied_pref.cmp(&b.satisfied_pref)));
        let mut objective = 0u64;
        for r in &reasons {
            let p = instance
                .preference(&r.satisfied_pref)
                .ok_or_else(|| ExplainError::UnknownPreference(r.satisfied_pref.clone()))?;
            objective += instance.rank(p)? as u64;
        }
        Ok(Explanation { target, objective, reasons })
    }

    pub fn len(&self) -> usize {
        self.reasons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reasons.is_empty()
    }

    pub fn to_doc(&self, instance: &PresInstance) -> ExplanationDoc {
        ExplanationDoc {
            target: self.target.to_string(),
            objective: self.objective,
            reasons: self
                .reasons
                .iter()
                .map(|r| ReasonDoc {
                    sat_pref: r.satisfied_pref.to_string(),
                    agent: instance.agents[r.assignment.agent].id.clone(),
                    day: instance.time_slots[r.assignment.day].date,
                })
                .collect(),
        }
    }

    pub fn to_json(&self, instance: &PresInstance) -> String {
        serde_json::to_string_pretty(&self.to_doc(instance)).expect("explanation serializes")
    }

    pub fn from_doc(instance: &PresInstance, doc: ExplanationDoc) -> Result<Self, ExplainError> {
        let target = PrefId(doc.target);
        if instance.preference(&target).is_none() {
            return Err(ExplainError::UnknownPreference(target));
        }
        let mut reasons = Vec::with_capacity(doc.reasons.len());
        for r in doc.reasons {
            let agent = instance
                .agent_by_id(&r.agent)
                .ok_or_else(|| ExplainError::Malformed(format!("unknown agent `{}`", r.agent)))?;
            let day =
                instance.day_by_date(r.day).ok_or_else(|| ExplainError::Malformed(format!("unknown day {}", r.day)))?;
            reasons.push(Reason {
                satisfied_pref: PrefId(r.sat_pref),
                assignment: Assignment::new(agent, day),
                unsatisfied_pref: target.clone(),
            });
        }
        let e = Explanation::from_reasons(instance, target, reasons)?;
        if e.objective != doc.objective {
            return Err(ExplainError::Malformed(format!(
                "objective {} does not match the reasons (expected {})",
                doc.objective, e.objective
            )));
        }
        Ok(e)
    }

    pub fn from_json(instance: &PresInstance, text: &str) -> Result<Self, ExplainError> {
        let doc: ExplanationDoc = serde_json::from_str(text).map_err(|e| ExplainError::Malformed(e.to_string()))?;
        Explanation::from_doc(instance, doc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplanationDoc {
    pub target: String,
    pub objective: u64,
    pub reasons: Vec<ReasonDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReasonDoc {
    pub sat_pref: String,
    pub agent: String,
    pub day: NaiveDate,
}

/// Reads either a single explanation or an array of them.
pub fn explanations_from_json(instance: &PresInstance, text: &str) -> Result<Vec<Explanation>, ExplainError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(ExplanationDoc),
        Many(Vec<ExplanationDoc>),
    }
    let docs = match serde_json::from_str(text).map_err(|e| ExplainError::Malformed(e.to_string()))? {
        OneOrMany::One(d) => vec![d],
        OneOrMany::Many(ds) => ds,
    };
    docs.into_iter().map(|d| Explanation::from_doc(instance, d)).collect()
}

pub fn explanations_to_json(instance: &PresInstance, explanations: &[Explanation]) -> String {
    let docs: Vec<ExplanationDoc> = explanations.iter().map(|e| e.to_doc(instance)).collect();
    serde_json::to_string_pretty(&docs).expect("explanations serialize")
}

/// The explanation MILP together with the meaning of its variables.
#[derive(Debug, Clone)]
pub struct ExplanationMilp {
    pub problem: IlpProblem,
    pub involved: Vec<Assignment>,
    /// `pairs[v.0]` is the (satisfied preference, assignment) behind variable `v`.
    pub pairs: Vec<(PrefId, Assignment)>,
    /// Involved assignments without any admissible reason.
    pub unexplained: Vec<Assignment>,
    target: PrefId,
}

impl ExplanationMilp {
    pub fn var(&self, p: &PrefId, a: Assignment) -> Option<VarId> {
        self.pairs.iter().position(|(q, b)| q == p && *b == a).map(VarId)
    }

    fn decode(&self, instance: &PresInstance, solution: &IlpSolution) -> Result<Explanation, ExplainError> {
        let reasons = solution
            .support()
            .into_iter()
            .map(|v| {
                let (p, a) = &self.pairs[v.0];
                Reason { satisfied_pref: p.clone(), assignment: *a, unsatisfied_pref: self.target.clone() }
            })
            .collect();
        Explanation::from_reasons(instance, self.target.clone(), reasons)
    }

    fn no_explanation(&self) -> ExplainError {
        ExplainError::NoExplanation { target: self.target.clone(), unexplained: self.unexplained.len() }
    }
}

/// One binary per admissible (satisfied preference, involved assignment)
/// pair, objective Σ rank·x, and one `= 1` row per involved assignment.
/// Pairs that are not affected or rank above the target get no variable.
/// Within an assignment, variables are declared by rank then preference id.
pub fn build_explanation_milp(problem: &ExpresProblem) -> Result<ExplanationMilp, ExplainError> {
    let instance = problem.instance;
    let target = problem.target_preference();
    let target_rank = instance.rank(target)?;
    let mut candidates: Vec<(u32, &Preference)> = Vec::new();
    for p in problem.satisfied() {
        let r = instance.rank(p)?;
        if r <= target_rank {
            candidates.push((r, p));
        }
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)));

    let involved = involved(problem);
    let mut milp = IlpProblem::new();
    let mut pairs = Vec::new();
    let mut unexplained = Vec::new();
    for &a in &involved {
        let mut row = Vec::new();
        for &(rank, p) in &candidates {
            if !problem.rules.affected(instance, problem.schedule, p, a) {
                continue;
            }
            let v = milp.add_var(format!("x_{}_{}_{}", p.id, instance.agents[a.agent].id, instance.date_label(a.day)));
            milp.set_objective(v, rank as i64);
            pairs.push((p.id.clone(), a));
            row.push((v, 1));
        }
        if row.is_empty() {
            unexplained.push(a);
        }
        let name = format!("one_{}_{}", instance.agents[a.agent].id, instance.date_label(a.day));
        milp.add_constraint(Constraint::new(name, row, Relation::Eq, 1));
    }
    Ok(ExplanationMilp { problem: milp, involved, pairs, unexplained, target: problem.target.clone() })
}

/// The optimal explanation; ties go to the lexicographically smallest
/// support, which is the lowest-ranked, smallest-id reason per assignment.
pub fn explain(problem: &ExpresProblem, budget: Duration) -> Result<Explanation, ExplainError> {
    let milp = build_explanation_milp(problem)?;
    let solution = ilp::solve(&milp.problem, budget)?;
    match solution.status {
        SolveStatus::Optimal => milp.decode(problem.instance, &solution),
        SolveStatus::Infeasible => Err(milp.no_explanation()),
        SolveStatus::TimedOut => Err(ExplainError::Timeout),
    }
}

/// Explanations in non-decreasing objective order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplanationList {
    pub explanations: Vec<Explanation>,
    pub stop: StopReason,
}

impl ExplanationList {
    pub fn timed_out(&self) -> bool {
        self.stop == StopReason::TimedOut
    }
}

pub fn enumerate_explanations(
    problem: &ExpresProblem,
    max: usize,
    budget: Duration,
) -> Result<ExplanationList, ExplainError> {
    let milp = build_explanation_milp(problem)?;
    if !milp.unexplained.is_empty() {
        return Err(milp.no_explanation());
    }
    let found = ilp::enumerate(&milp.problem, max, budget)?;
    if found.solutions.is_empty() {
        return Err(match found.stop {
            StopReason::TimedOut => ExplainError::Timeout,
            _ => milp.no_explanation(),
        });
    }
    let explanations =
        found.solutions.iter().map(|s| milp.decode(problem.instance, s)).collect::<Result<Vec<_>, _>>()?;
    Ok(ExplanationList { explanations, stop: found.stop })
}

/// Every involved assignment carries exactly one reason, and nothing else does.
pub fn is_complete(e: &Explanation, problem: &ExpresProblem) -> bool {
    if e.target != problem.target {
        return false;
    }
    let mut per_assignment: BTreeMap<Assignment, usize> = BTreeMap::new();
    for r in &e.reasons {
        *per_assignment.entry(r.assignment).or_default() += 1;
    }
    let involved: BTreeSet<Assignment> = involved(problem).into_iter().collect();
    per_assignment.len() == involved.len() && per_assignment.iter().all(|(a, n)| *n == 1 && involved.contains(a))
}

/// Every reason is well defined: satisfied, involved, affected and no less
/// important than the target.
pub fn is_sound(e: &Explanation, problem: &ExpresProblem) -> bool {
    if e.target != problem.target {
        return false;
    }
    let instance = problem.instance;
    let target = problem.target_preference();
    let involved: BTreeSet<Assignment> = involved(problem).into_iter().collect();
    e.reasons.iter().all(|r| {
        let Some(p) = instance.preference(&r.satisfied_pref) else {
            return false;
        };
        r.unsatisfied_pref == problem.target
            && problem.sat_report.is_sat(&p.id)
            && involved.contains(&r.assignment)
            && problem.rules.affected(instance, problem.schedule, p, r.assignment)
            && instance.order.rank_ok(p, target).unwrap_or(false)
    })
}

/// Picks, for each involved assignment on its own, an admissible satisfied
/// preference of minimum rank, breaking ties by smallest id.
pub fn greedy_oracle(problem: &ExpresProblem) -> Result<Explanation, ExplainError> {
    let instance = problem.instance;
    let target = problem.target_preference();
    let involved = involved(problem);
    let mut reasons = Vec::new();
    let mut unexplained = 0;
    for &a in &involved {
        let mut best: Option<(u32, &PrefId)> = None;
        for p in problem.satisfied() {
            if !instance.order.rank_ok(p, target)? || !problem.rules.affected(instance, problem.schedule, p, a) {
                continue;
            }
            let key = (instance.rank(p)?, &p.id);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
        match best {
            Some((_, id)) => reasons.push(Reason {
                satisfied_pref: id.clone(),
                assignment: a,
                unsatisfied_pref: problem.target.clone(),
            }),
            None => unexplained += 1,
        }
    }
    if unexplained > 0 {
        return Err(ExplainError::NoExplanation { target: problem.target.clone(), unexplained });
    }
    Explanation::from_reasons(instance, problem.target.clone(), reasons)
}

/// Number of reasons of `e1` missing from `e2`.
pub fn distance(e1: &Explanation, e2: &Explanation) -> Result<usize, ExplainError> {
    if e1.target != e2.target {
        return Err(ExplainError::TargetMismatch(e1.target.clone(), e2.target.clone()));
    }
    let key = |r: &'_ Reason| (r.assignment, r.satisfied_pref.clone());
    let sorted = |e: &Explanation| e.reasons.windows(2).all(|w| reason_key(&w[0]) < reason_key(&w[1]));
    if !(sorted(e1) && sorted(e2)) {
        let other: BTreeSet<(Assignment, PrefId)> = e2.reasons.iter().map(key).collect();
        return Ok(e1.reasons.iter().filter(|r| !other.contains(&key(r))).count());
    }
    // Both lists strictly sorted: a merge walk counts the shared reasons.
    let (a, b) = (&e1.reasons, &e2.reasons);
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match reason_key(&a[i]).cmp(&reason_key(&b[j])) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    Ok(a.len() - shared)
}

fn reason_key(r: &Reason) -> (Assignment, &PrefId) {
    (r.assignment, &r.satisfied_pref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{scenario_one, SCENARIO_ONE_TARGET};
    use crate::scheduler::solve_lexicographic;
    use serde_json::json;

    const BUDGET: Duration = Duration::from_secs(10);

    fn id(s: &str) -> PrefId {
        PrefId::from(s)
    }

    fn scenario() -> (PresInstance, Schedule) {
        let inst = scenario_one();
        let schedule = solve_lexicographic(&inst, BUDGET).unwrap().schedule;
        (inst, schedule)
    }

    fn kind_of(inst: &PresInstance, r: &Reason) -> PrefType {
        inst.preference(&r.satisfied_pref).unwrap().pref_type()
    }

    /// One day, two desks, A and B in, C out; `prefs` are (id, type, agent).
    fn one_day(prefs: &[(&str, &str, &str)]) -> (PresInstance, Schedule) {
        let prefs: Vec<_> =
            prefs.iter().map(|(pid, t, a)| json!({"id": pid, "type": t, "agent": a, "day": "2024-01-01"})).collect();
        let doc = json!({
            "time_slots": ["2024-01-01"],
            "n_desks": 2,
            "order": ["min", "meet", "group", "pref"],
            "agents": [
                {"id": "A", "max_days": 1},
                {"id": "B", "max_days": 1},
                {"id": "C", "max_days": 1}
            ],
            "preferences": prefs,
        });
        let inst = PresInstance::from_json(&doc.to_string()).unwrap();
        let schedule = Schedule::from_assignments([Assignment::new(0, 0), Assignment::new(1, 0)]);
        (inst, schedule)
    }

    #[test]
    fn scenario_one_involves_thursday() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &id(SCENARIO_ONE_TARGET)).unwrap();
        let thu = inst.day_by_date(NaiveDate::from_ymd_opt(2021, 11, 18).unwrap()).unwrap();
        let inv = involved(&problem);
        assert_eq!(inv.len(), 5);
        assert!(inv.iter().all(|a| a.day == thu));
        let names: Vec<&str> = inv.iter().map(|a| inst.agents[a.agent].id.as_str()).collect();
        assert_eq!(names, ["George", "Bob", "Charlie", "Alice", "Fei"]);
    }

    #[test]
    fn affected_rules() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &id(SCENARIO_ONE_TARGET)).unwrap();
        let agent = |n: &str| inst.agent_by_id(n).unwrap();
        assert!(affected(&problem, &id("edith_group_george_wed"), Assignment::new(agent("Edith"), 2)));
        assert!(!affected(&problem, &id("edith_group_george_wed"), Assignment::new(agent("Han"), 1)));
        assert!(affected(&problem, &id("bob_min"), Assignment::new(agent("Bob"), 3)));
        // Alice asks for 2 of 5 available days, so her minimum affects nothing.
        assert!(!affected(&problem, &id("alice_min"), Assignment::new(agent("Alice"), 3)));
        // Only the holder of a group preference is affected by it.
        assert!(!affected(&problem, &id("charlie_group_bob_thu"), Assignment::new(agent("Bob"), 3)));
        assert!(!affected(&problem, &id(SCENARIO_ONE_TARGET), Assignment::new(agent("Edith"), 3)));
    }

    #[test]
    fn scenario_one_milp_shape() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &id(SCENARIO_ONE_TARGET)).unwrap();
        let milp = build_explanation_milp(&problem).unwrap();
        assert_eq!(milp.problem.constraints().len(), 5);
        // George: min. Bob: min, meet, group. Charlie: min, group. Alice: meet, group. Fei: group, pref.
        assert_eq!(milp.problem.num_vars(), 1 + 3 + 2 + 2 + 2);
        assert!(milp.unexplained.is_empty());
    }

    #[test]
    fn scenario_one_explanation() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &id(SCENARIO_ONE_TARGET)).unwrap();
        let e = explain(&problem, BUDGET).unwrap();
        assert_eq!(e.objective, 8);
        let got: Vec<(&str, PrefType)> =
            e.reasons.iter().map(|r| (inst.agents[r.assignment.agent].id.as_str(), kind_of(&inst, r))).collect();
        assert_eq!(
            got,
            [
                ("George", PrefType::Min),
                ("Bob", PrefType::Min),
                ("Charlie", PrefType::Min),
                ("Alice", PrefType::Meet),
                ("Fei", PrefType::Group),
            ]
        );
        assert!(is_sound(&e, &problem) && is_complete(&e, &problem));
        assert_eq!(greedy_oracle(&problem).unwrap(), e);
    }

    #[test]
    fn scenario_one_enumeration() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &id(SCENARIO_ONE_TARGET)).unwrap();
        let all = enumerate_explanations(&problem, 1000, BUDGET).unwrap();
        assert_eq!(all.stop, StopReason::Exhausted);
        assert_eq!(all.explanations.len(), 24);
        assert_eq!(all.explanations[0], explain(&problem, BUDGET).unwrap());
        assert!(all.explanations.windows(2).all(|w| w[0].objective <= w[1].objective));
        let supports: BTreeSet<Vec<Reason>> = all.explanations.iter().map(|e| e.reasons.clone()).collect();
        assert_eq!(supports.len(), 24);
        assert!(all.explanations.iter().all(|e| is_sound(e, &problem) && is_complete(e, &problem)));

        let histogram = |e: &Explanation| {
            let mut h = [0usize; 4];
            for r in &e.reasons {
                h[slot(kind_of(&inst, r))] += 1;
            }
            h
        };
        let seen: BTreeSet<[usize; 4]> = all.explanations.iter().map(histogram).collect();
        for expected in [[3, 1, 1, 0], [1, 0, 4, 0], [1, 2, 1, 1]] {
            assert!(seen.contains(&expected), "{expected:?} missing");
        }
    }

    #[test]
    fn four_explanations_from_two_by_two() {
        let (inst, schedule) = one_day(&[
            ("a_meet", "meet", "A"),
            ("a_pref", "pref", "A"),
            ("b_meet", "meet", "B"),
            ("b_pref", "pref", "B"),
            ("c_pref", "pref", "C"),
        ]);
        let problem = ExpresProblem::new(&inst, &schedule, &id("c_pref")).unwrap();
        assert_eq!(build_explanation_milp(&problem).unwrap().problem.num_vars(), 4);
        let all = enumerate_explanations(&problem, 10, BUDGET).unwrap();
        let costs: Vec<u64> = all.explanations.iter().map(|e| e.objective).collect();
        assert_eq!(costs, [4, 6, 6, 8]);
        assert_eq!(distance(&all.explanations[0], &all.explanations[3]).unwrap(), 2);
        assert_eq!(distance(&all.explanations[0], &all.explanations[1]).unwrap(), 1);
        assert_eq!(distance(&all.explanations[2], &all.explanations[2]).unwrap(), 0);
    }

    #[test]
    fn unique_support_gives_one_explanation() {
        let (inst, schedule) = one_day(&[("a_meet", "meet", "A"), ("b_meet", "meet", "B"), ("c_pref", "pref", "C")]);
        let problem = ExpresProblem::new(&inst, &schedule, &id("c_pref")).unwrap();
        let all = enumerate_explanations(&problem, 10, BUDGET).unwrap();
        assert_eq!(all.explanations.len(), 1);
        assert_eq!(all.explanations[0].objective, 4);
    }

    #[test]
    fn no_satisfied_preferences_means_no_explanation() {
        let (inst, schedule) = one_day(&[("c_pref", "pref", "C")]);
        let problem = ExpresProblem::new(&inst, &schedule, &id("c_pref")).unwrap();
        let expected = ExplainError::NoExplanation { target: id("c_pref"), unexplained: 2 };
        assert_eq!(explain(&problem, BUDGET), Err(expected.clone()));
        assert_eq!(greedy_oracle(&problem), Err(expected.clone()));
        assert_eq!(enumerate_explanations(&problem, 10, BUDGET), Err(expected));
    }

    #[test]
    fn rank_violation_is_unsound() {
        let (inst, schedule) = one_day(&[("a_pref", "pref", "A"), ("b_meet", "meet", "B"), ("c_meet", "meet", "C")]);
        let problem = ExpresProblem::new(&inst, &schedule, &id("c_meet")).unwrap();
        assert!(matches!(explain(&problem, BUDGET), Err(ExplainError::NoExplanation { unexplained: 1, .. })));
        let reason = |p: &str, agent| Reason {
            satisfied_pref: id(p),
            assignment: Assignment::new(agent, 0),
            unsatisfied_pref: id("c_meet"),
        };
        let e = Explanation::from_reasons(&inst, id("c_meet"), vec![reason("a_pref", 0), reason("b_meet", 1)]).unwrap();
        assert!(is_complete(&e, &problem));
        assert!(!is_sound(&e, &problem));
    }

    #[test]
    fn dropping_a_reason_breaks_completeness() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &id(SCENARIO_ONE_TARGET)).unwrap();
        let mut e = explain(&problem, BUDGET).unwrap();
        e.reasons.pop();
        assert!(is_sound(&e, &problem));
        assert!(!is_complete(&e, &problem));
    }

    #[test]
    fn empty_involved_set() {
        let doc = json!({
            "time_slots": ["2024-01-01"],
            "n_desks": 1,
            "order": ["min", "meet", "group", "pref"],
            "agents": [{"id": "X", "max_days": 1}],
            "preferences": [{"id": "x_min", "type": "min", "agent": "X", "n": 2}],
        });
        let inst = PresInstance::from_json(&doc.to_string()).unwrap();
        let schedule = Schedule::from_assignments([Assignment::new(0, 0)]);
        let problem = ExpresProblem::new(&inst, &schedule, &id("x_min")).unwrap();
        assert!(involved(&problem).is_empty());
        let e = explain(&problem, BUDGET).unwrap();
        assert!(e.is_empty() && e.objective == 0);
        assert_eq!(greedy_oracle(&problem).unwrap(), e);
        assert_eq!(enumerate_explanations(&problem, 10, BUDGET).unwrap().explanations, vec![e]);
    }

    #[test]
    fn target_checks() {
        let (inst, schedule) = scenario();
        assert_eq!(
            ExpresProblem::new(&inst, &schedule, &id("bob_min")).unwrap_err(),
            ExplainError::TargetSatisfied(id("bob_min"))
        );
        assert_eq!(
            ExpresProblem::new(&inst, &schedule, &id("nobody")).unwrap_err(),
            ExplainError::UnknownPreference(id("nobody"))
        );
        let problem = ExpresProblem::new(&inst, &schedule, &id(SCENARIO_ONE_TARGET)).unwrap();
        let e = explain(&problem, BUDGET).unwrap();
        let other = Explanation { target: id("han_pref_thu"), objective: 0, reasons: Vec::new() };
        assert_eq!(distance(&e, &other), Err(ExplainError::TargetMismatch(e.target.clone(), other.target.clone())));
    }

    #[test]
    fn json_round_trip() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &id(SCENARIO_ONE_TARGET)).unwrap();
        let e = explain(&problem, BUDGET).unwrap();
        let text = e.to_json(&inst);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["objective"], 8);
        assert_eq!(v["reasons"][0], json!({"sat_pref": "george_min", "agent": "George", "day": "2021-11-18"}));
        assert_eq!(Explanation::from_json(&inst, &text).unwrap(), e);
        let list = explanations_to_json(&inst, std::slice::from_ref(&e));
        assert_eq!(explanations_from_json(&inst, &list).unwrap(), vec![e.clone()]);
        assert_eq!(explanations_from_json(&inst, &text).unwrap(), vec![e]);
        let tampered = text.replace("\"objective\": 8", "\"objective\": 7");
        assert!(matches!(Explanation::from_json(&inst, &tampered), Err(ExplainError::Malformed(_))));
    }
}
