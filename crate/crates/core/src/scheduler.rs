//! Lexicographic schedule optimization.
//!
//! The schedule is found with one ILP solve per preference type, in the
//! instance's order. Stage `k` maximizes the number of satisfied preferences
//! of type `k` while equality rows pin the counts reached by earlier stages.

use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::ilp::{self, Constraint, IlpError, IlpProblem, Relation, SolveOptions, SolveStatus, VarId};
use crate::model::{
    is_satisfied, partition_preferences, validate, Assignment, ModelError, Occupancy, PrefId, PrefType, PreferenceKind,
    PresInstance, SatReport, Schedule, ScheduleDoc, ValidationReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("instance failed validation with {} violation(s)", .0.violations.len())]
    Invalid(ValidationReport),
    #[error("infeasible by construction: {0}")]
    InfeasibleByConstruction(String),
    #[error("no feasible schedule exists")]
    Infeasible,
    #[error("time budget exhausted at stage {stage}")]
    TimedOut { stage: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ilp(#[from] IlpError),
}

/// The scheduling ILP together with its variable layout.
#[derive(Debug, Clone)]
pub struct ScheduleModel {
    pub problem: IlpProblem,
    /// `y[agent][day]`
    pub y: Vec<Vec<VarId>>,
    /// Indicator variables attached so far, as (preference index, variable).
    pub indicators: Vec<(usize, VarId)>,
}

impl ScheduleModel {
    pub fn decode(&self, x: &[bool]) -> Schedule {
        let mut s = Schedule::new();
        for (agent, days) in self.y.iter().enumerate() {
            for (day, v) in days.iter().enumerate() {
                if x[v.0] {
                    s.insert(Assignment::new(agent, day));
                }
            }
        }
        s
    }

    /// A full point consistent with `schedule`: indicators take their true satisfaction value.
    pub fn encode(&self, instance: &PresInstance, schedule: &Schedule) -> Vec<bool> {
        let mut x = vec![false; self.problem.num_vars()];
        for a in schedule.iter() {
            x[self.y[a.agent][a.day].0] = true;
        }
        for &(p, z) in &self.indicators {
            x[z.0] = is_satisfied(&instance.preferences[p], schedule);
        }
        x
    }
}

fn check_capacity(instance: &PresInstance) -> Result<(), ScheduleError> {
    if instance.occupancy != Occupancy::Exact {
        return Ok(());
    }
    let desks = instance.n_desks as usize;
    for day in 0..instance.n_days() {
        let present = (0..instance.agents.len()).filter(|&a| !instance.is_day_out(a, day)).count();
        if present < desks {
            return Err(ScheduleError::InfeasibleByConstruction(format!(
                "{} has {present} available agents for {desks} desks",
                instance.date_label(day)
            )));
        }
    }
    let supply: usize = (0..instance.agents.len())
        .map(|a| (instance.agents[a].max_days as usize).min(instance.available_days(a)))
        .sum();
    let demand = desks * instance.n_days();
    if supply < demand {
        return Err(ScheduleError::InfeasibleByConstruction(format!(
            "agents can cover at most {supply} of {demand} desk-days"
        )));
    }
    Ok(())
}

/// Binary `y[agent][day]` variables with occupancy, per-agent maximum and
/// out-of-office rows. The objective is zero.
pub fn build_feasibility_model(instance: &PresInstance) -> Result<ScheduleModel, ScheduleError> {
    check_capacity(instance)?;
    let mut problem = IlpProblem::new();
    let y: Vec<Vec<VarId>> = instance
        .agents
        .iter()
        .map(|a| (0..instance.n_days()).map(|d| problem.add_var(format!("y_{}_{}", a.id, d))).collect())
        .collect();
    let occupancy = match instance.occupancy {
        Occupancy::Exact => Relation::Eq,
        Occupancy::AtMost => Relation::Le,
    };
    for day in 0..instance.n_days() {
        problem.add_constraint(Constraint::new(
            format!("desks_{day}"),
            y.iter().map(|row| (row[day], 1)),
            occupancy,
            instance.n_desks as i64,
        ));
    }
    for (a, agent) in instance.agents.iter().enumerate() {
        problem.add_constraint(Constraint::new(
            format!("max_{}", agent.id),
            y[a].iter().map(|v| (*v, 1)),
            Relation::Le,
            agent.max_days as i64,
        ));
    }
    for (a, agent) in instance.agents.iter().enumerate() {
        for &d in &agent.days_out {
            problem.add_constraint(Constraint::new(format!("out_{}_{d}", agent.id), [(y[a][d], 1)], Relation::Eq, 0));
        }
    }
    Ok(ScheduleModel { problem, y, indicators: Vec::new() })
}

/// Adds one indicator per preference of type `t` and its linking rows.
/// Returns the new (preference index, variable) pairs.
/// Agents with more open days than this keep only the aggregated Min row.
const MAX_STRENGTHENED_DAYS: usize = 8;

pub fn attach_satisfaction_indicators(
    model: &mut ScheduleModel,
    instance: &PresInstance,
    t: PrefType,
) -> Vec<(usize, VarId)> {
    let mut added = Vec::new();
    for (i, p) in instance.preferences.iter().enumerate() {
        if p.pref_type() != t {
            continue;
        }
        let z = model.problem.add_var(format!("z_{}", p.id));
        model.problem.set_branch_priority(z, 1);
        let name = |suffix: &str| format!("link_{}{suffix}", p.id);
        match p.kind {
            PreferenceKind::Min { agent, n } => {
                let terms = model.y[agent].iter().map(|v| (*v, 1)).chain([(z, -(n as i64))]);
                model.problem.add_constraint(Constraint::new(name(""), terms, Relation::Ge, 0));
                // Every set S of available days must hold n - (m - |S|) attended days when z = 1.
                let open: Vec<VarId> = (0..instance.n_days())
                    .filter(|&d| !instance.is_day_out(agent, d))
                    .map(|d| model.y[agent][d])
                    .collect();
                let (m, n) = (open.len(), n as usize);
                if n > 1 && n <= m && m <= MAX_STRENGTHENED_DAYS {
                    for mask in 1u32..(1 << m) - 1 {
                        let size = mask.count_ones() as usize;
                        if size + n <= m {
                            continue;
                        }
                        let terms = (0..m)
                            .filter(|k| mask & (1 << k) != 0)
                            .map(|k| (open[k], 1))
                            .chain([(z, -((n + size - m) as i64))]);
                        model.problem.add_constraint(Constraint::new(
                            name(&format!("_s{mask}")),
                            terms,
                            Relation::Ge,
                            0,
                        ));
                    }
                }
            }
            PreferenceKind::Meet { agent, day } | PreferenceKind::Pref { agent, day } => {
                let terms = [(z, 1), (model.y[agent][day], -1)];
                model.problem.add_constraint(Constraint::new(name(""), terms, Relation::Le, 0));
            }
            PreferenceKind::Group { agent, with, day } => {
                for (suffix, who) in [("_a", agent), ("_b", with)] {
                    let terms = [(z, 1), (model.y[who][day], -1)];
                    model.problem.add_constraint(Constraint::new(name(suffix), terms, Relation::Le, 0));
                }
            }
        }
        added.push((i, z));
    }
    model.indicators.extend(added.iter().copied());
    added
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexResult {
    pub schedule: Schedule,
    /// Satisfied count per type, in the instance's order.
    pub per_type_counts: Vec<(PrefType, usize)>,
    pub sat_report: SatReport,
}

#[derive(Serialize)]
struct LexDoc<'a> {
    schedule: ScheduleDoc,
    counts: Vec<(&'static str, usize)>,
    sat: &'a std::collections::BTreeSet<PrefId>,
    unsat: &'a std::collections::BTreeSet<PrefId>,
}

impl LexResult {
    pub fn to_json(&self, instance: &PresInstance) -> String {
        let doc = LexDoc {
            schedule: self.schedule.to_doc(instance),
            counts: self.per_type_counts.iter().map(|(t, c)| (t.as_str(), *c)).collect(),
            sat: &self.sat_report.sat,
            unsat: &self.sat_report.unsat,
        };
        serde_json::to_string_pretty(&doc).expect("results always serialize")
    }
}

/// Reads either a bare schedule document or the `schedule` field of a
/// serialized [`LexResult`].
pub fn read_schedule(instance: &PresInstance, text: &str) -> Result<Schedule, ModelError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))?;
    match value.get("schedule") {
        Some(inner) if value.get("assignments").is_none() => Schedule::from_json(instance, &inner.to_string()),
        _ => Schedule::from_json(instance, text),
    }
}

/// Satisfied count of each type in `order` under `schedule`.
pub fn counts_by_type(instance: &PresInstance, schedule: &Schedule) -> Vec<(PrefType, usize)> {
    instance
        .order
        .types()
        .iter()
        .map(|&t| {
            let c = instance.preferences.iter().filter(|p| p.pref_type() == t && is_satisfied(p, schedule)).count();
            (t, c)
        })
        .collect()
}

pub fn solve_lexicographic(instance: &PresInstance, budget: Duration) -> Result<LexResult, ScheduleError> {
    let report = validate(instance);
    if !report.is_clean() {
        return Err(ScheduleError::Invalid(report));
    }
    let mut model = build_feasibility_model(instance)?;
    let stages = instance.order.len().max(1);
    let stage_budget = budget / stages as u32;
    let mut current: Option<Schedule> = None;

    for (k, &t) in instance.order.types().iter().enumerate() {
        let z = attach_satisfaction_indicators(&mut model, instance, t);
        if z.is_empty() {
            continue;
        }
        model.problem.clear_objective();
        for &(_, v) in &z {
            model.problem.set_objective(v, -1);
        }
        let hint = current.as_ref().map(|s| model.encode(instance, s));
        let sol =
            ilp::solve_with(&model.problem, &SolveOptions { budget: Some(stage_budget), hint, any_optimum: true })?;
        match sol.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => return Err(ScheduleError::Infeasible),
            SolveStatus::TimedOut => return Err(ScheduleError::TimedOut { stage: k + 1 }),
        }
        let x = sol.assignment.expect("optimal solutions carry an assignment");
        let schedule = model.decode(&x);
        let count = z.iter().filter(|(p, _)| is_satisfied(&instance.preferences[*p], &schedule)).count();
        model.problem.add_constraint(Constraint::new(
            format!("fix_{t}"),
            z.iter().map(|(_, v)| (*v, 1)),
            Relation::Eq,
            count as i64,
        ));
        current = Some(schedule);
    }

    let schedule = match current {
        Some(s) => s,
        None => {
            model.problem.clear_objective();
            let sol = ilp::solve(&model.problem, budget)?;
            match sol.status {
                SolveStatus::Optimal => model.decode(sol.assignment.as_deref().expect("optimal has assignment")),
                SolveStatus::Infeasible => return Err(ScheduleError::Infeasible),
                SolveStatus::TimedOut => return Err(ScheduleError::TimedOut { stage: 0 }),
            }
        }
    };
    let sat_report = partition_preferences(instance, &schedule)?;
    let per_type_counts = counts_by_type(instance, &schedule);
    Ok(LexResult { schedule, per_type_counts, sat_report })
}
