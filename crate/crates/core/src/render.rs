//! Natural-language rendering of explanations.
//!
//! Text comes from a template bundle: a plain UTF-8 file split into sections
//! by `[template <name>]` headers, with `{placeholder}` substitution. The
//! aggregated form groups reasons by day and preference type into one
//! sentence; the detailed form writes one sentence per reason.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::explain::Explanation;
use crate::model::{PrefId, PrefType, PreferenceKind, PresInstance};

pub const DEFAULT_BUNDLE: &str = include_str!("../templates/default.tmpl");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("template `{0}` is missing from the bundle")]
    MissingTemplate(String),
    #[error("template `{template}` uses unknown placeholder `{{{placeholder}}}`")]
    UnknownPlaceholder { template: String, placeholder: String },
    #[error("template bundle line {line}: {message}")]
    Bundle { line: usize, message: String },
    #[error("unknown preference `{0}`")]
    UnknownPreference(PrefId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateBundle {
    pub name: String,
    templates: BTreeMap<String, String>,
}

impl TemplateBundle {
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, RenderError> {
        let mut templates = BTreeMap::new();
        let mut current: Option<(String, Vec<&str>)> = None;
        let finish = |cur: Option<(String, Vec<&str>)>, templates: &mut BTreeMap<String, String>| {
            if let Some((name, mut lines)) = cur {
                while lines.last().is_some_and(|l| l.trim().is_empty()) {
                    lines.pop();
                }
                templates.insert(name, lines.join("\n"));
            }
        };
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("[template ") {
                let Some(name) = rest.strip_suffix(']').map(str::trim).filter(|n| !n.is_empty()) else {
                    return Err(RenderError::Bundle { line: i + 1, message: "malformed header".into() });
                };
                if templates.contains_key(name) || current.as_ref().is_some_and(|(c, _)| c == name) {
                    return Err(RenderError::Bundle { line: i + 1, message: format!("duplicate template `{name}`") });
                }
                finish(current.take(), &mut templates);
                current = Some((name.to_string(), Vec::new()));
            } else if let Some((_, lines)) = current.as_mut() {
                lines.push(line);
            } else if !line.trim().is_empty() {
                return Err(RenderError::Bundle { line: i + 1, message: "text before the first template".into() });
            }
        }
        finish(current, &mut templates);
        Ok(TemplateBundle { name: name.into(), templates })
    }

    pub fn default_bundle() -> Self {
        TemplateBundle::parse("default", DEFAULT_BUNDLE).expect("bundled templates parse")
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    fn raw(&self, name: &str) -> Result<&str, RenderError> {
        self.templates.get(name).map(String::as_str).ok_or_else(|| RenderError::MissingTemplate(name.to_string()))
    }

    /// `name.one` or `name.many` when the bundle has them, else `name`.
    fn counted(&self, name: &str, count: usize) -> Result<(String, &str), RenderError> {
        let variant = format!("{name}.{}", if count == 1 { "one" } else { "many" });
        match self.templates.get(&variant) {
            Some(t) => Ok((variant, t)),
            None => Ok((name.to_string(), self.raw(name)?)),
        }
    }

    pub fn fill(&self, name: &str, values: &[(&str, &str)]) -> Result<String, RenderError> {
        substitute(name, self.raw(name)?, values)
    }

    fn fill_counted(&self, name: &str, count: usize, values: &[(&str, &str)]) -> Result<String, RenderError> {
        let (resolved, text) = self.counted(name, count)?;
        substitute(&resolved, text, values)
    }
}

impl Default for TemplateBundle {
    fn default() -> Self {
        TemplateBundle::default_bundle()
    }
}

fn substitute(name: &str, text: &str, values: &[(&str, &str)]) -> Result<String, RenderError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let Some(close) = after.find('}') else {
            out.push_str(&rest[open..]);
            return Ok(out);
        };
        let key = &after[..close];
        let value = values.iter().find(|(k, _)| *k == key).map(|(_, v)| *v).ok_or_else(|| {
            RenderError::UnknownPlaceholder { template: name.to_string(), placeholder: key.to_string() }
        })?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenderMode {
    Detailed,
    #[default]
    Aggregated,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RenderOptions {
    pub mode: RenderMode,
    pub anonymize: bool,
    pub bundle: TemplateBundle,
}

/// Reasons sharing a day and a preference type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReasonGroup {
    pub day: usize,
    pub pref_type: PrefType,
    /// Agents whose assignments are justified, in instance order.
    pub agents: Vec<usize>,
    pub count: usize,
    /// Distinct working-group pairs behind a group-type clause.
    pub working_groups: usize,
    /// The type ranks the same as the target.
    pub equal_rank: bool,
}

/// Agents of one (day, rank, type) group and the working groups behind them.
type Bucket = (Vec<usize>, BTreeSet<(usize, usize)>);

/// Groups ordered by day, then by rank.
pub fn aggregate(e: &Explanation, instance: &PresInstance) -> Result<Vec<ReasonGroup>, RenderError> {
    let target = instance.preference(&e.target).ok_or_else(|| RenderError::UnknownPreference(e.target.clone()))?;
    let target_rank = instance.rank(target).map_err(|_| RenderError::UnknownPreference(e.target.clone()))?;
    let mut buckets: BTreeMap<(usize, u32, PrefType), Bucket> = BTreeMap::new();
    for r in &e.reasons {
        let p = instance
            .preference(&r.satisfied_pref)
            .ok_or_else(|| RenderError::UnknownPreference(r.satisfied_pref.clone()))?;
        let rank = instance.rank(p).map_err(|_| RenderError::UnknownPreference(p.id.clone()))?;
        let (agents, pairs) = buckets.entry((r.assignment.day, rank, p.pref_type())).or_default();
        agents.push(r.assignment.agent);
        if let PreferenceKind::Group { agent, with, .. } = p.kind {
            pairs.insert((agent.min(with), agent.max(with)));
        }
    }
    Ok(buckets
        .into_iter()
        .map(|((day, rank, pref_type), (mut agents, pairs))| {
            agents.sort_unstable();
            ReasonGroup {
                day,
                pref_type,
                count: agents.len(),
                agents,
                working_groups: pairs.len(),
                equal_rank: rank == target_rank,
            }
        })
        .collect())
}

/// Folds `items` left to right with `sep`, using `last` for the final join.
fn join(bundle: &TemplateBundle, sep: &str, last: &str, items: Vec<String>) -> Result<String, RenderError> {
    let n = items.len();
    let mut it = items.into_iter();
    let mut acc = it.next().unwrap_or_default();
    for (i, item) in it.enumerate() {
        let name = if i + 2 == n { last } else { sep };
        acc = bundle.fill(name, &[("left", &acc), ("right", &item)])?;
    }
    Ok(acc)
}

fn type_key(t: PrefType) -> &'static str {
    t.as_str()
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn day_label(bundle: &TemplateBundle, instance: &PresInstance, day: usize) -> Result<String, RenderError> {
    let date = instance.time_slots[day].date;
    bundle.fill("day", &[("weekday", &date.format("%A").to_string()), ("date", &instance.date_label(day))])
}

fn capacity(bundle: &TemplateBundle, instance: &PresInstance) -> Result<String, RenderError> {
    let n = instance.n_desks.to_string();
    bundle.fill_counted(
        "constraint.capacity",
        instance.n_desks as usize,
        &[("n", &n), ("resource", &instance.resource)],
    )
}

pub fn render(e: &Explanation, opts: &RenderOptions, instance: &PresInstance) -> Result<String, RenderError> {
    match opts.mode {
        RenderMode::Aggregated => render_aggregated(e, opts, instance),
        RenderMode::Detailed => render_detailed(e, opts, instance),
    }
}

fn render_aggregated(e: &Explanation, opts: &RenderOptions, instance: &PresInstance) -> Result<String, RenderError> {
    let bundle = &opts.bundle;
    let groups = aggregate(e, instance)?;
    let constraints = capacity(bundle, instance)?;
    if groups.is_empty() {
        return bundle.fill("frame.empty", &[("constraints", &constraints)]);
    }
    let several_days = groups.iter().any(|g| g.day != groups[0].day);
    let anon = if opts.anonymize { "anon." } else { "" };
    let mut clauses = Vec::with_capacity(groups.len());
    for g in &groups {
        let who = if opts.anonymize {
            bundle.fill_counted("anon.who", g.count, &[("n", &g.count.to_string())])?
        } else {
            let names = g.agents.iter().map(|&a| instance.agents[a].id.clone()).collect();
            join(bundle, "join.names", "join.names.last", names)?
        };
        let name = format!("{anon}clause.{}", type_key(g.pref_type));
        let groups_n = g.working_groups.to_string();
        let values = [("who", who.as_str()), ("groups", groups_n.as_str())];
        let mut clause = match g.pref_type {
            PrefType::Group => bundle.fill_counted(&name, g.working_groups, &values)?,
            _ => bundle.fill_counted(&name, g.count, &values)?,
        };
        if several_days {
            let day = day_label(bundle, instance, g.day)?;
            clause = bundle.fill("clause.on_day", &[("clause", &clause), ("day", &day)])?;
        }
        if g.equal_rank {
            clause = bundle.fill("qualifier.equal", &[("clause", &clause)])?;
        }
        clauses.push(clause);
    }
    let last = if opts.anonymize { "anon.join.clauses.last" } else { "join.clauses.last" };
    let reasons = join(bundle, "join.clauses", last, clauses)?;
    bundle.fill("frame", &[("constraints", &constraints), ("reasons", &reasons)])
}

fn render_detailed(e: &Explanation, opts: &RenderOptions, instance: &PresInstance) -> Result<String, RenderError> {
    let bundle = &opts.bundle;
    let target = instance.preference(&e.target).ok_or_else(|| RenderError::UnknownPreference(e.target.clone()))?;
    let target_rank = instance.rank(target).map_err(|_| RenderError::UnknownPreference(e.target.clone()))?;
    let target_agent = &instance.agents[target.agent()];
    let target_type = bundle.fill(&format!("type.{}", type_key(target.pref_type())), &[])?;

    let mut lines = Vec::new();
    let constraints = capacity(bundle, instance)?;
    lines.push(bundle.fill("detailed.frame", &[("target", &target_agent.id), ("constraints", &constraints)])?);
    if (target_agent.max_days as usize) < instance.n_days() {
        let n = target_agent.max_days.to_string();
        lines.push(bundle.fill("detailed.max_days", &[("target", &target_agent.id), ("n", &n)])?);
    }
    if !target_agent.days_out.is_empty() {
        let days =
            target_agent.days_out.iter().map(|&d| day_label(bundle, instance, d)).collect::<Result<Vec<_>, _>>()?;
        let days = join(bundle, "join.names", "join.names.last", days)?;
        lines.push(bundle.fill("detailed.days_out", &[("target", &target_agent.id), ("days", &days)])?);
    }
    let anon_agent = if opts.anonymize { Some(bundle.fill("anon.agent", &[])?) } else { None };
    for r in &e.reasons {
        let p = instance
            .preference(&r.satisfied_pref)
            .ok_or_else(|| RenderError::UnknownPreference(r.satisfied_pref.clone()))?;
        let rank = instance.rank(p).map_err(|_| RenderError::UnknownPreference(p.id.clone()))?;
        let agent = anon_agent.clone().unwrap_or_else(|| instance.agents[r.assignment.agent].id.clone());
        let day = day_label(bundle, instance, r.assignment.day)?;
        let kind = bundle.fill(&format!("type.{}", type_key(p.pref_type())), &[])?;
        let name = if rank == target_rank { "detailed.reason.equal" } else { "detailed.reason" };
        let sentence = bundle.fill(
            name,
            &[
                ("agent", &agent),
                ("resource", &instance.resource),
                ("day", &day),
                ("target", &target_agent.id),
                ("type", &kind),
                ("target_type", &target_type),
                ("id", p.id.as_str()),
            ],
        )?;
        lines.push(capitalize(&sentence));
    }
    Ok(lines.join("\n"))
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RenderMode::Detailed => "detailed",
            RenderMode::Aggregated => "aggregated",
        })
    }
}

#[cfg(test)]
mod tests {
    use std::time::Duration;

    use super::*;
    use crate::explain::{enumerate_explanations, explain, ExpresProblem};
    use crate::fixtures::{scenario_one, SCENARIO_ONE_TARGET};
    use crate::model::{Assignment, Schedule};
    use crate::scheduler::solve_lexicographic;

    const BUDGET: Duration = Duration::from_secs(10);
    const FRAME: &str =
        "The preference could not be satisfied because the 5 available desks were assigned to other people with more important preferences: ";

    fn scenario() -> (PresInstance, Schedule) {
        let inst = scenario_one();
        let schedule = solve_lexicographic(&inst, BUDGET).unwrap().schedule;
        (inst, schedule)
    }

    fn opts(mode: RenderMode, anonymize: bool) -> RenderOptions {
        RenderOptions { mode, anonymize, bundle: TemplateBundle::default_bundle() }
    }

    #[test]
    fn edith_explanation_named_and_anonymized() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &PrefId::from(SCENARIO_ONE_TARGET)).unwrap();
        let e = explain(&problem, BUDGET).unwrap();
        assert_eq!(
            render(&e, &opts(RenderMode::Aggregated, false), &inst).unwrap(),
            format!(
                "{FRAME}George, Bob and Charlie due to a minimum number of days per week; Alice due to meetings; and Fei due to 1 working group."
            )
        );
        assert_eq!(
            render(&e, &opts(RenderMode::Aggregated, true), &inst).unwrap(),
            format!(
                "{FRAME}3 employees due to minimum number of days per week; 1 employee due to meetings; 1 employee due to 1 working group."
            )
        );
    }

    #[test]
    fn alternative_explanations() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &PrefId::from(SCENARIO_ONE_TARGET)).unwrap();
        let all = enumerate_explanations(&problem, 100, BUDGET).unwrap().explanations;
        let texts: Vec<String> =
            all.iter().map(|e| render(e, &opts(RenderMode::Aggregated, true), &inst).unwrap()).collect();
        let two_groups =
            format!("{FRAME}1 employee due to minimum number of days per week; 4 employees due to 2 working groups.");
        assert!(texts.contains(&two_groups));
        let with_pref = format!(
            "{FRAME}1 employee due to minimum number of days per week; 2 employees due to meetings; 1 employee due to 1 working group; 1 employee due to preferred day (equally important)."
        );
        assert!(texts.contains(&with_pref));
    }

    #[test]
    fn aggregate_groups() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &PrefId::from(SCENARIO_ONE_TARGET)).unwrap();
        let e = explain(&problem, BUDGET).unwrap();
        let groups = aggregate(&e, &inst).unwrap();
        let shape: Vec<(PrefType, usize)> = groups.iter().map(|g| (g.pref_type, g.count)).collect();
        assert_eq!(shape, [(PrefType::Min, 3), (PrefType::Meet, 1), (PrefType::Group, 1)]);
        assert!(groups.iter().all(|g| g.day == 3 && !g.equal_rank));
        assert_eq!(groups.iter().map(|g| g.count).sum::<usize>(), e.reasons.len());

        let empty = Explanation { target: e.target.clone(), objective: 0, reasons: Vec::new() };
        assert!(aggregate(&empty, &inst).unwrap().is_empty());
        assert_eq!(
            render(&empty, &opts(RenderMode::Aggregated, false), &inst).unwrap(),
            "The preference could not be satisfied because of the 5 available desks."
        );
    }

    #[test]
    fn detailed_is_lossless() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &PrefId::from(SCENARIO_ONE_TARGET)).unwrap();
        for e in enumerate_explanations(&problem, 100, BUDGET).unwrap().explanations {
            let text = render(&e, &opts(RenderMode::Detailed, false), &inst).unwrap();
            let mut parsed: Vec<(PrefId, Assignment)> = text
                .lines()
                .filter_map(|line| {
                    let id = line.rsplit_once("(preference ")?.1.strip_suffix(").")?;
                    let (agent, rest) = line.split_once(" was assigned a desk on ")?;
                    let date = rest.split_whitespace().nth(1)?;
                    let day = inst.day_by_date(date.parse().ok()?)?;
                    Some((PrefId::from(id), Assignment::new(inst.agent_by_id(agent)?, day)))
                })
                .collect();
            parsed.sort_by_key(|(_, a)| *a);
            let expected: Vec<(PrefId, Assignment)> =
                e.reasons.iter().map(|r| (r.satisfied_pref.clone(), r.assignment)).collect();
            assert_eq!(parsed, expected);
        }
    }

    #[test]
    fn detailed_sentences() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &PrefId::from(SCENARIO_ONE_TARGET)).unwrap();
        let e = explain(&problem, BUDGET).unwrap();
        let text = render(&e, &opts(RenderMode::Detailed, false), &inst).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "The preference of Edith could not be satisfied because of the 5 available desks.");
        assert_eq!(lines[1], "Edith can be in the office at most 2 days.");
        assert_eq!(
            lines[2],
            "George was assigned a desk on Thursday 2021-11-18 instead of Edith because to satisfy a minimum number of days per week is more important than to satisfy a preferred day (preference george_min)."
        );
        assert_eq!(lines.len(), 2 + 5);

        let anon = render(&e, &opts(RenderMode::Detailed, true), &inst).unwrap();
        assert!(anon.lines().nth(2).unwrap().starts_with("An employee was assigned a desk on Thursday"));
    }

    #[test]
    fn anonymized_text_names_no_one_else() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &PrefId::from(SCENARIO_ONE_TARGET)).unwrap();
        for e in enumerate_explanations(&problem, 100, BUDGET).unwrap().explanations {
            for mode in [RenderMode::Aggregated, RenderMode::Detailed] {
                let text = render(&e, &opts(mode, true), &inst).unwrap();
                for a in inst.agents.iter().filter(|a| a.id != "Edith") {
                    assert!(!text.contains(&a.id), "{} leaked in {text}", a.id);
                }
            }
        }
    }

    #[test]
    fn bundle_parsing() {
        let b = TemplateBundle::parse("t", "# note\n[template a]\nHello {who}\n\n[template b]\nline one\nline two\n")
            .unwrap();
        assert_eq!(b.fill("a", &[("who", "you")]).unwrap(), "Hello you");
        assert_eq!(b.fill("b", &[]).unwrap(), "line one\nline two");
        assert_eq!(b.fill("c", &[]), Err(RenderError::MissingTemplate("c".into())));
        assert!(matches!(b.fill("a", &[]), Err(RenderError::UnknownPlaceholder { .. })));
        assert!(matches!(
            TemplateBundle::parse("t", "stray\n[template a]\nx"),
            Err(RenderError::Bundle { line: 1, .. })
        ));
        assert!(matches!(
            TemplateBundle::parse("t", "[template a]\nx\n[template a]\ny"),
            Err(RenderError::Bundle { line: 3, .. })
        ));
    }

    #[test]
    fn missing_template_surfaces() {
        let (inst, schedule) = scenario();
        let problem = ExpresProblem::new(&inst, &schedule, &PrefId::from(SCENARIO_ONE_TARGET)).unwrap();
        let e = explain(&problem, BUDGET).unwrap();
        let text: String = DEFAULT_BUNDLE.replace("[template clause.meet]", "[template clause.unused]");
        let bundle = TemplateBundle::parse("broken", &text).unwrap();
        let o = RenderOptions { mode: RenderMode::Aggregated, anonymize: false, bundle };
        assert_eq!(render(&e, &o, &inst), Err(RenderError::MissingTemplate("clause.meet".into())));
    }
}
