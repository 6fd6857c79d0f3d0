//! Exact optimizer for 0/1 linear programs.
//!
//! Problems are stated with rational coefficients and a minimization
//! objective. Internally every row and the objective are scaled to integers,
//! relaxations are solved in floating point only to prune, and every
//! candidate point is checked with exact integer arithmetic.
//!
//! Among equally good optima the solver returns the one whose 0/1 vector is
//! lexicographically largest in declared variable order (earlier variables
//! prefer 1). For supports of equal size this is the lexicographically
//! smallest sorted support.

mod cuts;
mod search;
mod simplex;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::time::Duration;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedMul, Signed, ToPrimitive, Zero};
use thiserror::Error;
use web_time::Instant;

use search::{IntModel, IntRow, SearchOutcome};

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IlpError {
    #[error("malformed problem: {0}")]
    MalformedProblem(String),
    #[error("solution has an empty support; it cannot be excluded")]
    EmptySupport,
    #[error("only optimal solutions can be excluded")]
    NotOptimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn new<C: Into<Rational>>(
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, C)>,
        relation: Relation,
        rhs: impl Into<Rational>,
    ) -> Self {
        Constraint {
            name: name.into(),
            terms: terms.into_iter().map(|(v, c)| (v, c.into())).collect(),
            relation,
            rhs: rhs.into(),
        }
    }
}

/// A minimization problem over binary variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IlpProblem {
    vars: Vec<String>,
    priority: Vec<u8>,
    objective: BTreeMap<VarId, Rational>,
    constraints: Vec<Constraint>,
}

impl IlpProblem {
    pub fn new() -> Self {
        IlpProblem::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> VarId {
        self.vars.push(name.into());
        self.priority.push(0);
        VarId(self.vars.len() - 1)
    }

    /// Fractional variables with higher priority are branched on first.
    pub fn set_branch_priority(&mut self, v: VarId, priority: u8) {
        self.priority[v.0] = priority;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v.0]
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> {
        (0..self.vars.len()).map(VarId)
    }

    /// Sets (replaces) the objective coefficient of `v`.
    pub fn set_objective(&mut self, v: VarId, coefficient: impl Into<Rational>) {
        let c = coefficient.into();
        if c.is_zero() {
            self.objective.remove(&v);
        } else {
            self.objective.insert(v, c);
        }
    }

    pub fn clear_objective(&mut self) {
        self.objective.clear();
    }

    pub fn objective(&self) -> &BTreeMap<VarId, Rational> {
        &self.objective
    }

    pub fn add_constraint(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Checks that every referenced variable is declared.
    pub fn validate(&self) -> Result<(), IlpError> {
        let n = self.vars.len();
        if let Some(v) = self.objective.keys().find(|v| v.0 >= n) {
            return Err(IlpError::MalformedProblem(format!("objective uses undeclared variable {}", v.0)));
        }
        for c in &self.constraints {
            if let Some((v, _)) = c.terms.iter().find(|(v, _)| v.0 >= n) {
                return Err(IlpError::MalformedProblem(format!(
                    "constraint `{}` uses undeclared variable {}",
                    c.name, v.0
                )));
            }
        }
        Ok(())
    }

    /// Exact objective value of a 0/1 point.
    pub fn evaluate(&self, x: &[bool]) -> Rational {
        self.objective.iter().filter(|(v, _)| x[v.0]).map(|(_, c)| *c).sum()
    }

    /// Exact feasibility check of a 0/1 point.
    pub fn is_feasible(&self, x: &[bool]) -> bool {
        x.len() == self.vars.len()
            && self.constraints.iter().all(|c| {
                let lhs: Rational = c.terms.iter().filter(|(v, _)| x[v.0]).map(|(_, a)| *a).sum();
                match c.relation {
                    Relation::Le => lhs <= c.rhs,
                    Relation::Eq => lhs == c.rhs,
                    Relation::Ge => lhs >= c.rhs,
                }
            })
    }

    fn to_int_model(&self) -> Result<(IntModel, i64), IlpError> {
        self.validate()?;
        let overflow = || IlpError::MalformedProblem("coefficients too large to scale exactly".into());
        let n = self.vars.len();

        let obj_scale = self.objective.values().fold(1i64, |acc, c| acc.lcm(c.denom()));
        let mut objective = vec![0i64; n];
        for (v, c) in &self.objective {
            let scaled = c.checked_mul(&Ratio::from_integer(obj_scale)).ok_or_else(overflow)?;
            objective[v.0] = scaled.to_integer();
        }

        let mut model = IntModel {
            n,
            objective,
            rows: Vec::new(),
            nogoods: Vec::new(),
            forced: Vec::new(),
            contradictory: false,
            priority: self.priority.clone(),
        };
        let mut forced = vec![None; n];
        for c in &self.constraints {
            let mut merged: BTreeMap<usize, Rational> = BTreeMap::new();
            for (v, a) in &c.terms {
                *merged.entry(v.0).or_insert_with(Rational::zero) += a;
            }
            merged.retain(|_, a| !a.is_zero());

            let is_nogood = c.relation == Relation::Le
                && merged.len() >= 2
                && c.terms.len() == merged.len()
                && merged.values().all(|a| *a == Rational::from_integer(1))
                && c.rhs == Rational::from_integer(merged.len() as i64 - 1);
            if is_nogood {
                model.nogoods.push(merged.keys().copied().collect());
                continue;
            }

            let scale = merged.values().fold(*c.rhs.denom(), |acc, a| acc.lcm(a.denom()));
            let to_int = |r: &Rational| -> Result<i64, IlpError> {
                Ok(r.checked_mul(&Ratio::from_integer(scale)).ok_or_else(overflow)?.to_integer())
            };
            let terms: Vec<(usize, i64)> =
                merged.iter().map(|(j, a)| Ok((*j, to_int(a)?))).collect::<Result<_, IlpError>>()?;
            let row = IntRow { terms, relation: c.relation, rhs: to_int(&c.rhs)? };

            match row.terms.len() {
                0 => {
                    if !row_holds_at_zero(&row) {
                        model.contradictory = true;
                    }
                }
                1 => {
                    let (j, a) = row.terms[0];
                    let ok0 = row_holds_at_zero(&row);
                    let ok1 = satisfies(a as i128, row.relation, row.rhs as i128);
                    let value = match (ok0, ok1) {
                        (true, true) => continue,
                        (false, false) => {
                            model.contradictory = true;
                            continue;
                        }
                        (true, false) => false,
                        (false, true) => true,
                    };
                    match forced[j] {
                        Some(prev) if prev != value => model.contradictory = true,
                        _ => forced[j] = Some(value),
                    }
                }
                _ => model.rows.push(row),
            }
        }
        model.forced = forced.iter().enumerate().filter_map(|(j, v)| v.map(|b| (j, b))).collect();
        Ok((model, obj_scale))
    }

    /// LP-style plain text dump (`min: ...; name: ...; bin ...;`).
    pub fn to_lp_string(&self) -> String {
        self.to_string()
    }
}

fn satisfies(lhs: i128, relation: Relation, rhs: i128) -> bool {
    match relation {
        Relation::Le => lhs <= rhs,
        Relation::Eq => lhs == rhs,
        Relation::Ge => lhs >= rhs,
    }
}

fn row_holds_at_zero(row: &IntRow) -> bool {
    satisfies(0, row.relation, row.rhs as i128)
}

fn fmt_linear(f: &mut fmt::Formatter<'_>, problem: &IlpProblem, terms: &[(VarId, Rational)]) -> fmt::Result {
    if terms.is_empty() {
        return write!(f, " 0");
    }
    for (v, c) in terms {
        let sign = if c.is_negative() { '-' } else { '+' };
        let mag = c.abs();
        if mag == Rational::from_integer(1) {
            write!(f, " {sign}{}", problem.var_name(*v))?;
        } else {
            write!(f, " {sign}{mag} {}", problem.var_name(*v))?;
        }
    }
    Ok(())
}

impl fmt::Display for IlpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "min:")?;
        let obj: Vec<_> = self.objective.iter().map(|(v, c)| (*v, *c)).collect();
        fmt_linear(f, self, &obj)?;
        writeln!(f, ";")?;
        for (i, c) in self.constraints.iter().enumerate() {
            if c.name.is_empty() {
                write!(f, "c{i}:")?;
            } else {
                write!(f, "{}:", c.name)?;
            }
            fmt_linear(f, self, &c.terms)?;
            writeln!(f, " {} {};", c.relation, c.rhs)?;
        }
        if !self.vars.is_empty() {
            writeln!(f, "bin {};", self.vars.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// The budget ran out; any assignment is an unproven incumbent.
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpSolution {
    pub status: SolveStatus,
    pub assignment: Option<Vec<bool>>,
    pub objective_value: Option<Rational>,
}

impl IlpSolution {
    fn infeasible() -> Self {
        IlpSolution { status: SolveStatus::Infeasible, assignment: None, objective_value: None }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> bool {
        self.assignment.as_ref().is_some_and(|x| x[v.0])
    }

    /// Variables set to 1, in declared order.
    pub fn support(&self) -> Vec<VarId> {
        self.assignment
            .as_ref()
            .map(|x| x.iter().enumerate().filter(|(_, b)| **b).map(|(j, _)| VarId(j)).collect())
            .unwrap_or_default()
    }
}

/// Extra knobs for [`solve_with`].
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub budget: Option<Duration>,
    /// A feasible point to start from; ignored if infeasible.
    pub hint: Option<Vec<bool>>,
    /// Return the first optimum branch-and-bound proves instead of the
    /// canonical one. Much faster on large problems with many optima.
    pub any_optimum: bool,
}

pub fn solve(problem: &IlpProblem, budget: Duration) -> Result<IlpSolution, IlpError> {
    solve_with(problem, &SolveOptions { budget: Some(budget), ..SolveOptions::default() })
}

pub fn solve_with(problem: &IlpProblem, options: &SolveOptions) -> Result<IlpSolution, IlpError> {
    let deadline = options.budget.map(|b| Instant::now() + b);
    solve_until(problem, deadline, options.hint.as_deref(), !options.any_optimum)
}

fn solve_until(
    problem: &IlpProblem,
    deadline: Option<Instant>,
    hint: Option<&[bool]>,
    canonical: bool,
) -> Result<IlpSolution, IlpError> {
    let (model, _) = problem.to_int_model()?;
    let with_value =
        |status, x: Vec<bool>| IlpSolution { status, objective_value: Some(problem.evaluate(&x)), assignment: Some(x) };
    Ok(match search::run(&model, deadline, hint, canonical) {
        SearchOutcome::Optimal { x, .. } => with_value(SolveStatus::Optimal, x),
        SearchOutcome::Infeasible => IlpSolution::infeasible(),
        SearchOutcome::TimedOut { incumbent: Some((_, x)) } => with_value(SolveStatus::TimedOut, x),
        SearchOutcome::TimedOut { incumbent: None } => {
            IlpSolution { status: SolveStatus::TimedOut, assignment: None, objective_value: None }
        }
    })
}

/// Returns a copy of `problem` that additionally forbids the support of `solution`.
pub fn add_exclusion_cut(problem: &IlpProblem, solution: &IlpSolution) -> Result<IlpProblem, IlpError> {
    if !solution.is_optimal() {
        return Err(IlpError::NotOptimal);
    }
    let support = solution.support();
    if support.is_empty() {
        return Err(IlpError::EmptySupport);
    }
    let mut next = problem.clone();
    let ones = support.len() as i64;
    let name = format!("cut{}", problem.constraints.len());
    next.add_constraint(Constraint::new(name, support.into_iter().map(|v| (v, 1)), Relation::Le, ones - 1));
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// No further feasible support exists.
    Exhausted,
    CapReached,
    TimedOut,
    /// The last solution set nothing to 1, so it cannot be cut off.
    EmptySupport,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub solutions: Vec<IlpSolution>,
    pub stop: StopReason,
}

/// Solves, cuts off the optimum, and repeats. Objectives come out
/// non-decreasing and supports pairwise distinct.
pub fn enumerate(problem: &IlpProblem, max_solutions: usize, budget: Duration) -> Result<Enumeration, IlpError> {
    problem.validate()?;
    let deadline = Instant::now() + budget;
    let mut current = problem.clone();
    let mut solutions = Vec::new();
    let mut seen: HashSet<Vec<VarId>> = HashSet::new();
    let stop = loop {
        if solutions.len() >= max_solutions.max(1) {
            break StopReason::CapReached;
        }
        let sol = solve_until(&current, Some(deadline), None, true)?;
        match sol.status {
            SolveStatus::Infeasible => break StopReason::Exhausted,
            SolveStatus::TimedOut => break StopReason::TimedOut,
            SolveStatus::Optimal => {}
        }
        debug_assert!(seen.insert(sol.support()), "support repeated across cuts");
        let cut = add_exclusion_cut(&current, &sol);
        solutions.push(sol);
        match cut {
            Ok(next) => current = next,
            Err(IlpError::EmptySupport) => break StopReason::EmptySupport,
            Err(e) => return Err(e),
        }
    };
    Ok(Enumeration { solutions, stop })
}

/// Floating-point view of a rational, for reporting.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUDGET: Duration = Duration::from_secs(10);

    #[test]
    fn forced_assignment() {
        let mut p = IlpProblem::new();
        let x = p.add_var("x");
        p.set_objective(x, 1);
        p.add_constraint(Constraint::new("fix", [(x, 1)], Relation::Eq, 1));
        let s = solve(&p, BUDGET).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective_value, Some(Rational::from_integer(1)));
        assert!(s.value(x));
    }

    #[test]
    fn contradiction_is_infeasible() {
        let mut p = IlpProblem::new();
        let x = p.add_var("x");
        p.add_constraint(Constraint::new("a", [(x, 1)], Relation::Ge, 1));
        p.add_constraint(Constraint::new("b", [(x, 1)], Relation::Le, 0));
        assert_eq!(solve(&p, BUDGET).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn empty_row_that_cannot_hold() {
        let mut p = IlpProblem::new();
        p.add_var("x");
        p.add_constraint(Constraint::new::<i64>("empty", [], Relation::Eq, 1));
        assert_eq!(solve(&p, BUDGET).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn undeclared_variable_is_malformed() {
        let mut p = IlpProblem::new();
        p.add_var("x");
        p.set_objective(VarId(3), 1);
        assert!(matches!(solve(&p, BUDGET), Err(IlpError::MalformedProblem(_))));
    }

    #[test]
    fn rational_coefficients() {
        // min -x/2 - y/3 s.t. x/2 + y/3 <= 1/2  -> x = 1
        let mut p = IlpProblem::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.set_objective(x, Rational::new(-1, 2));
        p.set_objective(y, Rational::new(-1, 3));
        p.add_constraint(Constraint::new(
            "cap",
            [(x, Rational::new(1, 2)), (y, Rational::new(1, 3))],
            Relation::Le,
            Rational::new(1, 2),
        ));
        let s = solve(&p, BUDGET).unwrap();
        assert_eq!(s.objective_value, Some(Rational::new(-1, 2)));
        assert!(s.value(x) && !s.value(y));
    }

    #[test]
    fn cuts_match_examples() {
        let mut p = IlpProblem::new();
        let x1 = p.add_var("x1");
        let _x2 = p.add_var("x2");
        let x3 = p.add_var("x3");
        let sol = |bits: Vec<bool>| IlpSolution {
            status: SolveStatus::Optimal,
            objective_value: Some(Rational::zero()),
            assignment: Some(bits),
        };
        let single = add_exclusion_cut(&p, &sol(vec![true, false, false])).unwrap();
        let c = single.constraints().last().unwrap();
        assert_eq!(c.terms, vec![(x1, Rational::from_integer(1))]);
        assert_eq!((c.relation, c.rhs), (Relation::Le, Rational::zero()));

        let pair = add_exclusion_cut(&p, &sol(vec![true, false, true])).unwrap();
        let c = pair.constraints().last().unwrap();
        assert_eq!(c.terms.iter().map(|t| t.0).collect::<Vec<_>>(), vec![x1, x3]);
        assert_eq!(c.rhs, Rational::from_integer(1));

        assert_eq!(add_exclusion_cut(&p, &sol(vec![false; 3])), Err(IlpError::EmptySupport));
        let mut timed = sol(vec![true, false, false]);
        timed.status = SolveStatus::TimedOut;
        assert_eq!(add_exclusion_cut(&p, &timed), Err(IlpError::NotOptimal));
    }

    #[test]
    fn enumerate_two_point_set() {
        // exactly one of a, b: costs 3 and 5
        let mut p = IlpProblem::new();
        let a = p.add_var("a");
        let b = p.add_var("b");
        p.set_objective(a, 3);
        p.set_objective(b, 5);
        p.add_constraint(Constraint::new("one", [(a, 1), (b, 1)], Relation::Eq, 1));
        let e = enumerate(&p, 10, BUDGET).unwrap();
        let costs: Vec<_> = e.solutions.iter().map(|s| s.objective_value.unwrap()).collect();
        assert_eq!(costs, vec![Rational::from_integer(3), Rational::from_integer(5)]);
        assert_eq!(e.stop, StopReason::Exhausted);

        let capped = enumerate(&p, 1, BUDGET).unwrap();
        assert_eq!(capped.solutions.len(), 1);
        assert_eq!(capped.stop, StopReason::CapReached);
    }

    #[test]
    fn enumerate_infeasible_is_empty() {
        let mut p = IlpProblem::new();
        let x = p.add_var("x");
        p.add_constraint(Constraint::new("a", [(x, 1)], Relation::Ge, 2));
        let e = enumerate(&p, 10, BUDGET).unwrap();
        assert!(e.solutions.is_empty());
        assert_eq!(e.stop, StopReason::Exhausted);
    }

    #[test]
    fn ties_prefer_earlier_variables() {
        let mut p = IlpProblem::new();
        let vs: Vec<_> = (0..4).map(|i| p.add_var(format!("v{i}"))).collect();
        for v in &vs {
            p.set_objective(*v, 1);
        }
        p.add_constraint(Constraint::new("two", vs.iter().map(|v| (*v, 1)), Relation::Eq, 2));
        let s = solve(&p, BUDGET).unwrap();
        assert_eq!(s.support(), vec![vs[0], vs[1]]);
    }

    #[test]
    fn lp_dump_format() {
        let mut p = IlpProblem::new();
        let x = p.add_var("x");
        let y = p.add_var("y");
        p.set_objective(x, 3);
        p.set_objective(y, -2);
        p.add_constraint(Constraint::new("c", [(x, 1), (y, 2)], Relation::Le, 2));
        assert_eq!(p.to_lp_string(), "min: +3 x -2 y;\nc: +x +2 y <= 2;\nbin x, y;\n");
    }
}
