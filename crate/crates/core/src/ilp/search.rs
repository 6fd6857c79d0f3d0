//! Depth-first branch-and-bound over binary columns.
//!
//! Two passes: the first proves the optimal objective with LP-guided
//! branching, root Gomory cuts and reduced-cost fixing. The optional second
//! pass walks variables in declared order (trying 1 before 0) under the
//! constraint `objective <= optimum`, which returns the canonical optimum
//! used for tie-breaking. No-good rows are kept out of the relaxation and
//! enforced by counter-based propagation instead.

use web_time::Instant;

use super::cuts::gomory_cuts;
use super::simplex::{DualSimplex, LpOutcome, LpRow};
use super::Relation;

const INTEGRALITY_TOL: f64 = 1e-6;
const BOUND_TOL: f64 = 1e-6;
/// Problems smaller than this skip root cuts.
const CUT_THRESHOLD: usize = 16;

#[derive(Debug, Clone)]
pub(crate) struct IntRow {
    pub terms: Vec<(usize, i64)>,
    pub relation: Relation,
    pub rhs: i64,
}

impl IntRow {
    fn holds(&self, x: &[bool]) -> bool {
        let lhs: i128 = self.terms.iter().filter(|(j, _)| x[*j]).map(|&(_, a)| a as i128).sum();
        let rhs = self.rhs as i128;
        match self.relation {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }
}

/// Integer-scaled problem: objective and rows carry exact integer coefficients.
#[derive(Debug, Clone)]
pub(crate) struct IntModel {
    pub n: usize,
    pub objective: Vec<i64>,
    pub rows: Vec<IntRow>,
    /// Supports of no-good rows `sum(x_S) <= |S| - 1`.
    pub nogoods: Vec<Vec<usize>>,
    /// Values forced by single-variable rows.
    pub forced: Vec<(usize, bool)>,
    /// True when some row can never hold.
    pub contradictory: bool,
    /// Branching priority per column; higher is branched on first.
    pub priority: Vec<u8>,
}

impl IntModel {
    pub(crate) fn feasible(&self, x: &[bool]) -> bool {
        !self.contradictory
            && self.rows.iter().all(|r| r.holds(x))
            && self.nogoods.iter().all(|s| s.iter().any(|&j| !x[j]))
            && self.forced.iter().all(|&(j, v)| x[j] == v)
    }

    pub(crate) fn objective_of(&self, x: &[bool]) -> i128 {
        self.objective.iter().zip(x).filter(|(_, &b)| b).map(|(&c, _)| c as i128).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum SearchOutcome {
    Optimal { objective: i128, x: Vec<bool> },
    Infeasible,
    TimedOut { incumbent: Option<(i128, Vec<bool>)> },
}

struct Search<'a> {
    model: &'a IntModel,
    /// Model rows followed by root cuts.
    rows: Vec<IntRow>,
    lp: DualSimplex,
    fixed: Vec<Option<bool>>,
    trail: Vec<usize>,
    var_nogoods: Vec<Vec<usize>>,
    ones: Vec<usize>,
    zeros: Vec<usize>,
    deadline: Option<Instant>,
    timed_out: bool,
    incumbent: Option<(i128, Vec<bool>)>,
    lp_iter_cap: usize,
}

impl<'a> Search<'a> {
    fn new(model: &'a IntModel, deadline: Option<Instant>) -> Self {
        let lp = build_lp(model.n, &model.objective, &model.rows);
        let mut var_nogoods = vec![Vec::new(); model.n];
        for (c, support) in model.nogoods.iter().enumerate() {
            for &j in support {
                var_nogoods[j].push(c);
            }
        }
        Search {
            model,
            rows: model.rows.clone(),
            lp,
            fixed: vec![None; model.n],
            trail: Vec::new(),
            var_nogoods,
            ones: vec![0; model.nogoods.len()],
            zeros: vec![0; model.nogoods.len()],
            deadline,
            timed_out: false,
            incumbent: None,
            lp_iter_cap: 50 * (model.n + model.rows.len()) + 1000,
        }
    }

    fn rebuild_lp(&mut self) {
        self.lp = build_lp(self.model.n, &self.model.objective, &self.rows);
        for j in 0..self.model.n {
            if let Some(v) = self.fixed[j] {
                let b = if v { 1.0 } else { 0.0 };
                self.lp.set_bounds(j, b, b);
            }
        }
        self.lp_iter_cap = 50 * (self.model.n + self.rows.len()) + 1000;
    }

    /// Rounds of Gomory cuts at the root while they move the bound.
    fn root_cuts(&mut self) {
        const ROUNDS: usize = 20;
        let per_round = (self.model.n / 4).clamp(10, 100);
        let Some(mut bound) = self.node_lp() else { return };
        let mut stalls = 0;
        for _ in 0..ROUNDS {
            if !bound.is_finite() || self.out_of_time() {
                break;
            }
            let cuts = gomory_cuts(&self.lp, &self.rows, self.model.n, per_round);
            if cuts.is_empty() {
                break;
            }
            let before = self.rows.len();
            self.rows.extend(cuts);
            self.rebuild_lp();
            if self.node_lp().is_none() {
                return;
            }
            // Drop cuts that are slack at the new optimum.
            let n = self.model.n;
            let lp = &self.lp;
            let mut keep = Vec::with_capacity(self.rows.len());
            for (k, row) in self.rows.drain(..).enumerate() {
                if k < before || lp.value(n + k).abs() < 1e-6 {
                    keep.push(row);
                }
            }
            self.rows = keep;
            self.rebuild_lp();
            let Some(next_bound) = self.node_lp() else { return };
            if next_bound < bound + 1e-4 {
                stalls += 1;
                if stalls == 3 {
                    break;
                }
            } else {
                stalls = 0;
            }
            bound = next_bound;
            if int_bound(bound) as f64 >= bound - 1e-9
                && self.incumbent.as_ref().is_some_and(|(best, _)| int_bound(bound) >= *best)
            {
                break;
            }
        }
    }

    fn out_of_time(&mut self) -> bool {
        if !self.timed_out && self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.timed_out = true;
        }
        self.timed_out
    }

    /// Fixes `v` and propagates no-good rows; false on conflict. Partial
    /// assignments stay on the trail and are undone by the caller.
    fn assign(&mut self, v: usize, val: bool) -> bool {
        if let Some(cur) = self.fixed[v] {
            return cur == val;
        }
        self.fixed[v] = Some(val);
        self.trail.push(v);
        let b = if val { 1.0 } else { 0.0 };
        self.lp.set_bounds(v, b, b);
        let mut implied = Vec::new();
        let mut conflict = false;
        for &c in &self.var_nogoods[v] {
            if val {
                self.ones[c] += 1;
            } else {
                self.zeros[c] += 1;
            }
            if val && self.zeros[c] == 0 {
                let len = self.model.nogoods[c].len();
                if self.ones[c] == len {
                    conflict = true;
                } else if self.ones[c] == len - 1 {
                    if let Some(&u) = self.model.nogoods[c].iter().find(|&&u| self.fixed[u].is_none()) {
                        implied.push(u);
                    }
                }
            }
        }
        if conflict {
            return false;
        }
        implied.into_iter().all(|u| self.assign(u, false))
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().expect("trail above mark");
            let val = self.fixed[v].take().expect("trail entries are fixed");
            for &c in &self.var_nogoods[v] {
                if val {
                    self.ones[c] -= 1;
                } else {
                    self.zeros[c] -= 1;
                }
            }
            self.lp.set_bounds(v, 0.0, 1.0);
        }
    }

    /// Relaxation value of the current node, `None` if the node is infeasible.
    fn node_lp(&mut self) -> Option<f64> {
        match self.lp.solve(self.lp_iter_cap) {
            LpOutcome::Optimal(v) => Some(v),
            LpOutcome::Infeasible => None,
            LpOutcome::Stalled(v) => Some(v),
        }
    }

    /// Integer lower bound of the current node, `None` if the node is infeasible.
    fn node_bound(&mut self) -> Option<i128> {
        self.node_lp().map(int_bound)
    }

    /// Fixes columns whose reduced cost alone lifts the bound to `best`.
    /// Returns `None` on a propagation conflict, otherwise whether anything was fixed.
    fn reduced_cost_fixing(&mut self, lp: f64, best: i128) -> Option<bool> {
        if !lp.is_finite() {
            return Some(false);
        }
        let mut fixes = Vec::new();
        for j in 0..self.model.n {
            if self.fixed[j].is_some() {
                continue;
            }
            let d = self.lp.reduced_cost(j);
            if d != 0.0 && int_bound(lp + d.abs()) >= best {
                fixes.push((j, d < 0.0));
            }
        }
        let changed = !fixes.is_empty();
        fixes.into_iter().all(|(j, v)| self.assign(j, v)).then_some(changed)
    }

    fn point(&self) -> Vec<bool> {
        (0..self.model.n).map(|j| self.fixed[j].unwrap_or_else(|| self.lp.value(j) > 0.5)).collect()
    }

    fn offer(&mut self, x: Vec<bool>) {
        if !self.model.feasible(&x) {
            return;
        }
        let obj = self.model.objective_of(&x);
        if self.incumbent.as_ref().is_none_or(|(best, _)| obj < *best) {
            self.incumbent = Some((obj, x));
        }
    }

    fn branch_and_bound(&mut self) {
        if self.out_of_time() {
            return;
        }
        let Some(mut lp) = self.node_lp() else { return };
        if let Some(best) = self.incumbent.as_ref().map(|b| b.0) {
            loop {
                if int_bound(lp) >= best {
                    return;
                }
                match self.reduced_cost_fixing(lp, best) {
                    None => return,
                    Some(false) => break,
                    Some(true) => match self.node_lp() {
                        Some(v) => lp = v,
                        None => return,
                    },
                }
            }
        }

        let mut branch = None;
        let mut best_key = (0u8, INTEGRALITY_TOL);
        for j in 0..self.model.n {
            if self.fixed[j].is_some() {
                continue;
            }
            let v = self.lp.value(j);
            let frac = (v - v.round()).abs();
            if frac <= INTEGRALITY_TOL {
                continue;
            }
            let prio = self.model.priority.get(j).copied().unwrap_or(0);
            if branch.is_none() || prio > best_key.0 || (prio == best_key.0 && frac > best_key.1 + 1e-12) {
                best_key = (prio, frac);
                branch = Some(j);
            }
        }
        if branch.is_none() {
            let x = self.point();
            if self.model.feasible(&x) {
                self.offer(x);
                return;
            }
            branch = self.free_var_in_violated_row(&x);
        }
        let Some(v) = branch else { return };
        let first = self.lp.value(v) >= 0.5;
        for val in [first, !first] {
            let mark = self.trail.len();
            if self.assign(v, val) {
                self.branch_and_bound();
            }
            self.undo_to(mark);
            if self.timed_out {
                return;
            }
        }
    }

    fn free_var_in_violated_row(&self, x: &[bool]) -> Option<usize> {
        let free = |j: &usize| self.fixed[*j].is_none();
        for row in &self.rows {
            if !row.holds(x) {
                if let Some(j) = row.terms.iter().map(|(j, _)| *j).find(free) {
                    return Some(j);
                }
            }
        }
        for support in &self.model.nogoods {
            if support.iter().all(|&j| x[j]) {
                if let Some(&j) = support.iter().find(|j| free(j)) {
                    return Some(j);
                }
            }
        }
        (0..self.model.n).find(free)
    }

    /// Declared-order DFS for the first point (1 before 0) with objective <= `target`.
    fn first_in_order(&mut self, target: i128, next: usize) -> Option<Vec<bool>> {
        if self.out_of_time() {
            return None;
        }
        match self.node_bound() {
            Some(b) if b <= target => {}
            _ => return None,
        }
        let Some(v) = (next..self.model.n).find(|&j| self.fixed[j].is_none()) else {
            let x = self.point();
            return (self.model.feasible(&x) && self.model.objective_of(&x) <= target).then_some(x);
        };
        for val in [true, false] {
            let mark = self.trail.len();
            let found = if self.assign(v, val) { self.first_in_order(target, v + 1) } else { None };
            self.undo_to(mark);
            if found.is_some() {
                return found;
            }
            if self.timed_out {
                return None;
            }
        }
        None
    }
}

fn build_lp(n: usize, objective: &[i64], rows: &[IntRow]) -> DualSimplex {
    let lp_rows: Vec<LpRow<'_>> =
        rows.iter().map(|r| LpRow { terms: &r.terms, relation: r.relation, rhs: r.rhs }).collect();
    DualSimplex::new(n, objective, &lp_rows)
}

fn int_bound(lp: f64) -> i128 {
    if lp.is_finite() {
        (lp - BOUND_TOL).ceil() as i128
    } else {
        i128::MIN
    }
}

pub(crate) fn run(
    model: &IntModel,
    deadline: Option<Instant>,
    hint: Option<&[bool]>,
    canonical: bool,
) -> SearchOutcome {
    if model.contradictory {
        return SearchOutcome::Infeasible;
    }
    let mut search = Search::new(model, deadline);
    for &(j, v) in &model.forced {
        if !search.assign(j, v) {
            return SearchOutcome::Infeasible;
        }
    }
    if let Some(h) = hint {
        if h.len() == model.n {
            search.offer(h.to_vec());
        }
    }
    if model.n >= CUT_THRESHOLD {
        search.root_cuts();
    }
    let root = search.trail.len();
    search.branch_and_bound();
    search.undo_to(root);
    if search.timed_out {
        return SearchOutcome::TimedOut { incumbent: search.incumbent };
    }
    let Some((optimum, fallback)) = search.incumbent.take() else {
        return SearchOutcome::Infeasible;
    };
    if !canonical {
        return SearchOutcome::Optimal { objective: optimum, x: fallback };
    }
    match search.first_in_order(optimum, 0) {
        Some(x) => SearchOutcome::Optimal { objective: model.objective_of(&x), x },
        // Optimality is already proven; only the canonical tie-break was cut short.
        None => SearchOutcome::Optimal { objective: optimum, x: fallback },
    }
}
