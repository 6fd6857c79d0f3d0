//! Dense bounded-variable dual simplex used for node relaxations.
//!
//! Every row gets a slack (`a·x + s = b`), so the slack basis with each
//! structural column parked at the bound favoured by its cost sign is dual
//! feasible from the start. Branching only moves bounds, which keeps the
//! current basis dual feasible, so each node re-optimizes with a handful of
//! dual pivots on the same tableau.
//!
//! Structural costs carry a small deterministic perturbation against dual
//! degeneracy, and reduced costs that drift to the wrong sign are repaired by
//! shifting the working cost. Neither affects the reported value: it is the
//! Lagrangian bound of the current row multipliers evaluated against the
//! original rows and costs, which is a valid lower bound for any multipliers.
//! Infeasibility is only reported after the aggregated row that proves it has
//! been re-checked against the original rows.

use super::Relation;

const PRIMAL_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const REFRESH_EVERY: usize = 64;
const PERTURBATION: f64 = 1e-6;
const BLAND_AFTER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal(f64),
    Infeasible,
    /// Gave up before primal feasibility; still carries a valid bound.
    Stalled(f64),
}

const NONBASIC: usize = usize::MAX;

#[derive(Debug, Clone)]
pub(crate) struct DualSimplex {
    m: usize,
    n: usize,
    cols: usize,
    tab: Vec<f64>,
    rhs: Vec<f64>,
    /// Working costs: perturbed and shifted.
    cost: Vec<f64>,
    d: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    at_upper: Vec<bool>,
    since_refresh: usize,
    scratch: Vec<usize>,
    /// Original rows, costs and right-hand sides for the bound and certificates.
    rows: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    true_cost: Vec<f64>,
    /// Reduced costs of the structural columns in the last Lagrangian bound.
    safe_d: Vec<f64>,
}

pub(crate) struct LpRow<'a> {
    pub terms: &'a [(usize, i64)],
    pub relation: Relation,
    pub rhs: i64,
}

impl DualSimplex {
    /// Builds the relaxation over `n` binary columns.
    pub(crate) fn new(n: usize, cost: &[i64], rows: &[LpRow<'_>]) -> Self {
        let m = rows.len();
        let cols = n + m;
        let mut tab = vec![0.0; m * cols];
        let mut rhs = vec![0.0; m];
        let mut lo = vec![0.0; cols];
        let mut hi = vec![1.0; cols];
        let mut orig = Vec::with_capacity(m);
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row.terms {
                tab[i * cols + j] += a as f64;
            }
            orig.push(row.terms.iter().map(|&(j, a)| (j, a as f64)).collect());
            tab[i * cols + n + i] = 1.0;
            rhs[i] = row.rhs as f64;
            let (l, h) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lo[n + i] = l;
            hi[n + i] = h;
        }
        let mut full_cost = vec![0.0; cols];
        for (j, &c) in cost.iter().enumerate() {
            let delta = PERTURBATION * (1.0 + ((j as u64).wrapping_mul(2_654_435_761) % 1000) as f64 / 1000.0);
            full_cost[j] = c as f64 + delta;
        }
        let mut lp = DualSimplex {
            m,
            n,
            cols,
            b: rhs.clone(),
            tab,
            rhs,
            d: full_cost.clone(),
            cost: full_cost,
            lo,
            hi,
            x: vec![0.0; cols],
            basis: (n..cols).collect(),
            row_of: (0..cols).map(|j| if j >= n { j - n } else { NONBASIC }).collect(),
            at_upper: vec![false; cols],
            since_refresh: 0,
            scratch: Vec::new(),
            rows: orig,
            true_cost: cost.iter().map(|&c| c as f64).collect(),
            safe_d: vec![0.0; n],
        };
        for j in 0..n {
            if lp.d[j] < 0.0 {
                lp.at_upper[j] = true;
                lp.x[j] = 1.0;
            }
        }
        lp.refresh_primal();
        lp
    }

    pub(crate) fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    pub(crate) fn num_rows(&self) -> usize {
        self.m
    }

    /// Column basic in row `r`.
    pub(crate) fn basic(&self, r: usize) -> usize {
        self.basis[r]
    }

    /// Row `r` of the current tableau `B^-1 [A I]`.
    pub(crate) fn tableau_row(&self, r: usize) -> &[f64] {
        &self.tab[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn is_at_upper(&self, j: usize) -> bool {
        self.row_of[j] == NONBASIC && self.at_upper[j]
    }

    /// Reduced cost of structural column `j` in the last reported bound:
    /// moving `x_j` away from the bound its sign prefers raises that bound
    /// by at least its magnitude.
    pub(crate) fn reduced_cost(&self, j: usize) -> f64 {
        self.safe_d[j]
    }

    /// Moves the bounds of a structural column.
    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.row_of[j] != NONBASIC {
            return;
        }
        let target = if lo == hi || self.d[j] > 0.0 {
            lo
        } else if self.d[j] < 0.0 || self.at_upper[j] {
            hi
        } else {
            lo
        };
        self.at_upper[j] = target == hi && lo != hi;
        let delta = target - self.x[j];
        if delta != 0.0 {
            for i in 0..self.m {
                let a = self.tab[i * self.cols + j];
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * delta;
                }
            }
            self.x[j] = target;
        }
    }

    fn refresh_primal(&mut self) {
        for i in 0..self.m {
            let row = &self.tab[i * self.cols..(i + 1) * self.cols];
            let mut v = self.rhs[i];
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 && self.row_of[j] == NONBASIC {
                    v -= a * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
        self.since_refresh = 0;
    }

    fn refresh_duals(&mut self) {
        for j in 0..self.cols {
            if self.row_of[j] != NONBASIC {
                self.d[j] = 0.0;
                continue;
            }
            let mut v = self.cost[j];
            for i in 0..self.m {
                let a = self.tab[i * self.cols + j];
                if a != 0.0 {
                    v -= self.cost[self.basis[i]] * a;
                }
            }
            self.d[j] = v;
            self.repair_sign(j);
        }
    }

    /// Reduced cost of a nonbasic column measured so that dual feasibility means `>= 0`.
    fn dual_slack(&self, j: usize) -> f64 {
        if self.at_upper[j] {
            -self.d[j]
        } else {
            self.d[j]
        }
    }

    /// Shifts the working cost of nonbasic `j` so its reduced cost is not of the wrong sign.
    fn repair_sign(&mut self, j: usize) {
        if self.lo[j] != self.hi[j] && self.dual_slack(j) < 0.0 {
            self.cost[j] -= self.d[j];
            self.d[j] = 0.0;
        }
    }

    pub(crate) fn solve(&mut self, max_iter: usize) -> LpOutcome {
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh_primal();
                self.refresh_duals();
            }
            // After a run of degenerate pivots, fall back to Bland's rule.
            let bland = degenerate >= BLAND_AFTER;
            // Leaving row: largest bound violation, or lowest basic index under Bland.
            let mut leave = None;
            let mut worst = PRIMAL_TOL;
            for i in 0..self.m {
                let b = self.basis[i];
                let v = self.x[b];
                let viol = if v < self.lo[b] - PRIMAL_TOL {
                    self.lo[b] - v
                } else if v > self.hi[b] + PRIMAL_TOL {
                    v - self.hi[b]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some(l) if bland => b < self.basis[l],
                    Some(_) => viol > worst,
                };
                if better {
                    worst = viol;
                    leave = Some(i);
                }
            }
            let Some(r) = leave else {
                return LpOutcome::Optimal(self.lagrangian_bound());
            };
            let leaving = self.basis[r];
            let going_up = self.x[leaving] < self.lo[leaving];
            let target = if going_up { self.lo[leaving] } else { self.hi[leaving] };

            // Two-pass ratio test: the tolerance admits larger pivots among near-ties.
            let row = &self.tab[r * self.cols..(r + 1) * self.cols];
            let eligible = |j: usize, a: f64| {
                if self.row_of[j] != NONBASIC || self.lo[j] == self.hi[j] || a.abs() <= PIVOT_TOL {
                    return false;
                }
                let up = self.at_upper[j];
                if going_up {
                    (!up && a < 0.0) || (up && a > 0.0)
                } else {
                    (!up && a > 0.0) || (up && a < 0.0)
                }
            };
            let mut bound = f64::INFINITY;
            for (j, &a) in row.iter().enumerate() {
                if eligible(j, a) {
                    bound = bound.min((self.dual_slack(j).max(0.0) + DUAL_TOL) / a.abs());
                }
            }
            let mut enter: Option<(usize, f64, f64)> = None;
            for (j, &a) in row.iter().enumerate() {
                if !eligible(j, a) {
                    continue;
                }
                let ratio = self.dual_slack(j).max(0.0) / a.abs();
                if ratio > bound {
                    continue;
                }
                let better = match enter {
                    None => true,
                    Some((_, best_ratio, _)) if bland => ratio < best_ratio - 1e-12,
                    Some((_, _, mag)) => a.abs() > mag,
                };
                if better {
                    enter = Some((j, ratio, a.abs()));
                }
            }
            let Some((q, ratio, _)) = enter else {
                return if self.proves_infeasible(r) {
                    LpOutcome::Infeasible
                } else {
                    LpOutcome::Stalled(self.lagrangian_bound())
                };
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.repair_sign(q);
            self.pivot(r, q, target);
        }
        LpOutcome::Stalled(self.lagrangian_bound())
    }

    fn pivot(&mut self, r: usize, q: usize, target: f64) {
        let cols = self.cols;
        let leaving = self.basis[r];
        let arq = self.tab[r * cols + q];

        // Primal step.
        let step = (self.x[leaving] - target) / arq;
        for i in 0..self.m {
            let a = self.tab[i * cols + q];
            if a != 0.0 {
                self.x[self.basis[i]] -= a * step;
            }
        }
        self.x[q] += step;
        self.x[leaving] = target;

        // Dual step.
        let theta = self.d[q] / arq;
        self.scratch.clear();
        for j in 0..cols {
            if self.tab[r * cols + j] != 0.0 {
                self.scratch.push(j);
            }
        }
        for &j in &self.scratch {
            self.d[j] -= theta * self.tab[r * cols + j];
        }
        self.d[q] = 0.0;

        // Tableau update restricted to the pivot row's nonzeros.
        let inv = 1.0 / arq;
        for &j in &self.scratch {
            self.tab[r * cols + j] *= inv;
        }
        self.rhs[r] *= inv;
        let pivot_rhs = self.rhs[r];
        let (before, rest) = self.tab.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for (i, row) in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)).enumerate() {
            let f = row[q];
            if f == 0.0 {
                continue;
            }
            for &j in &self.scratch {
                row[j] -= f * prow[j];
            }
            row[q] = 0.0;
            let i = if i < r { i } else { i + 1 };
            self.rhs[i] -= f * pivot_rhs;
        }
        prow[q] = 1.0;

        self.basis[r] = q;
        self.row_of[q] = r;
        self.row_of[leaving] = NONBASIC;
        self.at_upper[leaving] = target == self.hi[leaving] && self.lo[leaving] != self.hi[leaving];
        self.since_refresh += 1;
        for k in 0..self.scratch.len() {
            let j = self.scratch[k];
            if self.row_of[j] == NONBASIC {
                self.repair_sign(j);
            }
        }
    }

    /// Lagrangian bound `y·b + Σ min(d_j lo_j, d_j hi_j)` with `y` read off
    /// the slack reduced costs and clipped to the signs each row admits.
    fn lagrangian_bound(&mut self) -> f64 {
        let mut y = vec![0.0; self.m];
        for (i, yi) in y.iter_mut().enumerate() {
            let s = self.n + i;
            let v = if self.row_of[s] == NONBASIC { -self.d[s] } else { 0.0 };
            *yi = if self.hi[s] == f64::INFINITY {
                v.min(0.0)
            } else if self.lo[s] == f64::NEG_INFINITY {
                v.max(0.0)
            } else {
                v
            };
        }
        let mut d = self.true_cost.clone();
        let mut total = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            total += y[i] * self.b[i];
            for &(j, a) in row {
                d[j] -= y[i] * a;
            }
        }
        for (j, &dj) in d.iter().enumerate() {
            total += if dj >= 0.0 { dj * self.lo[j] } else { dj * self.hi[j] };
        }
        self.safe_d = d;
        total
    }

    /// Checks that row `r` of `B^-1` aggregates the original rows into one
    /// that no point within the bounds can satisfy.
    fn proves_infeasible(&self, r: usize) -> bool {
        let u = &self.tab[r * self.cols + self.n..(r + 1) * self.cols];
        let mut g = vec![0.0; self.n];
        let mut rhs = 0.0;
        let (mut min, mut max) = (0.0f64, 0.0f64);
        let mut scale = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            // Any multipliers give a valid aggregate; dropping round-off keeps
            // slacks with an infinite bound out of it.
            let ui = u[i];
            if ui.abs() <= PIVOT_TOL {
                continue;
            }
            rhs += ui * self.b[i];
            scale = scale.max((ui * self.b[i]).abs());
            for &(j, a) in row {
                g[j] += ui * a;
            }
            // Slack column with coefficient `ui`.
            let s = self.n + i;
            let (l, h) = (ui * self.lo[s], ui * self.hi[s]);
            min += l.min(h);
            max += l.max(h);
        }
        for (j, &gj) in g.iter().enumerate() {
            let (l, h) = (gj * self.lo[j], gj * self.hi[j]);
            min += l.min(h);
            max += l.max(h);
            scale = scale.max(gj.abs());
        }
        let tol = 1e-9 * scale.max(1.0);
        rhs < min - tol || rhs > max + tol
    }
}
