//! Gomory mixed-integer cuts read off an optimal tableau.
//!
//! The floating-point tableau is only used to choose row multipliers. The
//! multipliers are snapped to rationals with small denominators and the cut
//! is then derived in exact integer arithmetic from the integer rows, so a
//! rounding error can only weaken a cut, never make it invalid. Slacks of
//! integer rows are integer, which is what makes the derivation valid.

use std::collections::HashSet;

use num_integer::Integer;

use super::search::IntRow;
use super::simplex::DualSimplex;
use super::Relation;

const MAX_DENOMINATOR: i64 = 1000;
const MAX_COMBINED_DENOMINATOR: i128 = 1_000_000;
const MAX_COEFFICIENT: i128 = 1000;
const MIN_FRACTION: f64 = 0.01;

/// Best rational approximation with denominator at most `max_den`, if it is
/// within `1e-9` of `u`.
fn snap(u: f64, max_den: i64) -> Option<(i64, i64)> {
    if !u.is_finite() || u.abs() > 1e6 {
        return None;
    }
    let (mut h0, mut h1, mut k0, mut k1) = (0i64, 1i64, 1i64, 0i64);
    let mut x = u;
    for _ in 0..40 {
        let a = x.floor();
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64) / (k1 as f64) - u).abs() <= 1e-9 {
            return Some((h1, k1));
        }
        let rest = x - a;
        if rest.abs() < 1e-12 {
            break;
        }
        x = 1.0 / rest;
    }
    (k1 > 0 && ((h1 as f64) / (k1 as f64) - u).abs() <= 1e-9).then_some((h1, k1))
}

/// Which bounded, nonnegative integer stands in for a column of `[A I]`.
#[derive(Clone, Copy)]
enum Shift {
    /// `w = x_j`
    Plain(usize),
    /// `w = 1 - x_j`
    Complement(usize),
    /// `w = s_i` for a `<=` row
    Slack(usize),
    /// `w = -s_i` for a `>=` row
    NegSlack(usize),
}

fn derive(lp: &DualSimplex, rows: &[IntRow], n: usize, r: usize) -> Option<IntRow> {
    let tab = lp.tableau_row(r);
    let mut mult: Vec<(usize, i64, i64)> = Vec::new();
    let mut den: i128 = 1;
    for (i, row) in rows.iter().enumerate() {
        let u = tab[n + i];
        if u.abs() < 1e-12 || row.terms.is_empty() {
            continue;
        }
        let (p, q) = snap(u, MAX_DENOMINATOR)?;
        if p == 0 {
            continue;
        }
        den = den.lcm(&(q as i128));
        if den > MAX_COMBINED_DENOMINATOR {
            return None;
        }
        mult.push((i, p, q));
    }

    // D * (sum of u_i * row_i): integer coefficients over the common denominator.
    let mut coef = vec![0i128; n];
    let mut rhs: i128 = 0;
    let mut terms: Vec<(Shift, i128)> = Vec::new();
    for &(i, p, q) in &mult {
        let scaled = p as i128 * (den / q as i128);
        let row = &rows[i];
        for &(j, a) in &row.terms {
            coef[j] += scaled * a as i128;
        }
        rhs += scaled * row.rhs as i128;
        match row.relation {
            Relation::Le => terms.push((Shift::Slack(i), scaled)),
            Relation::Ge => terms.push((Shift::NegSlack(i), -scaled)),
            Relation::Eq => {}
        }
    }
    for (j, &c) in coef.iter().enumerate() {
        if c == 0 {
            continue;
        }
        if lp.is_at_upper(j) {
            rhs -= c;
            terms.push((Shift::Complement(j), -c));
        } else {
            terms.push((Shift::Plain(j), c));
        }
    }

    let f0 = rhs.rem_euclid(den);
    let frac = f0 as f64 / den as f64;
    if !(MIN_FRACTION..=1.0 - MIN_FRACTION).contains(&frac) {
        return None;
    }

    // Mixed-integer rounding in w-space: sum g_k w_k >= f0 (D - f0).
    let mut out = vec![0i128; n];
    let mut out_rhs = f0 * (den - f0);
    for (shift, c) in terms {
        let f = c.rem_euclid(den);
        let g = if f <= f0 { f * (den - f0) } else { (den - f) * f0 };
        if g == 0 {
            continue;
        }
        match shift {
            Shift::Plain(j) => out[j] += g,
            Shift::Complement(j) => {
                out_rhs -= g;
                out[j] -= g;
            }
            Shift::Slack(i) => {
                out_rhs -= g * rows[i].rhs as i128;
                for &(j, a) in &rows[i].terms {
                    out[j] -= g * a as i128;
                }
            }
            Shift::NegSlack(i) => {
                out_rhs += g * rows[i].rhs as i128;
                for &(j, a) in &rows[i].terms {
                    out[j] += g * a as i128;
                }
            }
        }
    }

    let g = out.iter().fold(0i128, |acc, c| acc.gcd(c));
    if g == 0 {
        return None;
    }
    // Integer left-hand side: dividing by the gcd lets the right-hand side round up.
    let out_rhs = Integer::div_ceil(&out_rhs, &g);
    let terms: Vec<(usize, i128)> = out.iter().enumerate().filter(|(_, c)| **c != 0).map(|(j, c)| (j, c / g)).collect();
    if terms.iter().any(|(_, c)| c.abs() > MAX_COEFFICIENT) || out_rhs.abs() > MAX_COEFFICIENT {
        return None;
    }
    let activity: f64 = terms.iter().map(|&(j, c)| c as f64 * lp.value(j)).sum();
    let norm: f64 = terms.iter().map(|&(_, c)| (c as f64).powi(2)).sum::<f64>().sqrt();
    if activity >= out_rhs as f64 - 1e-6 * norm.max(1.0) {
        return None;
    }
    Some(IntRow {
        terms: terms.into_iter().map(|(j, c)| (j, c as i64)).collect(),
        relation: Relation::Ge,
        rhs: out_rhs as i64,
    })
}

/// Up to `max_cuts` violated cuts from rows whose basic variable is fractional.
pub(crate) fn gomory_cuts(lp: &DualSimplex, rows: &[IntRow], n: usize, max_cuts: usize) -> Vec<IntRow> {
    let mut candidates: Vec<(f64, usize)> = (0..lp.num_rows())
        .filter_map(|r| {
            let v = lp.value(lp.basic(r));
            let f = v - v.floor();
            (f > MIN_FRACTION && f < 1.0 - MIN_FRACTION).then_some(((f - 0.5).abs(), r))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut seen = HashSet::new();
    let mut cuts = Vec::new();
    for (_, r) in candidates {
        if cuts.len() == max_cuts {
            break;
        }
        if let Some(cut) = derive(lp, rows, n, r) {
            if seen.insert((cut.terms.clone(), cut.rhs)) {
                cuts.push(cut);
            }
        }
    }
    cuts
}
