//! Seeded random instances for the desk-booking domain.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64`. Integers are drawn by rejection sampling on raw 64-bit
//! outputs and probabilities by comparing a 53-bit uniform float, so a seed
//! reproduces the same instance on any platform.

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use num_rational::Ratio;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Agent, PrefId, Preference, PreferenceKind, PreferenceOrder, PresInstance, TimeSlot};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("could not generate a consistent instance: {0}")]
    GenerationExhausted(String),
}

const MAX_RETRIES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_agents: usize,
    pub n_days: usize,
    pub seed: u64,
    /// Desks per day as a fraction of the number of agents, rounded up.
    pub desk_fraction: Ratio<u32>,
    pub meetings_range: [usize; 2],
    pub pref_days_range: [usize; 2],
    pub group_prefs_range: [usize; 2],
    pub days_out_prob: f64,
    pub days_out_range: [usize; 2],
    pub start_date: NaiveDate,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_agents: 10,
            n_days: 5,
            seed: 0,
            desk_fraction: Ratio::new(1, 2),
            meetings_range: [1, 2],
            pref_days_range: [1, 2],
            group_prefs_range: [1, 4],
            days_out_prob: 0.2,
            days_out_range: [1, 2],
            start_date: NaiveDate::from_ymd_opt(2021, 11, 15).expect("valid date"),
        }
    }
}

impl GenConfig {
    pub fn new(n_agents: usize, seed: u64) -> Self {
        GenConfig { n_agents, seed, ..GenConfig::default() }
    }

    pub fn n_desks(&self) -> u32 {
        (self.desk_fraction * Ratio::from_integer(self.n_agents as u32)).ceil().to_integer()
    }

    pub fn check(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        if self.n_agents == 0 || self.n_days == 0 {
            return bad("n_agents and n_days must be positive");
        }
        if *self.desk_fraction.numer() == 0 || self.desk_fraction > Ratio::from_integer(1) {
            return bad("desk_fraction must lie in (0, 1]");
        }
        for (name, r) in [
            ("meetings_range", self.meetings_range),
            ("pref_days_range", self.pref_days_range),
            ("group_prefs_range", self.group_prefs_range),
            ("days_out_range", self.days_out_range),
        ] {
            if r[0] > r[1] {
                return Err(GenError::InvalidConfig(format!("{name} is empty")));
            }
        }
        if self.meetings_range[1] > self.n_days || self.pref_days_range[1] > self.n_days {
            return bad("cannot pick more distinct days than the horizon has");
        }
        if !(0.0..=1.0).contains(&self.days_out_prob) {
            return bad("days_out_prob must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Uniform integer in `[lo, hi]`.
pub(crate) fn uniform(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> usize {
    debug_assert!(lo <= hi);
    let span = (hi - lo) as u64 + 1;
    let zone = u64::MAX - (u64::MAX - span + 1) % span;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return lo + (v % span) as usize;
        }
    }
}

pub(crate) fn chance(rng: &mut ChaCha8Rng, p: f64) -> bool {
    let unit = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    unit < p
}

/// `k` distinct values from `pool`, in draw order.
fn pick_distinct(rng: &mut ChaCha8Rng, pool: &[usize], k: usize) -> Vec<usize> {
    let mut rest = pool.to_vec();
    let mut out = Vec::with_capacity(k);
    for _ in 0..k.min(rest.len()) {
        let i = uniform(rng, 0, rest.len() - 1);
        out.push(rest.remove(i));
    }
    out
}

pub fn generate(config: &GenConfig) -> Result<PresInstance, GenError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n_agents;
    let days: Vec<usize> = (0..config.n_days).collect();
    let time_slots = (0..config.n_days)
        .map(|d| {
            let date = config
                .start_date
                .checked_add_days(Days::new(d as u64))
                .ok_or_else(|| GenError::InvalidConfig("horizon overflows the calendar".into()))?;
            Ok(TimeSlot { date })
        })
        .collect::<Result<Vec<_>, GenError>>()?;
    let id = |a: usize| format!("agent_{a:02}");

    let mut agents = Vec::with_capacity(n);
    let mut preferences = Vec::new();
    for a in 0..n {
        let mut own = Vec::new();
        let mut anchored = BTreeSet::new();

        let k = uniform(&mut rng, config.meetings_range[0], config.meetings_range[1]);
        let mut meet_days = pick_distinct(&mut rng, &days, k);
        meet_days.sort_unstable();
        for (i, &day) in meet_days.iter().enumerate() {
            own.push((format!("{}_meet_{}", id(a), i + 1), PreferenceKind::Meet { agent: a, day }));
            anchored.insert(day);
        }

        let k = uniform(&mut rng, config.pref_days_range[0], config.pref_days_range[1]);
        let mut pref_days = pick_distinct(&mut rng, &days, k);
        pref_days.sort_unstable();
        for (i, &day) in pref_days.iter().enumerate() {
            own.push((format!("{}_pref_{}", id(a), i + 1), PreferenceKind::Pref { agent: a, day }));
            anchored.insert(day);
        }

        let k = uniform(&mut rng, config.group_prefs_range[0], config.group_prefs_range[1]);
        let mut pairs = BTreeSet::new();
        for i in 0..k {
            let mut tries = 0;
            let (with, day) = loop {
                if n < 2 || tries == MAX_RETRIES {
                    return Err(GenError::GenerationExhausted(format!(
                        "no fresh working-group partner for {} after {tries} tries",
                        id(a)
                    )));
                }
                tries += 1;
                let mut with = uniform(&mut rng, 0, n - 2);
                if with >= a {
                    with += 1;
                }
                let day = uniform(&mut rng, 0, config.n_days - 1);
                if pairs.insert((with, day)) {
                    break (with, day);
                }
            };
            own.push((format!("{}_group_{}", id(a), i + 1), PreferenceKind::Group { agent: a, with, day }));
            anchored.insert(day);
        }

        let min_days = anchored.len();
        own.insert(0, (format!("{}_min", id(a)), PreferenceKind::Min { agent: a, n: min_days as u32 }));
        let max_days = uniform(&mut rng, min_days, config.n_days);

        let mut days_out = BTreeSet::new();
        if chance(&mut rng, config.days_out_prob) {
            let k = uniform(&mut rng, config.days_out_range[0], config.days_out_range[1]);
            let free: Vec<usize> = days.iter().copied().filter(|d| !anchored.contains(d)).collect();
            days_out.extend(pick_distinct(&mut rng, &free, k));
        }

        agents.push(Agent { id: id(a), max_days: max_days as u32, days_out });
        preferences.extend(own.into_iter().map(|(pid, kind)| Preference { id: PrefId(pid), kind }));
    }

    PresInstance::new(time_slots, config.n_desks(), agents, preferences, PreferenceOrder::return_to_office())
        .map_err(|e| GenError::GenerationExhausted(e.to_string()))
}

/// The stream used for choosing benchmark targets, independent of instance sampling.
pub fn target_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&GenConfig::new(10, 7)).unwrap().to_json();
        let b = generate(&GenConfig::new(10, 7)).unwrap().to_json();
        let c = generate(&GenConfig::new(10, 8)).unwrap().to_json();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn half_the_agents_get_desks() {
        assert_eq!(generate(&GenConfig::new(10, 1)).unwrap().n_desks, 5);
        assert_eq!(GenConfig::new(7, 1).n_desks(), 4);
    }

    #[test]
    fn generated_instances_validate() {
        for seed in 0..50 {
            for n in [2, 10, 30] {
                let inst = generate(&GenConfig::new(n, seed)).unwrap();
                assert!(validate(&inst).is_clean(), "seed {seed}, n {n}: {:?}", validate(&inst));
            }
        }
    }

    #[test]
    fn min_counts_anchored_days() {
        let inst = generate(&GenConfig::new(10, 3)).unwrap();
        for (a, agent) in inst.agents.iter().enumerate() {
            let days: BTreeSet<_> =
                inst.preferences.iter().filter(|p| p.agent() == a).filter_map(|p| p.day()).collect();
            let min = inst
                .preferences
                .iter()
                .find_map(|p| match p.kind {
                    PreferenceKind::Min { agent, n } if agent == a => Some(n as usize),
                    _ => None,
                })
                .unwrap();
            assert_eq!(min, days.len());
            assert!(agent.max_days as usize >= min && agent.max_days <= 5);
            assert!(agent.days_out.is_disjoint(&days));
        }
    }

    #[test]
    fn single_agent_cannot_have_partners() {
        assert!(matches!(generate(&GenConfig::new(1, 0)), Err(GenError::GenerationExhausted(_))));
        let mut cfg = GenConfig::new(1, 0);
        cfg.group_prefs_range = [0, 0];
        assert!(generate(&cfg).is_ok());
    }

    #[test]
    fn bad_configs() {
        let mut cfg = GenConfig::new(10, 0);
        cfg.desk_fraction = Ratio::new(3, 2);
        assert!(matches!(generate(&cfg), Err(GenError::InvalidConfig(_))));
        let mut cfg = GenConfig::new(10, 0);
        cfg.meetings_range = [2, 1];
        assert!(matches!(generate(&cfg), Err(GenError::InvalidConfig(_))));
    }

    #[test]
    fn uniform_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = [false; 4];
        for _ in 0..200 {
            let v = uniform(&mut rng, 2, 5);
            seen[v - 2] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }
}
