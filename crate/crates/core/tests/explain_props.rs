use std::time::Duration;

use expres::explain::{
    distance, enumerate_explanations, explain, greedy_oracle, is_complete, is_sound, ExplainError, Explanation,
    ExpresProblem,
};
use expres::generator::{generate, GenConfig};
use expres::model::{partition_preferences, PrefId, PresInstance, Schedule};
use expres::scheduler::{read_schedule, solve_lexicographic, ScheduleError};
use proptest::prelude::*;

const BUDGET: Duration = Duration::from_secs(20);

/// None when exact occupancy cannot be met, which small random weeks sometimes hit.
fn solved(agents: usize, seed: u64) -> Option<(PresInstance, Schedule)> {
    let inst = generate(&GenConfig::new(agents, seed)).unwrap();
    match solve_lexicographic(&inst, BUDGET) {
        Ok(result) => Some((inst, result.schedule)),
        Err(ScheduleError::Infeasible | ScheduleError::InfeasibleByConstruction(_)) => None,
        Err(e) => panic!("agents {agents}, seed {seed}: {e}"),
    }
}

fn unsat(inst: &PresInstance, sched: &Schedule) -> Vec<PrefId> {
    partition_preferences(inst, sched).unwrap().unsat.into_iter().collect()
}

/// Enumerations for every explainable unsatisfied preference.
fn explanations(inst: &PresInstance, sched: &Schedule, max: usize) -> Vec<(PrefId, Vec<Explanation>)> {
    unsat(inst, sched)
        .into_iter()
        .filter_map(|id| {
            let problem = ExpresProblem::new(inst, sched, &id).unwrap();
            match enumerate_explanations(&problem, max, BUDGET) {
                Ok(list) => Some((id, list.explanations)),
                Err(ExplainError::NoExplanation { .. }) => None,
                Err(e) => panic!("{id}: {e}"),
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimum_matches_greedy_and_is_sound_and_complete(agents in 3usize..9, seed in 0u64..10_000) {
        let solved = solved(agents, seed);
        prop_assume!(solved.is_some());
        let (inst, sched) = solved.unwrap();
        for id in unsat(&inst, &sched) {
            let problem = ExpresProblem::new(&inst, &sched, &id).unwrap();
            match (explain(&problem, BUDGET), greedy_oracle(&problem)) {
                (Ok(e), Ok(g)) => {
                    prop_assert_eq!(&e, &g);
                    prop_assert!(is_sound(&e, &problem));
                    prop_assert!(is_complete(&e, &problem));
                }
                (Err(ExplainError::NoExplanation { .. }), Err(ExplainError::NoExplanation { .. })) => {}
                (a, b) => prop_assert!(false, "{id}: solver {a:?} vs greedy {b:?}"),
            }
        }
    }

    #[test]
    fn enumeration_is_ordered_distinct_and_valid(agents in 3usize..9, seed in 0u64..10_000) {
        let solved = solved(agents, seed);
        prop_assume!(solved.is_some());
        let (inst, sched) = solved.unwrap();
        for (id, list) in explanations(&inst, &sched, 30) {
            let problem = ExpresProblem::new(&inst, &sched, &id).unwrap();
            prop_assert!(!list.is_empty());
            prop_assert!(list.windows(2).all(|w| w[0].objective <= w[1].objective));
            for (i, e) in list.iter().enumerate() {
                prop_assert!(is_sound(e, &problem) && is_complete(e, &problem));
                prop_assert_eq!(distance(e, e).unwrap(), 0);
                for f in &list[i + 1..] {
                    let d = distance(e, f).unwrap();
                    prop_assert!(d > 0);
                    prop_assert_eq!(d, distance(f, e).unwrap());
                }
            }
        }
    }

    #[test]
    fn serialized_forms_round_trip(agents in 3usize..9, seed in 0u64..10_000) {
        let solved = solved(agents, seed);
        prop_assume!(solved.is_some());
        let (inst, sched) = solved.unwrap();
        let text = solve_lexicographic(&inst, BUDGET).unwrap().to_json(&inst);
        prop_assert_eq!(read_schedule(&inst, &text).unwrap(), sched.clone());
        let reread = PresInstance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(&reread, &inst);
        for (_, list) in explanations(&inst, &sched, 5) {
            for e in list {
                prop_assert_eq!(Explanation::from_json(&inst, &e.to_json(&inst)).unwrap(), e);
            }
        }
    }
}
