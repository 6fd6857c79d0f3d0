//! Browser bindings for the demo page in `www/`.

use std::time::Duration;

use expres::explain::{enumerate_explanations, ExplainError, ExpresProblem};
use expres::fixtures::{scenario_one, SCENARIO_ONE_TARGET};
use expres::generator::{generate, GenConfig};
use expres::model::{PrefId, PresInstance};
use expres::render::{render, RenderMode, RenderOptions};
use expres::scheduler::{read_schedule, solve_lexicographic};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct RenderedExplanation {
    objective: u64,
    reasons: usize,
    text: String,
}

#[derive(Serialize)]
struct ExplainResponse {
    target: String,
    timed_out: bool,
    explanations: Vec<RenderedExplanation>,
}

fn parse_instance(text: &str) -> Result<PresInstance, String> {
    PresInstance::from_json(text).map_err(|e| format!("instance: {e}"))
}

fn example_instance() -> String {
    scenario_one().to_json()
}

fn generated_instance(agents: usize, seed: u64) -> Result<String, String> {
    generate(&GenConfig::new(agents, seed)).map(|i| i.to_json()).map_err(|e| e.to_string())
}

fn solve(instance: &str, budget_ms: u32) -> Result<String, String> {
    let inst = parse_instance(instance)?;
    let result = solve_lexicographic(&inst, Duration::from_millis(budget_ms.into())).map_err(|e| e.to_string())?;
    Ok(result.to_json(&inst))
}

fn explain_target(
    instance: &str,
    schedule: &str,
    target: &str,
    max: usize,
    anonymize: bool,
    detailed: bool,
    budget_ms: u32,
) -> Result<String, String> {
    let inst = parse_instance(instance)?;
    let sched = read_schedule(&inst, schedule).map_err(|e| format!("schedule: {e}"))?;
    let problem = ExpresProblem::new(&inst, &sched, &PrefId(target.to_string())).map_err(|e| e.to_string())?;
    let list = match enumerate_explanations(&problem, max.max(1), Duration::from_millis(budget_ms.into())) {
        Ok(list) => list,
        Err(ExplainError::NoExplanation { unexplained, .. }) => {
            return Err(format!(
                "no explanation exists: {unexplained} assignment(s) cannot be attributed to a more important preference"
            ))
        }
        Err(e) => return Err(e.to_string()),
    };
    let mode = if detailed { RenderMode::Detailed } else { RenderMode::Aggregated };
    let opts = RenderOptions { mode, anonymize, ..RenderOptions::default() };
    let explanations = list
        .explanations
        .iter()
        .map(|e| {
            Ok(RenderedExplanation {
                objective: e.objective,
                reasons: e.len(),
                text: render(e, &opts, &inst).map_err(|e| e.to_string())?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let response = ExplainResponse { target: target.to_string(), timed_out: list.timed_out(), explanations };
    Ok(serde_json::to_string(&response).expect("responses serialize"))
}

/// The eight-agent example week as instance JSON.
#[wasm_bindgen(js_name = scenarioOne)]
pub fn scenario_one_js() -> String {
    example_instance()
}

/// The unsatisfied preference highlighted in the example week.
#[wasm_bindgen(js_name = scenarioOneTarget)]
pub fn scenario_one_target_js() -> String {
    SCENARIO_ONE_TARGET.to_string()
}

#[wasm_bindgen(js_name = generateInstance)]
pub fn generate_instance_js(agents: usize, seed: u32) -> Result<String, JsError> {
    generated_instance(agents, seed.into()).map_err(|e| JsError::new(&e))
}

/// Returns the serialized schedule with its satisfied and unsatisfied preference ids.
#[wasm_bindgen(js_name = solveSchedule)]
pub fn solve_schedule_js(instance: &str, budget_ms: u32) -> Result<String, JsError> {
    solve(instance, budget_ms).map_err(|e| JsError::new(&e))
}

/// Enumerates up to `max` explanations for `target` and renders each one.
#[wasm_bindgen(js_name = explainPreference)]
pub fn explain_preference_js(
    instance: &str,
    schedule: &str,
    target: &str,
    max: usize,
    anonymize: bool,
    detailed: bool,
    budget_ms: u32,
) -> Result<String, JsError> {
    explain_target(instance, schedule, target, max, anonymize, detailed, budget_ms).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn example_week_round_trip() {
        let inst = example_instance();
        let solved: Value = serde_json::from_str(&solve(&inst, 10_000).unwrap()).unwrap();
        let unsat: Vec<&str> = solved["unsat"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        assert!(unsat.contains(&SCENARIO_ONE_TARGET));
        let out = explain_target(&inst, &solved.to_string(), SCENARIO_ONE_TARGET, 3, true, false, 10_000).unwrap();
        let out: Value = serde_json::from_str(&out).unwrap();
        let list = out["explanations"].as_array().unwrap();
        assert_eq!(list.len(), 3);
        assert_eq!(list[0]["objective"], 8);
        assert!(list[0]["text"].as_str().unwrap().contains("3 employees due to minimum number of days per week"));
        assert!(!list[0]["text"].as_str().unwrap().contains("Alice"));
    }

    #[test]
    fn errors_are_messages() {
        assert!(solve("{}", 1000).unwrap_err().starts_with("instance:"));
        let inst = example_instance();
        let solved = solve(&inst, 10_000).unwrap();
        assert!(explain_target(&inst, &solved, "nobody_pref_mon", 1, false, true, 1000).is_err());
        assert!(generated_instance(0, 1).is_err());
    }

    #[test]
    fn generated_instances_are_deterministic() {
        assert_eq!(generated_instance(10, 3).unwrap(), generated_instance(10, 3).unwrap());
    }
}
