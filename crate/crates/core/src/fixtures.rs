//! Hand-built instances shipped with the crate.

use crate::model::PresInstance;

pub const SCENARIO_ONE_JSON: &str = include_str!("../fixtures/scenario1.json");

/// Edith's unsatisfied wish to come in on Thursday.
pub const SCENARIO_ONE_TARGET: &str = "edith_pref_thu";

/// Eight employees sharing five desks over the week of 15 November 2021.
/// Working groups are expanded into pairwise preferences on one day each.
pub fn scenario_one() -> PresInstance {
    PresInstance::from_json(SCENARIO_ONE_JSON).expect("bundled fixture parses")
}
