//! Shared setup helpers for the criterion benches.

use rhospan_core::experiments::{build_setup, Scenario, ScenarioSetup};

/// A scenario-1 style setup (general difference penalty, uneven knots) at
/// the given size, deterministic in `seed`.
pub fn bench_setup(p: usize, seed: u64) -> ScenarioSetup {
    let scenario = Scenario::from_id(1).expect("valid id");
    build_setup(scenario, p, 4, 2, seed).expect("benchmark setup is well posed")
}
