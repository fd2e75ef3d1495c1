//! Shared fixtures for the criterion benchmarks.

use beamqopt::qubo::{build_qubo, default_lambdas, QuboModel};
use beamqopt::scenario::{generate_scenario, ProfileKind, Scenario, TrafficProfile};

/// A scenario sized so its QUBO lands near `target_bits` qubits.
pub fn bench_scenario(flows: usize, units: usize, seed: u64) -> Scenario {
    let mut profile = TrafficProfile::new(ProfileKind::Uniform, flows, units, 2);
    profile.volume_range = (1, 2);
    profile.rate_range = (1, 2);
    generate_scenario(&profile, seed).expect("bench scenario generates")
}

pub fn bench_qubo(flows: usize, units: usize, seed: u64) -> (Scenario, QuboModel) {
    let s = bench_scenario(flows, units, seed);
    let q = build_qubo(&s, default_lambdas(&s)).expect("bench qubo builds");
    (s, q)
}
