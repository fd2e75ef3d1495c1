//! Exact statevector QAOA engine.
//!
//! [`state`] holds the statevector and circuit operations (cost phase,
//! transverse-X and rotated-Ry mixers, sampling); [`optimize`] holds the
//! accept-if-better hill-climbing parameter search and the layer-wise
//! depth-extension protocol.

pub mod optimize;
pub mod state;

pub use optimize::{
    layerwise_train, layerwise_train_capped, spsa_optimize, spsa_optimize_with_energies,
    EnergyEval, OptimizationTrace, QaoaParams, SpsaConfig,
};
pub use state::{
    apply_cost, apply_cost_with_energies, apply_mixer, expectation, expectation_exact,
    expectation_sampled, histogram_csv, init_ry, init_ry_capped, init_uniform, init_uniform_capped,
    phis_from_bits, run_ansatz, run_ansatz_with_energies, sample, Histogram, MixerSpec,
    Statevector, DEFAULT_QUBIT_CAP,
};
