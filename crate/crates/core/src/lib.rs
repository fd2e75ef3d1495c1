//! Hybrid quantum-classical optimization toolkit for multi-beam satellite
//! flow scheduling.
//!
//! The scheduling task maps data flows onto (beam, frequency, slot) resource
//! units so that priority-weighted throughput is maximized subject to unit
//! exclusivity, per-slot power budgets, and per-flow queue capacities. The
//! crate covers the full pipeline:
//!
//! - [`scenario`]: problem instances, synthetic traffic generation, and
//!   parameter rescaling.
//! - [`model`]: the constrained objective, feasibility checking, and the
//!   repair heuristic.
//! - [`qubo`]: penalty-form QUBO compilation with quantized slack bits.
//! - [`classical`]: exact branch-and-bound and greedy baselines.
//! - [`quantum`]: an exact statevector QAOA engine with hill-climbing
//!   parameter search and layer-wise depth extension.
//! - [`metrics`]: throughput ratios, Hamming-distance profiles, and
//!   success probabilities.

pub mod classical;
pub mod error;
pub mod metrics;
pub mod model;
pub mod quantum;
pub mod qubo;
pub mod scenario;

pub use error::Error;
pub use model::{FeasibilityReport, Schedule};
pub use quantum::{MixerSpec, OptimizationTrace, QaoaParams, Statevector};
pub use qubo::{BitString, QuboModel, VariableIndex};
pub use scenario::{Flow, ProfileKind, ResourceUnit, Scenario, TrafficProfile};

/// Shorthand for results carrying the crate error type.
pub type Result<T> = std::result::Result<T, Error>;
