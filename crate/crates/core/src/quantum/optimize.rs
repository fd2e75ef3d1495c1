//! Classical parameter search for the QAOA ansatz.
//!
//! The optimizer is a random-search hill climber: each iteration perturbs
//! the free parameters uniformly within a shrinking radius and adopts the
//! candidate iff its measured energy strictly improves on the incumbent.
//! Layer-wise training grows the circuit one layer at a time, freezing the
//! angles already found and starting the new layer at (0, 0) so the
//! extended circuit reproduces the previous optimum exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::Error;
use crate::qubo::{energy_table, QuboModel};
use crate::Result;

use super::state::{
    expectation_exact, expectation_sampled, init_ry_capped, init_uniform_capped,
    run_ansatz_with_energies, MixerSpec, Statevector, DEFAULT_QUBIT_CAP,
};

/// Variational angles for a `p`-layer ansatz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaParams {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaParams {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> QaoaParams {
        QaoaParams { gammas, betas }
    }

    pub fn layers(&self) -> usize {
        self.gammas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gammas.len() != self.betas.len() || self.gammas.is_empty() {
            return Err(Error::domain(format!(
                "need matching non-empty angle vectors, got {} gammas and {} betas",
                self.gammas.len(),
                self.betas.len()
            )));
        }
        Ok(())
    }

    /// Random start: mixer angles uniform in [-pi, pi), cost angles in a
    /// small window so the first phase layer starts inside its first
    /// oscillation. Penalty terms make the energy spread large, and a cost
    /// angle of order one scrambles the phases beyond what the hill
    /// climber can recover from.
    pub fn random(layers: usize, rng: &mut ChaCha8Rng) -> QaoaParams {
        const GAMMA_WINDOW: f64 = 0.3;
        QaoaParams {
            gammas: (0..layers)
                .map(|_| rng.gen_range(-GAMMA_WINDOW..GAMMA_WINDOW))
                .collect(),
            betas: (0..layers).map(|_| rng.gen_range(-PI..PI)).collect(),
        }
    }
}

/// How the optimizer measures a candidate's energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyEval {
    /// Full statevector expectation.
    Exact,
    /// Shot-sampled estimate; acceptance uses the sampled values as-is.
    Sampled { shots: u64 },
}

impl EnergyEval {
    fn shots(&self) -> u64 {
        match self {
            EnergyEval::Exact => 0,
            EnergyEval::Sampled { shots } => *shots,
        }
    }
}

/// Proposal distribution for the hill climber. Most iterations perturb the
/// incumbent's free parameters uniformly in `[-a_t, a_t]` with
/// `a_t = initial_step / (1 + t)^decay`; with probability `restart_prob`
/// the free parameters are instead redrawn fresh (cost angles within
/// `gamma_window`, mixer angles within `beta_window`), which lets the
/// accept-if-better rule escape local minima in the oscillatory cost-angle
/// landscape.
#[derive(Debug, Clone, Copy)]
pub struct SpsaConfig {
    pub initial_step: f64,
    pub decay: f64,
    pub restart_prob: f64,
    pub gamma_window: f64,
    pub beta_window: f64,
}

impl Default for SpsaConfig {
    fn default() -> SpsaConfig {
        SpsaConfig {
            initial_step: 0.5,
            decay: 0.3,
            restart_prob: 0.4,
            gamma_window: 0.3,
            beta_window: PI,
        }
    }
}

/// Per-iteration record of an optimization run. `energies[t]` is the
/// incumbent energy after iteration `t`, so the sequence is non-increasing
/// under exact evaluation.
#[derive(Debug, Clone, Default)]
pub struct OptimizationTrace {
    pub energies: Vec<f64>,
    pub accepted: Vec<bool>,
    pub depths: Vec<usize>,
    /// Best parameters at each completed depth (layer-wise runs).
    pub params_per_layer: Vec<QaoaParams>,
    /// Incumbent energy at each completed depth.
    pub best_energy_per_layer: Vec<f64>,
    /// Shots per energy evaluation, 0 for exact expectation.
    pub shots_per_eval: u64,
}

impl OptimizationTrace {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// `iteration,energy,accepted,depth` rows, iterations numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,energy,accepted,depth\n");
        for (t, ((&e, &a), &d)) in self
            .energies
            .iter()
            .zip(&self.accepted)
            .zip(&self.depths)
            .enumerate()
        {
            out.push_str(&format!("{},{e},{a},{d}\n", t + 1));
        }
        out
    }

    fn extend(&mut self, other: OptimizationTrace) {
        self.energies.extend(other.energies);
        self.accepted.extend(other.accepted);
        self.depths.extend(other.depths);
    }
}

/// Hill-climbing search over the free parameters. The mask is ordered
/// `[gamma_1, beta_1, gamma_2, beta_2, ...]`; masked parameters stay
/// frozen. A perturbed candidate is adopted iff its energy is strictly
/// lower than the incumbent's. Returns the best parameters and the trace.
#[allow(clippy::too_many_arguments)]
pub fn spsa_optimize(
    q: &QuboModel,
    init: &Statevector,
    mixer: &MixerSpec,
    start: &QaoaParams,
    free_mask: &[bool],
    iters: usize,
    eval: EnergyEval,
    cfg: &SpsaConfig,
    seed: u64,
) -> Result<(QaoaParams, OptimizationTrace)> {
    let energies = energy_table(q)?;
    spsa_optimize_with_energies(
        &energies, init, mixer, start, free_mask, iters, eval, cfg, seed,
    )
}

/// [`spsa_optimize`] with the energy table precomputed.
#[allow(clippy::too_many_arguments)]
pub fn spsa_optimize_with_energies(
    energies: &[f64],
    init: &Statevector,
    mixer: &MixerSpec,
    start: &QaoaParams,
    free_mask: &[bool],
    iters: usize,
    eval: EnergyEval,
    cfg: &SpsaConfig,
    seed: u64,
) -> Result<(QaoaParams, OptimizationTrace)> {
    start.validate()?;
    if iters < 1 {
        return Err(Error::domain("iteration count must be at least 1"));
    }
    if free_mask.len() != 2 * start.layers() {
        return Err(Error::domain(format!(
            "free mask has {} entries for {} parameters",
            free_mask.len(),
            2 * start.layers()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measure = |params: &QaoaParams, rng: &mut ChaCha8Rng| -> Result<f64> {
        let eval_seed = rng.gen::<u64>();
        let state = run_ansatz_with_energies(energies, params, init, mixer)?;
        match eval {
            EnergyEval::Exact => Ok(expectation_exact(&state, energies)),
            EnergyEval::Sampled { shots } => {
                expectation_sampled(&state, energies, shots, eval_seed)
            }
        }
    };

    let mut incumbent = start.clone();
    let mut incumbent_energy = measure(&incumbent, &mut rng)?;
    let mut trace = OptimizationTrace {
        shots_per_eval: eval.shots(),
        ..OptimizationTrace::default()
    };

    for t in 0..iters {
        let step = cfg.initial_step / (1.0 + t as f64).powf(cfg.decay);
        let restart = cfg.restart_prob > 0.0 && rng.gen_bool(cfg.restart_prob);
        let mut candidate = incumbent.clone();
        for (idx, &free) in free_mask.iter().enumerate() {
            if !free {
                continue;
            }
            let layer = idx / 2;
            let slot = if idx % 2 == 0 {
                &mut candidate.gammas[layer]
            } else {
                &mut candidate.betas[layer]
            };
            if restart {
                let window = if idx % 2 == 0 {
                    cfg.gamma_window
                } else {
                    cfg.beta_window
                };
                *slot = rng.gen_range(-window..window);
            } else {
                *slot += rng.gen_range(-step..=step);
            }
        }

        let candidate_energy = measure(&candidate, &mut rng)?;
        let accept = candidate_energy < incumbent_energy;
        if accept {
            incumbent = candidate;
            incumbent_energy = candidate_energy;
        }
        trace.energies.push(incumbent_energy);
        trace.accepted.push(accept);
        trace.depths.push(incumbent.layers());
    }

    trace.params_per_layer.push(incumbent.clone());
    trace.best_energy_per_layer.push(incumbent_energy);
    Ok((incumbent, trace))
}

/// Layer-wise training: optimize a random 1-layer circuit, then repeatedly
/// append a (0, 0) layer, freeze everything found so far, and optimize only
/// the new pair up to `p_max` layers. The zero-initialized layer reproduces
/// the previous state exactly, so under exact evaluation the per-depth best
/// energies never increase.
pub fn layerwise_train(
    q: &QuboModel,
    p_max: usize,
    mixer: &MixerSpec,
    iters_per_layer: usize,
    eval: EnergyEval,
    cfg: &SpsaConfig,
    seed: u64,
) -> Result<(QaoaParams, OptimizationTrace)> {
    layerwise_train_capped(
        q,
        p_max,
        mixer,
        iters_per_layer,
        eval,
        cfg,
        seed,
        DEFAULT_QUBIT_CAP,
    )
}

/// [`layerwise_train`] with an explicit qubit ceiling for the internally
/// prepared initial state.
#[allow(clippy::too_many_arguments)]
pub fn layerwise_train_capped(
    q: &QuboModel,
    p_max: usize,
    mixer: &MixerSpec,
    iters_per_layer: usize,
    eval: EnergyEval,
    cfg: &SpsaConfig,
    seed: u64,
    cap: usize,
) -> Result<(QaoaParams, OptimizationTrace)> {
    if p_max < 1 {
        return Err(Error::domain("maximum depth must be at least 1"));
    }
    let energies = energy_table(q)?;
    let init = match mixer {
        MixerSpec::TransverseX => init_uniform_capped(q.n, cap)?,
        MixerSpec::RotatedRy { phis } => init_ry_capped(phis, cap)?,
    };

    // Seed derivation: the master stream draws the depth-1 start, then one
    // sub-seed per depth, in that order.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = QaoaParams::random(1, &mut rng);
    let mut trace = OptimizationTrace {
        shots_per_eval: eval.shots(),
        ..OptimizationTrace::default()
    };

    for depth in 1..=p_max {
        if depth > 1 {
            params.gammas.push(0.0);
            params.betas.push(0.0);
        }
        let free_mask: Vec<bool> = (0..2 * depth).map(|i| i / 2 == depth - 1).collect();
        let sub_seed = rng.gen::<u64>();
        let (best, sub_trace) = spsa_optimize_with_energies(
            &energies,
            &init,
            mixer,
            &params,
            &free_mask,
            iters_per_layer,
            eval,
            cfg,
            sub_seed,
        )?;
        params = best;
        trace.params_per_layer.push(params.clone());
        trace
            .best_energy_per_layer
            .push(*sub_trace.energies.last().unwrap());
        trace.extend(sub_trace);
    }

    Ok((params, trace))
}
