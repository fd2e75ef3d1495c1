//! Implementations of the four subcommands.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use beamqopt::classical::{solve_exact, solve_greedy, SolveResult};
use beamqopt::metrics::{hamming_profile, success_probability, BasisDistribution, ProfileOptions};
use beamqopt::model::{check_feasibility, repair_schedule, weighted_throughput};
use beamqopt::quantum::histogram_csv;
use beamqopt::quantum::{
    init_ry_capped, init_uniform_capped, layerwise_train_capped, phis_from_bits, run_ansatz,
    sample, spsa_optimize, EnergyEval, MixerSpec, QaoaParams, SpsaConfig, Statevector,
    DEFAULT_QUBIT_CAP,
};
use beamqopt::qubo::{
    brute_force_argmin, brute_force_minimizers, build_qubo_verbose, default_lambdas,
    load_qubo_files, save_qubo_files, BitString, QuboModel,
};
use beamqopt::scenario::{
    generate_scenario, rescale_scenario, ProfileKind, Scenario, TrafficProfile,
};

use crate::{
    BuildArgs, GenerateArgs, MixerArg, PhisArg, ProfileArg, SolveArgs, SolverArg, VerifyArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or malformed inputs -> exit 2.
    Usage(String),
    /// Problem size over a hard cap -> exit 3.
    Capacity(String),
    /// A verification check failed -> exit 1.
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Capacity(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Capacity(msg) | CliError::Verification(msg) => {
                write!(f, "{msg}")
            }
        }
    }
}

impl From<beamqopt::Error> for CliError {
    fn from(err: beamqopt::Error) -> CliError {
        match err {
            beamqopt::Error::Capacity { .. } => CliError::Capacity(err.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::Usage(err.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn qubit_cap() -> usize {
    std::env::var("BEAMQOPT_MAX_QUBITS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_QUBIT_CAP)
}

pub fn generate(args: &GenerateArgs) -> CliResult {
    let kind = match args.profile {
        ProfileArg::Uniform => ProfileKind::Uniform,
        ProfileArg::Hotspot => ProfileKind::Hotspot,
        ProfileArg::Mixed => ProfileKind::MixedPriority,
    };
    let mut profile = TrafficProfile::new(kind, args.flows, args.units, args.beams);
    profile.volume_range = (args.volume_min, args.volume_max);
    profile.rate_range = (args.rate_min, args.rate_max);
    profile.weight_levels = args.weights.clone();
    profile.hot_fraction = args.hot_fraction;
    profile.correlated_weights = args.correlated_weights;
    profile.dq = args.dq;
    profile.dp = args.dp;

    let scenario = generate_scenario(&profile, args.seed)?;
    scenario.save(&args.out)?;
    println!(
        "scenario: {} flows, {} units, {} slots -> {}",
        scenario.flows.len(),
        scenario.units.len(),
        scenario.slots().len(),
        args.out.display()
    );
    Ok(())
}

pub fn build(args: &BuildArgs) -> CliResult {
    let mut scenario = Scenario::load(&args.scenario)?;
    if let Some(dq) = args.dq {
        scenario.dq = dq;
    }
    if let Some(dp) = args.dp {
        scenario.dp = dp;
    }
    if let Some(factor) = args.rescale {
        scenario = rescale_scenario(&scenario, factor)?;
    }

    let lambdas = match (args.lambda1, args.lambda2, args.lambda3) {
        (Some(l1), Some(l2), Some(l3)) => (l1, l2, l3),
        (None, None, None) => default_lambdas(&scenario),
        _ => {
            return Err(CliError::Usage(
                "give all of --lambda1/--lambda2/--lambda3 or none".into(),
            ))
        }
    };

    let (model, warnings) = build_qubo_verbose(&scenario, lambdas)?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    save_qubo_files(&model, &args.out)?;

    let decision = model.index.decision_bits();
    let power: usize = model.index.power_slack.len();
    let queue: usize = model.index.queue_slack.len();
    println!(
        "qubits: {} = {decision} decision + {power} power slack + {queue} queue slack",
        model.n
    );
    for slot in scenario.slots() {
        println!(
            "slot {slot}: {} power slack bits",
            model.index.power_slack_bits(slot)
        );
    }
    for flow in &scenario.flows {
        println!(
            "flow {}: {} queue slack bits",
            flow.id,
            model.index.queue_slack_bits(flow.id)
        );
    }
    println!("lambda: {} {} {}", lambdas.0, lambdas.1, lambdas.2);
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn solve(args: &SolveArgs) -> CliResult {
    let scenario = Scenario::load(&args.scenario)?;
    fs::create_dir_all(&args.out_dir)?;

    match args.solver {
        SolverArg::Exact => {
            let result = solve_exact(&scenario, args.node_limit)?;
            write_classical_outputs(&scenario, &result, &args.out_dir, "")?;
            println!(
                "exact: objective {} ({} nodes, optimal: {})",
                result.objective, result.nodes_explored, result.optimal
            );
        }
        SolverArg::Greedy => {
            let result = solve_greedy(&scenario)?;
            write_classical_outputs(&scenario, &result, &args.out_dir, "")?;
            println!("greedy: objective {}", result.objective);
        }
        SolverArg::Qaoa | SolverArg::Layerwise => {
            let qubo_path = args.qubo.as_ref().ok_or_else(|| {
                CliError::Usage("--qubo is required for the quantum solvers".into())
            })?;
            let model = load_qubo_files(qubo_path)?;
            let cap = qubit_cap();
            if model.n > cap {
                return Err(CliError::Capacity(format!(
                    "QUBO has {} qubits, cap is {cap} (set BEAMQOPT_MAX_QUBITS to raise it)",
                    model.n
                )));
            }

            let seeds: Vec<u64> = (0..args.repeats)
                .map(|i| args.seed.wrapping_add(i))
                .collect();
            let runs: Vec<(u64, QuantumRun)> = if seeds.len() == 1 {
                vec![(
                    seeds[0],
                    run_quantum(&scenario, &model, args, seeds[0], cap)?,
                )]
            } else {
                // Independent seeds fan out across worker threads.
                std::thread::scope(|scope| {
                    let handles: Vec<_> = seeds
                        .iter()
                        .map(|&seed| {
                            let (s, m) = (&scenario, &model);
                            scope.spawn(move || (seed, run_quantum(s, m, args, seed, cap)))
                        })
                        .collect();
                    handles
                        .into_iter()
                        .map(|h| {
                            let (seed, run) = h.join().expect("worker panicked");
                            run.map(|r| (seed, r))
                        })
                        .collect::<Result<Vec<_>, CliError>>()
                })?
            };

            for (seed, run) in &runs {
                let suffix = if args.repeats > 1 {
                    format!("_seed{seed}")
                } else {
                    String::new()
                };
                write_quantum_outputs(run, &args.out_dir, &suffix)?;
                for line in &run.summary {
                    println!("{line}");
                }
            }
        }
    }
    Ok(())
}

fn write_classical_outputs(
    s: &Scenario,
    result: &SolveResult,
    dir: &Path,
    suffix: &str,
) -> CliResult {
    let json = serde_json::to_string_pretty(&result.to_json_value())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(dir.join(format!("result{suffix}.json")), json)?;
    fs::write(
        dir.join(format!("schedule{suffix}.txt")),
        result.schedule.to_string(),
    )?;
    let report = check_feasibility(s, &result.schedule)?;
    let report_json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Usage(e.to_string()))?;
    fs::write(dir.join(format!("feasibility{suffix}.json")), report_json)?;
    Ok(())
}

struct QuantumRun {
    result_json: String,
    schedule_text: String,
    feasibility_json: String,
    trace_csv: String,
    histogram_csv: String,
    profile_csv: String,
    summary: Vec<String>,
}

fn prepare_init(
    s: &Scenario,
    model: &QuboModel,
    args: &SolveArgs,
    cap: usize,
) -> Result<(MixerSpec, Statevector), CliError> {
    match args.mixer {
        MixerArg::X => Ok((MixerSpec::TransverseX, init_uniform_capped(model.n, cap)?)),
        MixerArg::Ry => {
            let phis = match args.phis {
                PhisArg::Greedy => {
                    let greedy = solve_greedy(s)?;
                    phis_from_bits(&model.encode(s, &greedy.schedule)?)
                }
                PhisArg::Plus => vec![std::f64::consts::FRAC_PI_2; model.n],
                PhisArg::Zeros => vec![0.0; model.n],
            };
            let init = init_ry_capped(&phis, cap)?;
            Ok((MixerSpec::RotatedRy { phis }, init))
        }
    }
}

fn run_quantum(
    s: &Scenario,
    model: &QuboModel,
    args: &SolveArgs,
    seed: u64,
    cap: usize,
) -> Result<QuantumRun, CliError> {
    let started = Instant::now();
    let eval = if args.exact_expectation {
        EnergyEval::Exact
    } else {
        EnergyEval::Sampled { shots: args.shots }
    };
    let cfg = SpsaConfig::default();
    let (mixer, init) = prepare_init(s, model, args, cap)?;

    let (best_params, trace) = match args.solver {
        SolverArg::Qaoa => {
            let layers = args.layers.unwrap_or(1);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start = QaoaParams::random(layers, &mut rng);
            let spsa_seed = rng.gen::<u64>();
            spsa_optimize(
                model,
                &init,
                &mixer,
                &start,
                &vec![true; 2 * layers],
                args.iters,
                eval,
                &cfg,
                spsa_seed,
            )?
        }
        SolverArg::Layerwise => {
            let p_max = args.layers.unwrap_or(3);
            layerwise_train_capped(model, p_max, &mixer, args.iters, eval, &cfg, seed, cap)?
        }
        _ => unreachable!("classical solvers handled by the caller"),
    };

    let final_state = run_ansatz(model, &best_params, &init, &mixer)?;
    let histogram = sample(&final_state, args.shots, seed)?;
    let exact = solve_exact(s, args.node_limit)?;
    let (optimum_bits, _) = brute_force_argmin(model)?;
    let profile = hamming_profile(
        &BasisDistribution::from_statevector(&final_state),
        model,
        s,
        &optimum_bits,
        ProfileOptions {
            decision_bits_only: !args.profile_full_bits,
            repair: !args.profile_no_repair,
        },
    )?;

    let top = final_state.most_probable();
    let decoded = model.decode(&BitString::from_index(top, model.n))?;
    let schedule = repair_schedule(s, &decoded);
    let objective = weighted_throughput(s, &schedule)?;
    let feasibility = check_feasibility(s, &schedule)?;
    let success = success_probability(&final_state, model)?;
    let final_energy = trace.energies.last().copied().unwrap_or(f64::NAN);
    let matches_exact = (objective - exact.objective).abs() <= 1e-9 * (1.0 + exact.objective.abs());

    let mut summary = Vec::new();
    match args.solver {
        SolverArg::Layerwise => {
            for (depth, energy) in trace.best_energy_per_layer.iter().enumerate() {
                summary.push(format!("depth {}: best energy {energy}", depth + 1));
            }
        }
        _ => summary.push(format!("final energy {final_energy}")),
    }
    summary.push(format!(
        "seed {seed}: objective {objective} (exact {}), ground-state probability {success:.6}",
        exact.objective
    ));

    let schedule_map: std::collections::BTreeMap<String, Vec<usize>> = schedule
        .assignments
        .iter()
        .map(|(k, units)| (k.to_string(), units.iter().copied().collect()))
        .collect();
    let result_json = serde_json::to_string_pretty(&serde_json::json!({
        "schedule": schedule_map,
        "objective": objective,
        "optimal": matches_exact,
        "nodes_explored": 0,
        "wall_time_ms": started.elapsed().as_secs_f64() * 1e3,
        "final_energy": final_energy,
        "success_probability": success,
        "exact_objective": exact.objective,
        "layers": best_params.layers(),
    }))
    .map_err(|e| CliError::Usage(e.to_string()))?;

    let feasibility_json =
        serde_json::to_string_pretty(&feasibility).map_err(|e| CliError::Usage(e.to_string()))?;

    Ok(QuantumRun {
        result_json,
        schedule_text: schedule.to_string(),
        feasibility_json,
        trace_csv: trace.to_csv(),
        histogram_csv: histogram_csv(&histogram, args.shots, model.n),
        profile_csv: profile.to_csv(),
        summary,
    })
}

fn write_quantum_outputs(run: &QuantumRun, dir: &Path, suffix: &str) -> CliResult {
    fs::write(dir.join(format!("result{suffix}.json")), &run.result_json)?;
    fs::write(
        dir.join(format!("schedule{suffix}.txt")),
        &run.schedule_text,
    )?;
    fs::write(
        dir.join(format!("feasibility{suffix}.json")),
        &run.feasibility_json,
    )?;
    fs::write(dir.join(format!("trace{suffix}.csv")), &run.trace_csv)?;
    fs::write(
        dir.join(format!("histogram{suffix}.csv")),
        &run.histogram_csv,
    )?;
    fs::write(
        dir.join(format!("hamming_profile{suffix}.csv")),
        &run.profile_csv,
    )?;
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> CliResult {
    let scenario = Scenario::load(&args.scenario)?;
    let model = load_qubo_files(&args.qubo)?;
    const VERIFY_CAP: usize = 20;
    if model.n > VERIFY_CAP {
        return Err(CliError::Capacity(format!(
            "verification enumerates all bitstrings; {} qubits exceeds the cap of {VERIFY_CAP}",
            model.n
        )));
    }

    let exact = solve_exact(&scenario, u64::MAX)?;
    let minimizers = brute_force_minimizers(&model, 1e-9)?;
    let mut failures = Vec::new();
    for &z in &minimizers {
        let bits = BitString::from_index(z, model.n);
        let schedule = model.decode(&bits)?;
        let report = check_feasibility(&scenario, &schedule)?;
        let throughput = weighted_throughput(&scenario, &schedule)?;
        let optimal = (throughput - exact.objective).abs() <= 1e-9 * (1.0 + exact.objective.abs());
        if !report.feasible || !optimal {
            failures.push(format!(
                "minimizer {bits}: feasible={}, throughput={throughput} (optimum {})",
                report.feasible, exact.objective
            ));
        }
    }

    println!(
        "checked {} minimizer(s) against the exact optimum {}",
        minimizers.len(),
        exact.objective
    );
    if failures.is_empty() {
        println!("ok: every minimizer decodes to a feasible optimal schedule");
        Ok(())
    } else {
        for line in &failures {
            println!("{line}");
        }
        Err(CliError::Verification(format!(
            "{} of {} minimizers violate feasibility or optimality",
            failures.len(),
            minimizers.len()
        )))
    }
}
