//! Solution-quality metrics: Hamming distance to the optimum, throughput
//! ratios against the exact solver, distance-resolved probability and
//! throughput-gap profiles, and ground-state success probability.

use crate::error::Error;
use crate::model::{repair_schedule, weighted_throughput, Schedule};
use crate::quantum::{Histogram, Statevector};
use crate::qubo::{energy_table, BitString, QuboModel};
use crate::scenario::Scenario;
use crate::Result;

/// Number of bit positions at which two strings differ.
pub fn hamming_distance(a: &BitString, b: &BitString) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "hamming distance needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.bits()
        .iter()
        .zip(b.bits())
        .filter(|(x, y)| x != y)
        .count())
}

/// Candidate throughput relative to the verified optimum (the optimum is
/// 100%). A zero-throughput optimum only admits zero-throughput candidates.
pub fn throughput_ratio(s: &Scenario, candidate: &Schedule, optimum: &Schedule) -> Result<f64> {
    let top = weighted_throughput(s, optimum)?;
    let own = weighted_throughput(s, candidate)?;
    if top == 0.0 {
        if own == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::domain(
            "throughput ratio is undefined against a zero-throughput optimum",
        ));
    }
    Ok(own / top)
}

/// Probability mass and best-achievable throughput by Hamming distance
/// from the reference optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct HammingProfile {
    pub distances: Vec<usize>,
    pub probability_mass: Vec<f64>,
    /// Reference throughput minus the best decoded (and optionally
    /// repaired) throughput among all bit patterns at each distance.
    pub min_throughput_gap: Vec<f64>,
}

impl HammingProfile {
    /// `distance,probability,min_throughput_gap` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("distance,probability,min_throughput_gap\n");
        for ((&d, &p), &g) in self
            .distances
            .iter()
            .zip(&self.probability_mass)
            .zip(&self.min_throughput_gap)
        {
            out.push_str(&format!("{d},{p},{g}\n"));
        }
        out
    }
}

/// A probability distribution over basis states, from either an exact
/// statevector or a shot histogram.
#[derive(Debug, Clone)]
pub struct BasisDistribution {
    entries: Vec<(u64, f64)>,
    n: usize,
}

impl BasisDistribution {
    pub fn from_statevector(v: &Statevector) -> BasisDistribution {
        BasisDistribution {
            entries: v
                .probabilities()
                .into_iter()
                .enumerate()
                .filter(|(_, p)| *p > 0.0)
                .map(|(z, p)| (z as u64, p))
                .collect(),
            n: v.qubit_count(),
        }
    }

    pub fn from_histogram(hist: &Histogram, shots: u64, n: usize) -> BasisDistribution {
        BasisDistribution {
            entries: hist
                .iter()
                .map(|(&z, &c)| (z, c as f64 / shots as f64))
                .collect(),
            n,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    /// Measure distance over decision bits only (slack bits are encoding
    /// artifacts); set false to use the full bitstring.
    pub decision_bits_only: bool,
    /// Repair decoded schedules before computing throughput gaps.
    pub repair: bool,
}

impl Default for ProfileOptions {
    fn default() -> ProfileOptions {
        ProfileOptions {
            decision_bits_only: true,
            repair: true,
        }
    }
}

/// Enumeration guard for the per-distance throughput sweep.
const PROFILE_DECISION_CAP: usize = 20;

/// Aggregates probability mass by Hamming distance to `optimum_bits` and
/// records, per distance, the gap between the reference throughput and the
/// best decoded-and-repaired schedule at that distance. The gap sweep runs
/// over all decision patterns, so it reflects the instance's landscape
/// rather than the sampled support.
pub fn hamming_profile(
    dist: &BasisDistribution,
    q: &QuboModel,
    s: &Scenario,
    optimum_bits: &BitString,
    opts: ProfileOptions,
) -> Result<HammingProfile> {
    if optimum_bits.len() != q.n || dist.n != q.n {
        return Err(Error::domain(format!(
            "profile inputs disagree: model {} bits, optimum {}, distribution {}",
            q.n,
            optimum_bits.len(),
            dist.n
        )));
    }
    let d = q.index.decision_bits();
    if d > PROFILE_DECISION_CAP {
        return Err(Error::Capacity {
            what: "hamming profile decision bits",
            requested: d,
            cap: PROFILE_DECISION_CAP,
        });
    }

    let opt_index = optimum_bits.to_index();
    let decision_mask: u64 = if d == 64 { u64::MAX } else { (1u64 << d) - 1 };
    let span = if opts.decision_bits_only { d } else { q.n };

    let mut mass = vec![0.0; span + 1];
    for &(z, p) in &dist.entries {
        let diff = if opts.decision_bits_only {
            (z ^ opt_index) & decision_mask
        } else {
            z ^ opt_index
        };
        mass[diff.count_ones() as usize] += p;
    }

    // Best throughput among decision patterns grouped by decision distance.
    let throughput_of = |pattern: u64| -> Result<f64> {
        let mut padded = BitString::zeros(q.n);
        for bit in 0..d {
            if pattern >> bit & 1 == 1 {
                padded.set(bit, true);
            }
        }
        let mut sched = q.decode(&padded)?;
        if opts.repair {
            sched = repair_schedule(s, &sched);
        }
        weighted_throughput(s, &sched)
    };
    let reference = throughput_of(opt_index & decision_mask)?;

    let mut best_by_decision_distance = vec![f64::NEG_INFINITY; d + 1];
    for pattern in 0..(1u64 << d) {
        let h = ((pattern ^ opt_index) & decision_mask).count_ones() as usize;
        let t = throughput_of(pattern)?;
        if t > best_by_decision_distance[h] {
            best_by_decision_distance[h] = t;
        }
    }

    let slack_bits = q.n - d;
    let gaps: Vec<f64> = (0..=span)
        .map(|h| {
            if opts.decision_bits_only {
                reference - best_by_decision_distance[h]
            } else {
                // A full-bit distance h admits decision distances j with
                // h - slack_bits <= j <= min(h, d).
                let lo = h.saturating_sub(slack_bits);
                let hi = h.min(d);
                let best = (lo..=hi)
                    .map(|j| best_by_decision_distance[j])
                    .fold(f64::NEG_INFINITY, f64::max);
                reference - best
            }
        })
        .collect();

    Ok(HammingProfile {
        distances: (0..=span).collect(),
        probability_mass: mass,
        min_throughput_gap: gaps,
    })
}

/// Total probability on basis states attaining the minimum energy
/// (within 1e-9 relative).
pub fn success_probability(v: &Statevector, q: &QuboModel) -> Result<f64> {
    if v.qubit_count() != q.n {
        return Err(Error::domain(format!(
            "state has {} qubits but model has {} variables",
            v.qubit_count(),
            q.n
        )));
    }
    let energies = energy_table(q)?;
    let min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let slack = 1e-9 * (1.0 + min.abs());
    Ok(v.probabilities()
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| e <= min + slack)
        .map(|(p, _)| p)
        .sum())
}
