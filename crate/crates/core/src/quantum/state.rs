//! Statevector representation and circuit operations.
//!
//! Basis-state index bit `i` is QUBO variable `i`, with bit 0 the least
//! significant index bit. All operations are unitary and preserve the norm
//! to within accumulation error.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::qubo::{energy_table, BitString, QuboModel};
use crate::Result;

/// Default qubit ceiling: 2^24 complex doubles is about 256 MB.
pub const DEFAULT_QUBIT_CAP: usize = 24;

/// Measurement histogram: basis-state index to shot count.
pub type Histogram = BTreeMap<u64, u64>;

/// Mixer family for the QAOA ansatz.
#[derive(Debug, Clone, PartialEq)]
pub enum MixerSpec {
    /// Transverse field `exp(-i beta X_j)` on every qubit.
    TransverseX,
    /// `Ry(phi_j) Rz(beta) Ry(-phi_j)` on qubit `j`; the product state
    /// prepared from the same angles is a fixed point of this mixer.
    RotatedRy { phis: Vec<f64> },
}

/// Maps a classical bitstring to rotated-Ry angles: 0 for a clear bit,
/// pi for a set bit, so `init_ry` reproduces the bitstring exactly.
pub fn phis_from_bits(x: &BitString) -> Vec<f64> {
    x.bits()
        .iter()
        .map(|&b| if b { std::f64::consts::PI } else { 0.0 })
        .collect()
}

/// A normalized complex amplitude vector over 2^n basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    amps: Vec<Complex64>,
    n: usize,
}

impl Statevector {
    /// Wraps raw amplitudes; the length must be a power of two and the
    /// norm must already be 1 within 1e-6.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Statevector> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(Error::domain("amplitude count must be a power of two"));
        }
        let n = amps.len().trailing_zeros() as usize;
        let v = Statevector { amps, n };
        if (v.norm() - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!("state norm {} is not 1", v.norm())));
        }
        Ok(v)
    }

    pub fn qubit_count(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probability(&self, z: u64) -> f64 {
        self.amps[z as usize].norm_sqr()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|<self|other>|`.
    pub fn fidelity(&self, other: &Statevector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm()
    }

    /// Basis state with the largest probability, lowest index on ties.
    pub fn most_probable(&self) -> u64 {
        let mut best = 0usize;
        for (z, a) in self.amps.iter().enumerate() {
            if a.norm_sqr() > self.amps[best].norm_sqr() {
                best = z;
            }
        }
        best as u64
    }
}

fn check_qubit_count(n: usize, cap: usize) -> Result<()> {
    if n < 1 || n > cap {
        return Err(Error::Capacity {
            what: "statevector qubits",
            requested: n,
            cap,
        });
    }
    Ok(())
}

/// Equal superposition of all basis states: every amplitude 2^(-n/2).
pub fn init_uniform(n: usize) -> Result<Statevector> {
    init_uniform_capped(n, DEFAULT_QUBIT_CAP)
}

pub fn init_uniform_capped(n: usize, cap: usize) -> Result<Statevector> {
    check_qubit_count(n, cap)?;
    let amp = Complex64::new(0.5f64.powf(n as f64 / 2.0), 0.0);
    Ok(Statevector {
        amps: vec![amp; 1 << n],
        n,
    })
}

/// Product state `cos(phi_j/2)|0> + sin(phi_j/2)|1>` per qubit.
pub fn init_ry(phis: &[f64]) -> Result<Statevector> {
    init_ry_capped(phis, DEFAULT_QUBIT_CAP)
}

pub fn init_ry_capped(phis: &[f64], cap: usize) -> Result<Statevector> {
    let n = phis.len();
    check_qubit_count(n, cap)?;
    let mut amps = vec![Complex64::new(1.0, 0.0)];
    for (j, &phi) in phis.iter().enumerate() {
        let c = (phi / 2.0).cos();
        let s = (phi / 2.0).sin();
        let mut next = vec![Complex64::new(0.0, 0.0); 1 << (j + 1)];
        for (z, &amp) in amps.iter().enumerate() {
            next[z] = amp * c;
            next[z | 1 << j] = amp * s;
        }
        amps = next;
    }
    Ok(Statevector { amps, n })
}

/// Phases each basis state by its energy: `amp_z *= exp(-i gamma E(z))`.
/// Diagonal, so basis probabilities are unchanged.
pub fn apply_cost(v: &mut Statevector, q: &QuboModel, gamma: f64) -> Result<()> {
    if q.n != v.n {
        return Err(Error::domain(format!(
            "model has {} variables but state has {} qubits",
            q.n, v.n
        )));
    }
    let energies = energy_table(q)?;
    apply_cost_with_energies(v, &energies, gamma)
}

/// Same as [`apply_cost`] with the energy table precomputed.
pub fn apply_cost_with_energies(v: &mut Statevector, energies: &[f64], gamma: f64) -> Result<()> {
    if energies.len() != v.amps.len() {
        return Err(Error::domain(format!(
            "energy table covers {} states but state has {}",
            energies.len(),
            v.amps.len()
        )));
    }
    for (amp, &e) in v.amps.iter_mut().zip(energies) {
        *amp *= Complex64::from_polar(1.0, -gamma * e);
    }
    Ok(())
}

fn apply_single_qubit(v: &mut Statevector, j: usize, u: [[Complex64; 2]; 2]) {
    let step = 1usize << j;
    let len = v.amps.len();
    let mut base = 0usize;
    while base < len {
        for off in 0..step {
            let i0 = base + off;
            let i1 = i0 + step;
            let a0 = v.amps[i0];
            let a1 = v.amps[i1];
            v.amps[i0] = u[0][0] * a0 + u[0][1] * a1;
            v.amps[i1] = u[1][0] * a0 + u[1][1] * a1;
        }
        base += step * 2;
    }
}

/// Applies the mixer to every qubit. The transverse-X mixer is
/// `[[cos b, -i sin b], [-i sin b, cos b]]`; the rotated-Ry mixer is
/// `Ry(phi_j) Rz(beta) Ry(-phi_j)` with `Rz(b) = diag(e^{-ib/2}, e^{ib/2})`.
pub fn apply_mixer(v: &mut Statevector, mixer: &MixerSpec, beta: f64) -> Result<()> {
    match mixer {
        MixerSpec::TransverseX => {
            let (c, s) = (beta.cos(), beta.sin());
            let u = [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ];
            for j in 0..v.n {
                apply_single_qubit(v, j, u);
            }
        }
        MixerSpec::RotatedRy { phis } => {
            if phis.len() != v.n {
                return Err(Error::config(format!(
                    "rotated-Ry mixer has {} angles for {} qubits",
                    phis.len(),
                    v.n
                )));
            }
            let em = Complex64::from_polar(1.0, -beta / 2.0);
            let ep = Complex64::from_polar(1.0, beta / 2.0);
            for (j, &phi) in phis.iter().enumerate() {
                let c = (phi / 2.0).cos();
                let s = (phi / 2.0).sin();
                // Ry(phi) Rz(beta) Ry(-phi), expanded.
                let u = [
                    [c * c * em + s * s * ep, c * s * (em - ep)],
                    [c * s * (em - ep), s * s * em + c * c * ep],
                ];
                apply_single_qubit(v, j, u);
            }
        }
    }
    Ok(())
}

/// Runs the full alternating ansatz: cost phase then mixer, once per layer.
pub fn run_ansatz(
    q: &QuboModel,
    params: &super::QaoaParams,
    init: &Statevector,
    mixer: &MixerSpec,
) -> Result<Statevector> {
    if q.n != init.n {
        return Err(Error::domain(format!(
            "model has {} variables but state has {} qubits",
            q.n, init.n
        )));
    }
    let energies = energy_table(q)?;
    run_ansatz_with_energies(&energies, params, init, mixer)
}

pub fn run_ansatz_with_energies(
    energies: &[f64],
    params: &super::QaoaParams,
    init: &Statevector,
    mixer: &MixerSpec,
) -> Result<Statevector> {
    params.validate()?;
    let mut v = init.clone();
    for (&gamma, &beta) in params.gammas.iter().zip(&params.betas) {
        apply_cost_with_energies(&mut v, energies, gamma)?;
        apply_mixer(&mut v, mixer, beta)?;
    }
    Ok(v)
}

/// Exact expectation of the energy table under the state's distribution.
pub fn expectation_exact(v: &Statevector, energies: &[f64]) -> f64 {
    v.amps
        .iter()
        .zip(energies)
        .map(|(a, &e)| a.norm_sqr() * e)
        .sum()
}

/// Shot-sampled estimate of the exact expectation; converges at 1/sqrt(shots).
pub fn expectation_sampled(
    v: &Statevector,
    energies: &[f64],
    shots: u64,
    seed: u64,
) -> Result<f64> {
    let hist = sample(v, shots, seed)?;
    let mut total = 0.0;
    for (&z, &count) in &hist {
        total += count as f64 * energies[z as usize];
    }
    Ok(total / shots as f64)
}

/// Energy expectation, exact or shot-sampled per `eval`.
pub fn expectation(
    v: &Statevector,
    q: &QuboModel,
    eval: super::EnergyEval,
    seed: u64,
) -> Result<f64> {
    if q.n != v.n {
        return Err(Error::domain(format!(
            "model has {} variables but state has {} qubits",
            q.n, v.n
        )));
    }
    let energies = energy_table(q)?;
    match eval {
        super::EnergyEval::Exact => Ok(expectation_exact(v, &energies)),
        super::EnergyEval::Sampled { shots } => expectation_sampled(v, &energies, shots, seed),
    }
}

/// Draws `shots` basis states from the measurement distribution.
/// Deterministic per seed.
pub fn sample(v: &Statevector, shots: u64, seed: u64) -> Result<Histogram> {
    if shots < 1 {
        return Err(Error::domain("shot count must be at least 1"));
    }
    let mut cumulative = Vec::with_capacity(v.amps.len());
    let mut acc = 0.0;
    for a in &v.amps {
        acc += a.norm_sqr();
        cumulative.push(acc);
    }
    let total = acc;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = Histogram::new();
    for _ in 0..shots {
        let r: f64 = rng.gen_range(0.0..total);
        let z = cumulative
            .partition_point(|&c| c <= r)
            .min(v.amps.len() - 1);
        *hist.entry(z as u64).or_insert(0) += 1;
    }
    Ok(hist)
}

/// `bitstring,probability` CSV of a histogram, rows ordered by basis index.
pub fn histogram_csv(hist: &Histogram, shots: u64, n: usize) -> String {
    let mut out = String::from("bitstring,probability\n");
    for (&z, &count) in hist {
        let bits = BitString::from_index(z, n);
        out.push_str(&format!("{bits},{}\n", count as f64 / shots as f64));
    }
    out
}
