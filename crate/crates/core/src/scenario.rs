//! Problem instances and synthetic traffic generation.
//!
//! A [`Scenario`] holds the full physical description of one scheduling
//! problem: the flows competing for capacity, the resource units they can be
//! mapped onto, per-slot power budgets, and the slack quanta (`dq`, `dp`)
//! that later control QUBO slack-bit precision.
//!
//! Generated scenarios keep every capacity on the quantization lattice:
//! rates are integer multiples of `dq`, unit powers equal `dp`, power limits
//! are integer multiples of `dp`, and each queue capacity is an integer
//! multiple of the owning flow's base rate. This makes slack closure exact
//! for every feasible schedule and keeps the smallest possible constraint
//! violation no finer than the quantum, so the default penalty weights are
//! provably sufficient on generated instances.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

pub type FlowId = usize;
pub type UnitId = usize;
pub type SlotIdx = usize;

/// One schedulable (beam, frequency, slot) tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceUnit {
    pub id: UnitId,
    pub beam: usize,
    pub frequency: usize,
    pub slot: SlotIdx,
    pub power_required: f64,
}

/// A unidirectional data stream with priority weight, queued backlog, and a
/// per-unit achievable rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: FlowId,
    pub weight: f64,
    pub queue_capacity: f64,
    /// Achievable rate on each resource unit (an entry per unit, 0 allowed).
    pub rates: BTreeMap<UnitId, f64>,
}

/// A complete scheduling problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub flows: Vec<Flow>,
    pub units: Vec<ResourceUnit>,
    /// Maximum total power per time slot.
    pub power_limits: BTreeMap<SlotIdx, f64>,
    /// Queue slack quantum.
    pub dq: f64,
    /// Power slack quantum.
    pub dp: f64,
    /// Seed the instance was generated from, recorded for provenance.
    pub rng_seed: u64,
}

/// Traffic distribution shapes used by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    /// Flows spread over beams so per-beam counts differ by at most one.
    Uniform,
    /// A small set of hot beams carries at least half of the total weight.
    Hotspot,
    /// Flow weights drawn from two disjoint priority bands.
    MixedPriority,
}

/// Generator knobs for one scenario family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficProfile {
    pub kind: ProfileKind,
    pub flow_count: usize,
    pub unit_count: usize,
    pub beam_count: usize,
    /// Queue backlog in whole transmissions at the flow's base rate, inclusive.
    pub volume_range: (u32, u32),
    /// Priority levels weights are drawn from.
    pub weight_levels: Vec<f64>,
    /// Base rate in multiples of `dq`, inclusive.
    pub rate_range: (u32, u32),
    /// Fraction of beams marked hot under [`ProfileKind::Hotspot`].
    pub hot_fraction: f64,
    /// Couple each flow's weight to its drawn volume instead of drawing
    /// independently.
    pub correlated_weights: bool,
    pub dq: f64,
    pub dp: f64,
}

impl TrafficProfile {
    pub fn new(kind: ProfileKind, flow_count: usize, unit_count: usize, beam_count: usize) -> Self {
        TrafficProfile {
            kind,
            flow_count,
            unit_count,
            beam_count,
            volume_range: (1, 4),
            weight_levels: vec![1.0, 2.0, 4.0],
            rate_range: (1, 4),
            hot_fraction: 0.25,
            correlated_weights: false,
            dq: 1.0,
            dp: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.flow_count < 1 || self.unit_count < 1 || self.beam_count < 1 {
            return Err(Error::config("flow, unit, and beam counts must be >= 1"));
        }
        if self.volume_range.0 < 1 || self.volume_range.0 > self.volume_range.1 {
            return Err(Error::config("volume range is empty"));
        }
        if self.rate_range.0 < 1 || self.rate_range.0 > self.rate_range.1 {
            return Err(Error::config("rate range is empty"));
        }
        if self.weight_levels.is_empty() || self.weight_levels.iter().any(|w| *w <= 0.0) {
            return Err(Error::config(
                "weight levels must be non-empty and positive",
            ));
        }
        if self.kind == ProfileKind::MixedPriority && self.weight_levels.len() < 2 {
            return Err(Error::config(
                "mixed-priority traffic needs at least two weight levels",
            ));
        }
        if !(self.hot_fraction > 0.0 && self.hot_fraction <= 1.0) {
            return Err(Error::config("hot fraction must lie in (0, 1]"));
        }
        if self.dq <= 0.0 || self.dp <= 0.0 {
            return Err(Error::config("dq and dp must be positive"));
        }
        Ok(())
    }
}

/// Generates a scenario from a traffic profile. Deterministic per seed.
///
/// Units are laid out one beam per slot column: unit `i` sits on beam
/// `i % beams` in slot `i / beams`, all on frequency channel 0. Every unit
/// requires `dp` power, and each slot's budget is a random whole number of
/// concurrently active units. Each flow gets a home beam where its rate is
/// doubled; the home beam is therefore recoverable as the flow's
/// highest-rate beam.
pub fn generate_scenario(profile: &TrafficProfile, seed: u64) -> Result<Scenario> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let beams = profile.beam_count;
    let units: Vec<ResourceUnit> = (0..profile.unit_count)
        .map(|i| ResourceUnit {
            id: i,
            beam: i % beams,
            frequency: 0,
            slot: i / beams,
            power_required: profile.dp,
        })
        .collect();

    let mut slot_sizes: BTreeMap<SlotIdx, usize> = BTreeMap::new();
    for u in &units {
        *slot_sizes.entry(u.slot).or_insert(0) += 1;
    }
    let power_limits: BTreeMap<SlotIdx, f64> = slot_sizes
        .iter()
        .map(|(&slot, &n)| (slot, rng.gen_range(1..=n) as f64 * profile.dp))
        .collect();

    let volumes: Vec<u32> = (0..profile.flow_count)
        .map(|_| rng.gen_range(profile.volume_range.0..=profile.volume_range.1))
        .collect();
    let base_rates: Vec<f64> = (0..profile.flow_count)
        .map(|_| rng.gen_range(profile.rate_range.0..=profile.rate_range.1) as f64 * profile.dq)
        .collect();
    let weights = draw_weights(profile, &volumes, &mut rng);
    let home_beams = assign_home_beams(profile, &weights);

    let flows: Vec<Flow> = (0..profile.flow_count)
        .map(|k| {
            let rates: BTreeMap<UnitId, f64> = units
                .iter()
                .map(|u| {
                    let boost = if u.beam == home_beams[k] { 2.0 } else { 1.0 };
                    (u.id, boost * base_rates[k])
                })
                .collect();
            Flow {
                id: k,
                weight: weights[k],
                queue_capacity: volumes[k] as f64 * base_rates[k],
                rates,
            }
        })
        .collect();

    let scenario = Scenario {
        flows,
        units,
        power_limits,
        dq: profile.dq,
        dp: profile.dp,
        rng_seed: seed,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn draw_weights(profile: &TrafficProfile, volumes: &[u32], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let levels = &profile.weight_levels;
    match profile.kind {
        ProfileKind::Uniform | ProfileKind::Hotspot => (0..profile.flow_count)
            .map(|k| {
                if profile.correlated_weights {
                    let (lo, hi) = profile.volume_range;
                    let span = (hi - lo + 1) as usize;
                    let idx = (volumes[k] - lo) as usize * levels.len() / span;
                    levels[idx.min(levels.len() - 1)]
                } else {
                    levels[rng.gen_range(0..levels.len())]
                }
            })
            .collect(),
        ProfileKind::MixedPriority => {
            // Split the levels into disjoint low/high bands and make sure
            // both bands are hit when there are at least two flows.
            let mid = levels.len().div_ceil(2);
            let (low, high) = levels.split_at(mid);
            let mut in_high: Vec<bool> =
                (0..profile.flow_count).map(|_| rng.gen_bool(0.5)).collect();
            if profile.flow_count >= 2 && in_high.iter().all(|&b| b == in_high[0]) {
                in_high[0] = !in_high[0];
            }
            in_high
                .iter()
                .map(|&hi| {
                    let band = if hi { high } else { low };
                    band[rng.gen_range(0..band.len())]
                })
                .collect()
        }
    }
}

/// Picks each flow's home beam. Uniform and mixed-priority traffic
/// round-robin flows across beams; hotspot traffic routes the heaviest
/// flows onto the hot beams until those hold at least half of the total
/// weight.
fn assign_home_beams(profile: &TrafficProfile, weights: &[f64]) -> Vec<usize> {
    let beams = profile.beam_count;
    match profile.kind {
        ProfileKind::Uniform | ProfileKind::MixedPriority => {
            (0..profile.flow_count).map(|k| k % beams).collect()
        }
        ProfileKind::Hotspot => {
            let hot_count =
                ((beams as f64 * profile.hot_fraction).round() as usize).clamp(1, beams);
            let total: f64 = weights.iter().sum();
            let mut order: Vec<usize> = (0..weights.len()).collect();
            order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap().then(a.cmp(&b)));

            let mut homes = vec![0usize; weights.len()];
            let mut hot_weight = 0.0;
            let mut hot_cursor = 0usize;
            let mut cold_cursor = 0usize;
            let cold_count = beams - hot_count;
            for &k in &order {
                if hot_weight < 0.5 * total || cold_count == 0 {
                    homes[k] = hot_cursor % hot_count;
                    hot_cursor += 1;
                    hot_weight += weights[k];
                } else {
                    homes[k] = hot_count + cold_cursor % cold_count;
                    cold_cursor += 1;
                }
            }
            homes
        }
    }
}

/// Divides all rates, queue capacities, unit powers, and power limits by
/// `factor`, leaving weights and the slack quanta untouched. Every
/// constraint is homogeneous of degree one in the scaled quantities, so the
/// feasible-schedule set is unchanged and the optimal objective scales by
/// `1/factor`.
pub fn rescale_scenario(s: &Scenario, factor: f64) -> Result<Scenario> {
    if factor <= 0.0 || factor.is_nan() {
        return Err(Error::domain(format!(
            "rescale factor must be positive, got {factor}"
        )));
    }
    let mut out = s.clone();
    for flow in &mut out.flows {
        flow.queue_capacity /= factor;
        for rate in flow.rates.values_mut() {
            *rate /= factor;
        }
    }
    for unit in &mut out.units {
        unit.power_required /= factor;
    }
    for limit in out.power_limits.values_mut() {
        *limit /= factor;
    }
    Ok(out)
}

impl Scenario {
    /// Checks structural invariants: unique ids, complete rate maps, power
    /// limits covering every slot, positive quanta.
    pub fn validate(&self) -> Result<()> {
        let mut unit_ids = BTreeSet::new();
        let mut tuples = BTreeSet::new();
        for u in &self.units {
            if !unit_ids.insert(u.id) {
                return Err(Error::domain(format!("duplicate unit id {}", u.id)));
            }
            if !tuples.insert((u.beam, u.frequency, u.slot)) {
                return Err(Error::domain(format!(
                    "duplicate (beam, frequency, slot) tuple for unit {}",
                    u.id
                )));
            }
            if u.power_required < 0.0 {
                return Err(Error::domain(format!("unit {} has negative power", u.id)));
            }
            if !self.power_limits.contains_key(&u.slot) {
                return Err(Error::domain(format!("slot {} has no power limit", u.slot)));
            }
        }
        let mut flow_ids = BTreeSet::new();
        for f in &self.flows {
            if !flow_ids.insert(f.id) {
                return Err(Error::domain(format!("duplicate flow id {}", f.id)));
            }
            if f.weight <= 0.0 {
                return Err(Error::domain(format!(
                    "flow {} has non-positive weight",
                    f.id
                )));
            }
            if f.queue_capacity < 0.0 {
                return Err(Error::domain(format!(
                    "flow {} has negative capacity",
                    f.id
                )));
            }
            for (&u, &r) in &f.rates {
                if !unit_ids.contains(&u) {
                    return Err(Error::domain(format!(
                        "flow {} has a rate for unknown unit {u}",
                        f.id
                    )));
                }
                if r < 0.0 {
                    return Err(Error::domain(format!("flow {} has a negative rate", f.id)));
                }
            }
            for u in &unit_ids {
                if !f.rates.contains_key(u) {
                    return Err(Error::domain(format!(
                        "flow {} is missing a rate entry for unit {u}",
                        f.id
                    )));
                }
            }
        }
        for (&slot, &limit) in &self.power_limits {
            if limit <= 0.0 {
                return Err(Error::domain(format!("slot {slot} has non-positive limit")));
            }
        }
        if self.dq <= 0.0 || self.dp <= 0.0 {
            return Err(Error::domain("dq and dp must be positive".to_string()));
        }
        Ok(())
    }

    pub fn flow(&self, id: FlowId) -> Result<&Flow> {
        self.flows
            .iter()
            .find(|f| f.id == id)
            .ok_or_else(|| Error::domain(format!("unknown flow id {id}")))
    }

    pub fn unit(&self, id: UnitId) -> Result<&ResourceUnit> {
        self.units
            .iter()
            .find(|u| u.id == id)
            .ok_or_else(|| Error::domain(format!("unknown unit id {id}")))
    }

    /// Slot indices that actually carry units, ascending.
    pub fn slots(&self) -> Vec<SlotIdx> {
        let set: BTreeSet<SlotIdx> = self.units.iter().map(|u| u.slot).collect();
        set.into_iter().collect()
    }

    pub fn units_in_slot(&self, slot: SlotIdx) -> Vec<&ResourceUnit> {
        self.units.iter().filter(|u| u.slot == slot).collect()
    }

    /// Largest single-assignment objective contribution `w_k * r_ku`.
    pub fn max_weighted_rate(&self) -> f64 {
        self.flows
            .iter()
            .flat_map(|f| f.rates.values().map(move |r| f.weight * r))
            .fold(0.0, f64::max)
    }

    pub fn min_nonzero_rate(&self) -> Option<f64> {
        self.flows
            .iter()
            .flat_map(|f| f.rates.values())
            .filter(|r| **r > 0.0)
            .fold(None, |acc, &r| Some(acc.map_or(r, |m: f64| m.min(r))))
    }

    pub fn min_nonzero_power(&self) -> Option<f64> {
        self.units
            .iter()
            .map(|u| u.power_required)
            .filter(|p| *p > 0.0)
            .fold(None, |acc, p| Some(acc.map_or(p, |m: f64| m.min(p))))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario> {
        Scenario::from_json_str(&std::fs::read_to_string(path)?)
    }
}
