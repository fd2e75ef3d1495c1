//! The constrained scheduling model: objective evaluation, feasibility
//! checking, and the drop-lowest-value repair heuristic.
//!
//! A schedule is feasible when every resource unit serves at most one flow,
//! per-slot power consumption stays within the slot budget, and no flow
//! sends more than its queued backlog.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scenario::{FlowId, Scenario, SlotIdx, UnitId};
use crate::Result;

/// Relative tolerance for constraint comparisons. Rescaled instances carry
/// small magnitudes, so comparisons are relative rather than absolute.
pub const FEASIBILITY_REL_TOL: f64 = 1e-9;

/// Which units the queue constraint sums over. The per-flow backlog bound
/// is global across the horizon by default; the per-slot variant bounds
/// each slot's transmissions separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QueueScope {
    #[default]
    AllUnits,
    PerSlot,
}

/// A flow-to-resource-unit assignment map.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub assignments: BTreeMap<FlowId, BTreeSet<UnitId>>,
}

impl Schedule {
    pub fn new() -> Schedule {
        Schedule::default()
    }

    pub fn assign(&mut self, flow: FlowId, unit: UnitId) {
        self.assignments.entry(flow).or_default().insert(unit);
    }

    pub fn unassign(&mut self, flow: FlowId, unit: UnitId) {
        if let Some(units) = self.assignments.get_mut(&flow) {
            units.remove(&unit);
            if units.is_empty() {
                self.assignments.remove(&flow);
            }
        }
    }

    pub fn contains(&self, flow: FlowId, unit: UnitId) -> bool {
        self.assignments
            .get(&flow)
            .is_some_and(|units| units.contains(&unit))
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// All (flow, unit) pairs in flow-major order.
    pub fn pairs(&self) -> impl Iterator<Item = (FlowId, UnitId)> + '_ {
        self.assignments
            .iter()
            .flat_map(|(&k, units)| units.iter().map(move |&u| (k, u)))
    }

    pub fn len(&self) -> usize {
        self.assignments.values().map(|u| u.len()).sum()
    }

    /// True when every assignment of `self` also appears in `other`.
    pub fn is_subset_of(&self, other: &Schedule) -> bool {
        self.pairs().all(|(k, u)| other.contains(k, u))
    }
}

/// Plain text form: one `flow_id unit_id` line per assignment.
impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, u) in self.pairs() {
            writeln!(f, "{k} {u}")?;
        }
        Ok(())
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(text: &str) -> Result<Schedule> {
        let mut sched = Schedule::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.ok_or_else(|| Error::Parse(format!("line {}: missing field", lineno + 1)))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let flow = parse(parts.next())?;
            let unit = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!(
                    "line {}: expected exactly `flow_id unit_id`",
                    lineno + 1
                )));
            }
            sched.assign(flow, unit);
        }
        Ok(sched)
    }
}

/// Outcome of a feasibility check, listing every violated constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Units assigned to two or more flows.
    pub conflict_violations: Vec<UnitId>,
    /// (slot, consumed, limit) for each overdrawn slot.
    pub power_violations: Vec<(SlotIdx, f64, f64)>,
    /// (flow, sent, capacity) for each overfilled queue.
    pub queue_violations: Vec<(FlowId, f64, f64)>,
}

pub(crate) fn exceeds(value: f64, limit: f64) -> bool {
    value > limit + FEASIBILITY_REL_TOL * limit.abs()
}

fn validate_schedule_ids(s: &Scenario, x: &Schedule) -> Result<()> {
    for (k, u) in x.pairs() {
        s.flow(k)?;
        s.unit(u)?;
    }
    Ok(())
}

/// Total priority-weighted throughput of a schedule.
pub fn weighted_throughput(s: &Scenario, x: &Schedule) -> Result<f64> {
    validate_schedule_ids(s, x)?;
    let mut total = 0.0;
    for (k, u) in x.pairs() {
        let flow = s.flow(k)?;
        total += flow.weight * flow.rates[&u];
    }
    Ok(total)
}

/// Checks a schedule against all three constraint families with the
/// default all-units queue scope.
pub fn check_feasibility(s: &Scenario, x: &Schedule) -> Result<FeasibilityReport> {
    check_feasibility_scoped(s, x, QueueScope::AllUnits)
}

pub fn check_feasibility_scoped(
    s: &Scenario,
    x: &Schedule,
    scope: QueueScope,
) -> Result<FeasibilityReport> {
    validate_schedule_ids(s, x)?;

    let mut unit_owners: BTreeMap<UnitId, usize> = BTreeMap::new();
    let mut slot_power: BTreeMap<SlotIdx, f64> = BTreeMap::new();
    for (_, u) in x.pairs() {
        *unit_owners.entry(u).or_insert(0) += 1;
        let unit = s.unit(u)?;
        *slot_power.entry(unit.slot).or_insert(0.0) += unit.power_required;
    }

    let conflict_violations: Vec<UnitId> = unit_owners
        .iter()
        .filter(|(_, &n)| n >= 2)
        .map(|(&u, _)| u)
        .collect();

    let mut power_violations = Vec::new();
    for (&slot, &consumed) in &slot_power {
        let limit = s.power_limits[&slot];
        if exceeds(consumed, limit) {
            power_violations.push((slot, consumed, limit));
        }
    }

    let mut queue_violations = Vec::new();
    for flow in &s.flows {
        let Some(units) = x.assignments.get(&flow.id) else {
            continue;
        };
        match scope {
            QueueScope::AllUnits => {
                let sent: f64 = units.iter().map(|u| flow.rates[u]).sum();
                if exceeds(sent, flow.queue_capacity) {
                    queue_violations.push((flow.id, sent, flow.queue_capacity));
                }
            }
            QueueScope::PerSlot => {
                let mut per_slot: BTreeMap<SlotIdx, f64> = BTreeMap::new();
                for u in units {
                    *per_slot.entry(s.unit(*u)?.slot).or_insert(0.0) += flow.rates[u];
                }
                for (_, sent) in per_slot {
                    if exceeds(sent, flow.queue_capacity) {
                        queue_violations.push((flow.id, sent, flow.queue_capacity));
                    }
                }
            }
        }
    }

    let feasible = conflict_violations.is_empty()
        && power_violations.is_empty()
        && queue_violations.is_empty();
    Ok(FeasibilityReport {
        feasible,
        conflict_violations,
        power_violations,
        queue_violations,
    })
}

/// Repairs an infeasible schedule by repeatedly dropping the violating
/// assignment with the lowest `w_k * r_ku`, ties broken by lower flow id
/// then lower unit id. Assignments referencing unknown ids are dropped
/// outright. A feasible input is returned unchanged.
pub fn repair_schedule(s: &Scenario, x: &Schedule) -> Schedule {
    let mut current = Schedule::new();
    for (k, u) in x.pairs() {
        if s.flow(k).is_ok() && s.unit(u).is_ok() {
            current.assign(k, u);
        }
    }

    loop {
        let report = check_feasibility(s, &current).expect("ids validated above");
        if report.feasible {
            return current;
        }

        let mut candidates: BTreeSet<(FlowId, UnitId)> = BTreeSet::new();
        for &u in &report.conflict_violations {
            for (k, xu) in current.pairs() {
                if xu == u {
                    candidates.insert((k, u));
                }
            }
        }
        for &(slot, _, _) in &report.power_violations {
            for (k, u) in current.pairs() {
                let unit = s.unit(u).unwrap();
                if unit.slot == slot && unit.power_required > 0.0 {
                    candidates.insert((k, u));
                }
            }
        }
        for &(flow, _, _) in &report.queue_violations {
            if let Some(units) = current.assignments.get(&flow) {
                for &u in units {
                    if s.flow(flow).unwrap().rates[&u] > 0.0 {
                        candidates.insert((flow, u));
                    }
                }
            }
        }

        let (k, u) = candidates
            .into_iter()
            .min_by(|&(ka, ua), &(kb, ub)| {
                let va = s.flow(ka).unwrap().weight * s.flow(ka).unwrap().rates[&ua];
                let vb = s.flow(kb).unwrap().weight * s.flow(kb).unwrap().rates[&ub];
                va.partial_cmp(&vb)
                    .unwrap()
                    .then(ka.cmp(&kb))
                    .then(ua.cmp(&ub))
            })
            .expect("infeasible schedule has at least one violating assignment");
        current.unassign(k, u);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, Flow, ProfileKind, ResourceUnit, TrafficProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Hand-built scenario: `weights[k]`, `rates[k][u]`, one slot per unit,
    /// generous limits unless tightened by the caller.
    fn toy(weights: &[f64], rates: &[Vec<f64>], capacities: &[f64]) -> Scenario {
        let units: Vec<ResourceUnit> = (0..rates[0].len())
            .map(|u| ResourceUnit {
                id: u,
                beam: u,
                frequency: 0,
                slot: 0,
                power_required: 1.0,
            })
            .collect();
        let flows: Vec<Flow> = weights
            .iter()
            .enumerate()
            .map(|(k, &w)| Flow {
                id: k,
                weight: w,
                queue_capacity: capacities[k],
                rates: rates[k].iter().enumerate().map(|(u, &r)| (u, r)).collect(),
            })
            .collect();
        Scenario {
            flows,
            units,
            power_limits: [(0, 1000.0)].into(),
            dq: 1.0,
            dp: 1.0,
            rng_seed: 0,
        }
    }

    #[test]
    fn empty_schedule_scores_zero_and_is_feasible() {
        let s = toy(&[1.0], &[vec![1.0]], &[10.0]);
        let x = Schedule::new();
        assert_eq!(weighted_throughput(&s, &x).unwrap(), 0.0);
        let report = check_feasibility(&s, &x).unwrap();
        assert!(report.feasible);
        assert!(report.conflict_violations.is_empty());
        assert!(report.power_violations.is_empty());
        assert!(report.queue_violations.is_empty());
    }

    #[test]
    fn single_assignment_throughput() {
        let s = toy(&[2.0], &[vec![3.0]], &[10.0]);
        let mut x = Schedule::new();
        x.assign(0, 0);
        assert_eq!(weighted_throughput(&s, &x).unwrap(), 6.0);
    }

    #[test]
    fn unknown_ids_are_domain_errors() {
        let s = toy(&[1.0], &[vec![1.0]], &[10.0]);
        let mut x = Schedule::new();
        x.assign(5, 0);
        assert!(weighted_throughput(&s, &x).is_err());
        assert!(check_feasibility(&s, &x).is_err());
    }

    #[test]
    fn shared_unit_is_a_conflict() {
        let s = toy(&[1.0, 1.0], &[vec![1.0], vec![1.0]], &[10.0, 10.0]);
        let mut x = Schedule::new();
        x.assign(0, 0);
        x.assign(1, 0);
        let report = check_feasibility(&s, &x).unwrap();
        assert!(!report.feasible);
        assert_eq!(report.conflict_violations, vec![0]);
    }

    #[test]
    fn throughput_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let s = generate_scenario(
                &TrafficProfile::new(ProfileKind::Uniform, 3, 4, 2),
                rng.gen(),
            )
            .unwrap();
            let mut x = Schedule::new();
            for f in &s.flows {
                for u in &s.units {
                    if rng.gen_bool(0.4) {
                        x.assign(f.id, u.id);
                    }
                }
            }
            let mut naive = 0.0;
            for f in &s.flows {
                for u in &s.units {
                    if x.contains(f.id, u.id) {
                        naive += f.weight * f.rates[&u.id];
                    }
                }
            }
            let got = weighted_throughput(&s, &x).unwrap();
            assert!((got - naive).abs() <= 1e-12 * naive.abs().max(1.0));
        }
    }

    /// Independent feasibility oracle used to cross-check the report.
    fn feasible_oracle(s: &Scenario, x: &Schedule) -> bool {
        for u in &s.units {
            let owners = s.flows.iter().filter(|f| x.contains(f.id, u.id)).count();
            if owners > 1 {
                return false;
            }
        }
        for slot in s.slots() {
            let mut consumed = 0.0;
            for u in s.units_in_slot(slot) {
                for f in &s.flows {
                    if x.contains(f.id, u.id) {
                        consumed += u.power_required;
                    }
                }
            }
            if exceeds(consumed, s.power_limits[&slot]) {
                return false;
            }
        }
        for f in &s.flows {
            let mut sent = 0.0;
            for u in &s.units {
                if x.contains(f.id, u.id) {
                    sent += f.rates[&u.id];
                }
            }
            if exceeds(sent, f.queue_capacity) {
                return false;
            }
        }
        true
    }

    #[test]
    fn feasibility_matches_oracle_exhaustively() {
        for seed in [1, 2, 3] {
            let s = generate_scenario(&TrafficProfile::new(ProfileKind::Uniform, 3, 2, 2), seed)
                .unwrap();
            let pairs: Vec<(usize, usize)> = s
                .flows
                .iter()
                .flat_map(|f| s.units.iter().map(move |u| (f.id, u.id)))
                .collect();
            for mask in 0..(1u32 << pairs.len()) {
                let mut x = Schedule::new();
                for (bit, &(k, u)) in pairs.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        x.assign(k, u);
                    }
                }
                let report = check_feasibility(&s, &x).unwrap();
                assert_eq!(
                    report.feasible,
                    feasible_oracle(&s, &x),
                    "seed {seed} mask {mask}"
                );
                assert_eq!(
                    report.feasible,
                    report.conflict_violations.is_empty()
                        && report.power_violations.is_empty()
                        && report.queue_violations.is_empty()
                );
            }
        }
    }

    #[test]
    fn per_slot_queue_scope_is_weaker_per_slot() {
        // Flow 0 can send 2 per slot; capacity 3 allows both slots globally
        // infeasible but each slot alone feasible.
        let units = vec![
            ResourceUnit {
                id: 0,
                beam: 0,
                frequency: 0,
                slot: 0,
                power_required: 1.0,
            },
            ResourceUnit {
                id: 1,
                beam: 0,
                frequency: 0,
                slot: 1,
                power_required: 1.0,
            },
        ];
        let flows = vec![Flow {
            id: 0,
            weight: 1.0,
            queue_capacity: 3.0,
            rates: [(0, 2.0), (1, 2.0)].into(),
        }];
        let s = Scenario {
            flows,
            units,
            power_limits: [(0, 10.0), (1, 10.0)].into(),
            dq: 1.0,
            dp: 1.0,
            rng_seed: 0,
        };
        let mut x = Schedule::new();
        x.assign(0, 0);
        x.assign(0, 1);
        assert!(
            !check_feasibility_scoped(&s, &x, QueueScope::AllUnits)
                .unwrap()
                .feasible
        );
        assert!(
            check_feasibility_scoped(&s, &x, QueueScope::PerSlot)
                .unwrap()
                .feasible
        );
    }

    #[test]
    fn repair_keeps_feasible_input_unchanged() {
        let s = toy(&[1.0, 2.0], &[vec![1.0, 1.0], vec![1.0, 1.0]], &[5.0, 5.0]);
        let mut x = Schedule::new();
        x.assign(0, 0);
        x.assign(1, 1);
        assert_eq!(repair_schedule(&s, &x), x);
    }

    #[test]
    fn repair_drops_lower_priority_conflict() {
        let s = toy(&[1.0, 3.0], &[vec![1.0], vec![1.0]], &[5.0, 5.0]);
        let mut x = Schedule::new();
        x.assign(0, 0);
        x.assign(1, 0);
        let repaired = repair_schedule(&s, &x);
        assert!(!repaired.contains(0, 0));
        assert!(repaired.contains(1, 0));
    }

    #[test]
    fn repair_always_produces_feasible_subsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let scenarios: Vec<Scenario> = (0..10)
            .map(|seed| {
                generate_scenario(&TrafficProfile::new(ProfileKind::Uniform, 3, 3, 2), seed)
                    .unwrap()
            })
            .collect();
        for _ in 0..1000 {
            let s = &scenarios[rng.gen_range(0..scenarios.len())];
            let mut x = Schedule::new();
            for f in &s.flows {
                for u in &s.units {
                    if rng.gen_bool(0.5) {
                        x.assign(f.id, u.id);
                    }
                }
            }
            let repaired = repair_schedule(s, &x);
            assert!(check_feasibility(s, &repaired).unwrap().feasible);
            assert!(repaired.is_subset_of(&x));
            let before = weighted_throughput(s, &x).unwrap();
            let after = weighted_throughput(s, &repaired).unwrap();
            assert!(after <= before + 1e-12);
        }
    }

    #[test]
    fn schedule_text_round_trip() {
        let mut x = Schedule::new();
        x.assign(0, 1);
        x.assign(2, 0);
        x.assign(2, 3);
        let text = x.to_string();
        let back: Schedule = text.parse().unwrap();
        assert_eq!(x, back);
        assert!("not a schedule".parse::<Schedule>().is_err());
    }
}
