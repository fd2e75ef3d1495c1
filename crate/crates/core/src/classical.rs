//! Classical baseline solvers: an exact branch-and-bound search and a
//! greedy slot allocator. The exact optimum is the 100% reference for all
//! throughput ratios.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::error::Error;
use crate::model::{exceeds, weighted_throughput, Schedule};
use crate::scenario::{FlowId, Scenario, SlotIdx, UnitId};
use crate::Result;

/// Solver output. `optimal` is true only when the search provably finished.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub schedule: Schedule,
    pub objective: f64,
    pub optimal: bool,
    pub nodes_explored: u64,
    pub wall_time: Duration,
}

impl SolveResult {
    /// JSON shape used by the CLI:
    /// `{schedule, objective, optimal, nodes_explored, wall_time_ms}`.
    pub fn to_json_value(&self) -> serde_json::Value {
        let schedule: BTreeMap<String, Vec<UnitId>> = self
            .schedule
            .assignments
            .iter()
            .map(|(k, units)| (k.to_string(), units.iter().copied().collect()))
            .collect();
        serde_json::json!({
            "schedule": schedule,
            "objective": self.objective,
            "optimal": self.optimal,
            "nodes_explored": self.nodes_explored,
            "wall_time_ms": self.wall_time.as_secs_f64() * 1e3,
        })
    }
}

/// One candidate (flow, unit) assignment with its precomputed footprint.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    flow: FlowId,
    unit: UnitId,
    value: f64,
    power: f64,
    rate: f64,
    slot: SlotIdx,
}

fn candidates(s: &Scenario) -> Vec<Candidate> {
    let mut flow_ids: Vec<FlowId> = s.flows.iter().map(|f| f.id).collect();
    flow_ids.sort_unstable();
    let mut unit_ids: Vec<UnitId> = s.units.iter().map(|u| u.id).collect();
    unit_ids.sort_unstable();

    let mut out = Vec::new();
    for &k in &flow_ids {
        let flow = s.flow(k).unwrap();
        for &u in &unit_ids {
            let rate = flow.rates[&u];
            let value = flow.weight * rate;
            if value > 0.0 {
                let unit = s.unit(u).unwrap();
                out.push(Candidate {
                    flow: k,
                    unit: u,
                    value,
                    power: unit.power_required,
                    rate,
                    slot: unit.slot,
                });
            }
        }
    }
    out
}

/// Incremental feasibility state along a search path. Constraints are
/// monotone in added assignments, so a violated partial assignment can
/// never become feasible again.
struct PartialState {
    unit_taken: BTreeMap<UnitId, bool>,
    slot_power: BTreeMap<SlotIdx, f64>,
    flow_sent: BTreeMap<FlowId, f64>,
}

impl PartialState {
    fn new(s: &Scenario) -> PartialState {
        PartialState {
            unit_taken: s.units.iter().map(|u| (u.id, false)).collect(),
            slot_power: s.slots().into_iter().map(|slot| (slot, 0.0)).collect(),
            flow_sent: s.flows.iter().map(|f| (f.id, 0.0)).collect(),
        }
    }

    fn fits(&self, s: &Scenario, c: &Candidate) -> bool {
        if self.unit_taken[&c.unit] {
            return false;
        }
        if exceeds(self.slot_power[&c.slot] + c.power, s.power_limits[&c.slot]) {
            return false;
        }
        let capacity = s.flow(c.flow).unwrap().queue_capacity;
        !exceeds(self.flow_sent[&c.flow] + c.rate, capacity)
    }

    fn place(&mut self, c: &Candidate) {
        self.unit_taken.insert(c.unit, true);
        *self.slot_power.get_mut(&c.slot).unwrap() += c.power;
        *self.flow_sent.get_mut(&c.flow).unwrap() += c.rate;
    }

    fn remove(&mut self, c: &Candidate) {
        self.unit_taken.insert(c.unit, false);
        *self.slot_power.get_mut(&c.slot).unwrap() -= c.power;
        *self.flow_sent.get_mut(&c.flow).unwrap() -= c.rate;
    }
}

struct Search<'a> {
    scenario: &'a Scenario,
    cands: Vec<Candidate>,
    /// `suffix[i]` = total value of candidates `i..`, the optimistic bound.
    suffix: Vec<f64>,
    state: PartialState,
    path: Vec<(FlowId, UnitId)>,
    best_path: Vec<(FlowId, UnitId)>,
    best_value: f64,
    current_value: f64,
    nodes: u64,
    node_limit: u64,
    aborted: bool,
}

impl Search<'_> {
    fn dfs(&mut self, pos: usize) {
        if self.nodes >= self.node_limit {
            self.aborted = true;
            return;
        }
        self.nodes += 1;

        if pos == self.cands.len() {
            if self.current_value > self.best_value {
                self.best_value = self.current_value;
                self.best_path = self.path.clone();
            }
            return;
        }
        // Optimistic bound: everything left accepted without constraints.
        if self.current_value + self.suffix[pos] <= self.best_value {
            return;
        }

        let cand = self.cands[pos];
        if self.state.fits(self.scenario, &cand) {
            self.state.place(&cand);
            self.path.push((cand.flow, cand.unit));
            self.current_value += cand.value;
            self.dfs(pos + 1);
            self.current_value -= cand.value;
            self.path.pop();
            self.state.remove(&cand);
        }
        self.dfs(pos + 1);
    }
}

/// Depth-first branch-and-bound over the decision bits in flow-major
/// order, branching assign-then-skip. Prunes on constraint violations and
/// on the remaining-value bound. When the search finishes within
/// `node_limit` nodes the result is the global optimum; otherwise the best
/// incumbent is returned with `optimal = false`.
pub fn solve_exact(s: &Scenario, node_limit: u64) -> Result<SolveResult> {
    if node_limit < 1 {
        return Err(Error::domain("node limit must be at least 1"));
    }
    s.validate()?;
    let started = Instant::now();

    let cands = candidates(s);
    let mut suffix = vec![0.0; cands.len() + 1];
    for i in (0..cands.len()).rev() {
        suffix[i] = suffix[i + 1] + cands[i].value;
    }

    let mut search = Search {
        scenario: s,
        state: PartialState::new(s),
        cands,
        suffix,
        path: Vec::new(),
        best_path: Vec::new(),
        best_value: 0.0,
        current_value: 0.0,
        nodes: 0,
        node_limit,
        aborted: false,
    };
    search.dfs(0);

    let mut schedule = Schedule::new();
    for &(k, u) in &search.best_path {
        schedule.assign(k, u);
    }
    let objective = weighted_throughput(s, &schedule)?;
    Ok(SolveResult {
        schedule,
        objective,
        optimal: !search.aborted,
        nodes_explored: search.nodes,
        wall_time: started.elapsed(),
    })
}

/// Scores every (flow, unit) pair by `w_k * r_ku`, sorts descending with
/// (flow, unit) tie-breaks, and accepts each assignment iff the partial
/// schedule stays feasible. Always returns a feasible schedule.
pub fn solve_greedy(s: &Scenario) -> Result<SolveResult> {
    s.validate()?;
    let started = Instant::now();

    let mut cands = candidates(s);
    cands.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap()
            .then(a.flow.cmp(&b.flow))
            .then(a.unit.cmp(&b.unit))
    });

    let mut state = PartialState::new(s);
    let mut schedule = Schedule::new();
    for cand in &cands {
        if state.fits(s, cand) {
            state.place(cand);
            schedule.assign(cand.flow, cand.unit);
        }
    }

    let objective = weighted_throughput(s, &schedule)?;
    Ok(SolveResult {
        schedule,
        objective,
        optimal: false,
        nodes_explored: 0,
        wall_time: started.elapsed(),
    })
}
