//! Penalty-form QUBO compilation.
//!
//! The constrained model becomes an unconstrained quadratic form over
//! binary variables: one decision bit per (flow, unit) pair plus slack bits
//! that turn each inequality into an exact equality inside a squared
//! penalty. Power slack is quantized in steps of `dp`, queue slack in steps
//! of `dq`; slot `s` gets `floor(log2(P_max / dp)) + 1` slack bits and flow
//! `k` gets `floor(log2(C_k / dq)) + 1`.
//!
//! The compiled energy is
//! `H = H_obj + l1*H1 + l2*H2 + l3*H3`
//! with the objective contributing `-w_k * r_ku` per decision bit, H1
//! penalizing co-assigned units, and H2/H3 the squared power and queue
//! equalities. Upper-triangular storage folds each symmetric pair into a
//! single `(i, j)` entry with the doubled coefficient.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::Schedule;
use crate::scenario::{FlowId, Scenario, SlotIdx, UnitId};
use crate::Result;

/// Hard ceiling for exhaustive enumeration (energy tables, brute force).
pub const ENUMERATION_CAP: usize = 30;

/// A fixed-length little-endian bit vector; character `i` of the text form
/// is variable `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn zeros(n: usize) -> BitString {
        BitString(vec![false; n])
    }

    /// Bits of `z`, variable `i` taken from index bit `i`.
    pub fn from_index(z: u64, n: usize) -> BitString {
        BitString((0..n).map(|i| z >> i & 1 == 1).collect())
    }

    pub fn to_index(&self) -> u64 {
        assert!(self.0.len() <= 64, "bitstring too long for an index");
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (b as u64) << i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(text: &str) -> Result<BitString> {
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(BitString)
    }
}

/// Bijection between QUBO bit indices and their meaning. Decision bits come
/// first in (flow, unit) order, then power slack by (slot, bit position),
/// then queue slack by (flow, bit position).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableIndex {
    pub decision: BTreeMap<(FlowId, UnitId), usize>,
    pub power_slack: BTreeMap<(SlotIdx, u32), usize>,
    pub queue_slack: BTreeMap<(FlowId, u32), usize>,
    pub total_bits: usize,
}

impl VariableIndex {
    pub fn decision_bits(&self) -> usize {
        self.decision.len()
    }

    pub fn power_slack_bits(&self, slot: SlotIdx) -> usize {
        self.power_slack.keys().filter(|(s, _)| *s == slot).count()
    }

    pub fn queue_slack_bits(&self, flow: FlowId) -> usize {
        self.queue_slack.keys().filter(|(k, _)| *k == flow).count()
    }
}

/// Non-fatal conditions noticed while compiling.
#[derive(Debug, Clone, PartialEq)]
pub enum BuildWarning {
    /// `P_max / dp < 1`: a single slack bit of weight `dp` is emitted.
    DegeneratePowerCapacity { slot: SlotIdx, limit: f64, dp: f64 },
    /// `C_k / dq < 1`: a single slack bit of weight `dq` is emitted.
    DegenerateQueueCapacity {
        flow: FlowId,
        capacity: f64,
        dq: f64,
    },
}

impl fmt::Display for BuildWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildWarning::DegeneratePowerCapacity { slot, limit, dp } => write!(
                f,
                "slot {slot}: power limit {limit} below quantum dp={dp}, using one slack bit"
            ),
            BuildWarning::DegenerateQueueCapacity { flow, capacity, dq } => write!(
                f,
                "flow {flow}: queue capacity {capacity} below quantum dq={dq}, using one slack bit"
            ),
        }
    }
}

/// Sparse symmetric QUBO in upper-triangular storage.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    pub n: usize,
    pub linear: BTreeMap<usize, f64>,
    /// Keys are strictly `i < j`.
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
    pub lambdas: (f64, f64, f64),
    pub index: VariableIndex,
}

/// Number of slack bits spanning `capacity` in steps of `quantum`:
/// `floor(log2(capacity / quantum)) + 1`, clamped to one bit when the
/// capacity is below the quantum.
pub fn slack_bit_count(capacity: f64, quantum: f64) -> usize {
    assert!(quantum > 0.0, "slack quantum must be positive");
    let ratio = capacity / quantum;
    if ratio < 1.0 || ratio.is_nan() {
        return 1;
    }
    // Largest m with 2^m <= ratio, found by doubling to dodge log2 rounding
    // at power-of-two boundaries.
    let mut m = 0usize;
    let mut next = 2.0;
    while next <= ratio {
        m += 1;
        next *= 2.0;
    }
    m + 1
}

fn build_index(s: &Scenario) -> (VariableIndex, Vec<BuildWarning>) {
    let mut warnings = Vec::new();
    let mut flow_ids: Vec<FlowId> = s.flows.iter().map(|f| f.id).collect();
    flow_ids.sort_unstable();
    let mut unit_ids: Vec<UnitId> = s.units.iter().map(|u| u.id).collect();
    unit_ids.sort_unstable();

    let mut bit = 0usize;
    let mut decision = BTreeMap::new();
    for &k in &flow_ids {
        for &u in &unit_ids {
            decision.insert((k, u), bit);
            bit += 1;
        }
    }

    let mut power_slack = BTreeMap::new();
    for slot in s.slots() {
        let limit = s.power_limits[&slot];
        if limit / s.dp < 1.0 {
            warnings.push(BuildWarning::DegeneratePowerCapacity {
                slot,
                limit,
                dp: s.dp,
            });
        }
        for b in 0..slack_bit_count(limit, s.dp) as u32 {
            power_slack.insert((slot, b), bit);
            bit += 1;
        }
    }

    let mut queue_slack = BTreeMap::new();
    for &k in &flow_ids {
        let capacity = s.flow(k).unwrap().queue_capacity;
        if capacity / s.dq < 1.0 {
            warnings.push(BuildWarning::DegenerateQueueCapacity {
                flow: k,
                capacity,
                dq: s.dq,
            });
        }
        for b in 0..slack_bit_count(capacity, s.dq) as u32 {
            queue_slack.insert((k, b), bit);
            bit += 1;
        }
    }

    (
        VariableIndex {
            decision,
            power_slack,
            queue_slack,
            total_bits: bit,
        },
        warnings,
    )
}

#[derive(Default)]
struct Accumulator {
    linear: BTreeMap<usize, f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

impl Accumulator {
    fn add_linear(&mut self, i: usize, v: f64) {
        *self.linear.entry(i).or_insert(0.0) += v;
    }

    fn add_quadratic(&mut self, i: usize, j: usize, v: f64) {
        debug_assert_ne!(i, j);
        let key = if i < j { (i, j) } else { (j, i) };
        *self.quadratic.entry(key).or_insert(0.0) += v;
    }

    /// Adds `scale * (sum_i c_i x_i + constant)^2` expanded over binaries,
    /// using `x^2 = x` on the diagonal.
    fn add_squared_affine(&mut self, terms: &[(usize, f64)], constant: f64, scale: f64) {
        for (a, &(i, ci)) in terms.iter().enumerate() {
            self.add_linear(i, scale * (ci * ci + 2.0 * constant * ci));
            for &(j, cj) in &terms[a + 1..] {
                self.add_quadratic(i, j, scale * 2.0 * ci * cj);
            }
        }
        self.offset += scale * constant * constant;
    }

    fn finish(mut self, n: usize, lambdas: (f64, f64, f64), index: VariableIndex) -> QuboModel {
        self.linear.retain(|_, v| *v != 0.0);
        self.quadratic.retain(|_, v| *v != 0.0);
        QuboModel {
            n,
            linear: self.linear,
            quadratic: self.quadratic,
            offset: self.offset,
            lambdas,
            index,
        }
    }
}

/// Compiles a scenario into its penalty QUBO. See [`build_qubo_verbose`]
/// for the warning-carrying variant.
pub fn build_qubo(s: &Scenario, lambdas: (f64, f64, f64)) -> Result<QuboModel> {
    build_qubo_verbose(s, lambdas).map(|(q, _)| q)
}

pub fn build_qubo_verbose(
    s: &Scenario,
    lambdas: (f64, f64, f64),
) -> Result<(QuboModel, Vec<BuildWarning>)> {
    s.validate()?;
    let (l1, l2, l3) = lambdas;
    if l1 <= 0.0 || l2 <= 0.0 || l3 <= 0.0 {
        return Err(Error::domain("penalty weights must be positive"));
    }

    let (index, warnings) = build_index(s);
    let mut acc = Accumulator::default();

    // Objective: -w_k * r_ku on each decision bit.
    for flow in &s.flows {
        for (&u, &rate) in &flow.rates {
            if rate > 0.0 {
                acc.add_linear(index.decision[&(flow.id, u)], -flow.weight * rate);
            }
        }
    }

    // Unit conflicts: (S - 1/2)^2 - 1/4 = S^2 - S, which expands to
    // 2 * sum over co-assigned pairs, so each unordered pair costs 2*l1.
    for unit in &s.units {
        let bits: Vec<usize> = s
            .flows
            .iter()
            .map(|f| index.decision[&(f.id, unit.id)])
            .collect();
        for (a, &i) in bits.iter().enumerate() {
            for &j in &bits[a + 1..] {
                acc.add_quadratic(i, j, 2.0 * l1);
            }
        }
    }

    // Power budget per slot: (sum p_u x_ku + sum 2^b dp y_sb - P_max)^2.
    for slot in s.slots() {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for unit in s.units_in_slot(slot) {
            if unit.power_required == 0.0 {
                continue;
            }
            for flow in &s.flows {
                terms.push((index.decision[&(flow.id, unit.id)], unit.power_required));
            }
        }
        for (&(sl, b), &bit) in &index.power_slack {
            if sl == slot {
                terms.push((bit, (1u64 << b) as f64 * s.dp));
            }
        }
        acc.add_squared_affine(&terms, -s.power_limits[&slot], l2);
    }

    // Queue capacity per flow, summed over all units:
    // (sum r_ku x_ku + sum 2^b dq z_kb - C_k)^2.
    for flow in &s.flows {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for (&u, &rate) in &flow.rates {
            if rate > 0.0 {
                terms.push((index.decision[&(flow.id, u)], rate));
            }
        }
        for (&(k, b), &bit) in &index.queue_slack {
            if k == flow.id {
                terms.push((bit, (1u64 << b) as f64 * s.dq));
            }
        }
        acc.add_squared_affine(&terms, -flow.queue_capacity, l3);
    }

    let n = index.total_bits;
    Ok((acc.finish(n, lambdas, index), warnings))
}

/// Sufficient penalty weights: `2 * max(w*r) * |K| * |U| / g_i` with
/// `g1 = 1`, `g2 = min nonzero power squared`, `g3 = min nonzero rate
/// squared`, so one violation always outweighs the whole objective.
/// Falls back to `(1, 1, 1)` when every rate is zero.
pub fn default_lambdas(s: &Scenario) -> (f64, f64, f64) {
    let max_wr = s.max_weighted_rate();
    if max_wr <= 0.0 {
        return (1.0, 1.0, 1.0);
    }
    let scale = 2.0 * max_wr * (s.flows.len() * s.units.len()) as f64;
    let g2 = s.min_nonzero_power().map_or(1.0, |p| p * p);
    let g3 = s.min_nonzero_rate().map_or(1.0, |r| r * r);
    (scale, scale / g2, scale / g3)
}

impl QuboModel {
    /// Energy of one bitstring: `offset + linear . x + x' Q x`.
    pub fn energy(&self, x: &BitString) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::domain(format!(
                "bitstring length {} does not match {} variables",
                x.len(),
                self.n
            )));
        }
        let mut e = self.offset;
        for (&i, &v) in &self.linear {
            if x.get(i) {
                e += v;
            }
        }
        for (&(i, j), &v) in &self.quadratic {
            if x.get(i) && x.get(j) {
                e += v;
            }
        }
        Ok(e)
    }

    /// Energy of the basis state with index `z`.
    pub fn energy_of_index(&self, z: u64) -> f64 {
        let mut e = self.offset;
        for (&i, &v) in &self.linear {
            if z >> i & 1 == 1 {
                e += v;
            }
        }
        for (&(i, j), &v) in &self.quadratic {
            if z >> i & 1 == 1 && z >> j & 1 == 1 {
                e += v;
            }
        }
        e
    }

    /// Extracts the decision bits into a schedule; slack bits are ignored.
    pub fn decode(&self, x: &BitString) -> Result<Schedule> {
        if x.len() != self.n {
            return Err(Error::domain(format!(
                "bitstring length {} does not match {} variables",
                x.len(),
                self.n
            )));
        }
        let mut sched = Schedule::new();
        for (&(k, u), &bit) in &self.index.decision {
            if x.get(bit) {
                sched.assign(k, u);
            }
        }
        Ok(sched)
    }

    /// Builds the bitstring for a schedule with slack bits set to the best
    /// representable filling of each residual capacity.
    pub fn encode(&self, s: &Scenario, sched: &Schedule) -> Result<BitString> {
        let mut x = BitString::zeros(self.n);
        for (k, u) in sched.pairs() {
            let bit =
                self.index.decision.get(&(k, u)).ok_or_else(|| {
                    Error::domain(format!("no decision bit for flow {k}, unit {u}"))
                })?;
            x.set(*bit, true);
        }

        for slot in s.slots() {
            let consumed: f64 = s
                .units_in_slot(slot)
                .iter()
                .map(|u| {
                    let owners = sched.pairs().filter(|&(_, xu)| xu == u.id).count();
                    owners as f64 * u.power_required
                })
                .sum();
            let bits = self.index.power_slack_bits(slot);
            let filling = best_filling(s.power_limits[&slot] - consumed, s.dp, bits);
            for b in 0..bits as u32 {
                if filling >> b & 1 == 1 {
                    x.set(self.index.power_slack[&(slot, b)], true);
                }
            }
        }

        for flow in &s.flows {
            let sent: f64 = sched
                .assignments
                .get(&flow.id)
                .map(|units| units.iter().map(|u| flow.rates[u]).sum())
                .unwrap_or(0.0);
            let bits = self.index.queue_slack_bits(flow.id);
            let filling = best_filling(flow.queue_capacity - sent, s.dq, bits);
            for b in 0..bits as u32 {
                if filling >> b & 1 == 1 {
                    x.set(self.index.queue_slack[&(flow.id, b)], true);
                }
            }
        }
        Ok(x)
    }
}

/// Integer filling minimizing `(residual - t * quantum)^2` for
/// `t in [0, 2^bits - 1]`. Any integer in that range is representable in
/// binary, so the clamp of the rounded ratio is optimal.
fn best_filling(residual: f64, quantum: f64, bits: usize) -> u64 {
    let max = (1u64 << bits) - 1;
    let t = (residual / quantum).round();
    if t <= 0.0 {
        0
    } else if t >= max as f64 {
        max
    } else {
        t as u64
    }
}

/// All 2^n energies, indexed by basis state, filled with a Gray-code walk
/// so each step costs one coefficient-row lookup.
pub fn energy_table(q: &QuboModel) -> Result<Vec<f64>> {
    if q.n > ENUMERATION_CAP {
        return Err(Error::Capacity {
            what: "energy table",
            requested: q.n,
            cap: ENUMERATION_CAP,
        });
    }
    let size = 1usize << q.n;
    let mut linear = vec![0.0; q.n];
    for (&i, &v) in &q.linear {
        linear[i] = v;
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); q.n];
    for (&(i, j), &v) in &q.quadratic {
        adj[i].push((j, v));
        adj[j].push((i, v));
    }

    let mut table = vec![0.0; size];
    let mut state: u64 = 0;
    let mut energy = q.offset;
    table[0] = energy;
    for step in 1..size {
        let b = step.trailing_zeros() as usize;
        let setting = state >> b & 1 == 0;
        let mut delta = linear[b];
        for &(j, w) in &adj[b] {
            if state >> j & 1 == 1 {
                delta += w;
            }
        }
        state ^= 1 << b;
        energy += if setting { delta } else { -delta };
        table[state as usize] = energy;
    }
    Ok(table)
}

/// Lowest-index bitstring attaining the minimum energy, with that energy.
pub fn brute_force_argmin(q: &QuboModel) -> Result<(BitString, f64)> {
    let table = energy_table(q)?;
    let mut best = 0usize;
    for (z, &e) in table.iter().enumerate() {
        if e < table[best] {
            best = z;
        }
    }
    Ok((BitString::from_index(best as u64, q.n), table[best]))
}

/// All basis states within `rel_tol` (relative) of the minimum energy.
pub fn brute_force_minimizers(q: &QuboModel, rel_tol: f64) -> Result<Vec<u64>> {
    let table = energy_table(q)?;
    let min = table.iter().cloned().fold(f64::INFINITY, f64::min);
    let slack = rel_tol * (1.0 + min.abs());
    Ok(table
        .iter()
        .enumerate()
        .filter(|(_, &e)| e <= min + slack)
        .map(|(z, _)| z as u64)
        .collect())
}

// --- file format ---------------------------------------------------------

/// Text form: header `N offset`, then `i i v` for linear terms and
/// `i j v` (i < j) for quadratic ones. Reals carry 17 significant digits.
pub fn to_qubo_text(q: &QuboModel) -> String {
    let mut out = format!("{} {:.16e}\n", q.n, q.offset);
    for (&i, &v) in &q.linear {
        out.push_str(&format!("{i} {i} {v:.16e}\n"));
    }
    for (&(i, j), &v) in &q.quadratic {
        out.push_str(&format!("{i} {j} {v:.16e}\n"));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    total_bits: usize,
    lambdas: (f64, f64, f64),
    decision: Vec<(FlowId, UnitId, usize)>,
    power_slack: Vec<(SlotIdx, u32, usize)>,
    queue_slack: Vec<(FlowId, u32, usize)>,
}

/// JSON sidecar describing the variable index and penalty weights.
pub fn to_index_json(q: &QuboModel) -> Result<String> {
    let file = IndexFile {
        total_bits: q.index.total_bits,
        lambdas: q.lambdas,
        decision: q
            .index
            .decision
            .iter()
            .map(|(&(k, u), &b)| (k, u, b))
            .collect(),
        power_slack: q
            .index
            .power_slack
            .iter()
            .map(|(&(s, p), &b)| (s, p, b))
            .collect(),
        queue_slack: q
            .index
            .queue_slack
            .iter()
            .map(|(&(k, p), &b)| (k, p, b))
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Sidecar path for a QUBO file: the same path with `.index.json` appended.
pub fn index_sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".index.json");
    std::path::PathBuf::from(name)
}

pub fn save_qubo_files(q: &QuboModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_qubo_text(q))?;
    std::fs::write(index_sidecar_path(path), to_index_json(q)?)?;
    Ok(())
}

pub fn parse_qubo_text(text: &str, index_json: &str) -> Result<QuboModel> {
    let file: IndexFile = serde_json::from_str(index_json)?;
    let index = VariableIndex {
        decision: file.decision.iter().map(|&(k, u, b)| ((k, u), b)).collect(),
        power_slack: file
            .power_slack
            .iter()
            .map(|&(s, p, b)| ((s, p), b))
            .collect(),
        queue_slack: file
            .queue_slack
            .iter()
            .map(|&(k, p, b)| ((k, p), b))
            .collect(),
        total_bits: file.total_bits,
    };

    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty qubo file".into()))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .ok_or_else(|| Error::Parse("missing variable count".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad variable count: {e}")))?;
    let offset: f64 = parts
        .next()
        .ok_or_else(|| Error::Parse("missing offset".into()))?
        .parse()
        .map_err(|e| Error::Parse(format!("bad offset: {e}")))?;

    let mut linear = BTreeMap::new();
    let mut quadratic = BTreeMap::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "line {}: expected `i j v`",
                lineno + 2
            )));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
        let v: f64 = fields[2]
            .parse()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
        if i >= n || j >= n {
            return Err(Error::Parse(format!(
                "line {}: index out of range",
                lineno + 2
            )));
        }
        if i == j {
            linear.insert(i, v);
        } else if i < j {
            quadratic.insert((i, j), v);
        } else {
            return Err(Error::Parse(format!(
                "line {}: quadratic entries must have i < j",
                lineno + 2
            )));
        }
    }

    if index.total_bits != n {
        return Err(Error::Parse(format!(
            "index sidecar lists {} bits but qubo file has {n}",
            index.total_bits
        )));
    }
    Ok(QuboModel {
        n,
        linear,
        quadratic,
        offset,
        lambdas: file.lambdas,
        index,
    })
}

pub fn load_qubo_files(path: impl AsRef<Path>) -> Result<QuboModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let index_json = std::fs::read_to_string(index_sidecar_path(path))?;
    parse_qubo_text(&text, &index_json)
}
