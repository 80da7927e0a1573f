use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};

use super::{Gate, GateKind, StabilizerCircuit};
use crate::lattice::{role_at, DeviceId, Kind, Role};
use crate::Error;

const FREE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
pub struct ScheduleOptions {
    /// Outer iterations stop once the pacing circuit's ceiling passes this.
    pub max_step: u32,
}

/// A measurement in the periodic block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Measurement {
    pub offset: u32,
    pub device: DeviceId,
    pub stabilizer: usize,
}

/// Steady-state schedule: a settled prefix and the periodic block it enters.
#[derive(Clone, Debug)]
pub struct WholeCircuit {
    /// Grid side length.
    pub n: usize,
    /// Every settled gate in `[0, settled)`, sorted by (step, device).
    pub gates: Vec<Gate>,
    pub settled: u32,
    pub block_start: u32,
    pub period: u32,
    /// Gates of `[block_start, block_start + period)`, indexed by offset.
    pub block: Vec<Vec<Gate>>,
    /// Block measurements sorted by (offset, device).
    pub measurements: Vec<Measurement>,
    pub stabilizer_kinds: Vec<Kind>,
    /// Per-stabilizer steady-state cycle C, waiting included.
    pub cycles: Vec<f64>,
    /// Average steps between decodes (every stabilizer measured once).
    pub steps_per_round: f64,
    /// Variable (home device label) held by each device at `block_start`.
    pub variables_at_start: Vec<u32>,
}

impl WholeCircuit {
    pub fn n_stabilizers(&self) -> usize {
        self.stabilizer_kinds.len()
    }

    /// Circuit text: version header, block header, one gate per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# superunit circuit v1\n");
        out.push_str(&format!(
            "# settled={} block_start={} period={}\n",
            self.settled, self.block_start, self.period
        ));
        for g in &self.gates {
            out.push_str(&g.to_string());
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Content {
    /// Data variable with the given home device.
    Var(DeviceId),
    Syndrome,
    Junk,
}

/// Per-template facts the placer needs.
struct Plan {
    /// For each op and operand: device stays reserved until its next op here.
    held_after: Vec<[bool; 2]>,
    /// Whether the reserved gap after this op holds a live variable.
    live_after: Vec<[bool; 2]>,
    /// For data devices displaced by a SWAP: op index that began the hold.
    hold_origin: Vec<[usize; 2]>,
}

fn plan(c: &StabilizerCircuit) -> Plan {
    let is_data = |d: DeviceId| role_at(d.r(), d.c()) == Role::Data;
    let mut content: HashMap<DeviceId, Content> = HashMap::new();
    let mut next_exists = vec![[false; 2]; c.ops.len()];
    let mut last_op: HashMap<DeviceId, (usize, usize)> = HashMap::new();
    for (i, op) in c.ops.iter().enumerate() {
        for (pos, d) in op.devices().enumerate() {
            if let Some(&(j, pj)) = last_op.get(&d) {
                next_exists[j][pj] = true;
            }
            last_op.insert(d, (i, pos));
        }
    }
    let mut held_after = vec![[false; 2]; c.ops.len()];
    let mut live_after = vec![[false; 2]; c.ops.len()];
    let mut hold_origin = vec![[usize::MAX; 2]; c.ops.len()];
    let mut origin: HashMap<DeviceId, usize> = HashMap::new();
    for (i, op) in c.ops.iter().enumerate() {
        let mut get = |d: DeviceId| {
            *content
                .entry(d)
                .or_insert(if is_data(d) { Content::Var(d) } else { Content::Junk })
        };
        match op.kind {
            GateKind::Init => {
                get(op.a);
                content.insert(op.a, Content::Syndrome);
            }
            GateKind::Meas => {
                content.insert(op.a, Content::Junk);
            }
            GateKind::Swap => {
                let b = op.b.unwrap();
                let (ca, cb) = (get(op.a), get(b));
                content.insert(op.a, cb);
                content.insert(b, ca);
            }
            _ => {}
        }
        for (pos, d) in op.devices().enumerate() {
            let cur = content
                .get(&d)
                .copied()
                .unwrap_or(if is_data(d) { Content::Var(d) } else { Content::Junk });
            let away = is_data(d) && cur != Content::Var(d);
            if away && !origin.contains_key(&d) {
                origin.insert(d, i);
            }
            held_after[i][pos] = next_exists[i][pos] && (!is_data(d) || away);
            live_after[i][pos] = cur != Content::Junk;
            if is_data(d) {
                hold_origin[i][pos] = origin.get(&d).copied().unwrap_or(usize::MAX);
                if !away {
                    origin.remove(&d);
                }
            }
        }
    }
    Plan {
        held_after,
        live_after,
        hold_origin,
    }
}

struct Instance {
    kind: Kind,
    end: u32,
}

struct Table {
    n_dev: usize,
    occ: Vec<u32>,
}

impl Table {
    fn get(&self, t: u32, dev: usize) -> u32 {
        let i = t as usize * self.n_dev + dev;
        if i < self.occ.len() {
            self.occ[i]
        } else {
            FREE
        }
    }

    fn set(&mut self, t: u32, dev: usize, inst: u32) {
        let i = t as usize * self.n_dev + dev;
        if i >= self.occ.len() {
            let steps = (t as usize + 1).max(self.occ.len() / self.n_dev * 2);
            self.occ.resize(steps * self.n_dev, FREE);
        }
        debug_assert_eq!(self.occ[i], FREE, "slot reused");
        self.occ[i] = inst;
    }
}

enum Retry {
    After(u32),
    Force(u32),
    Delay(usize, u32),
}

struct Scheduler<'a> {
    n: usize,
    circuits: &'a [StabilizerCircuit],
    plans: Vec<Plan>,
    table: Table,
    instances: Vec<Instance>,
    /// Per data device: gathering CNOTs as (step, instance), sorted.
    accesses: Vec<Vec<(u32, u32)>>,
    gates: Vec<Gate>,
    max_span: u32,
}

impl<'a> Scheduler<'a> {
    fn dev(&self, d: DeviceId) -> usize {
        d.label(self.n)
    }

    fn is_data(d: DeviceId) -> bool {
        role_at(d.r(), d.c()) == Role::Data
    }

    /// Place one instance of circuit `ci` starting no earlier than `earliest`;
    /// returns its end (step after the MEAS).
    fn place(&mut self, ci: usize, earliest: u32) -> u32 {
        let times = self.find_times(ci, earliest);
        self.commit(ci, &times)
    }

    /// Place an instance only if it ends by `ceiling`; returns its end.
    fn place_within(&mut self, ci: usize, earliest: u32, ceiling: u32) -> Option<u32> {
        let times = self.find_times(ci, earliest);
        (times.iter().max().unwrap() + 1 <= ceiling).then(|| self.commit(ci, &times))
    }

    /// Op times of the earliest conflict-free instance of `ci` from `earliest`.
    fn find_times(&self, ci: usize, earliest: u32) -> Vec<u32> {
        let mut start = earliest;
        let mut forced: HashSet<u32> = HashSet::new();
        let mut min_time = vec![0u32; self.circuits[ci].ops.len()];
        loop {
            match self.try_place(ci, start, &forced, &min_time) {
                Ok(times) => return times,
                Err(Retry::After(s)) => {
                    debug_assert!(s > start);
                    start = s;
                }
                Err(Retry::Force(j)) => {
                    forced.insert(j);
                }
                Err(Retry::Delay(op, t)) => {
                    debug_assert!(t > min_time[op]);
                    min_time[op] = t;
                }
            }
        }
    }

    fn try_place(&self, ci: usize, start: u32, forced: &HashSet<u32>, min_time: &[u32]) -> Result<Vec<u32>, Retry> {
        let c = &self.circuits[ci];
        let plan = &self.plans[ci];
        let mut last: HashMap<DeviceId, u32> = HashMap::new();
        let mut held: HashMap<DeviceId, usize> = HashMap::new();
        let mut rel: HashMap<u32, bool> = HashMap::new();
        let mut times = Vec::with_capacity(c.ops.len());
        for (i, op) in c.ops.iter().enumerate() {
            let mut t = op
                .devices()
                .filter_map(|d| last.get(&d).map(|&l| l + 1))
                .max()
                .unwrap_or(start);
            t = t.max(start).max(min_time[i]);
            'search: loop {
                for d in op.devices() {
                    let di = self.dev(d);
                    if let Some(&origin) = held.get(&d) {
                        let from = last[&d] + 1;
                        let mut blocker = None;
                        for u in from..=t {
                            let o = self.table.get(u, di);
                            if o != FREE {
                                blocker = Some((u, o));
                            }
                        }
                        if let Some((u, o)) = blocker {
                            if Self::is_data(d) {
                                return Err(Retry::Delay(origin, u + 1));
                            }
                            return Err(Retry::After(self.instances[o as usize].end.max(start + 1)));
                        }
                    } else {
                        let o = self.table.get(t, di);
                        if o != FREE {
                            if !Self::is_data(d) {
                                return Err(Retry::After(self.instances[o as usize].end.max(start + 1)));
                            }
                            t += 1;
                            continue 'search;
                        }
                    }
                }
                if op.kind == GateKind::Cnot {
                    let q = if Self::is_data(op.a) { op.a } else { op.b.unwrap() };
                    let list = &self.accesses[self.dev(q)];
                    let lo = start.saturating_sub(self.max_span);
                    let first = list.partition_point(|&(s, _)| s < lo);
                    for &(tj, j) in &list[first..] {
                        if self.instances[j as usize].kind == c.kind {
                            continue;
                        }
                        let before = t < tj;
                        let required = if forced.contains(&j) {
                            Some(false)
                        } else {
                            rel.get(&j).copied()
                        };
                        match required {
                            Some(true) if !before => return Err(Retry::Force(j)),
                            Some(false) if before => {
                                t = tj + 1;
                                continue 'search;
                            }
                            _ => {}
                        }
                    }
                    for &(tj, j) in &list[first..] {
                        if self.instances[j as usize].kind != c.kind {
                            rel.entry(j).or_insert(t < tj);
                        }
                    }
                }
                break;
            }
            for (pos, d) in op.devices().enumerate() {
                last.insert(d, t);
                if plan.held_after[i][pos] {
                    let origin = if Self::is_data(d) {
                        plan.hold_origin[i][pos]
                    } else {
                        usize::MAX
                    };
                    held.insert(d, origin);
                } else {
                    held.remove(&d);
                }
            }
            times.push(t);
        }
        Ok(times)
    }

    fn commit(&mut self, ci: usize, times: &[u32]) -> u32 {
        let c = &self.circuits[ci];
        let plan = &self.plans[ci];
        let inst = self.instances.len() as u32;
        let end = times.iter().max().unwrap() + 1;
        let start = times[0];
        self.instances.push(Instance { kind: c.kind, end });
        self.max_span = self.max_span.max(end - start);
        let mut last: HashMap<DeviceId, (u32, bool, bool)> = HashMap::new();
        for (i, op) in c.ops.iter().enumerate() {
            let t = times[i];
            for (pos, d) in op.devices().enumerate() {
                let di = d.label(self.n);
                if let Some(&(tl, true, live)) = last.get(&d) {
                    for u in tl + 1..t {
                        self.table.set(u, di, inst);
                        if live {
                            self.gates.push(Gate {
                                kind: GateKind::Id,
                                a: d,
                                b: None,
                                step: u,
                                owner: Some(c.stabilizer),
                            });
                        }
                    }
                }
                self.table.set(t, di, inst);
                last.insert(d, (t, plan.held_after[i][pos], plan.live_after[i][pos]));
            }
            self.gates.push(Gate {
                kind: op.kind,
                a: op.a,
                b: op.b,
                step: t,
                owner: Some(c.stabilizer),
            });
            if op.kind == GateKind::Cnot {
                let q = if Self::is_data(op.a) { op.a } else { op.b.unwrap() };
                let list = &mut self.accesses[q.label(self.n)];
                let at = list.partition_point(|&(s, _)| s <= t);
                list.insert(at, (t, inst));
            }
        }
        end
    }
}

/// Priority scheduling of `circuits`, then extraction of the periodic steady state.
pub fn schedule_whole_circuit(
    circuits: &[StabilizerCircuit],
    n: usize,
    opts: ScheduleOptions,
) -> Result<WholeCircuit, Error> {
    if circuits.is_empty() {
        return Err(Error::Invalid("no stabilizer circuits to schedule".into()));
    }
    let n_stab = circuits.iter().map(|c| c.stabilizer).max().unwrap() + 1;
    let mut kinds = vec![Kind::Z; n_stab];
    for c in circuits {
        kinds[c.stabilizer] = c.kind;
    }
    let mut order: Vec<usize> = (0..circuits.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(circuits[i].depth), circuits[i].home));
    let mut s = Scheduler {
        n,
        circuits,
        plans: circuits.iter().map(plan).collect(),
        table: Table {
            n_dev: n * n,
            occ: vec![FREE; n * n * 64],
        },
        instances: Vec::new(),
        accesses: vec![Vec::new(); n * n],
        gates: Vec::new(),
        max_span: 0,
    };
    // Frames start clean: the pacing circuit and one instance of every other
    // circuit, then repeats that end within the frame. Identical frames make
    // the steady state periodic with at most one frame per period.
    let mut ceil = vec![0u32; circuits.len()];
    let mut frame_start = 0;
    while frame_start <= opts.max_step {
        let mut frame_end = 0;
        for &ci in &order {
            ceil[ci] = s.place(ci, frame_start);
            frame_end = frame_end.max(ceil[ci]);
        }
        loop {
            let mut progressed = false;
            for &ci in &order {
                if let Some(end) = s.place_within(ci, ceil[ci], frame_end) {
                    ceil[ci] = end;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        frame_start = frame_end;
    }
    let settled = frame_start;
    let mut gates: Vec<Gate> = s.gates.into_iter().filter(|g| g.step < settled).collect();
    gates.sort_by_key(|g| (g.step, g.a));
    let mut by_step: Vec<Vec<Gate>> = vec![Vec::new(); settled as usize];
    for g in &gates {
        by_step[g.step as usize].push(*g);
    }
    let (block_start, period) = find_period(&by_step)
        .ok_or_else(|| Error::Invalid(format!("no periodic steady state within {} steps", opts.max_step)))?;
    // Swaps may leave variables permuted after one repeat; the block spans
    // the permutation's order so it restores the variable map.
    let mut moved: Vec<usize> = (0..n * n).collect();
    for step in &by_step[block_start as usize..(block_start + period) as usize] {
        for g in step.iter().filter(|g| g.kind == GateKind::Swap) {
            moved.swap(g.a.label(n), g.b.unwrap().label(n));
        }
    }
    let order = permutation_order(&moved);
    let base = period;
    let period = base
        .checked_mul(order)
        .filter(|&p| p <= opts.max_step)
        .ok_or_else(|| Error::Invalid(format!("variable permutation of order {order} does not fit")))?;
    let block: Vec<Vec<Gate>> = (0..period)
        .map(|o| {
            by_step[(block_start + o % base) as usize]
                .iter()
                .map(|g| Gate { step: o, ..*g })
                .collect()
        })
        .collect();
    let mut variables: Vec<u32> = (0..(n * n) as u32).collect();
    for g in gates.iter().take_while(|g| g.step < block_start) {
        if g.kind == GateKind::Swap {
            variables.swap(g.a.label(n), g.b.unwrap().label(n));
        }
    }
    let measurements: Vec<Measurement> = block
        .iter()
        .flatten()
        .filter(|g| g.kind == GateKind::Meas)
        .map(|g| Measurement {
            offset: g.step,
            device: g.a,
            stabilizer: g.owner.unwrap(),
        })
        .collect();
    let mut counts = vec![0usize; n_stab];
    for m in &measurements {
        counts[m.stabilizer] += 1;
    }
    if let Some(starved) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Invalid(format!(
            "stabilizer {starved} is never measured in the steady state"
        )));
    }
    let cycles = counts.iter().map(|&c| period as f64 / c as f64).collect();
    let steps_per_round = round_length(&measurements, period, n_stab);
    Ok(WholeCircuit {
        n,
        gates,
        settled,
        block_start,
        period,
        block,
        measurements,
        stabilizer_kinds: kinds,
        cycles,
        steps_per_round,
        variables_at_start: variables,
    })
}

/// Least common multiple of the cycle lengths of `perm`.
fn permutation_order(perm: &[usize]) -> u32 {
    let mut seen = vec![false; perm.len()];
    let mut order = 1u64;
    for start in 0..perm.len() {
        let mut len = 0u64;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len > 1 {
            order = order / gcd(order, len) * len;
        }
    }
    order.min(u32::MAX as u64) as u32
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest period matching over the second half of the settled prefix.
fn find_period(by_step: &[Vec<Gate>]) -> Option<(u32, u32)> {
    let hashes: Vec<u64> = by_step
        .iter()
        .map(|gs| {
            let mut h = std::collections::hash_map::DefaultHasher::new();
            for g in gs {
                (g.kind, g.a, g.b, g.owner).hash(&mut h);
            }
            h.finish()
        })
        .collect();
    let len = hashes.len();
    let a = len / 2;
    for p in 1..=(len - a) / 3 {
        if (a..len - p).all(|t| hashes[t] == hashes[t + p]) {
            let same = (a..a + p).all(|t| {
                by_step[t].len() == by_step[t + p].len()
                    && by_step[t]
                        .iter()
                        .zip(&by_step[t + p])
                        .all(|(x, y)| (x.kind, x.a, x.b, x.owner) == (y.kind, y.a, y.b, y.owner))
            });
            if same {
                return Some((a as u32, p as u32));
            }
        }
    }
    None
}

/// Mean spacing of coverage-complete decode points over repeated blocks.
fn round_length(meas: &[Measurement], period: u32, n_stab: usize) -> f64 {
    let mut seen = vec![false; n_stab];
    let mut covered = 0;
    let mut decodes = Vec::new();
    for k in 0..64u64 {
        for m in meas {
            if !seen[m.stabilizer] {
                seen[m.stabilizer] = true;
                covered += 1;
                if covered == n_stab {
                    decodes.push(k * period as u64 + m.offset as u64);
                    seen.iter_mut().for_each(|s| *s = false);
                    covered = 0;
                }
            }
        }
    }
    let tail = &decodes[decodes.len() / 2..];
    (tail[tail.len() - 1] - tail[0]) as f64 / (tail.len() - 1) as f64
}
