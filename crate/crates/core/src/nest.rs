//! Detection-event graphs ("nests") of the periodic block.
//!
//! Every fault location and outcome is propagated through the block. Changes in
//! a stabilizer's outcome sequence are detection events. Events of Z
//! stabilizers (X errors) form one nest and events of X stabilizers the other.
//! Vertices are block measurements `j` in block `k`; edges are stored relative
//! to the block of their first endpoint, so the nest is translation invariant.

use std::collections::HashMap;

use crate::lattice::Kind;
use crate::noise::{apply_gate, OpKind, Pauli, Program};
use crate::stabilizers::StabilizerSet;

/// Far endpoint of an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Neighbor {
    Boundary,
    /// Local vertex `j` in the block `dk` after the source's block.
    Vertex(u32, i32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NestEdge {
    /// First endpoint, in block 0.
    pub a: u32,
    pub b: Neighbor,
    /// Edge probability is `p * coefficient` to first order.
    pub coefficient: f64,
    /// Dense data indices flipped by the most likely mechanism of this edge.
    pub effect: Vec<u32>,
    best: f64,
}

/// Probability bookkeeping, all in units of `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NestStats {
    /// Mass of every (location, outcome) pair in the block.
    pub total: f64,
    /// Mass of mechanisms with no event in this nest.
    pub silent: f64,
    /// Extra mass from splitting mechanisms with more than two events.
    pub split_extra: f64,
    /// Sum of edge coefficients.
    pub edges: f64,
    /// Mechanisms with more than two events in this nest.
    pub hyperedges: usize,
}

#[derive(Clone, Debug)]
pub struct Nest {
    /// Kind of the stabilizers whose events this nest holds.
    pub kind: Kind,
    pub period: u32,
    /// Block offset of each local vertex.
    pub offsets: Vec<u32>,
    /// Stabilizer id of each local vertex.
    pub stabilizers: Vec<usize>,
    pub edges: Vec<NestEdge>,
    /// Per local vertex: (edge index, neighbour relative to this vertex).
    pub adjacency: Vec<Vec<(u32, Neighbor)>>,
    pub stats: NestStats,
}

impl Nest {
    pub fn n_vertices(&self) -> usize {
        self.offsets.len()
    }

    /// Nest from explicit edges `(a, b, coefficient, effect)`; parallel edges merge.
    pub fn from_edges(
        kind: Kind,
        period: u32,
        offsets: Vec<u32>,
        stabilizers: Vec<usize>,
        edges: &[(u32, Neighbor, f64, Vec<u32>)],
    ) -> Nest {
        assert_eq!(offsets.len(), stabilizers.len());
        let mut nest = Nest {
            kind,
            period,
            offsets,
            stabilizers,
            edges: Vec::new(),
            adjacency: Vec::new(),
            stats: NestStats::default(),
        };
        let mut index = HashMap::new();
        for (a, b, c, eff) in edges {
            assert!((*a as usize) < nest.n_vertices());
            nest.stats.total += c;
            nest.insert((*a, *b), *c, eff, &mut index);
        }
        nest.finish();
        nest
    }

    /// Absolute step of vertex `j` in block `k`.
    pub fn time(&self, j: u32, k: i64) -> i64 {
        k * self.period as i64 + self.offsets[j as usize] as i64
    }

    fn insert(
        &mut self,
        key: (u32, Neighbor),
        coefficient: f64,
        effect: &[u32],
        index: &mut HashMap<(u32, Neighbor), u32>,
    ) {
        match index.get(&key) {
            Some(&e) => {
                let edge = &mut self.edges[e as usize];
                edge.coefficient += coefficient;
                if coefficient > edge.best {
                    edge.best = coefficient;
                    edge.effect = effect.to_vec();
                }
            }
            None => {
                index.insert(key, self.edges.len() as u32);
                self.edges.push(NestEdge {
                    a: key.0,
                    b: key.1,
                    coefficient,
                    effect: effect.to_vec(),
                    best: coefficient,
                });
            }
        }
    }

    fn finish(&mut self) {
        self.adjacency = vec![Vec::new(); self.n_vertices()];
        for (e, edge) in self.edges.iter().enumerate() {
            let e = e as u32;
            self.adjacency[edge.a as usize].push((e, edge.b));
            if let Neighbor::Vertex(j, dk) = edge.b {
                if (j, dk) != (edge.a, 0) {
                    self.adjacency[j as usize].push((e, Neighbor::Vertex(edge.a, -dk)));
                }
            }
        }
        self.stats.edges = self.edges.iter().map(|e| e.coefficient).sum();
    }
}

/// A detection event: local vertex `j` of `kind` in block `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub kind: Kind,
    pub k: i64,
    pub j: u32,
}

/// What one fault does once it has fully played out.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultResponse {
    /// Events as (block measurement index, block delta), time ordered.
    pub events: Vec<(u32, i64)>,
    /// Settled data frame: (dense data index, frame bits).
    pub data: Vec<(u32, u8)>,
}

/// Precomputed tables for sparse propagation.
pub struct Propagator<'a> {
    program: &'a Program,
    n_dev: usize,
    /// `op_at[t * n_dev + d]`: op touching `d` at offset `t`, or MAX.
    op_at: Vec<u32>,
    /// Variable held by each device at the start of each offset.
    var_at: Vec<u32>,
    is_data_var: Vec<bool>,
    /// Whether each device holds a data or mid-instance syndrome variable at
    /// the start of each offset. Frames on anything else never reach data.
    live_at: Vec<bool>,
    meas_ops: Vec<Vec<u32>>,
    /// Per stabilizer: block measurement indices in offset order.
    stab_meas: Vec<Vec<u32>>,
    /// Per data variable label: stabilizers containing it.
    containing: Vec<Vec<usize>>,
    max_span: u32,
    // Scratch.
    frame: Vec<u8>,
    dirty: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    last: Vec<bool>,
    touched_stabs: Vec<usize>,
}

impl<'a> Propagator<'a> {
    pub fn new(program: &'a Program, set: &StabilizerSet, n: usize) -> Self {
        let n_dev = program.n_devices;
        let p = program.period as usize;
        let mut op_at = vec![u32::MAX; p * n_dev];
        let mut meas_ops = vec![Vec::new(); p];
        let mut var_at = vec![0u32; p * n_dev];
        let mut vars = program.initial_vars.clone();
        for t in 0..p {
            var_at[t * n_dev..(t + 1) * n_dev].copy_from_slice(&vars);
            for i in program.step_start[t]..program.step_start[t + 1] {
                let op = program.ops[i];
                if op.kind != OpKind::Idle {
                    op_at[t * n_dev + op.a as usize] = i as u32;
                    if op.b != u32::MAX {
                        op_at[t * n_dev + op.b as usize] = i as u32;
                    }
                }
                if op.kind == OpKind::Meas {
                    meas_ops[t].push(i as u32);
                }
                if op.kind == OpKind::Swap {
                    vars.swap(op.a as usize, op.b as usize);
                }
            }
        }
        let is_data_var: Vec<bool> = (0..n_dev).map(|v| program.data_index[v] != u32::MAX).collect();
        let live_at = liveness(program, &is_data_var);
        let mut stab_meas = vec![Vec::new(); program.n_stabilizers];
        for (i, &(s, _, _)) in program.measurements.iter().enumerate() {
            stab_meas[s].push(i as u32);
        }
        let mut containing = vec![Vec::new(); n_dev];
        for s in &set.stabilizers {
            for q in &s.data_qubits {
                containing[q.label(n)].push(s.id);
            }
        }
        let max_span = instance_span(program);
        Propagator {
            program,
            n_dev,
            op_at,
            var_at,
            is_data_var,
            live_at,
            meas_ops,
            stab_meas,
            containing,
            max_span,
            frame: vec![0; n_dev],
            dirty: Vec::new(),
            stamp: vec![0; program.n_locations()],
            epoch: 0,
            last: vec![false; program.n_stabilizers],
            touched_stabs: Vec::new(),
        }
    }

    pub fn max_span(&self) -> u32 {
        self.max_span
    }

    fn holds_data(&self, t: u64, d: usize) -> bool {
        let off = (t % self.program.period as u64) as usize;
        self.is_data_var[self.var_at[off * self.n_dev + d] as usize]
    }

    fn is_live(&self, t: u64, d: usize) -> bool {
        let off = (t % self.program.period as u64) as usize;
        self.live_at[off * self.n_dev + d]
    }

    fn record(&mut self, meas: u32, delta: i64, flip: bool, out: &mut Vec<(u32, i64)>) {
        let s = self.program.measurements[meas as usize].0;
        if self.last[s] != flip {
            if !self.last[s] && flip {
                self.touched_stabs.push(s);
            }
            self.last[s] = flip;
            out.push((meas, delta));
        }
    }

    /// Play out fault (`pa` on `a`, `pb` on `b`) at block location `loc` of block 0.
    pub fn respond(&mut self, loc: usize, pa: Pauli, pb: Pauli) -> FaultResponse {
        let prog = self.program;
        let period = prog.period as u64;
        let op = prog.ops[loc];
        let t0 = prog.step_of_location(loc) as u64;
        let mut events = Vec::new();
        let mut t_change = t0;
        if op.kind == OpKind::Meas {
            if pa.x {
                self.record(op.meas, 0, true, &mut events);
            }
        } else {
            self.frame[op.a as usize] ^= pa.bits();
            if op.b != u32::MAX {
                self.frame[op.b as usize] ^= pb.bits();
            }
            for d in [op.a, op.b] {
                if d == u32::MAX || self.frame[d as usize] == 0 || self.dirty.contains(&d) {
                    continue;
                }
                if self.is_live(t0 + 1, d as usize) {
                    self.dirty.push(d);
                } else {
                    self.frame[d as usize] = 0;
                }
            }
        }
        let mut t = t0 + 1;
        let mut next_dirty = Vec::new();
        loop {
            // Instances begun after the last data change gather a constant frame
            // and cannot write back into data, so nothing changes afterwards.
            if t > t_change + self.max_span as u64 {
                break;
            }
            let off = (t % period) as usize;
            let delta = (t / period) as i64;
            self.epoch += 1;
            let epoch = self.epoch;
            let dirty = std::mem::take(&mut self.dirty);
            next_dirty.clear();
            for &d in &dirty {
                let i = self.op_at[off * self.n_dev + d as usize];
                if i == u32::MAX {
                    next_dirty.push(d);
                    continue;
                }
                if self.stamp[i as usize] == epoch {
                    continue;
                }
                self.stamp[i as usize] = epoch;
                let op = prog.ops[i as usize];
                if op.kind == OpKind::Meas {
                    let flip = self.frame[op.a as usize] & 1 != 0;
                    self.frame[op.a as usize] = 0;
                    self.record(op.meas, delta, flip, &mut events);
                    continue;
                }
                let before = [
                    self.frame[op.a as usize],
                    if op.b != u32::MAX { self.frame[op.b as usize] } else { 0 },
                ];
                apply_gate(&mut self.frame, &op);
                if op.kind != OpKind::Swap {
                    for (pos, dev) in [op.a, op.b].into_iter().enumerate() {
                        if dev != u32::MAX
                            && self.frame[dev as usize] != before[pos]
                            && self.holds_data(t, dev as usize)
                        {
                            t_change = t;
                        }
                    }
                }
                for dev in [op.a, op.b] {
                    if dev != u32::MAX && self.frame[dev as usize] != 0 {
                        next_dirty.push(dev);
                    }
                }
            }
            if !self.touched_stabs.is_empty() {
                for idx in 0..self.meas_ops[off].len() {
                    let i = self.meas_ops[off][idx];
                    if self.stamp[i as usize] != epoch {
                        let op = prog.ops[i as usize];
                        self.record(op.meas, delta, false, &mut events);
                    }
                }
                self.touched_stabs.retain(|&s| self.last[s]);
            }
            next_dirty.sort_unstable();
            next_dirty.dedup();
            next_dirty.retain(|&d| {
                let live = self.live_at[((t + 1) % period) as usize * self.n_dev + d as usize];
                if !live {
                    self.frame[d as usize] = 0;
                }
                live
            });
            std::mem::swap(&mut self.dirty, &mut next_dirty);
            t += 1;
        }
        // Everything measured from now on sees the settled data frame.
        let mut parity: HashMap<usize, bool> = HashMap::new();
        let mut data = Vec::new();
        for &d in &self.dirty {
            let f = self.frame[d as usize];
            let v = self.var_at[(t % period) as usize * self.n_dev + d as usize];
            if !self.is_data_var[v as usize] {
                continue;
            }
            data.push((prog.data_index[v as usize], f));
            for &s in &self.containing[v as usize] {
                let bit = match prog.stabilizer_kinds[s] {
                    Kind::Z => f & 1,
                    Kind::X => f & 2,
                };
                if bit != 0 {
                    *parity.entry(s).or_default() ^= true;
                }
            }
        }
        data.sort_unstable();
        let mut stabs: Vec<usize> = parity.iter().filter(|(_, &v)| v).map(|(&s, _)| s).collect();
        stabs.extend(self.touched_stabs.iter().copied());
        stabs.sort_unstable();
        stabs.dedup();
        for s in stabs {
            let steady = parity.get(&s).copied().unwrap_or(false);
            if steady != self.last[s] {
                let (meas, delta) = self.next_measurement(s, t);
                self.last[s] = steady;
                events.push((meas, delta));
            }
        }
        // Reset scratch.
        for &d in &self.dirty {
            self.frame[d as usize] = 0;
        }
        self.dirty.clear();
        for s in self.touched_stabs.drain(..) {
            self.last[s] = false;
        }
        for (m, _) in &events {
            self.last[prog.measurements[*m as usize].0] = false;
        }
        events.sort_by_key(|&(m, k)| (k, prog.measurements[m as usize].2, m));
        FaultResponse { events, data }
    }

    /// First measurement of `s` at or after absolute step `t`.
    fn next_measurement(&self, s: usize, t: u64) -> (u32, i64) {
        let period = self.program.period as u64;
        let off = (t % period) as u32;
        let list = &self.stab_meas[s];
        let pos = list.partition_point(|&m| self.program.measurements[m as usize].2 < off);
        if pos < list.len() {
            (list[pos], (t / period) as i64)
        } else {
            (list[0], (t / period) as i64 + 1)
        }
    }
}

/// Liveness table indexed `[offset * n_dev + device]`.
fn liveness(program: &Program, is_data_var: &[bool]) -> Vec<bool> {
    let n_dev = program.n_devices;
    let p = program.period as usize;
    let run = |start: &[bool], table: Option<&mut Vec<bool>>| -> Vec<bool> {
        let mut vars = program.initial_vars.clone();
        let mut live = start.to_vec();
        let mut table = table;
        for t in 0..p {
            if let Some(tab) = table.as_deref_mut() {
                for d in 0..n_dev {
                    tab[t * n_dev + d] = is_data_var[vars[d] as usize] || live[vars[d] as usize];
                }
            }
            for op in &program.ops[program.step_start[t]..program.step_start[t + 1]] {
                match op.kind {
                    OpKind::Init => live[vars[op.a as usize] as usize] = true,
                    OpKind::Meas => live[vars[op.a as usize] as usize] = false,
                    OpKind::Swap => vars.swap(op.a as usize, op.b as usize),
                    _ => {}
                }
            }
        }
        live
    };
    // A syndrome variable is live at block start iff its last INIT/MEAS in the
    // block was an INIT; untouched variables are junk.
    let start = run(&vec![false; n_dev], None);
    let mut table = vec![false; p * n_dev];
    let end = run(&start, Some(&mut table));
    debug_assert_eq!(start, end, "liveness must be periodic");
    table
}

/// Longest INIT-to-MEAS span of any instance in the block, plus one.
pub fn instance_span(program: &Program) -> u32 {
    let p = program.period as i64;
    let mut inits: HashMap<usize, Vec<u32>> = HashMap::new();
    for &(s, off) in &program.inits {
        inits.entry(s).or_default().push(off);
    }
    let mut span = 0;
    for &(s, _, m) in &program.measurements {
        let list = &inits[&s];
        let pos = list.partition_point(|&i| i <= m);
        // The instance began at the latest INIT before it, possibly a block earlier.
        let start = if pos > 0 {
            list[pos - 1] as i64
        } else {
            *list.last().unwrap() as i64 - p
        };
        span = span.max(m as i64 - start);
    }
    span as u32 + 1
}

/// Build both nests. Index 0 holds X-stabilizer events, index 1 Z-stabilizer
/// events, matching [`Kind::index`].
pub fn build_nests(program: &Program, set: &StabilizerSet, n: usize) -> [Nest; 2] {
    let mut nests = [Kind::X, Kind::Z].map(|kind| {
        let by = &program.by_kind[kind.index()];
        Nest {
            kind,
            period: program.period,
            offsets: by.iter().map(|&m| program.measurements[m as usize].2).collect(),
            stabilizers: by.iter().map(|&m| program.measurements[m as usize].0).collect(),
            edges: Vec::new(),
            adjacency: Vec::new(),
            stats: NestStats::default(),
        }
    });
    let mut index: [HashMap<(u32, Neighbor), u32>; 2] = [HashMap::new(), HashMap::new()];
    let mut prop = Propagator::new(program, set, n);
    let mut effect = Vec::new();
    for (loc, op) in program.ops.iter().enumerate() {
        let k = op.kind.n_outcomes();
        let c = 1.0 / k as f64;
        for o in 0..k {
            let (pa, pb) = op.kind.outcome(o);
            let resp = prop.respond(loc, pa, pb);
            for kind in [Kind::X, Kind::Z] {
                let ki = kind.index();
                let nest = &mut nests[ki];
                nest.stats.total += c;
                let verts: Vec<(i64, u32)> = resp
                    .events
                    .iter()
                    .filter(|(m, _)| program.measurements[*m as usize].1 == kind)
                    .map(|&(m, dk)| (dk, program.local_index[m as usize]))
                    .collect();
                // Z stabilizers see X bits; X stabilizers see Z bits.
                let mask = if kind == Kind::Z { 1 } else { 2 };
                effect.clear();
                effect.extend(resp.data.iter().filter(|(_, f)| f & mask != 0).map(|&(q, _)| q));
                if verts.is_empty() {
                    nest.stats.silent += c;
                    continue;
                }
                let pieces = verts.len().div_ceil(2);
                if verts.len() > 2 {
                    nest.stats.hyperedges += 1;
                    nest.stats.split_extra += c * (pieces - 1) as f64;
                }
                // Pair consecutive events; an odd leftover goes to the boundary
                // and carries the data effect, otherwise the first pair does.
                let odd = verts.len() % 2 == 1;
                for (pi, chunk) in verts.chunks(2).enumerate() {
                    let carries = if odd { chunk.len() == 1 } else { pi == 0 };
                    let eff: &[u32] = if carries { &effect } else { &[] };
                    let (k0, j0) = chunk[0];
                    let key = match chunk.get(1) {
                        Some(&(k1, j1)) => (j0, Neighbor::Vertex(j1, (k1 - k0) as i32)),
                        None => (j0, Neighbor::Boundary),
                    };
                    nest.insert(key, c, eff, &mut index[ki]);
                }
            }
        }
    }
    for nest in &mut nests {
        nest.finish();
    }
    nests
}
