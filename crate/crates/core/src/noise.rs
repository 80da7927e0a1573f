//! Circuit-level Pauli noise and Pauli-frame replay of the periodic schedule.
//!
//! Frames are stored per device and move with their variable under SWAP, so a
//! device's frame is always the frame of the variable it currently holds.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::circuits::{GateKind, WholeCircuit};
use crate::lattice::{role_at, Kind, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Pauli {
    pub x: bool,
    pub z: bool,
}

impl Pauli {
    pub const I: Pauli = Pauli { x: false, z: false };
    pub const X: Pauli = Pauli { x: true, z: false };
    pub const Y: Pauli = Pauli { x: true, z: true };
    pub const Z: Pauli = Pauli { x: false, z: true };
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn bits(self) -> u8 {
        self.x as u8 | (self.z as u8) << 1
    }

    pub fn from_bits(b: u8) -> Pauli {
        Pauli {
            x: b & 1 != 0,
            z: b & 2 != 0,
        }
    }

    pub fn is_identity(self) -> bool {
        !self.x && !self.z
    }
}

/// The 15 non-identity two-qubit Paulis, in the order IX, IZ, IY, XI, XX, XZ,
/// XY, ZI, ZX, ZZ, ZY, YI, YX, YZ, YY.
pub const TWO_QUBIT_PAULIS: [(Pauli, Pauli); 15] = {
    use Pauli as P;
    let firsts = [P::I, P::X, P::Z, P::Y];
    let seconds = [P::X, P::Z, P::Y];
    let mut out = [(P::I, P::I); 15];
    let mut i = 0;
    // I row has no II; the others include I as second operand.
    while i < 3 {
        out[i] = (P::I, seconds[i]);
        i += 1;
    }
    let mut f = 1;
    while f < 4 {
        let row = [P::I, P::X, P::Z, P::Y];
        let mut s = 0;
        while s < 4 {
            out[3 + (f - 1) * 4 + s] = (firsts[f], row[s]);
            s += 1;
        }
        f += 1;
    }
    out
};

const ONE_QUBIT_PAULIS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

/// I with probability 1-p, otherwise X, Y or Z uniformly.
pub fn sample_channel_1q<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Pauli {
    if p > 0.0 && rng.random::<f64>() < p {
        ONE_QUBIT_PAULIS[rng.random_range(0..3)]
    } else {
        Pauli::I
    }
}

/// II with probability 1-p, otherwise one of the 15 other pairs uniformly.
pub fn sample_channel_2q<R: Rng + ?Sized>(p: f64, rng: &mut R) -> (Pauli, Pauli) {
    if p > 0.0 && rng.random::<f64>() < p {
        TWO_QUBIT_PAULIS[rng.random_range(0..15)]
    } else {
        (Pauli::I, Pauli::I)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Init,
    H,
    Cnot,
    Swap,
    Meas,
    Id,
    /// Data variable with no gate this step; noise only.
    Idle,
}

impl OpKind {
    /// Number of distinct non-trivial fault outcomes at this location.
    pub fn n_outcomes(self) -> usize {
        match self {
            OpKind::Init | OpKind::Meas => 1,
            OpKind::Cnot | OpKind::Swap => 15,
            _ => 3,
        }
    }

    /// Fault outcome `i` as (Pauli on `a`, Pauli on `b`). Each outcome carries
    /// probability `p / n_outcomes`.
    pub fn outcome(self, i: usize) -> (Pauli, Pauli) {
        match self {
            OpKind::Init | OpKind::Meas => (Pauli::X, Pauli::I),
            OpKind::Cnot | OpKind::Swap => TWO_QUBIT_PAULIS[i],
            _ => (ONE_QUBIT_PAULIS[i], Pauli::I),
        }
    }
}

/// A noisy location. For CNOT `a` is the control.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Op {
    pub kind: OpKind,
    pub a: u32,
    pub b: u32,
    /// Block measurement index for MEAS, else `u32::MAX`.
    pub meas: u32,
}

/// The periodic block flattened for replay. Location `i` of the block is
/// `ops[i]`; steps partition `ops` by `step_start`.
#[derive(Clone, Debug)]
pub struct Program {
    pub n_devices: usize,
    pub period: u32,
    pub ops: Vec<Op>,
    /// `ops[step_start[t]..step_start[t + 1]]` run at block offset `t`.
    pub step_start: Vec<usize>,
    /// Per block measurement: (stabilizer, kind, offset).
    pub measurements: Vec<(usize, Kind, u32)>,
    /// Per kind: local vertex index of each block measurement (or MAX).
    pub local_index: Vec<u32>,
    /// Per kind: block measurement index of each local vertex.
    pub by_kind: [Vec<u32>; 2],
    pub n_stabilizers: usize,
    pub stabilizer_kinds: Vec<Kind>,
    /// Variable held by each device at block start.
    pub initial_vars: Vec<u32>,
    /// Home device labels of data variables, dense order.
    pub data_vars: Vec<u32>,
    /// Dense data index per variable label (or MAX).
    pub data_index: Vec<u32>,
    pub idle_noise: bool,
    /// (stabilizer, offset) of every INIT in the block.
    pub inits: Vec<(usize, u32)>,
}

impl Program {
    pub fn new(whole: &WholeCircuit, idle_noise: bool) -> Program {
        let n = whole.n;
        let n_dev = n * n;
        let is_data_var = |v: u32| role_at(v as usize / n, v as usize % n) == Role::Data;
        // Only variables the schedule touches take part; disabled qubits stay silent.
        let mut participating = vec![false; n_dev];
        for g in whole.block.iter().flatten() {
            for d in g.devices() {
                participating[d.label(n)] = true;
            }
        }
        let mut vars = whole.variables_at_start.clone();
        let mut ops = Vec::new();
        let mut step_start = Vec::with_capacity(whole.period as usize + 1);
        let mut meas_index = 0u32;
        let mut busy = vec![false; n_dev];
        let mut inits = Vec::new();
        for (t, gates) in whole.block.iter().enumerate() {
            step_start.push(ops.len());
            busy.iter_mut().for_each(|b| *b = false);
            for g in gates {
                let a = g.a.label(n) as u32;
                let b = g.b.map_or(u32::MAX, |d| d.label(n) as u32);
                busy[a as usize] = true;
                if b != u32::MAX {
                    busy[b as usize] = true;
                }
                let kind = match g.kind {
                    GateKind::Init => OpKind::Init,
                    GateKind::H => OpKind::H,
                    GateKind::Cnot => OpKind::Cnot,
                    GateKind::Swap => OpKind::Swap,
                    GateKind::Meas => OpKind::Meas,
                    GateKind::Id => OpKind::Id,
                };
                if let (OpKind::Init, Some(owner)) = (kind, g.owner) {
                    inits.push((owner, t as u32));
                }
                let meas = if kind == OpKind::Meas {
                    meas_index += 1;
                    meas_index - 1
                } else {
                    u32::MAX
                };
                ops.push(Op { kind, a, b, meas });
            }
            if idle_noise {
                for (d, &v) in vars.iter().enumerate() {
                    if !busy[d] && is_data_var(v) && participating[v as usize] {
                        ops.push(Op {
                            kind: OpKind::Idle,
                            a: d as u32,
                            b: u32::MAX,
                            meas: u32::MAX,
                        });
                    }
                }
            }
            for g in gates.iter().filter(|g| g.kind == GateKind::Swap) {
                vars.swap(g.a.label(n), g.b.unwrap().label(n));
            }
        }
        step_start.push(ops.len());
        debug_assert_eq!(vars, whole.variables_at_start, "block must restore the variable map");
        let measurements: Vec<(usize, Kind, u32)> = whole
            .measurements
            .iter()
            .map(|m| (m.stabilizer, whole.stabilizer_kinds[m.stabilizer], m.offset))
            .collect();
        let mut local_index = vec![u32::MAX; measurements.len()];
        let mut by_kind: [Vec<u32>; 2] = [Vec::new(), Vec::new()];
        for (i, &(_, kind, _)) in measurements.iter().enumerate() {
            local_index[i] = by_kind[kind.index()].len() as u32;
            by_kind[kind.index()].push(i as u32);
        }
        let mut data_index = vec![u32::MAX; n_dev];
        let mut data_vars = Vec::new();
        for v in 0..n_dev as u32 {
            if is_data_var(v) {
                data_index[v as usize] = data_vars.len() as u32;
                data_vars.push(v);
            }
        }
        Program {
            n_devices: n_dev,
            period: whole.period,
            ops,
            step_start,
            measurements,
            local_index,
            by_kind,
            n_stabilizers: whole.n_stabilizers(),
            stabilizer_kinds: whole.stabilizer_kinds.clone(),
            initial_vars: whole.variables_at_start.clone(),
            data_vars,
            data_index,
            idle_noise,
            inits,
        }
    }

    pub fn n_locations(&self) -> usize {
        self.ops.len()
    }

    pub fn step_of_location(&self, loc: usize) -> u32 {
        (self.step_start.partition_point(|&s| s <= loc) - 1) as u32
    }
}

/// Ideal action of `op` on the frame array.
#[inline]
pub fn apply_gate(frame: &mut [u8], op: &Op) {
    let (a, b) = (op.a as usize, op.b as usize);
    match op.kind {
        OpKind::Init => frame[a] = 0,
        OpKind::H => {
            let f = frame[a];
            frame[a] = (f >> 1) | ((f & 1) << 1);
        }
        OpKind::Cnot => {
            // X flows control -> target, Z flows target -> control.
            let (fc, ft) = (frame[a], frame[b]);
            frame[b] = ft ^ (fc & 1);
            frame[a] = fc ^ (ft & 2);
        }
        OpKind::Swap => frame.swap(a, b),
        OpKind::Meas | OpKind::Id | OpKind::Idle => {}
    }
}

/// One injected fault, as recorded or as requested in injection mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fault {
    /// Absolute step counted from the first replayed block.
    pub step: u64,
    /// Location index within the block.
    pub location: u32,
    pub a: Pauli,
    pub b: Pauli,
}

/// A measurement result: block number, block measurement index, outcome flip.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub block: u64,
    pub meas: u32,
    pub flip: bool,
}

/// Pauli-frame replay of a [`Program`] with sampled or injected faults.
#[derive(Clone, Debug)]
pub struct Simulator<'a> {
    pub program: &'a Program,
    frame: Vec<u8>,
    vars: Vec<u32>,
    device_of: Vec<u32>,
    block: u64,
    offset: u32,
    p: f64,
    geometric: Option<Geometric>,
    next_fault: u64,
    injections: Vec<Fault>,
    pub record: Option<Vec<Fault>>,
}

impl<'a> Simulator<'a> {
    pub fn new<R: Rng + ?Sized>(program: &'a Program, p: f64, rng: &mut R) -> Self {
        let mut device_of = vec![0u32; program.n_devices];
        for (d, &v) in program.initial_vars.iter().enumerate() {
            device_of[v as usize] = d as u32;
        }
        let geometric = (p > 0.0).then(|| Geometric::new(p).expect("valid probability"));
        let mut sim = Simulator {
            program,
            frame: vec![0; program.n_devices],
            vars: program.initial_vars.clone(),
            device_of,
            block: 0,
            offset: 0,
            p,
            geometric,
            next_fault: u64::MAX,
            injections: Vec::new(),
            record: None,
        };
        sim.next_fault = sim.draw_skip(0, rng);
        sim
    }

    /// Noiseless replay with the given faults inserted, sorted by (step, location).
    pub fn with_injections(program: &'a Program, mut faults: Vec<Fault>) -> Self {
        faults.sort_by_key(|f| std::cmp::Reverse((f.step, f.location)));
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut sim = Simulator::new(program, 0.0, &mut rng);
        sim.injections = faults;
        sim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn draw_skip<R: Rng + ?Sized>(&self, from: u64, rng: &mut R) -> u64 {
        match &self.geometric {
            Some(g) => from.saturating_add(g.sample(rng)),
            None => u64::MAX,
        }
    }

    pub fn absolute_step(&self) -> u64 {
        self.block * self.program.period as u64 + self.offset as u64
    }

    pub fn block(&self) -> u64 {
        self.block
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    /// Replay one step, pushing measurement outcomes.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut Vec<Outcome>) {
        let prog = self.program;
        let t = self.offset as usize;
        let (lo, hi) = (prog.step_start[t], prog.step_start[t + 1]);
        let n_loc = prog.n_locations() as u64;
        let base = self.block * n_loc;
        let abs_step = self.absolute_step();
        for i in lo..hi {
            let op = &prog.ops[i];
            let fault = self.fault_at(base + i as u64, abs_step, i as u32, op.kind, rng);
            if op.kind == OpKind::Meas {
                if let Some((fa, _)) = fault {
                    self.frame[op.a as usize] ^= fa.bits();
                }
                let flip = self.frame[op.a as usize] & 1 != 0;
                out.push(Outcome {
                    block: self.block,
                    meas: op.meas,
                    flip,
                });
                self.frame[op.a as usize] = 0;
                continue;
            }
            apply_gate(&mut self.frame, op);
            if op.kind == OpKind::Swap {
                let (a, b) = (op.a as usize, op.b as usize);
                self.vars.swap(a, b);
                self.device_of[self.vars[a] as usize] = a as u32;
                self.device_of[self.vars[b] as usize] = b as u32;
            }
            if let Some((fa, fb)) = fault {
                self.frame[op.a as usize] ^= fa.bits();
                if op.b != u32::MAX {
                    self.frame[op.b as usize] ^= fb.bits();
                }
            }
        }
        self.offset += 1;
        if self.offset == prog.period {
            self.offset = 0;
            self.block += 1;
        }
    }

    fn fault_at<R: Rng + ?Sized>(
        &mut self,
        global: u64,
        abs_step: u64,
        location: u32,
        kind: OpKind,
        rng: &mut R,
    ) -> Option<(Pauli, Pauli)> {
        let mut fault = None;
        if global == self.next_fault {
            let k = kind.n_outcomes();
            let o = kind.outcome(if k == 1 { 0 } else { rng.random_range(0..k) });
            fault = Some(o);
            self.next_fault = self.draw_skip(global + 1, rng);
        }
        while let Some(f) = self.injections.last() {
            if (f.step, f.location) > (abs_step, location) {
                break;
            }
            let f = self.injections.pop().unwrap();
            if (f.step, f.location) == (abs_step, location) {
                let (a, b) = fault.unwrap_or((Pauli::I, Pauli::I));
                fault = Some((
                    Pauli::from_bits(a.bits() ^ f.a.bits()),
                    Pauli::from_bits(b.bits() ^ f.b.bits()),
                ));
            }
        }
        if let (Some((a, b)), Some(rec)) = (fault, self.record.as_mut()) {
            rec.push(Fault {
                step: abs_step,
                location,
                a,
                b,
            });
        }
        fault
    }

    /// Frame bits of every data variable, in dense data order.
    pub fn data_frame(&self, out: &mut Vec<u8>) {
        out.clear();
        out.extend(
            self.program
                .data_vars
                .iter()
                .map(|&v| self.frame[self.device_of[v as usize] as usize]),
        );
    }

    /// Data frame after `steps` further noiseless steps: every fault so far has
    /// finished spreading into the data, and no later fault is included.
    /// `frame` and `vars` are scratch buffers.
    pub fn settled_data_frame(&self, steps: u32, frame: &mut Vec<u8>, vars: &mut Vec<u32>, out: &mut Vec<u8>) {
        let prog = self.program;
        frame.clone_from(&self.frame);
        vars.clone_from(&self.vars);
        let mut offset = self.offset as usize;
        for _ in 0..steps {
            for op in &prog.ops[prog.step_start[offset]..prog.step_start[offset + 1]] {
                match op.kind {
                    OpKind::Meas => frame[op.a as usize] = 0,
                    OpKind::Swap => {
                        apply_gate(frame, op);
                        vars.swap(op.a as usize, op.b as usize);
                    }
                    _ => apply_gate(frame, op),
                }
            }
            offset = (offset + 1) % prog.period as usize;
        }
        out.clear();
        out.resize(prog.data_vars.len(), 0);
        for (d, &v) in vars.iter().enumerate() {
            let q = prog.data_index[v as usize];
            if q != u32::MAX {
                out[q as usize] = frame[d];
            }
        }
    }

    pub fn variable_at(&self, device: usize) -> u32 {
        self.vars[device]
    }

    /// Direct frame access for tests and deterministic setups.
    pub fn frame_mut(&mut self) -> &mut [u8] {
        &mut self.frame
    }

    pub fn device_of(&self, var: u32) -> u32 {
        self.device_of[var as usize]
    }
}

/// Syndrome history and ground truth of a bounded run.
#[derive(Clone, Debug, Default)]
pub struct WindowTrace {
    /// Per stabilizer: (absolute step, outcome flip) in time order.
    pub history: Vec<Vec<(u64, bool)>>,
    pub errors: Vec<Fault>,
    /// Variable held by each device after each block.
    pub variable_maps: Vec<Vec<u32>>,
}

/// Replay `blocks` periods with noise `p`, recording everything.
pub fn simulate_window<R: Rng + ?Sized>(program: &Program, p: f64, blocks: u64, rng: &mut R) -> WindowTrace {
    let mut sim = Simulator::new(program, p, rng);
    sim.record = Some(Vec::new());
    let mut trace = WindowTrace {
        history: vec![Vec::new(); program.n_stabilizers],
        ..Default::default()
    };
    let mut out = Vec::new();
    for _ in 0..blocks {
        for _ in 0..program.period {
            out.clear();
            sim.step(rng, &mut out);
            for o in &out {
                let (stab, _, offset) = program.measurements[o.meas as usize];
                trace.history[stab].push((o.block * program.period as u64 + offset as u64, o.flip));
            }
        }
        trace.variable_maps.push(sim.vars.clone());
    }
    trace.errors = sim.record.take().unwrap_or_default();
    trace
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_qubit_list_is_complete() {
        let mut seen: Vec<(u8, u8)> = TWO_QUBIT_PAULIS.iter().map(|(a, b)| (a.bits(), b.bits())).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 15);
        assert!(!seen.contains(&(0, 0)));
        assert_eq!(TWO_QUBIT_PAULIS[0], (Pauli::I, Pauli::X));
        assert_eq!(TWO_QUBIT_PAULIS[14], (Pauli::Y, Pauli::Y));
    }

    #[test]
    fn extreme_probabilities() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(sample_channel_1q(0.0, &mut rng), Pauli::I);
            assert_eq!(sample_channel_2q(0.0, &mut rng), (Pauli::I, Pauli::I));
            assert_ne!(sample_channel_1q(1.0, &mut rng), Pauli::I);
        }
    }
}
