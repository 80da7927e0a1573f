//! Stabilizer circuit compilation (gather, hop, restore) and asynchronous
//! whole-chip scheduling.

mod compose;
mod schedule;

use std::fmt;

pub use compose::{compose_all, compose_stabilizer_circuit, StabilizerCircuit, TemplateOp};
pub use schedule::{schedule_whole_circuit, ScheduleOptions, WholeCircuit};

use crate::lattice::DeviceId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Init,
    Cnot,
    Swap,
    H,
    Meas,
    Id,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::Init => "INIT_Z",
            GateKind::Cnot => "CNOT",
            GateKind::Swap => "SWAP",
            GateKind::H => "H",
            GateKind::Meas => "MEAS_Z",
            GateKind::Id => "ID",
        }
    }

    pub fn parse(s: &str) -> Option<GateKind> {
        Some(match s {
            "INIT_Z" => GateKind::Init,
            "CNOT" => GateKind::Cnot,
            "SWAP" => GateKind::Swap,
            "H" => GateKind::H,
            "MEAS_Z" => GateKind::Meas,
            "ID" => GateKind::Id,
            _ => return None,
        })
    }

    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateKind::Cnot | GateKind::Swap)
    }
}

/// A scheduled gate. For CNOT, `a` is the control and `b` the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub a: DeviceId,
    pub b: Option<DeviceId>,
    pub step: u32,
    /// Owning stabilizer id. Waiting IDs belong to the waiting stabilizer.
    pub owner: Option<usize>,
}

impl Gate {
    pub fn devices(&self) -> impl Iterator<Item = DeviceId> {
        std::iter::once(self.a).chain(self.b)
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.step, self.kind.name(), self.a)?;
        if let Some(b) = self.b {
            write!(f, ",{b}")?;
        }
        match self.owner {
            Some(o) => write!(f, " {o}"),
            None => write!(f, " -"),
        }
    }
}

/// Parse one line of the circuit text format.
pub fn parse_gate(line: &str) -> Option<Gate> {
    let mut it = line.split_whitespace();
    let step = it.next()?.parse().ok()?;
    let kind = GateKind::parse(it.next()?)?;
    let devs = it.next()?;
    let owner = match it.next()? {
        "-" => None,
        o => Some(o.parse().ok()?),
    };
    let parse_dev = |s: &str| -> Option<DeviceId> {
        let (r, c) = s.split_once(':')?;
        Some(DeviceId::new(r.parse().ok()?, c.parse().ok()?))
    };
    let mut parts = devs.split(',');
    let a = parse_dev(parts.next()?)?;
    let b = match parts.next() {
        Some(s) => Some(parse_dev(s)?),
        None => None,
    };
    Some(Gate {
        kind,
        a,
        b,
        step,
        owner,
    })
}
