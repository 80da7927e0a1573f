//! Chip to schedule in one call.

use crate::circuits::{self, ScheduleOptions, StabilizerCircuit, WholeCircuit};
use crate::lattice::{self, Chip, Reconfiguration};
use crate::stabilizers::{self, StabilizerSet};
use crate::Error;

/// Everything derived from a chip without simulation.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub chip: Chip,
    pub reconfiguration: Reconfiguration,
    pub stabilizers: StabilizerSet,
    pub circuits: Vec<StabilizerCircuit>,
    pub whole: WholeCircuit,
}

pub fn compile(chip: &Chip) -> Result<Compiled, Error> {
    let reconfiguration = lattice::reconfigure(chip)?;
    let stabilizers = stabilizers::from_reconfiguration(chip, &reconfiguration);
    let circuits = circuits::compose_all(chip, &stabilizers)?;
    let deepest = circuits.iter().map(|c| c.depth).max().unwrap_or(1);
    let mut max_step = (deepest * 48).max(384);
    let whole = loop {
        match circuits::schedule_whole_circuit(&circuits, chip.size(), ScheduleOptions { max_step }) {
            Ok(w) => break w,
            Err(Error::Invalid(_)) if max_step < 1 << 15 => max_step *= 2,
            Err(e) => return Err(e),
        }
    };
    Ok(Compiled {
        chip: chip.clone(),
        reconfiguration,
        stabilizers,
        circuits,
        whole,
    })
}
