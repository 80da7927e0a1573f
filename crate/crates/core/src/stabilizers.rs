//! Reconfigured stabilizer sets: unit plaquettes merged into superunits around
//! disabled data qubits, boundary stabilizers dropped when they merge into a
//! terminal.

use std::collections::{BTreeMap, HashMap};

use crate::lattice::{self, syndrome_kind, Chip, DeviceId, Kind, Node, Reconfiguration};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stabilizer {
    pub id: usize,
    pub kind: Kind,
    /// Sorted row-major.
    pub data_qubits: Vec<DeviceId>,
    /// Home syndrome positions of the merged units, sorted.
    pub units: Vec<DeviceId>,
    /// Working syndrome devices the compiler may gather on.
    pub ancilla_candidates: Vec<DeviceId>,
}

impl Stabilizer {
    pub fn merged_from(&self) -> usize {
        self.units.len()
    }

    /// Representative position used for "upper left" tie-breaks.
    pub fn home(&self) -> DeviceId {
        self.units[0]
    }

    pub fn is_superunit(&self) -> bool {
        self.units.len() > 1
    }
}

/// Representative logical chains: `x_chain` is an X operator running north to
/// south, `z_chain` a Z operator running west to east.
///
/// `x_check` / `z_check` are the supports used for parity verdicts: the edges
/// incident to the north (resp. west) terminal component. They anticommute
/// with the logical of the other type and commute with every cycle of the
/// graph, including the gauge loops around double-merged holes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicalOperators {
    pub x_chain: Vec<DeviceId>,
    pub z_chain: Vec<DeviceId>,
    /// Z-type support; odd overlap with an X residual means a logical X error.
    pub z_check: Vec<DeviceId>,
    /// X-type support; odd overlap with a Z residual means a logical Z error.
    pub x_check: Vec<DeviceId>,
}

#[derive(Clone, Debug)]
pub struct StabilizerSet {
    pub distance: usize,
    pub stabilizers: Vec<Stabilizer>,
    pub logical: LogicalOperators,
    pub retired: Vec<DeviceId>,
}

impl StabilizerSet {
    pub fn count(&self, kind: Kind) -> usize {
        self.stabilizers.iter().filter(|s| s.kind == kind).count()
    }

    pub fn of_kind(&self, kind: Kind) -> impl Iterator<Item = &Stabilizer> {
        self.stabilizers.iter().filter(move |s| s.kind == kind)
    }

    pub fn len(&self) -> usize {
        self.stabilizers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stabilizers.is_empty()
    }

    /// Stabilizers of `kind` containing each data qubit.
    pub fn qubit_index(&self, kind: Kind) -> HashMap<DeviceId, Vec<usize>> {
        let mut map: HashMap<DeviceId, Vec<usize>> = HashMap::new();
        for s in self.of_kind(kind) {
            for &q in &s.data_qubits {
                map.entry(q).or_default().push(s.id);
            }
        }
        map
    }
}

pub fn build_stabilizer_set(chip: &Chip) -> Result<StabilizerSet, Error> {
    let rc = lattice::reconfigure(chip)?;
    Ok(from_reconfiguration(chip, &rc))
}

pub fn from_reconfiguration(chip: &Chip, rc: &Reconfiguration) -> StabilizerSet {
    let n = chip.size();
    let mut stabs = Vec::new();
    for kind in [Kind::X, Kind::Z] {
        let g = rc.graph(kind);
        let mut units: BTreeMap<usize, Vec<DeviceId>> = BTreeMap::new();
        for i in 0..n * n {
            let d = chip.id(i);
            if syndrome_kind(d.r(), d.c()) == Some(kind) {
                let root = g.find(Node::Unit(d));
                if !g.is_terminal_component(root) {
                    units.entry(root).or_default().push(d);
                }
            }
        }
        let mut support: HashMap<usize, Vec<DeviceId>> = HashMap::new();
        for q in rc.enabled_data() {
            let (a, b) = g.ends(q);
            debug_assert_ne!(a, b, "retired qubits are disabled");
            for root in [a, b] {
                if units.contains_key(&root) {
                    support.entry(root).or_default().push(q);
                }
            }
        }
        for (root, mut us) in units {
            let Some(mut data) = support.remove(&root) else {
                continue;
            };
            data.sort();
            us.sort();
            let ancilla_candidates = ancilla_candidates(chip, &us, &data);
            stabs.push(Stabilizer {
                id: 0,
                kind,
                data_qubits: data,
                units: us,
                ancilla_candidates,
            });
        }
    }
    stabs.sort_by_key(|s| s.home());
    for (i, s) in stabs.iter_mut().enumerate() {
        s.id = i;
    }
    let logical = logical_operators(rc);
    StabilizerSet {
        distance: chip.distance,
        stabilizers: stabs,
        logical,
        retired: rc.retired.clone(),
    }
}

/// Working homes if they already neighbour every data qubit, otherwise every
/// working syndrome device adjacent to the support.
fn ancilla_candidates(chip: &Chip, units: &[DeviceId], data: &[DeviceId]) -> Vec<DeviceId> {
    let homes: Vec<DeviceId> = units.iter().copied().filter(|&u| chip.is_working(u)).collect();
    let covered = data.iter().all(|q| homes.iter().any(|h| h.is_adjacent(*q)));
    if covered {
        return homes;
    }
    let mut out: Vec<DeviceId> = data
        .iter()
        .flat_map(|&q| chip.neighbors(q).collect::<Vec<_>>())
        .filter(|&a| chip.is_working(a))
        .collect();
    out.sort();
    out.dedup();
    out
}

fn logical_operators(rc: &Reconfiguration) -> LogicalOperators {
    let terminal_cut = |kind: Kind| -> Vec<DeviceId> {
        let g = rc.graph(kind);
        let ta = g.terminal_a();
        rc.enabled_data()
            .filter(|&q| {
                let (a, b) = g.ends(q);
                (a == ta) != (b == ta)
            })
            .collect()
    };
    LogicalOperators {
        x_chain: lattice::shortest_chain(rc, Kind::Z).unwrap_or_default(),
        z_chain: lattice::shortest_chain(rc, Kind::X).unwrap_or_default(),
        z_check: terminal_cut(Kind::Z),
        x_check: terminal_cut(Kind::X),
    }
}

/// True iff every X/Z pair overlaps on an even number of qubits.
pub fn verify_commutation(stabs: &[Stabilizer]) -> bool {
    let mut by_qubit: HashMap<DeviceId, Vec<usize>> = HashMap::new();
    for (i, s) in stabs.iter().enumerate() {
        if s.kind == Kind::X {
            for &q in &s.data_qubits {
                by_qubit.entry(q).or_default().push(i);
            }
        }
    }
    for z in stabs.iter().filter(|s| s.kind == Kind::Z) {
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        for q in &z.data_qubits {
            for &x in by_qubit.get(q).into_iter().flatten() {
                *overlap.entry(x).or_default() += 1;
            }
        }
        if overlap.values().any(|c| c % 2 == 1) {
            return false;
        }
    }
    true
}

/// Every enabled data qubit lies in one stabilizer of each kind per
/// non-terminal endpoint, and nowhere else.
pub fn verify_coverage(chip: &Chip, set: &StabilizerSet) -> bool {
    let Ok(rc) = lattice::reconfigure(chip) else {
        return false;
    };
    for kind in [Kind::X, Kind::Z] {
        let index = set.qubit_index(kind);
        let g = rc.graph(kind);
        for q in chip.data_devices() {
            let got = index.get(&q).map_or(0, |v| v.len());
            let expected = if rc.is_enabled(q) {
                let (a, b) = g.ends(q);
                [a, b].iter().filter(|&&r| !g.is_terminal_component(r)).count()
            } else {
                0
            };
            if got != expected || got > 2 {
                return false;
            }
        }
    }
    true
}

/// Text dump: version line, then one line per stabilizer.
pub fn dump(set: &StabilizerSet) -> String {
    let mut out = String::from("# superunit stabilizers v1\n");
    for s in &set.stabilizers {
        let join = |v: &[DeviceId]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        out.push_str(&format!(
            "{} {} units={} data={} anc={}\n",
            s.id,
            s.kind,
            join(&s.units),
            join(&s.data_qubits),
            join(&s.ancilla_candidates)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_d5_counts() {
        let set = build_stabilizer_set(&Chip::perfect(5)).unwrap();
        assert_eq!((set.count(Kind::Z), set.count(Kind::X)), (20, 20));
        assert!(set.stabilizers.iter().all(|s| s.ancilla_candidates == s.units));
        assert!(verify_commutation(&set.stabilizers));
    }

    #[test]
    fn centre_fault_superunit() {
        let chip = Chip::with_faults(5, &[DeviceId::new(4, 4)]);
        let set = build_stabilizer_set(&chip).unwrap();
        assert_eq!(set.len(), 38);
        assert_eq!(set.count(Kind::Z), 19);
        let sup = set.of_kind(Kind::Z).find(|s| s.is_superunit()).unwrap();
        let labels: Vec<usize> = sup.data_qubits.iter().map(|d| d.label(9)).collect();
        assert_eq!(labels, vec![22, 30, 32, 48, 50, 58]);
        assert_eq!(sup.units, vec![DeviceId::new(3, 4), DeviceId::new(5, 4)]);
    }

    #[test]
    fn faulty_syndrome_keeps_supports() {
        let perfect = build_stabilizer_set(&Chip::perfect(5)).unwrap();
        let chip = Chip::with_faults(5, &[DeviceId::new(3, 4)]);
        let set = build_stabilizer_set(&chip).unwrap();
        for (a, b) in perfect.stabilizers.iter().zip(&set.stabilizers) {
            assert_eq!(a.data_qubits, b.data_qubits);
        }
        let s = set
            .stabilizers
            .iter()
            .find(|s| s.home() == DeviceId::new(3, 4))
            .unwrap();
        assert_eq!(s.ancilla_candidates.len(), 8);
    }

    #[test]
    fn boundary_fault_promotes_qubits() {
        // (0,4) touches only Z(1,4) and the north terminal.
        let chip = Chip::with_faults(5, &[DeviceId::new(0, 4)]);
        let set = build_stabilizer_set(&chip).unwrap();
        assert_eq!(set.count(Kind::Z), 19);
        assert!(!set.of_kind(Kind::Z).any(|s| s.units.contains(&DeviceId::new(1, 4))));
        assert!(verify_commutation(&set.stabilizers));
        assert!(verify_coverage(&chip, &set));
    }
}
