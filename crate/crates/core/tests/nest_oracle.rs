//! Sparse fault propagation against dense noiseless replay with injection.

use superunit::lattice::{Chip, DeviceId};
use superunit::nest::{build_nests, Propagator};
use superunit::noise::{Fault, Program, Simulator};
use superunit::pipeline::compile;

/// Events of one injected fault by replaying whole blocks densely.
fn dense_events(
    program: &Program,
    loc: usize,
    fault: (superunit::noise::Pauli, superunit::noise::Pauli),
    blocks: u64,
) -> Vec<(u32, i64)> {
    let step = program.step_of_location(loc) as u64;
    let mut sim = Simulator::with_injections(
        program,
        vec![Fault {
            step,
            location: loc as u32,
            a: fault.0,
            b: fault.1,
        }],
    );
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let mut last = vec![false; program.n_stabilizers];
    let mut events = Vec::new();
    let mut out = Vec::new();
    for _ in 0..blocks * program.period as u64 {
        out.clear();
        sim.step(&mut rng, &mut out);
        for o in &out {
            let s = program.measurements[o.meas as usize].0;
            if last[s] != o.flip {
                last[s] = o.flip;
                events.push((o.meas, o.block as i64));
            }
        }
    }
    events.sort_by_key(|&(m, k)| (k, program.measurements[m as usize].2, m));
    events
}

fn check_chip(chip: &Chip, stride: usize) {
    let c = compile(chip).unwrap();
    let program = Program::new(&c.whole, true);
    let mut prop = Propagator::new(&program, &c.stabilizers, chip.size());
    let blocks = 3 + (prop.max_span() as u64 * 2) / program.period as u64;
    let mut checked = 0;
    for loc in (0..program.n_locations()).step_by(stride) {
        let kind = program.ops[loc].kind;
        for o in 0..kind.n_outcomes() {
            let f = kind.outcome(o);
            let sparse = prop.respond(loc, f.0, f.1);
            let dense = dense_events(&program, loc, f, blocks);
            assert_eq!(sparse.events, dense, "location {loc} {kind:?} outcome {o}");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

pub fn check_sparse_matches_dense_perfect_d3() {
    check_chip(&Chip::perfect(3), 7);
}

pub fn check_sparse_matches_dense_centre_fault_d5() {
    check_chip(&Chip::with_faults(5, &[DeviceId::new(4, 4)]), 53);
}

/// Edge and silent mass per kind predicted by dense replay of every
/// (location, outcome) pair; a mechanism with `m > 0` events yields `ceil(m/2)` edges.
pub fn check_nest_mass_matches_brute_force_enumeration_d3() {
    use superunit::lattice::Kind;
    let chip = Chip::perfect(3);
    let c = compile(&chip).unwrap();
    let program = Program::new(&c.whole, true);
    let nests = build_nests(&program, &c.stabilizers, chip.size());
    let prop = Propagator::new(&program, &c.stabilizers, chip.size());
    let blocks = 3 + (prop.max_span() as u64 * 2) / program.period as u64;
    let (mut edge_mass, mut silent, mut total) = ([0.0; 2], [0.0; 2], 0.0);
    for loc in 0..program.n_locations() {
        let kind = program.ops[loc].kind;
        let share = 1.0 / kind.n_outcomes() as f64;
        for o in 0..kind.n_outcomes() {
            let events = dense_events(&program, loc, kind.outcome(o), blocks);
            total += share;
            for k in [Kind::X, Kind::Z] {
                let m = events
                    .iter()
                    .filter(|(e, _)| program.measurements[*e as usize].1 == k)
                    .count();
                if m == 0 {
                    silent[k.index()] += share;
                } else {
                    edge_mass[k.index()] += share * m.div_ceil(2) as f64;
                }
            }
        }
    }
    for nest in &nests {
        let i = nest.kind.index();
        let built: f64 = nest.edges.iter().map(|e| e.coefficient).sum();
        assert!(
            (built - edge_mass[i]).abs() < 1e-9 * total,
            "{:?}: edges {built} vs {}",
            nest.kind,
            edge_mass[i]
        );
        assert!(
            (nest.stats.silent - silent[i]).abs() < 1e-9 * total,
            "{:?}: silent",
            nest.kind
        );
        assert!((nest.stats.total - total).abs() < 1e-9 * total);
        for e in &nest.edges {
            assert!(e.coefficient > 0.0);
            assert_ne!(e.b, superunit::nest::Neighbor::Vertex(e.a, 0), "self-loop");
        }
    }
}

pub fn check_nest_mass_is_conserved() {
    for chip in [Chip::perfect(3), Chip::with_faults(5, &[DeviceId::new(4, 4)])] {
        let c = compile(&chip).unwrap();
        let program = Program::new(&c.whole, true);
        for nest in build_nests(&program, &c.stabilizers, chip.size()) {
            let s = nest.stats;
            let expected = s.total - s.silent + s.split_extra;
            assert!((s.edges - expected).abs() < 1e-9 * s.total, "{s:?}");
        }
    }
}

#[test]
fn sparse_matches_dense_perfect_d3() {
    check_sparse_matches_dense_perfect_d3();
}

#[test]
fn sparse_matches_dense_centre_fault_d5() {
    check_sparse_matches_dense_centre_fault_d5();
}

#[test]
fn nest_mass_matches_brute_force_enumeration_d3() {
    check_nest_mass_matches_brute_force_enumeration_d3();
}

#[test]
fn nest_mass_is_conserved() {
    check_nest_mass_is_conserved();
}
