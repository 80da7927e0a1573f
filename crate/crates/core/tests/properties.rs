//! Invariants of every stage checked over random chips and random inputs.

use std::collections::{BTreeSet, HashSet, VecDeque};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use superunit::decoder::{mwpm, DecodingGraph, Vertex};
use superunit::lattice::{
    check_encodable, generate_chip, qubit_ends, reconfigure, reduced_distance, role_at, Chip, DeviceId, Kind, Node,
    Role,
};
use superunit::metrics::{compute_metrics, correlate, cull, geometric_mean, z_circuit_shapes, Mode};
use superunit::montecarlo::{run_logical_error_rate, Decoding, Prepared, RunConfig};
use superunit::nest::Neighbor;
use superunit::noise::{apply_gate, simulate_window, Op, OpKind, Program, Simulator};
use superunit::pipeline::compile;
use superunit::stabilizers::build_stabilizer_set;

fn random_chips(count: u64, seed0: u64) -> impl Iterator<Item = Chip> {
    (0..count).map(move |i| {
        let d = [3, 5, 7][(i % 3) as usize];
        let y = [0.8, 0.9, 0.95][((i / 3) % 3) as usize];
        generate_chip(d, y, seed0 + i)
    })
}

#[test]
fn roles_follow_the_checkerboard() {
    for chip in random_chips(1000, 100) {
        for (i, dev) in chip.devices.iter().enumerate() {
            let (r, c) = (i / chip.size(), i % chip.size());
            assert_eq!(dev.role, role_at(r, c));
            assert_eq!(dev.role == Role::Data, (r + c) % 2 == 0);
        }
    }
}

#[test]
fn fault_counts_are_binomial() {
    let (d, y, runs) = (5, 0.9, 2000);
    let n = ((2 * d - 1) * (2 * d - 1)) as f64;
    let mean = (0..runs)
        .map(|s| generate_chip(d, y, 50_000 + s).n_faulty() as f64)
        .sum::<f64>()
        / runs as f64;
    let sigma = (n * y * (1.0 - y) / runs as f64).sqrt();
    assert!(
        (mean - n * (1.0 - y)).abs() < 3.0 * sigma,
        "mean {mean} vs {}",
        n * (1.0 - y)
    );
}

/// Encodability by flood fill: terminals of either graph connected through
/// disabled data qubits, retiring working qubits whose ends meet, to a fixed point.
fn percolates(chip: &Chip) -> bool {
    let n = chip.size();
    let data: Vec<DeviceId> = chip.data_devices().collect();
    let mut disabled: HashSet<DeviceId> = data.iter().copied().filter(|&q| !chip.is_working(q)).collect();
    loop {
        let mut component: [std::collections::HashMap<Node, usize>; 2] = Default::default();
        for (ki, kind) in [Kind::X, Kind::Z].into_iter().enumerate() {
            let mut adj: std::collections::HashMap<Node, Vec<Node>> = Default::default();
            for &q in &disabled {
                let (a, b) = qubit_ends(n, q, kind);
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            }
            let mut label = 0;
            let starts: Vec<Node> = adj.keys().copied().collect();
            for s in starts {
                if component[ki].contains_key(&s) {
                    continue;
                }
                let mut queue = VecDeque::from([s]);
                component[ki].insert(s, label);
                while let Some(u) = queue.pop_front() {
                    for &v in &adj[&u] {
                        if !component[ki].contains_key(&v) {
                            component[ki].insert(v, label);
                            queue.push_back(v);
                        }
                    }
                }
                label += 1;
            }
            if component[ki]
                .get(&Node::TerminalA)
                .is_some_and(|c| component[ki].get(&Node::TerminalB) == Some(c))
            {
                return false;
            }
        }
        let before = disabled.len();
        for &q in &data {
            let meets = [Kind::X, Kind::Z].into_iter().enumerate().any(|(ki, kind)| {
                let (a, b) = qubit_ends(n, q, kind);
                matches!((component[ki].get(&a), component[ki].get(&b)), (Some(x), Some(y)) if x == y)
            });
            if meets {
                disabled.insert(q);
            }
        }
        if disabled.len() == before {
            return true;
        }
    }
}

#[test]
fn encodability_matches_flood_fill() {
    let mut encodable = 0;
    for chip in random_chips(1000, 7000) {
        let got = check_encodable(&chip);
        assert_eq!(got, percolates(&chip), "seed {}", chip.seed);
        encodable += got as usize;
    }
    assert!(encodable > 500 && encodable < 1000);
}

#[test]
fn perfect_chips_keep_full_distance() {
    for d in [3, 5, 7, 9] {
        for op in [Kind::X, Kind::Z] {
            assert_eq!(reduced_distance(&Chip::perfect(d), op).unwrap(), d);
        }
    }
}

fn unit_support(n: usize, home: DeviceId) -> Vec<DeviceId> {
    let (r, c) = (home.r() as isize, home.c() as isize);
    [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
        .into_iter()
        .filter(|&(a, b)| a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n)
        .map(|(a, b)| DeviceId::new(a as usize, b as usize))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[test]
fn supports_equal_merged_units_minus_disabled_qubits() {
    for chip in random_chips(600, 30_000) {
        let Ok(rc) = reconfigure(&chip) else { continue };
        let set = build_stabilizer_set(&chip).unwrap();
        for s in &set.stabilizers {
            let mut union = BTreeSet::new();
            let mut twice = BTreeSet::new();
            for &u in &s.units {
                for q in unit_support(chip.size(), u) {
                    if !union.insert(q) {
                        twice.insert(q);
                    }
                }
            }
            // A qubit shared by two merged units sits inside the superunit and is never kept.
            assert!(twice.iter().all(|&q| !rc.is_enabled(q)), "seed {}", chip.seed);
            let expected: Vec<DeviceId> = union.into_iter().filter(|&q| rc.is_enabled(q)).collect();
            assert_eq!(s.data_qubits, expected, "seed {} stabilizer {}", chip.seed, s.id);
            if !s.is_superunit() {
                // No triangles: a lone unit always keeps its whole plaquette.
                assert_eq!(s.data_qubits, unit_support(chip.size(), s.units[0]));
            }
        }
    }
}

fn encodable_compiled(count: u64, seed0: u64, d: usize, y: f64) -> Vec<superunit::pipeline::Compiled> {
    (0..count)
        .filter_map(|i| compile(&generate_chip(d, y, seed0 + i)).ok())
        .collect()
}

#[test]
fn slots_hold_one_gate_and_swaps_restore_variables() {
    for c in encodable_compiled(24, 400, 5, 0.93)
        .into_iter()
        .chain([compile(&Chip::perfect(5)).unwrap()])
    {
        let mut used = HashSet::new();
        for g in &c.whole.gates {
            for d in g.devices() {
                assert!(used.insert((g.step, d)), "two gates on {d} at step {}", g.step);
            }
        }
        let n = c.chip.size();
        let mut vars = c.whole.variables_at_start.clone();
        for step in &c.whole.block {
            for g in step.iter().filter(|g| g.kind == superunit::circuits::GateKind::Swap) {
                vars.swap(g.a.label(n), g.b.unwrap().label(n));
            }
        }
        assert_eq!(vars, c.whole.variables_at_start);
    }
}

#[test]
fn compilation_is_deterministic() {
    for chip in [generate_chip(5, 0.93, 3), Chip::with_faults(7, &[DeviceId::new(6, 6)])] {
        let Ok(a) = compile(&chip) else { continue };
        let b = compile(&chip).unwrap();
        assert_eq!(a.whole.gates, b.whole.gates);
        assert_eq!(a.whole.period, b.whole.period);
    }
}

#[test]
fn deepest_circuits_start_first() {
    for c in encodable_compiled(12, 600, 5, 0.93) {
        let start = |s: usize| {
            c.whole
                .gates
                .iter()
                .filter(|g| g.owner == Some(s))
                .map(|g| g.step)
                .min()
                .unwrap()
        };
        let deepest = c.circuits.iter().map(|x| x.depth).max().unwrap();
        let first = c.circuits.iter().map(|x| start(x.stabilizer)).min().unwrap();
        for x in c.circuits.iter().filter(|x| x.depth == deepest) {
            let rivals_before = c
                .circuits
                .iter()
                .filter(|y| y.depth > x.depth && start(y.stabilizer) <= start(x.stabilizer))
                .count();
            assert_eq!(rivals_before, 0);
        }
        assert!(c
            .circuits
            .iter()
            .filter(|x| x.depth == deepest)
            .any(|x| start(x.stabilizer) == first));
    }
}

#[test]
fn measured_outcomes_are_support_parities() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for chip in [Chip::perfect(5), Chip::with_faults(5, &[DeviceId::new(4, 4)])] {
        let c = compile(&chip).unwrap();
        let program = Program::new(&c.whole, true);
        let n = chip.size();
        for _ in 0..20 {
            let mut sim = Simulator::new(&program, 0.0, &mut rng);
            let x: Vec<bool> = (0..n * n).map(|_| rng.random_bool(0.3)).collect();
            for &v in &program.data_vars {
                if x[v as usize] {
                    let d = sim.device_of(v) as usize;
                    sim.frame_mut()[d] ^= 1;
                }
            }
            let mut out = Vec::new();
            // The first block may hold instances gathered before the frame was set.
            for _ in 0..3 * program.period {
                sim.step(&mut rng, &mut out);
            }
            for o in out.iter().filter(|o| o.block > 0) {
                let s = &c.stabilizers.stabilizers[program.measurements[o.meas as usize].0];
                let parity = s.data_qubits.iter().fold(false, |acc, q| acc ^ x[q.label(n)]);
                assert_eq!(o.flip, s.kind == Kind::Z && parity, "stabilizer {}", s.id);
            }
        }
    }
}

#[test]
fn same_seed_same_trace() {
    let c = compile(&generate_chip(5, 0.95, 12)).unwrap();
    let program = Program::new(&c.whole, true);
    let run = |seed| simulate_window(&program, 0.01, 4, &mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = (run(9), run(9));
    assert_eq!(a.history, b.history);
    assert_eq!(a.errors, b.errors);
    assert_eq!(a.variable_maps, b.variable_maps);
    assert!(!a.errors.is_empty());
    assert_ne!(a.errors, run(10).errors);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Swapping frames gate by gate equals relabelling by the composed variable map.
    #[test]
    fn swaps_move_frames_with_variables(frame in proptest::collection::vec(0u8..4, 6), swaps in proptest::collection::vec((0u32..6, 0u32..6), 0..20)) {
        let mut f = frame.clone();
        let mut vars: Vec<usize> = (0..6).collect();
        for &(a, b) in swaps.iter().filter(|(a, b)| a != b) {
            apply_gate(&mut f, &Op { kind: OpKind::Swap, a, b, meas: u32::MAX });
            vars.swap(a as usize, b as usize);
        }
        for d in 0..6 {
            prop_assert_eq!(f[d], frame[vars[d]]);
        }
    }

    #[test]
    fn linear_correlation_matches_standardized_scores(pairs in proptest::collection::vec((-50.0f64..50.0, 0.001f64..1.0), 3..40)) {
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let n = xs.len() as f64;
        let z = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n).sqrt();
            v.iter().map(|a| (a - m) / sd).collect::<Vec<f64>>()
        };
        let (zx, zy) = (z(&xs), z(&ys));
        let expected = zx.iter().zip(&zy).map(|(a, b)| a * b).sum::<f64>() / n;
        if let Ok(r) = correlate(&xs, &ys, Mode::Linear) {
            prop_assert!((r - expected).abs() < 1e-9);
        }
        let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        if let (Ok(a), Ok(b)) = (correlate(&xs, &ys, Mode::Logarithmic), correlate(&xs, &logs, Mode::Linear)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn culling_never_raises_the_geometric_mean(rates in proptest::collection::vec(1e-5f64..0.5, 1..40), extra in 0usize..10, f in 0.05f64..1.0) {
        let records: Vec<(usize, f64)> = rates.iter().copied().enumerate().collect();
        let original = records.len() + extra;
        let all = geometric_mean(&rates).unwrap();
        let kept = cull(&records, f, original).unwrap();
        prop_assert_eq!(kept.len(), ((original as f64 * f) + 1e-9).floor().min(records.len() as f64) as usize);
        if let Some(g) = geometric_mean(&kept.iter().map(|r| r.1).collect::<Vec<_>>()) {
            prop_assert!(g <= all * (1.0 + 1e-12));
        }
        let half = cull(&records, f / 2.0, original).unwrap();
        prop_assert!(half.iter().all(|h| kept.contains(h)));
    }
}

#[test]
fn metric_identities_hold() {
    for c in encodable_compiled(20, 800, 5, 0.93)
        .into_iter()
        .chain([compile(&Chip::perfect(5)).unwrap()])
    {
        let m = compute_metrics(&c);
        let s = z_circuit_shapes(&c);
        let mean = |f: &dyn Fn(&(f64, f64, f64, f64)) -> f64| s.iter().map(f).sum::<f64>() / s.len() as f64;
        let max = |f: &dyn Fn(&(f64, f64, f64, f64)) -> f64| s.iter().map(f).fold(f64::MIN, f64::max);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        assert!(close(m.average_kq_z, mean(&|x| x.2 * x.0)) && close(m.biggest_kq_z, max(&|x| x.2 * x.0)));
        assert!(close(m.average_kdq_z, mean(&|x| x.2 * x.1)) && close(m.biggest_kdq_z, max(&|x| x.2 * x.1)));
        assert!(close(m.average_cq_z, mean(&|x| x.3 * x.0)) && close(m.biggest_cq_z, max(&|x| x.3 * x.0)));
        assert!(close(m.average_cdq_z, mean(&|x| x.3 * x.1)) && close(m.biggest_cdq_z, max(&|x| x.3 * x.1)));
        assert_eq!(m.n_z_stabs, c.stabilizers.count(Kind::Z));
        assert_eq!(m.n_faulty_qubits, m.n_faulty_data + m.n_faulty_syndrome);
        assert!(m.biggest_dataq_z >= m.average_dataq_z && m.deepest_depth_z >= m.average_depth_z);
    }
}

#[test]
fn nest_adjacency_is_symmetric_without_self_loops() {
    for chip in [
        Chip::perfect(5),
        Chip::with_faults(5, &[DeviceId::new(4, 4)]),
        generate_chip(5, 0.93, 401),
    ] {
        let Ok(prep) = Prepared::new(&chip, true) else { continue };
        for nest in &prep.nests {
            for (u, list) in nest.adjacency.iter().enumerate() {
                for &(e, nb) in list {
                    if let Neighbor::Vertex(j, dk) = nb {
                        assert_ne!((j, dk), (u as u32, 0));
                        assert!(nest.adjacency[j as usize].contains(&(e, Neighbor::Vertex(u as u32, -dk))));
                    }
                }
            }
        }
    }
}

#[test]
fn superunit_vertices_have_more_edges() {
    let prep = Prepared::new(&Chip::with_faults(5, &[DeviceId::new(4, 4)]), true).unwrap();
    let set = &prep.compiled.stabilizers;
    for nest in &prep.nests {
        let degree = |super_: bool| {
            (0..nest.n_vertices())
                .filter(|&j| set.stabilizers[nest.stabilizers[j]].is_superunit() == super_)
                .map(|j| nest.adjacency[j].len())
                .collect::<Vec<_>>()
        };
        assert!(
            degree(true).iter().min() > degree(false).iter().max(),
            "{:?}",
            nest.kind
        );
    }
}

/// Weight of pairing each event, in order, with its nearest free partner or the boundary.
fn greedy(graph: &DecodingGraph<'_>, events: &[Vertex]) -> f64 {
    let mut used = vec![false; events.len()];
    let mut total = 0.0;
    for i in 0..events.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut best = (graph.boundary_distance(events[i]), None);
        for j in i + 1..events.len() {
            let d = graph.pair_distance(events[i], events[j]);
            if !used[j] && d < best.0 {
                best = (d, Some(j));
            }
        }
        if let Some(j) = best.1 {
            used[j] = true;
        }
        total += best.0;
    }
    total
}

#[test]
fn matching_never_loses_to_greedy() {
    let prep = Prepared::new(&Chip::perfect(5), true).unwrap();
    let graphs = [
        DecodingGraph::new(&prep.nests[0], 0.005),
        DecodingGraph::new(&prep.nests[1], 0.005),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for t in 0..10_000 {
        let g = &graphs[t % 2];
        let m = rng.random_range(9..=24);
        let mut events = BTreeSet::new();
        while events.len() < m {
            events.insert(Vertex {
                k: rng.random_range(0..6),
                j: rng.random_range(0..g.nest.n_vertices() as u32),
            });
        }
        let events: Vec<Vertex> = events.into_iter().collect();
        let w = mwpm(g, &events).weight;
        // Matching weights are rounded to 1e-4 per pair.
        assert!(w <= greedy(g, &events) + 1e-3 * m as f64, "trial {t}");
    }
}

#[test]
fn verdict_ignores_stabilizer_equivalent_residuals() {
    let prep = Prepared::new(&Chip::with_faults(5, &[DeviceId::new(4, 4)]), true).unwrap();
    let dec = Decoding::new(&prep, 0.004);
    let n = prep.compiled.chip.size();
    let n_data = prep.program.data_vars.len();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for kind in [Kind::X, Kind::Z] {
        let spatial = &dec.spatial[kind.index()];
        // Residuals seen by one nest are equivalent modulo the other kind's stabilizers.
        let supports: Vec<Vec<usize>> = prep
            .compiled
            .stabilizers
            .of_kind(kind.other())
            .map(|s| {
                s.data_qubits
                    .iter()
                    .map(|q| prep.program.data_index[q.label(n)] as usize)
                    .collect()
            })
            .collect();
        for _ in 0..300 {
            let residual: Vec<u8> = (0..n_data).map(|_| rng.random_bool(0.1) as u8).collect();
            let before = spatial.verdict(&residual);
            let mut moved = residual.clone();
            for s in supports.iter().filter(|_| rng.random_bool(0.5)) {
                for &q in s {
                    moved[q] ^= 1;
                }
            }
            assert_eq!(spatial.verdict(&moved), before);
        }
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let prep = Prepared::new(&Chip::perfect(3), true).unwrap();
    let cfg = |workers| RunConfig {
        p: vec![0.004, 0.008],
        target_errors: 40,
        max_rounds: 60_000,
        workers,
        seed: 5,
        shard_rounds: 1000,
    };
    let one = run_logical_error_rate(&prep, &cfg(1));
    let three = run_logical_error_rate(&prep, &cfg(3));
    assert_eq!(one, three);
    assert!(one.iter().all(|r| r.x_errors >= 40));
}
