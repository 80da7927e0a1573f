//! Pauli-frame rules against a two-qubit state-vector oracle, and channel
//! sampling against chi-square goodness of fit.

use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use superunit::lattice::Chip;
use superunit::noise::{
    apply_gate, sample_channel_1q, sample_channel_2q, Op, OpKind, Pauli, Program, Simulator, TWO_QUBIT_PAULIS,
};
use superunit::pipeline::compile;

type M = [[C; 4]; 4];

fn single(p: Pauli) -> [[C; 2]; 2] {
    let (o, z, i) = (C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(0.0, 1.0));
    match (p.x, p.z) {
        (false, false) => [[o, z], [z, o]],
        (true, false) => [[z, o], [o, z]],
        (false, true) => [[o, z], [z, -o]],
        (true, true) => [[z, -i], [i, z]],
    }
}

/// Qubit `a` is the high bit of the basis index.
fn kron(a: [[C; 2]; 2], b: [[C; 2]; 2]) -> M {
    let mut m = [[C::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = a[r >> 1][c >> 1] * b[r & 1][c & 1];
        }
    }
    m
}

fn mul(a: &M, b: &M) -> M {
    let mut m = [[C::new(0.0, 0.0); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = (0..4).map(|k| a[r][k] * b[k][c]).sum();
        }
    }
    m
}

fn dagger(a: &M) -> M {
    let mut m = *a;
    for r in 0..4 {
        for c in 0..4 {
            m[r][c] = a[c][r].conj();
        }
    }
    m
}

fn permutation(f: impl Fn(usize) -> usize) -> M {
    let mut m = [[C::new(0.0, 0.0); 4]; 4];
    for c in 0..4 {
        m[f(c)][c] = C::new(1.0, 0.0);
    }
    m
}

/// Whether `a = phase * b` for some unit phase.
fn equal_up_to_phase(a: &M, b: &M) -> bool {
    let mut phase = None;
    for r in 0..4 {
        for c in 0..4 {
            if b[r][c].norm() > 1e-9 {
                let ph = a[r][c] / b[r][c];
                match phase {
                    None => phase = Some(ph),
                    Some(p) if (p - ph).norm() > 1e-9 => return false,
                    _ => {}
                }
            } else if a[r][c].norm() > 1e-9 {
                return false;
            }
        }
    }
    phase.is_some_and(|p| (p.norm() - 1.0).abs() < 1e-9)
}

pub fn check_frame_rules_match_state_vector_conjugation() {
    let s = 1.0 / 2f64.sqrt();
    let h = [[C::new(s, 0.0), C::new(s, 0.0)], [C::new(s, 0.0), C::new(-s, 0.0)]];
    let id = single(Pauli::I);
    // CNOT with qubit 0 (high bit) as control.
    let gates: [(OpKind, M); 3] = [
        (OpKind::Cnot, permutation(|i| if i & 2 != 0 { i ^ 1 } else { i })),
        (OpKind::Swap, permutation(|i| ((i & 1) << 1) | (i >> 1))),
        (OpKind::H, kron(h, id)),
    ];
    let paulis = [Pauli::I, Pauli::X, Pauli::Z, Pauli::Y];
    let mut cases = 0;
    for (kind, u) in &gates {
        for &p0 in &paulis {
            for &p1 in &paulis {
                let before = kron(single(p0), single(p1));
                let conj = mul(&mul(u, &before), &dagger(u));
                let op = Op {
                    kind: *kind,
                    a: 0,
                    b: if *kind == OpKind::H { u32::MAX } else { 1 },
                    meas: u32::MAX,
                };
                let mut frame = [p0.bits(), p1.bits()];
                apply_gate(&mut frame, &op);
                let after = kron(single(Pauli::from_bits(frame[0])), single(Pauli::from_bits(frame[1])));
                assert!(
                    equal_up_to_phase(&conj, &after),
                    "{kind:?} on {p0:?}{p1:?} gave {:?}",
                    frame
                );
                cases += 1;
            }
        }
    }
    assert_eq!(cases, 48);
}

/// Upper critical value at significance 0.001.
fn critical(dof: usize) -> f64 {
    ChiSquared::new(dof as f64).unwrap().inverse_cdf(0.999)
}

fn chi_square(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * n as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

pub fn check_single_qubit_channel_fits() {
    let p = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = [0u64; 4];
    for _ in 0..1_000_000 {
        counts[sample_channel_1q(p, &mut rng).bits() as usize] += 1;
    }
    let probs = [1.0 - p, p / 3.0, p / 3.0, p / 3.0];
    let x2 = chi_square(&counts, &probs);
    assert!(x2 < critical(3), "chi-square {x2} counts {counts:?}");
}

pub fn check_two_qubit_channel_fits() {
    let p = 0.3;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut counts = [0u64; 16];
    for _ in 0..1_000_000 {
        let (a, b) = sample_channel_2q(p, &mut rng);
        counts[(a.bits() * 4 + b.bits()) as usize] += 1;
    }
    let probs: Vec<f64> = (0..16).map(|i| if i == 0 { 1.0 - p } else { p / 15.0 }).collect();
    let x2 = chi_square(&counts, &probs);
    assert!(x2 < critical(15), "chi-square {x2} counts {counts:?}");
    assert_eq!(TWO_QUBIT_PAULIS.len(), 15);
}

/// Fault skipping in the simulator: every location fails with probability p,
/// two-qubit outcomes are uniform over the 15 non-identity Paulis.
pub fn check_simulator_fault_statistics_fit() {
    let c = compile(&Chip::perfect(3)).unwrap();
    let program = Program::new(&c.whole, true);
    let p = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut sim = Simulator::new(&program, p, &mut rng);
    sim.record = Some(Vec::new());
    let blocks = 400u64;
    let mut out = Vec::new();
    for _ in 0..blocks * program.period as u64 {
        out.clear();
        sim.step(&mut rng, &mut out);
    }
    let faults = sim.record.take().unwrap();
    let locations = blocks * program.n_locations() as u64;
    let n = faults.len() as f64;
    let mean = p * locations as f64;
    let sd = (mean * (1.0 - p)).sqrt();
    assert!((n - mean).abs() < 4.0 * sd, "{n} faults, expected {mean} +- {sd}");
    let mut counts = [0u64; 16];
    for f in faults
        .iter()
        .filter(|f| program.ops[f.location as usize].kind == OpKind::Cnot)
    {
        counts[(f.a.bits() * 4 + f.b.bits()) as usize] += 1;
    }
    assert_eq!(counts[0], 0);
    let probs = vec![1.0 / 15.0; 15];
    let x2 = chi_square(&counts[1..], &probs);
    assert!(x2 < critical(14), "chi-square {x2} counts {counts:?}");
}

#[test]
fn frame_rules_match_state_vector_conjugation() {
    check_frame_rules_match_state_vector_conjugation();
}

#[test]
fn single_qubit_channel_fits() {
    check_single_qubit_channel_fits();
}

#[test]
fn two_qubit_channel_fits() {
    check_two_qubit_channel_fits();
}

#[test]
fn simulator_fault_statistics_fit() {
    check_simulator_fault_statistics_fit();
}
