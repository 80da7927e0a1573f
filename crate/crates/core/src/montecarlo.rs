//! End-to-end logical error rate estimation.
//!
//! Work is cut into shards of a fixed number of decoded rounds, each with its
//! own ChaCha stream derived from (seed, p index, shard). Shards run in waves of
//! fixed size, so results do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoder::{DecodingGraph, SpatialGraph, Vertex, WindowDecoder};
use crate::formats::TraceRow;
use crate::lattice::{Chip, Kind};
use crate::nest::{build_nests, instance_span, Nest};
use crate::noise::{Fault, Outcome, Pauli, Program, Simulator};
use crate::pipeline::{compile, Compiled};
use crate::Error;

/// Shards per wave; the stop criterion is checked between waves.
pub const WAVE: usize = 8;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Everything a chip needs before sampling; shared read-only by workers.
pub struct Prepared {
    pub compiled: Compiled,
    pub program: Program,
    /// Indexed by [`Kind::index`]: X-stabilizer nest, then Z-stabilizer nest.
    pub nests: [Nest; 2],
    /// Noiseless steps after which every earlier fault has reached the data.
    pub settle_steps: u32,
}

impl Prepared {
    pub fn new(chip: &Chip, idle_noise: bool) -> Result<Self, Error> {
        let compiled = compile(chip)?;
        Ok(Self::from_compiled(compiled, idle_noise))
    }

    pub fn from_compiled(compiled: Compiled, idle_noise: bool) -> Self {
        let program = Program::new(&compiled.whole, idle_noise);
        let nests = build_nests(&program, &compiled.stabilizers, compiled.chip.size());
        let settle_steps = instance_span(&program);
        Prepared {
            compiled,
            program,
            nests,
            settle_steps,
        }
    }

    pub fn distance(&self) -> usize {
        self.compiled.chip.distance
    }
}

/// Matching metrics for one physical error rate, indexed like the nests.
pub struct Decoding<'a> {
    pub graphs: [DecodingGraph<'a>; 2],
    pub spatial: [SpatialGraph; 2],
}

impl<'a> Decoding<'a> {
    pub fn new(prep: &'a Prepared, p: f64) -> Self {
        let graphs = [0, 1].map(|k| DecodingGraph::new(&prep.nests[k], p));
        let rounds = prep.program.period as f64 / prep.compiled.whole.steps_per_round;
        let spatial =
            [0, 1].map(|k| SpatialGraph::new(&prep.compiled.stabilizers, &prep.program, &prep.nests[k], p, rounds));
        Decoding { graphs, spatial }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub p: Vec<f64>,
    /// Stop a point once this many logical X errors are seen.
    pub target_errors: u64,
    /// Stop a point after this many decoded rounds regardless.
    pub max_rounds: u64,
    pub workers: usize,
    pub seed: u64,
    /// Decoded rounds per shard.
    pub shard_rounds: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            p: vec![0.004],
            target_errors: 500,
            max_rounds: 10_000_000,
            workers: 1,
            seed: 1,
            shard_rounds: 2000,
        }
    }
}

/// Counts from one or more shards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub rounds: u64,
    pub x_errors: u64,
    pub z_errors: u64,
    pub events: u64,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.rounds += o.rounds;
        self.x_errors += o.x_errors;
        self.z_errors += o.z_errors;
        self.events += o.events;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub p: f64,
    pub rounds: u64,
    pub x_errors: u64,
    pub z_errors: u64,
    pub x_rate: f64,
    pub z_rate: f64,
    /// Wilson 95% interval of the logical X rate.
    pub x_ci: (f64, f64),
    pub z_ci: (f64, f64),
    pub stopped_by_target: bool,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let ph = k / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (ph + z2 / (2.0 * n)) / denom;
    let half = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn shard_seed(seed: u64, p_index: usize, shard: u64) -> u64 {
    // SplitMix64 over the three coordinates.
    let mut z = seed ^ (p_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ shard.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hooks for observing a shard round by round.
pub trait RoundObserver {
    fn round(&mut self, _events: [&[Vertex]; 2], _flips: [Option<bool>; 2]) {}
}

impl RoundObserver for () {}

/// Simulate and decode until `rounds` rounds have been decoded.
pub fn run_shard<O: RoundObserver>(
    prep: &Prepared,
    dec: &Decoding<'_>,
    p: f64,
    rounds: u64,
    rng: &mut ChaCha8Rng,
    observer: &mut O,
) -> Counts {
    let sim = Simulator::new(&prep.program, p, rng);
    decode_run(prep, dec, sim, rounds, rng, observer)
}

/// Decode the output of `sim` until `rounds` rounds have been decoded.
pub fn decode_run<O: RoundObserver>(
    prep: &Prepared,
    dec: &Decoding<'_>,
    mut sim: Simulator<'_>,
    rounds: u64,
    rng: &mut ChaCha8Rng,
    observer: &mut O,
) -> Counts {
    let prog = &prep.program;
    let depth = prep.distance();
    let n_data = prog.data_vars.len();
    let mut decoders = [0, 1].map(|k| WindowDecoder::new(&dec.graphs[k], &dec.spatial[k], depth, n_data));
    let n_stab = prog.n_stabilizers;
    let mut last = vec![false; n_stab];
    let mut seen = vec![false; n_stab];
    let mut n_seen = 0;
    let mut events: [Vec<Vertex>; 2] = [Vec::new(), Vec::new()];
    let mut out: Vec<Outcome> = Vec::new();
    let mut frame = Vec::new();
    let (mut scratch_frame, mut scratch_vars) = (Vec::new(), Vec::new());
    let mut counts = Counts::default();
    while decoders[0].decoded_rounds < rounds {
        out.clear();
        sim.step(rng, &mut out);
        for o in &out {
            let (s, kind, _) = prog.measurements[o.meas as usize];
            if o.flip != last[s] {
                last[s] = o.flip;
                events[kind.index()].push(Vertex {
                    k: o.block as i64,
                    j: prog.local_index[o.meas as usize],
                });
            }
            if !seen[s] {
                seen[s] = true;
                n_seen += 1;
            }
        }
        if n_seen < n_stab {
            continue;
        }
        seen.iter_mut().for_each(|x| *x = false);
        n_seen = 0;
        sim.settled_data_frame(prep.settle_steps, &mut scratch_frame, &mut scratch_vars, &mut frame);
        let mut flips = [None, None];
        for k in 0..2 {
            let mask = dec.spatial[k].mask;
            let snap: Vec<u8> = frame.iter().map(|f| (f & mask != 0) as u8).collect();
            counts.events += events[k].len() as u64;
            flips[k] = decoders[k].push_round(&events[k], snap);
        }
        observer.round([&events[0], &events[1]], flips);
        events[0].clear();
        events[1].clear();
    }
    counts.rounds = decoders[0].decoded_rounds;
    counts.x_errors = decoders[Kind::Z.index()].logical_errors;
    counts.z_errors = decoders[Kind::X.index()].logical_errors;
    counts
}

/// Raw stabilizer outcomes of `rounds` rounds at physical rate `p`.
pub fn trace_syndromes(prep: &Prepared, p: f64, rounds: u64, seed: u64) -> Vec<TraceRow> {
    let prog = &prep.program;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sim = Simulator::new(prog, p, &mut rng);
    let n_stab = prog.n_stabilizers;
    let mut seen = vec![false; n_stab];
    let mut n_seen = 0;
    let mut cycle = 0;
    let mut out = Vec::new();
    let mut rows = Vec::new();
    while cycle < rounds {
        out.clear();
        sim.step(&mut rng, &mut out);
        for o in &out {
            let s = prog.measurements[o.meas as usize].0;
            rows.push(TraceRow {
                cycle,
                stabilizer: s,
                outcome: o.flip as u8,
            });
            if !seen[s] {
                seen[s] = true;
                n_seen += 1;
            }
        }
        if n_seen == n_stab {
            seen.iter_mut().for_each(|x| *x = false);
            n_seen = 0;
            cycle += 1;
        }
    }
    rows
}

/// Estimate logical error rates at every p of `cfg`.
pub fn run_logical_error_rate(prep: &Prepared, cfg: &RunConfig) -> Vec<PointResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .expect("thread pool");
    cfg.p
        .iter()
        .enumerate()
        .map(|(pi, &p)| pool.install(|| run_point(prep, p, pi, cfg)))
        .collect()
}

fn run_point(prep: &Prepared, p: f64, p_index: usize, cfg: &RunConfig) -> PointResult {
    let mut total = Counts::default();
    let mut stopped_by_target = false;
    if p > 0.0 {
        let dec = Decoding::new(prep, p);
        let mut shard = 0u64;
        loop {
            if total.x_errors >= cfg.target_errors {
                stopped_by_target = true;
                break;
            }
            if total.rounds >= cfg.max_rounds {
                break;
            }
            let remaining = cfg.max_rounds - total.rounds;
            let sizes: Vec<(u64, u64)> = (0..WAVE as u64)
                .map(|i| {
                    let before = i * cfg.shard_rounds;
                    (shard + i, cfg.shard_rounds.min(remaining.saturating_sub(before)))
                })
                .filter(|&(_, r)| r > 0)
                .collect();
            let results: Vec<Counts> = sizes
                .par_iter()
                .map(|&(s, r)| {
                    let mut rng = ChaCha8Rng::seed_from_u64(shard_seed(cfg.seed, p_index, s));
                    run_shard(prep, &dec, p, r, &mut rng, &mut ())
                })
                .collect();
            for c in &results {
                total.add(c);
            }
            shard += WAVE as u64;
        }
    } else {
        // Noiseless: nothing can happen, but run the pipeline once to prove it.
        let dec = Decoding::new(prep, 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        total = run_shard(prep, &dec, 0.0, cfg.max_rounds.min(cfg.shard_rounds), &mut rng, &mut ());
    }
    let rate = |k: u64| {
        if total.rounds == 0 {
            0.0
        } else {
            k as f64 / total.rounds as f64
        }
    };
    PointResult {
        p,
        rounds: total.rounds,
        x_errors: total.x_errors,
        z_errors: total.z_errors,
        x_rate: rate(total.x_errors),
        z_rate: rate(total.z_errors),
        x_ci: wilson_interval(total.x_errors, total.rounds, Z95),
        z_ci: wilson_interval(total.z_errors, total.rounds, Z95),
        stopped_by_target,
    }
}

/// Logical flips (X, Z) caused by one injected fault at block location `loc`
/// of block 1, decoded long enough for every consequence to be committed.
pub fn single_fault_flips(prep: &Prepared, dec: &Decoding<'_>, loc: usize, a: Pauli, b: Pauli) -> (u64, u64) {
    let prog = &prep.program;
    let step = prog.period as u64 + prog.step_of_location(loc) as u64;
    let sim = Simulator::with_injections(
        prog,
        vec![Fault {
            step,
            location: loc as u32,
            a,
            b,
        }],
    );
    let rounds_needed =
        (step as f64 / prep.compiled.whole.steps_per_round).ceil() as u64 + 3 * prep.distance() as u64 + 4;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let c = decode_run(prep, dec, sim, rounds_needed, &mut rng, &mut ());
    (c.x_errors, c.z_errors)
}
