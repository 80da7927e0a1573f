//! Minimum-weight perfect matching decoding over the nests.

pub mod blossom;
mod graph;
mod verdict;
mod window;

pub use graph::{edge_weight, DecodingGraph, Vertex};
pub use verdict::SpatialGraph;
pub use window::WindowDecoder;

use blossom::max_weight_matching;

/// Fixed-point scale for matching weights.
const SCALE: f64 = 1e4;

/// Partner of each event: another event index or the boundary (`None`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Matching {
    pub partner: Vec<Option<usize>>,
    /// Sum of shortest-path distances of the chosen pairs.
    pub weight: f64,
}

impl Matching {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, Option<usize>)> + '_ {
        self.partner
            .iter()
            .enumerate()
            .filter(|&(i, p)| p.is_none_or(|j| i < j))
            .map(|(i, &p)| (i, p))
    }
}

/// A detection event from a syndrome history.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DetectionEvent {
    pub stabilizer: usize,
    /// Index of the measurement in this stabilizer's history.
    pub measurement: usize,
    pub step: u64,
}

/// One event per change between consecutive outcomes of a stabilizer; the
/// first outcome is compared with the noiseless value.
pub fn extract_events(history: &[Vec<(u64, bool)>]) -> Vec<DetectionEvent> {
    let mut out = Vec::new();
    for (s, h) in history.iter().enumerate() {
        let mut last = false;
        for (m, &(step, flip)) in h.iter().enumerate() {
            if flip != last {
                out.push(DetectionEvent {
                    stabilizer: s,
                    measurement: m,
                    step,
                });
            }
            last = flip;
        }
    }
    out.sort_by_key(|e| (e.step, e.stabilizer));
    out
}

fn scaled(d: f64) -> i64 {
    2 * (d * SCALE).round() as i64
}

/// Minimum-weight matching of `events`, each to another event or the boundary.
///
/// Pairs at least as far apart as the sum of their boundary distances are
/// pruned; the twin construction then only needs twin-twin edges mirroring
/// the remaining event pairs.
pub fn mwpm(graph: &DecodingGraph<'_>, events: &[Vertex]) -> Matching {
    let n = events.len();
    let mut partner = vec![None; n];
    let mut weight = 0.0;
    let db: Vec<f64> = events.iter().map(|&v| graph.boundary_distance(v)).collect();
    let mut cand: Vec<(usize, usize, f64)> = Vec::new();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            let d = graph.pair_distance(events[i], events[j]);
            if d < db[i] + db[j] {
                cand.push((i, j, d));
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        comps[r].push(i);
    }
    let mut by_comp: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    for &(i, j, d) in &cand {
        let r = find(&mut parent, i);
        by_comp[r].push((i, j, d));
    }
    for (r, members) in comps.iter().enumerate() {
        match members.len() {
            0 => {}
            1 => weight += db[members[0]],
            2 => {
                // Only possible pair is the candidate edge that joined them.
                let (i, j) = (members[0], members[1]);
                let d = by_comp[r][0].2;
                if d < db[i] + db[j] {
                    partner[i] = Some(j);
                    partner[j] = Some(i);
                    weight += d;
                } else {
                    weight += db[i] + db[j];
                }
            }
            m => {
                let local = |g: usize| members.binary_search(&g).unwrap();
                let costs: Vec<i64> = members.iter().map(|&g| scaled(db[g])).collect();
                let pair_costs: Vec<(usize, usize, i64)> = by_comp[r]
                    .iter()
                    .map(|&(i, j, d)| (local(i), local(j), scaled(d)))
                    .collect();
                let big = costs
                    .iter()
                    .chain(pair_costs.iter().map(|p| &p.2))
                    .copied()
                    .max()
                    .unwrap_or(0)
                    + 2;
                let mut edges = Vec::with_capacity(m + 2 * pair_costs.len());
                for (i, &c) in costs.iter().enumerate() {
                    edges.push((i, m + i, big - c));
                }
                for &(i, j, c) in &pair_costs {
                    edges.push((i, j, big - c));
                    edges.push((m + i, m + j, big));
                }
                let mate = max_weight_matching(2 * m, &edges, true);
                for (li, &g) in members.iter().enumerate() {
                    match mate[li] {
                        Some(lj) if lj < m => {
                            let h = members[lj];
                            partner[g] = Some(h);
                            if g < h {
                                weight += graph.pair_distance(events[g], events[h]);
                            }
                        }
                        _ => weight += db[g],
                    }
                }
            }
        }
    }
    Matching { partner, weight }
}

/// Toggle the data effects of every matched path into `correction`.
pub fn apply_correction(graph: &DecodingGraph<'_>, events: &[Vertex], matching: &Matching, correction: &mut [u8]) {
    let mut path = Vec::new();
    for (i, p) in matching.pairs() {
        path.clear();
        match p {
            Some(j) => graph.pair_path(events[i], events[j], &mut path),
            None => graph.boundary_path(events[i], &mut path),
        }
        toggle_effects(graph, &path, correction);
    }
}

pub(crate) fn toggle_effects(graph: &DecodingGraph<'_>, path: &[u32], correction: &mut [u8]) {
    for &e in path {
        for &q in &graph.nest.edges[e as usize].effect {
            correction[q as usize] ^= 1;
        }
    }
}

/// Whether `actual ⊕ correction` (one bit per data qubit, this graph's kind)
/// is a logical error after spatial closure.
pub fn check_logical_error(spatial: &SpatialGraph, actual: &[u8], correction: &[u8]) -> bool {
    let residual: Vec<u8> = actual.iter().zip(correction).map(|(a, c)| a ^ c).collect();
    spatial.verdict(&residual)
}
