//! Shortest-path metric over an unrolled periodic nest.
//!
//! Boundary distances are exact on the quotient graph, because the boundary is
//! time invariant. Pair distances come from Dijkstra balls around each local
//! vertex, cut at `d_B(source) + max d_B`: a pair farther apart than that is
//! never worth matching directly, since both ends could go to the boundary.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::OnceLock;

use crate::nest::{Neighbor, Nest};

/// A vertex of the unrolled nest: local vertex `j` of block `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    pub k: i64,
    pub j: u32,
}

/// Shortest-path tree from one local vertex in block 0, limited by radius.
#[derive(Debug, Default)]
struct Ball {
    /// Sorted (dk, j).
    keys: Vec<(i32, u32)>,
    dist: Vec<f64>,
    /// (edge, index of predecessor in `keys`), MAX edge for the source.
    pred: Vec<(u32, u32)>,
}

impl Ball {
    fn find(&self, dk: i32, j: u32) -> Option<usize> {
        self.keys.binary_search(&(dk, j)).ok()
    }
}

/// Nest plus weights for one physical error rate. Shared read-only by workers.
#[derive(Debug)]
pub struct DecodingGraph<'a> {
    pub nest: &'a Nest,
    pub p: f64,
    /// `-ln(p * coefficient)` per nest edge, floored at a tiny positive value.
    pub weights: Vec<f64>,
    /// Exact distance from each local vertex to the boundary.
    pub boundary: Vec<f64>,
    /// Next hop toward the boundary: (edge, neighbour), or MAX edge if unreachable.
    boundary_pred: Vec<(u32, Neighbor)>,
    max_boundary: f64,
    balls: Vec<OnceLock<Ball>>,
}

/// Non-negative f64 with a total order via its bit pattern.
fn key(x: f64) -> u64 {
    debug_assert!(x >= 0.0);
    x.to_bits()
}

pub fn edge_weight(p: f64, coefficient: f64) -> f64 {
    (-(p * coefficient).ln()).max(1e-9)
}

impl<'a> DecodingGraph<'a> {
    pub fn new(nest: &'a Nest, p: f64) -> Self {
        assert!(p > 0.0, "weights need p > 0");
        let weights: Vec<f64> = nest.edges.iter().map(|e| edge_weight(p, e.coefficient)).collect();
        let m = nest.n_vertices();
        let mut boundary = vec![f64::INFINITY; m];
        let mut boundary_pred = vec![(u32::MAX, Neighbor::Boundary); m];
        let mut heap = BinaryHeap::new();
        for (e, edge) in nest.edges.iter().enumerate() {
            if edge.b == Neighbor::Boundary && weights[e] < boundary[edge.a as usize] {
                boundary[edge.a as usize] = weights[e];
                boundary_pred[edge.a as usize] = (e as u32, Neighbor::Boundary);
            }
        }
        for (j, &d) in boundary.iter().enumerate() {
            if d.is_finite() {
                heap.push(Reverse((key(d), j as u32)));
            }
        }
        while let Some(Reverse((dk, u))) = heap.pop() {
            let du = f64::from_bits(dk);
            if du > boundary[u as usize] {
                continue;
            }
            for &(e, nb) in &nest.adjacency[u as usize] {
                if let Neighbor::Vertex(v, dkv) = nb {
                    let nd = du + weights[e as usize];
                    if nd < boundary[v as usize] {
                        boundary[v as usize] = nd;
                        boundary_pred[v as usize] = (e, Neighbor::Vertex(u, -dkv));
                        heap.push(Reverse((key(nd), v)));
                    }
                }
            }
        }
        let max_boundary = boundary.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max);
        DecodingGraph {
            nest,
            p,
            weights,
            boundary,
            boundary_pred,
            max_boundary,
            balls: (0..m).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn boundary_distance(&self, v: Vertex) -> f64 {
        self.boundary[v.j as usize]
    }

    fn ball(&self, j: u32) -> &Ball {
        self.balls[j as usize].get_or_init(|| self.grow_ball(j, self.boundary[j as usize] + self.max_boundary))
    }

    fn grow_ball(&self, j0: u32, radius: f64) -> Ball {
        let mut index: HashMap<(i32, u32), usize> = HashMap::new();
        let mut keys = vec![(0i32, j0)];
        let mut dist = vec![0.0];
        let mut pred = vec![(u32::MAX, u32::MAX)];
        let mut done = vec![false];
        index.insert((0, j0), 0);
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((key(0.0), 0usize)));
        while let Some(Reverse((dk, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            let du = f64::from_bits(dk);
            let (uk, uj) = keys[u];
            for &(e, nb) in &self.nest.adjacency[uj as usize] {
                let Neighbor::Vertex(vj, ddk) = nb else { continue };
                let nd = du + self.weights[e as usize];
                if nd >= radius {
                    continue;
                }
                let vk = (uk + ddk, vj);
                let vi = *index.entry(vk).or_insert_with(|| {
                    keys.push(vk);
                    dist.push(f64::INFINITY);
                    pred.push((u32::MAX, u32::MAX));
                    done.push(false);
                    keys.len() - 1
                });
                if nd < dist[vi] {
                    dist[vi] = nd;
                    pred[vi] = (e, u as u32);
                    heap.push(Reverse((key(nd), vi)));
                }
            }
        }
        // Re-index in sorted key order.
        let mut order: Vec<usize> = (0..keys.len()).collect();
        order.sort_by_key(|&i| keys[i]);
        let mut rank = vec![0u32; keys.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r as u32;
        }
        Ball {
            keys: order.iter().map(|&i| keys[i]).collect(),
            dist: order.iter().map(|&i| dist[i]).collect(),
            pred: order
                .iter()
                .map(|&i| {
                    let (e, p) = pred[i];
                    (e, if p == u32::MAX { u32::MAX } else { rank[p as usize] })
                })
                .collect(),
        }
    }

    /// Distance between two vertices, or infinity when they are at least
    /// `d_B(a) + max d_B` apart (never a useful pair).
    pub fn pair_distance(&self, a: Vertex, b: Vertex) -> f64 {
        let dk = b.k - a.k;
        if dk.abs() > i32::MAX as i64 {
            return f64::INFINITY;
        }
        let ball = self.ball(a.j);
        match ball.find(dk as i32, b.j) {
            Some(i) => ball.dist[i],
            None => f64::INFINITY,
        }
    }

    /// Edges of a shortest path from `a` to `b`; empty if out of range.
    pub fn pair_path(&self, a: Vertex, b: Vertex, out: &mut Vec<u32>) {
        let ball = self.ball(a.j);
        let Some(mut i) = ball.find((b.k - a.k) as i32, b.j) else {
            return;
        };
        while ball.pred[i].0 != u32::MAX {
            out.push(ball.pred[i].0);
            i = ball.pred[i].1 as usize;
        }
    }

    /// Edges of a shortest path from `a` to the boundary.
    pub fn boundary_path(&self, a: Vertex, out: &mut Vec<u32>) {
        let mut j = a.j;
        loop {
            let (e, nb) = self.boundary_pred[j as usize];
            if e == u32::MAX {
                return;
            }
            out.push(e);
            match nb {
                Neighbor::Boundary => return,
                Neighbor::Vertex(v, _) => j = v,
            }
        }
    }

    /// Exact unbounded Dijkstra from `from` to `to` (`None` = boundary).
    pub fn dijkstra_distance(&self, from: Vertex, to: Option<Vertex>) -> f64 {
        let Some(to) = to else {
            return self.boundary[from.j as usize];
        };
        if from == to {
            return 0.0;
        }
        let mut dist: HashMap<(i64, u32), f64> = HashMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert((from.k, from.j), 0.0);
        heap.push(Reverse((key(0.0), from.k, from.j)));
        while let Some(Reverse((dk, uk, uj))) = heap.pop() {
            let du = f64::from_bits(dk);
            if (uk, uj) == (to.k, to.j) {
                return du;
            }
            if du > dist[&(uk, uj)] {
                continue;
            }
            for &(e, nb) in &self.nest.adjacency[uj as usize] {
                let Neighbor::Vertex(vj, ddk) = nb else { continue };
                let v = (uk + ddk as i64, vj);
                let nd = du + self.weights[e as usize];
                if dist.get(&v).is_none_or(|&d| nd < d) {
                    dist.insert(v, nd);
                    heap.push(Reverse((key(nd), v.0, v.1)));
                }
            }
        }
        f64::INFINITY
    }
}
