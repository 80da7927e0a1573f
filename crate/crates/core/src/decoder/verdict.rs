//! Logical verdict of a residual data frame.
//!
//! A residual that still carries syndrome (faults not yet detected when the
//! frame was taken) is first closed by a spatial minimum-weight matching, then
//! its parity against the terminal-cut check support decides the logical state.
//! The spatial graph is the nest projected onto one time slice: every nest
//! mechanism with a data effect becomes an edge between the stabilizers its
//! effect flips, so the closure prefers what the space-time decoder prefers.

use std::collections::HashMap;

use super::blossom::max_weight_matching;
use super::graph::edge_weight;
use crate::lattice::Kind;
use crate::nest::Nest;
use crate::noise::Program;
use crate::stabilizers::StabilizerSet;

/// Coefficient of the single-qubit fallback edges that keep the graph connected.
const FALLBACK: f64 = 1e-3;

#[derive(Clone, Debug)]
struct SpatialEdge {
    a: usize,
    /// `n_nodes` is the boundary.
    b: usize,
    coefficient: f64,
    effect: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct SpatialGraph {
    pub kind: Kind,
    /// Frame bit this kind's stabilizers detect (1 = X, 2 = Z).
    pub mask: u8,
    /// Per dense data index: stabilizer nodes containing it.
    containing: Vec<Vec<usize>>,
    /// Dense data indices of the check support.
    check: Vec<u32>,
    n_nodes: usize,
    edges: Vec<SpatialEdge>,
    /// All-pairs distances over nodes plus boundary.
    dist: Vec<Vec<f64>>,
    /// `next[s][t]`: first edge on a shortest path from `s` to `t`.
    next: Vec<Vec<u32>>,
}

impl SpatialGraph {
    /// `rounds` is the number of rounds per block; edge mass is taken per round.
    pub fn new(set: &StabilizerSet, program: &Program, nest: &Nest, p: f64, rounds: f64) -> Self {
        let kind = nest.kind;
        let n = (set.distance * 2) - 1;
        let stabs: Vec<usize> = set.of_kind(kind).map(|s| s.id).collect();
        let node_of: HashMap<usize, usize> = stabs.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let n_data = program.data_vars.len();
        let mut containing = vec![Vec::new(); n_data];
        for s in set.of_kind(kind) {
            for q in &s.data_qubits {
                containing[program.data_index[q.label(n)] as usize].push(node_of[&s.id]);
            }
        }
        let check_ops = match kind {
            Kind::Z => &set.logical.z_check,
            Kind::X => &set.logical.x_check,
        };
        let check = check_ops.iter().map(|q| program.data_index[q.label(n)]).collect();
        let n_nodes = stabs.len();
        let bnode = n_nodes;
        let mut index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<SpatialEdge> = Vec::new();
        let mut add = |ends: &[usize], coefficient: f64, effect: &[u32], edges: &mut Vec<SpatialEdge>| {
            let (a, b) = match *ends {
                [a] => (a, bnode),
                [a, b] => (a.min(b), a.max(b)),
                _ => return,
            };
            match index.get(&(a, b)) {
                Some(&e) => {
                    let edge = &mut edges[e];
                    if coefficient > edge.coefficient {
                        edge.effect = effect.to_vec();
                    }
                    edge.coefficient += coefficient;
                }
                None => {
                    index.insert((a, b), edges.len());
                    edges.push(SpatialEdge {
                        a,
                        b,
                        coefficient,
                        effect: effect.to_vec(),
                    });
                }
            }
        };
        let syndrome_of = |effect: &[u32]| -> Vec<usize> {
            let mut odd: Vec<usize> = Vec::new();
            for &q in effect {
                for &s in &containing[q as usize] {
                    match odd.iter().position(|&x| x == s) {
                        Some(i) => {
                            odd.swap_remove(i);
                        }
                        None => odd.push(s),
                    }
                }
            }
            odd
        };
        for e in nest.edges.iter().filter(|e| !e.effect.is_empty()) {
            add(&syndrome_of(&e.effect), e.coefficient / rounds, &e.effect, &mut edges);
        }
        for (q, nodes) in containing.iter().enumerate() {
            if !nodes.is_empty() {
                add(nodes, FALLBACK, &[q as u32], &mut edges);
            }
        }
        // Floyd-Warshall; a few dozen nodes at most.
        let m = n_nodes + 1;
        let mut dist = vec![vec![f64::INFINITY; m]; m];
        let mut next = vec![vec![u32::MAX; m]; m];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for (e, edge) in edges.iter().enumerate() {
            let w = edge_weight(p, edge.coefficient);
            if w < dist[edge.a][edge.b] {
                dist[edge.a][edge.b] = w;
                dist[edge.b][edge.a] = w;
                next[edge.a][edge.b] = e as u32;
                next[edge.b][edge.a] = e as u32;
            }
        }
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let d = dist[i][k] + dist[k][j];
                    if d < dist[i][j] {
                        dist[i][j] = d;
                        next[i][j] = next[i][k];
                    }
                }
            }
        }
        SpatialGraph {
            kind,
            mask: if kind == Kind::Z { 1 } else { 2 },
            containing,
            check,
            n_nodes,
            edges,
            dist,
            next,
        }
    }

    /// Closure distance between nodes; `n_nodes` is the boundary.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.dist[a][b]
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Stabilizer nodes with odd parity under `residual` (one bit per data qubit).
    pub fn syndrome(&self, residual: &[u8]) -> Vec<usize> {
        let mut odd = vec![false; self.n_nodes];
        for (q, &r) in residual.iter().enumerate() {
            if r != 0 {
                for &s in &self.containing[q] {
                    odd[s] ^= true;
                }
            }
        }
        (0..self.n_nodes).filter(|&s| odd[s]).collect()
    }

    fn toggle_path(&self, from: usize, to: usize, residual: &mut [u8]) {
        let mut u = from;
        while u != to {
            let e = &self.edges[self.next[u][to] as usize];
            for &q in &e.effect {
                residual[q as usize] ^= 1;
            }
            u = if e.a == u { e.b } else { e.a };
        }
    }

    /// Remove the syndrome of `residual` along a minimum-weight matching.
    pub fn close(&self, residual: &mut [u8]) {
        let defects = self.syndrome(residual);
        let m = defects.len();
        if m == 0 {
            return;
        }
        let b = self.n_nodes;
        let cost = |d: f64| 2 * (d * 1e4).round() as i64;
        let mut edges = Vec::new();
        let mut big = 0;
        for i in 0..m {
            big = big.max(cost(self.dist[defects[i]][b]));
            for j in i + 1..m {
                big = big.max(cost(self.dist[defects[i]][defects[j]]));
            }
        }
        big += 2;
        for i in 0..m {
            edges.push((i, m + i, big - cost(self.dist[defects[i]][b])));
            for j in i + 1..m {
                edges.push((i, j, big - cost(self.dist[defects[i]][defects[j]])));
                edges.push((m + i, m + j, big));
            }
        }
        let mate = max_weight_matching(2 * m, &edges, true);
        for i in 0..m {
            match mate[i] {
                Some(j) if j == m + i => self.toggle_path(defects[i], b, residual),
                Some(j) if j < m && i < j => self.toggle_path(defects[i], defects[j], residual),
                _ => {}
            }
        }
        debug_assert!(self.syndrome(residual).is_empty());
    }

    /// Parity of `residual` on the check support.
    pub fn parity(&self, residual: &[u8]) -> bool {
        self.check
            .iter()
            .fold(false, |acc, &q| acc ^ (residual[q as usize] != 0))
    }

    /// Logical state of a residual after spatial closure.
    pub fn verdict(&self, residual: &[u8]) -> bool {
        let mut r = residual.to_vec();
        self.close(&mut r);
        self.parity(&r)
    }
}
