//! Sliding-window decoding with per-round logical verdicts.
//!
//! The window holds `depth` rounds. After each full window is matched, events
//! of the oldest round are committed when matched to the boundary or to an
//! event no newer than that round. An event matched to a newer partner is
//! retained until its partner's round is deleted, or until it has been carried
//! for another `depth` rounds, when the pair is committed regardless.

use std::collections::VecDeque;

use super::{mwpm, toggle_effects, DecodingGraph, SpatialGraph, Vertex};

#[derive(Clone, Copy, Debug)]
struct Held {
    v: Vertex,
    round: u64,
}

pub struct WindowDecoder<'g> {
    graph: &'g DecodingGraph<'g>,
    spatial: &'g SpatialGraph,
    depth: usize,
    held: Vec<Held>,
    snapshots: VecDeque<Vec<u8>>,
    next_round: u64,
    correction: Vec<u8>,
    verdict: bool,
    pub logical_errors: u64,
    pub decoded_rounds: u64,
    /// Pairs committed because a retained event outlived the guard.
    pub forced_commits: u64,
    path: Vec<u32>,
}

impl<'g> WindowDecoder<'g> {
    pub fn new(graph: &'g DecodingGraph<'g>, spatial: &'g SpatialGraph, depth: usize, n_data: usize) -> Self {
        WindowDecoder {
            graph,
            spatial,
            depth: depth.max(1),
            held: Vec::new(),
            snapshots: VecDeque::new(),
            next_round: 0,
            correction: vec![0; n_data],
            verdict: false,
            logical_errors: 0,
            decoded_rounds: 0,
            forced_commits: 0,
            path: Vec::new(),
        }
    }

    pub fn held_events(&self) -> usize {
        self.held.len()
    }

    pub fn correction(&self) -> &[u8] {
        &self.correction
    }

    /// Add one round's events and its end-of-round data frame (one bit per data
    /// qubit). Returns `Some(logical flip)` when a round was deleted.
    pub fn push_round(&mut self, events: &[Vertex], snapshot: Vec<u8>) -> Option<bool> {
        let round = self.next_round;
        self.next_round += 1;
        self.held.extend(events.iter().map(|&v| Held { v, round }));
        self.snapshots.push_back(snapshot);
        if self.snapshots.len() < self.depth {
            return None;
        }
        let oldest = round + 1 - self.depth as u64;
        let mut residual = self.snapshots.pop_front().unwrap();
        self.commit_oldest(oldest, &mut residual);
        for (r, c) in residual.iter_mut().zip(&self.correction) {
            *r ^= c;
        }
        let verdict = self.spatial.verdict(&residual);
        self.decoded_rounds += 1;
        let flipped = verdict != self.verdict;
        if flipped {
            self.logical_errors += 1;
            self.verdict = verdict;
        }
        Some(flipped)
    }

    /// Commit what the oldest round allows. Retained pairs reaching back to it
    /// are toggled into `tentative` only, so the verdict sees them corrected.
    fn commit_oldest(&mut self, oldest: u64, tentative: &mut [u8]) {
        if !self.held.iter().any(|h| h.round <= oldest) {
            return;
        }
        let vertices: Vec<Vertex> = self.held.iter().map(|h| h.v).collect();
        let matching = mwpm(self.graph, &vertices);
        let mut remove = vec![false; self.held.len()];
        for (i, h) in self.held.iter().enumerate() {
            if h.round > oldest || remove[i] {
                continue;
            }
            self.path.clear();
            match matching.partner[i] {
                None => self.graph.boundary_path(h.v, &mut self.path),
                Some(j) => {
                    let newer = self.held[j].round > oldest;
                    let forced = newer && h.round + self.depth as u64 <= oldest;
                    if newer && !forced {
                        self.graph.pair_path(h.v, self.held[j].v, &mut self.path);
                        toggle_effects(self.graph, &self.path, tentative);
                        continue;
                    }
                    if forced {
                        self.forced_commits += 1;
                    }
                    remove[j] = true;
                    self.graph.pair_path(h.v, self.held[j].v, &mut self.path);
                }
            }
            remove[i] = true;
            toggle_effects(self.graph, &self.path, &mut self.correction);
        }
        let mut k = 0;
        self.held.retain(|_| {
            k += 1;
            !remove[k - 1]
        });
    }
}
