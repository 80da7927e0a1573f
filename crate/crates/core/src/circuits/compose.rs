use std::collections::{HashMap, HashSet, VecDeque};

use super::GateKind;
use crate::lattice::{Chip, DeviceId, Kind, Role};
use crate::stabilizers::{Stabilizer, StabilizerSet};
use crate::Error;

/// Gate of a compiled circuit, with its as-soon-as-possible step relative to
/// the INIT.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TemplateOp {
    pub kind: GateKind,
    pub a: DeviceId,
    pub b: Option<DeviceId>,
    pub rel: u32,
}

impl TemplateOp {
    pub fn devices(&self) -> impl Iterator<Item = DeviceId> {
        std::iter::once(self.a).chain(self.b)
    }
}

#[derive(Clone, Debug)]
pub struct StabilizerCircuit {
    pub stabilizer: usize,
    pub kind: Kind,
    /// Priority position (first unit home, row-major).
    pub home: DeviceId,
    /// Ops in dependency order; every op follows the previous ops on its devices.
    pub ops: Vec<TemplateOp>,
    /// K: steps from INIT to MEAS inclusive.
    pub depth: u32,
    /// DQ: data qubits in the support.
    pub data_qubits: usize,
    /// Q: distinct devices touched.
    pub devices: Vec<DeviceId>,
    /// Device path walked by the syndrome variable.
    pub route: Vec<DeviceId>,
    pub cover: Vec<DeviceId>,
}

impl StabilizerCircuit {
    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }
}

const EXACT_COVER: usize = 4;

pub fn compose_all(chip: &Chip, set: &StabilizerSet) -> Result<Vec<StabilizerCircuit>, Error> {
    let mut bfs = BfsCache::new(chip);
    set.stabilizers
        .iter()
        .map(|s| compose_with(chip, s, &mut bfs))
        .collect()
}

/// Minimum ancilla cover, cheapest traversal, then gather/hop/restore.
pub fn compose_stabilizer_circuit(stab: &Stabilizer, chip: &Chip) -> Result<StabilizerCircuit, Error> {
    compose_with(chip, stab, &mut BfsCache::new(chip))
}

fn compose_with(chip: &Chip, stab: &Stabilizer, bfs: &mut BfsCache) -> Result<StabilizerCircuit, Error> {
    let data = &stab.data_qubits;
    let cands = &stab.ancilla_candidates;
    let covers: Vec<Vec<usize>> = data
        .iter()
        .map(|q| (0..cands.len()).filter(|&i| cands[i].is_adjacent(*q)).collect())
        .collect();
    if let Some(i) = covers.iter().position(|c| c.is_empty()) {
        return Err(Error::Uncoverable(format!(
            "stabilizer {} ({}): data qubit {} has no working ancilla",
            stab.id, stab.kind, data[i]
        )));
    }

    let mut best: Option<(usize, Vec<DeviceId>, Vec<DeviceId>)> = None;
    let mut consider = |cover: Vec<DeviceId>, bfs: &mut BfsCache| {
        if let Some((cost, path)) = best_tour(&cover, bfs) {
            let better = match &best {
                None => true,
                Some((bc, bp, _)) => cost < *bc || (cost == *bc && path > *bp),
            };
            if better {
                best = Some((cost, path, cover));
            }
        }
    };
    let covers_all = |set: &[usize]| covers.iter().all(|c| c.iter().any(|i| set.contains(i)));
    let mut found = false;
    for k in 1..=EXACT_COVER.min(cands.len()) {
        for combo in combinations(cands.len(), k) {
            if covers_all(&combo) {
                found = true;
                consider(combo.iter().map(|&i| cands[i]).collect(), bfs);
            }
        }
        if found {
            break;
        }
    }
    if !found {
        consider(greedy_cover(&covers, cands), bfs);
    }
    let Some((_, route, mut cover)) = best else {
        return Err(Error::Uncoverable(format!(
            "stabilizer {} ({}): no connected traversal of its ancillas",
            stab.id, stab.kind
        )));
    };
    cover.sort();
    Ok(emit(chip, stab, route, cover))
}

fn emit(chip: &Chip, stab: &Stabilizer, route: Vec<DeviceId>, cover: Vec<DeviceId>) -> StabilizerCircuit {
    let support: HashSet<DeviceId> = stab.data_qubits.iter().copied().collect();
    let mut raw: Vec<(GateKind, DeviceId, Option<DeviceId>)> = Vec::new();
    let start = route[0];
    let end = *route.last().expect("route is nonempty");
    raw.push((GateKind::Init, start, None));
    if stab.kind == Kind::X {
        raw.push((GateKind::H, start, None));
    }
    let mut gathered: HashSet<DeviceId> = HashSet::new();
    for (i, &dev) in route.iter().enumerate() {
        if cover.contains(&dev) {
            for q in chip.neighbors(dev) {
                if support.contains(&q) && gathered.insert(q) {
                    raw.push(match stab.kind {
                        Kind::Z => (GateKind::Cnot, q, Some(dev)),
                        Kind::X => (GateKind::Cnot, dev, Some(q)),
                    });
                }
            }
        }
        if i + 1 < route.len() {
            raw.push((GateKind::Swap, dev, Some(route[i + 1])));
            if chip.role(dev) == Role::Data {
                raw.push((GateKind::Swap, route[i - 1], Some(dev)));
            }
        }
    }
    debug_assert_eq!(gathered.len(), support.len());
    if stab.kind == Kind::X {
        raw.push((GateKind::H, end, None));
    }
    raw.push((GateKind::Meas, end, None));

    let mut ready: HashMap<DeviceId, u32> = HashMap::new();
    let mut ops = Vec::with_capacity(raw.len());
    for (kind, a, b) in raw {
        let t = std::iter::once(a)
            .chain(b)
            .map(|d| ready.get(&d).copied().unwrap_or(0))
            .max()
            .unwrap();
        for d in std::iter::once(a).chain(b) {
            ready.insert(d, t + 1);
        }
        ops.push(TemplateOp { kind, a, b, rel: t });
    }
    let depth = ops.iter().map(|o| o.rel + 1).max().unwrap_or(0);
    let mut devices: Vec<DeviceId> = ready.keys().copied().collect();
    devices.sort();
    StabilizerCircuit {
        stabilizer: stab.id,
        kind: stab.kind,
        home: stab.home(),
        ops,
        depth,
        data_qubits: stab.data_qubits.len(),
        devices,
        route,
        cover,
    }
}

fn greedy_cover(covers: &[Vec<usize>], cands: &[DeviceId]) -> Vec<DeviceId> {
    let mut uncovered: Vec<usize> = (0..covers.len()).collect();
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let gain = |a: usize| uncovered.iter().filter(|&&q| covers[q].contains(&a)).count();
        let pick = (0..cands.len())
            .max_by_key(|&a| (gain(a), std::cmp::Reverse(a)))
            .unwrap();
        chosen.push(cands[pick]);
        uncovered.retain(|&q| !covers[q].contains(&pick));
    }
    chosen
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn permutations(items: &[DeviceId]) -> Vec<Vec<DeviceId>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Cheapest visiting order of `cover` and the concatenated device path.
fn best_tour(cover: &[DeviceId], bfs: &mut BfsCache) -> Option<(usize, Vec<DeviceId>)> {
    let orders: Vec<Vec<DeviceId>> = if cover.len() <= EXACT_COVER {
        permutations(cover)
    } else {
        cover.iter().map(|&s| nearest_neighbor_order(s, cover, bfs)).collect()
    };
    let mut best: Option<(usize, Vec<DeviceId>)> = None;
    'orders: for order in orders {
        let mut path = vec![order[0]];
        for w in order.windows(2) {
            match bfs.path(w[0], w[1]) {
                Some(seg) => path.extend_from_slice(&seg[1..]),
                None => continue 'orders,
            }
        }
        let cost = path.len() - 1;
        let better = match &best {
            None => true,
            Some((bc, bp)) => cost < *bc || (cost == *bc && path > *bp),
        };
        if better {
            best = Some((cost, path));
        }
    }
    best
}

fn nearest_neighbor_order(start: DeviceId, cover: &[DeviceId], bfs: &mut BfsCache) -> Vec<DeviceId> {
    let mut order = vec![start];
    let mut left: Vec<DeviceId> = cover.iter().copied().filter(|&c| c != start).collect();
    while !left.is_empty() {
        let cur = *order.last().unwrap();
        let (i, _) = left
            .iter()
            .enumerate()
            .min_by_key(|(_, &c)| (bfs.distance(cur, c).unwrap_or(usize::MAX), std::cmp::Reverse(c)))
            .unwrap();
        order.push(left.remove(i));
    }
    order
}

/// Hop distances over working devices, one BFS per target.
struct BfsCache<'a> {
    chip: &'a Chip,
    from_target: HashMap<DeviceId, Vec<u32>>,
}

impl<'a> BfsCache<'a> {
    fn new(chip: &'a Chip) -> Self {
        BfsCache {
            chip,
            from_target: HashMap::new(),
        }
    }

    fn table(&mut self, target: DeviceId) -> &Vec<u32> {
        let chip = self.chip;
        self.from_target.entry(target).or_insert_with(|| {
            let mut dist = vec![u32::MAX; chip.n_devices()];
            dist[chip.index(target)] = 0;
            let mut queue = VecDeque::from([target]);
            while let Some(u) = queue.pop_front() {
                let du = dist[chip.index(u)];
                for v in chip.neighbors(u) {
                    let vi = chip.index(v);
                    if chip.devices[vi].working && dist[vi] == u32::MAX {
                        dist[vi] = du + 1;
                        queue.push_back(v);
                    }
                }
            }
            dist
        })
    }

    fn distance(&mut self, from: DeviceId, to: DeviceId) -> Option<usize> {
        let i = self.chip.index(from);
        let d = self.table(to)[i];
        (d != u32::MAX).then_some(d as usize)
    }

    /// Lexicographically greatest shortest path.
    fn path(&mut self, from: DeviceId, to: DeviceId) -> Option<Vec<DeviceId>> {
        let chip = self.chip;
        let dist = self.table(to).clone();
        if dist[chip.index(from)] == u32::MAX {
            return None;
        }
        let mut path = vec![from];
        let mut u = from;
        while u != to {
            let du = dist[chip.index(u)];
            u = chip
                .neighbors(u)
                .filter(|v| dist[chip.index(*v)] == du - 1)
                .max()
                .expect("bfs layer has a predecessor");
            path.push(u);
        }
        Some(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stabilizers::build_stabilizer_set;

    fn circuits(chip: &Chip) -> Vec<StabilizerCircuit> {
        compose_all(chip, &build_stabilizer_set(chip).unwrap()).unwrap()
    }

    #[test]
    fn unit_depths() {
        let cs = circuits(&Chip::perfect(5));
        let bulk_z = cs
            .iter()
            .find(|c| c.kind == Kind::Z && c.home == DeviceId::new(3, 4))
            .unwrap();
        assert_eq!(bulk_z.depth, 6);
        assert_eq!(bulk_z.n_devices(), 5);
        let bulk_x = cs
            .iter()
            .find(|c| c.kind == Kind::X && c.home == DeviceId::new(4, 3))
            .unwrap();
        assert_eq!(bulk_x.depth, 8);
        let edge_z = cs
            .iter()
            .find(|c| c.kind == Kind::Z && c.home == DeviceId::new(3, 0))
            .unwrap();
        assert_eq!(edge_z.depth, 5);
    }

    #[test]
    fn centre_superunit_route() {
        let chip = Chip::with_faults(5, &[DeviceId::new(4, 4)]);
        let cs = circuits(&chip);
        let z = cs.iter().find(|c| c.kind == Kind::Z && c.cover.len() == 2).unwrap();
        let labels: Vec<usize> = z.route.iter().map(|d| d.label(9)).collect();
        assert_eq!(labels, vec![49, 50, 41, 32, 31]);
        assert_eq!(z.depth, 12);
        let x = cs.iter().find(|c| c.kind == Kind::X && c.cover.len() == 2).unwrap();
        assert_eq!(x.depth, 14);
        let gathers: Vec<usize> = z
            .ops
            .iter()
            .filter(|o| o.kind == GateKind::Cnot)
            .map(|o| o.a.label(9))
            .collect();
        assert_eq!(gathers, vec![48, 50, 58, 22, 30, 32]);
    }

    #[test]
    fn uncoverable_data_qubit() {
        // Data (4,4) loses all four neighbouring syndrome devices.
        let faults = [
            DeviceId::new(3, 4),
            DeviceId::new(5, 4),
            DeviceId::new(4, 3),
            DeviceId::new(4, 5),
        ];
        let chip = Chip::with_faults(5, &faults);
        let set = build_stabilizer_set(&chip).unwrap();
        assert!(matches!(compose_all(&chip, &set), Err(Error::Uncoverable(_))));
    }
}
