//! Device grid, fault generation and the per-kind stabilizer graphs used for
//! encodability and distance queries.
//!
//! A chip of distance `d` is a `(2d-1) x (2d-1)` grid. Data devices sit at even
//! `row + col`; Z syndrome devices at (odd row, even col); X syndrome devices at
//! (even row, odd col). Logical X runs north to south and is detected by Z
//! stabilizers; logical Z runs west to east.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeviceId {
    pub row: u16,
    pub col: u16,
}

impl DeviceId {
    pub const fn new(row: usize, col: usize) -> Self {
        DeviceId {
            row: row as u16,
            col: col as u16,
        }
    }

    pub fn r(self) -> usize {
        self.row as usize
    }

    pub fn c(self) -> usize {
        self.col as usize
    }

    /// Linear label `row * n + col`, as in "d40" for the centre of a d=5 grid.
    pub fn label(self, n: usize) -> usize {
        self.r() * n + self.c()
    }

    pub fn from_label(label: usize, n: usize) -> Self {
        DeviceId::new(label / n, label % n)
    }

    pub fn is_adjacent(self, other: DeviceId) -> bool {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col) == 1
    }
}

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Data,
    Syndrome,
}

/// Stabilizer / error kind. A `Z` stabilizer detects X errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    X,
    Z,
}

impl Kind {
    pub fn other(self) -> Kind {
        match self {
            Kind::X => Kind::Z,
            Kind::Z => Kind::X,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Kind::X => 0,
            Kind::Z => 1,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::X => "X",
            Kind::Z => "Z",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Device {
    pub role: Role,
    pub working: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chip {
    pub distance: usize,
    #[serde(rename = "yield")]
    pub yield_: f64,
    pub seed: u64,
    /// Row-major.
    pub devices: Vec<Device>,
}

pub fn role_at(row: usize, col: usize) -> Role {
    if (row + col) % 2 == 0 {
        Role::Data
    } else {
        Role::Syndrome
    }
}

/// Kind of the syndrome device at `(row, col)`; `None` for data devices.
pub fn syndrome_kind(row: usize, col: usize) -> Option<Kind> {
    match (row % 2, col % 2) {
        (1, 0) => Some(Kind::Z),
        (0, 1) => Some(Kind::X),
        _ => None,
    }
}

/// Chip with every device independently faulty with probability `1 - yield`.
///
/// One ChaCha8 stream per chip, seeded with `seed`; one uniform draw per device
/// in row-major order, faulty iff the draw is `>= yield`.
pub fn generate_chip(distance: usize, yield_: f64, seed: u64) -> Chip {
    assert!(distance >= 2, "distance must be at least 2");
    assert!(yield_ > 0.0 && yield_ <= 1.0, "yield must lie in (0, 1]");
    let n = 2 * distance - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let devices = (0..n * n)
        .map(|i| {
            let u: f64 = rng.random();
            Device {
                role: role_at(i / n, i % n),
                working: u < yield_,
            }
        })
        .collect();
    Chip {
        distance,
        yield_,
        seed,
        devices,
    }
}

impl Chip {
    pub fn perfect(distance: usize) -> Chip {
        generate_chip(distance, 1.0, 0)
    }

    /// Perfect chip with the listed devices marked faulty.
    pub fn with_faults(distance: usize, faulty: &[DeviceId]) -> Chip {
        let mut chip = Chip::perfect(distance);
        for &f in faulty {
            let i = chip.index(f);
            chip.devices[i].working = false;
        }
        chip
    }

    pub fn size(&self) -> usize {
        2 * self.distance - 1
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn index(&self, id: DeviceId) -> usize {
        id.label(self.size())
    }

    pub fn id(&self, index: usize) -> DeviceId {
        DeviceId::from_label(index, self.size())
    }

    pub fn contains(&self, row: isize, col: isize) -> bool {
        let n = self.size() as isize;
        row >= 0 && col >= 0 && row < n && col < n
    }

    pub fn device(&self, id: DeviceId) -> Device {
        self.devices[self.index(id)]
    }

    pub fn is_working(&self, id: DeviceId) -> bool {
        self.device(id).working
    }

    pub fn role(&self, id: DeviceId) -> Role {
        role_at(id.r(), id.c())
    }

    /// Grid neighbours in the order north, west, east, south.
    pub fn neighbors(&self, id: DeviceId) -> impl Iterator<Item = DeviceId> + '_ {
        let (r, c) = (id.r() as isize, id.c() as isize);
        [(r - 1, c), (r, c - 1), (r, c + 1), (r + 1, c)]
            .into_iter()
            .filter(|&(rr, cc)| self.contains(rr, cc))
            .map(|(rr, cc)| DeviceId::new(rr as usize, cc as usize))
    }

    pub fn data_devices(&self) -> impl Iterator<Item = DeviceId> + '_ {
        (0..self.n_devices())
            .map(|i| self.id(i))
            .filter(|d| self.role(*d) == Role::Data)
    }

    pub fn faulty(&self) -> impl Iterator<Item = DeviceId> + '_ {
        (0..self.n_devices())
            .filter(|&i| !self.devices[i].working)
            .map(|i| self.id(i))
    }

    pub fn n_faulty(&self) -> usize {
        self.faulty().count()
    }

    pub fn n_faulty_role(&self, role: Role) -> usize {
        self.faulty().filter(|d| self.role(*d) == role).count()
    }
}

/// Vertex of a per-kind stabilizer graph: a unit stabilizer position or one of
/// the two terminals (north/south for Z, west/east for X).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Unit(DeviceId),
    TerminalA,
    TerminalB,
}

/// Endpoints of data qubit `q` as an edge of the `kind` stabilizer graph.
pub fn qubit_ends(n: usize, q: DeviceId, kind: Kind) -> (Node, Node) {
    let (r, c) = (q.r(), q.c());
    let last = n - 1;
    let even = r % 2 == 0;
    match (kind, even) {
        (Kind::Z, true) => (
            if r == 0 {
                Node::TerminalA
            } else {
                Node::Unit(DeviceId::new(r - 1, c))
            },
            if r == last {
                Node::TerminalB
            } else {
                Node::Unit(DeviceId::new(r + 1, c))
            },
        ),
        (Kind::Z, false) => (Node::Unit(DeviceId::new(r, c - 1)), Node::Unit(DeviceId::new(r, c + 1))),
        (Kind::X, true) => (
            if c == 0 {
                Node::TerminalA
            } else {
                Node::Unit(DeviceId::new(r, c - 1))
            },
            if c == last {
                Node::TerminalB
            } else {
                Node::Unit(DeviceId::new(r, c + 1))
            },
        ),
        (Kind::X, false) => (Node::Unit(DeviceId::new(r - 1, c)), Node::Unit(DeviceId::new(r + 1, c))),
    }
}

/// One kind's stabilizer graph after contracting disabled data qubits.
#[derive(Clone, Debug)]
pub struct Contracted {
    pub kind: Kind,
    n: usize,
    parent: Vec<usize>,
}

impl Contracted {
    fn new(kind: Kind, n: usize) -> Self {
        Contracted {
            kind,
            n,
            parent: (0..n * n + 2).collect(),
        }
    }

    fn slot(&self, node: Node) -> usize {
        match node {
            Node::Unit(d) => d.label(self.n),
            Node::TerminalA => self.n * self.n,
            Node::TerminalB => self.n * self.n + 1,
        }
    }

    fn find_slot(&self, mut x: usize) -> usize {
        while self.parent[x] != x {
            x = self.parent[x];
        }
        x
    }

    /// Component representative of `node`.
    pub fn find(&self, node: Node) -> usize {
        self.find_slot(self.slot(node))
    }

    fn union(&mut self, a: Node, b: Node) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Lower slot becomes the root so representatives are stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    pub fn terminal_a(&self) -> usize {
        self.find(Node::TerminalA)
    }

    pub fn terminal_b(&self) -> usize {
        self.find(Node::TerminalB)
    }

    pub fn is_terminal_component(&self, root: usize) -> bool {
        root == self.terminal_a() || root == self.terminal_b()
    }

    pub fn ends(&self, q: DeviceId) -> (usize, usize) {
        let (a, b) = qubit_ends(self.n, q, self.kind);
        (self.find(a), self.find(b))
    }
}

/// Result of merging around disabled data qubits, for both kinds.
#[derive(Clone, Debug)]
pub struct Reconfiguration {
    pub n: usize,
    /// Per device: data qubit excluded from every stabilizer (faulty or retired).
    pub disabled: Vec<bool>,
    /// Working data qubits excluded because both their endpoints merged.
    pub retired: Vec<DeviceId>,
    pub graphs: [Contracted; 2],
}

impl Reconfiguration {
    pub fn graph(&self, kind: Kind) -> &Contracted {
        &self.graphs[kind.index()]
    }

    pub fn is_enabled(&self, q: DeviceId) -> bool {
        !self.disabled[q.label(self.n)]
    }

    pub fn enabled_data(&self) -> impl Iterator<Item = DeviceId> + '_ {
        let n = self.n;
        (0..n * n)
            .map(move |i| DeviceId::from_label(i, n))
            .filter(move |d| role_at(d.r(), d.c()) == Role::Data && !self.disabled[d.label(n)])
    }
}

/// Contract every disabled data qubit in both stabilizer graphs.
///
/// A working qubit whose two endpoints end up in one component would appear
/// twice in the merged stabilizer and is retired, which can trigger further
/// merges; iterate to a fixed point. Fails when the two terminals of either
/// graph join.
pub fn reconfigure(chip: &Chip) -> Result<Reconfiguration, Error> {
    let n = chip.size();
    let mut disabled: Vec<bool> = (0..n * n)
        .map(|i| chip.role(chip.id(i)) == Role::Data && !chip.devices[i].working)
        .collect();
    let mut retired = Vec::new();
    loop {
        let mut graphs = [Contracted::new(Kind::X, n), Contracted::new(Kind::Z, n)];
        for g in graphs.iter_mut() {
            for q in chip.data_devices() {
                if disabled[chip.index(q)] {
                    let (a, b) = qubit_ends(n, q, g.kind);
                    g.union(a, b);
                }
            }
            if g.terminal_a() == g.terminal_b() {
                return Err(Error::Unencodable(format!(
                    "faulty data chain joins the two {} terminals",
                    if g.kind == Kind::Z { "north/south" } else { "west/east" }
                )));
            }
        }
        let mut changed = false;
        for q in chip.data_devices() {
            let i = chip.index(q);
            if disabled[i] {
                continue;
            }
            if graphs.iter().any(|g| {
                let (a, b) = g.ends(q);
                a == b
            }) {
                disabled[i] = true;
                retired.push(q);
                changed = true;
            }
        }
        if !changed {
            retired.sort();
            return Ok(Reconfiguration {
                n,
                disabled,
                retired,
                graphs,
            });
        }
    }
}

pub fn check_encodable(chip: &Chip) -> bool {
    reconfigure(chip).is_ok()
}

/// Lexicographically smallest shortest terminal-to-terminal chain of enabled
/// data qubits in the contracted graph of `kind`.
pub fn shortest_chain(rc: &Reconfiguration, kind: Kind) -> Option<Vec<DeviceId>> {
    let g = rc.graph(kind);
    let edges: Vec<(DeviceId, usize, usize)> = rc
        .enabled_data()
        .map(|q| {
            let (a, b) = g.ends(q);
            (q, a, b)
        })
        .filter(|&(_, a, b)| a != b)
        .collect();
    let slots = rc.n * rc.n + 2;
    let mut adj: Vec<Vec<(DeviceId, usize)>> = vec![Vec::new(); slots];
    for &(q, a, b) in &edges {
        adj[a].push((q, b));
        adj[b].push((q, a));
    }
    for list in adj.iter_mut() {
        list.sort();
    }
    let (src, dst) = (g.terminal_a(), g.terminal_b());
    let mut dist = vec![usize::MAX; slots];
    dist[dst] = 0;
    let mut queue = VecDeque::from([dst]);
    while let Some(u) = queue.pop_front() {
        for &(_, v) in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    if dist[src] == usize::MAX {
        return None;
    }
    let mut chain = Vec::with_capacity(dist[src]);
    let mut u = src;
    while u != dst {
        let &(q, v) = adj[u]
            .iter()
            .find(|&&(_, v)| dist[v] + 1 == dist[u])
            .expect("bfs layer has a successor");
        chain.push(q);
        u = v;
    }
    Some(chain)
}

/// Length of the shortest logical chain of the given operator type: X chains
/// run north-south through the Z graph, Z chains west-east through the X graph.
pub fn reduced_distance(chip: &Chip, operator: Kind) -> Result<usize, Error> {
    let rc = reconfigure(chip)?;
    Ok(reduced_distance_of(&rc, operator))
}

pub fn reduced_distance_of(rc: &Reconfiguration, operator: Kind) -> usize {
    shortest_chain(rc, operator.other()).map_or(0, |c| c.len())
}
