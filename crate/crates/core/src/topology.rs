//! Physical graphs, their time-varying schedules, and the information-flow
//! log recorded by the engine.
//!
//! A [`TopologySchedule`] is a pure function of `(base graph, mode, seed, k)`.
//! Every mode guarantees that the union of the snapshots over any `B1`
//! consecutive iterations is connected.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, streams};

/// Unordered device pair, stored with the smaller id first.
pub type Edge = (usize, usize);

fn normalize(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GraphSnapshot {
    m: usize,
    edges: BTreeSet<Edge>,
}

impl GraphSnapshot {
    pub fn empty(m: usize) -> Self {
        Self {
            m,
            edges: BTreeSet::new(),
        }
    }

    /// Builds a snapshot from arbitrary pairs; `(j, i)` and `(i, j)` are the
    /// same edge. Self-loops and out-of-range ids are rejected.
    pub fn new(m: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(m);
        for (i, j) in pairs {
            if i == j {
                return Err(Error::invalid(format!("self-loop at device {i}")));
            }
            if i >= m || j >= m {
                return Err(Error::invalid(format!(
                    "edge ({i},{j}) out of range for m={m}"
                )));
            }
            g.edges.insert(normalize(i, j));
        }
        Ok(g)
    }

    pub fn complete(m: usize) -> Self {
        let edges = (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .collect();
        Self { m, edges }
    }

    pub fn path(m: usize) -> Self {
        let edges = (1..m).map(|i| (i - 1, i)).collect();
        Self { m, edges }
    }

    pub fn cycle(m: usize) -> Self {
        let mut g = Self::path(m);
        if m > 2 {
            g.edges.insert((0, m - 1));
        }
        g
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&normalize(i, j))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.m];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn is_subgraph_of(&self, other: &GraphSnapshot) -> bool {
        self.m == other.m && self.edges.is_subset(&other.edges)
    }

    /// Edge-list text: `m <count>` followed by one `i j` line per edge, `i < j`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("m {}\n", self.m);
        for &(i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let blocks = parse_edge_blocks(text)?;
        match blocks.len() {
            1 => Ok(blocks.into_iter().next().unwrap()),
            0 => Err(Error::Parse {
                line: 1,
                message: "missing `m <count>` header".into(),
            }),
            n => Err(Error::invalid(format!(
                "expected a single graph, found {n} blocks"
            ))),
        }
    }
}

/// Parses one or more consecutive edge-list blocks. Each block starts at an
/// `m <count>` line. Blank lines and `#` comments are ignored.
fn parse_edge_blocks(text: &str) -> Result<Vec<GraphSnapshot>> {
    let mut blocks: Vec<GraphSnapshot> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let mut parts = line.split_whitespace();
        let first = parts.next().unwrap();
        if first == "m" {
            let count: usize = parts
                .next()
                .ok_or_else(|| err("`m` without a count".into()))?
                .parse()
                .map_err(|e| err(format!("bad device count: {e}")))?;
            if parts.next().is_some() {
                return Err(err("trailing tokens after device count".into()));
            }
            blocks.push(GraphSnapshot::empty(count));
            continue;
        }
        let current = blocks
            .last_mut()
            .ok_or_else(|| err("edge before `m <count>` header".into()))?;
        let i: usize = first
            .parse()
            .map_err(|e| err(format!("bad endpoint `{first}`: {e}")))?;
        let second = parts
            .next()
            .ok_or_else(|| err("edge line needs two endpoints".into()))?;
        let j: usize = second
            .parse()
            .map_err(|e| err(format!("bad endpoint `{second}`: {e}")))?;
        if parts.next().is_some() {
            return Err(err("trailing tokens after edge".into()));
        }
        if i >= j {
            return Err(err(format!("edge ({i},{j}) must satisfy i < j")));
        }
        if j >= current.m {
            return Err(err(format!(
                "edge ({i},{j}) out of range for m={}",
                current.m
            )));
        }
        current.edges.insert((i, j));
    }
    Ok(blocks)
}

/// Disjoint-set forest over device ids.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true when the call merged two components.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }

    pub(crate) fn components(&self) -> usize {
        self.components
    }
}

/// True iff a single BFS component covers all devices. A graph with zero or
/// one device is trivially connected.
pub fn is_connected(g: &GraphSnapshot) -> bool {
    if g.m <= 1 {
        return true;
    }
    let adj = g.adjacency();
    let mut seen = vec![false; g.m];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    reached == g.m
}

pub fn union_graph(snapshots: &[GraphSnapshot]) -> Result<GraphSnapshot> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::invalid("union of an empty snapshot sequence"))?;
    let mut out = GraphSnapshot::empty(first.m);
    for s in snapshots {
        if s.m != first.m {
            return Err(Error::invalid(format!(
                "device count mismatch in union: {} vs {}",
                s.m, first.m
            )));
        }
        out.edges.extend(s.edges.iter().copied());
    }
    Ok(out)
}

/// How the RGG "connectivity" parameter is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConnectivityReading {
    /// Connect pairs within this Euclidean distance.
    #[default]
    Radius,
    /// Keep the closest pairs until this fraction of all pairs is connected.
    Density,
}

/// Upper bound on RGG redraws before giving up on connectivity.
pub const RGG_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone)]
pub struct Rgg {
    pub graph: GraphSnapshot,
    pub positions: Vec<[f64; 2]>,
    /// Number of disconnected draws discarded before this one.
    pub resamples: usize,
}

pub fn gen_rgg(m: usize, connectivity: f64, seed: u64) -> Result<Rgg> {
    gen_rgg_with(m, connectivity, seed, ConnectivityReading::Radius)
}

/// Random geometric graph on the unit square. Disconnected draws are
/// redrawn with the next sub-seed, up to [`RGG_MAX_ATTEMPTS`] draws.
pub fn gen_rgg_with(
    m: usize,
    connectivity: f64,
    seed: u64,
    reading: ConnectivityReading,
) -> Result<Rgg> {
    if m < 2 {
        return Err(Error::invalid(format!(
            "random geometric graph needs m >= 2, got {m}"
        )));
    }
    if !(connectivity.is_finite() && connectivity > 0.0) {
        return Err(Error::invalid(format!(
            "connectivity must be positive, got {connectivity}"
        )));
    }
    if reading == ConnectivityReading::Density && connectivity > 1.0 {
        return Err(Error::invalid(format!(
            "edge density must lie in (0, 1], got {connectivity}"
        )));
    }
    for attempt in 0..RGG_MAX_ATTEMPTS {
        let mut rng = rng::stream(seed, streams::RGG, attempt as u64);
        let positions: Vec<[f64; 2]> = (0..m)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let graph = geometric_edges(&positions, connectivity, reading);
        if is_connected(&graph) {
            return Ok(Rgg {
                graph,
                positions,
                resamples: attempt,
            });
        }
    }
    Err(Error::invalid(format!(
        "no connected geometric graph with m={m}, connectivity={connectivity} after {RGG_MAX_ATTEMPTS} draws"
    )))
}

fn geometric_edges(
    positions: &[[f64; 2]],
    connectivity: f64,
    reading: ConnectivityReading,
) -> GraphSnapshot {
    let m = positions.len();
    let mut pairs: Vec<(f64, Edge)> = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            let dx = positions[i][0] - positions[j][0];
            let dy = positions[i][1] - positions[j][1];
            pairs.push(((dx * dx + dy * dy).sqrt(), (i, j)));
        }
    }
    let edges = match reading {
        ConnectivityReading::Radius => pairs
            .into_iter()
            .filter(|(d, _)| *d <= connectivity)
            .map(|(_, e)| e)
            .collect(),
        ConnectivityReading::Density => {
            let target = (connectivity * pairs.len() as f64).round() as usize;
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            pairs.into_iter().take(target).map(|(_, e)| e).collect()
        }
    };
    GraphSnapshot { m, edges }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleMode {
    /// The base graph at every iteration.
    Static,
    /// Base edges split into `b1` groups (by sorted edge index modulo `b1`);
    /// group `k mod b1` is active at iteration `k`.
    CyclicPartition { b1: usize },
    /// Each base edge is present independently with probability `p`. At
    /// iterations `k ≡ 0 (mod b1)` the snapshot is repaired into a connected
    /// graph, and every window of `b1` iterations contains one such `k`.
    RandomSubset { p: f64, b1: usize },
}

#[derive(Debug, Clone)]
pub struct TopologySchedule {
    base: GraphSnapshot,
    mode: ScheduleMode,
    seed: u64,
}

impl TopologySchedule {
    pub fn new(base: GraphSnapshot, mode: ScheduleMode, seed: u64) -> Result<Self> {
        if !is_connected(&base) {
            return Err(Error::invalid("schedule base graph must be connected"));
        }
        match mode {
            ScheduleMode::Static => {}
            ScheduleMode::CyclicPartition { b1 } => {
                if b1 == 0 {
                    return Err(Error::invalid("B1 must be at least 1"));
                }
            }
            ScheduleMode::RandomSubset { p, b1 } => {
                if b1 == 0 {
                    return Err(Error::invalid("B1 must be at least 1"));
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(format!(
                        "subset probability {p} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Self { base, mode, seed })
    }

    pub fn fixed(base: GraphSnapshot) -> Result<Self> {
        Self::new(base, ScheduleMode::Static, 0)
    }

    pub fn base(&self) -> &GraphSnapshot {
        &self.base
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn m(&self) -> usize {
        self.base.m
    }

    /// Window length over which the physical union is guaranteed connected.
    pub fn b1(&self) -> usize {
        match self.mode {
            ScheduleMode::Static => 1,
            ScheduleMode::CyclicPartition { b1 } | ScheduleMode::RandomSubset { b1, .. } => b1,
        }
    }

    pub fn snapshot_at(&self, k: usize) -> GraphSnapshot {
        match self.mode {
            ScheduleMode::Static => self.base.clone(),
            ScheduleMode::CyclicPartition { b1 } => {
                let group = k % b1;
                let edges = self
                    .base
                    .edges
                    .iter()
                    .enumerate()
                    .filter(|(idx, _)| idx % b1 == group)
                    .map(|(_, e)| *e)
                    .collect();
                GraphSnapshot {
                    m: self.base.m,
                    edges,
                }
            }
            ScheduleMode::RandomSubset { p, b1 } => {
                let mut rng = rng::stream(self.seed, streams::SCHEDULE, k as u64);
                let mut edges: BTreeSet<Edge> = self
                    .base
                    .edges
                    .iter()
                    .filter(|_| rng.random::<f64>() < p)
                    .copied()
                    .collect();
                if k.is_multiple_of(b1) {
                    let mut uf = UnionFind::new(self.base.m);
                    for &(i, j) in &edges {
                        uf.union(i, j);
                    }
                    for &(i, j) in &self.base.edges {
                        if uf.components() == 1 {
                            break;
                        }
                        if uf.union(i, j) {
                            edges.insert((i, j));
                        }
                    }
                }
                GraphSnapshot {
                    m: self.base.m,
                    edges,
                }
            }
        }
    }
}

/// `(l̃ + 2)·B1` where `l̃·B1 ≤ B2 ≤ (l̃ + 1)·B1 − 1`.
///
/// # Panics
/// If either bound is zero.
pub fn compute_window_b(b1: usize, b2: usize) -> usize {
    assert!(b1 >= 1 && b2 >= 1, "B1 and B2 must be at least 1");
    (b2 / b1 + 2) * b1
}

/// Edges actually used for parameter exchange, one set per iteration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoFlowLog {
    m: usize,
    steps: Vec<BTreeSet<Edge>>,
}

impl InfoFlowLog {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            steps: Vec::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, used: BTreeSet<Edge>) -> Result<()> {
        if let Some(&(_, j)) = used.iter().find(|&&(i, j)| i >= j || j >= self.m) {
            return Err(Error::invalid(format!(
                "edge with endpoint {j} is not a normalized pair for m={}",
                self.m
            )));
        }
        self.steps.push(used);
        Ok(())
    }

    pub fn step(&self, k: usize) -> Option<&BTreeSet<Edge>> {
        self.steps.get(k)
    }

    pub fn snapshot(&self, k: usize) -> Option<GraphSnapshot> {
        self.steps.get(k).map(|e| GraphSnapshot {
            m: self.m,
            edges: e.clone(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &BTreeSet<Edge>> {
        self.steps.iter()
    }

    /// First iteration whose used edges are not all physically present.
    pub fn first_non_physical(&self, schedule: &TopologySchedule) -> Option<usize> {
        self.steps.iter().enumerate().find_map(|(k, used)| {
            let physical = schedule.snapshot_at(k);
            (!used.is_subset(&physical.edges)).then_some(k)
        })
    }

    /// One edge-list block per iteration, in iteration order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in 0..self.steps.len() {
            out.push_str(&self.snapshot(k).unwrap().to_edge_list());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let blocks = parse_edge_blocks(text)?;
        let m = blocks.first().map_or(0, |b| b.m);
        if let Some(b) = blocks.iter().find(|b| b.m != m) {
            return Err(Error::invalid(format!(
                "info-flow blocks disagree on device count: {} vs {m}",
                b.m
            )));
        }
        Ok(Self {
            m,
            steps: blocks.into_iter().map(|b| b.edges).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificationReport {
    pub window: usize,
    pub windows_checked: usize,
    /// Window starts whose union of used edges is disconnected.
    pub violations: Vec<usize>,
}

impl CertificationReport {
    pub fn is_certified(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every length-`b` window of the log for a connected union. Uses a
/// sliding multiset of edges so each window costs one union-find pass.
pub fn certify_b_connectivity(log: &InfoFlowLog, b: usize) -> Result<CertificationReport> {
    if b == 0 {
        return Err(Error::invalid("window length must be at least 1"));
    }
    if log.len() < b {
        return Err(Error::invalid(format!(
            "log covers {} iterations, shorter than window {b}",
            log.len()
        )));
    }
    let mut counts: HashMap<Edge, usize> = HashMap::new();
    for used in &log.steps[..b] {
        for &e in used {
            *counts.entry(e).or_default() += 1;
        }
    }
    let windows = log.len() - b + 1;
    let mut violations = Vec::new();
    for start in 0..windows {
        if start > 0 {
            for e in &log.steps[start - 1] {
                let c = counts.get_mut(e).unwrap();
                *c -= 1;
                if *c == 0 {
                    counts.remove(e);
                }
            }
            for &e in &log.steps[start + b - 1] {
                *counts.entry(e).or_default() += 1;
            }
        }
        let mut uf = UnionFind::new(log.m);
        for &(i, j) in counts.keys() {
            uf.union(i, j);
        }
        if log.m > 1 && uf.components() != 1 {
            violations.push(start);
        }
    }
    Ok(CertificationReport {
        window: b,
        windows_checked: windows,
        violations,
    })
}
