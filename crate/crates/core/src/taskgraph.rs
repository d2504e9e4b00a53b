//! Dataflow application model: nodes that fire by consuming and producing
//! tokens, channels between node ports, placement on a mesh, and the
//! structural analyses the experiments rely on.
//!
//! "Loop removal" here is a modeling transformation. It produces the
//! acyclic variant of an application, as if it had been mapped with fewer
//! communication loops; it does not preserve the application's semantics.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clocks::Hertz;

pub type NodeId = usize;
pub type ChannelId = usize;

/// Default bound on the number of enumerated elementary cycles.
pub const DEFAULT_CYCLE_BOUND: usize = 10_000;

/// Compute cost of one firing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleCost {
    Fixed(u32),
    /// Uniform integer in `[min, max]`, drawn per firing from a stream
    /// seeded by `seed`.
    Uniform {
        min: u32,
        max: u32,
        seed: u64,
    },
}

impl CycleCost {
    pub fn mean(&self) -> f64 {
        match *self {
            CycleCost::Fixed(c) => f64::from(c),
            CycleCost::Uniform { min, max, .. } => (f64::from(min) + f64::from(max)) / 2.0,
        }
    }

    pub fn min(&self) -> u32 {
        match *self {
            CycleCost::Fixed(c) => c,
            CycleCost::Uniform { min, .. } => min,
        }
    }

    /// Per-firing cost stream. `salt` lets a run perturb every node's stream
    /// together (the scenario seed) while keeping each one reproducible.
    pub fn sampler(&self, salt: u64) -> CostSampler {
        match *self {
            CycleCost::Fixed(c) => CostSampler::Fixed(c),
            CycleCost::Uniform { min, max, seed } => CostSampler::Uniform {
                min,
                max,
                rng: Box::new(ChaCha8Rng::seed_from_u64(mix_seed(seed, salt))),
            },
        }
    }
}

impl fmt::Display for CycleCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CycleCost::Fixed(c) => write!(f, "{c}"),
            CycleCost::Uniform { min, max, seed } => write!(f, "{min}..{max} seed={seed}"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum CostSampler {
    Fixed(u32),
    Uniform { min: u32, max: u32, rng: Box<ChaCha8Rng> },
}

impl CostSampler {
    pub fn next_cost(&mut self) -> u32 {
        match self {
            CostSampler::Fixed(c) => *c,
            CostSampler::Uniform { min, max, rng } => rng.gen_range(*min..=*max),
        }
    }
}

/// SplitMix64 finalizer over `a` and `b`.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskNode {
    pub id: NodeId,
    pub cost: CycleCost,
    /// Tokens consumed per firing, by input port. Ports beyond the end consume 1.
    pub consume: Vec<u32>,
    /// Tokens produced per firing, by output port. Ports beyond the end produce 1.
    pub produce: Vec<u32>,
}

impl TaskNode {
    pub fn new(id: NodeId, cost: CycleCost) -> Self {
        TaskNode {
            id,
            cost,
            consume: Vec::new(),
            produce: Vec::new(),
        }
    }

    pub fn consume_rate(&self, port: usize) -> u32 {
        self.consume.get(port).copied().unwrap_or(1)
    }

    pub fn produce_rate(&self, port: usize) -> u32 {
        self.produce.get(port).copied().unwrap_or(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PortRef {
    pub node: NodeId,
    pub port: usize,
}

impl PortRef {
    pub fn new(node: NodeId, port: usize) -> Self {
        PortRef { node, port }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channel {
    pub id: ChannelId,
    pub src: PortRef,
    pub dst: PortRef,
    pub capacity: u32,
    pub initial_tokens: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TaskGraph {
    pub nodes: Vec<TaskNode>,
    pub channels: Vec<Channel>,
    pub sources: Vec<NodeId>,
    pub sinks: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Interconnect {
    PointToPoint,
    SharedBus,
}

impl fmt::Display for Interconnect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interconnect::PointToPoint => "point_to_point",
            Interconnect::SharedBus => "shared_bus",
        })
    }
}

impl FromStr for Interconnect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "point_to_point" => Ok(Interconnect::PointToPoint),
            "shared_bus" => Ok(Interconnect::SharedBus),
            _ => Err(format!(
                "unknown interconnect `{s}` (expected point_to_point or shared_bus)"
            )),
        }
    }
}

/// Placement of nodes onto mesh PEs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mapping {
    /// Mesh coordinate per node, indexed by node id.
    pub placement: Vec<(u32, u32)>,
    pub mesh: (u32, u32),
    pub interconnect: Interconnect,
    pub adjacency_check: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph has no sink")]
    NoSink,
    #[error("node at position {index} has id {id}; ids must be 0..n in order")]
    NodeIdOrder { index: usize, id: NodeId },
    #[error("node {node}: compute cycles must be at least 1")]
    ZeroCompute { node: NodeId },
    #[error("node {node}: uniform cost has min {min} > max {max}")]
    BadCostRange { node: NodeId, min: u32, max: u32 },
    #[error("node {node}: token rates must be at least 1")]
    ZeroRate { node: NodeId },
    #[error("channel {channel}: endpoint references missing node {node}")]
    DanglingEndpoint { channel: ChannelId, node: NodeId },
    #[error("channel id {0} used more than once")]
    DuplicateChannel(ChannelId),
    #[error("channel {channel}: capacity must be at least 1")]
    ZeroCapacity { channel: ChannelId },
    #[error("channel {channel}: {initial} initial tokens exceed capacity {capacity}")]
    InitialOverflow {
        channel: ChannelId,
        initial: u32,
        capacity: u32,
    },
    #[error("node {node}: {dir} port {port} is connected more than once")]
    DuplicatePort {
        node: NodeId,
        dir: &'static str,
        port: usize,
    },
    #[error("node {node}: {dir} ports are not numbered 0..{count}")]
    PortGap {
        node: NodeId,
        dir: &'static str,
        count: usize,
    },
    #[error("listed source {0} has input channels")]
    SourceWithInputs(NodeId),
    #[error("{role} list references missing node {node}")]
    UnknownRoleNode { role: &'static str, node: NodeId },
    #[error("mapping places {placed} nodes but the graph has {nodes}")]
    PlacementCount { placed: usize, nodes: usize },
    #[error("node {node} placed at ({x}, {y}) outside the {w}x{h} mesh")]
    OutsideMesh {
        node: NodeId,
        x: u32,
        y: u32,
        w: u32,
        h: u32,
    },
    #[error("nodes {a} and {b} share PE ({x}, {y})")]
    SharedPe { a: NodeId, b: NodeId, x: u32, y: u32 },
    #[error("channel {channel} connects non-adjacent PEs (distance {distance})")]
    NotAdjacent { channel: ChannelId, distance: u32 },
    #[error("more than {0} elementary cycles")]
    EnumerationOverflow(usize),
    #[error("analysis unsupported: {0}")]
    UnsupportedAnalysis(&'static str),
    #[error("invalid generator parameters: {0}")]
    Generation(String),
}

impl TaskGraph {
    pub fn inputs_of(&self, node: NodeId) -> impl Iterator<Item = &Channel> {
        self.channels.iter().filter(move |c| c.dst.node == node)
    }

    pub fn outputs_of(&self, node: NodeId) -> impl Iterator<Item = &Channel> {
        self.channels.iter().filter(move |c| c.src.node == node)
    }

    pub fn channel_index(&self, id: ChannelId) -> Option<usize> {
        self.channels.iter().position(|c| c.id == id)
    }

    /// `copies` disjoint copies of the graph, node and channel ids offset
    /// per copy.
    pub fn replicate(&self, copies: usize) -> TaskGraph {
        let n = self.nodes.len();
        let stride = self.channels.iter().map(|c| c.id + 1).max().unwrap_or(0);
        let mut out = TaskGraph::default();
        for k in 0..copies {
            out.nodes.extend(self.nodes.iter().map(|node| TaskNode {
                id: node.id + k * n,
                cost: match node.cost {
                    CycleCost::Uniform { min, max, seed } => CycleCost::Uniform {
                        min,
                        max,
                        seed: if k == 0 { seed } else { mix_seed(seed, k as u64) },
                    },
                    fixed => fixed,
                },
                ..node.clone()
            }));
            out.channels.extend(self.channels.iter().map(|c| Channel {
                id: c.id + k * stride,
                src: PortRef::new(c.src.node + k * n, c.src.port),
                dst: PortRef::new(c.dst.node + k * n, c.dst.port),
                ..c.clone()
            }));
            out.sources.extend(self.sources.iter().map(|s| s + k * n));
            out.sinks.extend(self.sinks.iter().map(|s| s + k * n));
        }
        out
    }
}

impl Mapping {
    /// Nodes placed left to right on a `len x 1` row.
    pub fn row(len: usize, interconnect: Interconnect) -> Mapping {
        Mapping {
            placement: (0..len as u32).map(|x| (x, 0)).collect(),
            mesh: (len.max(1) as u32, 1),
            interconnect,
            adjacency_check: true,
        }
    }

    /// Stacks `copies` of the mapping vertically, matching [`TaskGraph::replicate`].
    pub fn replicate(&self, copies: usize) -> Mapping {
        let (w, h) = self.mesh;
        Mapping {
            placement: (0..copies as u32)
                .flat_map(|k| self.placement.iter().map(move |&(x, y)| (x, y + k * h)))
                .collect(),
            mesh: (w, h * copies as u32),
            ..self.clone()
        }
    }
}

fn check_ports(errors: &mut Vec<GraphError>, node: NodeId, dir: &'static str, mut ports: Vec<usize>) {
    ports.sort_unstable();
    let mut seen = BTreeSet::new();
    for &p in &ports {
        if !seen.insert(p) {
            errors.push(GraphError::DuplicatePort { node, dir, port: p });
        }
    }
    if seen.iter().enumerate().any(|(i, &p)| i != p) {
        errors.push(GraphError::PortGap {
            node,
            dir,
            count: seen.len(),
        });
    }
}

/// Checks graph and mapping invariants, reporting every violation found.
pub fn validate(graph: &TaskGraph, mapping: &Mapping) -> Result<(), Vec<GraphError>> {
    let mut errors = Vec::new();
    let n = graph.nodes.len();
    if graph.sinks.is_empty() {
        errors.push(GraphError::NoSink);
    }
    for (index, node) in graph.nodes.iter().enumerate() {
        if node.id != index {
            errors.push(GraphError::NodeIdOrder { index, id: node.id });
        }
        match node.cost {
            CycleCost::Fixed(0) => errors.push(GraphError::ZeroCompute { node: node.id }),
            CycleCost::Uniform { min, max, .. } => {
                if min == 0 {
                    errors.push(GraphError::ZeroCompute { node: node.id });
                }
                if min > max {
                    errors.push(GraphError::BadCostRange {
                        node: node.id,
                        min,
                        max,
                    });
                }
            }
            _ => {}
        }
        if node.consume.iter().chain(&node.produce).any(|&r| r == 0) {
            errors.push(GraphError::ZeroRate { node: node.id });
        }
    }
    let mut ids = BTreeSet::new();
    for c in &graph.channels {
        if !ids.insert(c.id) {
            errors.push(GraphError::DuplicateChannel(c.id));
        }
        for end in [c.src.node, c.dst.node] {
            if end >= n {
                errors.push(GraphError::DanglingEndpoint {
                    channel: c.id,
                    node: end,
                });
            }
        }
        if c.capacity == 0 {
            errors.push(GraphError::ZeroCapacity { channel: c.id });
        }
        if c.initial_tokens > c.capacity {
            errors.push(GraphError::InitialOverflow {
                channel: c.id,
                initial: c.initial_tokens,
                capacity: c.capacity,
            });
        }
    }
    for node in 0..n {
        check_ports(
            &mut errors,
            node,
            "input",
            graph.inputs_of(node).map(|c| c.dst.port).collect(),
        );
        check_ports(
            &mut errors,
            node,
            "output",
            graph.outputs_of(node).map(|c| c.src.port).collect(),
        );
    }
    for (role, list) in [("source", &graph.sources), ("sink", &graph.sinks)] {
        for &node in list {
            if node >= n {
                errors.push(GraphError::UnknownRoleNode { role, node });
            }
        }
    }
    for &s in &graph.sources {
        if s < n && graph.inputs_of(s).next().is_some() {
            errors.push(GraphError::SourceWithInputs(s));
        }
    }

    let (w, h) = mapping.mesh;
    if mapping.placement.len() != n {
        errors.push(GraphError::PlacementCount {
            placed: mapping.placement.len(),
            nodes: n,
        });
    }
    let mut occupied = std::collections::BTreeMap::new();
    for (node, &(x, y)) in mapping.placement.iter().enumerate() {
        if x >= w || y >= h {
            errors.push(GraphError::OutsideMesh { node, x, y, w, h });
        }
        if let Some(&a) = occupied.get(&(x, y)) {
            errors.push(GraphError::SharedPe { a, b: node, x, y });
        } else {
            occupied.insert((x, y), node);
        }
    }
    if mapping.adjacency_check && mapping.placement.len() == n {
        for c in &graph.channels {
            if c.src.node >= n || c.dst.node >= n {
                continue;
            }
            let (ax, ay) = mapping.placement[c.src.node];
            let (bx, by) = mapping.placement[c.dst.node];
            let distance = ax.abs_diff(bx) + ay.abs_diff(by);
            if distance != 1 {
                errors.push(GraphError::NotAdjacent {
                    channel: c.id,
                    distance,
                });
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// An elementary cycle as the channel ids traversed, starting from its
/// lowest-numbered node.
pub type Cycle = Vec<ChannelId>;

/// Enumerates every elementary directed cycle (Johnson's algorithm over the
/// channel multigraph; parallel channels yield distinct cycles).
pub fn detect_comm_loops(graph: &TaskGraph) -> Result<Vec<Cycle>, GraphError> {
    detect_comm_loops_bounded(graph, DEFAULT_CYCLE_BOUND)
}

pub fn detect_comm_loops_bounded(graph: &TaskGraph, bound: usize) -> Result<Vec<Cycle>, GraphError> {
    let n = graph.nodes.len().max(
        graph
            .channels
            .iter()
            .map(|c| c.src.node.max(c.dst.node) + 1)
            .max()
            .unwrap_or(0),
    );
    let mut adj: Vec<Vec<(NodeId, ChannelId)>> = vec![Vec::new(); n];
    for c in &graph.channels {
        adj[c.src.node].push((c.dst.node, c.id));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    let mut johnson = Johnson {
        adj: &adj,
        allowed: vec![false; n],
        blocked: vec![false; n],
        block_map: vec![BTreeSet::new(); n],
        stack: Vec::new(),
        cycles: Vec::new(),
        bound,
    };
    for start in 0..n {
        let scc = scc_containing(&adj, start);
        if scc.len() == 1 && !adj[start].iter().any(|&(w, _)| w == start) {
            continue;
        }
        for v in 0..n {
            johnson.allowed[v] = scc.contains(&v);
            johnson.blocked[v] = false;
            johnson.block_map[v].clear();
        }
        johnson.circuit(start, start)?;
    }
    Ok(johnson.cycles)
}

/// Strongly connected component of `start` in the subgraph of nodes `>= start`.
fn scc_containing(adj: &[Vec<(NodeId, ChannelId)>], start: NodeId) -> BTreeSet<NodeId> {
    let reach = |forward: bool| {
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let next: Vec<NodeId> = if forward {
                adj[v].iter().map(|&(w, _)| w).collect()
            } else {
                (0..adj.len())
                    .filter(|&u| adj[u].iter().any(|&(w, _)| w == v))
                    .collect()
            };
            for w in next {
                if w >= start && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    fwd.intersection(&bwd).copied().collect()
}

struct Johnson<'a> {
    adj: &'a [Vec<(NodeId, ChannelId)>],
    allowed: Vec<bool>,
    blocked: Vec<bool>,
    block_map: Vec<BTreeSet<NodeId>>,
    stack: Vec<ChannelId>,
    cycles: Vec<Cycle>,
    bound: usize,
}

impl Johnson<'_> {
    fn unblock(&mut self, v: NodeId) {
        self.blocked[v] = false;
        let waiting = std::mem::take(&mut self.block_map[v]);
        for w in waiting {
            if self.blocked[w] {
                self.unblock(w);
            }
        }
    }

    fn circuit(&mut self, v: NodeId, start: NodeId) -> Result<bool, GraphError> {
        let mut found = false;
        self.blocked[v] = true;
        for &(w, ch) in &self.adj[v] {
            if !self.allowed[w] {
                continue;
            }
            if w == start {
                self.stack.push(ch);
                if self.cycles.len() == self.bound {
                    return Err(GraphError::EnumerationOverflow(self.bound));
                }
                self.cycles.push(self.stack.clone());
                self.stack.pop();
                found = true;
            } else if !self.blocked[w] {
                self.stack.push(ch);
                if self.circuit(w, start)? {
                    found = true;
                }
                self.stack.pop();
            }
        }
        if found {
            self.unblock(v);
        } else {
            for &(w, _) in &self.adj[v] {
                if self.allowed[w] {
                    self.block_map[w].insert(v);
                }
            }
        }
        Ok(found)
    }
}

fn without_channels(graph: &TaskGraph, removed: &BTreeSet<ChannelId>) -> TaskGraph {
    let mut g = graph.clone();
    g.channels.retain(|c| !removed.contains(&c.id));
    g
}

/// Number of (source, sink) pairs joined by a directed path.
fn connected_pairs(graph: &TaskGraph, skip: Option<ChannelId>) -> usize {
    let n = graph.nodes.len();
    graph
        .sources
        .iter()
        .map(|&s| {
            let mut seen = vec![false; n];
            let mut queue = VecDeque::from([s]);
            seen[s] = true;
            while let Some(v) = queue.pop_front() {
                for c in graph.outputs_of(v) {
                    if Some(c.id) != skip && !seen[c.dst.node] {
                        seen[c.dst.node] = true;
                        queue.push_back(c.dst.node);
                    }
                }
            }
            graph.sinks.iter().filter(|&&k| seen[k]).count()
        })
        .sum()
}

/// Deletes channels until the graph is acyclic. Each round removes the
/// channel lying on the most remaining cycles, preferring the lowest id
/// among ties that does not disconnect a source from a sink; a final pass
/// restores any removed channel whose return would not close a cycle.
///
/// Ports left unconnected by a removal are renumbered so each node's ports
/// stay contiguous; channel ids are unchanged.
pub fn remove_feedback_channels(graph: &TaskGraph) -> Result<(TaskGraph, Vec<ChannelId>), GraphError> {
    let mut removed: Vec<ChannelId> = Vec::new();
    loop {
        let current = without_channels(graph, &removed.iter().copied().collect());
        let cycles = detect_comm_loops(&current)?;
        if cycles.is_empty() {
            break;
        }
        let mut counts = std::collections::BTreeMap::<ChannelId, usize>::new();
        for ch in cycles.iter().flatten() {
            *counts.entry(*ch).or_default() += 1;
        }
        let best = *counts.values().max().expect("cycles are non-empty");
        let ties: Vec<ChannelId> = counts.iter().filter(|&(_, &k)| k == best).map(|(&c, _)| c).collect();
        let baseline = connected_pairs(&current, None);
        let pick = ties
            .iter()
            .copied()
            .find(|&c| connected_pairs(&current, Some(c)) == baseline)
            .unwrap_or(ties[0]);
        removed.push(pick);
    }
    // Irredundancy pass, newest removal first.
    for i in (0..removed.len()).rev() {
        let trial: BTreeSet<ChannelId> = removed
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &c)| c)
            .collect();
        if detect_comm_loops(&without_channels(graph, &trial))?.is_empty() {
            removed.remove(i);
        }
    }
    let set: BTreeSet<ChannelId> = removed.iter().copied().collect();
    let result = renumber_ports(graph, without_channels(graph, &set));
    removed.sort_unstable();
    Ok((result, removed))
}

fn renumber_ports(original: &TaskGraph, mut g: TaskGraph) -> TaskGraph {
    for node in 0..g.nodes.len() {
        let mut ins: Vec<usize> = g.inputs_of(node).map(|c| c.dst.port).collect();
        ins.sort_unstable();
        let mut outs: Vec<usize> = g.outputs_of(node).map(|c| c.src.port).collect();
        outs.sort_unstable();
        let orig = &original.nodes[node];
        g.nodes[node].consume = ins.iter().map(|&p| orig.consume_rate(p)).collect();
        g.nodes[node].produce = outs.iter().map(|&p| orig.produce_rate(p)).collect();
        for c in g.channels.iter_mut() {
            if c.dst.node == node {
                c.dst.port = ins.binary_search(&c.dst.port).expect("port present");
            }
            if c.src.node == node {
                c.src.port = outs.binary_search(&c.src.port).expect("port present");
            }
        }
        trim_unit_rates(&mut g.nodes[node]);
    }
    if original.sources.is_empty() {
        return g;
    }
    let sources: Vec<NodeId> = (0..g.nodes.len())
        .filter(|&v| g.inputs_of(v).next().is_none())
        .collect();
    g.sources = sources;
    g
}

fn trim_unit_rates(node: &mut TaskNode) {
    while node.consume.last() == Some(&1) {
        node.consume.pop();
    }
    while node.produce.last() == Some(&1) {
        node.produce.pop();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphKind {
    FirChain,
    FftDag,
    IirFeedback,
    MjpegPipeline,
    AdpcmChain,
}

impl GraphKind {
    pub const ALL: [GraphKind; 5] = [
        GraphKind::FirChain,
        GraphKind::FftDag,
        GraphKind::IirFeedback,
        GraphKind::MjpegPipeline,
        GraphKind::AdpcmChain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphKind::FirChain => "fir_chain",
            GraphKind::FftDag => "fft_dag",
            GraphKind::IirFeedback => "iir_feedback",
            GraphKind::MjpegPipeline => "mjpeg_pipeline",
            GraphKind::AdpcmChain => "adpcm_chain",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        GraphKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown graph kind `{s}`"))
    }
}

/// Generator parameters. Fields left `None` take the kind's default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GenParams {
    /// Stage count (fir_chain, iir_feedback) or FFT points (fft_dag).
    pub n: Option<usize>,
    /// Fixed cycles per firing.
    pub cycles: Option<u32>,
    /// Range for variable-cost stages (mjpeg_pipeline).
    pub min_cycles: Option<u32>,
    pub max_cycles: Option<u32>,
    /// FIFO capacity assigned to every channel.
    pub capacity: Option<u32>,
}

pub const DEFAULT_CAPACITY: u32 = 32;
pub const DEFAULT_CYCLES: u32 = 10;

/// Builds a synthetic DSP workload. Pure in `(kind, params, seed)`.
pub fn generate(kind: GraphKind, params: &GenParams, seed: u64) -> Result<(TaskGraph, Mapping), GraphError> {
    let capacity = params.capacity.unwrap_or(DEFAULT_CAPACITY);
    if capacity == 0 {
        return Err(GraphError::Generation("capacity must be at least 1".into()));
    }
    let cycles = params.cycles.unwrap_or(DEFAULT_CYCLES);
    if cycles == 0 {
        return Err(GraphError::Generation("cycles must be at least 1".into()));
    }
    match kind {
        GraphKind::FirChain => {
            let n = params.n.unwrap_or(4);
            if n == 0 {
                return Err(GraphError::Generation("fir_chain needs at least one stage".into()));
            }
            Ok(chain(vec![CycleCost::Fixed(cycles); n], capacity))
        }
        GraphKind::AdpcmChain => Ok(chain(vec![CycleCost::Fixed(cycles); 2], capacity)),
        GraphKind::MjpegPipeline => {
            // Entropy decode, dequantize + IDCT, color conversion, output.
            const RANGES: [(u32, u32); 4] = [(6, 18), (10, 22), (6, 12), (4, 8)];
            let costs = RANGES
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| {
                    let min = params.min_cycles.unwrap_or(lo);
                    let max = params.max_cycles.unwrap_or(hi);
                    CycleCost::Uniform {
                        min,
                        max,
                        seed: mix_seed(seed, i as u64 + 1),
                    }
                })
                .collect::<Vec<_>>();
            for c in &costs {
                if let CycleCost::Uniform { min, max, .. } = *c {
                    if min == 0 || min > max {
                        return Err(GraphError::Generation(format!("bad cycle range {min}..{max}")));
                    }
                }
            }
            Ok(chain(costs, capacity))
        }
        GraphKind::IirFeedback => {
            let n = params.n.unwrap_or(3);
            if n < 3 {
                return Err(GraphError::Generation(
                    "iir_feedback needs at least 3 stages (source, loop body, sink)".into(),
                ));
            }
            let (mut g, mut m) = chain(vec![CycleCost::Fixed(cycles); n], capacity);
            g.channels.push(Channel {
                id: n - 1,
                src: PortRef::new(n - 1, 0),
                dst: PortRef::new(1, 1),
                capacity,
                initial_tokens: 1,
            });
            m.adjacency_check = n == 3;
            Ok((g, m))
        }
        GraphKind::FftDag => fft_dag(params.n.unwrap_or(8), cycles, capacity),
    }
}

fn chain(costs: Vec<CycleCost>, capacity: u32) -> (TaskGraph, Mapping) {
    let n = costs.len();
    let graph = TaskGraph {
        nodes: costs
            .into_iter()
            .enumerate()
            .map(|(i, c)| TaskNode::new(i, c))
            .collect(),
        channels: (0..n.saturating_sub(1))
            .map(|i| Channel {
                id: i,
                src: PortRef::new(i, 0),
                dst: PortRef::new(i + 1, 0),
                capacity,
                initial_tokens: 0,
            })
            .collect(),
        sources: vec![0],
        sinks: vec![n - 1],
    };
    (graph, Mapping::row(n, Interconnect::PointToPoint))
}

/// Radix-2 butterfly network over `points` samples: `log2(points)` columns
/// of `points / 2` butterflies. The first column sources samples, the last
/// column sinks results.
fn fft_dag(points: usize, cycles: u32, capacity: u32) -> Result<(TaskGraph, Mapping), GraphError> {
    if points < 2 || !points.is_power_of_two() {
        return Err(GraphError::Generation(format!(
            "fft_dag needs a power-of-two point count >= 2, got {points}"
        )));
    }
    let stages = points.trailing_zeros() as usize;
    let per_stage = points / 2;
    // Butterfly owning sample index `i` in stage `s`, and which of its two
    // lanes `i` occupies.
    let owner = |s: usize, i: usize| -> (usize, usize) {
        let span = points >> (s + 1);
        let lower = i & !span;
        let lane = usize::from(i & span != 0);
        let rank = (0..lower).filter(|&j| j & span == 0).count();
        (s * per_stage + rank, lane)
    };
    let mut graph = TaskGraph::default();
    for id in 0..stages * per_stage {
        graph.nodes.push(TaskNode::new(id, CycleCost::Fixed(cycles)));
    }
    for s in 0..stages.saturating_sub(1) {
        for i in 0..points {
            let (from, out_lane) = owner(s, i);
            let (to, in_lane) = owner(s + 1, i);
            graph.channels.push(Channel {
                id: graph.channels.len(),
                src: PortRef::new(from, out_lane),
                dst: PortRef::new(to, in_lane),
                capacity,
                initial_tokens: 0,
            });
        }
    }
    graph.sources = (0..per_stage).collect();
    graph.sinks = ((stages - 1) * per_stage..stages * per_stage).collect();
    let mapping = Mapping {
        placement: (0..stages * per_stage)
            .map(|id| ((id / per_stage) as u32, (id % per_stage) as u32))
            .collect(),
        mesh: (stages as u32, per_stage as u32),
        interconnect: Interconnect::PointToPoint,
        adjacency_check: false,
    };
    Ok((graph, mapping))
}

/// Long-run tokens/second at each sink for an acyclic unit-rate graph.
///
/// With finite FIFOs, back-pressure couples every node of a weakly
/// connected component, so each sink runs at the slowest `f / mean(C)` in
/// its component.
pub fn bottleneck_rate(graph: &TaskGraph, freqs: &[Hertz]) -> Result<Vec<(NodeId, f64)>, GraphError> {
    if graph
        .nodes
        .iter()
        .any(|n| n.consume.iter().chain(&n.produce).any(|&r| r != 1))
    {
        return Err(GraphError::UnsupportedAnalysis("non-unit token rates"));
    }
    if !detect_comm_loops(graph)?.is_empty() {
        return Err(GraphError::UnsupportedAnalysis("cyclic graph"));
    }
    if freqs.len() != graph.nodes.len() {
        return Err(GraphError::UnsupportedAnalysis("one frequency per node required"));
    }
    let n = graph.nodes.len();
    let mut component = vec![usize::MAX; n];
    for root in 0..n {
        if component[root] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([root]);
        component[root] = root;
        while let Some(v) = queue.pop_front() {
            for c in graph.channels.iter().filter(|c| c.src.node == v || c.dst.node == v) {
                for w in [c.src.node, c.dst.node] {
                    if component[w] == usize::MAX {
                        component[w] = root;
                        queue.push_back(w);
                    }
                }
            }
        }
    }
    let rate = |v: NodeId| freqs[v].as_f64() / graph.nodes[v].cost.mean();
    Ok(graph
        .sinks
        .iter()
        .map(|&sink| {
            let r = (0..n)
                .filter(|&v| component[v] == component[sink])
                .map(rate)
                .fold(f64::INFINITY, f64::min);
            (sink, r)
        })
        .collect())
}
