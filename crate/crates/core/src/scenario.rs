//! Line-oriented scenario files.
//!
//! ```text
//! # comments run to end of line
//! [graph]
//! kind = fir_chain
//! n = 4
//! cycles = 10
//!
//! [channels]
//! capacity = 1024
//! stages = 2
//!
//! [sim]
//! duration = 1ms
//! ```
//!
//! A graph is either generated (`kind` plus generator parameters) or spelled
//! out with `node.<id>` and `channel.<id>` lines. [`serialize`] always writes
//! the explicit form, so any scenario survives a round trip.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::clocks::{default_levels, Hertz, SimTime};
use crate::dfs::GovernorKind;
use crate::engine::{
    BusConfig, ControlConfig, PeClock, PeGovernor, PowerConfig, Scenario, Setpoint, DEFAULT_FREQUENCY,
    DEFAULT_LEVEL_COUNT, DEFAULT_STAGES,
};
use crate::taskgraph::{
    generate, mix_seed, Channel, CycleCost, GenParams, GraphKind, Interconnect, Mapping, PortRef, TaskGraph, TaskNode,
    DEFAULT_CAPACITY,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

fn perr(line: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Section {
    Graph,
    Clocks,
    Channels,
    Governor,
    Power,
    Sim,
}

impl Section {
    fn parse(name: &str) -> Option<Section> {
        Some(match name {
            "graph" => Section::Graph,
            "clocks" => Section::Clocks,
            "channels" => Section::Channels,
            "governor" => Section::Governor,
            "power" => Section::Power,
            "sim" => Section::Sim,
            _ => return None,
        })
    }
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn parse<T: FromStr>(&self) -> Result<T, ScenarioError>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .parse()
            .map_err(|e| perr(self.line, format!("`{}`: {e}", self.key)))
    }

    fn number<T: FromStr>(&self) -> Result<T, ScenarioError> {
        self.value.parse().map_err(|_| {
            perr(
                self.line,
                format!("`{}`: expected a number, got `{}`", self.key, self.value),
            )
        })
    }

    fn boolean(&self) -> Result<bool, ScenarioError> {
        match self.value {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(perr(
                self.line,
                format!("`{}`: expected true or false, got `{v}`", self.key),
            )),
        }
    }

    fn list<T: FromStr>(&self) -> Result<Vec<T>, ScenarioError> {
        list(self.value).ok_or_else(|| perr(self.line, format!("`{}`: bad list `{}`", self.key, self.value)))
    }

    fn unknown(&self) -> ScenarioError {
        perr(self.line, format!("unknown key `{}`", self.key))
    }
}

fn list<T: FromStr>(s: &str) -> Option<Vec<T>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|x| x.trim().parse().ok()).collect()
}

/// `pe.<id>.<field>` keys.
fn per_pe(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("pe.")?;
    let (id, field) = rest.split_once('.')?;
    Some((id.parse().ok()?, field))
}

fn indexed(key: &str, prefix: &str) -> Option<usize> {
    key.strip_prefix(prefix)?.strip_prefix('.')?.parse().ok()
}

#[derive(Default)]
struct NodeSpec {
    cost: Option<(u32, Option<u32>)>,
    seed: Option<u64>,
    at: Option<(u32, u32)>,
    consume: Vec<u32>,
    produce: Vec<u32>,
}

struct ChannelSpec {
    src: PortRef,
    dst: PortRef,
    capacity: Option<u32>,
    initial: u32,
    stages: Option<u32>,
}

fn parse_port(s: &str) -> Option<PortRef> {
    let (n, p) = s.split_once('.')?;
    Some(PortRef::new(n.parse().ok()?, p.parse().ok()?))
}

fn parse_node(e: &Entry) -> Result<NodeSpec, ScenarioError> {
    let mut spec = NodeSpec::default();
    for field in e.value.split_whitespace() {
        let bad = || perr(e.line, format!("`{}`: bad field `{field}`", e.key));
        let (k, v) = field.split_once('=').ok_or_else(bad)?;
        match k {
            "cycles" => {
                spec.cost = Some(match v.split_once("..") {
                    Some((lo, hi)) => (lo.parse().map_err(|_| bad())?, Some(hi.parse().map_err(|_| bad())?)),
                    None => (v.parse().map_err(|_| bad())?, None),
                })
            }
            "seed" => spec.seed = Some(v.parse().map_err(|_| bad())?),
            "at" => {
                let xy: Vec<u32> = list(v).ok_or_else(bad)?;
                match xy[..] {
                    [x, y] => spec.at = Some((x, y)),
                    _ => return Err(bad()),
                }
            }
            "consume" => spec.consume = list(v).ok_or_else(bad)?,
            "produce" => spec.produce = list(v).ok_or_else(bad)?,
            _ => return Err(perr(e.line, format!("`{}`: unknown field `{k}`", e.key))),
        }
    }
    if spec.cost.is_none() {
        return Err(perr(e.line, format!("`{}`: missing `cycles=`", e.key)));
    }
    Ok(spec)
}

fn parse_channel(e: &Entry) -> Result<ChannelSpec, ScenarioError> {
    let bad = |what: &str| perr(e.line, format!("`{}`: {what}", e.key));
    let (route, fields) = match e.value.find(|c: char| c.is_ascii_alphabetic()) {
        Some(i) => e.value.split_at(i),
        None => (e.value, ""),
    };
    let (a, b) = route
        .split_once("->")
        .ok_or_else(|| bad("expected `<node>.<port> -> <node>.<port>`"))?;
    let src = parse_port(a.trim()).ok_or_else(|| bad("bad source port"))?;
    let dst = parse_port(b.trim()).ok_or_else(|| bad("bad destination port"))?;
    let mut spec = ChannelSpec {
        src,
        dst,
        capacity: None,
        initial: 0,
        stages: None,
    };
    for field in fields.split_whitespace() {
        let (k, v) = field.split_once('=').ok_or_else(|| bad("bad field"))?;
        let n: u32 = v.parse().map_err(|_| bad("bad number"))?;
        match k {
            "capacity" => spec.capacity = Some(n),
            "initial" => spec.initial = n,
            "stages" => spec.stages = Some(n),
            _ => return Err(bad(&format!("unknown field `{k}`"))),
        }
    }
    Ok(spec)
}

fn parse_setpoint(e: &Entry) -> Result<Setpoint, ScenarioError> {
    if e.value == "auto" {
        Ok(Setpoint::Auto)
    } else {
        e.number().map(Setpoint::TokensPerSec)
    }
}

#[derive(Clone)]
enum Levels {
    Count(usize),
    List(Vec<Hertz>),
}

fn parse_levels(e: &Entry) -> Result<Levels, ScenarioError> {
    if let Ok(n) = e.value.parse::<usize>() {
        return Ok(Levels::Count(n));
    }
    e.list().map(Levels::List)
}

#[derive(Default, Clone)]
struct ClockSpec {
    freq: Option<Hertz>,
    phase: Option<SimTime>,
    levels: Option<Levels>,
    f_max: Option<Hertz>,
}

#[derive(Default, Clone, Copy)]
struct GovSpec {
    kind: Option<GovernorKind>,
    setpoint: Option<Setpoint>,
    f_nominal: Option<Hertz>,
}

/// Values that replace the file's own before validation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Overrides {
    /// Replaces `[sim] seed`, and with it the generator seed unless
    /// `[graph] seed` is set.
    pub seed: Option<u64>,
    /// Replaces `[sim] duration`; warmup follows unless set explicitly.
    pub duration: Option<SimTime>,
}

/// Parses and validates a scenario, filling every unspecified value with
/// its default.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    load_scenario_with(text, Overrides::default())
}

pub fn load_scenario_with(text: &str, overrides: Overrides) -> Result<Scenario, ScenarioError> {
    let mut entries: Vec<(Section, Entry)> = Vec::new();
    let mut seen: HashSet<(Section, &str)> = HashSet::new();
    let mut section: Option<Section> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section =
                Some(Section::parse(name.trim()).ok_or_else(|| perr(line, format!("unknown section `[{name}]`")))?);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| perr(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| perr(line, "key outside of any section"))?;
        if !seen.insert((sec, key)) {
            return Err(perr(line, format!("duplicate key `{key}`")));
        }
        entries.push((sec, Entry { line, key, value }));
    }
    let in_section = |s: Section| entries.iter().filter(move |(x, _)| *x == s).map(|(_, e)| e);

    // [sim] first: its seed feeds the graph generator.
    let mut duration = SimTime::from_ms(1);
    let mut warmup = None;
    let mut seed = 0u64;
    for e in in_section(Section::Sim) {
        match e.key {
            "duration" => duration = e.parse()?,
            "warmup" => warmup = Some(e.parse()?),
            "seed" => seed = e.number()?,
            _ => return Err(e.unknown()),
        }
    }
    seed = overrides.seed.unwrap_or(seed);
    duration = overrides.duration.unwrap_or(duration);

    let mut capacity = None;
    let mut stages = None;
    let mut interconnect = Interconnect::PointToPoint;
    let mut bus = BusConfig::default();
    for e in in_section(Section::Channels) {
        match e.key {
            "capacity" => capacity = Some(e.number()?),
            "stages" => stages = Some(e.number()?),
            "interconnect" => interconnect = e.parse()?,
            "bus_frequency" => bus.freq = e.parse()?,
            "bus_phase" => bus.phase = e.parse()?,
            "bus_cycles_per_transfer" => bus.cycles_per_transfer = e.number()?,
            _ => return Err(e.unknown()),
        }
    }

    let mut kind: Option<(GraphKind, usize)> = None;
    let mut params = GenParams::default();
    let mut graph_seed = None;
    let mut mesh = None;
    let mut adjacency = None;
    let mut sources = None;
    let mut sinks = None;
    let mut nodes: BTreeMap<usize, (NodeSpec, usize)> = BTreeMap::new();
    let mut chans: BTreeMap<usize, (ChannelSpec, usize)> = BTreeMap::new();
    for e in in_section(Section::Graph) {
        match e.key {
            "kind" => kind = Some((e.parse()?, e.line)),
            "n" | "m" => {
                if params.n.is_some() {
                    return Err(perr(e.line, "`n` and `m` both given"));
                }
                params.n = Some(e.number()?)
            }
            "cycles" => params.cycles = Some(e.number()?),
            "min_cycles" => params.min_cycles = Some(e.number()?),
            "max_cycles" => params.max_cycles = Some(e.number()?),
            "seed" => graph_seed = Some(e.number()?),
            "mesh" => {
                let (w, h) = e
                    .value
                    .split_once('x')
                    .and_then(|(w, h)| Some((w.trim().parse().ok()?, h.trim().parse().ok()?)))
                    .ok_or_else(|| perr(e.line, "`mesh`: expected <width>x<height>"))?;
                mesh = Some((w, h));
            }
            "adjacency_check" => adjacency = Some(e.boolean()?),
            "sources" => sources = Some(e.list()?),
            "sinks" => sinks = Some(e.list()?),
            k => {
                if let Some(id) = indexed(k, "node") {
                    nodes.insert(id, (parse_node(e)?, e.line));
                } else if let Some(id) = indexed(k, "channel") {
                    chans.insert(id, (parse_channel(e)?, e.line));
                } else {
                    return Err(e.unknown());
                }
            }
        }
    }

    let mut errs: Vec<String> = Vec::new();
    let (graph, mut mapping, channel_stages) = if let Some((kind, line)) = kind {
        if let Some((_, l)) = nodes.values().next().or(None) {
            return Err(perr(*l, "explicit nodes cannot be combined with `kind`"));
        }
        if let Some((_, l)) = chans.values().next() {
            return Err(perr(*l, "explicit channels cannot be combined with `kind`"));
        }
        params.capacity = capacity;
        let (g, mut m) = generate(kind, &params, graph_seed.unwrap_or(seed)).map_err(|e| perr(line, e.to_string()))?;
        if let Some(mesh) = mesh {
            m.mesh = mesh;
        }
        if let Some(a) = adjacency {
            m.adjacency_check = a;
        }
        let st = vec![stages.unwrap_or(DEFAULT_STAGES); g.channels.len()];
        (g, m, st)
    } else {
        if params != GenParams::default() || graph_seed.is_some() {
            errs.push("generator parameters given without `kind`".into());
        }
        let mut g = TaskGraph::default();
        let mut placement = Vec::new();
        for (expect, (&id, (spec, line))) in nodes.iter().enumerate() {
            if id != expect {
                errs.push(format!(
                    "line {line}: node ids must be contiguous from 0; expected node.{expect}"
                ));
            }
            let (lo, hi) = spec.cost.expect("checked in parse_node");
            let cost = match hi {
                None => CycleCost::Fixed(lo),
                Some(hi) => CycleCost::Uniform {
                    min: lo,
                    max: hi,
                    seed: spec.seed.unwrap_or_else(|| mix_seed(seed, id as u64)),
                },
            };
            g.nodes.push(TaskNode {
                id,
                cost,
                consume: spec.consume.clone(),
                produce: spec.produce.clone(),
            });
            placement.push(spec.at.unwrap_or((id as u32, 0)));
        }
        let mut st = Vec::new();
        for (&id, (spec, _)) in &chans {
            g.channels.push(Channel {
                id,
                src: spec.src,
                dst: spec.dst,
                capacity: spec.capacity.or(capacity).unwrap_or(DEFAULT_CAPACITY),
                initial_tokens: spec.initial,
            });
            st.push(spec.stages.or(stages).unwrap_or(DEFAULT_STAGES));
        }
        let has_in = |n: usize| g.channels.iter().any(|c| c.dst.node == n);
        let has_out = |n: usize| g.channels.iter().any(|c| c.src.node == n);
        g.sources = sources.unwrap_or_else(|| (0..g.nodes.len()).filter(|&n| !has_in(n)).collect());
        g.sinks = sinks.unwrap_or_else(|| (0..g.nodes.len()).filter(|&n| !has_out(n)).collect());
        let mesh = mesh.unwrap_or_else(|| {
            let w = placement.iter().map(|p| p.0 + 1).max().unwrap_or(1);
            let h = placement.iter().map(|p| p.1 + 1).max().unwrap_or(1);
            (w, h)
        });
        let m = Mapping {
            placement,
            mesh,
            interconnect,
            adjacency_check: adjacency.unwrap_or(true),
        };
        (g, m, st)
    };
    mapping.interconnect = interconnect;
    let n = graph.nodes.len();

    let mut global_clock = ClockSpec::default();
    let mut pe_clock: BTreeMap<usize, ClockSpec> = BTreeMap::new();
    for e in in_section(Section::Clocks) {
        let (spec, field) = match per_pe(e.key) {
            Some((id, field)) => {
                if id >= n {
                    errs.push(format!("line {}: pe {id} does not exist", e.line));
                }
                (pe_clock.entry(id).or_default(), field)
            }
            None => (&mut global_clock, e.key),
        };
        match field {
            "frequency" => spec.freq = Some(e.parse()?),
            "phase" => spec.phase = Some(e.parse()?),
            "levels" => spec.levels = Some(parse_levels(e)?),
            "f_max" => spec.f_max = Some(e.parse()?),
            _ => return Err(e.unknown()),
        }
    }
    let clocks = (0..n)
        .map(|pe| {
            let own = pe_clock.get(&pe).cloned().unwrap_or_default();
            let freq = own.freq.or(global_clock.freq).unwrap_or(DEFAULT_FREQUENCY);
            let f_max = own.f_max.or(global_clock.f_max).unwrap_or(freq);
            let levels = match own.levels.or_else(|| global_clock.levels.clone()) {
                Some(Levels::List(l)) => l,
                Some(Levels::Count(c)) => default_levels(f_max, c),
                None => default_levels(f_max, DEFAULT_LEVEL_COUNT),
            };
            PeClock {
                freq,
                phase: own.phase.or(global_clock.phase).unwrap_or(SimTime::ZERO),
                levels,
            }
        })
        .collect();

    let mut control = ControlConfig::default();
    let mut global_gov = GovSpec::default();
    let mut pe_gov: BTreeMap<usize, GovSpec> = BTreeMap::new();
    for e in in_section(Section::Governor) {
        let (spec, field) = match per_pe(e.key) {
            Some((id, field)) => {
                if id >= n {
                    errs.push(format!("line {}: pe {id} does not exist", e.line));
                }
                (pe_gov.entry(id).or_default(), field)
            }
            None => (&mut global_gov, e.key),
        };
        match field {
            "kind" => spec.kind = Some(e.parse()?),
            "setpoint" => spec.setpoint = Some(parse_setpoint(e)?),
            "f_nominal" => spec.f_nominal = Some(e.parse()?),
            "kp" if per_pe(e.key).is_none() => control.kp = e.number()?,
            "ki" if per_pe(e.key).is_none() => control.ki = e.number()?,
            "kd" if per_pe(e.key).is_none() => control.kd = e.number()?,
            "window" if per_pe(e.key).is_none() => control.window = e.parse()?,
            "up_threshold" if per_pe(e.key).is_none() => control.up_threshold = e.number()?,
            "down_threshold" if per_pe(e.key).is_none() => control.down_threshold = e.number()?,
            _ => return Err(e.unknown()),
        }
    }
    let governors = (0..n)
        .map(|pe| {
            let own = pe_gov.get(&pe).copied().unwrap_or_default();
            let d = PeGovernor::default();
            PeGovernor {
                kind: own.kind.or(global_gov.kind).unwrap_or(d.kind),
                setpoint: own.setpoint.or(global_gov.setpoint).unwrap_or(d.setpoint),
                f_nominal: own.f_nominal.or(global_gov.f_nominal),
            }
        })
        .collect();

    let mut power = PowerConfig::default();
    for e in in_section(Section::Power) {
        match e.key {
            "capacitance" => power.capacitance = e.number()?,
            "v_min" => power.v_min = e.number()?,
            "v_max" => power.v_max = e.number()?,
            "leakage" => power.leakage = e.number()?,
            "f_min" => power.f_min = Some(e.parse()?),
            "f_max" => power.f_max = Some(e.parse()?),
            _ => return Err(e.unknown()),
        }
    }

    let scenario = Scenario {
        graph,
        mapping,
        clocks,
        stages: channel_stages,
        bus,
        governors,
        control,
        power,
        duration,
        warmup: warmup.unwrap_or(SimTime(duration.0 / 10)),
        seed,
    };
    if let Err(more) = scenario.check() {
        errs.extend(more);
    }
    if errs.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invalid(errs))
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn all_same<T: PartialEq>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] == w[1])
}

fn setpoint_text(s: Setpoint) -> String {
    match s {
        Setpoint::Auto => "auto".into(),
        Setpoint::TokensPerSec(x) => format!("{x:?}"),
    }
}

/// Writes `s` in the explicit form accepted by [`load_scenario`].
pub fn serialize(s: &Scenario) -> String {
    let mut out = String::new();
    let g = &s.graph;
    let m = &s.mapping;
    let _ = writeln!(out, "[graph]");
    let _ = writeln!(out, "mesh = {}x{}", m.mesh.0, m.mesh.1);
    let _ = writeln!(out, "adjacency_check = {}", m.adjacency_check);
    let _ = writeln!(out, "sources = {}", join(&g.sources));
    let _ = writeln!(out, "sinks = {}", join(&g.sinks));
    for node in &g.nodes {
        let cost = match node.cost {
            CycleCost::Fixed(c) => format!("cycles={c}"),
            CycleCost::Uniform { min, max, seed } => format!("cycles={min}..{max} seed={seed}"),
        };
        let _ = write!(out, "node.{} = {cost}", node.id);
        if let Some((x, y)) = m.placement.get(node.id) {
            let _ = write!(out, " at={x},{y}");
        }
        if !node.consume.is_empty() {
            let _ = write!(out, " consume={}", join(&node.consume));
        }
        if !node.produce.is_empty() {
            let _ = write!(out, " produce={}", join(&node.produce));
        }
        out.push('\n');
    }
    for (c, st) in g.channels.iter().zip(&s.stages) {
        let _ = writeln!(
            out,
            "channel.{} = {}.{} -> {}.{} capacity={} initial={} stages={}",
            c.id, c.src.node, c.src.port, c.dst.node, c.dst.port, c.capacity, c.initial_tokens, st
        );
    }

    let _ = writeln!(out, "\n[clocks]");
    if all_same(&s.clocks) && !s.clocks.is_empty() {
        let c = &s.clocks[0];
        let _ = writeln!(out, "frequency = {}", c.freq);
        let _ = writeln!(out, "phase = {}", c.phase);
        let _ = writeln!(out, "levels = {}", join(&c.levels));
    } else {
        for (pe, c) in s.clocks.iter().enumerate() {
            let _ = writeln!(out, "pe.{pe}.frequency = {}", c.freq);
            let _ = writeln!(out, "pe.{pe}.phase = {}", c.phase);
            let _ = writeln!(out, "pe.{pe}.levels = {}", join(&c.levels));
        }
    }

    let _ = writeln!(out, "\n[channels]");
    let _ = writeln!(out, "interconnect = {}", m.interconnect);
    let _ = writeln!(out, "bus_frequency = {}", s.bus.freq);
    let _ = writeln!(out, "bus_phase = {}", s.bus.phase);
    let _ = writeln!(out, "bus_cycles_per_transfer = {}", s.bus.cycles_per_transfer);

    let c = &s.control;
    let _ = writeln!(out, "\n[governor]");
    let _ = writeln!(out, "kp = {:?}", c.kp);
    let _ = writeln!(out, "ki = {:?}", c.ki);
    let _ = writeln!(out, "kd = {:?}", c.kd);
    let _ = writeln!(out, "window = {}", c.window);
    let _ = writeln!(out, "up_threshold = {:?}", c.up_threshold);
    let _ = writeln!(out, "down_threshold = {:?}", c.down_threshold);
    let write_gov = |out: &mut String, prefix: &str, g: &PeGovernor| {
        let _ = writeln!(out, "{prefix}kind = {}", g.kind);
        let _ = writeln!(out, "{prefix}setpoint = {}", setpoint_text(g.setpoint));
        if let Some(f) = g.f_nominal {
            let _ = writeln!(out, "{prefix}f_nominal = {f}");
        }
    };
    if all_same(&s.governors) && !s.governors.is_empty() {
        write_gov(&mut out, "", &s.governors[0]);
    } else {
        for (pe, g) in s.governors.iter().enumerate() {
            write_gov(&mut out, &format!("pe.{pe}."), g);
        }
    }

    let p = &s.power;
    let _ = writeln!(out, "\n[power]");
    let _ = writeln!(out, "capacitance = {:?}", p.capacitance);
    let _ = writeln!(out, "v_min = {:?}", p.v_min);
    let _ = writeln!(out, "v_max = {:?}", p.v_max);
    let _ = writeln!(out, "leakage = {:?}", p.leakage);
    if let Some(f) = p.f_min {
        let _ = writeln!(out, "f_min = {f}");
    }
    if let Some(f) = p.f_max {
        let _ = writeln!(out, "f_max = {f}");
    }

    let _ = writeln!(out, "\n[sim]");
    let _ = writeln!(out, "duration = {}", s.duration);
    // Left implicit at the default so a later duration override carries it.
    if s.warmup.0 != s.duration.0 / 10 {
        let _ = writeln!(out, "warmup = {}", s.warmup);
    }
    let _ = writeln!(out, "seed = {}", s.seed);
    out
}
