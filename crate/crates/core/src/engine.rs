//! Discrete-event execution of a mapped task graph on per-PE clock domains.
//!
//! Every PE owns a clock domain. The simulator repeatedly takes the
//! earliest pending rising edge (ties broken by ascending domain id, the
//! shared bus last) and advances that PE's firing state machine by one
//! cycle. On each edge a PE does, in order:
//!
//! 1. one pop attempt per unsatisfied input port, while acquiring inputs;
//! 2. one compute cycle, once all inputs are in hand;
//! 3. one push attempt per unplaced output port, once computation is done.
//!
//! Every measured edge lands in exactly one bucket: compute, read stall
//! (all pops failed), write stall (all pushes failed), or progress (some
//! transfer succeeded without a compute cycle).

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use thiserror::Error;

use crate::clocks::{default_levels, ClockDomain, ClockError, Hertz, SimTime, SyncConfig};
use crate::dfs::{
    energy, governor_step, DfsError, FreqInterval, Governor, GovernorKind, PidController, PowerModel, WindowSample,
    DEFAULT_DOWN_THRESHOLD, DEFAULT_KD, DEFAULT_KI, DEFAULT_KP, DEFAULT_UP_THRESHOLD, DEFAULT_WINDOW,
};
use crate::fifo::{DualClockFifo, Ends, FifoError, PushOutcome, Token};
use crate::taskgraph::{bottleneck_rate, validate, CostSampler, Interconnect, Mapping, NodeId, TaskGraph};

pub const DEFAULT_FREQUENCY: Hertz = Hertz::from_mhz(100);
pub const DEFAULT_LEVEL_COUNT: usize = 16;
pub const DEFAULT_STAGES: u32 = 2;
pub const DEFAULT_BUS_CYCLES: u32 = 2;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    InvalidScenario(Vec<String>),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Fifo(#[from] FifoError),
    #[error(transparent)]
    Dfs(#[from] DfsError),
    #[error("penalty undefined: synchronous throughput at sink {0} is zero")]
    UndefinedPenalty(NodeId),
    #[error("penalty needs matching sinks in both runs")]
    SinkMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeClock {
    pub freq: Hertz,
    pub phase: SimTime,
    pub levels: Vec<Hertz>,
}

impl PeClock {
    pub fn new(freq: Hertz) -> Self {
        PeClock {
            freq,
            phase: SimTime::ZERO,
            levels: default_levels(freq, DEFAULT_LEVEL_COUNT),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Setpoint {
    /// Analytic bottleneck rate of the graph at the initial frequencies.
    Auto,
    TokensPerSec(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeGovernor {
    pub kind: GovernorKind,
    pub setpoint: Setpoint,
    /// Defaults to `setpoint * mean cycles`, clamped to the level range.
    pub f_nominal: Option<Hertz>,
}

impl Default for PeGovernor {
    fn default() -> Self {
        PeGovernor {
            kind: GovernorKind::Static,
            setpoint: Setpoint::Auto,
            f_nominal: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub window: SimTime,
    pub up_threshold: f64,
    pub down_threshold: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            kp: DEFAULT_KP,
            ki: DEFAULT_KI,
            kd: DEFAULT_KD,
            window: DEFAULT_WINDOW,
            up_threshold: DEFAULT_UP_THRESHOLD,
            down_threshold: DEFAULT_DOWN_THRESHOLD,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BusConfig {
    pub freq: Hertz,
    pub phase: SimTime,
    pub cycles_per_transfer: u32,
}

impl Default for BusConfig {
    fn default() -> Self {
        BusConfig {
            freq: DEFAULT_FREQUENCY,
            phase: SimTime::ZERO,
            cycles_per_transfer: DEFAULT_BUS_CYCLES,
        }
    }
}

/// Power model parameters; frequency bounds default to the PE level range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerConfig {
    pub capacitance: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub leakage: f64,
    pub f_min: Option<Hertz>,
    pub f_max: Option<Hertz>,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            capacitance: 1.0,
            v_min: 0.8,
            v_max: 1.3,
            leakage: 0.0,
            f_min: None,
            f_max: None,
        }
    }
}

/// Everything needed to reproduce one simulation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub graph: TaskGraph,
    pub mapping: Mapping,
    /// Indexed by node id.
    pub clocks: Vec<PeClock>,
    /// Synchronizer stages per channel, indexed by channel position.
    pub stages: Vec<u32>,
    pub bus: BusConfig,
    /// Indexed by node id.
    pub governors: Vec<PeGovernor>,
    pub control: ControlConfig,
    pub power: PowerConfig,
    pub duration: SimTime,
    pub warmup: SimTime,
    pub seed: u64,
}

impl Scenario {
    /// Defaults everywhere: 100 MHz aligned clocks, two-stage synchronizers,
    /// static governors, 1 ms run with 10% warmup.
    pub fn new(graph: TaskGraph, mapping: Mapping) -> Self {
        let n = graph.nodes.len();
        let channels = graph.channels.len();
        let duration = SimTime::from_ms(1);
        Scenario {
            graph,
            mapping,
            clocks: vec![PeClock::new(DEFAULT_FREQUENCY); n],
            stages: vec![DEFAULT_STAGES; channels],
            bus: BusConfig::default(),
            governors: vec![PeGovernor::default(); n],
            control: ControlConfig::default(),
            power: PowerConfig::default(),
            duration,
            warmup: SimTime(duration.0 / 10),
            seed: 0,
        }
    }

    pub fn with_stages(mut self, stages: u32) -> Self {
        self.stages.iter_mut().for_each(|s| *s = stages);
        self
    }

    pub fn with_capacity(mut self, capacity: u32) -> Self {
        self.graph.channels.iter_mut().for_each(|c| c.capacity = capacity);
        self
    }

    /// Sets every PE to `freq` with the default level grid under it.
    pub fn with_frequency(mut self, freq: Hertz) -> Self {
        self.clocks.iter_mut().for_each(|c| {
            *c = PeClock {
                phase: c.phase,
                ..PeClock::new(freq)
            }
        });
        self
    }

    /// Sets the run length and the default 10% warmup.
    pub fn with_duration(mut self, duration: SimTime) -> Self {
        self.duration = duration;
        self.warmup = SimTime(duration.0 / 10);
        self
    }

    pub fn with_interconnect(mut self, ic: Interconnect) -> Self {
        self.mapping.interconnect = ic;
        self
    }

    pub fn with_governor(mut self, kind: GovernorKind) -> Self {
        self.governors.iter_mut().for_each(|g| g.kind = kind);
        self
    }

    /// Frequency range of the power model.
    pub fn power_range(&self) -> (Hertz, Hertz) {
        let lo = self.clocks.iter().filter_map(|c| c.levels.first()).min().copied();
        let hi = self.clocks.iter().filter_map(|c| c.levels.last()).max().copied();
        (
            self.power.f_min.or(lo).unwrap_or(DEFAULT_FREQUENCY),
            self.power.f_max.or(hi).unwrap_or(DEFAULT_FREQUENCY),
        )
    }

    pub fn power_model(&self) -> Result<PowerModel, DfsError> {
        let (lo, hi) = self.power_range();
        PowerModel::new(
            self.power.capacitance,
            self.power.v_min,
            self.power.v_max,
            lo,
            hi,
            self.power.leakage,
        )
    }

    /// Every violated invariant, graph and configuration alike.
    pub fn check(&self) -> Result<(), Vec<String>> {
        let mut errs: Vec<String> = match validate(&self.graph, &self.mapping) {
            Ok(()) => Vec::new(),
            Err(list) => list.iter().map(ToString::to_string).collect(),
        };
        let n = self.graph.nodes.len();
        if self.warmup >= self.duration {
            errs.push(format!(
                "duration ({}) must exceed warmup ({})",
                self.duration, self.warmup
            ));
        }
        if self.clocks.len() != n {
            errs.push(format!("{} clock configs for {} nodes", self.clocks.len(), n));
        }
        if self.governors.len() != n {
            errs.push(format!("{} governor configs for {} nodes", self.governors.len(), n));
        }
        if self.stages.len() != self.graph.channels.len() {
            errs.push(format!(
                "{} stage settings for {} channels",
                self.stages.len(),
                self.graph.channels.len()
            ));
        }
        for (pe, c) in self.clocks.iter().enumerate() {
            if let Err(e) = ClockDomain::new(pe, c.freq, c.phase, c.levels.clone()) {
                errs.push(format!("pe {pe}: {e}"));
            }
        }
        if self.mapping.interconnect == Interconnect::SharedBus {
            if self.bus.cycles_per_transfer == 0 {
                errs.push("bus cycles_per_transfer must be at least 1".into());
            }
            if self.bus.freq.0 == 0 {
                errs.push("bus frequency must be positive".into());
            }
        }
        let c = &self.control;
        if c.window == SimTime::ZERO {
            errs.push("control window must be positive".into());
        }
        if self
            .governors
            .iter()
            .any(|g| matches!(g.kind, GovernorKind::OnDemand | GovernorKind::Conservative))
        {
            if let Err(e) = Governor::new(GovernorKind::OnDemand, c.up_threshold, c.down_threshold) {
                errs.push(e.to_string());
            }
        }
        for (pe, g) in self.governors.iter().enumerate() {
            if let Setpoint::TokensPerSec(s) = g.setpoint {
                if !(s > 0.0 && s.is_finite()) {
                    errs.push(format!("pe {pe}: setpoint must be positive"));
                }
            }
        }
        if let Err(e) = self.power_model() {
            errs.push(e.to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SinkMetrics {
    pub node: NodeId,
    pub tokens: u64,
    pub throughput: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PeMetrics {
    pub node: NodeId,
    pub edges: u64,
    pub compute_cycles: u64,
    pub read_stall_cycles: u64,
    pub write_stall_cycles: u64,
    pub progress_cycles: u64,
    pub firings: u64,
    pub energy: f64,
    pub freq_trace: Vec<FreqInterval>,
    /// Every governor decision, measured window or not.
    pub control_log: Vec<ControlStep>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlStep {
    pub sample: WindowSample,
    pub commanded: Hertz,
}

impl PeMetrics {
    fn fraction(&self, x: u64) -> f64 {
        if self.edges == 0 {
            0.0
        } else {
            x as f64 / self.edges as f64
        }
    }

    pub fn read_stall_fraction(&self) -> f64 {
        self.fraction(self.read_stall_cycles)
    }

    pub fn write_stall_fraction(&self) -> f64 {
        self.fraction(self.write_stall_cycles)
    }

    pub fn busy_fraction(&self) -> f64 {
        self.fraction(self.compute_cycles + self.progress_cycles)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChannelMetrics {
    pub id: usize,
    /// Writer-side pointer advances over the whole run, initial tokens included.
    pub pushed: u64,
    pub popped: u64,
    pub final_occupancy: u64,
    pub occupancy_min: u64,
    pub occupancy_max: u64,
    pub occupancy_mean: f64,
    /// Popped tokens whose sequence number did not follow the previous one.
    pub order_violations: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub measured_from: SimTime,
    pub measured_to: SimTime,
    pub sinks: Vec<SinkMetrics>,
    pub pes: Vec<PeMetrics>,
    pub channels: Vec<ChannelMetrics>,
    pub total_energy: f64,
    pub bus_transfers: u64,
    pub warnings: Vec<String>,
}

impl Metrics {
    pub fn measured_secs(&self) -> f64 {
        (self.measured_to - self.measured_from).as_secs_f64()
    }

    /// Sum of all sink throughputs.
    pub fn aggregate_throughput(&self) -> f64 {
        self.sinks.iter().map(|s| s.throughput).sum()
    }

    pub fn sink_tokens(&self) -> u64 {
        self.sinks.iter().map(|s| s.tokens).sum()
    }
}

/// Mean over sinks of `1 - gals / sync` throughput.
pub fn penalty(gals: &Metrics, sync: &Metrics) -> Result<f64, EngineError> {
    if gals.sinks.len() != sync.sinks.len() || gals.sinks.is_empty() {
        return Err(EngineError::SinkMismatch);
    }
    let mut total = 0.0;
    for (g, s) in gals.sinks.iter().zip(&sync.sinks) {
        if g.node != s.node {
            return Err(EngineError::SinkMismatch);
        }
        if s.throughput == 0.0 {
            return Err(EngineError::UndefinedPenalty(s.node));
        }
        total += 1.0 - g.throughput / s.throughput;
    }
    Ok(total / gals.sinks.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Acquiring,
    Computing(u32),
    Emitting,
}

enum Control {
    None,
    Pid(PidController),
    Load(Governor),
}

#[derive(Default, Clone, Copy)]
struct WindowCounters {
    tokens: u64,
    busy: u64,
    total: u64,
}

struct Pe {
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    consume: Vec<u32>,
    produce: Vec<u32>,
    got: Vec<u32>,
    placed: Vec<u32>,
    phase: Phase,
    sampler: CostSampler,
    is_sink: bool,
    stats: PeMetrics,
    sink_tokens: u64,
    control: Control,
    window_start: SimTime,
    window: WindowCounters,
}

struct Request {
    channel: usize,
}

struct Bus {
    cycles_per_transfer: u32,
    cursor: usize,
    queues: Vec<VecDeque<Request>>,
    in_flight: Option<(Request, u32)>,
    transfers: u64,
}

#[derive(Clone, Copy)]
struct Occupancy {
    min: u64,
    max: u64,
    sum: u64,
    samples: u64,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    clocks: Vec<ClockDomain>,
    fifos: Vec<DualClockFifo>,
    last_seq: Vec<Option<u64>>,
    order_violations: Vec<u64>,
    occupancy: Vec<Occupancy>,
    pes: Vec<Pe>,
    bus: Option<Bus>,
}

fn resolve_setpoint(scenario: &Scenario, pe: usize, auto: &mut Option<Vec<f64>>) -> Result<f64, EngineError> {
    match scenario.governors[pe].setpoint {
        Setpoint::TokensPerSec(s) => Ok(s),
        Setpoint::Auto => {
            if auto.is_none() {
                let freqs: Vec<Hertz> = scenario.clocks.iter().map(|c| c.freq).collect();
                let rates = bottleneck_rate(&scenario.graph, &freqs).map_err(|e| {
                    EngineError::InvalidScenario(vec![format!(
                        "pe {pe}: automatic setpoint needs an analyzable graph ({e}); give an explicit setpoint"
                    )])
                })?;
                // Slowest sink rate applies to every node.
                let r = rates.iter().map(|&(_, r)| r).fold(f64::INFINITY, f64::min);
                *auto = Some(vec![r; scenario.graph.nodes.len()]);
            }
            Ok(auto.as_ref().expect("filled above")[pe])
        }
    }
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, EngineError> {
        let g = &scenario.graph;
        let n = g.nodes.len();
        let clocks = scenario
            .clocks
            .iter()
            .enumerate()
            .map(|(i, c)| ClockDomain::new(i, c.freq, c.phase, c.levels.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let fifos = g
            .channels
            .iter()
            .zip(&scenario.stages)
            .map(|(c, &s)| {
                let sync = SyncConfig::new(s);
                DualClockFifo::with_initial(c.capacity, c.initial_tokens, c.src.node, c.dst.node, sync, sync)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut auto = None;
        let mut pes = Vec::with_capacity(n);
        for node in &g.nodes {
            let mut inputs: Vec<(usize, usize)> = g
                .channels
                .iter()
                .enumerate()
                .filter(|(_, c)| c.dst.node == node.id)
                .map(|(i, c)| (c.dst.port, i))
                .collect();
            inputs.sort_unstable();
            let mut outputs: Vec<(usize, usize)> = g
                .channels
                .iter()
                .enumerate()
                .filter(|(_, c)| c.src.node == node.id)
                .map(|(i, c)| (c.src.port, i))
                .collect();
            outputs.sort_unstable();
            let cfg = scenario.governors[node.id];
            let domain = &clocks[node.id];
            let control = match cfg.kind {
                GovernorKind::Static => Control::None,
                GovernorKind::OnDemand | GovernorKind::Conservative => Control::Load(Governor::new(
                    cfg.kind,
                    scenario.control.up_threshold,
                    scenario.control.down_threshold,
                )?),
                GovernorKind::Pid => {
                    let setpoint = resolve_setpoint(scenario, node.id, &mut auto)?;
                    let nominal = cfg.f_nominal.unwrap_or_else(|| {
                        let f = (setpoint * node.cost.mean()).round();
                        Hertz((f as u64).clamp(domain.f_min().0, domain.f_max().0))
                    });
                    let c = &scenario.control;
                    Control::Pid(PidController::new(c.kp, c.ki, c.kd, setpoint, nominal, c.window)?)
                }
            };
            pes.push(Pe {
                consume: inputs.iter().map(|&(p, _)| node.consume_rate(p)).collect(),
                produce: outputs.iter().map(|&(p, _)| node.produce_rate(p)).collect(),
                got: vec![0; inputs.len()],
                placed: vec![0; outputs.len()],
                inputs: inputs.into_iter().map(|(_, i)| i).collect(),
                outputs: outputs.into_iter().map(|(_, i)| i).collect(),
                phase: Phase::Acquiring,
                sampler: node.cost.sampler(scenario.seed),
                is_sink: g.sinks.contains(&node.id),
                stats: PeMetrics {
                    node: node.id,
                    ..Default::default()
                },
                sink_tokens: 0,
                control,
                window_start: SimTime::ZERO,
                window: WindowCounters::default(),
            });
        }
        let bus = (scenario.mapping.interconnect == Interconnect::SharedBus).then(|| Bus {
            cycles_per_transfer: scenario.bus.cycles_per_transfer,
            cursor: 0,
            queues: (0..n).map(|_| VecDeque::new()).collect(),
            in_flight: None,
            transfers: 0,
        });
        let mut clocks = clocks;
        if bus.is_some() {
            clocks.push(ClockDomain::fixed(n, scenario.bus.freq, scenario.bus.phase)?);
        }
        let channels = g.channels.len();
        Ok(Sim {
            scenario,
            clocks,
            fifos,
            last_seq: g.channels.iter().map(|_| None).collect(),
            order_violations: vec![0; channels],
            occupancy: vec![
                Occupancy {
                    min: u64::MAX,
                    max: 0,
                    sum: 0,
                    samples: 0,
                };
                channels
            ],
            pes,
            bus,
        })
    }

    fn measured(&self, t: SimTime) -> bool {
        t >= self.scenario.warmup && t < self.scenario.duration
    }

    /// Closes every control window that ended at or before `t`.
    fn close_windows(&mut self, pe_id: usize, t: SimTime) -> Result<(), EngineError> {
        let window = self.scenario.control.window;
        let pe = &mut self.pes[pe_id];
        if matches!(pe.control, Control::None) {
            return Ok(());
        }
        while t >= pe.window_start + window {
            let end = pe.window_start + window;
            let sample = WindowSample {
                start: pe.window_start,
                end,
                tokens_completed: pe.window.tokens,
                busy_cycles: pe.window.busy,
                total_cycles: pe.window.total,
            };
            let domain = &mut self.clocks[pe_id];
            let current = domain.current_frequency();
            let next = match &mut pe.control {
                Control::None => current,
                Control::Pid(ctrl) => ctrl.step(&sample, domain.levels(), current)?,
                Control::Load(gov) => governor_step(gov, &sample, current, domain.levels()),
            };
            domain.set_frequency(next, end)?;
            pe.stats.control_log.push(ControlStep {
                sample,
                commanded: next,
            });
            pe.window = WindowCounters::default();
            pe.window_start = end;
        }
        Ok(())
    }

    fn step_pe(&mut self, pe_id: usize, t: SimTime) -> Result<(), EngineError> {
        self.close_windows(pe_id, t)?;
        let measured = self.measured(t);
        let Sim {
            clocks,
            fifos,
            pes,
            bus,
            last_seq,
            order_violations,
            ..
        } = self;
        let pe = &mut pes[pe_id];
        let mut popped = false;
        let mut pushed = false;
        let mut tried_pop = false;
        let mut tried_push = false;
        let mut computed = false;

        if pe.phase == Phase::Acquiring {
            for (port, &ch) in pe.inputs.iter().enumerate() {
                if pe.got[port] >= pe.consume[port] {
                    continue;
                }
                tried_pop = true;
                let fifo = &mut fifos[ch];
                let ends = Ends {
                    write: &clocks[fifo.write_domain()],
                    read: &clocks[fifo.read_domain()],
                };
                if let Some(tok) = fifo.try_pop(t, ends)? {
                    pe.got[port] += 1;
                    popped = true;
                    if last_seq[ch].is_some_and(|s| tok.seq != s + 1) || (last_seq[ch].is_none() && tok.seq != 0) {
                        order_violations[ch] += 1;
                    }
                    last_seq[ch] = Some(tok.seq);
                }
                if fifo.history_len() > 32 {
                    fifo.compact(t, ends);
                }
            }
            if pe.got.iter().zip(&pe.consume).all(|(g, c)| g >= c) {
                pe.got.iter_mut().for_each(|g| *g = 0);
                pe.phase = Phase::Computing(pe.sampler.next_cost());
            }
        }

        if let Phase::Computing(remaining) = pe.phase {
            computed = true;
            pe.phase = if remaining <= 1 {
                Phase::Emitting
            } else {
                Phase::Computing(remaining - 1)
            };
        }

        if pe.phase == Phase::Emitting {
            for (port, &ch) in pe.outputs.iter().enumerate() {
                if pe.placed[port] >= pe.produce[port] {
                    continue;
                }
                tried_push = true;
                let fifo = &mut fifos[ch];
                let ends = Ends {
                    write: &clocks[fifo.write_domain()],
                    read: &clocks[fifo.read_domain()],
                };
                let accepted = match bus {
                    None => fifo.try_push(Token::new(0), t, ends)? == PushOutcome::Accepted,
                    Some(bus) => {
                        let ok = fifo.try_reserve(t, ends)?;
                        if ok {
                            bus.queues[pe_id].push_back(Request { channel: ch });
                        }
                        ok
                    }
                };
                if accepted {
                    pe.placed[port] += 1;
                    pushed = true;
                }
                if fifo.history_len() > 32 {
                    fifo.compact(t, ends);
                }
            }
            if pe.placed.iter().zip(&pe.produce).all(|(p, q)| p >= q) {
                pe.placed.iter_mut().for_each(|p| *p = 0);
                pe.phase = Phase::Acquiring;
                pe.window.tokens += 1;
                if measured {
                    pe.stats.firings += 1;
                    if pe.is_sink {
                        pe.sink_tokens += 1;
                    }
                }
            }
        }

        let busy = computed || popped || pushed;
        pe.window.total += 1;
        pe.window.busy += u64::from(busy);
        if measured {
            let s = &mut pe.stats;
            s.edges += 1;
            if computed {
                s.compute_cycles += 1;
            } else if popped || pushed {
                s.progress_cycles += 1;
            } else if tried_pop {
                s.read_stall_cycles += 1;
            } else if tried_push {
                s.write_stall_cycles += 1;
            } else {
                s.progress_cycles += 1;
            }
            // Sample occupancy of the channels this PE reads.
            for &ch in &pes[pe_id].inputs {
                let f = &fifos[ch];
                let occ = f.total_writes() - f.total_reads();
                let o = &mut self.occupancy[ch];
                o.min = o.min.min(occ);
                o.max = o.max.max(occ);
                o.sum += occ;
                o.samples += 1;
            }
        }
        Ok(())
    }

    fn step_bus(&mut self, t: SimTime) -> Result<(), EngineError> {
        let bus = self.bus.as_mut().expect("bus domain exists only with a bus");
        if let Some((req, remaining)) = bus.in_flight.take() {
            if remaining <= 1 {
                self.fifos[req.channel].deliver(Token::new(0), t)?;
                bus.transfers += 1;
            } else {
                bus.in_flight = Some((req, remaining - 1));
            }
        }
        if bus.in_flight.is_none() {
            let n = bus.queues.len();
            for k in 0..n {
                let pe = (bus.cursor + k) % n;
                if let Some(req) = bus.queues[pe].pop_front() {
                    bus.in_flight = Some((req, bus.cycles_per_transfer));
                    bus.cursor = (pe + 1) % n;
                    break;
                }
            }
        }
        Ok(())
    }

    fn run(mut self) -> Result<Metrics, EngineError> {
        let duration = self.scenario.duration;
        let pe_count = self.pes.len();
        let mut heap: BinaryHeap<Reverse<(SimTime, usize)>> =
            self.clocks.iter().map(|c| Reverse((c.edge_at(0), c.id()))).collect();
        while let Some(Reverse((t, d))) = heap.pop() {
            if t >= duration {
                break;
            }
            if d < pe_count {
                self.step_pe(d, t)?;
            } else {
                self.step_bus(t)?;
            }
            heap.push(Reverse((self.clocks[d].next_edge_after(t, true), d)));
        }
        self.finish()
    }

    fn finish(self) -> Result<Metrics, EngineError> {
        let sc = self.scenario;
        let (from, to) = (sc.warmup, sc.duration);
        let secs = (to - from).as_secs_f64();
        let model = sc.power_model()?;
        let mut pes: Vec<PeMetrics> = Vec::with_capacity(self.pes.len());
        for (i, pe) in self.pes.iter().enumerate() {
            let mut m = pe.stats.clone();
            m.freq_trace = frequency_trace(&self.clocks[i], from, to);
            pes.push(m);
        }
        let traces: Vec<Vec<FreqInterval>> = pes.iter().map(|p| p.freq_trace.clone()).collect();
        let (per_pe, total_energy) = energy(&traces, &model)?;
        for (m, e) in pes.iter_mut().zip(per_pe) {
            m.energy = e;
        }
        let sinks: Vec<SinkMetrics> = sc
            .graph
            .sinks
            .iter()
            .map(|&s| {
                let tokens = self.pes[s].sink_tokens;
                SinkMetrics {
                    node: s,
                    tokens,
                    throughput: tokens as f64 / secs,
                }
            })
            .collect();
        let channels = sc
            .graph
            .channels
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let f = &self.fifos[i];
                let o = self.occupancy[i];
                ChannelMetrics {
                    id: c.id,
                    pushed: f.total_writes(),
                    popped: f.total_reads(),
                    final_occupancy: f.total_writes() - f.total_reads(),
                    occupancy_min: if o.samples == 0 { 0 } else { o.min },
                    occupancy_max: o.max,
                    occupancy_mean: if o.samples == 0 {
                        0.0
                    } else {
                        o.sum as f64 / o.samples as f64
                    },
                    order_violations: self.order_violations[i],
                }
            })
            .collect();
        let mut warnings = Vec::new();
        if sinks.iter().all(|s| s.tokens == 0) {
            warnings.push("degenerate run: no tokens reached any sink in the measured window".to_string());
        }
        Ok(Metrics {
            measured_from: from,
            measured_to: to,
            sinks,
            pes,
            channels,
            total_energy,
            bus_transfers: self.bus.as_ref().map_or(0, |b| b.transfers),
            warnings,
        })
    }
}

/// Constant-frequency intervals of `domain` clipped to `[from, to)`.
pub fn frequency_trace(domain: &ClockDomain, from: SimTime, to: SimTime) -> Vec<FreqInterval> {
    let sched: Vec<(SimTime, Hertz)> = domain.schedule().collect();
    let mut out: Vec<FreqInterval> = Vec::new();
    for (i, &(start, freq)) in sched.iter().enumerate() {
        // The first segment also governs time before the first edge.
        let start = if i == 0 { SimTime::ZERO } else { start };
        let end = sched.get(i + 1).map_or(SimTime::MAX, |s| s.0);
        let (a, b) = (start.max(from), end.min(to));
        if a < b {
            match out.last_mut() {
                Some(last) if last.freq == freq && last.end == a => last.end = b,
                _ => out.push(FreqInterval { start: a, end: b, freq }),
            }
        }
    }
    out
}

/// Runs `scenario` to completion. Identical scenarios give identical metrics.
pub fn run(scenario: &Scenario) -> Result<Metrics, EngineError> {
    scenario.check().map_err(EngineError::InvalidScenario)?;
    Sim::new(scenario)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskgraph::{generate, CycleCost, GenParams, GraphKind, TaskNode};

    fn chain(n: usize, cycles: u32) -> Scenario {
        let p = GenParams {
            n: Some(n),
            cycles: Some(cycles),
            ..Default::default()
        };
        let (g, m) = generate(GraphKind::FirChain, &p, 0).unwrap();
        Scenario::new(g, m)
    }

    #[test]
    fn single_node_rate() {
        let g = TaskGraph {
            nodes: vec![TaskNode::new(0, CycleCost::Fixed(100))],
            sources: vec![0],
            sinks: vec![0],
            ..Default::default()
        };
        let mut sc = Scenario::new(g, Mapping::row(1, Interconnect::PointToPoint));
        sc.warmup = SimTime::ZERO;
        let m = run(&sc).unwrap();
        assert_eq!(m.sinks[0].tokens, 1000);
        assert_eq!(m.sinks[0].throughput, 1e6);
        assert_eq!(m.pes[0].edges, 100_000);
        assert_eq!(m.pes[0].compute_cycles, 100_000);
    }

    #[test]
    fn synchronous_chain_hits_bottleneck_rate() {
        let m = run(&chain(2, 10).with_stages(0)).unwrap();
        assert_eq!(m.sinks[0].tokens, 9000);
        assert_eq!(m.sinks[0].throughput, 1e7);
    }

    #[test]
    fn capacity_one_round_trip_bounds_period() {
        // Two-stage sync each way makes a four-edge credit loop; a ten-cycle
        // stage hides it, a two-cycle stage does not.
        let slow = run(&chain(2, 10).with_stages(2).with_capacity(1)).unwrap();
        assert_eq!(slow.sinks[0].throughput, 1e7);
        let fast = run(&chain(2, 2).with_stages(2).with_capacity(1)).unwrap();
        let base = run(&chain(2, 2).with_stages(0).with_capacity(32)).unwrap();
        assert_eq!(base.sinks[0].throughput, 5e7);
        assert!((fast.sinks[0].throughput - 2.5e7).abs() / 2.5e7 < 1e-3);
    }

    #[test]
    fn cycle_accounting_closes() {
        let sc = chain(4, 7).with_capacity(1);
        let m = run(&sc).unwrap();
        for pe in &m.pes {
            assert_eq!(
                pe.compute_cycles + pe.read_stall_cycles + pe.write_stall_cycles + pe.progress_cycles,
                pe.edges
            );
        }
        for c in &m.channels {
            assert_eq!(c.popped, c.pushed - c.final_occupancy);
            assert_eq!(c.order_violations, 0);
            assert!(c.occupancy_max <= 1);
        }
    }

    #[test]
    fn degenerate_run_warns() {
        // A source whose firing outlasts the run.
        let sc = chain(2, 200_000);
        let m = run(&sc).unwrap();
        assert_eq!(m.sink_tokens(), 0);
        assert_eq!(m.warnings.len(), 1);
    }

    #[test]
    fn invalid_scenario_rejected() {
        let mut sc = chain(2, 10);
        sc.warmup = sc.duration;
        sc.clocks[0].freq = Hertz(123);
        match run(&sc) {
            Err(EngineError::InvalidScenario(errs)) => assert_eq!(errs.len(), 2),
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn penalty_arithmetic() {
        let mk = |t: f64| Metrics {
            sinks: vec![SinkMetrics {
                node: 3,
                tokens: 1,
                throughput: t,
            }],
            ..Default::default()
        };
        assert!((penalty(&mk(99.0), &mk(100.0)).unwrap() - 0.01).abs() < 1e-12);
        assert_eq!(penalty(&mk(100.0), &mk(100.0)).unwrap(), 0.0);
        assert!(matches!(
            penalty(&mk(1.0), &mk(0.0)),
            Err(EngineError::UndefinedPenalty(3))
        ));
    }

    #[test]
    fn bus_grants_round_robin() {
        let (g, m) = generate(GraphKind::AdpcmChain, &GenParams::default(), 0).unwrap();
        let sc = Scenario::new(g.replicate(2), m.replicate(2)).with_interconnect(Interconnect::SharedBus);
        let mut sim = Sim::new(&sc).unwrap();
        {
            let bus = sim.bus.as_mut().unwrap();
            bus.queues[0].push_back(Request { channel: 0 });
            bus.queues[2].push_back(Request { channel: 1 });
        }
        for c in [0, 1] {
            let ends = Ends {
                write: &sim.clocks[sim.fifos[c].write_domain()],
                read: &sim.clocks[sim.fifos[c].read_domain()],
            };
            assert!(sim.fifos[c].try_reserve(SimTime::ZERO, ends).unwrap());
        }
        let edge = |k: u64| SimTime::from_ns(10 * k);
        sim.step_bus(edge(0)).unwrap();
        assert_eq!(sim.bus.as_ref().unwrap().in_flight.as_ref().unwrap().0.channel, 0);
        sim.step_bus(edge(1)).unwrap();
        assert_eq!(sim.fifos[0].buffered(), 0);
        sim.step_bus(edge(2)).unwrap();
        // Channel 0 landed after two bus cycles; PE 2's request granted next.
        assert_eq!(sim.fifos[0].buffered(), 1);
        let bus = sim.bus.as_ref().unwrap();
        assert_eq!(bus.in_flight.as_ref().unwrap().0.channel, 1);
        assert_eq!(bus.cursor, 3);
    }

    #[test]
    fn frequency_trace_clips_to_window() {
        let mut d = ClockDomain::new(
            0,
            Hertz::from_mhz(100),
            SimTime::ZERO,
            default_levels(Hertz::from_mhz(100), 16),
        )
        .unwrap();
        d.set_frequency(Hertz::from_mhz(100), SimTime::from_ns(5)).unwrap();
        let lvl = d.levels()[3];
        d.set_frequency(lvl, SimTime::from_ns(95)).unwrap();
        let tr = frequency_trace(&d, SimTime::from_ns(50), SimTime::from_ns(200));
        assert_eq!(
            tr,
            vec![
                FreqInterval {
                    start: SimTime::from_ns(50),
                    end: SimTime::from_ns(100),
                    freq: Hertz::from_mhz(100)
                },
                FreqInterval {
                    start: SimTime::from_ns(100),
                    end: SimTime::from_ns(200),
                    freq: lvl
                },
            ]
        );
    }
}
