//! Parameter sweeps, synchronous-vs-GALS comparisons, governor energy
//! reports and their CSV form.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::clocks::{Hertz, SimTime};
use crate::dfs::GovernorKind;
use crate::engine::{penalty, run, EngineError, Metrics, PeGovernor, Scenario, Setpoint};
use crate::taskgraph::{
    bottleneck_rate, generate, remove_feedback_channels, CycleCost, GenParams, GraphError, GraphKind, Interconnect,
    Mapping, TaskGraph, TaskNode,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{axis} = {value}: {source}")]
    Point {
        axis: Axis,
        value: String,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("axis {axis} does not take value `{value}`")]
    BadValue { axis: Axis, value: String },
    #[error("no PE has a non-static governor")]
    NothingGoverned,
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Capacity of every channel, scaled together.
    FifoCapacity,
    SyncStages,
    /// Number of side-by-side copies of the base graph.
    PeCount,
    Governor,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::FifoCapacity => "fifo_capacity",
            Axis::SyncStages => "sync_stages",
            Axis::PeCount => "pe_count",
            Axis::Governor => "governor",
        })
    }
}

impl FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "fifo_capacity" => Axis::FifoCapacity,
            "sync_stages" => Axis::SyncStages,
            "pe_count" => Axis::PeCount,
            "governor" => Axis::Governor,
            _ => return Err(format!("unknown axis `{s}`")),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisValue {
    Int(u32),
    Governor(GovernorKind),
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Int(n) => write!(f, "{n}"),
            AxisValue::Governor(g) => write!(f, "{g}"),
        }
    }
}

impl Axis {
    pub fn parse_value(self, s: &str) -> Result<AxisValue, ExperimentError> {
        let bad = || ExperimentError::BadValue {
            axis: self,
            value: s.to_string(),
        };
        match self {
            Axis::Governor => s.trim().parse().map(AxisValue::Governor).map_err(|_| bad()),
            _ => s.trim().parse().map(AxisValue::Int).map_err(|_| bad()),
        }
    }

    /// Parses a comma-separated list.
    pub fn parse_values(self, s: &str) -> Result<Vec<AxisValue>, ExperimentError> {
        s.split(',').map(|v| self.parse_value(v)).collect()
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &Scenario, value: AxisValue) -> Result<Scenario, ExperimentError> {
        let bad = || ExperimentError::BadValue {
            axis: self,
            value: value.to_string(),
        };
        Ok(match (self, value) {
            (Axis::FifoCapacity, AxisValue::Int(c)) => base.clone().with_capacity(c),
            (Axis::SyncStages, AxisValue::Int(s)) => base.clone().with_stages(s),
            (Axis::PeCount, AxisValue::Int(k)) if k > 0 => replicate(base, k as usize),
            (Axis::Governor, AxisValue::Governor(g)) => base.clone().with_governor(g),
            _ => return Err(bad()),
        })
    }
}

/// `copies` independent side-by-side instances of `base`.
pub fn replicate(base: &Scenario, copies: usize) -> Scenario {
    fn rep<T: Clone>(v: &[T], copies: usize) -> Vec<T> {
        std::iter::repeat_n(v, copies).flatten().cloned().collect()
    }
    Scenario {
        graph: base.graph.replicate(copies),
        mapping: base.mapping.replicate(copies),
        clocks: rep(&base.clocks, copies),
        stages: rep(&base.stages, copies),
        governors: rep(&base.governors, copies),
        ..base.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axis: Axis,
    pub values: Vec<AxisValue>,
}

/// One experiment point measured against its baseline run.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub axis: String,
    pub value: String,
    pub sink_throughput: Vec<f64>,
    /// Sum over sinks.
    pub throughput: f64,
    pub baseline_throughput: f64,
    /// Mean over sinks of `1 - T / T_baseline`.
    pub penalty: f64,
    pub energy: f64,
    pub baseline_energy: f64,
    /// Means over PEs.
    pub read_stall: f64,
    pub write_stall: f64,
}

impl ReportRow {
    fn new(axis: &str, value: &str, m: &Metrics, base: &Metrics) -> Result<Self, EngineError> {
        let n = m.pes.len().max(1) as f64;
        Ok(ReportRow {
            axis: axis.to_string(),
            value: value.to_string(),
            sink_throughput: m.sinks.iter().map(|s| s.throughput).collect(),
            throughput: m.aggregate_throughput(),
            baseline_throughput: base.aggregate_throughput(),
            penalty: penalty(m, base)?,
            energy: m.total_energy,
            baseline_energy: base.total_energy,
            read_stall: m.pes.iter().map(|p| p.read_stall_fraction()).sum::<f64>() / n,
            write_stall: m.pes.iter().map(|p| p.write_stall_fraction()).sum::<f64>() / n,
        })
    }

    pub fn energy_savings(&self) -> f64 {
        if self.baseline_energy == 0.0 {
            0.0
        } else {
            1.0 - self.energy / self.baseline_energy
        }
    }
}

/// The same scenario with every synchronizer removed.
pub fn synchronous_baseline(s: &Scenario) -> Scenario {
    s.clone().with_stages(0)
}

/// GALS and synchronous runs of one scenario with the rows' raw metrics.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub row: ReportRow,
    pub gals: Metrics,
    pub sync: Metrics,
}

fn compare_labelled(s: &Scenario, axis: &str, value: &str) -> Result<Comparison, EngineError> {
    let gals = run(s)?;
    let sync = run(&synchronous_baseline(s))?;
    Ok(Comparison {
        row: ReportRow::new(axis, value, &gals, &sync)?,
        gals,
        sync,
    })
}

pub fn compare_sync_gals(s: &Scenario) -> Result<Comparison, ExperimentError> {
    Ok(compare_labelled(s, "compare", "")?)
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, ExperimentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))
}

/// One row per value, in the order given. Points run in parallel on up to
/// `jobs` threads (all cores when `None`).
pub fn sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<Vec<ReportRow>, ExperimentError> {
    if spec.values.is_empty() {
        return Err(ExperimentError::NoValues);
    }
    let points = spec
        .values
        .iter()
        .map(|&v| spec.axis.apply(&spec.base, v))
        .collect::<Result<Vec<_>, _>>()?;
    let axis = spec.axis;
    pool(jobs)?.install(|| {
        points
            .par_iter()
            .zip(&spec.values)
            .map(|(s, v)| {
                compare_labelled(s, &axis.to_string(), &v.to_string())
                    .map(|c| c.row)
                    .map_err(|source| ExperimentError::Point {
                        axis,
                        value: v.to_string(),
                        source,
                    })
            })
            .collect()
    })
}

/// Governed run against the all-static, all-`f_max` baseline.
#[derive(Clone, Debug)]
pub struct DfsReport {
    pub row: ReportRow,
    pub governed: Metrics,
    pub baseline: Metrics,
}

impl DfsReport {
    pub fn energy_ratio(&self) -> f64 {
        1.0 - self.row.energy_savings()
    }

    pub fn throughput_ratio(&self) -> f64 {
        self.row.throughput / self.row.baseline_throughput
    }
}

/// Every PE static at the top of its level grid.
pub fn max_frequency_baseline(s: &Scenario) -> Scenario {
    let mut b = s.clone().with_governor(GovernorKind::Static);
    for c in &mut b.clocks {
        c.freq = *c.levels.last().expect("validated scenarios have levels");
    }
    b
}

pub fn dfs_report(s: &Scenario) -> Result<DfsReport, ExperimentError> {
    if s.governors.iter().all(|g| g.kind == GovernorKind::Static) {
        return Err(ExperimentError::NothingGoverned);
    }
    let governed = run(s)?;
    let baseline = run(&max_frequency_baseline(s))?;
    let kinds: Vec<String> = s.governors.iter().map(|g| g.kind.to_string()).collect();
    let label = if kinds.windows(2).all(|w| w[0] == w[1]) {
        kinds[0].clone()
    } else {
        kinds.join("+")
    };
    Ok(DfsReport {
        row: ReportRow::new("governor", &label, &governed, &baseline)?,
        governed,
        baseline,
    })
}

/// Energy savings if every PE ran statically at exactly the frequency its
/// share of the bottleneck rate needs, before level snapping.
pub fn optimal_static_savings(s: &Scenario) -> Result<f64, ExperimentError> {
    let fmax: Vec<Hertz> = s.clocks.iter().map(|c| *c.levels.last().expect("levels")).collect();
    let rate = bottleneck_rate(&s.graph, &fmax)?
        .iter()
        .map(|&(_, r)| r)
        .fold(f64::INFINITY, f64::min);
    let model = s.power_model().map_err(EngineError::from)?;
    let (mut best, mut base) = (0.0, 0.0);
    for (node, &f) in s.graph.nodes.iter().zip(&fmax) {
        let need = (rate * node.cost.mean()).clamp(model.f_min.as_f64(), f.as_f64());
        best += continuous_power(&model, need);
        base += continuous_power(&model, f.as_f64());
    }
    Ok(1.0 - best / base)
}

fn continuous_power(m: &crate::dfs::PowerModel, f: f64) -> f64 {
    let span = (m.f_max.as_f64() - m.f_min.as_f64()).max(1.0);
    let v = m.v_min + (m.v_max - m.v_min) * (f - m.f_min.as_f64()) / span;
    m.capacitance * v * v * f + m.leakage * v
}

pub const CSV_HEADER: [&str; 13] = [
    "axis",
    "value",
    "throughput",
    "baseline_throughput",
    "penalty",
    "energy",
    "baseline_energy",
    "energy_savings",
    "read_stall",
    "write_stall",
    "sinks",
    "sink_throughput",
    "min_sink_throughput",
];

/// Throughputs in tokens/s with 3 decimals, energies with 6, fractions with 6.
pub fn emit_csv(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("writing to memory");
    for r in rows {
        let min = r.sink_throughput.iter().copied().fold(f64::INFINITY, f64::min);
        let per_sink: Vec<String> = r.sink_throughput.iter().map(|t| format!("{t:.3}")).collect();
        w.write_record([
            r.axis.clone(),
            r.value.clone(),
            format!("{:.3}", r.throughput),
            format!("{:.3}", r.baseline_throughput),
            format!("{:.6}", r.penalty),
            format!("{:.6}", r.energy),
            format!("{:.6}", r.baseline_energy),
            format!("{:.6}", r.energy_savings()),
            format!("{:.6}", r.read_stall),
            format!("{:.6}", r.write_stall),
            r.sink_throughput.len().to_string(),
            per_sink.join(";"),
            format!("{:.3}", if min.is_finite() { min } else { 0.0 }),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}

/// One row per PE of a single run, same precision rules as [`emit_csv`].
pub fn emit_metrics_csv(m: &Metrics) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "node",
        "edges",
        "compute_cycles",
        "read_stall_cycles",
        "write_stall_cycles",
        "progress_cycles",
        "firings",
        "sink_tokens",
        "sink_throughput",
        "energy",
        "final_frequency_hz",
    ])
    .expect("writing to memory");
    for p in &m.pes {
        let sink = m.sinks.iter().find(|s| s.node == p.node);
        w.write_record([
            p.node.to_string(),
            p.edges.to_string(),
            p.compute_cycles.to_string(),
            p.read_stall_cycles.to_string(),
            p.write_stall_cycles.to_string(),
            p.progress_cycles.to_string(),
            p.firings.to_string(),
            sink.map_or(0, |s| s.tokens).to_string(),
            format!("{:.3}", sink.map_or(0.0, |s| s.throughput)),
            format!("{:.6}", p.energy),
            p.freq_trace.last().map_or(0, |i| i.freq.0).to_string(),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is utf-8")
}

/// Generated graph with `capacity` everywhere and `stages` synchronizers.
pub fn generated(
    kind: GraphKind,
    n: Option<usize>,
    capacity: u32,
    stages: u32,
    seed: u64,
) -> Result<Scenario, GraphError> {
    let params = GenParams {
        n,
        capacity: Some(capacity),
        ..Default::default()
    };
    let (g, m) = generate(kind, &params, seed)?;
    let mut s = Scenario::new(g, m).with_stages(stages);
    s.seed = seed;
    Ok(s)
}

/// Two-stage pipeline `A(c_a) -> B(c_b)` at `f_max` with PID on both PEs
/// and the setpoint at A's full rate.
pub fn slack_pipeline(c_a: u32, c_b: u32, f_max: Hertz, governor: GovernorKind) -> Scenario {
    let g = TaskGraph {
        nodes: vec![
            TaskNode::new(0, CycleCost::Fixed(c_a)),
            TaskNode::new(1, CycleCost::Fixed(c_b)),
        ],
        channels: vec![crate::taskgraph::Channel {
            id: 0,
            src: crate::taskgraph::PortRef::new(0, 0),
            dst: crate::taskgraph::PortRef::new(1, 0),
            capacity: 1024,
            initial_tokens: 0,
        }],
        sources: vec![0],
        sinks: vec![1],
    };
    let rate = f_max.as_f64() / c_a as f64;
    let mut s = Scenario::new(g, Mapping::row(2, Interconnect::PointToPoint)).with_frequency(f_max);
    s.governors = vec![
        PeGovernor {
            kind: governor,
            setpoint: Setpoint::TokensPerSec(rate),
            f_nominal: None,
        };
        2
    ];
    s.duration = SimTime::from_ms(2);
    s.warmup = SimTime::from_us(200);
    s
}

/// Penalty resolution of a 1 ms run: differences this small are noise.
pub const MEASUREMENT_GRANULARITY: f64 = 1e-3;

/// Rises in penalty from one row to the next, split into those within
/// [`MEASUREMENT_GRANULARITY`] and those beyond it.
pub fn count_inversions(rows: &[ReportRow]) -> (usize, usize) {
    let rises = rows
        .windows(2)
        .map(|w| w[1].penalty - w[0].penalty)
        .filter(|&d| d > 1e-12);
    rises.fold((0, 0), |(small, large), d| {
        if d <= MEASUREMENT_GRANULARITY {
            (small + 1, large)
        } else {
            (small, large + 1)
        }
    })
}

/// Four-stage pipeline with per-firing costs uniform in 1..=8 cycles, the
/// family used for capacity sweeps.
pub fn pipeline_family(seed: u64, capacity: u32) -> Result<Scenario, GraphError> {
    let params = GenParams {
        min_cycles: Some(1),
        max_cycles: Some(8),
        capacity: Some(capacity),
        ..Default::default()
    };
    let (g, m) = generate(GraphKind::MjpegPipeline, &params, seed)?;
    let mut s = Scenario::new(g, m);
    s.seed = seed;
    Ok(s)
}

/// One named pass/fail outcome of the bundled experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    /// File name and CSV contents.
    pub tables: Vec<(String, String)>,
    pub checks: Vec<Check>,
}

impl Bundle {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Zero-penalty, loop-removal and DFS savings scenarios, plus the FIFO
/// capacity sweep they sit on. Fully determined by the built-in seeds.
pub fn reproduce_paper(jobs: Option<usize>) -> Result<Bundle, ExperimentError> {
    let mut checks = Vec::new();
    let mut tables = Vec::new();

    let capacities: Vec<AxisValue> = (0..=10).map(|k| AxisValue::Int(1 << k)).collect();
    let fifo = sweep(
        &SweepSpec {
            base: pipeline_family(0, 1)?,
            axis: Axis::FifoCapacity,
            values: capacities,
        },
        jobs,
    )?;
    let inversions = count_inversions(&fifo);
    checks.push(Check {
        name: "fifo_capacity_monotone".into(),
        passed: inversions.1 == 0 && inversions.0 <= 1,
        detail: format!(
            "{} small and {} large inversions over {} points",
            inversions.0,
            inversions.1,
            fifo.len()
        ),
    });
    tables.push(("fifo_capacity.csv".to_string(), emit_csv(&fifo)));

    let iir = generated(GraphKind::IirFeedback, None, 1024, 2, 0)?;
    let (acyclic, _) = remove_feedback_channels(&iir.graph)?;
    let mut iir_removed = Scenario::new(acyclic, iir.mapping.clone());
    iir_removed.seed = iir.seed;
    let cases = [
        ("fir_chain", generated(GraphKind::FirChain, Some(4), 1024, 2, 0)?),
        ("fft_dag", generated(GraphKind::FftDag, Some(8), 1024, 2, 0)?),
        ("iir_feedback", iir),
        ("iir_feedback_removed", iir_removed),
    ];
    let results = pool(jobs)?.install(|| {
        cases
            .par_iter()
            .map(|(name, s)| compare_labelled(s, "scenario", name).map(|c| c.row))
            .collect::<Result<Vec<_>, _>>()
    })?;
    for r in &results {
        let (passed, rule) = match r.value.as_str() {
            "iir_feedback" => (r.penalty > 0.01, "> 1%"),
            _ => (r.penalty <= 0.001, "<= 0.1%"),
        };
        checks.push(Check {
            name: format!("penalty_{}", r.value),
            passed,
            detail: format!("penalty {:.4}% (want {rule})", r.penalty * 100.0),
        });
    }
    tables.push(("sync_vs_gals.csv".to_string(), emit_csv(&results)));

    let f_max = Hertz::from_mhz(100);
    let governed = [GovernorKind::Pid, GovernorKind::OnDemand, GovernorKind::Conservative];
    // Stage B over-provisioned 2x and 4x relative to stage A.
    let points: Vec<(&str, u32, GovernorKind)> = [("slack_2x", 10), ("slack_4x", 20)]
        .iter()
        .flat_map(|&(name, c_a)| governed.iter().map(move |&g| (name, c_a, g)))
        .collect();
    let dfs = pool(jobs)?.install(|| {
        points
            .par_iter()
            .map(|&(name, c_a, g)| {
                dfs_report(&slack_pipeline(c_a, 5, f_max, g)).map(|r| ReportRow {
                    axis: name.to_string(),
                    ..r.row
                })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let pid = &dfs[0];
    let bound = optimal_static_savings(&slack_pipeline(10, 5, f_max, GovernorKind::Pid))?;
    let savings = pid.energy_savings();
    checks.push(Check {
        name: "dfs_pid_savings".into(),
        passed: (0.30..=0.50).contains(&savings) && pid.penalty.abs() <= 0.01 && savings >= 0.75 * bound,
        detail: format!(
            "savings {:.2}% (bound {:.2}%), throughput change {:.3}%",
            savings * 100.0,
            bound * 100.0,
            -pid.penalty * 100.0
        ),
    });
    let (ondemand, conservative) = (&dfs[4], &dfs[5]);
    checks.push(Check {
        name: "conservative_vs_ondemand".into(),
        passed: conservative.energy <= ondemand.energy,
        detail: format!(
            "energy {:.1} (conservative) vs {:.1} (ondemand)",
            conservative.energy, ondemand.energy
        ),
    });
    tables.push(("dfs.csv".to_string(), emit_csv(&dfs)));

    Ok(Bundle { tables, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &str, t: f64) -> ReportRow {
        ReportRow {
            axis: "fifo_capacity".into(),
            value: v.into(),
            sink_throughput: vec![t],
            throughput: t,
            baseline_throughput: 10.0,
            penalty: 1.0 - t / 10.0,
            energy: 2.0,
            baseline_energy: 4.0,
            read_stall: 0.25,
            write_stall: 0.0,
        }
    }

    #[test]
    fn csv_shapes() {
        let empty = emit_csv(&[]);
        assert_eq!(empty.lines().count(), 1);
        assert!(empty.starts_with("axis,value,throughput,"));
        let one = emit_csv(&[row("4", 9.5)]);
        assert_eq!(one.lines().count(), 2);
        assert_eq!(
            one.lines().nth(1).unwrap(),
            "fifo_capacity,4,9.500,10.000,0.050000,2.000000,4.000000,0.500000,0.250000,0.000000,1,9.500,9.500"
        );
        assert_eq!(emit_csv(&[row("4", 9.5)]), one);
    }

    #[test]
    fn axis_values_parse() {
        assert_eq!(
            Axis::FifoCapacity.parse_values("1,2, 4").unwrap(),
            vec![AxisValue::Int(1), AxisValue::Int(2), AxisValue::Int(4)]
        );
        assert_eq!(
            Axis::Governor.parse_values("pid,static").unwrap(),
            vec![
                AxisValue::Governor(GovernorKind::Pid),
                AxisValue::Governor(GovernorKind::Static)
            ]
        );
        assert!(Axis::SyncStages.parse_values("two").is_err());
        assert!("fifo_capcity".parse::<Axis>().is_err());
    }

    #[test]
    fn stages_zero_row_has_no_penalty() {
        let base = generated(GraphKind::FirChain, Some(4), 4, 2, 0)
            .unwrap()
            .with_duration(SimTime::from_us(200));
        let rows = sweep(
            &SweepSpec {
                base,
                axis: Axis::SyncStages,
                values: Axis::SyncStages.parse_values("0,1,2,4").unwrap(),
            },
            Some(2),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].penalty, 0.0);
        assert_eq!(
            rows.iter().map(|r| r.value.as_str()).collect::<Vec<_>>(),
            ["0", "1", "2", "4"]
        );
    }

    #[test]
    fn single_value_sweep_matches_compare() {
        let base = generated(GraphKind::IirFeedback, None, 8, 2, 3)
            .unwrap()
            .with_duration(SimTime::from_us(200));
        let rows = sweep(
            &SweepSpec {
                base: base.clone(),
                axis: Axis::FifoCapacity,
                values: vec![AxisValue::Int(8)],
            },
            None,
        )
        .unwrap();
        let c = compare_sync_gals(&base).unwrap().row;
        assert_eq!(
            ReportRow {
                axis: c.axis.clone(),
                value: c.value.clone(),
                ..rows[0].clone()
            },
            c
        );
    }

    #[test]
    fn pe_count_replicates_everything() {
        let base = generated(GraphKind::AdpcmChain, None, 8, 2, 0).unwrap();
        let s = Axis::PeCount.apply(&base, AxisValue::Int(3)).unwrap();
        assert_eq!(s.graph.nodes.len(), 6);
        assert_eq!(s.clocks.len(), 6);
        assert_eq!(s.stages.len(), 3);
        assert_eq!(s.graph.sinks.len(), 3);
        assert!(s.check().is_ok());
        assert!(Axis::PeCount.apply(&base, AxisValue::Int(0)).is_err());
    }

    #[test]
    fn dfs_needs_a_governor() {
        let s = generated(GraphKind::FirChain, Some(2), 8, 2, 0).unwrap();
        assert!(matches!(dfs_report(&s), Err(ExperimentError::NothingGoverned)));
    }

    #[test]
    fn optimal_bound_for_half_rate_stage() {
        // A at 100 MHz, B needs 50 MHz; V(f) linear from 0.8 V at 12.5 MHz.
        let s = slack_pipeline(10, 5, Hertz::from_mhz(100), GovernorKind::Pid);
        let v = 0.8 + 0.5 * 37.5 / 87.5;
        let expect = 1.0 - (1.69e8 + v * v * 5e7) / (2.0 * 1.69e8);
        assert!((optimal_static_savings(&s).unwrap() - expect).abs() < 1e-12);
    }
}
