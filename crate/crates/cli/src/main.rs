//! Command-line front end for the GALS simulator.
//!
//! Exit status is 0 on success, 1 for invalid input (bad flags, scenario
//! parse or validation errors) and 2 for failures during a run, including
//! failed `reproduce-paper` checks.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gals_sim::clocks::SimTime;
use gals_sim::engine::{run, EngineError, Metrics, Scenario};
use gals_sim::experiments::{
    compare_sync_gals, dfs_report, emit_csv, emit_metrics_csv, reproduce_paper, sweep, Axis, ExperimentError, SweepSpec,
};
use gals_sim::scenario::{load_scenario_with, serialize, Overrides, ScenarioError};
use gals_sim::taskgraph::{generate, GenParams, GraphError, GraphKind};

/// Relative output paths are resolved against this directory when set.
const OUT_DIR_ENV: &str = "GALSIM_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "galsim",
    version,
    about = "Simulate GALS multiprocessors with dual-clock FIFOs and per-PE DFS"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write the CSV result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Replace the scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Replace the scenario's duration, e.g. `500us` or `2ms`.
    #[arg(long, global = true)]
    duration: Option<SimTime>,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and report per-PE metrics.
    Run { file: PathBuf },

    /// Sweep one parameter, comparing each point against its synchronous baseline.
    Sweep {
        file: PathBuf,
        /// fifo_capacity, sync_stages, pe_count or governor.
        #[arg(long)]
        axis: Axis,
        /// Comma-separated axis values, e.g. `1,2,4,8`.
        #[arg(long)]
        values: String,
    },

    /// Compare the scenario with its zero-synchronizer-stage twin.
    Compare { file: PathBuf },

    /// Compare a governed scenario with every PE static at its top frequency.
    Dfs { file: PathBuf },

    /// Print a generated scenario in explicit file form.
    Generate {
        /// fir_chain, fft_dag, iir_feedback, mjpeg_pipeline or adpcm_chain.
        #[arg(long)]
        kind: GraphKind,
        /// Generator parameters, e.g. `n=6,cycles=12,capacity=64`.
        #[arg(long, default_value = "")]
        params: String,
    },

    /// Run the bundled experiments, write their CSVs and print a pass/fail summary.
    ReproducePaper {
        /// Output directory (default `results`, or the GALSIM_OUT_DIR value).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Errors that mean the input was wrong rather than the run.
fn is_validation(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ScenarioError>()
            || c.is::<GraphError>()
            || matches!(c.downcast_ref::<EngineError>(), Some(EngineError::InvalidScenario(_)))
            || matches!(
                c.downcast_ref::<ExperimentError>(),
                Some(ExperimentError::BadValue { .. } | ExperimentError::NoValues | ExperimentError::NothingGoverned)
            )
            || c.is::<InputError>()
    })
}

/// Bad command-line input that no library type covers.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn resolve(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let p = resolve(p);
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(&p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => io::stdout().write_all(text.as_bytes()).context("writing to stdout"),
    }
}

fn load(cli: &Cli, file: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(file).map_err(|e| InputError(format!("reading {}: {e}", file.display())))?;
    let overrides = Overrides {
        seed: cli.seed,
        duration: cli.duration,
    };
    load_scenario_with(&text, overrides).with_context(|| format!("loading {}", file.display()))
}

fn summarize(m: &Metrics) {
    eprintln!(
        "measured {} .. {}, aggregate throughput {:.3} tokens/s, energy {:.6}",
        m.measured_from,
        m.measured_to,
        m.aggregate_throughput(),
        m.total_energy
    );
    for s in &m.sinks {
        eprintln!("  sink {}: {} tokens, {:.3} tokens/s", s.node, s.tokens, s.throughput);
    }
    for p in &m.pes {
        eprintln!(
            "  pe {}: busy {:.3}, read stall {:.3}, write stall {:.3}, {} firings",
            p.node,
            p.busy_fraction(),
            p.read_stall_fraction(),
            p.write_stall_fraction(),
            p.firings
        );
    }
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
}

fn parse_params(s: &str) -> Result<GenParams> {
    let mut p = GenParams::default();
    for kv in s.split(',').map(str::trim).filter(|kv| !kv.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| InputError(format!("parameter `{kv}` is not key=value")))?;
        let bad = || InputError(format!("parameter `{k}`: bad value `{v}`"));
        match k.trim() {
            "n" | "m" => p.n = Some(v.trim().parse().map_err(|_| bad())?),
            "cycles" => p.cycles = Some(v.trim().parse().map_err(|_| bad())?),
            "min_cycles" => p.min_cycles = Some(v.trim().parse().map_err(|_| bad())?),
            "max_cycles" => p.max_cycles = Some(v.trim().parse().map_err(|_| bad())?),
            "capacity" => p.capacity = Some(v.trim().parse().map_err(|_| bad())?),
            other => bail!(InputError(format!("unknown parameter `{other}`"))),
        }
    }
    Ok(p)
}

fn execute(cli: &Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Run { file } => {
            let m = run(&load(cli, file)?)?;
            summarize(&m);
            emit(out, &emit_metrics_csv(&m))?;
        }
        Command::Sweep { file, axis, values } => {
            let spec = SweepSpec {
                base: load(cli, file)?,
                axis: *axis,
                values: axis.parse_values(values)?,
            };
            emit(out, &emit_csv(&sweep(&spec, cli.jobs)?))?;
        }
        Command::Compare { file } => {
            let c = compare_sync_gals(&load(cli, file)?)?;
            eprintln!("penalty {:.4}%", c.row.penalty * 100.0);
            summarize(&c.gals);
            for ch in &c.gals.channels {
                eprintln!(
                    "  channel {}: occupancy min {} mean {:.2} max {}",
                    ch.id, ch.occupancy_min, ch.occupancy_mean, ch.occupancy_max
                );
            }
            emit(out, &emit_csv(&[c.row]))?;
        }
        Command::Dfs { file } => {
            let r = dfs_report(&load(cli, file)?)?;
            eprintln!(
                "energy ratio {:.4}, throughput ratio {:.4}",
                r.energy_ratio(),
                r.throughput_ratio()
            );
            for p in &r.governed.pes {
                let trace: Vec<String> = p.freq_trace.iter().map(|i| format!("{}@{}", i.freq, i.start)).collect();
                eprintln!("  pe {}: {}", p.node, trace.join(" "));
            }
            emit(out, &emit_csv(&[r.row]))?;
        }
        Command::Generate { kind, params } => {
            let seed = cli.seed.unwrap_or(0);
            let (g, m) = generate(*kind, &parse_params(params)?, seed)?;
            let mut s = Scenario::new(g, m);
            s.seed = seed;
            if let Some(d) = cli.duration {
                s = s.with_duration(d);
            }
            emit(out, &serialize(&s))?;
        }
        Command::ReproducePaper { out_dir } => {
            let dir = match out_dir {
                Some(d) => resolve(d),
                None => std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from),
            };
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let bundle = reproduce_paper(cli.jobs)?;
            for (name, csv) in &bundle.tables {
                let p = dir.join(name);
                fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?;
            }
            for c in &bundle.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(bundle.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { 1 } else { 2 })
        }
    }
}
