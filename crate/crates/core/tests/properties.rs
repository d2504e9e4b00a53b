mod common;

use std::collections::{BTreeSet, VecDeque};

use gals_sim::clocks::{default_levels, sync_observe, ClockDomain, Hertz, SimTime, SyncConfig};
use gals_sim::dfs::{
    energy, governor_step, FreqInterval, Governor, GovernorKind, PidController, PowerModel, WindowSample,
};
use gals_sim::engine::{run, Scenario};
use gals_sim::experiments::generated;
use gals_sim::fifo::{DualClockFifo, Ends, PushOutcome, Side, Token};
use gals_sim::scenario::{load_scenario, serialize};
use gals_sim::taskgraph::{
    bottleneck_rate, detect_comm_loops, generate, remove_feedback_channels, Channel, CycleCost, GenParams, GraphKind,
    Interconnect, Mapping, PortRef, TaskGraph, TaskNode,
};
use proptest::prelude::*;

fn mhz(f: u64) -> Hertz {
    Hertz::from_mhz(f)
}

// ---- clocks ----

proptest! {
    #[test]
    fn edges_strictly_increase(f in 1u64..5000, phase in 0u64..10_000_000, changes in prop::collection::vec((0usize..16, 0u64..5_000_000), 0..6)) {
        let levels = default_levels(mhz(f.max(8)), 16);
        let mut d = ClockDomain::new(0, *levels.last().unwrap(), SimTime(phase), levels.clone()).unwrap();
        for (lvl, t) in changes {
            let before: Vec<SimTime> = (0..64).map(|n| d.edge_at(n)).collect();
            let eff = d.set_frequency(levels[lvl], SimTime(t)).unwrap();
            for (n, &e) in before.iter().enumerate() {
                if e < eff {
                    prop_assert_eq!(d.edge_at(n as u64), e);
                }
            }
        }
        let edges: Vec<SimTime> = (0..200).map(|n| d.edge_at(n)).collect();
        prop_assert!(edges.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sync_observe_monotone(f in 1u64..3000, phase in 0u64..1_000_000, t in 0u64..10_000_000_000, dt in 0u64..1_000_000, s in 0u32..6) {
        let d = ClockDomain::fixed(1, mhz(f), SimTime(phase)).unwrap();
        let (a, b) = (SimTime(t), SimTime(t + dt));
        prop_assert_eq!(sync_observe(a, &d, SyncConfig::SYNCHRONOUS), a);
        prop_assert!(sync_observe(a, &d, SyncConfig::new(s)) <= sync_observe(b, &d, SyncConfig::new(s)));
        prop_assert!(sync_observe(a, &d, SyncConfig::new(s)) <= sync_observe(a, &d, SyncConfig::new(s + 1)));
    }
}

#[test]
fn no_drift_over_a_billion_edges() {
    let f = Hertz(333_333_333);
    let d = ClockDomain::fixed(0, f, SimTime(17)).unwrap();
    let n = 1_000_000_000u64;
    assert_eq!(d.edge_at(n), SimTime(17 + n * f.period_fs()));
}

// ---- fifo ----

#[derive(Clone, Debug)]
struct FifoCase {
    wf: u64,
    rf: u64,
    wphase: u64,
    rphase: u64,
    to_r: u32,
    to_w: u32,
    cap: u32,
    ops: Vec<bool>,
}

fn fifo_case() -> impl Strategy<Value = FifoCase> {
    (
        1u64..800,
        1u64..800,
        0u64..4000,
        0u64..4000,
        0u32..4,
        0u32..4,
        1u32..6,
        prop::collection::vec(any::<bool>(), 50..300),
    )
        .prop_map(|(wf, rf, wphase, rphase, to_r, to_w, cap, ops)| FifoCase {
            wf,
            rf,
            wphase,
            rphase,
            to_r,
            to_w,
            cap,
            ops,
        })
}

proptest! {
    #[test]
    fn fifo_order_and_convergence(c in fifo_case()) {
        let wd = ClockDomain::fixed(0, mhz(c.wf), SimTime::from_ps(c.wphase)).unwrap();
        let rd = ClockDomain::fixed(1, mhz(c.rf), SimTime::from_ps(c.rphase)).unwrap();
        let ends = Ends { write: &wd, read: &rd };
        let mut f = DualClockFifo::new(c.cap, 0, 1, SyncConfig::new(c.to_r), SyncConfig::new(c.to_w)).unwrap();
        let (mut wn, mut rn, mut next) = (0u64, 0u64, 0u64);
        let mut popped = Vec::new();
        let mut last = SimTime::ZERO;
        for (i, op) in c.ops.iter().enumerate() {
            let (tw, tr) = (wd.edge_at(wn), rd.edge_at(rn));
            if tw <= tr {
                if *op && f.try_push(Token::new(0), tw, ends).unwrap() == PushOutcome::Accepted {
                    next += 1;
                }
                wn += 1;
                last = tw;
            } else {
                if *op || i % 3 == 0 {
                    if let Some(t) = f.try_pop(tr, ends).unwrap() {
                        popped.push(t.seq);
                    }
                }
                rn += 1;
                last = tr;
            }
        }
        prop_assert_eq!(popped, (0..f.total_reads()).collect::<Vec<_>>());
        prop_assert!(f.total_writes() == next);
        // Quiet after `last`: both views settle once every event has crossed.
        let settle = sync_observe(sync_observe(last, &wd, SyncConfig::new(c.to_w)), &rd, SyncConfig::new(c.to_r));
        let truth = f.true_occupancy(settle);
        prop_assert_eq!(f.observed_occupancy(Side::Writer, settle, ends), truth);
        prop_assert_eq!(f.observed_occupancy(Side::Reader, settle, ends), truth);
    }

    #[test]
    fn zero_stages_is_a_plain_queue(f in 1u64..800, cap in 1u32..6, ops in prop::collection::vec(0u8..4, 1..300)) {
        let d = ClockDomain::fixed(0, mhz(f), SimTime::ZERO).unwrap();
        let ends = Ends { write: &d, read: &d };
        let mut fifo = DualClockFifo::new(cap, 0, 0, SyncConfig::SYNCHRONOUS, SyncConfig::SYNCHRONOUS).unwrap();
        let mut q: VecDeque<u64> = VecDeque::new();
        let mut seq = 0;
        for (n, op) in ops.into_iter().enumerate() {
            let t = d.edge_at(n as u64);
            if op & 1 == 1 {
                let accepted = fifo.try_push(Token::new(0), t, ends).unwrap() == PushOutcome::Accepted;
                prop_assert_eq!(accepted, q.len() < cap as usize);
                if accepted {
                    q.push_back(seq);
                    seq += 1;
                }
            }
            if op & 2 == 2 {
                prop_assert_eq!(fifo.try_pop(t, ends).unwrap().map(|t| t.seq), q.pop_front());
            }
            prop_assert_eq!(fifo.observed_occupancy(Side::Writer, t, ends), q.len() as u64);
            prop_assert_eq!(fifo.observed_occupancy(Side::Reader, t, ends), q.len() as u64);
        }
    }
}

// ---- taskgraph ----

fn random_graph() -> impl Strategy<Value = TaskGraph> {
    (1usize..=8)
        .prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..=14)))
        .prop_map(|(n, edges)| {
            let mut out_ports = vec![0; n];
            let mut in_ports = vec![0; n];
            let channels = edges
                .into_iter()
                .enumerate()
                .map(|(id, (a, b))| {
                    let c = Channel {
                        id,
                        src: PortRef::new(a, out_ports[a]),
                        dst: PortRef::new(b, in_ports[b]),
                        capacity: 4,
                        initial_tokens: 0,
                    };
                    out_ports[a] += 1;
                    in_ports[b] += 1;
                    c
                })
                .collect::<Vec<_>>();
            let sources = (0..n).filter(|&v| in_ports[v] == 0).collect();
            let sinks = (0..n).filter(|&v| out_ports[v] == 0).collect();
            TaskGraph {
                nodes: (0..n).map(|i| TaskNode::new(i, CycleCost::Fixed(1))).collect(),
                channels,
                sources,
                sinks,
            }
        })
}

/// Every elementary cycle by exhaustive path search, each rotated so its
/// smallest channel id comes first.
fn brute_force_cycles(g: &TaskGraph) -> BTreeSet<Vec<usize>> {
    fn walk(
        g: &TaskGraph,
        start: usize,
        at: usize,
        visited: &mut Vec<usize>,
        path: &mut Vec<usize>,
        out: &mut BTreeSet<Vec<usize>>,
    ) {
        for c in g.channels.iter().filter(|c| c.src.node == at) {
            path.push(c.id);
            if c.dst.node == start {
                let k = (0..path.len()).min_by_key(|&i| path[i]).unwrap();
                let mut rot = path[k..].to_vec();
                rot.extend_from_slice(&path[..k]);
                out.insert(rot);
            } else if !visited.contains(&c.dst.node) {
                visited.push(c.dst.node);
                walk(g, start, c.dst.node, visited, path, out);
                visited.pop();
            }
            path.pop();
        }
    }
    let mut out = BTreeSet::new();
    for s in 0..g.nodes.len() {
        walk(g, s, s, &mut vec![s], &mut Vec::new(), &mut out);
    }
    out
}

fn canonical(cycles: Vec<Vec<usize>>) -> BTreeSet<Vec<usize>> {
    cycles
        .into_iter()
        .map(|c| {
            let k = (0..c.len()).min_by_key(|&i| c[i]).unwrap();
            let mut rot = c[k..].to_vec();
            rot.extend_from_slice(&c[..k]);
            rot
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn johnson_matches_brute_force(g in random_graph()) {
        let found = detect_comm_loops(&g).unwrap();
        let n = found.len();
        let set = canonical(found);
        prop_assert_eq!(set.len(), n, "duplicate cycles reported");
        prop_assert_eq!(set, brute_force_cycles(&g));
    }

    #[test]
    fn removal_is_acyclic_and_irredundant(g in random_graph()) {
        let (out, removed) = remove_feedback_channels(&g).unwrap();
        prop_assert!(detect_comm_loops(&out).unwrap().is_empty());
        prop_assert_eq!(out.channels.len() + removed.len(), g.channels.len());
        for &id in &removed {
            let orig = g.channels.iter().find(|c| c.id == id).unwrap();
            let mut back = out.clone();
            back.channels.push(Channel {
                src: PortRef::new(orig.src.node, 1000),
                dst: PortRef::new(orig.dst.node, 1000),
                ..orig.clone()
            });
            prop_assert!(!detect_comm_loops(&back).unwrap().is_empty(), "channel {} was redundant", id);
        }
    }

    #[test]
    fn generate_is_pure(seed in any::<u64>(), n in 3usize..7, kind in 0usize..5) {
        let kinds = [GraphKind::FirChain, GraphKind::FftDag, GraphKind::IirFeedback, GraphKind::MjpegPipeline, GraphKind::AdpcmChain];
        let p = GenParams { n: (kind != 1).then_some(n), ..Default::default() };
        prop_assert_eq!(generate(kinds[kind], &p, seed).unwrap(), generate(kinds[kind], &p, seed).unwrap());
    }

    #[test]
    fn single_node_bottleneck(f in 1u64..10_000_000_000, c in 1u32..10_000) {
        let g = TaskGraph {
            nodes: vec![TaskNode::new(0, CycleCost::Fixed(c))],
            sources: vec![0],
            sinks: vec![0],
            ..Default::default()
        };
        prop_assert_eq!(bottleneck_rate(&g, &[Hertz(f)]).unwrap(), vec![(0, f as f64 / c as f64)]);
    }
}

// ---- engine ----

fn kind_of(i: usize) -> GraphKind {
    [
        GraphKind::FirChain,
        GraphKind::FftDag,
        GraphKind::IirFeedback,
        GraphKind::MjpegPipeline,
        GraphKind::AdpcmChain,
    ][i]
}

fn gals_scenario() -> impl Strategy<Value = Scenario> {
    (
        0usize..5,
        any::<u64>(),
        1u32..16,
        0u32..4,
        prop::collection::vec((50u64..400, 0u64..20_000), 16),
        any::<bool>(),
    )
        .prop_map(|(k, seed, cap, stages, clocks, bus)| {
            let mut s = generated(kind_of(k), None, cap, stages, seed)
                .unwrap()
                .with_duration(SimTime::from_us(30));
            for (c, &(f, phase)) in s.clocks.iter_mut().zip(&clocks) {
                c.freq = mhz(f);
                c.levels = default_levels(mhz(f), 16);
                c.phase = SimTime::from_ps(phase);
            }
            if bus {
                s.mapping.interconnect = Interconnect::SharedBus;
            }
            s
        })
}

/// Chain of three with per-port rates in 1..=3.
fn multirate_chain() -> impl Strategy<Value = Scenario> {
    (
        prop::collection::vec(1u32..=3, 4),
        prop::collection::vec(1u32..6, 3),
        1u32..8,
        any::<u64>(),
    )
        .prop_map(|(rates, costs, cap, seed)| {
            let nodes = vec![
                TaskNode {
                    produce: vec![rates[0]],
                    ..TaskNode::new(0, CycleCost::Fixed(costs[0]))
                },
                TaskNode {
                    consume: vec![rates[1]],
                    produce: vec![rates[2]],
                    ..TaskNode::new(1, CycleCost::Fixed(costs[1]))
                },
                TaskNode {
                    consume: vec![rates[3]],
                    ..TaskNode::new(2, CycleCost::Fixed(costs[2]))
                },
            ];
            let ch = |id, a, b| Channel {
                id,
                src: PortRef::new(a, 0),
                dst: PortRef::new(b, 0),
                capacity: cap.max(3),
                initial_tokens: 0,
            };
            let g = TaskGraph {
                nodes,
                channels: vec![ch(0, 0, 1), ch(1, 1, 2)],
                sources: vec![0],
                sinks: vec![2],
            };
            let mut s = Scenario::new(g, Mapping::row(3, Interconnect::PointToPoint))
                .with_stages(0)
                .with_duration(SimTime::from_us(20));
            s.seed = seed;
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn conservation_accounting_determinism(s in gals_scenario()) {
        let m = run(&s).unwrap();
        for c in &m.channels {
            prop_assert_eq!(c.popped, c.pushed - c.final_occupancy);
            prop_assert_eq!(c.order_violations, 0);
            prop_assert!(c.occupancy_max <= s.graph.channels.iter().find(|x| x.id == c.id).unwrap().capacity as u64);
        }
        for p in &m.pes {
            prop_assert_eq!(p.compute_cycles + p.read_stall_cycles + p.write_stall_cycles + p.progress_cycles, p.edges);
            for x in [p.read_stall_fraction(), p.write_stall_fraction(), p.busy_fraction()] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }
        for sink in &m.sinks {
            prop_assert_eq!(sink.throughput, sink.tokens as f64 / m.measured_secs());
        }
        prop_assert_eq!(run(&s).unwrap(), m);
    }

    #[test]
    fn synchronous_runs_match_reference(k in 0usize..5, seed in any::<u64>(), cap in 1u32..10, f in 20u64..300, phase in 0u64..5000) {
        let mut s = generated(kind_of(k), None, cap, 0, seed).unwrap().with_frequency(mhz(f)).with_duration(SimTime::from_us(30));
        s.clocks.iter_mut().for_each(|c| c.phase = SimTime::from_ps(phase));
        prop_assert_eq!(run(&s).unwrap(), common::reference_run(&s));
    }

    #[test]
    fn multirate_matches_reference(s in multirate_chain()) {
        prop_assert_eq!(run(&s).unwrap(), common::reference_run(&s));
    }

    #[test]
    fn throughput_grows_with_capacity(seed in any::<u64>(), cap in 1u32..64, stages in 1u32..4) {
        let p = GenParams { min_cycles: Some(1), max_cycles: Some(6), capacity: Some(cap), ..Default::default() };
        let (g, m) = generate(GraphKind::MjpegPipeline, &p, seed).unwrap();
        let mut s = Scenario::new(g, m).with_stages(stages).with_duration(SimTime::from_us(200));
        s.seed = seed;
        let small = run(&s).unwrap();
        let big = run(&s.clone().with_capacity(cap * 2)).unwrap();
        // One token of slack for the firing straddling the window edge.
        prop_assert!(big.sinks[0].tokens + 1 >= small.sinks[0].tokens, "{} < {}", big.sinks[0].tokens, small.sinks[0].tokens);
    }

    #[test]
    fn scenario_round_trip(s in gals_scenario(), gov in 0usize..4) {
        let mut s = s;
        let kinds = [GovernorKind::Static, GovernorKind::Pid, GovernorKind::OnDemand, GovernorKind::Conservative];
        s.governors[0].kind = kinds[gov];
        s.control.kp = 0.1 * gov as f64 + 0.3;
        s.power.f_min = Some(mhz(10));
        s.seed = 77;
        prop_assert_eq!(load_scenario(&serialize(&s)).unwrap(), s);
    }
}

// ---- dfs ----

fn sample(tokens: u64) -> WindowSample {
    WindowSample {
        start: SimTime::ZERO,
        end: SimTime::from_us(50),
        tokens_completed: tokens,
        busy_cycles: 1,
        total_cycles: 2,
    }
}

proptest! {
    #[test]
    fn pid_zero_error_is_a_fixed_point(level in 0usize..16, reps in 1usize..20) {
        let levels = default_levels(mhz(400), 16);
        let setpoint = 1000.0 / 50e-6;
        let mut pid = PidController::with_defaults(setpoint, levels[level]).unwrap();
        for _ in 0..reps {
            prop_assert_eq!(pid.step(&sample(1000), &levels, levels[level]).unwrap(), levels[level]);
        }
    }

    #[test]
    fn pid_anti_windup(tokens in prop::collection::vec(0u64..5000, 1..60), nominal in 0usize..16) {
        let levels = default_levels(mhz(400), 16);
        let mut pid = PidController::with_defaults(1000.0 / 50e-6, levels[nominal]).unwrap();
        let mut current = levels[nominal];
        for t in tokens {
            let (i0, prev) = (pid.integral(), pid.prev_error());
            let f = pid.step(&sample(t), &levels, current).unwrap();
            prop_assert!(levels.contains(&f));
            let e = pid.prev_error();
            if pid.integral() != i0 {
                // Integration only happens while the unclamped output stays in range.
                let raw = levels[nominal].as_f64() * (1.0 + pid.kp * e + pid.ki * pid.integral() + pid.kd * (e - prev));
                let grew_into_limit = (e > 0.0 && raw > 400e6 * (1.0 + 1e-12)) || (e < 0.0 && raw < 50e6 * (1.0 - 1e-12));
                prop_assert!(!grew_into_limit, "integral moved while saturated");
            }
            current = f;
        }
    }

    #[test]
    fn static_governor_is_identity(level in 0usize..16, busy in 0u64..=100) {
        let levels = default_levels(mhz(400), 16);
        let g = Governor::with_defaults(GovernorKind::Static);
        let s = WindowSample { busy_cycles: busy, total_cycles: 100, ..sample(0) };
        prop_assert_eq!(governor_step(&g, &s, levels[level], &levels), levels[level]);
    }

    #[test]
    fn energy_dominated_by_f_max(cuts in prop::collection::vec((1u64..1000, 0usize..16), 1..10)) {
        let levels = default_levels(mhz(400), 16);
        let model = PowerModel::new(1.0, 0.8, 1.3, levels[0], levels[15], 0.1).unwrap();
        let mut t = SimTime::ZERO;
        let mut trace = Vec::new();
        for (len, lvl) in cuts {
            let end = t + SimTime::from_ns(len);
            trace.push(FreqInterval { start: t, end, freq: levels[lvl] });
            t = end;
        }
        let flat = vec![FreqInterval { start: SimTime::ZERO, end: t, freq: levels[15] }];
        let (_, e) = energy(&[trace], &model).unwrap();
        let (_, top) = energy(&[flat], &model).unwrap();
        prop_assert!(e <= top * (1.0 + 1e-12));
    }
}
