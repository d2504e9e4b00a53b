//! Reference single-clock queue simulator.
//!
//! Valid only for scenarios with one shared clock (equal frequency and
//! phase everywhere), zero synchronizer stages, point-to-point links and
//! static governors. It uses plain bounded queues and a global cycle
//! counter, nothing from the engine or FIFO modules.

#![allow(dead_code)]

use std::collections::VecDeque;

use gals_sim::clocks::SimTime;
use gals_sim::dfs::{energy, FreqInterval};
use gals_sim::engine::{ChannelMetrics, Metrics, PeMetrics, Scenario, SinkMetrics};

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    Wait,
    Busy(u32),
    Emit,
}

pub fn reference_run(s: &Scenario) -> Metrics {
    let clock = &s.clocks[0];
    assert!(s.clocks.iter().all(|c| c.freq == clock.freq && c.phase == clock.phase));
    assert!(s.stages.iter().all(|&st| st == 0));
    let period = (1_000_000_000_000_000 + clock.freq.0 / 2) / clock.freq.0;
    let g = &s.graph;
    let n = g.nodes.len();

    let mut queues: Vec<VecDeque<u64>> = g
        .channels
        .iter()
        .map(|c| (0..c.initial_tokens as u64).collect())
        .collect();
    let mut next_seq: Vec<u64> = g.channels.iter().map(|c| c.initial_tokens as u64).collect();
    let mut expect_seq: Vec<u64> = vec![0; g.channels.len()];
    let mut popped = vec![0u64; g.channels.len()];
    let mut violations = vec![0u64; g.channels.len()];
    let mut occ: Vec<(u64, u64, u64, u64)> = vec![(u64::MAX, 0, 0, 0); g.channels.len()];

    let port_sorted = |pick: &dyn Fn(usize) -> Option<usize>| -> Vec<usize> {
        let mut v: Vec<(usize, usize)> = (0..g.channels.len()).filter_map(|i| pick(i).map(|p| (p, i))).collect();
        v.sort_unstable();
        v.into_iter().map(|(_, i)| i).collect()
    };
    let ins: Vec<Vec<usize>> = (0..n)
        .map(|v| port_sorted(&|i| (g.channels[i].dst.node == v).then_some(g.channels[i].dst.port)))
        .collect();
    let outs: Vec<Vec<usize>> = (0..n)
        .map(|v| port_sorted(&|i| (g.channels[i].src.node == v).then_some(g.channels[i].src.port)))
        .collect();
    let need_in: Vec<Vec<u32>> = (0..n)
        .map(|v| {
            ins[v]
                .iter()
                .map(|&i| g.nodes[v].consume_rate(g.channels[i].dst.port))
                .collect()
        })
        .collect();
    let need_out: Vec<Vec<u32>> = (0..n)
        .map(|v| {
            outs[v]
                .iter()
                .map(|&i| g.nodes[v].produce_rate(g.channels[i].src.port))
                .collect()
        })
        .collect();

    let mut phase = vec![Phase::Wait; n];
    let mut have: Vec<Vec<u32>> = ins.iter().map(|v| vec![0; v.len()]).collect();
    let mut sent: Vec<Vec<u32>> = outs.iter().map(|v| vec![0; v.len()]).collect();
    let mut costs: Vec<_> = g.nodes.iter().map(|v| v.cost.sampler(s.seed)).collect();
    let mut pe = vec![PeMetrics::default(); n];
    let mut sink_tokens = vec![0u64; n];

    let mut k = 0u64;
    loop {
        let t = clock.phase.0 + k * period;
        if t >= s.duration.0 {
            break;
        }
        let counted = t >= s.warmup.0;
        for v in 0..n {
            let (mut moved, mut tried_in, mut tried_out, mut worked) = (false, false, false, false);
            if phase[v] == Phase::Wait {
                for (j, &ch) in ins[v].iter().enumerate() {
                    if have[v][j] < need_in[v][j] {
                        tried_in = true;
                        if let Some(seq) = queues[ch].pop_front() {
                            if seq != expect_seq[ch] {
                                violations[ch] += 1;
                            }
                            expect_seq[ch] = seq + 1;
                            popped[ch] += 1;
                            have[v][j] += 1;
                            moved = true;
                        }
                    }
                }
                if have[v].iter().zip(&need_in[v]).all(|(h, w)| h >= w) {
                    have[v].iter_mut().for_each(|h| *h = 0);
                    phase[v] = Phase::Busy(costs[v].next_cost());
                }
            }
            if let Phase::Busy(r) = phase[v] {
                worked = true;
                phase[v] = if r > 1 { Phase::Busy(r - 1) } else { Phase::Emit };
            }
            if phase[v] == Phase::Emit {
                for (j, &ch) in outs[v].iter().enumerate() {
                    if sent[v][j] < need_out[v][j] {
                        tried_out = true;
                        if queues[ch].len() < g.channels[ch].capacity as usize {
                            queues[ch].push_back(next_seq[ch]);
                            next_seq[ch] += 1;
                            sent[v][j] += 1;
                            moved = true;
                        }
                    }
                }
                if sent[v].iter().zip(&need_out[v]).all(|(a, b)| a >= b) {
                    sent[v].iter_mut().for_each(|x| *x = 0);
                    phase[v] = Phase::Wait;
                    if counted {
                        pe[v].firings += 1;
                        if g.sinks.contains(&v) {
                            sink_tokens[v] += 1;
                        }
                    }
                }
            }
            if counted {
                let m = &mut pe[v];
                m.edges += 1;
                if worked {
                    m.compute_cycles += 1;
                } else if moved {
                    m.progress_cycles += 1;
                } else if tried_in {
                    m.read_stall_cycles += 1;
                } else if tried_out {
                    m.write_stall_cycles += 1;
                } else {
                    m.progress_cycles += 1;
                }
                for &ch in &ins[v] {
                    let q = queues[ch].len() as u64;
                    let o = &mut occ[ch];
                    *o = (o.0.min(q), o.1.max(q), o.2 + q, o.3 + 1);
                }
            }
        }
        k += 1;
    }

    let secs = (s.duration.0 - s.warmup.0) as f64 / 1e15;
    let trace = vec![FreqInterval {
        start: s.warmup,
        end: s.duration,
        freq: clock.freq,
    }];
    for (v, m) in pe.iter_mut().enumerate() {
        m.node = v;
        m.freq_trace = trace.clone();
    }
    let traces: Vec<_> = pe.iter().map(|m| m.freq_trace.clone()).collect();
    let (per, total) = energy(&traces, &s.power_model().unwrap()).unwrap();
    for (m, e) in pe.iter_mut().zip(per) {
        m.energy = e;
    }
    let sinks: Vec<SinkMetrics> = g
        .sinks
        .iter()
        .map(|&v| SinkMetrics {
            node: v,
            tokens: sink_tokens[v],
            throughput: sink_tokens[v] as f64 / secs,
        })
        .collect();
    let mut warnings = Vec::new();
    if sinks.iter().all(|x| x.tokens == 0) {
        warnings.push("degenerate run: no tokens reached any sink in the measured window".to_string());
    }
    Metrics {
        measured_from: s.warmup,
        measured_to: s.duration,
        channels: g
            .channels
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let o = occ[i];
                ChannelMetrics {
                    id: c.id,
                    pushed: next_seq[i],
                    popped: popped[i],
                    final_occupancy: queues[i].len() as u64,
                    occupancy_min: if o.3 == 0 { 0 } else { o.0 },
                    occupancy_max: o.1,
                    occupancy_mean: if o.3 == 0 { 0.0 } else { o.2 as f64 / o.3 as f64 },
                    order_violations: violations[i],
                }
            })
            .collect(),
        sinks,
        pes: pe,
        total_energy: total,
        bus_transfers: 0,
        warnings,
    }
}

pub fn short(s: Scenario, us: u64) -> Scenario {
    s.with_duration(SimTime::from_us(us))
}
