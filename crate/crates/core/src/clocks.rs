//! Per-PE clock domains with runtime frequency changes, and synchronizer
//! observation delay across domains.
//!
//! All time is integer femtoseconds. A domain's schedule is a list of
//! segments, each a constant-period edge train starting at an edge of the
//! previous segment, so frequency changes never move an edge that has
//! already been scheduled.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use thiserror::Error;

/// Femtoseconds per second.
pub const FS_PER_SEC: u64 = 1_000_000_000_000_000;

/// Simulation time in integer femtoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_fs(fs: u64) -> Self {
        SimTime(fs)
    }

    pub const fn from_ps(ps: u64) -> Self {
        SimTime(ps * 1_000)
    }

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns * 1_000_000)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * 1_000_000_000)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000_000_000_000)
    }

    pub const fn as_fs(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / FS_PER_SEC as f64
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    /// Formats with the largest unit that represents the value exactly.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const UNITS: [(u64, &str); 5] = [
            (1_000_000_000_000_000, "s"),
            (1_000_000_000_000, "ms"),
            (1_000_000_000, "us"),
            (1_000_000, "ns"),
            (1_000, "ps"),
        ];
        for (scale, unit) in UNITS {
            if self.0 != 0 && self.0.is_multiple_of(scale) {
                return write!(f, "{}{}", self.0 / scale, unit);
            }
        }
        write!(f, "{}fs", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse `{input}`: {reason}")]
pub struct UnitParseError {
    pub input: String,
    pub reason: &'static str,
}

/// Parses `<decimal><unit>` into an exact integer count of the base unit.
fn parse_scaled(s: &str, units: &[(&str, u64)]) -> Result<u64, UnitParseError> {
    let err = |reason| UnitParseError {
        input: s.to_string(),
        reason,
    };
    let t = s.trim();
    let split = t.find(|c: char| !(c.is_ascii_digit() || c == '.')).unwrap_or(t.len());
    let (num, unit) = (&t[..split], t[split..].trim());
    let scale = if unit.is_empty() {
        if num.chars().all(|c| c == '0' || c == '.') && !num.is_empty() {
            return Ok(0);
        }
        return Err(err("missing unit"));
    } else {
        units
            .iter()
            .find(|(u, _)| u.eq_ignore_ascii_case(unit))
            .map(|&(_, k)| k)
            .ok_or_else(|| err("unknown unit"))?
    };
    let (int, frac) = num.split_once('.').unwrap_or((num, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(err("missing number"));
    }
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| err("bad number"))?
    };
    let mut value = int.checked_mul(scale).ok_or_else(|| err("overflow"))?;
    let mut place = scale;
    for d in frac.chars() {
        let d = d.to_digit(10).ok_or_else(|| err("bad number"))? as u64;
        if place % 10 != 0 {
            if d != 0 {
                return Err(err("finer than the base unit"));
            }
            continue;
        }
        place /= 10;
        value = value.checked_add(d * place).ok_or_else(|| err("overflow"))?;
    }
    Ok(value)
}

impl FromStr for SimTime {
    type Err = UnitParseError;
    /// Accepts `fs`, `ps`, `ns`, `us`, `ms` and `s`, e.g. `1.5us`.
    fn from_str(s: &str) -> Result<Self, UnitParseError> {
        const UNITS: [(&str, u64); 6] = [
            ("fs", 1),
            ("ps", 1_000),
            ("ns", 1_000_000),
            ("us", 1_000_000_000),
            ("ms", 1_000_000_000_000),
            ("s", FS_PER_SEC),
        ];
        parse_scaled(s, &UNITS).map(SimTime)
    }
}

impl FromStr for Hertz {
    type Err = UnitParseError;
    /// Accepts `Hz`, `kHz`, `MHz` and `GHz`, e.g. `233.5MHz`.
    fn from_str(s: &str) -> Result<Self, UnitParseError> {
        const UNITS: [(&str, u64); 4] = [("hz", 1), ("khz", 1_000), ("mhz", 1_000_000), ("ghz", 1_000_000_000)];
        parse_scaled(s, &UNITS).map(Hertz)
    }
}

/// Clock frequency in integer hertz.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hertz(pub u64);

impl Hertz {
    pub const fn from_mhz(mhz: u64) -> Self {
        Hertz(mhz * 1_000_000)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Period in femtoseconds, `round(10^15 / f)`.
    pub fn period_fs(self) -> u64 {
        assert!(self.0 > 0, "zero frequency has no period");
        (FS_PER_SEC + self.0 / 2) / self.0
    }
}

impl fmt::Display for Hertz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const UNITS: [(u64, &str); 3] = [(1_000_000_000, "GHz"), (1_000_000, "MHz"), (1_000, "kHz")];
        for (scale, unit) in UNITS {
            if self.0 != 0 && self.0.is_multiple_of(scale) {
                return write!(f, "{}{}", self.0 / scale, unit);
            }
        }
        write!(f, "{}Hz", self.0)
    }
}

/// Identifies a clock domain. Domains are processed in ascending id order
/// when edges coincide.
pub type DomainId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClockError {
    #[error("frequency {0} is not one of the domain's allowed levels")]
    RejectedFrequency(Hertz),
    #[error("clock domain needs at least one frequency level")]
    NoLevels,
    #[error("frequency must be positive")]
    ZeroFrequency,
}

/// Synchronizer depth on one crossing, in destination-domain cycles.
/// Zero stages models an idealized synchronous boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SyncConfig {
    pub stages: u32,
}

impl SyncConfig {
    pub const SYNCHRONOUS: SyncConfig = SyncConfig { stages: 0 };

    pub const fn new(stages: u32) -> Self {
        SyncConfig { stages }
    }
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig { stages: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Segment {
    /// Index of `first_edge` in the domain's global edge numbering.
    start_index: u64,
    first_edge: SimTime,
    period: u64,
    freq: Hertz,
}

impl Segment {
    fn edge(&self, n: u64) -> SimTime {
        SimTime(self.first_edge.0 + (n - self.start_index) * self.period)
    }
}

/// A recorded frequency command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrequencyChange {
    pub commanded_at: SimTime,
    pub effective_at: SimTime,
    pub freq: Hertz,
}

/// One PE's clock: an edge schedule that can be re-timed at runtime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClockDomain {
    id: DomainId,
    segments: Vec<Segment>,
    levels: Vec<Hertz>,
    changes: Vec<FrequencyChange>,
}

impl ClockDomain {
    /// Creates a domain running at `freq` with its first edge at `phase`.
    /// `levels` is sorted and deduplicated; `freq` must be one of them.
    pub fn new(id: DomainId, freq: Hertz, phase: SimTime, mut levels: Vec<Hertz>) -> Result<Self, ClockError> {
        if levels.is_empty() {
            return Err(ClockError::NoLevels);
        }
        if levels.iter().any(|l| l.0 == 0) {
            return Err(ClockError::ZeroFrequency);
        }
        levels.sort_unstable();
        levels.dedup();
        if levels.binary_search(&freq).is_err() {
            return Err(ClockError::RejectedFrequency(freq));
        }
        Ok(ClockDomain {
            id,
            segments: vec![Segment {
                start_index: 0,
                first_edge: phase,
                period: freq.period_fs(),
                freq,
            }],
            levels,
            changes: Vec::new(),
        })
    }

    /// A domain whose only allowed level is `freq`.
    pub fn fixed(id: DomainId, freq: Hertz, phase: SimTime) -> Result<Self, ClockError> {
        Self::new(id, freq, phase, vec![freq])
    }

    pub fn id(&self) -> DomainId {
        self.id
    }

    pub fn levels(&self) -> &[Hertz] {
        &self.levels
    }

    pub fn f_min(&self) -> Hertz {
        self.levels[0]
    }

    pub fn f_max(&self) -> Hertz {
        *self.levels.last().expect("levels non-empty")
    }

    pub fn phase(&self) -> SimTime {
        self.segments[0].first_edge
    }

    pub fn changes(&self) -> &[FrequencyChange] {
        &self.changes
    }

    /// Frequency in force at time `t`.
    pub fn frequency_at(&self, t: SimTime) -> Hertz {
        self.segments[self.segment_at_time(t)].freq
    }

    /// The frequency the domain ends up at after all scheduled changes.
    pub fn current_frequency(&self) -> Hertz {
        self.segments.last().expect("at least one segment").freq
    }

    /// `(start, freq)` pairs of the schedule, in time order.
    pub fn schedule(&self) -> impl Iterator<Item = (SimTime, Hertz)> + '_ {
        self.segments.iter().map(|s| (s.first_edge, s.freq))
    }

    fn segment_at_index(&self, n: u64) -> usize {
        self.segments.partition_point(|s| s.start_index <= n) - 1
    }

    /// Segment governing time `t`; times before the first edge map to segment 0.
    fn segment_at_time(&self, t: SimTime) -> usize {
        self.segments.partition_point(|s| s.first_edge <= t).saturating_sub(1)
    }

    /// Time of the `n`-th rising edge (edge 0 is the phase offset).
    pub fn edge_at(&self, n: u64) -> SimTime {
        self.segments[self.segment_at_index(n)].edge(n)
    }

    /// Index of the first edge at or after `t` (after `t` when `strict`).
    pub fn edge_index_after(&self, t: SimTime, strict: bool) -> u64 {
        let seg = &self.segments[self.segment_at_time(t)];
        if t < seg.first_edge || (!strict && t == seg.first_edge) {
            return seg.start_index;
        }
        let offset = t.0 - seg.first_edge.0;
        let k = if strict {
            offset / seg.period + 1
        } else {
            offset.div_ceil(seg.period)
        };
        // A later segment always begins on an edge of this one, so the
        // candidate index never skips past it.
        seg.start_index + k
    }

    /// Smallest edge time `>= t`, or `> t` when `strict`.
    pub fn next_edge_after(&self, t: SimTime, strict: bool) -> SimTime {
        self.edge_at(self.edge_index_after(t, strict))
    }

    /// Whether `t` is exactly a rising edge.
    pub fn is_edge(&self, t: SimTime) -> bool {
        self.next_edge_after(t, false) == t
    }

    /// Requests a frequency change at `t_cmd`. The new period starts at the
    /// first old-schedule edge strictly after `t_cmd`, which is returned.
    /// Any change already scheduled at or after that edge is superseded.
    pub fn set_frequency(&mut self, f_new: Hertz, t_cmd: SimTime) -> Result<SimTime, ClockError> {
        if self.levels.binary_search(&f_new).is_err() {
            return Err(ClockError::RejectedFrequency(f_new));
        }
        let index = self.edge_index_after(t_cmd, true);
        let effective = self.edge_at(index);
        self.segments.truncate(self.segment_at_index(index) + 1);
        if index == 0 {
            // Nothing has ticked yet: re-time the initial segment in place.
            let first = &mut self.segments[0];
            first.period = f_new.period_fs();
            first.freq = f_new;
        } else {
            if self.segments.last().is_some_and(|s| s.start_index == index) {
                self.segments.pop();
            }
            if self.current_frequency() != f_new {
                self.segments.push(Segment {
                    start_index: index,
                    first_edge: effective,
                    period: f_new.period_fs(),
                    freq: f_new,
                });
            }
        }
        self.changes.push(FrequencyChange {
            commanded_at: t_cmd,
            effective_at: effective,
            freq: f_new,
        });
        Ok(effective)
    }
}

/// Time at which a value produced at `t_src` becomes usable in `dst`: the
/// `stages`-th destination edge strictly after `t_src`, or `t_src` itself
/// for a synchronous boundary.
pub fn sync_observe(t_src: SimTime, dst: &ClockDomain, cfg: SyncConfig) -> SimTime {
    if cfg.stages == 0 {
        return t_src;
    }
    let first = dst.edge_index_after(t_src, true);
    dst.edge_at(first + u64::from(cfg.stages) - 1)
}

/// `count` frequency levels evenly spaced from `f_max / 8` to `f_max`,
/// rounded to whole hertz.
pub fn default_levels(f_max: Hertz, count: usize) -> Vec<Hertz> {
    level_grid(Hertz(f_max.0 / 8), f_max, count)
}

/// `count` evenly spaced levels between `lo` and `hi` inclusive.
pub fn level_grid(lo: Hertz, hi: Hertz, count: usize) -> Vec<Hertz> {
    if count <= 1 || lo == hi {
        return vec![hi];
    }
    let span = (hi.0 - lo.0) as u128;
    let steps = (count - 1) as u128;
    (0..count)
        .map(|k| {
            let k = k as u128;
            Hertz(lo.0 + ((span * k + steps / 2) / steps) as u64)
        })
        .collect()
}
