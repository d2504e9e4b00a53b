//! Per-PE frequency governors and the voltage/frequency power model.
//!
//! The PID controller regulates a PE's measured throughput toward a
//! setpoint. Its output is a multiplicative correction on a nominal
//! frequency, snapped to the PE's discrete level grid:
//!
//! ```text
//! e    = (setpoint - measured) / setpoint
//! u    = kp*e + ki*integral + kd*(e - prev_e)
//! f    = snap(f_nominal * (1 + u))
//! ```
//!
//! The on-demand and conservative governors act on the busy fraction of
//! the last window instead.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::clocks::{Hertz, SimTime};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DfsError {
    #[error("frequency level set is empty")]
    NoLevels,
    #[error("frequency {f} outside the power model range [{lo}, {hi}]")]
    OutOfRange { f: Hertz, lo: Hertz, hi: Hertz },
    #[error("frequency trace intervals overlap or run backwards at {0}")]
    OverlappingTrace(SimTime),
    #[error("invalid power model: {0}")]
    BadModel(&'static str),
    #[error("invalid controller configuration: {0}")]
    BadController(&'static str),
}

/// Activity over one control window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowSample {
    pub start: SimTime,
    pub end: SimTime,
    pub tokens_completed: u64,
    pub busy_cycles: u64,
    pub total_cycles: u64,
}

impl WindowSample {
    pub fn duration_secs(&self) -> f64 {
        (self.end - self.start).as_secs_f64()
    }

    pub fn throughput(&self) -> f64 {
        self.tokens_completed as f64 / self.duration_secs()
    }

    pub fn busy_fraction(&self) -> f64 {
        if self.total_cycles == 0 {
            0.0
        } else {
            self.busy_cycles as f64 / self.total_cycles as f64
        }
    }
}

/// Picks the level nearest to `raw` after clamping to the grid. When the two
/// closest levels are within a tenth of their spacing of equidistant, the
/// one nearer `current` wins, which keeps quantization noise from toggling
/// between neighbours.
pub fn snap_to_level(levels: &[Hertz], raw: f64, current: Hertz) -> Result<Hertz, DfsError> {
    let (first, last) = match (levels.first(), levels.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(DfsError::NoLevels),
    };
    let raw = raw.clamp(first.as_f64(), last.as_f64());
    let idx = levels.partition_point(|l| l.as_f64() < raw);
    if idx == 0 {
        return Ok(first);
    }
    if idx == levels.len() {
        return Ok(last);
    }
    let (lo, hi) = (levels[idx - 1], levels[idx]);
    let d_lo = raw - lo.as_f64();
    let d_hi = hi.as_f64() - raw;
    let spacing = hi.as_f64() - lo.as_f64();
    if (d_lo - d_hi).abs() < 0.1 * spacing {
        let c = current.as_f64();
        return Ok(if (lo.as_f64() - c).abs() <= (hi.as_f64() - c).abs() {
            lo
        } else {
            hi
        });
    }
    Ok(if d_lo < d_hi { lo } else { hi })
}

/// Positional PID on normalized throughput error, with conditional
/// integration and an integral clamp as anti-windup.
#[derive(Clone, Debug, PartialEq)]
pub struct PidController {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Desired throughput in tokens per second.
    pub setpoint: f64,
    pub f_nominal: Hertz,
    pub window: SimTime,
    integral: f64,
    prev_error: f64,
}

pub const DEFAULT_KP: f64 = 0.5;
pub const DEFAULT_KI: f64 = 0.2;
pub const DEFAULT_KD: f64 = 0.0;
pub const DEFAULT_WINDOW: SimTime = SimTime::from_us(50);

impl PidController {
    pub fn new(kp: f64, ki: f64, kd: f64, setpoint: f64, f_nominal: Hertz, window: SimTime) -> Result<Self, DfsError> {
        if !(setpoint > 0.0 && setpoint.is_finite()) {
            return Err(DfsError::BadController("setpoint must be positive"));
        }
        if window == SimTime::ZERO {
            return Err(DfsError::BadController("window must be positive"));
        }
        if f_nominal.0 == 0 {
            return Err(DfsError::BadController("nominal frequency must be positive"));
        }
        Ok(PidController {
            kp,
            ki,
            kd,
            setpoint,
            f_nominal,
            window,
            integral: 0.0,
            prev_error: 0.0,
        })
    }

    pub fn with_defaults(setpoint: f64, f_nominal: Hertz) -> Result<Self, DfsError> {
        Self::new(DEFAULT_KP, DEFAULT_KI, DEFAULT_KD, setpoint, f_nominal, DEFAULT_WINDOW)
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn prev_error(&self) -> f64 {
        self.prev_error
    }

    fn raw(&self, e: f64, integral: f64) -> f64 {
        let u = self.kp * e + self.ki * integral + self.kd * (e - self.prev_error);
        self.f_nominal.as_f64() * (1.0 + u)
    }

    /// Integral values beyond which the integral term alone would push the
    /// output outside `[f_min, f_max]`.
    fn integral_bounds(&self, f_min: Hertz, f_max: Hertz) -> (f64, f64) {
        if self.ki == 0.0 {
            return (f64::NEG_INFINITY, f64::INFINITY);
        }
        let nom = self.f_nominal.as_f64();
        let a = (f_min.as_f64() / nom - 1.0) / self.ki;
        let b = (f_max.as_f64() / nom - 1.0) / self.ki;
        (a.min(b), a.max(b))
    }

    /// One control update; `current` is the frequency the window ran at.
    pub fn step(&mut self, sample: &WindowSample, levels: &[Hertz], current: Hertz) -> Result<Hertz, DfsError> {
        let (f_min, f_max) = match (levels.first(), levels.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(DfsError::NoLevels),
        };
        let e = (self.setpoint - sample.throughput()) / self.setpoint;
        let (lo, hi) = self.integral_bounds(f_min, f_max);
        let candidate = (self.integral + e).clamp(lo, hi);
        let raw = self.raw(e, candidate);
        let saturated = (raw > f_max.as_f64() && e > 0.0) || (raw < f_min.as_f64() && e < 0.0);
        if !saturated {
            self.integral = candidate;
        }
        let out = snap_to_level(levels, self.raw(e, self.integral), current)?;
        self.prev_error = e;
        Ok(out)
    }
}

/// Stateless form of [`PidController::step`] matching the operation table.
pub fn pid_step(ctrl: &mut PidController, sample: &WindowSample, levels: &[Hertz]) -> Result<Hertz, DfsError> {
    let current = ctrl.f_nominal;
    ctrl.step(sample, levels, current)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GovernorKind {
    Static,
    Pid,
    OnDemand,
    Conservative,
}

impl GovernorKind {
    pub fn name(self) -> &'static str {
        match self {
            GovernorKind::Static => "static",
            GovernorKind::Pid => "pid",
            GovernorKind::OnDemand => "ondemand",
            GovernorKind::Conservative => "conservative",
        }
    }
}

impl fmt::Display for GovernorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GovernorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "static" | "none" => Ok(GovernorKind::Static),
            "pid" => Ok(GovernorKind::Pid),
            "ondemand" => Ok(GovernorKind::OnDemand),
            "conservative" => Ok(GovernorKind::Conservative),
            _ => Err(format!("unknown governor `{s}`")),
        }
    }
}

/// Load-driven governor thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Governor {
    pub kind: GovernorKind,
    pub up_threshold: f64,
    pub down_threshold: f64,
}

pub const DEFAULT_UP_THRESHOLD: f64 = 0.8;
pub const DEFAULT_DOWN_THRESHOLD: f64 = 0.3;

impl Governor {
    pub fn new(kind: GovernorKind, up_threshold: f64, down_threshold: f64) -> Result<Self, DfsError> {
        let in_unit = |x: f64| x > 0.0 && x < 1.0;
        if !(in_unit(up_threshold) && in_unit(down_threshold) && up_threshold > down_threshold) {
            return Err(DfsError::BadController("need 0 < down < up < 1"));
        }
        Ok(Governor {
            kind,
            up_threshold,
            down_threshold,
        })
    }

    pub fn with_defaults(kind: GovernorKind) -> Self {
        Governor {
            kind,
            up_threshold: DEFAULT_UP_THRESHOLD,
            down_threshold: DEFAULT_DOWN_THRESHOLD,
        }
    }
}

/// Busy-fraction policy step. PID governors are handled by
/// [`PidController`]; passing one here holds the frequency.
pub fn governor_step(gov: &Governor, sample: &WindowSample, current: Hertz, levels: &[Hertz]) -> Hertz {
    if levels.is_empty() {
        return current;
    }
    let busy = sample.busy_fraction();
    let idx = levels.partition_point(|&l| l < current).min(levels.len() - 1);
    let up = busy > gov.up_threshold;
    let down = busy < gov.down_threshold;
    match gov.kind {
        GovernorKind::Static | GovernorKind::Pid => current,
        GovernorKind::OnDemand if up => levels[levels.len() - 1],
        GovernorKind::Conservative if up => levels[(idx + 1).min(levels.len() - 1)],
        GovernorKind::OnDemand | GovernorKind::Conservative if down => levels[idx.saturating_sub(1)],
        _ => current,
    }
}

/// Linear voltage/frequency map with dynamic `aC V^2 f` and leakage `k V` power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerModel {
    /// Switched capacitance times activity, normalized units.
    pub capacitance: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub f_min: Hertz,
    pub f_max: Hertz,
    pub leakage: f64,
}

impl PowerModel {
    pub fn new(
        capacitance: f64,
        v_min: f64,
        v_max: f64,
        f_min: Hertz,
        f_max: Hertz,
        leakage: f64,
    ) -> Result<Self, DfsError> {
        if !(capacitance > 0.0 && v_min > 0.0 && v_max > 0.0 && f_min.0 > 0) {
            return Err(DfsError::BadModel("parameters must be positive"));
        }
        if v_min > v_max || f_min > f_max {
            return Err(DfsError::BadModel("need v_min <= v_max and f_min <= f_max"));
        }
        if leakage < 0.0 {
            return Err(DfsError::BadModel("leakage must be non-negative"));
        }
        Ok(PowerModel {
            capacitance,
            v_min,
            v_max,
            f_min,
            f_max,
            leakage,
        })
    }

    pub fn voltage_of(&self, f: Hertz) -> Result<f64, DfsError> {
        voltage_of(f, self)
    }

    /// Instantaneous power at frequency `f`.
    pub fn power(&self, f: Hertz) -> Result<f64, DfsError> {
        let v = self.voltage_of(f)?;
        Ok(self.capacitance * v * v * f.as_f64() + self.leakage * v)
    }
}

pub fn voltage_of(f: Hertz, model: &PowerModel) -> Result<f64, DfsError> {
    if f < model.f_min || f > model.f_max {
        return Err(DfsError::OutOfRange {
            f,
            lo: model.f_min,
            hi: model.f_max,
        });
    }
    if model.f_max == model.f_min {
        return Ok(model.v_max);
    }
    let frac = (f.0 - model.f_min.0) as f64 / (model.f_max.0 - model.f_min.0) as f64;
    Ok(model.v_min + (model.v_max - model.v_min) * frac)
}

/// A span of constant frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreqInterval {
    pub start: SimTime,
    pub end: SimTime,
    pub freq: Hertz,
}

/// Energy of each PE's trace plus the total.
pub fn energy(traces: &[Vec<FreqInterval>], model: &PowerModel) -> Result<(Vec<f64>, f64), DfsError> {
    let mut per_pe = Vec::with_capacity(traces.len());
    for trace in traces {
        let mut e = 0.0;
        let mut cursor = None;
        for iv in trace {
            if iv.end < iv.start || cursor.is_some_and(|c| iv.start < c) {
                return Err(DfsError::OverlappingTrace(iv.start));
            }
            cursor = Some(iv.end);
            e += model.power(iv.freq)? * (iv.end - iv.start).as_secs_f64();
        }
        per_pe.push(e);
    }
    let total = per_pe.iter().sum();
    Ok((per_pe, total))
}
