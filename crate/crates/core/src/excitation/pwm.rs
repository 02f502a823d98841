//! Differential three-level PWM output.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numfmt::fmt_sig9;
use crate::trace::SignalTrace;

/// Pulse widths are 4-bit codes.
pub const MAX_WIDTH: u8 = 15;

/// Single-ended output rail (V).
pub const DEFAULT_RAIL: f64 = 5.0;

/// One pulse in units of the PWM tick `t_syn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub start: u32,
    pub width: u8,
}

impl Pulse {
    pub fn new(start: u32, width: u8) -> Self {
        Self { start, width }
    }

    pub fn end(&self) -> u32 {
        self.start + self.width as u32
    }
}

/// Pulse schedule for the two output sides. The differential output is
/// `rail * (up - down)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwmProgram {
    pub t_syn: f64,
    pub pulses_up: Vec<Pulse>,
    pub pulses_down: Vec<Pulse>,
    pub rail: f64,
}

impl PwmProgram {
    pub fn new(t_syn: f64, pulses_up: Vec<Pulse>, pulses_down: Vec<Pulse>, rail: f64) -> Result<Self> {
        let p = Self { t_syn, pulses_up, pulses_down, rail };
        p.validate()?;
        Ok(p)
    }

    pub fn empty(t_syn: f64, rail: f64) -> Self {
        Self { t_syn, pulses_up: Vec::new(), pulses_down: Vec::new(), rail }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_syn.is_finite() && self.t_syn > 0.0) {
            return Err(Error::Domain(format!("t_syn must be > 0, got {}", self.t_syn)));
        }
        if !self.rail.is_finite() {
            return Err(Error::Domain("rail voltage is not finite".into()));
        }
        for (side, pulses) in [("up", &self.pulses_up), ("down", &self.pulses_down)] {
            for p in pulses {
                if p.width > MAX_WIDTH {
                    return Err(Error::Invariant(format!("{side} pulse width {} exceeds 4 bits", p.width)));
                }
            }
            for w in pulses.windows(2) {
                if w[1].start < w[0].end() {
                    return Err(Error::Invariant(format!(
                        "{side} pulses at {} and {} overlap or are unsorted",
                        w[0].start, w[1].start
                    )));
                }
            }
        }
        for u in self.pulses_up.iter().filter(|p| p.width > 0) {
            for d in self.pulses_down.iter().filter(|p| p.width > 0) {
                if u.start < d.end() && d.start < u.end() {
                    return Err(Error::Invariant(format!(
                        "up pulse [{}, {}) overlaps down pulse [{}, {})",
                        u.start,
                        u.end(),
                        d.start,
                        d.end()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Last pulse end, in ticks.
    pub fn span(&self) -> u32 {
        self.pulses_up.iter().chain(&self.pulses_down).map(Pulse::end).max().unwrap_or(0)
    }

    pub fn up_widths(&self) -> Vec<u8> {
        self.pulses_up.iter().map(|p| p.width).collect()
    }

    pub fn down_widths(&self) -> Vec<u8> {
        self.pulses_down.iter().map(|p| p.width).collect()
    }

    /// Line-oriented text: `t_syn_s`, `rail_v`, then `up`/`down` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "t_syn_s {}", fmt_sig9(self.t_syn)).unwrap();
        writeln!(out, "rail_v {}", fmt_sig9(self.rail)).unwrap();
        for p in &self.pulses_up {
            writeln!(out, "up {} {}", p.start, p.width).unwrap();
        }
        for p in &self.pulses_down {
            writeln!(out, "down {} {}", p.start, p.width).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut t_syn = None;
        let mut rail = None;
        let mut up = Vec::new();
        let mut down = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::Parse { path: "<pwm program>".into(), line: n + 1, message: m.into() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["t_syn_s", v] => t_syn = Some(v.parse::<f64>().map_err(|e| bad(&e.to_string()))?),
                ["rail_v", v] => rail = Some(v.parse::<f64>().map_err(|e| bad(&e.to_string()))?),
                [side @ ("up" | "down"), s, w] => {
                    let p = Pulse::new(
                        s.parse().map_err(|e: std::num::ParseIntError| bad(&e.to_string()))?,
                        w.parse().map_err(|e: std::num::ParseIntError| bad(&e.to_string()))?,
                    );
                    if *side == "up" {
                        up.push(p)
                    } else {
                        down.push(p)
                    }
                }
                _ => return Err(bad(&format!("unrecognized line '{line}'"))),
            }
        }
        let missing = |k: &str| Error::Input(format!("pwm program is missing '{k}'"));
        Self::new(t_syn.ok_or_else(|| missing("t_syn_s"))?, up, down, rail.ok_or_else(|| missing("rail_v"))?)
    }
}

fn tick_to_sample(tick: u32, t_syn: f64, sample_rate: f64) -> usize {
    (tick as f64 * t_syn * sample_rate).round() as usize
}

/// Renders the differential output on a grid starting at t = 0, long enough
/// to end with at least one zero sample after the last pulse. Pulse edges
/// snap to the nearest sample.
pub fn pwm_waveform(program: &PwmProgram, sample_rate: f64) -> Result<SignalTrace> {
    let len = tick_to_sample(program.span(), program.t_syn, sample_rate) + 1;
    pwm_waveform_with_len(program, sample_rate, len)
}

/// As [`pwm_waveform`] but with an explicit sample count; pulses past the
/// end are truncated.
pub fn pwm_waveform_with_len(program: &PwmProgram, sample_rate: f64, len: usize) -> Result<SignalTrace> {
    program.validate()?;
    if !(sample_rate >= 8.0 / program.t_syn) {
        return Err(Error::Precondition(format!("sample rate {sample_rate} Hz is below 8 samples per PWM tick")));
    }
    let mut samples = vec![0.0; len];
    for (pulses, level) in [(&program.pulses_up, program.rail), (&program.pulses_down, -program.rail)] {
        for p in pulses {
            let a = tick_to_sample(p.start, program.t_syn, sample_rate).min(len);
            let b = tick_to_sample(p.end(), program.t_syn, sample_rate).min(len);
            samples[a..b].iter_mut().for_each(|s| *s += level);
        }
    }
    SignalTrace::new(sample_rate, 0.0, samples)
}
