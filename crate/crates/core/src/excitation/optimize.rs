//! Least-squares choice of the PWM pulse widths.
//!
//! Each pulse sits centered in one carrier half-cycle ("slot") of the burst;
//! only its width is free. The filtered PWM output and the reference are
//! both scaled to unit fundamental amplitude and the reference is shifted
//! by the fundamental phase difference (the LC filter's lag) before the
//! squared error is summed over the burst plus one carrier period.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pwm::{pwm_waveform_with_len, Pulse, PwmProgram, DEFAULT_RAIL, MAX_WIDTH};
use super::{ExcitationSpec, LcFilterSpec};
use crate::error::{Error, Result};
use crate::trace::nrmse;

/// Widths of the reference ROM table, as listed for the up and down sides.
pub const ROM_UP_WIDTHS: [u8; 4] = [1, 5, 7, 3];
pub const ROM_DOWN_WIDTHS: [u8; 4] = [3, 7, 5, 1];

pub const RESTARTS: usize = 8;
const RESTART_SEED: u64 = 0x5348_4d31;
/// Comparison grid resolution, samples per PWM tick.
const SAMPLES_PER_TICK: u32 = 8;

/// Placement of the PWM pulses within the burst.
///
/// The default puts four pulses per side in the middle four carrier cycles
/// of a five-cycle burst (half-cycles 1..=8), up pulses in the positive
/// lobes and down pulses in the negative lobes, with 16 ticks per carrier
/// cycle so each slot is 8 ticks wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameModel {
    pub pulses_per_side: usize,
    pub ticks_per_cycle: u32,
    /// Index of the first half-cycle used, counted from the burst start.
    pub first_half_cycle: u32,
    pub max_width: u8,
}

impl Default for FrameModel {
    fn default() -> Self {
        Self { pulses_per_side: 4, ticks_per_cycle: 16, first_half_cycle: 1, max_width: 8 }
    }
}

impl FrameModel {
    pub fn validate(&self, spec: &ExcitationSpec) -> Result<()> {
        if self.pulses_per_side == 0 {
            return Err(Error::Config("frame needs at least one pulse per side".into()));
        }
        if self.ticks_per_cycle < 2 || !self.ticks_per_cycle.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "ticks per carrier cycle must be even and >= 2, got {}",
                self.ticks_per_cycle
            )));
        }
        if self.max_width > MAX_WIDTH {
            return Err(Error::Config(format!("max width {} does not fit 4 bits", self.max_width)));
        }
        if self.max_width as u32 > self.ticks_per_cycle / 2 {
            return Err(Error::Config(format!(
                "pulses up to {} ticks do not fit {}-tick half-cycle slots",
                self.max_width,
                self.ticks_per_cycle / 2
            )));
        }
        let last = self.first_half_cycle as usize + 2 * self.pulses_per_side;
        if last > 2 * spec.n_cycles as usize {
            return Err(Error::Config(format!(
                "frame needs half-cycles {}..{} but the burst has {}",
                self.first_half_cycle,
                last,
                2 * spec.n_cycles
            )));
        }
        Ok(())
    }

    /// Half-cycle indices hosting the up (positive lobe) and down slots.
    pub fn slots(&self) -> (Vec<u32>, Vec<u32>) {
        let range = self.first_half_cycle..self.first_half_cycle + 2 * self.pulses_per_side as u32;
        range.partition(|j| j % 2 == 0)
    }

    /// Start tick of a `width`-tick pulse centered in half-cycle `slot`,
    /// rounded down to the tick grid when the centering is fractional.
    pub fn pulse_start(&self, slot: u32, width: u8) -> u32 {
        let half = self.ticks_per_cycle / 2;
        ((2 * slot + 1) * half - width as u32) / 2
    }

    pub fn program(&self, up: &[u8], down: &[u8], t_syn: f64) -> Result<PwmProgram> {
        let (up_slots, down_slots) = self.slots();
        if up.len() != up_slots.len() || down.len() != down_slots.len() {
            return Err(Error::Config(format!(
                "frame has {} slots per side, got {} up and {} down widths",
                self.pulses_per_side,
                up.len(),
                down.len()
            )));
        }
        if let Some(w) = up.iter().chain(down).find(|&&w| w > self.max_width) {
            return Err(Error::Config(format!("width {w} exceeds the frame's slot limit {}", self.max_width)));
        }
        let place = |slots: &[u32], widths: &[u8]| -> Vec<Pulse> {
            slots.iter().zip(widths).map(|(&s, &w)| Pulse::new(self.pulse_start(s, w), w)).collect()
        };
        PwmProgram::new(t_syn, place(&up_slots, up), place(&down_slots, down), DEFAULT_RAIL)
    }
}

/// Error of one width assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub up: Vec<u8>,
    pub down: Vec<u8>,
    /// Sum of squared differences of the unit-fundamental waveforms.
    pub error: f64,
    /// RMS difference over the reference's range.
    pub nrmse: f64,
    /// Shift applied to the reference (s).
    pub delay: f64,
}

/// Per-restart record of the coordinate descent.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartTrace {
    pub seed_widths: Vec<u8>,
    /// Error after each full sweep (the first entry is the seed's error).
    pub sweep_errors: Vec<f64>,
    pub widths: Vec<u8>,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub program: PwmProgram,
    pub best: Evaluation,
    pub restarts: Vec<RestartTrace>,
}

/// Precomputed filtered responses of every (slot, width) pulse; the LC
/// filter is linear and starts at rest, so a program's output is their sum.
struct Evaluator<'a> {
    spec: &'a ExcitationSpec,
    frame: FrameModel,
    sample_rate: f64,
    len: usize,
    /// `responses[slot][width]`, slots ordered up then down.
    responses: Vec<Vec<(Vec<f64>, Complex64)>>,
    ref_fundamental: Complex64,
}

impl<'a> Evaluator<'a> {
    fn new(spec: &'a ExcitationSpec, frame: FrameModel, filter: &LcFilterSpec, t_syn: f64) -> Result<Self> {
        spec.validate()?;
        filter.validate()?;
        frame.validate(spec)?;
        let implied = t_syn * frame.ticks_per_cycle as f64 * spec.f_center;
        if !((implied - 1.0).abs() < 1e-6) {
            return Err(Error::Config(format!(
                "t_syn {t_syn} s gives a carrier of {} Hz, not the burst's {} Hz",
                1.0 / (t_syn * frame.ticks_per_cycle as f64),
                spec.f_center
            )));
        }
        let per_cycle = (SAMPLES_PER_TICK * frame.ticks_per_cycle) as usize;
        let sample_rate = per_cycle as f64 * spec.f_center;
        let len = (spec.n_cycles as usize + 1) * per_cycle;
        let w = 2.0 * PI * spec.f_center;
        let project = |x: &[f64]| -> Complex64 {
            x.iter()
                .enumerate()
                .map(|(i, &v)| v * Complex64::from_polar(1.0, -w * i as f64 / sample_rate))
                .sum::<Complex64>()
                * (2.0 / x.len() as f64)
        };
        let (up_slots, down_slots) = frame.slots();
        let mut responses = Vec::new();
        for (slots, is_up) in [(&up_slots, true), (&down_slots, false)] {
            for &slot in slots {
                let mut per_width = Vec::with_capacity(frame.max_width as usize + 1);
                for width in 0..=frame.max_width {
                    let pulse = vec![Pulse::new(frame.pulse_start(slot, width), width)];
                    let prog = if is_up {
                        PwmProgram::new(t_syn, pulse, vec![], DEFAULT_RAIL)?
                    } else {
                        PwmProgram::new(t_syn, vec![], pulse, DEFAULT_RAIL)?
                    };
                    let raw = pwm_waveform_with_len(&prog, sample_rate, len)?;
                    let y = filter.biquad(sample_rate).run(&raw.samples);
                    let f = project(&y);
                    per_width.push((y, f));
                }
                responses.push(per_width);
            }
        }
        let reference: Vec<f64> = (0..len).map(|i| spec.value_at(i as f64 / sample_rate)).collect();
        let ref_fundamental = project(&reference);
        Ok(Self { spec, frame, sample_rate, len, responses, ref_fundamental })
    }

    fn evaluate(&self, widths: &[u8]) -> Evaluation {
        let p = self.frame.pulses_per_side;
        let mut y = vec![0.0; self.len];
        let mut fy = Complex64::new(0.0, 0.0);
        for (slot, &w) in widths.iter().enumerate() {
            let (resp, f) = &self.responses[slot][w as usize];
            y.iter_mut().zip(resp).for_each(|(a, b)| *a += b);
            fy += f;
        }
        let fr = self.ref_fundamental;
        let period = 1.0 / self.spec.f_center;
        let (scale_y, delay) = if fy.norm() > 1e-300 {
            let lag = -(fy / fr).arg() / (2.0 * PI * self.spec.f_center);
            (1.0 / fy.norm(), lag - period * (lag / period).round())
        } else {
            (0.0, 0.0)
        };
        let scale_r = 1.0 / fr.norm();
        let reference: Vec<f64> =
            (0..self.len).map(|i| self.spec.value_at(i as f64 / self.sample_rate - delay) * scale_r).collect();
        y.iter_mut().for_each(|v| *v *= scale_y);
        let error = y.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).sum();
        Evaluation { up: widths[..p].to_vec(), down: widths[p..].to_vec(), error, nrmse: nrmse(&y, &reference), delay }
    }
}

/// Error of a given width assignment under the same model the optimizer uses.
pub fn evaluate_widths(
    spec: &ExcitationSpec,
    frame: &FrameModel,
    filter: &LcFilterSpec,
    t_syn: f64,
    up: &[u8],
    down: &[u8],
) -> Result<Evaluation> {
    // Validates lengths and slot limits.
    frame.program(up, down, t_syn)?;
    let ev = Evaluator::new(spec, *frame, filter, t_syn)?;
    let widths: Vec<u8> = up.iter().chain(down).copied().collect();
    Ok(ev.evaluate(&widths))
}

fn lexicographic_better(a: &(f64, Vec<u8>), b: &(f64, Vec<u8>)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Finds integer widths minimizing the least-squares error between the
/// LC-filtered PWM output and the reference burst.
///
/// Coordinate descent: each sweep sets every width in turn to its best value
/// with the others held, until a sweep changes nothing. Eight seeded random
/// starts; the lowest error wins, ties going to the lexicographically
/// smallest width vector.
pub fn optimize_pulse_widths(
    spec: &ExcitationSpec,
    frame: &FrameModel,
    filter: &LcFilterSpec,
    t_syn: f64,
) -> Result<OptimizeResult> {
    let ev = Evaluator::new(spec, *frame, filter, t_syn)?;
    let n = 2 * frame.pulses_per_side;
    if spec.amplitude_pp == 0.0 {
        let zeros = vec![0u8; frame.pulses_per_side];
        return Ok(OptimizeResult {
            program: frame.program(&zeros, &zeros, t_syn)?,
            best: Evaluation { up: zeros.clone(), down: zeros, error: 0.0, nrmse: 0.0, delay: 0.0 },
            restarts: Vec::new(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let mut restarts = Vec::with_capacity(RESTARTS);
    for _ in 0..RESTARTS {
        let seed: Vec<u8> = (0..n).map(|_| rng.random_range(0..=frame.max_width)).collect();
        let mut widths = seed.clone();
        let mut err = ev.evaluate(&widths).error;
        let mut sweep_errors = vec![err];
        loop {
            let mut changed = false;
            for i in 0..n {
                let current = widths[i];
                let mut best = (err, current);
                for w in 0..=frame.max_width {
                    if w == current {
                        continue;
                    }
                    widths[i] = w;
                    let e = ev.evaluate(&widths).error;
                    if e < best.0 {
                        best = (e, w);
                    }
                }
                widths[i] = best.1;
                if best.1 != current {
                    err = best.0;
                    changed = true;
                }
            }
            sweep_errors.push(err);
            if !changed {
                break;
            }
        }
        restarts.push(RestartTrace { seed_widths: seed, sweep_errors, widths, error: err });
    }

    let mut best = (restarts[0].error, restarts[0].widths.clone());
    for r in &restarts[1..] {
        let cand = (r.error, r.widths.clone());
        if lexicographic_better(&cand, &best) {
            best = cand;
        }
    }
    let eval = ev.evaluate(&best.1);
    Ok(OptimizeResult { program: frame.program(&eval.up, &eval.down, t_syn)?, best: eval, restarts })
}

/// The reference ROM widths scored in the optimizer's model, both as
/// labeled and with the two sides exchanged (opposite output polarity).
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub as_labeled: Evaluation,
    pub swapped: Evaluation,
}

impl BaselineReport {
    /// The better of the two polarity readings.
    pub fn best(&self) -> &Evaluation {
        if self.swapped.error < self.as_labeled.error {
            &self.swapped
        } else {
            &self.as_labeled
        }
    }
}

pub fn baseline_comparison(
    spec: &ExcitationSpec,
    frame: &FrameModel,
    filter: &LcFilterSpec,
    t_syn: f64,
) -> Result<BaselineReport> {
    Ok(BaselineReport {
        as_labeled: evaluate_widths(spec, frame, filter, t_syn, &ROM_UP_WIDTHS, &ROM_DOWN_WIDTHS)?,
        swapped: evaluate_widths(spec, frame, filter, t_syn, &ROM_DOWN_WIDTHS, &ROM_UP_WIDTHS)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ExcitationSpec, FrameModel, LcFilterSpec, f64) {
        let spec = ExcitationSpec::hamming(200e3);
        (spec.clone(), FrameModel::default(), LcFilterSpec::for_center(200e3), 1.0 / (16.0 * 200e3))
    }

    #[test]
    fn default_slots_cover_middle_four_cycles() {
        let (up, down) = FrameModel::default().slots();
        assert_eq!(up, vec![2, 4, 6, 8]);
        assert_eq!(down, vec![1, 3, 5, 7]);
        let f = FrameModel::default();
        assert_eq!(f.pulse_start(2, 8), 16);
        assert_eq!(f.pulse_start(2, 7), 16);
        assert_eq!(f.pulse_start(2, 2), 19);
    }

    #[test]
    fn infeasible_frames_rejected() {
        let (spec, _, filter, t_syn) = setup();
        let too_wide = FrameModel { max_width: 9, ..FrameModel::default() };
        assert!(matches!(optimize_pulse_widths(&spec, &too_wide, &filter, t_syn), Err(Error::Config(_))));
        let narrow_carrier = FrameModel { ticks_per_cycle: 8, ..FrameModel::default() };
        let t8 = 1.0 / (8.0 * 200e3);
        assert!(matches!(optimize_pulse_widths(&spec, &narrow_carrier, &filter, t8), Err(Error::Config(_))));
        let too_many = FrameModel { pulses_per_side: 5, ..FrameModel::default() };
        assert!(matches!(optimize_pulse_widths(&spec, &too_many, &filter, t_syn), Err(Error::Config(_))));
        assert!(matches!(
            optimize_pulse_widths(&spec, &FrameModel::default(), &filter, t_syn * 2.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_amplitude_gives_zero_widths() {
        let (mut spec, frame, filter, t_syn) = setup();
        spec.amplitude_pp = 0.0;
        let r = optimize_pulse_widths(&spec, &frame, &filter, t_syn).unwrap();
        assert_eq!(r.best.error, 0.0);
        assert!(r.program.up_widths().iter().chain(&r.program.down_widths()).all(|&w| w == 0));
    }

    #[test]
    fn sweeps_never_increase_error() {
        let (spec, frame, filter, t_syn) = setup();
        let r = optimize_pulse_widths(&spec, &frame, &filter, t_syn).unwrap();
        assert_eq!(r.restarts.len(), RESTARTS);
        for rs in &r.restarts {
            for w in rs.sweep_errors.windows(2) {
                assert!(w[1] <= w[0]);
            }
        }
        assert!(r.program.up_widths().iter().chain(&r.program.down_widths()).all(|&w| w <= MAX_WIDTH));
    }

    #[test]
    fn result_is_a_coordinatewise_fixed_point() {
        let (spec, frame, filter, t_syn) = setup();
        let r = optimize_pulse_widths(&spec, &frame, &filter, t_syn).unwrap();
        let mut w: Vec<u8> = r.best.up.iter().chain(&r.best.down).copied().collect();
        for i in 0..w.len() {
            let keep = w[i];
            for cand in 0..=frame.max_width {
                w[i] = cand;
                let e = evaluate_widths(&spec, &frame, &filter, t_syn, &w[..4], &w[4..]).unwrap().error;
                assert!(e >= r.best.error - 1e-12, "slot {i} width {cand}: {e} < {}", r.best.error);
            }
            w[i] = keep;
        }
    }
}
