//! Transmit excitation: the windowed reference burst, the differential PWM
//! output stage, the off-chip LC low-pass and the pulse-width optimizer.

mod optimize;
mod pwm;

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

pub use optimize::{
    baseline_comparison, evaluate_widths, optimize_pulse_widths, BaselineReport, FrameModel, OptimizeResult, RESTARTS,
    ROM_DOWN_WIDTHS, ROM_UP_WIDTHS,
};
pub use pwm::{pwm_waveform, pwm_waveform_with_len, Pulse, PwmProgram, DEFAULT_RAIL, MAX_WIDTH};

use crate::error::{Error, Result};
use crate::filter::Biquad;
use crate::trace::SignalTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hamming,
    Hann,
    Rect,
}

impl Window {
    /// Window weight at normalized burst position `u` in [0, 1].
    pub fn weight(self, u: f64) -> f64 {
        match self {
            Window::Hamming => 0.54 - 0.46 * (2.0 * PI * u).cos(),
            Window::Hann => 0.5 - 0.5 * (2.0 * PI * u).cos(),
            Window::Rect => 1.0,
        }
    }
}

/// Tone-burst excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationSpec {
    pub f_center: f64,
    pub n_cycles: u32,
    /// Peak-to-peak amplitude (V).
    pub amplitude_pp: f64,
    pub window: Window,
}

impl ExcitationSpec {
    /// Five-cycle Hamming burst, 10 V peak-to-peak.
    pub fn hamming(f_center: f64) -> Self {
        Self { f_center, n_cycles: 5, amplitude_pp: 10.0, window: Window::Hamming }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_center.is_finite() && self.f_center > 0.0) {
            return Err(Error::Domain(format!("f_center must be > 0, got {}", self.f_center)));
        }
        if self.n_cycles < 1 {
            return Err(Error::Domain("n_cycles must be >= 1".into()));
        }
        if !(self.amplitude_pp.is_finite() && self.amplitude_pp >= 0.0) {
            return Err(Error::Domain(format!("amplitude_pp must be >= 0, got {}", self.amplitude_pp)));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.n_cycles as f64 / self.f_center
    }

    /// Burst value at time `t` (zero outside `[0, duration]`).
    pub fn value_at(&self, t: f64) -> f64 {
        let dur = self.duration();
        if !(0.0..=dur).contains(&t) {
            return 0.0;
        }
        0.5 * self.amplitude_pp * self.window.weight(t / dur) * (2.0 * PI * self.f_center * t).sin()
    }

    /// Envelope `(amplitude_pp / 2) * w(t)` of the burst.
    pub fn envelope_at(&self, t: f64) -> f64 {
        let dur = self.duration();
        if !(0.0..=dur).contains(&t) {
            return 0.0;
        }
        0.5 * self.amplitude_pp * self.window.weight(t / dur)
    }
}

/// Samples the reference burst from t = 0 through its last zero crossing.
pub fn reference_waveform(spec: &ExcitationSpec, sample_rate: f64) -> Result<SignalTrace> {
    spec.validate()?;
    if !(sample_rate >= 20.0 * spec.f_center) {
        return Err(Error::Precondition(format!(
            "sample rate {sample_rate} Hz is below 20x the center frequency {} Hz",
            spec.f_center
        )));
    }
    let n = (spec.duration() * sample_rate + 1e-9).floor() as usize + 1;
    let samples = (0..n).map(|i| spec.value_at(i as f64 / sample_rate)).collect();
    SignalTrace::new(sample_rate, 0.0, samples)
}

/// Second-order LC low-pass; the capacitance is the transducer's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcFilterSpec {
    pub f_cutoff: f64,
    pub q_factor: f64,
}

impl LcFilterSpec {
    /// Butterworth at 1.5x the burst center frequency.
    pub fn for_center(f_center: f64) -> Self {
        Self { f_cutoff: 1.5 * f_center, q_factor: FRAC_1_SQRT_2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_cutoff.is_finite() && self.f_cutoff > 0.0 && self.q_factor.is_finite() && self.q_factor > 0.0) {
            return Err(Error::Domain(format!(
                "LC filter needs f_cutoff > 0 and Q > 0, got {} Hz, Q={}",
                self.f_cutoff, self.q_factor
            )));
        }
        Ok(())
    }

    pub fn biquad(&self, sample_rate: f64) -> Biquad {
        Biquad::lowpass(self.f_cutoff, self.q_factor, sample_rate)
    }
}

/// Runs `trace` through the LC low-pass from rest. Output has the input's
/// length and time base.
pub fn apply_lc_filter(trace: &SignalTrace, filter: &LcFilterSpec) -> Result<SignalTrace> {
    filter.validate()?;
    if !(trace.sample_rate >= 10.0 * filter.f_cutoff) {
        return Err(Error::Precondition(format!(
            "sample rate {} Hz is below 10x the LC cutoff {} Hz",
            trace.sample_rate, filter.f_cutoff
        )));
    }
    let mut bq = filter.biquad(trace.sample_rate);
    Ok(SignalTrace { sample_rate: trace.sample_rate, start_time: trace.start_time, samples: bq.run(&trace.samples) })
}

/// Complex `f0` Fourier coefficient over the longest whole number of
/// periods at the start of the trace: `2/N * sum x[n] exp(-j 2 pi f0 t[n])`.
pub fn fundamental_phasor(trace: &SignalTrace, f0: f64) -> Result<Complex64> {
    if !(f0.is_finite() && f0 > 0.0) {
        return Err(Error::Domain(format!("f0 must be > 0, got {f0}")));
    }
    let periods = (trace.duration() * f0 + 1e-9).floor();
    if periods < 3.0 {
        return Err(Error::Precondition(format!(
            "trace spans {:.3} periods of {f0} Hz, need at least 3",
            trace.duration() * f0
        )));
    }
    let n = ((periods / f0) * trace.sample_rate).round() as usize;
    let n = n.min(trace.len());
    let w = 2.0 * PI * f0;
    let acc: Complex64 =
        trace.samples[..n].iter().enumerate().map(|(i, &x)| x * Complex64::from_polar(1.0, -w * trace.time(i))).sum();
    Ok(acc * (2.0 / n as f64))
}

/// Zero-to-peak amplitude of the `f0` component.
pub fn fundamental_amplitude(trace: &SignalTrace, f0: f64) -> Result<f64> {
    fundamental_phasor(trace, f0).map(|z| z.norm())
}
