//! Receive chain: LNA, quadrature mixer with baseband low-pass, PGA and
//! auto-zeroing, plus magnitude/phase reconstruction.
//!
//! Differential pairs are folded into one signed value per node; the
//! common-mode voltage is carried as metadata only.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_finite, Error, Result};
use crate::filter::{Biquad, OnePole};
use crate::numfmt::fmt_sig9;
use crate::trace::{IqTrace, SignalTrace};

/// Largest code of each 5-bit PGA bias DAC.
pub const PGA_CODE_MAX: u8 = 31;

/// Noise stream ids; the RST phase draws from its own stream.
const STREAM_LNA_OPER: u64 = 1;
const STREAM_LNA_RST: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub lna_gain_db: f64,
    /// LNA -3 dB bandwidth (Hz).
    pub lna_bw: f64,
    /// Input-referred noise density (V/sqrt(Hz), one-sided).
    pub lna_noise_psd: f64,
    /// Input amplitude (V) up to which the LNA is exactly linear.
    pub lna_linear_range: f64,
    pub mixer_loss_db: f64,
    pub f_lo: f64,
    pub lpf_cutoff: f64,
    pub pga_ibias1: f64,
    pub pga_ibias2: f64,
    pub v_cm: f64,
    /// Static input-referred offset (V).
    pub offset_in: f64,
    pub seed: u64,
}

impl ReceiverConfig {
    /// Defaults with the LO at `f_lo` and the baseband cutoff at `0.4 f_lo`.
    pub fn new(f_lo: f64) -> Self {
        Self {
            lna_gain_db: 21.6,
            lna_bw: 4.3e6,
            lna_noise_psd: 21e-9,
            lna_linear_range: 0.06,
            mixer_loss_db: -4.0,
            f_lo,
            lpf_cutoff: 0.4 * f_lo,
            pga_ibias1: 1e-6,
            pga_ibias2: 1e-6,
            v_cm: 1.3,
            offset_in: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lna_gain_db", self.lna_gain_db),
            ("lna_noise_psd", self.lna_noise_psd),
            ("mixer_loss_db", self.mixer_loss_db),
            ("pga_ibias1", self.pga_ibias1),
            ("v_cm", self.v_cm),
            ("offset_in", self.offset_in),
        ];
        for (name, v) in fields {
            ensure_finite(name, v)?;
        }
        let positive = [
            ("lna_bw", self.lna_bw),
            ("lna_linear_range", self.lna_linear_range),
            ("f_lo", self.f_lo),
            ("lpf_cutoff", self.lpf_cutoff),
            ("pga_ibias2", self.pga_ibias2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation { field: name.into(), message: format!("must be > 0, got {v}") });
            }
        }
        if self.mixer_loss_db > 0.0 {
            return Err(Error::Validation {
                field: "mixer_loss_db".into(),
                message: format!("a passive mixer cannot have gain ({} dB)", self.mixer_loss_db),
            });
        }
        if self.lna_noise_psd < 0.0 {
            return Err(Error::Validation { field: "lna_noise_psd".into(), message: "must be >= 0".into() });
        }
        Ok(())
    }

    pub fn lna_gain(&self) -> f64 {
        10f64.powf(self.lna_gain_db / 20.0)
    }

    pub fn mixer_loss(&self) -> f64 {
        10f64.powf(self.mixer_loss_db / 20.0)
    }

    /// Input-referred offset as it appears on each baseband channel.
    fn baseband_offset(&self) -> f64 {
        self.offset_in * self.lna_gain() * self.mixer_loss()
    }
}

/// LNA compression: exactly linear up to `limit`, then a cubic knee with
/// continuous slope that flattens at `limit + 2/3 limit`.
pub fn saturate(x: f64, limit: f64) -> f64 {
    let a = x.abs();
    if a <= limit {
        return x;
    }
    let w = limit;
    let d = (a - limit).min(w);
    (limit + d - d * d * d / (3.0 * w * w)).copysign(x)
}

/// Thermal noise of the LNA as seen after its pole: white noise of
/// two-sided density `psd^2 / 2` through the single pole, discretized
/// exactly (a first-order autoregression with the pole's stationary
/// variance `psd^2 * pi/2 * f_3db`).
fn lna_noise(config: &ReceiverConfig, sample_rate: f64, len: usize, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);
    let a = (-2.0 * PI * config.lna_bw / sample_rate).exp();
    let var = config.lna_noise_psd.powi(2) * PI / 2.0 * config.lna_bw;
    let drive = (var * (1.0 - a * a)).sqrt();
    let z0: f64 = StandardNormal.sample(&mut rng);
    let mut n = var.sqrt() * z0;
    (0..len)
        .map(|_| {
            let out = n;
            let z: f64 = StandardNormal.sample(&mut rng);
            n = a * n + drive * z;
            out
        })
        .collect()
}

fn lna_with_stream(trace: &SignalTrace, config: &ReceiverConfig, noise_on: bool, stream: u64) -> Result<SignalTrace> {
    config.validate()?;
    if !(trace.sample_rate >= 4.0 * config.lna_bw) {
        return Err(Error::Precondition(format!(
            "sample rate {} Hz is below 4x the LNA bandwidth {} Hz",
            trace.sample_rate, config.lna_bw
        )));
    }
    let g = config.lna_gain();
    let mut pole = OnePole::new(config.lna_bw, trace.sample_rate);
    let mut out: Vec<f64> =
        trace.samples.iter().map(|&x| pole.step(g * saturate(x, config.lna_linear_range))).collect();
    if noise_on && config.lna_noise_psd > 0.0 {
        let noise = lna_noise(config, trace.sample_rate, out.len(), stream);
        out.iter_mut().zip(noise).for_each(|(y, n)| *y += g * n);
    }
    Ok(SignalTrace { sample_rate: trace.sample_rate, start_time: trace.start_time, samples: out })
}

/// LNA: compression, gain and the single bandwidth pole, plus optional
/// input-referred thermal noise drawn from the config's seed.
pub fn lna_stage(trace: &SignalTrace, config: &ReceiverConfig, noise_on: bool) -> Result<SignalTrace> {
    lna_with_stream(trace, config, noise_on, STREAM_LNA_OPER)
}

/// Zero-IF quadrature downconversion: `i = loss x cos`, `q = -loss x sin`,
/// each through the second-order Butterworth baseband low-pass.
///
/// The static offset enters here, ahead of the baseband filters, where the
/// auto-zero loops act; the filters start in the steady state for it.
pub fn quadrature_demod(trace: &SignalTrace, config: &ReceiverConfig) -> Result<IqTrace> {
    config.validate()?;
    if !(trace.sample_rate >= 4.0 * config.f_lo) {
        return Err(Error::Precondition(format!(
            "sample rate {} Hz is below 4x the LO frequency {} Hz",
            trace.sample_rate, config.f_lo
        )));
    }
    let loss = config.mixer_loss();
    let offset = config.baseband_offset();
    let mut fi = Biquad::butterworth(config.lpf_cutoff, trace.sample_rate);
    let mut fq = fi;
    fi.settle_to(offset);
    fq.settle_to(offset);
    let w = 2.0 * PI * config.f_lo;
    let samples = trace
        .samples
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let (s, c) = (w * trace.time(k)).sin_cos();
            Complex64::new(fi.step(loss * x * c + offset), fq.step(-loss * x * s + offset))
        })
        .collect();
    Ok(IqTrace { sample_rate: trace.sample_rate, start_time: trace.start_time, samples })
}

/// DAC codes `(code1, code2)` whose ratio is nearest `ratio`; ties go to
/// the smaller gain, then to the smaller codes.
pub fn pga_codes(ratio: f64) -> Result<(u8, u8)> {
    let max = PGA_CODE_MAX as f64;
    if !(ratio.is_finite() && (1.0 / max..=max).contains(&ratio)) {
        return Err(Error::Range(format!("PGA gain {ratio} is outside [1/31, 31]")));
    }
    let mut best = (1u8, 1u8);
    let mut best_err = f64::INFINITY;
    for b in 1..=PGA_CODE_MAX {
        for a in 1..=PGA_CODE_MAX {
            let g = a as f64 / b as f64;
            let err = (g - ratio).abs();
            let g_best = best.0 as f64 / best.1 as f64;
            if err < best_err || (err == best_err && (g < g_best || (g == g_best && (a, b) < best))) {
                best = (a, b);
                best_err = err;
            }
        }
    }
    Ok(best)
}

/// Gain actually realized for the configured bias ratio.
pub fn pga_gain(config: &ReceiverConfig) -> Result<f64> {
    if !(config.pga_ibias2 > 0.0) {
        return Err(Error::Validation { field: "pga_ibias2".into(), message: "must be > 0".into() });
    }
    let (a, b) = pga_codes(config.pga_ibias1 / config.pga_ibias2)?;
    Ok(a as f64 / b as f64)
}

pub fn pga_stage(iq: &IqTrace, config: &ReceiverConfig) -> Result<IqTrace> {
    Ok(iq.scaled(pga_gain(config)?))
}

/// LNA, mixer and PGA in sequence.
pub fn receive(trace: &SignalTrace, config: &ReceiverConfig, noise_on: bool) -> Result<IqTrace> {
    let lna = lna_stage(trace, config, noise_on)?;
    pga_stage(&quadrature_demod(&lna, config)?, config)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoZeroResult {
    pub output: IqTrace,
    /// DC measured during the RST phase and removed from the output.
    pub dc_estimate: Complex64,
}

/// Two-phase measurement: a RST phase of `rst_duration` with the input
/// forced to zero, then the OPER phase on `input`. The OPER output minus the
/// mean RST output is returned. Noise is drawn independently per phase.
pub fn auto_zero(
    input: &SignalTrace,
    config: &ReceiverConfig,
    noise_on: bool,
    rst_duration: f64,
) -> Result<AutoZeroResult> {
    config.validate()?;
    if !(rst_duration >= 10.0 / config.lpf_cutoff) {
        return Err(Error::Precondition(format!(
            "RST segment {rst_duration} s is shorter than 10/lpf_cutoff = {} s",
            10.0 / config.lpf_cutoff
        )));
    }
    let n_rst = (rst_duration * input.sample_rate).ceil() as usize;
    let rst_in = SignalTrace::zeros(input.sample_rate, input.start_time - rst_duration, n_rst);
    let rst =
        pga_stage(&quadrature_demod(&lna_with_stream(&rst_in, config, noise_on, STREAM_LNA_RST)?, config)?, config)?;
    let dc = rst.samples.iter().sum::<Complex64>() / n_rst as f64;
    let mut output = receive(input, config, noise_on)?;
    output.samples.iter_mut().for_each(|z| *z -= dc);
    Ok(AutoZeroResult { output, dc_estimate: dc })
}

/// Per-sample magnitude and unwrapped phase.
pub fn magnitude_phase(iq: &IqTrace) -> (SignalTrace, SignalTrace) {
    let mag = iq.samples.iter().map(|z| z.norm()).collect();
    let mut phase = Vec::with_capacity(iq.len());
    let mut prev: Option<f64> = None;
    for z in &iq.samples {
        let raw = z.arg();
        let p = match prev {
            None => raw,
            Some(last) => raw + 2.0 * PI * ((last - raw) / (2.0 * PI)).round(),
        };
        phase.push(p);
        prev = Some(p);
    }
    let wrap = |samples| SignalTrace { sample_rate: iq.sample_rate, start_time: iq.start_time, samples };
    (wrap(mag), wrap(phase))
}

/// CSV with header `time_s,mag_v,phase_rad`.
pub fn magnitude_phase_csv(magnitude: &SignalTrace, phase: &SignalTrace) -> String {
    let mut out = String::from("time_s,mag_v,phase_rad\n");
    for (k, (m, p)) in magnitude.samples.iter().zip(&phase.samples).enumerate() {
        out.push_str(&format!("{},{},{}\n", fmt_sig9(magnitude.time(k)), fmt_sig9(*m), fmt_sig9(*p)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturator_is_continuous_and_bounded() {
        let l = 0.06;
        assert_eq!(saturate(0.05, l), 0.05);
        assert!((saturate(l + 1e-12, l) - l).abs() < 1e-11);
        let top = l + 2.0 * l / 3.0;
        assert!((saturate(2.0 * l, l) - top).abs() < 1e-15);
        assert!((saturate(-5.0, l) + top).abs() < 1e-15);
    }

    #[test]
    fn noise_streams_differ_and_repeat() {
        let cfg = ReceiverConfig::new(200e3);
        let a = lna_noise(&cfg, 25.6e6, 64, STREAM_LNA_OPER);
        let b = lna_noise(&cfg, 25.6e6, 64, STREAM_LNA_OPER);
        let c = lna_noise(&cfg, 25.6e6, 64, STREAM_LNA_RST);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
