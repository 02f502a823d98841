//! Baseline subtraction, envelope detection and delay-and-sum imaging.

use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::excitation::{reference_waveform, ExcitationSpec};
use crate::numfmt::fmt_sig9;
use crate::plate::{distance, MeasurementSet, PlateScenario, Point, D_REF};
use crate::receiver::{magnitude_phase, quadrature_demod, ReceiverConfig};
use crate::trace::SignalTrace;

/// Default imaging pixel pitch (m).
pub const DEFAULT_GRID_SPACING: f64 = 0.005;

/// `damaged - baseline` for every pair, in pair order.
pub fn baseline_subtract(set: &MeasurementSet) -> Result<Vec<SignalTrace>> {
    set.validate()?;
    Ok(set
        .baseline
        .iter()
        .zip(&set.damaged)
        .map(|(b, d)| SignalTrace {
            sample_rate: d.sample_rate,
            start_time: d.start_time,
            samples: d.samples.iter().zip(&b.samples).map(|(x, y)| x - y).collect(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeMethod {
    /// `|x + j H{x}|` from the FFT analytic signal.
    Analytic,
    /// Magnitude of the receiver's I/Q output with the LO at `f_center`,
    /// noise off and unity gains (LNA, mixer and PGA).
    IqDemod { f_center: f64 },
}

impl EnvelopeMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EnvelopeMethod::Analytic => "analytic",
            EnvelopeMethod::IqDemod { .. } => "iq_demod",
        }
    }
}

/// Non-negative envelope of `trace`, same length and time base.
pub fn envelope(trace: &SignalTrace, method: EnvelopeMethod) -> Result<SignalTrace> {
    let samples = match method {
        EnvelopeMethod::Analytic => analytic_magnitude(&trace.samples),
        EnvelopeMethod::IqDemod { f_center } => {
            // an ideal unity LNA and PGA pass the trace through unchanged,
            // so only the mixer and baseband filters act
            let cfg = ReceiverConfig { mixer_loss_db: 0.0, ..ReceiverConfig::new(f_center) };
            let (mag, _) = magnitude_phase(&quadrature_demod(trace, &cfg)?);
            // a real tone A cos splits evenly between +f and -f, so the
            // baseband magnitude is A/2
            mag.samples.iter().map(|m| 2.0 * m).collect()
        }
    };
    Ok(SignalTrace { sample_rate: trace.sample_rate, start_time: trace.start_time, samples })
}

fn analytic_magnitude(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let nyquist = n.is_multiple_of(2).then_some(n / 2);
    for (m, z) in buf.iter_mut().enumerate() {
        let w = if m == 0 || Some(m) == nyquist {
            1.0
        } else if m < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *z *= w / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.norm()).collect()
}

/// Time at which the envelope of the excitation burst peaks, measured with
/// the same method used on the residuals so detector delays cancel.
pub fn envelope_peak_time(excitation: &ExcitationSpec, sample_rate: f64, method: EnvelopeMethod) -> Result<f64> {
    let burst = reference_waveform(excitation, sample_rate)?;
    // room for the baseband filter's delay and ring-down
    let padded = burst.resized(2 * burst.len());
    let env = envelope(&padded, method)?;
    let peak = env.argmax_abs().ok_or_else(|| Error::Input("empty excitation".into()))?;
    Ok(env.time(peak))
}

/// Pixel-center lattice: pixel `(ix, iy)` sits at `origin + spacing (ix, iy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub origin: Point,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Smallest grid from the origin that reaches every edge of a
    /// `width x height` plate.
    pub fn covering(width: f64, height: f64, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Validation {
                field: "grid.spacing_m".into(),
                message: format!("must be > 0, got {spacing}"),
            });
        }
        let count = |side: f64| (side / spacing - 1e-9).ceil().max(0.0) as usize + 1;
        Ok(Self { origin: [0.0, 0.0], spacing, nx: count(width), ny: count(height) })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::Validation { field: "grid.spacing_m".into(), message: "must be > 0".into() });
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Validation { field: "grid".into(), message: "needs at least one pixel".into() });
        }
        Ok(())
    }

    pub fn center(&self, ix: usize, iy: usize) -> Point {
        [self.origin[0] + ix as f64 * self.spacing, self.origin[1] + iy as f64 * self.spacing]
    }
}

/// Delay-and-sum intensities, row-major with `iy` as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct DamageMap {
    pub grid: GridSpec,
    pub intensity: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub x: f64,
    pub y: f64,
    pub intensity: f64,
    pub ix: usize,
    pub iy: usize,
}

impl DamageMap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.intensity[iy * self.grid.nx + ix]
    }

    pub fn max(&self) -> f64 {
        self.intensity.iter().cloned().fold(0.0, f64::max)
    }

    /// CSV `x_m,y_m,intensity`, one row per pixel in row-major order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_m,y_m,intensity\n");
        for iy in 0..self.grid.ny {
            for ix in 0..self.grid.nx {
                let [x, y] = self.grid.center(ix, iy);
                let _ = writeln!(out, "{},{},{}", fmt_sig9(x), fmt_sig9(y), fmt_sig9(self.at(ix, iy)));
            }
        }
        out
    }

    /// Binary 8-bit PGM, north up (first image row is the largest y),
    /// linearly quantized from `[0, max]`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let GridSpec { nx, ny, .. } = self.grid;
        let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
        let max = self.max();
        for iy in (0..ny).rev() {
            for ix in 0..nx {
                let v = if max > 0.0 { (255.0 * self.at(ix, iy) / max).round() } else { 0.0 };
                out.push(v.clamp(0.0, 255.0) as u8);
            }
        }
        out
    }
}

/// Inputs of the imaging step besides the envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct DasGeometry<'a> {
    pub transducers: &'a [Point],
    pub pairs: &'a [(usize, usize)],
    /// Imaging group velocity (m/s).
    pub group_velocity: f64,
    /// Offset added to every pixel time (s).
    pub t0: f64,
    /// Multiply each envelope sample by `sqrt(path)` to undo geometric spreading.
    pub path_compensation: bool,
}

/// Sums each pair's envelope at the pixel's tx-pixel-rx travel time plus
/// `t0`, then normalizes to a maximum of one.
pub fn das_map(geometry: &DasGeometry<'_>, envelopes: &[SignalTrace], grid: &GridSpec) -> Result<DamageMap> {
    grid.validate()?;
    if geometry.pairs.is_empty() {
        return Err(Error::Input("delay-and-sum needs at least one transducer pair".into()));
    }
    if envelopes.len() != geometry.pairs.len() {
        return Err(Error::Input(format!("{} envelopes for {} pairs", envelopes.len(), geometry.pairs.len())));
    }
    let vg = geometry.group_velocity;
    if !(vg.is_finite() && vg > 0.0) {
        return Err(Error::Domain(format!("group velocity must be > 0, got {vg}")));
    }
    let n = geometry.transducers.len();
    if let Some(&(tx, rx)) = geometry.pairs.iter().find(|&&(tx, rx)| tx >= n || rx >= n) {
        return Err(Error::Input(format!("pair {tx}->{rx} names a missing transducer")));
    }

    let mut intensity = vec![0.0; grid.nx * grid.ny];
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let p = grid.center(ix, iy);
            let mut acc = 0.0;
            for (&(tx, rx), env) in geometry.pairs.iter().zip(envelopes) {
                let path = distance(geometry.transducers[tx], p) + distance(p, geometry.transducers[rx]);
                let mut v = env.value_at(path / vg + geometry.t0);
                if geometry.path_compensation {
                    v *= path.max(D_REF).sqrt();
                }
                acc += v;
            }
            intensity[iy * grid.nx + ix] = acc;
        }
    }
    let max = intensity.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        intensity.iter_mut().for_each(|v| *v /= max);
    }
    Ok(DamageMap { grid: *grid, intensity })
}

/// Brightest pixel (first in row-major order on ties), or `None` when the
/// map is all zero.
pub fn locate(map: &DamageMap) -> Result<Option<Location>> {
    if map.intensity.is_empty() {
        return Err(Error::Input("damage map has no pixels".into()));
    }
    let mut best = 0;
    for (k, &v) in map.intensity.iter().enumerate() {
        if v > map.intensity[best] {
            best = k;
        }
    }
    let peak = map.intensity[best];
    if !(peak > 0.0) {
        return Ok(None);
    }
    let (ix, iy) = (best % map.grid.nx, best / map.grid.nx);
    let [x, y] = map.grid.center(ix, iy);
    Ok(Some(Location { x, y, intensity: peak, ix, iy }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImagingOptions {
    pub method: EnvelopeMethod,
    pub grid: GridSpec,
    pub path_compensation: bool,
}

impl ImagingOptions {
    /// Analytic envelopes on a 5 mm grid over the scenario's plate.
    pub fn for_scenario(scenario: &PlateScenario) -> Result<Self> {
        Ok(Self {
            method: EnvelopeMethod::Analytic,
            grid: GridSpec::covering(scenario.width, scenario.height, DEFAULT_GRID_SPACING)?,
            path_compensation: false,
        })
    }
}

/// Residual envelopes and the resulting map for a measurement set.
#[derive(Debug, Clone, PartialEq)]
pub struct Imaging {
    pub residuals: Vec<SignalTrace>,
    pub envelopes: Vec<SignalTrace>,
    pub t0: f64,
    pub map: DamageMap,
}

/// Baseline subtraction, envelopes and delay-and-sum over all pairs of `set`.
pub fn image(scenario: &PlateScenario, set: &MeasurementSet, options: &ImagingOptions) -> Result<Imaging> {
    let residuals = baseline_subtract(set)?;
    let envelopes = residuals.iter().map(|r| envelope(r, options.method)).collect::<Result<Vec<_>>>()?;
    let t0 = envelope_peak_time(&scenario.excitation, set.sample_rate, options.method)?;
    let geometry = DasGeometry {
        transducers: &scenario.transducers,
        pairs: &set.pairs,
        group_velocity: scenario.imaging_velocity()?,
        t0,
        path_compensation: options.path_compensation,
    };
    let map = das_map(&geometry, &envelopes, &options.grid)?;
    Ok(Imaging { residuals, envelopes, t0, map })
}
