//! Pitch-catch measurement synthesis on a rectangular plate.
//!
//! One guided mode propagates along straight rays. A path of length `d`
//! scales the burst by `A(d) = exp(-alpha d) / sqrt(max(d, D_REF))` and
//! applies the mode's phase `exp(-j k(w) d)`: a pure delay for a constant
//! group velocity, or the dispersion curve's wavenumber otherwise. Damage
//! is an omnidirectional point scatterer with a real coefficient.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::dispersion::{DispersionCurve, Mode};
use crate::error::{Error, Result};
use crate::excitation::{reference_waveform, ExcitationSpec, Window};
use crate::keyvalue::KeyValueFile;
use crate::trace::SignalTrace;

/// Distance floor of the geometric spreading factor (m).
pub const D_REF: f64 = 0.01;
/// One foot, the side of the default square plate (m).
pub const DEFAULT_PLATE_SIDE: f64 = 0.3048;
pub const DEFAULT_SCATTER_COEFF: f64 = 0.3;

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Debug, Clone, PartialEq)]
pub enum VelocityModel {
    /// Non-dispersive propagation at this group velocity (m/s).
    Constant(f64),
    Curve(DispersionCurve),
}

impl VelocityModel {
    /// Group velocity used for time of flight at frequency `f`.
    pub fn group_velocity(&self, f: f64) -> Result<f64> {
        match self {
            VelocityModel::Constant(v) => Ok(*v),
            VelocityModel::Curve(c) => c.group_velocity_at(f).ok_or_else(|| {
                Error::Range(format!("{f} Hz is outside the dispersion curve ({}..{} Hz)", c.f_min(), c.f_max()))
            }),
        }
    }

    /// Wavenumber (rad/m) at signed frequency `f`; odd in `f`.
    fn wavenumber(&self, f: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f;
        match self {
            VelocityModel::Constant(v) => w / v,
            VelocityModel::Curve(c) => {
                if f == 0.0 {
                    0.0
                } else {
                    w / c.phase_velocity_hold(f.abs())
                }
            }
        }
    }

    /// Slowest group velocity within an octave around `f_center`, used to
    /// size the output so the delayed burst fits.
    fn slowest(&self, f_center: f64) -> f64 {
        match self {
            VelocityModel::Constant(v) => *v,
            VelocityModel::Curve(c) => {
                let band = c
                    .samples
                    .iter()
                    .filter(|s| (0.5 * f_center..=1.5 * f_center).contains(&s.frequency))
                    .map(|s| s.group_velocity);
                let v = band.fold(f64::INFINITY, f64::min);
                if v.is_finite() {
                    v
                } else {
                    c.samples.iter().map(|s| s.group_velocity).fold(f64::INFINITY, f64::min)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Damage {
    pub position: Point,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateScenario {
    pub width: f64,
    pub height: f64,
    pub transducers: Vec<Point>,
    pub damage: Option<Damage>,
    pub mode: Mode,
    pub velocity: VelocityModel,
    /// Exponential amplitude attenuation (1/m) on top of the spreading.
    pub attenuation_alpha: f64,
    pub excitation: ExcitationSpec,
    pub sample_rate: f64,
    /// Adds first-order edge echoes of the direct paths (mirror images).
    pub edge_echoes: bool,
}

fn field(name: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Validation { field: name.into(), message: message.into() }
}

impl PlateScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(field("plate.width_m", format!("must be > 0, got {}", self.width)));
        }
        if !(self.height.is_finite() && self.height > 0.0) {
            return Err(field("plate.height_m", format!("must be > 0, got {}", self.height)));
        }
        if self.transducers.len() < 2 {
            return Err(field("transducer", format!("need at least 2, got {}", self.transducers.len())));
        }
        let outside = |prefix: &str, p: Point| {
            let checks = [("x_m", p[0], self.width), ("y_m", p[1], self.height)];
            checks.into_iter().find(|&(_, v, side)| !(0.0..=side).contains(&v)).map(|(axis, v, side)| {
                field(format!("{prefix}.{axis}"), format!("{v} is outside the plate (0 to {side} m)"))
            })
        };
        for (i, &p) in self.transducers.iter().enumerate() {
            if let Some(err) = outside(&format!("transducer.{i}"), p) {
                return Err(err);
            }
        }
        if let Some(d) = &self.damage {
            if let Some(err) = outside("damage", d.position) {
                return Err(err);
            }
            if !(d.coeff.is_finite() && d.coeff.abs() <= 1.0) {
                return Err(field("damage.coeff", format!("|coeff| must be <= 1, got {}", d.coeff)));
            }
        }
        match &self.velocity {
            VelocityModel::Constant(v) if !(v.is_finite() && *v > 0.0) => {
                return Err(field("vg_mps", format!("must be > 0, got {v}")));
            }
            VelocityModel::Curve(c) if c.mode != self.mode => {
                return Err(field("dispersion_csv", format!("curve is {} but mode is {}", c.mode, self.mode)));
            }
            _ => {}
        }
        if !(self.attenuation_alpha.is_finite() && self.attenuation_alpha >= 0.0) {
            return Err(field("attenuation_alpha_per_m", "must be >= 0"));
        }
        self.excitation.validate().map_err(|e| field("excitation", e.to_string()))?;
        if !(self.sample_rate >= 20.0 * self.excitation.f_center) {
            return Err(field(
                "sample_rate_hz",
                format!("{} Hz is below 20x the excitation center frequency", self.sample_rate),
            ));
        }
        Ok(())
    }

    /// Reads the scenario keys from `kv`, leaving other keys in place.
    /// A relative `dispersion_csv` is resolved against `base_dir`.
    pub fn from_key_values(kv: &mut KeyValueFile, base_dir: Option<&Path>) -> Result<Self> {
        let width = kv.take("plate.width_m")?.unwrap_or(DEFAULT_PLATE_SIDE);
        let height = kv.take("plate.height_m")?.unwrap_or(DEFAULT_PLATE_SIDE);

        let mut coords: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
        for (key, line, value) in kv.take_prefixed("transducer.") {
            let parse_err = |message: String| Error::Parse { path: kv.source().into(), line, message };
            let rest = &key["transducer.".len()..];
            let (idx, axis) = rest
                .split_once('.')
                .ok_or_else(|| parse_err(format!("expected transducer.<i>.x_m or .y_m, got '{key}'")))?;
            let idx: usize = idx.parse().map_err(|_| parse_err(format!("bad transducer index in '{key}'")))?;
            let v: f64 = value.parse().map_err(|e| parse_err(format!("{key}: cannot parse '{value}': {e}")))?;
            if coords.len() <= idx {
                coords.resize(idx + 1, (0, None, None));
            }
            coords[idx].0 = idx;
            match axis {
                "x_m" => coords[idx].1 = Some(v),
                "y_m" => coords[idx].2 = Some(v),
                _ => return Err(parse_err(format!("unknown key '{key}'"))),
            }
        }
        let transducers = coords
            .iter()
            .enumerate()
            .map(|(i, c)| match (c.1, c.2) {
                (Some(x), Some(y)) => Ok([x, y]),
                _ => Err(field(format!("transducer.{i}"), "needs both x_m and y_m (indices must run from 0)")),
            })
            .collect::<Result<Vec<_>>>()?;

        let dx: Option<f64> = kv.take("damage.x_m")?;
        let dy: Option<f64> = kv.take("damage.y_m")?;
        let coeff: Option<f64> = kv.take("damage.coeff")?;
        let damage = match (dx, dy) {
            (Some(x), Some(y)) => Some(Damage { position: [x, y], coeff: coeff.unwrap_or(DEFAULT_SCATTER_COEFF) }),
            (None, None) if coeff.is_none() => None,
            _ => return Err(field("damage", "needs both x_m and y_m")),
        };

        let mode: Mode = kv.require("mode")?;
        let vg: Option<f64> = kv.take("vg_mps")?;
        let csv: Option<String> = kv.take("dispersion_csv")?;
        let velocity = match (vg, csv) {
            (Some(v), None) => VelocityModel::Constant(v),
            (None, Some(p)) => {
                let path = match base_dir {
                    Some(dir) if Path::new(&p).is_relative() => dir.join(&p),
                    _ => Path::new(&p).to_path_buf(),
                };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| field("dispersion_csv", format!("{}: {e}", path.display())))?;
                VelocityModel::Curve(DispersionCurve::from_csv(mode, &text)?)
            }
            _ => return Err(field("vg_mps", "give exactly one of vg_mps and dispersion_csv")),
        };

        let f_center: f64 = kv.require("excitation.fc_hz")?;
        let excitation = ExcitationSpec {
            f_center,
            n_cycles: kv.take("excitation.cycles")?.unwrap_or(5),
            amplitude_pp: kv.take("excitation.amplitude_vpp")?.unwrap_or(10.0),
            window: Window::Hamming,
        };
        let scenario = Self {
            width,
            height,
            transducers,
            damage,
            mode,
            velocity,
            attenuation_alpha: kv.take("attenuation_alpha_per_m")?.unwrap_or(0.0),
            excitation,
            sample_rate: kv.require("sample_rate_hz")?,
            edge_echoes: kv.take("edge_echoes")?.unwrap_or(false),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Parses a complete scenario file; unknown keys are errors.
    pub fn parse(text: &str, source: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut kv = KeyValueFile::parse(text, source)?;
        let s = Self::from_key_values(&mut kv, base_dir)?;
        kv.finish()?;
        Ok(s)
    }

    /// Group velocity at the excitation center frequency.
    pub fn imaging_velocity(&self) -> Result<f64> {
        self.velocity.group_velocity(self.excitation.f_center)
    }

    fn amplitude(&self, d: f64) -> f64 {
        (-self.attenuation_alpha * d).exp() / d.max(D_REF).sqrt()
    }

    /// Samples needed so a burst of `input_len` samples sent over `d`
    /// metres fits, with room for dispersive spreading.
    fn output_len(&self, input_len: usize, d: f64) -> usize {
        let v = self.velocity.slowest(self.excitation.f_center);
        2 * input_len + (d / v * self.sample_rate).ceil() as usize
    }
}

/// Time of flight between two points at the excitation's group velocity.
pub fn path_delay(scenario: &PlateScenario, from: Point, to: Point) -> Result<f64> {
    Ok(distance(from, to) / scenario.imaging_velocity()?)
}

struct Propagator {
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    n: usize,
}

impl Propagator {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { fft: planner.plan_fft_forward(n), ifft: planner.plan_fft_inverse(n), n }
    }

    fn spectrum(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(self.n, Complex64::new(0.0, 0.0));
        self.fft.process(&mut buf);
        buf
    }

    fn apply(&self, spectrum: &[Complex64], scenario: &PlateScenario, d: f64, out_len: usize) -> Vec<f64> {
        let n = self.n;
        let fs = scenario.sample_rate;
        let amp = scenario.amplitude(d) / n as f64;
        let mut buf: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(m, x)| {
                let f = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 } * fs / n as f64;
                x * Complex64::from_polar(amp, -scenario.velocity.wavenumber(f) * d)
            })
            .collect();
        self.ifft.process(&mut buf);
        buf.iter().take(out_len).map(|z| z.re).collect()
    }
}

fn propagate_to_len(trace: &SignalTrace, d: f64, scenario: &PlateScenario, out_len: usize) -> SignalTrace {
    let p = Propagator::new((2 * out_len.max(trace.len())).next_power_of_two());
    let spec = p.spectrum(&trace.samples);
    SignalTrace {
        sample_rate: trace.sample_rate,
        start_time: trace.start_time,
        samples: p.apply(&spec, scenario, d, out_len),
    }
}

/// Sends `trace` over `distance` metres of plate. The output starts at the
/// input's start time and is long enough to hold the arrival.
pub fn propagate(trace: &SignalTrace, distance: f64, scenario: &PlateScenario) -> Result<SignalTrace> {
    if !(trace.sample_rate >= 20.0 * scenario.excitation.f_center) {
        return Err(Error::Precondition(format!(
            "sample rate {} Hz is below 20x the center frequency {} Hz",
            trace.sample_rate, scenario.excitation.f_center
        )));
    }
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(Error::Domain(format!("distance must be >= 0, got {distance}")));
    }
    let scenario = PlateScenario { sample_rate: trace.sample_rate, ..scenario.clone() };
    Ok(propagate_to_len(trace, distance, &scenario, scenario.output_len(trace.len(), distance)))
}

/// Baseline and damaged recordings for every ordered transducer pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub pairs: Vec<(usize, usize)>,
    pub baseline: Vec<SignalTrace>,
    pub damaged: Vec<SignalTrace>,
    pub sample_rate: f64,
}

impl MeasurementSet {
    pub fn validate(&self) -> Result<()> {
        if self.baseline.len() != self.pairs.len() || self.damaged.len() != self.pairs.len() {
            return Err(Error::Input("measurement set needs one baseline and one damaged trace per pair".into()));
        }
        for ((tx, rx), (b, d)) in self.pairs.iter().zip(self.baseline.iter().zip(&self.damaged)) {
            if b.len() != d.len() || b.sample_rate != d.sample_rate || b.sample_rate != self.sample_rate {
                return Err(Error::Input(format!(
                    "pair {tx}->{rx}: baseline and damaged traces differ in length or rate"
                )));
            }
        }
        Ok(())
    }
}

fn mirror_images(p: Point, width: f64, height: f64) -> [Point; 4] {
    [[-p[0], p[1]], [2.0 * width - p[0], p[1]], [p[0], -p[1]], [p[0], 2.0 * height - p[1]]]
}

/// Synthesizes all ordered pairs (tx != rx) on a common time grid from 0.
pub fn synthesize_measurements(scenario: &PlateScenario, sample_rate: f64) -> Result<MeasurementSet> {
    let scenario = PlateScenario { sample_rate, ..scenario.clone() };
    scenario.validate()?;
    let excitation = reference_waveform(&scenario.excitation, sample_rate)?;
    let t = &scenario.transducers;
    let pairs: Vec<(usize, usize)> =
        (0..t.len()).flat_map(|i| (0..t.len()).filter(move |&j| j != i).map(move |j| (i, j))).collect();

    let direct_paths = |tx: usize, rx: usize| -> Vec<f64> {
        let mut paths = vec![distance(t[tx], t[rx])];
        if scenario.edge_echoes {
            paths.extend(mirror_images(t[tx], scenario.width, scenario.height).iter().map(|&m| distance(m, t[rx])));
        }
        paths
    };
    let scatter_path = |tx: usize, rx: usize| {
        scenario.damage.map(|d| (distance(t[tx], d.position) + distance(d.position, t[rx]), d.coeff))
    };

    let longest = pairs
        .iter()
        .flat_map(|&(tx, rx)| direct_paths(tx, rx).into_iter().chain(scatter_path(tx, rx).map(|p| p.0)))
        .fold(0.0, f64::max);
    let len = scenario.output_len(excitation.len(), longest);
    let prop = Propagator::new((2 * len).next_power_of_two());
    let spectrum = prop.spectrum(&excitation.samples);

    let mut baseline = Vec::with_capacity(pairs.len());
    let mut damaged = Vec::with_capacity(pairs.len());
    for &(tx, rx) in &pairs {
        let mut b = vec![0.0; len];
        for d in direct_paths(tx, rx) {
            let y = prop.apply(&spectrum, &scenario, d, len);
            b.iter_mut().zip(y).for_each(|(acc, v)| *acc += v);
        }
        let mut dmg = b.clone();
        if let Some((d, coeff)) = scatter_path(tx, rx) {
            if coeff != 0.0 {
                let y = prop.apply(&spectrum, &scenario, d, len);
                dmg.iter_mut().zip(y).for_each(|(acc, v)| *acc += coeff * v);
            }
        }
        baseline.push(SignalTrace { sample_rate, start_time: 0.0, samples: b });
        damaged.push(SignalTrace { sample_rate, start_time: 0.0, samples: dmg });
    }
    Ok(MeasurementSet { pairs, baseline, damaged, sample_rate })
}
