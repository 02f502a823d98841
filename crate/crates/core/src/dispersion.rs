//! Rayleigh-Lamb dispersion of the fundamental S0 and A0 plate modes.
//!
//! With `h = d/2`, `k = w/cp`, `p^2 = w^2/cL^2 - k^2` and `q^2 = w^2/cT^2 - k^2`
//! the characteristic equations are
//!
//! ```text
//! symmetric:      tan(qh)/tan(ph) = -4 k^2 p q / (q^2 - k^2)^2
//! antisymmetric:  tan(qh)/tan(ph) = -(q^2 - k^2)^2 / (4 k^2 p q)
//! ```
//!
//! They are evaluated in pole-free product form, written in terms of the
//! even entire functions `cos x`, `sin(x)/x` and `x sin x` of `x^2`, so the
//! residual stays real and continuous when `p` or `q` turns imaginary
//! (`cp < cL`, `cp < cT`). Imaginary-argument factors are divided by
//! `cosh`, which keeps the residual finite at large `f d` and leaves its
//! sign untouched.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_finite, Error, Result};
use crate::numfmt::fmt_sig9;

/// Sign-scan resolution of the phase-velocity root search.
pub const SCAN_STEPS: usize = 2000;
/// Lower end of the phase-velocity scan (m/s).
pub const SCAN_CP_MIN: f64 = 1.0;
/// Upper end of the scan as a multiple of the longitudinal velocity.
pub const SCAN_CP_MAX_FACTOR: f64 = 1.2;

pub const CSV_HEADER: &str = "frequency_hz,phase_velocity_mps,group_velocity_mps,wavenumber_radpm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    S0,
    A0,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::S0 => "S0",
            Mode::A0 => "A0",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S0" => Ok(Mode::S0),
            "A0" => Ok(Mode::A0),
            other => Err(Error::Input(format!("unknown mode '{other}' (expected S0 or A0)"))),
        }
    }
}

/// Isotropic elastic plate.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialPlate {
    pub name: String,
    /// Longitudinal bulk velocity (m/s).
    pub cl: f64,
    /// Shear bulk velocity (m/s).
    pub ct: f64,
    /// Plate thickness (m).
    pub thickness: f64,
}

impl MaterialPlate {
    pub fn new(name: impl Into<String>, cl: f64, ct: f64, thickness: f64) -> Result<Self> {
        for (n, v) in [("cL", cl), ("cT", ct), ("thickness", thickness)] {
            ensure_finite(n, v)?;
        }
        if !(cl > ct && ct > 0.0) {
            return Err(Error::Domain(format!("need cL > cT > 0, got cL={cl}, cT={ct}")));
        }
        if thickness <= 0.0 {
            return Err(Error::Domain(format!("thickness must be > 0, got {thickness}")));
        }
        Ok(Self { name: name.into(), cl, ct, thickness })
    }

    /// Textbook aluminum, cL = 6320 m/s, cT = 3130 m/s.
    pub fn aluminum(thickness: f64) -> Self {
        Self::new("aluminum", 6320.0, 3130.0, thickness).expect("valid aluminum constants")
    }

    /// Low-frequency S0 (plate) velocity `2 cT sqrt(1 - cT^2/cL^2)`.
    pub fn plate_velocity(&self) -> f64 {
        2.0 * self.ct * (1.0 - (self.ct / self.cl).powi(2)).sqrt()
    }

    pub fn poisson_ratio(&self) -> f64 {
        let r2 = (self.cl / self.ct).powi(2);
        (r2 - 2.0) / (2.0 * (r2 - 1.0))
    }
}

/// `cos x` for `x^2 = x2`, divided by `cosh|x|` when x is imaginary.
fn cos_scaled(x2: f64) -> f64 {
    if x2 >= 0.0 {
        x2.sqrt().cos()
    } else {
        1.0
    }
}

/// `sin(x)/x`, with the same scaling as [`cos_scaled`].
fn sinc_scaled(x2: f64) -> f64 {
    if x2 >= 0.0 {
        let x = x2.sqrt();
        if x < 1e-8 {
            1.0 - x2 / 6.0
        } else {
            x.sin() / x
        }
    } else {
        let y = (-x2).sqrt();
        if y < 1e-8 {
            1.0 - x2 / 6.0
        } else {
            y.tanh() / y
        }
    }
}

/// `x sin x`, with the same scaling as [`cos_scaled`].
fn xsin_scaled(x2: f64) -> f64 {
    if x2 >= 0.0 {
        let x = x2.sqrt();
        x * x.sin()
    } else {
        let y = (-x2).sqrt();
        -y * y.tanh()
    }
}

/// The two terms whose sum is the (unnormalized) residual.
fn residual_terms(mode: Mode, frequency: f64, cp: f64, plate: &MaterialPlate) -> (f64, f64) {
    let h = plate.thickness / 2.0;
    let wh = 2.0 * PI * frequency * h;
    let kk = (wh / cp).powi(2);
    let pp = (wh / plate.cl).powi(2) - kk;
    let qq = (wh / plate.ct).powi(2) - kk;
    let d2 = (qq - kk).powi(2);
    match mode {
        Mode::S0 => (d2 * sinc_scaled(qq) * cos_scaled(pp), 4.0 * kk * xsin_scaled(pp) * cos_scaled(qq)),
        Mode::A0 => (4.0 * kk * xsin_scaled(qq) * cos_scaled(pp), d2 * sinc_scaled(pp) * cos_scaled(qq)),
    }
}

fn raw_residual(mode: Mode, frequency: f64, cp: f64, plate: &MaterialPlate) -> f64 {
    let (a, b) = residual_terms(mode, frequency, cp, plate);
    a + b
}

/// Rayleigh-Lamb residual normalized by the magnitude of its two terms, so
/// it lies in [-1, 1] and vanishes exactly on the mode's dispersion branch.
pub fn rayleigh_lamb_residual(mode: Mode, frequency: f64, phase_velocity: f64, plate: &MaterialPlate) -> Result<f64> {
    ensure_finite("frequency", frequency)?;
    ensure_finite("phase velocity", phase_velocity)?;
    if frequency <= 0.0 || phase_velocity <= 0.0 {
        return Err(Error::Domain(format!(
            "frequency and phase velocity must be > 0 (f={frequency}, cp={phase_velocity})"
        )));
    }
    let (a, b) = residual_terms(mode, frequency, phase_velocity, plate);
    let scale = a.abs() + b.abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((a + b) / scale)
}

fn bisect(mode: Mode, frequency: f64, plate: &MaterialPlate, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = raw_residual(mode, frequency, lo, plate);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= 1e-15 * mid {
            break;
        }
        let f_mid = raw_residual(mode, frequency, mid, plate);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    // Return whichever end has the smaller residual.
    let r_lo = raw_residual(mode, frequency, lo, plate).abs();
    let r_hi = raw_residual(mode, frequency, hi, plate).abs();
    if r_lo <= r_hi {
        lo
    } else {
        hi
    }
}

/// Every phase-velocity root of `mode` at `frequency` inside the scan range,
/// ascending.
pub fn phase_velocity_roots(mode: Mode, frequency: f64, plate: &MaterialPlate) -> Result<Vec<f64>> {
    ensure_finite("frequency", frequency)?;
    if frequency <= 0.0 {
        return Err(Error::Domain(format!("frequency must be > 0, got {frequency}")));
    }
    let cp_max = SCAN_CP_MAX_FACTOR * plate.cl;
    let step = (cp_max - SCAN_CP_MIN) / SCAN_STEPS as f64;
    let mut roots = Vec::new();
    let mut prev_cp = SCAN_CP_MIN;
    let mut prev = raw_residual(mode, frequency, prev_cp, plate);
    if prev == 0.0 {
        roots.push(prev_cp);
    }
    for i in 1..=SCAN_STEPS {
        let cp = SCAN_CP_MIN + step * i as f64;
        let r = raw_residual(mode, frequency, cp, plate);
        if r == 0.0 {
            roots.push(cp);
        } else if prev != 0.0 && (r < 0.0) != (prev < 0.0) {
            roots.push(bisect(mode, frequency, plate, prev_cp, cp));
        }
        prev = r;
        prev_cp = cp;
    }
    Ok(roots)
}

/// Phase velocity of the fundamental branch: the lowest root of the mode's
/// characteristic equation.
pub fn solve_phase_velocity(mode: Mode, frequency: f64, plate: &MaterialPlate) -> Result<f64> {
    phase_velocity_roots(mode, frequency, plate)?
        .first()
        .copied()
        .ok_or(Error::RootNotFound { mode, frequency_hz: frequency })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionSample {
    pub frequency: f64,
    pub phase_velocity: f64,
    pub group_velocity: f64,
    pub wavenumber: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionCurve {
    pub mode: Mode,
    pub samples: Vec<DispersionSample>,
}

/// Samples `n_points` equally spaced frequencies in `[f_min, f_max]`.
///
/// The first sample takes the fundamental root; each following one takes the
/// root nearest the previous phase velocity so the branch cannot hop onto a
/// higher mode. Group velocity is `dw/dk` by central differences (one-sided
/// at the ends).
pub fn build_curve(
    mode: Mode,
    f_min: f64,
    f_max: f64,
    n_points: usize,
    plate: &MaterialPlate,
) -> Result<DispersionCurve> {
    ensure_finite("f_min", f_min)?;
    ensure_finite("f_max", f_max)?;
    if !(f_min > 0.0 && f_min < f_max) {
        return Err(Error::Precondition(format!("need 0 < f_min < f_max, got {f_min}..{f_max}")));
    }
    if n_points < 3 {
        return Err(Error::Precondition(format!("need at least 3 points, got {n_points}")));
    }
    let step = (f_max - f_min) / (n_points - 1) as f64;
    let mut freqs = Vec::with_capacity(n_points);
    let mut cps: Vec<f64> = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let f = if i + 1 == n_points { f_max } else { f_min + step * i as f64 };
        let roots = phase_velocity_roots(mode, f, plate)?;
        let cp = match cps.last() {
            None => roots.first().copied(),
            Some(&prev) => roots.iter().copied().min_by(|a, b| (a - prev).abs().total_cmp(&(b - prev).abs())),
        }
        .ok_or(Error::RootNotFound { mode, frequency_hz: f })?;
        freqs.push(f);
        cps.push(cp);
    }
    let omega: Vec<f64> = freqs.iter().map(|f| 2.0 * PI * f).collect();
    let k: Vec<f64> = omega.iter().zip(&cps).map(|(w, c)| w / c).collect();
    let n = n_points;
    let samples = (0..n)
        .map(|i| {
            let j = i.clamp(1, n - 2) - 1;
            let xs = [k[j], k[j + 1], k[j + 2]];
            let ys = [omega[j], omega[j + 1], omega[j + 2]];
            DispersionSample {
                frequency: freqs[i],
                phase_velocity: cps[i],
                group_velocity: quadratic_slope(xs, ys, k[i]),
                wavenumber: k[i],
            }
        })
        .collect();
    Ok(DispersionCurve { mode, samples })
}

/// Slope at `x` of the parabola through three points.
fn quadratic_slope(xs: [f64; 3], ys: [f64; 3], x: f64) -> f64 {
    let mut slope = 0.0;
    for j in 0..3 {
        let denom: f64 = (0..3).filter(|&l| l != j).map(|l| xs[j] - xs[l]).product();
        let numer: f64 = (0..3)
            .filter(|&m| m != j)
            .map(|m| (0..3).filter(|&l| l != j && l != m).map(|l| x - xs[l]).product::<f64>())
            .sum();
        slope += ys[j] * numer / denom;
    }
    slope
}

impl DispersionCurve {
    pub fn f_min(&self) -> f64 {
        self.samples.first().map_or(f64::NAN, |s| s.frequency)
    }

    pub fn f_max(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.frequency)
    }

    fn interpolate(&self, f: f64, pick: impl Fn(&DispersionSample) -> f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || f < s[0].frequency || f > s[s.len() - 1].frequency {
            return None;
        }
        let j = s.partition_point(|x| x.frequency < f);
        if j == 0 {
            return Some(pick(&s[0]));
        }
        let (a, b) = (&s[j - 1], &s[j]);
        let t = (f - a.frequency) / (b.frequency - a.frequency);
        Some(pick(a) + t * (pick(b) - pick(a)))
    }

    /// Group velocity at `f`, linearly interpolated; `None` outside the curve.
    pub fn group_velocity_at(&self, f: f64) -> Option<f64> {
        self.interpolate(f, |s| s.group_velocity)
    }

    pub fn phase_velocity_at(&self, f: f64) -> Option<f64> {
        self.interpolate(f, |s| s.phase_velocity)
    }

    /// Phase velocity at `f`, holding the end values outside the sampled range.
    pub fn phase_velocity_hold(&self, f: f64) -> f64 {
        let f = f.clamp(self.f_min(), self.f_max());
        self.phase_velocity_at(f).expect("clamped into range")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_sig9(s.frequency),
                fmt_sig9(s.phase_velocity),
                fmt_sig9(s.group_velocity),
                fmt_sig9(s.wavenumber)
            ));
        }
        out
    }

    /// Parses the CSV written by [`DispersionCurve::to_csv`].
    pub fn from_csv(mode: Mode, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => return Err(Error::Input(format!("bad dispersion CSV header: {:?}", other.unwrap_or("")))),
        }
        let mut samples = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Input(format!("dispersion CSV row {}: {e}", n + 2)))?;
            if vals.len() != 4 {
                return Err(Error::Input(format!("dispersion CSV row {}: expected 4 columns", n + 2)));
            }
            samples.push(DispersionSample {
                frequency: vals[0],
                phase_velocity: vals[1],
                group_velocity: vals[2],
                wavenumber: vals[3],
            });
        }
        if samples.len() < 2 || samples.windows(2).any(|w| w[1].frequency <= w[0].frequency) {
            return Err(Error::Input("dispersion CSV needs >= 2 rows with increasing frequency".into()));
        }
        Ok(Self { mode, samples })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn al15() -> MaterialPlate {
        MaterialPlate::aluminum(1.5e-3)
    }

    #[test]
    fn quadratic_slope_is_exact_for_parabolas() {
        let f = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
        let xs = [0.3, 1.1, 2.9];
        let ys = xs.map(f);
        for x in xs {
            assert!((quadratic_slope(xs, ys, x) - (6.0 * x - 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn plate_validation() {
        assert!(MaterialPlate::new("x", 3000.0, 3100.0, 1e-3).is_err());
        assert!(MaterialPlate::new("x", 6000.0, 3000.0, 0.0).is_err());
        assert!(MaterialPlate::new("x", f64::NAN, 3000.0, 1e-3).is_err());
    }

    #[test]
    fn residual_rejects_non_finite() {
        let p = al15();
        assert!(matches!(rayleigh_lamb_residual(Mode::S0, f64::NAN, 1000.0, &p), Err(Error::Domain(_))));
        assert!(matches!(rayleigh_lamb_residual(Mode::A0, 1e5, f64::INFINITY, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn residual_is_continuous_across_bulk_velocities() {
        let p = al15();
        for mode in [Mode::S0, Mode::A0] {
            for c in [p.ct, p.cl] {
                let below = rayleigh_lamb_residual(mode, 300e3, c * (1.0 - 1e-9), &p).unwrap();
                let at = rayleigh_lamb_residual(mode, 300e3, c, &p).unwrap();
                let above = rayleigh_lamb_residual(mode, 300e3, c * (1.0 + 1e-9), &p).unwrap();
                assert!((below - at).abs() < 1e-6 && (above - at).abs() < 1e-6, "{mode} at {c}");
            }
        }
    }

    #[test]
    fn residual_finite_at_large_fd() {
        let p = al15();
        let r = rayleigh_lamb_residual(Mode::A0, 5e6, 1.0, &p).unwrap();
        assert!(r.is_finite());
    }

    #[test]
    fn no_roots_is_an_error() {
        // Nothing but the A0 flexural root lies below 1 m/s at this frequency,
        // so shrinking the plate to an absurd thickness pushes cp below the scan.
        let thin = MaterialPlate::new("film", 6320.0, 3130.0, 1e-12).unwrap();
        let err = solve_phase_velocity(Mode::A0, 1.0, &thin).unwrap_err();
        assert!(matches!(err, Error::RootNotFound { mode: Mode::A0, .. }));
    }

    #[test]
    fn csv_round_trip() {
        let c = build_curve(Mode::S0, 10e3, 100e3, 5, &al15()).unwrap();
        let back = DispersionCurve::from_csv(Mode::S0, &c.to_csv()).unwrap();
        assert_eq!(back.samples.len(), 5);
        assert_eq!(back.to_csv(), c.to_csv());
    }

    #[test]
    fn interpolation_outside_range_is_none() {
        let c = build_curve(Mode::A0, 50e3, 100e3, 3, &al15()).unwrap();
        assert!(c.group_velocity_at(10e3).is_none());
        assert!(c.group_velocity_at(75e3).is_some());
        assert_eq!(c.phase_velocity_hold(1e9), c.samples[2].phase_velocity);
    }

    #[test]
    fn curve_preconditions() {
        let p = al15();
        assert!(matches!(build_curve(Mode::S0, 2e5, 1e5, 10, &p), Err(Error::Precondition(_))));
        assert!(matches!(build_curve(Mode::S0, 1e5, 2e5, 2, &p), Err(Error::Precondition(_))));
    }
}
