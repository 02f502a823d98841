//! Integer-N frequency synthesizer: loop design in the frequency domain and
//! an event-driven lock-transient model.
//!
//! The loop filter is the usual passive charge-pump network: C1 in parallel
//! with the R2-C2 zero branch at the pump node, followed by an R3-C3 section
//! whose capacitor voltage is the control voltage. Its transimpedance has a
//! pole at the origin, one zero and two real high-frequency poles; with the
//! oscillator's integrator the loop is type II and fourth order.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3};
use num_complex::Complex64;

use crate::error::{ensure_finite, Error, Result};
use crate::numfmt::fmt_sig9;

pub const DEFAULT_F_REF: f64 = 32768.0;
pub const DEFAULT_I_CP: f64 = 10e-6;
/// Control voltage at the middle of the linear range.
pub const V_MID: f64 = 1.65;
/// CCO frequency limits (Hz).
pub const F_CCO_MIN: f64 = 0.8e6;
pub const F_CCO_MAX: f64 = 22e6;
/// Relative frequency error that counts as locked.
pub const LOCK_TOLERANCE: f64 = 1e-3;

/// Ratio C3/C1 used by [`design_loop`].
const C3_OVER_C1: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopFilter {
    pub c1: f64,
    pub r2: f64,
    pub c2: f64,
    pub r3: f64,
    pub c3: f64,
}

impl LoopFilter {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("c1", self.c1), ("r2", self.r2), ("c2", self.c2), ("r3", self.r3), ("c3", self.c3)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation { field: name.into(), message: format!("must be > 0, got {v}") });
            }
        }
        Ok(())
    }

    /// Transimpedance from pump current to control voltage.
    pub fn transimpedance(&self, s: Complex64) -> Complex64 {
        let LoopFilter { c1, r2, c2, r3, c3 } = *self;
        let ya = s * c1 + s * c2 / (1.0 + s * r2 * c2);
        1.0 / ((1.0 + s * r3 * c3) * ya + s * c3)
    }

    pub fn zero_hz(&self) -> f64 {
        1.0 / (2.0 * PI * self.r2 * self.c2)
    }

    /// The two non-zero pole frequencies (Hz), ascending.
    pub fn pole_frequencies(&self) -> [f64; 2] {
        let LoopFilter { c1, r2, c2, r3, c3 } = *self;
        // Denominator s * (a2 s^2 + a1 s + a0); all roots real for an RC network.
        let a2 = r3 * c3 * r2 * c1 * c2;
        let a1 = r3 * c3 * (c1 + c2) + r2 * c1 * c2 + c3 * r2 * c2;
        let a0 = c1 + c2 + c3;
        let disc = (a1 * a1 - 4.0 * a2 * a0).max(0.0).sqrt();
        let q = -0.5 * (a1 + disc);
        let (r1, r2) = (q / a2, a0 / q);
        let mut p = [r1.abs() / (2.0 * PI), r2.abs() / (2.0 * PI)];
        p.sort_by(f64::total_cmp);
        p
    }

    /// Capacitors multiplied and resistors divided by `alpha`: time
    /// constants are kept and the impedance scales by `1/alpha`.
    fn scaled(&self, alpha: f64) -> Self {
        Self { c1: self.c1 * alpha, r2: self.r2 / alpha, c2: self.c2 * alpha, r3: self.r3 / alpha, c3: self.c3 * alpha }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub f_ref: f64,
    pub n_div: u32,
    pub i_cp: f64,
    /// Oscillator gain (Hz/V) inside the linear control range.
    pub k_cco: f64,
    pub loop_filter: LoopFilter,
    /// Linear control range (V); the incremental gain falls linearly to zero
    /// over `v_derate` volts beyond either end.
    pub v_min: f64,
    pub v_max: f64,
    pub v_derate: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("f_ref", self.f_ref), ("i_cp", self.i_cp), ("k_cco", self.k_cco), ("v_derate", self.v_derate)]
        {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation { field: name.into(), message: format!("must be > 0, got {v}") });
            }
        }
        if self.n_div < 1 {
            return Err(Error::Validation { field: "n_div".into(), message: "must be >= 1".into() });
        }
        if !(self.v_min < self.v_max && self.f_min < self.f_max && self.f_min >= 0.0) {
            return Err(Error::Validation {
                field: "ranges".into(),
                message: "need v_min < v_max and 0 <= f_min < f_max".into(),
            });
        }
        self.loop_filter.validate()
    }

    /// Oscillator frequency at control voltage `v`, before the range clamp.
    fn cco_unclamped(&self, v: f64) -> f64 {
        let m = self.v_derate;
        let soft = |d: f64| {
            let d = d.min(m);
            d - d * d / (2.0 * m)
        };
        let v_eff = if v > self.v_max {
            self.v_max + soft(v - self.v_max)
        } else if v < self.v_min {
            self.v_min - soft(self.v_min - v)
        } else {
            v
        };
        self.k_cco * v_eff
    }

    /// Oscillator frequency at control voltage `v`.
    pub fn cco_frequency(&self, v: f64) -> f64 {
        self.cco_unclamped(v).clamp(self.f_min, self.f_max)
    }

    fn cco_clamped(&self, v: f64) -> bool {
        let f = self.cco_unclamped(v);
        f <= self.f_min || f >= self.f_max
    }

    /// Control voltage in the linear range giving frequency `f`.
    fn voltage_for(&self, f: f64) -> Result<f64> {
        let v = f / self.k_cco;
        if !(self.f_min < f && f < self.f_max && self.v_min <= v && v <= self.v_max) {
            return Err(Error::Range(format!(
                "{f} Hz is outside the oscillator's linear tuning range ({}..{} Hz)",
                self.cco_frequency(self.v_min),
                self.cco_frequency(self.v_max)
            )));
        }
        Ok(v)
    }
}

/// Open-loop gain: pump gain `i_cp/2pi` (A/rad) times the filter
/// transimpedance times the oscillator's `2pi k_cco / s`, over N.
pub fn open_loop_gain(config: &SynthConfig, f: f64) -> Result<Complex64> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Domain(format!("frequency must be > 0, got {f}")));
    }
    Ok(loop_gain(config, f))
}

fn loop_gain(config: &SynthConfig, f: f64) -> Complex64 {
    let s = Complex64::new(0.0, 2.0 * PI * f);
    config.i_cp / (2.0 * PI) * config.loop_filter.transimpedance(s) * (2.0 * PI * config.k_cco / s)
        / config.n_div as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopReport {
    pub f_unity: f64,
    /// Degrees.
    pub phase_margin: f64,
    pub f_3db_closed: f64,
}

impl LoopReport {
    pub fn to_text(&self) -> String {
        format!(
            "f_unity_hz {}\nphase_margin_deg {}\nf_3db_closed_hz {}\n",
            fmt_sig9(self.f_unity),
            fmt_sig9(self.phase_margin),
            fmt_sig9(self.f_3db_closed)
        )
    }
}

/// Bisects `g` on a log-frequency axis between `lo` and `hi`, where
/// `g(lo) > 0 >= g(hi)`.
fn bisect_log(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m.exp()) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b)).exp()
}

/// First frequency on a log scan over `[lo, hi]` where `g` turns
/// non-positive, refined by bisection.
fn first_crossing(lo: f64, hi: f64, g: impl Fn(f64) -> f64) -> Option<f64> {
    const STEPS: usize = 2000;
    let ratio = (hi / lo).powf(1.0 / STEPS as f64);
    let mut f = lo;
    if g(f) <= 0.0 {
        return None;
    }
    for _ in 0..STEPS {
        let next = f * ratio;
        if g(next) <= 0.0 {
            return Some(bisect_log(f, next, &g));
        }
        f = next;
    }
    None
}

/// 180 deg plus the loop phase, with the phase taken in (-360, 0].
fn margin_deg(l: Complex64) -> f64 {
    let p = l.arg().to_degrees();
    180.0 + if p > 0.0 { p - 360.0 } else { p }
}

/// Crossover, phase margin and closed-loop -3 dB frequency of `config`.
pub fn loop_report(config: &SynthConfig) -> Result<LoopReport> {
    config.validate()?;
    let lo = config.f_ref * 1e-7;
    let hi = config.f_ref * 1e3;
    let f_unity = first_crossing(lo, hi, |f| loop_gain(config, f).norm() - 1.0)
        .ok_or_else(|| Error::Design("open-loop gain has no unity crossing".into()))?;
    let l = loop_gain(config, f_unity);
    let phase_margin = margin_deg(l);
    let closed = |f: f64| {
        let l = loop_gain(config, f);
        (l / (1.0 + l)).norm() - std::f64::consts::FRAC_1_SQRT_2
    };
    let f_3db_closed = first_crossing(lo, hi, closed)
        .ok_or_else(|| Error::Design("closed-loop response has no -3 dB point".into()))?;
    Ok(LoopReport { f_unity, phase_margin, f_3db_closed })
}

/// Component values for crossover `target_bw` and margin `target_pm`.
///
/// The zero sits at `f_c / b` and both extra poles at `2 b f_c`, so the
/// zero and the pole pair are symmetric about the crossover on a log axis
/// with the pair an octave above the mirror image. `b` is found by
/// bisection on the margin of the realized network (C3 = C1/10), then the
/// impedance level is scaled so that `|L(j 2 pi f_c)| = 1`.
pub fn design_loop(f_ref: f64, n_div: u32, target_bw: f64, target_pm: f64) -> Result<(SynthConfig, LoopReport)> {
    ensure_finite("f_ref", f_ref)?;
    ensure_finite("target_bw", target_bw)?;
    ensure_finite("target_pm", target_pm)?;
    if !(f_ref > 0.0 && target_bw > 0.0) || n_div < 1 {
        return Err(Error::Domain("f_ref, target_bw and n_div must be positive".into()));
    }
    if target_bw >= f_ref / 3.0 {
        return Err(Error::Precondition(format!(
            "loop bandwidth {target_bw} Hz is not below f_ref/3 = {} Hz",
            f_ref / 3.0
        )));
    }
    if !(target_pm > 0.0 && target_pm < 90.0) {
        return Err(Error::Design(format!("phase margin {target_pm} deg is not in (0, 90)")));
    }
    let f_target = n_div as f64 * f_ref;
    let base = SynthConfig {
        f_ref,
        n_div,
        i_cp: DEFAULT_I_CP,
        k_cco: f_target / V_MID,
        loop_filter: LoopFilter { c1: 1.0, r2: 1.0, c2: 1.0, r3: 1.0, c3: 1.0 },
        v_min: 0.9,
        v_max: 2.4,
        v_derate: 0.3,
        f_min: F_CCO_MIN,
        f_max: F_CCO_MAX,
    };
    let wc = 2.0 * PI * target_bw;
    let network = |b: f64| {
        let (wz, wp) = (wc / b, 2.0 * b * wc);
        let c2 = 1e-9;
        let r2 = 1.0 / (wz * c2);
        let c1 = 1.0 / (r2 * (wp - wz));
        let c3 = C3_OVER_C1 * c1;
        LoopFilter { c1, r2, c2, r3: 1.0 / (wp * c3), c3 }
    };
    let margin = |b: f64| {
        let cfg = SynthConfig { loop_filter: network(b), ..base };
        margin_deg(loop_gain(&cfg, target_bw))
    };
    let (mut lo, mut hi) = (1.0, 1e4);
    if margin(hi) < target_pm {
        return Err(Error::Design(format!(
            "phase margin {target_pm} deg is beyond what the filter reaches ({:.2} deg)",
            margin(hi)
        )));
    }
    if margin(lo) > target_pm {
        return Err(Error::Design(format!("phase margin {target_pm} deg is below the design range")));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if margin(mid) < target_pm {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = (lo * hi).sqrt();
    let unscaled = SynthConfig { loop_filter: network(b), ..base };
    let alpha = loop_gain(&unscaled, target_bw).norm();
    let config = SynthConfig { loop_filter: unscaled.loop_filter.scaled(alpha), ..base };
    let report = loop_report(&config)?;
    Ok((config, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockSample {
    pub t: f64,
    pub v_loop: f64,
    pub f_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockResult {
    pub f_target: f64,
    pub samples: Vec<LockSample>,
    /// Signed phase error of each completed PFD pulse (s): positive when
    /// the reference edge led.
    pub phase_errors: Vec<(f64, f64)>,
    /// The oscillator sat at a frequency limit at the end of the run.
    pub clamped: bool,
    /// Final frequency within [`LOCK_TOLERANCE`] of the target and not clamped.
    pub locked: bool,
}

impl LockResult {
    /// Earliest time after which the relative frequency error stays below `tol`.
    pub fn settle_time(&self, tol: f64) -> Option<f64> {
        let bad = |s: &LockSample| ((s.f_out - self.f_target) / self.f_target).abs() >= tol;
        match self.samples.iter().rposition(bad) {
            None => self.samples.first().map(|s| s.t),
            Some(i) if i + 1 < self.samples.len() => Some(self.samples[i + 1].t),
            Some(_) => None,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,vloop_v,fout_hz\n");
        for s in &self.samples {
            out.push_str(&format!("{},{},{}\n", fmt_sig9(s.t), fmt_sig9(s.v_loop), fmt_sig9(s.f_out)));
        }
        out
    }
}

/// Run settings for [`simulate_lock`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockOptions {
    pub duration: f64,
    pub dt: f64,
    /// Initial oscillator frequency; `None` starts at the target.
    pub f_start: Option<f64>,
}

impl LockOptions {
    /// `duration` seconds with the default step `1/(64 f_ref)`.
    pub fn new(config: &SynthConfig, duration: f64) -> Self {
        Self { duration, dt: 1.0 / (64.0 * config.f_ref), f_start: None }
    }
}

/// Exact zero-order-hold propagation of the filter node voltages
/// `[v1, v2, v3]` over `h` seconds with constant pump current `i`.
struct FilterModel {
    a: Matrix3<f64>,
    b: Vector3<f64>,
}

impl FilterModel {
    fn new(f: &LoopFilter) -> Self {
        let LoopFilter { c1, r2, c2, r3, c3 } = *f;
        let (g2, g3) = (1.0 / r2, 1.0 / r3);
        #[rustfmt::skip]
        let a = Matrix3::new(
            -(g2 + g3) / c1, g2 / c1, g3 / c1,
            g2 / c2, -g2 / c2, 0.0,
            g3 / c3, 0.0, -g3 / c3,
        );
        Self { a, b: Vector3::new(1.0 / c1, 0.0, 0.0) }
    }

    /// State transition and unit-current input response over `h`.
    fn discretize(&self, h: f64) -> (Matrix3<f64>, Vector3<f64>) {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(self.a * h));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(self.b * h));
        let e = m.exp();
        (e.fixed_view::<3, 3>(0, 0).into(), e.fixed_view::<3, 1>(0, 3).into())
    }
}

/// Time at which a phase ramp with rate going linearly from `f0` to `f1`
/// over `h` advances by `dphi`.
fn ramp_crossing(f0: f64, f1: f64, h: f64, dphi: f64) -> f64 {
    let a = 0.5 * (f1 - f0) / h;
    let tau = if a.abs() < 1e-12 * f0.abs().max(1.0) / h {
        dphi / f0
    } else {
        // a tau^2 + f0 tau - dphi = 0, root continuous with the linear case
        2.0 * dphi / (f0 + (f0 * f0 + 4.0 * a * dphi).max(0.0).sqrt())
    };
    tau.clamp(0.0, h)
}

/// Lock transient of the charge-pump loop.
///
/// A tri-state PFD compares reference edges at `m / f_ref` with divider
/// edges, found where the accumulated oscillator phase divided by N crosses
/// an integer. Between events the filter advances by its exact matrix
/// exponential; oscillator phase uses the trapezoidal rule in frequency.
pub fn simulate_lock(config: &SynthConfig, f_target: f64, options: &LockOptions) -> Result<LockResult> {
    config.validate()?;
    ensure_finite("f_target", f_target)?;
    let LockOptions { duration, dt, f_start } = *options;
    let nominal = config.n_div as f64 * config.f_ref;
    if ((f_target - nominal) / nominal).abs() > 1e-9 {
        return Err(Error::Precondition(format!("f_target {f_target} Hz is not N*f_ref = {nominal} Hz")));
    }
    if !(dt > 0.0 && dt <= 1.0 / (20.0 * config.f_ref) * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!("dt {dt} s must be in (0, 1/(20 f_ref)]")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::Domain(format!("duration must be > 0, got {duration}")));
    }
    // Start at the target when it is tunable; otherwise at the nearest
    // linear-range voltage (the clamp then shows up in the result).
    let v0 = match f_start {
        Some(f) => config.voltage_for(f)?,
        None => (f_target / config.k_cco).clamp(config.v_min, config.v_max),
    };

    let model = FilterModel::new(&config.loop_filter);
    let (phi_dt, gam_dt) = model.discretize(dt);
    let n = config.n_div as f64;
    let t_ref = 1.0 / config.f_ref;

    let mut x = Vector3::new(v0, v0, v0);
    let mut t = 0.0;
    let mut div_phase = 0.0; // divided-output cycles
    let mut next_div = 1.0;
    let mut next_ref_index = 1u64;
    let mut pfd: i8 = 0;
    let mut pulse_start = 0.0;
    let steps = (duration / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut phase_errors = Vec::new();
    samples.push(LockSample { t, v_loop: x[2], f_out: config.cco_frequency(x[2]) });

    for step in 1..=steps {
        let t_end = step as f64 * dt;
        while t < t_end {
            let t_next_ref = next_ref_index as f64 * t_ref;
            let seg_end = t_end.min(t_next_ref);
            let h = seg_end - t;
            let current = pfd as f64 * config.i_cp;
            let (phi, gam) = if (h - dt).abs() <= 1e-12 * dt { (phi_dt, gam_dt) } else { model.discretize(h) };
            let x_end = phi * x + gam * current;
            let f0 = config.cco_frequency(x[2]);
            let f1 = config.cco_frequency(x_end[2]);
            let phase_end = div_phase + 0.5 * (f0 + f1) * h / n;
            if phase_end >= next_div {
                let tau = ramp_crossing(f0 / n, f1 / n, h, next_div - div_phase);
                let (phi, gam) = model.discretize(tau);
                x = phi * x + gam * current;
                t += tau;
                div_phase = next_div;
                next_div += 1.0;
                if pfd == 1 {
                    phase_errors.push((t, t - pulse_start));
                    pfd = 0;
                } else if pfd == 0 {
                    pfd = -1;
                    pulse_start = t;
                }
                continue;
            }
            x = x_end;
            div_phase = phase_end;
            t = seg_end;
            if seg_end >= t_next_ref {
                t = t_next_ref;
                next_ref_index += 1;
                if pfd == -1 {
                    phase_errors.push((t, -(t - pulse_start)));
                    pfd = 0;
                } else if pfd == 0 {
                    pfd = 1;
                    pulse_start = t;
                }
            }
        }
        samples.push(LockSample { t: t_end, v_loop: x[2], f_out: config.cco_frequency(x[2]) });
    }

    let last = samples.last().expect("at least the initial sample");
    let clamped = config.cco_clamped(last.v_loop);
    let locked = !clamped && ((last.f_out - f_target) / f_target).abs() < LOCK_TOLERANCE;
    Ok(LockResult { f_target, samples, phase_errors, clamped, locked })
}
