//! Discrete-time filters shared by the transmitter and receiver models.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

/// Second-order low-pass `w0^2 / (s^2 + (w0/Q) s + w0^2)` discretized with
/// the bilinear transform, prewarped so the digital response at the cutoff
/// equals the analog one. Transposed direct form II.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub fn lowpass(f_cutoff: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * f_cutoff;
        let k = (w0 / (2.0 * sample_rate)).tan();
        let norm = 1.0 + k / q + k * k;
        let b0 = k * k / norm;
        Self { b: [b0, 2.0 * b0, b0], a: [2.0 * (k * k - 1.0) / norm, (1.0 - k / q + k * k) / norm], s1: 0.0, s2: 0.0 }
    }

    pub fn butterworth(f_cutoff: f64, sample_rate: f64) -> Self {
        Self::lowpass(f_cutoff, FRAC_1_SQRT_2, sample_rate)
    }

    /// Puts the state at the steady state for a constant input `x`.
    pub fn settle_to(&mut self, x: f64) {
        let y = x * (self.b.iter().sum::<f64>()) / (1.0 + self.a[0] + self.a[1]);
        self.s2 = self.b[2] * x - self.a[1] * y;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s1;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
        self.s2 = self.b[2] * x - self.a[1] * y;
        y
    }

    pub fn run(&mut self, input: &[f64]) -> Vec<f64> {
        input.iter().map(|&x| self.step(x)).collect()
    }

    /// Digital frequency response at `f` Hz.
    pub fn response(&self, f: f64, sample_rate: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -2.0 * PI * f / sample_rate);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }
}

/// Analog response of the second-order low-pass at `f`.
pub fn lowpass2_analog(f: f64, f_cutoff: f64, q: f64) -> Complex64 {
    let s = Complex64::new(0.0, 2.0 * PI * f);
    let w0 = 2.0 * PI * f_cutoff;
    w0 * w0 / (s * s + s * (w0 / q) + w0 * w0)
}

/// Largest |H(jw)| of the second-order low-pass (1 when Q <= 1/sqrt 2).
pub fn lowpass2_peak_gain(q: f64) -> f64 {
    if q <= FRAC_1_SQRT_2 {
        1.0
    } else {
        q / (1.0 - 1.0 / (4.0 * q * q)).sqrt()
    }
}

/// Low-frequency group delay of the second-order low-pass, `1 / (Q w0)`.
pub fn lowpass2_dc_group_delay(f_cutoff: f64, q: f64) -> f64 {
    1.0 / (q * 2.0 * PI * f_cutoff)
}

/// Single-pole low-pass, impulse-invariant discretization.
#[derive(Debug, Clone, Copy)]
pub struct OnePole {
    alpha: f64,
    y: f64,
}

impl OnePole {
    pub fn new(f_cutoff: f64, sample_rate: f64) -> Self {
        Self { alpha: 1.0 - (-2.0 * PI * f_cutoff / sample_rate).exp(), y: 0.0 }
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        self.y += self.alpha * (x - self.y);
        self.y
    }
}
