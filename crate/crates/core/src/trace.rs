//! Uniformly sampled real and complex-baseband waveforms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numfmt::fmt_sig9;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    pub sample_rate: f64,
    pub start_time: f64,
    pub samples: Vec<f64>,
}

impl SignalTrace {
    pub fn new(sample_rate: f64, start_time: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::Domain(format!("sample rate must be > 0, got {sample_rate}")));
        }
        Ok(Self { sample_rate, start_time, samples })
    }

    pub fn zeros(sample_rate: f64, start_time: f64, len: usize) -> Self {
        Self { sample_rate, start_time, samples: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Linear interpolation at time `t`; zero outside the sampled span.
    pub fn value_at(&self, t: f64) -> f64 {
        let pos = (t - self.start_time) * self.sample_rate;
        if !(pos >= 0.0) || self.samples.is_empty() {
            return 0.0;
        }
        let last = (self.samples.len() - 1) as f64;
        if pos > last {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= self.samples.len() {
            return self.samples[i];
        }
        let frac = pos - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Index of the largest |sample|; first one wins on ties.
    pub fn argmax_abs(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, x) in self.samples.iter().enumerate() {
            if best.is_none_or(|(_, b)| x.abs() > b) {
                best = Some((i, x.abs()));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sample_rate: self.sample_rate,
            start_time: self.start_time,
            samples: self.samples.iter().map(|x| x * factor).collect(),
        }
    }

    /// Zero-pads (or truncates) to exactly `len` samples.
    pub fn resized(&self, len: usize) -> Self {
        let mut samples = self.samples.clone();
        samples.resize(len, 0.0);
        Self { sample_rate: self.sample_rate, start_time: self.start_time, samples }
    }

    /// CSV with header `time_s,<value_header>`.
    pub fn to_csv_with_header(&self, value_header: &str) -> String {
        let mut out = format!("time_s,{value_header}\n");
        for (i, v) in self.samples.iter().enumerate() {
            out.push_str(&fmt_sig9(self.time(i)));
            out.push(',');
            out.push_str(&fmt_sig9(*v));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        self.to_csv_with_header("value_v")
    }
}

/// Complex baseband trace; the differential I/Q pairs are folded into one
/// signed value per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct IqTrace {
    pub sample_rate: f64,
    pub start_time: f64,
    pub samples: Vec<Complex64>,
}

impl IqTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sample_rate: self.sample_rate,
            start_time: self.start_time,
            samples: self.samples.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn i_channel(&self) -> SignalTrace {
        SignalTrace {
            sample_rate: self.sample_rate,
            start_time: self.start_time,
            samples: self.samples.iter().map(|z| z.re).collect(),
        }
    }

    pub fn q_channel(&self) -> SignalTrace {
        SignalTrace {
            sample_rate: self.sample_rate,
            start_time: self.start_time,
            samples: self.samples.iter().map(|z| z.im).collect(),
        }
    }

    /// CSV with header `time_s,i_v,q_v`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,i_v,q_v\n");
        for (k, z) in self.samples.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", fmt_sig9(self.time(k)), fmt_sig9(z.re), fmt_sig9(z.im)));
        }
        out
    }
}

/// Root-mean-square error normalized by the reference's range (max − min).
///
/// Returns 0 when both signals are identically zero and infinity when only
/// the reference is flat.
pub fn nrmse(actual: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(actual.len(), reference.len(), "nrmse needs equal lengths");
    if actual.is_empty() {
        return 0.0;
    }
    let mse = actual.iter().zip(reference).map(|(a, r)| (a - r) * (a - r)).sum::<f64>() / actual.len() as f64;
    let (lo, hi) = reference.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(*r), hi.max(*r)));
    let range = hi - lo;
    if mse == 0.0 {
        0.0
    } else if range == 0.0 {
        f64::INFINITY
    } else {
        mse.sqrt() / range
    }
}

/// Lag (in samples, possibly negative) maximizing the cross-correlation
/// `sum_n a[n + lag] * b[n]`, searched over `lags`.
pub fn xcorr_argmax(a: &[f64], b: &[f64], lags: std::ops::RangeInclusive<isize>) -> isize {
    let mut best = (*lags.start(), f64::NEG_INFINITY);
    for lag in lags {
        let mut acc = 0.0;
        for (n, bn) in b.iter().enumerate() {
            let idx = n as isize + lag;
            if idx >= 0 && (idx as usize) < a.len() {
                acc += a[idx as usize] * bn;
            }
        }
        if acc > best.1 {
            best = (lag, acc);
        }
    }
    best.0
}
