use std::f64::consts::PI;

use num_complex::Complex64;
use shmkit::excitation::{fundamental_phasor, ExcitationSpec};
use shmkit::filter::lowpass2_dc_group_delay;
use shmkit::receiver::*;
use shmkit::trace::nrmse;
use shmkit::{Error, IqTrace, SignalTrace};

const FLO: f64 = 200e3;
const FS: f64 = 25.6e6;

fn tone(f: f64, amp: f64, phase: f64, len: usize) -> SignalTrace {
    let samples = (0..len).map(|k| amp * (2.0 * PI * f * k as f64 / FS + phase).cos()).collect();
    SignalTrace::new(FS, 0.0, samples).unwrap()
}

fn burst_input(amp_pp: f64, len: usize) -> (ExcitationSpec, SignalTrace) {
    let spec = ExcitationSpec { amplitude_pp: amp_pp, ..ExcitationSpec::hamming(FLO) };
    let samples = (0..len).map(|k| spec.value_at(k as f64 / FS)).collect();
    (spec, SignalTrace::new(FS, 0.0, samples).unwrap())
}

fn tail(trace: &SignalTrace, from: usize) -> SignalTrace {
    SignalTrace::new(trace.sample_rate, 0.0, trace.samples[from..].to_vec()).unwrap()
}

fn thd(y: &SignalTrace, f0: f64) -> f64 {
    let h1 = fundamental_phasor(y, f0).unwrap().norm();
    let harm: f64 = (2..=15).map(|k| fundamental_phasor(y, k as f64 * f0).unwrap().norm_sqr()).sum();
    harm.sqrt() / h1
}

#[test]
fn lna_small_signal_gain() {
    let cfg = ReceiverConfig::new(FLO);
    let y = lna_stage(&tone(100e3, 1e-3, 0.0, 25_600), &cfg, false).unwrap();
    let amp = fundamental_phasor(&tail(&y, 2560), 100e3).unwrap().norm();
    assert!((amp / 12.02e-3 - 1.0).abs() < 0.01, "{amp}");
    assert!(matches!(lna_stage(&SignalTrace::zeros(10e6, 0.0, 10), &cfg, false), Err(Error::Precondition(_))));
}

#[test]
fn lna_noise_matches_single_pole_bandwidth() {
    let cfg = ReceiverConfig::new(FLO);
    let n = (0.01 * FS) as usize;
    let y = lna_stage(&SignalTrace::zeros(FS, 0.0, n), &cfg, true).unwrap();
    let rms_in = y.rms() / cfg.lna_gain();
    let oracle = 21e-9 * (PI / 2.0 * 4.3e6).sqrt();
    assert!((oracle - 54.6e-6).abs() < 0.1e-6);
    assert!((rms_in / oracle - 1.0).abs() < 0.1, "{rms_in} vs {oracle}");
}

#[test]
fn lna_compression_defines_linear_range() {
    let cfg = ReceiverConfig::new(FLO);
    let f0 = 100e3;
    let at = |amp: f64| {
        let y = lna_stage(&tone(f0, amp, 0.0, 25_600), &cfg, false).unwrap();
        thd(&tail(&y, 2560), f0)
    };
    assert!(at(cfg.lna_linear_range) < 0.05);
    let over = at(2.0 * cfg.lna_linear_range);
    assert!(over > 0.05, "THD {over}");
}

#[test]
fn coherent_demodulation_and_phase() {
    let cfg = ReceiverConfig::new(FLO);
    let loss = cfg.mixer_loss();
    let n = 25_600;
    let iq = quadrature_demod(&tone(FLO, 0.1, 0.0, n), &cfg).unwrap();
    let last = iq.samples[n - 1];
    // residual 2 f_lo ripple through the 80 kHz Butterworth is ~4%
    let ripple = 0.1 * loss / 2.0 * (80.0f64 / 400.0).powi(2) * 1.1;
    assert!((last.re - loss * 0.05).abs() < ripple, "{last}");
    assert!(last.im.abs() < ripple);
    for phi in [-2.5, -1.0, 0.3, 1.7, 3.0] {
        let iq = quadrature_demod(&tone(FLO, 0.1, phi, n), &cfg).unwrap();
        // average over one LO period to remove the 2 f_lo ripple
        let z: Complex64 = iq.samples[n - 128..].iter().sum();
        let err = (z.arg() - phi + PI).rem_euclid(2.0 * PI) - PI;
        assert!(err.abs().to_degrees() < 0.5, "phi={phi} err={err}");
    }
}

#[test]
fn burst_envelope_tracks_window() {
    let mut cfg = ReceiverConfig::new(FLO);
    cfg.lpf_cutoff = 80e3;
    // 3x the -3 dB half-bandwidth of a 5-cycle Hamming burst (~0.65 f/5)
    assert!(cfg.lpf_cutoff >= 3.0 * 0.65 * FLO / 5.0);
    let (spec, x) = burst_input(0.02, (60e-6 * FS) as usize);
    let (mag, _) = magnitude_phase(&quadrature_demod(&x, &cfg).unwrap());
    let tau = lowpass2_dc_group_delay(cfg.lpf_cutoff, std::f64::consts::FRAC_1_SQRT_2);
    let reference: Vec<f64> =
        (0..mag.len()).map(|k| cfg.mixer_loss() * 0.5 * spec.envelope_at(mag.time(k) - tau)).collect();
    let e = nrmse(&mag.samples, &reference);
    assert!(e < 0.02, "NRMSE {e}");
}

#[test]
fn magnitude_peak_and_rotation() {
    let iq = IqTrace { sample_rate: 1.0, start_time: 0.0, samples: vec![Complex64::new(3e-3, 4e-3)] };
    let (m, p) = magnitude_phase(&iq);
    assert!((m.samples[0] - 5e-3).abs() < 1e-15);
    assert!((p.samples[0] - (4.0f64).atan2(3.0)).abs() < 1e-15);

    let mut cfg = ReceiverConfig::new(FLO);
    cfg.lpf_cutoff = 80e3;
    let (spec, x) = burst_input(0.02, (60e-6 * FS) as usize);
    let iq = quadrature_demod(&x, &cfg).unwrap();
    let (mag, _) = magnitude_phase(&iq);
    let rotated =
        IqTrace { samples: iq.samples.iter().map(|z| z * Complex64::from_polar(1.0, 0.77)).collect(), ..iq.clone() };
    let (mag_r, _) = magnitude_phase(&rotated);
    for (a, b) in mag.samples.iter().zip(&mag_r.samples) {
        assert!((a - b).abs() <= 1e-15 * a.max(1e-30) + 1e-18);
    }
    let k_peak = mag.argmax_abs().unwrap();
    // unimodal once the 2 f_lo ripple riding on the envelope is averaged out
    let smooth: Vec<f64> = mag.samples.windows(128).map(|w| w.iter().sum::<f64>() / 128.0).collect();
    let k_s = smooth.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(smooth[..k_s].windows(2).all(|w| w[1] >= w[0] - 1e-12));
    // the Butterworth ring-down may bounce once the envelope is nearly gone
    let floor = 0.05 * smooth[k_s];
    assert!(smooth[k_s..].windows(2).take_while(|w| w[1] > floor).all(|w| w[1] <= w[0] + 1e-12));
    let tau = lowpass2_dc_group_delay(cfg.lpf_cutoff, std::f64::consts::FRAC_1_SQRT_2);
    let centre = spec.duration() / 2.0;
    let t_peak = mag.time(k_peak);
    assert!((t_peak - centre).abs() <= tau, "peak at {t_peak}, centre {centre}, tau {tau}");
}

#[test]
fn pga_quantization() {
    assert_eq!(pga_codes(1.0).unwrap(), (1, 1));
    let (a, b) = pga_codes(4.0).unwrap();
    assert_eq!(a as f64 / b as f64, 4.0);
    let (a, b) = pga_codes(4.03).unwrap();
    let got = (a as f64 / b as f64 - 4.03).abs();
    let oracle =
        (1..=31).flat_map(|x| (1..=31).map(move |y| (x as f64 / y as f64 - 4.03).abs())).fold(f64::INFINITY, f64::min);
    assert_eq!(got, oracle);
    assert!(matches!(pga_codes(32.0), Err(Error::Range(_))));
    assert!(matches!(pga_codes(1.0 / 32.0), Err(Error::Range(_))));

    let mut cfg = ReceiverConfig::new(FLO);
    let iq = IqTrace { sample_rate: 1.0, start_time: 0.0, samples: vec![Complex64::new(1.0, -2.0)] };
    assert_eq!(pga_stage(&iq, &cfg).unwrap(), iq);
    cfg.pga_ibias1 = 4e-6;
    assert_eq!(pga_stage(&iq, &cfg).unwrap().samples[0], Complex64::new(4.0, -8.0));
}

#[test]
fn pga_tie_goes_to_smaller_gain() {
    // 30.5 lies halfway between 30/1 and 31/1 and no code pair is closer.
    let lo = 30.0;
    let hi = 31.0;
    let (a, b) = pga_codes(0.5 * (lo + hi)).unwrap();
    assert_eq!(a as f64 / b as f64, lo);
}

#[test]
fn auto_zero_cancels_static_offset() {
    let mut cfg = ReceiverConfig::new(FLO);
    cfg.offset_in = 5e-3;
    let rst = 10.0 / cfg.lpf_cutoff;
    let quiet = SignalTrace::zeros(FS, 0.0, 5000);
    let out = auto_zero(&quiet, &cfg, false, rst).unwrap();
    assert!(out.output.samples.iter().all(|z| z.norm() < 1e-12));
    assert!(matches!(auto_zero(&quiet, &cfg, false, 0.5 * rst), Err(Error::Precondition(_))));

    cfg.offset_in = 0.0;
    let out = auto_zero(&quiet, &cfg, false, rst).unwrap();
    assert_eq!(out.dc_estimate, Complex64::new(0.0, 0.0));
}

#[test]
fn auto_zero_keeps_burst_amplitude() {
    let mut cfg = ReceiverConfig::new(FLO);
    cfg.lpf_cutoff = 80e3;
    let (_, x) = burst_input(0.02, (60e-6 * FS) as usize);
    let clean = receive(&x, &cfg, false).unwrap();
    cfg.offset_in = 5e-3;
    let fixed = auto_zero(&x, &cfg, false, 10.0 / cfg.lpf_cutoff).unwrap().output;
    let peak = |iq: &IqTrace| iq.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!((peak(&fixed) / peak(&clean) - 1.0).abs() < 1e-3);
}

#[test]
fn chain_is_linear_in_range() {
    let mut cfg = ReceiverConfig::new(FLO);
    cfg.lpf_cutoff = 80e3;
    let (_, x) = burst_input(0.02, 1500);
    let y1 = receive(&x, &cfg, false).unwrap();
    let y3 = receive(&x.scaled(3.0), &cfg, false).unwrap();
    for (a, b) in y1.samples.iter().zip(&y3.samples) {
        assert!((b - 3.0 * a).norm() <= 1e-9 * (3.0 * a).norm() + 1e-300);
    }
}

#[test]
fn end_to_end_tone_gain() {
    let mut cfg = ReceiverConfig::new(FLO);
    cfg.lpf_cutoff = 80e3;
    let n = 25_600;
    let y = receive(&tone(FLO, 1e-3, 0.4, n), &cfg, false).unwrap();
    let z: Complex64 = y.samples[n - 128..].iter().sum::<Complex64>() / 128.0;
    let oracle = 1e-3 * 0.5 * 10f64.powf((21.6 - 4.0) / 20.0);
    let db = 20.0 * (z.norm() / oracle).log10();
    assert!(db.abs() < 0.5, "{db} dB");
}

#[test]
fn delay_rotates_phase() {
    let mut cfg = ReceiverConfig::new(FLO);
    cfg.lpf_cutoff = 80e3;
    let n = 25_600;
    let dt = 0.37e-6;
    let base = receive(&tone(FLO, 1e-3, 0.0, n), &cfg, false).unwrap();
    let late = receive(&tone(FLO, 1e-3, -2.0 * PI * FLO * dt, n), &cfg, false).unwrap();
    let avg = |iq: &IqTrace| iq.samples[n - 128..].iter().sum::<Complex64>();
    let rot = (avg(&late) / avg(&base)).arg();
    let want = -2.0 * PI * FLO * dt;
    let err = (rot - want + PI).rem_euclid(2.0 * PI) - PI;
    assert!(err.abs().to_degrees() < 1.0);
}

#[test]
fn noise_scales_with_density() {
    let base = ReceiverConfig::new(FLO);
    let quiet = SignalTrace::zeros(FS, 0.0, 20_000);
    let mean_rms = |psd: f64| {
        let mut acc = 0.0;
        for seed in 0..20 {
            let cfg = ReceiverConfig { lna_noise_psd: psd, seed, ..base.clone() };
            acc += lna_stage(&quiet, &cfg, true).unwrap().rms();
        }
        acc / 20.0
    };
    let r = mean_rms(42e-9) / mean_rms(21e-9);
    assert!((r - 2.0).abs() < 0.2, "{r}");
}

#[test]
fn config_validation() {
    let mut cfg = ReceiverConfig::new(FLO);
    cfg.mixer_loss_db = 1.0;
    assert!(matches!(cfg.validate(), Err(Error::Validation { .. })));
    let mut cfg = ReceiverConfig::new(FLO);
    cfg.lna_bw = 0.0;
    assert!(cfg.validate().is_err());
    let mut cfg = ReceiverConfig::new(FLO);
    cfg.pga_ibias2 = 0.0;
    assert!(pga_gain(&cfg).is_err());
}
