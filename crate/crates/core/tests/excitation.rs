use std::f64::consts::PI;

use shmkit::excitation::*;
use shmkit::filter::lowpass2_peak_gain;
use shmkit::{Error, SignalTrace};

const FC: f64 = 200e3;

fn t_syn() -> f64 {
    1.0 / (16.0 * FC)
}

fn square_wave(f0: f64, amp: f64, fs: f64, periods: usize) -> SignalTrace {
    let per = (fs / f0).round() as usize;
    let samples = (0..per * periods).map(|i| if (i % per) < per / 2 { amp } else { -amp }).collect();
    SignalTrace::new(fs, 0.0, samples).unwrap()
}

#[test]
fn square_wave_fundamental_is_four_over_pi() {
    // Fourier series of a +/-5 V square wave: b1 = 4*5/pi.
    let tr = square_wave(FC, 5.0, 1000.0 * FC, 10);
    let a = fundamental_amplitude(&tr, FC).unwrap();
    let oracle = 4.0 * 5.0 / PI;
    assert!((2.0 * a / 12.7324).abs() - 1.0 < 1e-3, "{}", 2.0 * a);
    assert!((a - oracle).abs() / oracle < 1e-3);
}

#[test]
fn pure_sine_and_zero_traces() {
    let fs = 64.0 * FC;
    let samples: Vec<f64> = (0..640).map(|i| 2.5 * (2.0 * PI * FC * i as f64 / fs + 0.3).sin()).collect();
    let tr = SignalTrace::new(fs, 0.0, samples).unwrap();
    assert!((fundamental_amplitude(&tr, FC).unwrap() - 2.5).abs() < 2.5e-9);
    let z = SignalTrace::zeros(fs, 0.0, 640);
    assert_eq!(fundamental_amplitude(&z, FC).unwrap(), 0.0);
    let short = SignalTrace::zeros(fs, 0.0, 100);
    assert!(matches!(fundamental_amplitude(&short, FC), Err(Error::Precondition(_))));
}

#[test]
fn peak_near_burst_center() {
    // With ten cycles the center is a sine peak, so |s| reaches the full
    // amplitude. With five it is a zero crossing; the largest sample sits a
    // quarter period away where the Hamming weight is 0.54 + 0.46 cos(pi/10).
    let ten = ExcitationSpec { n_cycles: 10, ..ExcitationSpec::hamming(FC) };
    let tr = reference_waveform(&ten, 400.0 * FC).unwrap();
    assert!((tr.peak_abs() - 5.0).abs() / 5.0 < 0.01);

    let five = ExcitationSpec::hamming(FC);
    let tr = reference_waveform(&five, 4000.0 * FC).unwrap();
    let dur = 5.0 / FC;
    let oracle = (0..=1_000_000)
        .map(|i| {
            let t = dur * i as f64 / 1e6;
            5.0 * (0.54 - 0.46 * (2.0 * PI * t / dur).cos()) * (2.0 * PI * FC * t).sin().abs()
        })
        .fold(0.0f64, f64::max);
    assert!(oracle < 0.98 * 5.0);
    assert!((tr.peak_abs() - oracle).abs() / oracle < 1e-4, "{} vs {oracle}", tr.peak_abs());
}

#[test]
fn lc_filter_dc_and_cutoff() {
    let lc = LcFilterSpec { f_cutoff: 300e3, q_factor: std::f64::consts::FRAC_1_SQRT_2 };
    let fs = 40.0 * lc.f_cutoff;
    let dc = SignalTrace::new(fs, 0.0, vec![3.0; 4000]).unwrap();
    let out = apply_lc_filter(&dc, &lc).unwrap();
    assert!((out.samples.last().unwrap() - 3.0).abs() < 1e-9);

    let n = 40 * 200;
    let x: Vec<f64> = (0..n).map(|i| (2.0 * PI * lc.f_cutoff * i as f64 / fs).sin()).collect();
    let y = apply_lc_filter(&SignalTrace::new(fs, 0.0, x).unwrap(), &lc).unwrap();
    let tail = SignalTrace::new(fs, 0.0, y.samples[n / 2..].to_vec()).unwrap();
    let db = 20.0 * fundamental_amplitude(&tail, lc.f_cutoff).unwrap().log10();
    assert!((db + 3.0103).abs() < 0.1, "{db} dB");

    let slow = SignalTrace::zeros(5.0 * lc.f_cutoff, 0.0, 10);
    assert!(matches!(apply_lc_filter(&slow, &lc), Err(Error::Precondition(_))));
}

#[test]
fn lc_impulse_response_decays() {
    let lc = LcFilterSpec::for_center(FC);
    let fs = 64.0 * FC;
    let mut x = vec![0.0; 4000];
    x[0] = 1.0;
    let y = apply_lc_filter(&SignalTrace::new(fs, 0.0, x).unwrap(), &lc).unwrap();
    let energy: f64 = y.samples.iter().map(|v| v * v).sum();
    assert!(energy.is_finite());
    let peak = y.peak_abs();
    let w0 = 2.0 * PI * lc.f_cutoff;
    let horizon = (10.0 / (w0 / lc.q_factor) * 2.0 * PI * fs).ceil() as usize;
    let late = y.samples[horizon..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(late < 0.01 * peak);
}

#[test]
fn lc_never_amplifies_fundamental_beyond_peak_gain() {
    for q in [0.5, std::f64::consts::FRAC_1_SQRT_2, 2.0] {
        let lc = LcFilterSpec { f_cutoff: 1.2 * FC, q_factor: q };
        let sq = square_wave(FC, 5.0, 64.0 * FC, 40);
        let before = fundamental_amplitude(&sq, FC).unwrap();
        let after = fundamental_amplitude(&apply_lc_filter(&sq, &lc).unwrap(), FC).unwrap();
        assert!(after <= before * lowpass2_peak_gain(q) * (1.0 + 1e-9), "Q={q}");
    }
}

#[test]
fn empty_program_renders_zeros() {
    let tr = pwm_waveform(&PwmProgram::empty(t_syn(), 5.0), 128.0 * FC).unwrap();
    assert!(tr.samples.iter().all(|&v| v == 0.0));
}

#[test]
fn single_pulse_area() {
    let fs = 128.0 * FC;
    let p = PwmProgram::new(t_syn(), vec![Pulse::new(3, 4)], vec![], 5.0).unwrap();
    let tr = pwm_waveform(&p, fs).unwrap();
    let area: f64 = tr.samples.iter().sum::<f64>() / fs;
    assert!((area - 4.0 * t_syn() * 5.0).abs() <= 5.0 / fs + 1e-18);
    assert!(tr.samples.iter().all(|&v| v == 0.0 || v == 5.0));
    let slow = pwm_waveform(&p, 4.0 / t_syn());
    assert!(matches!(slow, Err(Error::Precondition(_))));
}

#[test]
fn rom_program_is_zero_mean() {
    let frame = FrameModel::default();
    let p = frame.program(&ROM_UP_WIDTHS, &ROM_DOWN_WIDTHS, t_syn()).unwrap();
    assert_eq!(p.up_widths().iter().map(|&w| w as u32).sum::<u32>(), 16);
    let tr = pwm_waveform(&p, 128.0 * FC).unwrap();
    assert!(tr.samples.iter().sum::<f64>().abs() < 1e-9);
}

#[test]
fn mirrored_program_is_odd_symmetric() {
    // Down pulses mirror the up pulses about tick 40 (the burst center).
    let up = vec![Pulse::new(10, 3), Pulse::new(25, 6)];
    let down: Vec<Pulse> = up.iter().rev().map(|p| Pulse::new(80 - p.end(), p.width)).collect();
    let p = PwmProgram::new(t_syn(), up, down, 5.0).unwrap();
    let fs = 128.0 * FC;
    let c = (40.0 * t_syn() * fs).round() as usize;
    let tr = pwm_waveform_with_len(&p, fs, 2 * c).unwrap();
    // sample k covers [k, k+1); its mirror is sample 2c-1-k
    for k in 0..c {
        let a = tr.samples[k];
        let b = tr.samples[2 * c - 1 - k];
        assert_eq!(a, -b, "k={k}");
    }
}

#[test]
fn program_text_roundtrip() {
    let frame = FrameModel::default();
    let p = frame.program(&[1, 2, 3, 4], &[4, 3, 2, 1], t_syn()).unwrap();
    let back = PwmProgram::from_text(&p.to_text()).unwrap();
    assert_eq!(back, p);
}

#[test]
fn optimizer_beats_rom_widths() {
    let spec = ExcitationSpec::hamming(FC);
    let frame = FrameModel::default();
    let lc = LcFilterSpec::for_center(FC);
    let opt = optimize_pulse_widths(&spec, &frame, &lc, t_syn()).unwrap();
    let base = baseline_comparison(&spec, &frame, &lc, t_syn()).unwrap();
    assert!(opt.best.error <= base.as_labeled.error);
    assert!(opt.best.error <= base.swapped.error);
    assert!(opt.best.nrmse < 0.10);
}

#[test]
fn optimizer_is_amplitude_invariant() {
    let frame = FrameModel::default();
    let lc = LcFilterSpec::for_center(FC);
    let a = optimize_pulse_widths(&ExcitationSpec::hamming(FC), &frame, &lc, t_syn()).unwrap();
    let loud = ExcitationSpec { amplitude_pp: 20.0, ..ExcitationSpec::hamming(FC) };
    let b = optimize_pulse_widths(&loud, &frame, &lc, t_syn()).unwrap();
    assert_eq!(a.program, b.program);
    assert!((a.best.error - b.best.error).abs() < 1e-9 * a.best.error);
}
