use shmkit::dispersion::{
    build_curve, phase_velocity_roots, rayleigh_lamb_residual, solve_phase_velocity, MaterialPlate, Mode,
};

fn al15() -> MaterialPlate {
    MaterialPlate::aluminum(1.5e-3)
}

/// Rayleigh surface-wave velocity from the classical cubic-in-square
/// equation, solved by plain bisection (independent of the plate solver).
fn rayleigh_velocity(p: &MaterialPlate) -> f64 {
    let g = |c: f64| {
        let a = c * c / (p.ct * p.ct);
        let b = c * c / (p.cl * p.cl);
        (2.0 - a).powi(2) - 4.0 * (1.0 - b).sqrt() * (1.0 - a).sqrt()
    };
    let (mut lo, mut hi) = (0.5 * p.ct, 0.999_999 * p.ct);
    assert!(g(lo) * g(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(lo) * g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Brute-force sign scan on a uniform grid much finer than the solver's.
fn dense_sign_changes(mode: Mode, f: f64, p: &MaterialPlate, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev = rayleigh_lamb_residual(mode, f, lo, p).unwrap();
    for i in 1..=n {
        let c = lo + (hi - lo) * i as f64 / n as f64;
        let r = rayleigh_lamb_residual(mode, f, c, p).unwrap();
        if r.signum() != prev.signum() {
            out.push(c);
        }
        prev = r;
    }
    out
}

#[test]
fn s0_thin_plate_limit_residual_vanishes() {
    let p = al15();
    let c0 = p.plate_velocity();
    assert!((c0 - 5438.0).abs() < 1.0, "{c0}");
    // f*d = 10 Hz*m, then a 10x coarser point to show the trend.
    let r_small = rayleigh_lamb_residual(Mode::S0, 10.0 / p.thickness, c0, &p).unwrap().abs();
    let r_large = rayleigh_lamb_residual(Mode::S0, 100.0 / p.thickness, c0, &p).unwrap().abs();
    assert!(r_small < 1e-4, "{r_small}");
    assert!(r_small < r_large);
}

#[test]
fn a0_residual_changes_sign_below_shear_velocity() {
    let p = al15();
    for f in [5e3, 20e3, 100e3] {
        let lo = rayleigh_lamb_residual(Mode::A0, f, 1e-3, &p).unwrap();
        let hi = rayleigh_lamb_residual(Mode::A0, f, p.ct * 0.999, &p).unwrap();
        assert!(lo.signum() != hi.signum(), "f={f}: {lo} {hi}");
        let changes = dense_sign_changes(Mode::A0, f, &p, 1e-3, p.ct * 0.999, 200_000);
        assert_eq!(changes.len(), 1, "f={f}: {changes:?}");
        let root = solve_phase_velocity(Mode::A0, f, &p).unwrap();
        assert!((root - changes[0]).abs() < 0.05, "{root} vs {}", changes[0]);
    }
}

#[test]
fn s0_high_fd_approaches_rayleigh_velocity() {
    let p = al15();
    let cr = rayleigh_velocity(&p);
    assert!((cr / p.ct - 0.932).abs() < 0.002, "cR/cT = {}", cr / p.ct);
    let f = 50e3 / p.thickness;
    let s0 = solve_phase_velocity(Mode::S0, f, &p).unwrap();
    let scan = dense_sign_changes(Mode::S0, f, &p, 1.0, p.ct * 0.999, 400_000);
    assert_eq!(scan.len(), 1, "{scan:?}");
    assert!((s0 - scan[0]).abs() < 0.05);
    assert!((s0 - cr).abs() / cr < 1e-3, "{s0} vs {cr}");
    assert!(rayleigh_lamb_residual(Mode::S0, f, cr, &p).unwrap().abs() < 1e-3);
}

#[test]
fn s0_solutions_in_expected_bands() {
    let p = al15();
    let low = solve_phase_velocity(Mode::S0, 10e3, &p).unwrap();
    assert!((low - 5438.0).abs() / 5438.0 < 0.01, "{low}");
    let high = solve_phase_velocity(Mode::S0, 2e6, &p).unwrap();
    assert!(high > 0.9 * p.ct && high < p.cl, "{high}");
    let scan = dense_sign_changes(Mode::S0, 2e6, &p, 0.9 * p.ct, p.cl * 0.9999, 100_000);
    assert_eq!(scan.len(), 1, "{scan:?}");
    assert!((scan[0] - high).abs() < 0.1);
}

#[test]
fn a0_phase_velocity_falls_toward_zero_frequency() {
    let p = al15();
    let c = |f| solve_phase_velocity(Mode::A0, f, &p).unwrap();
    assert!(c(5e3) < c(10e3) && c(10e3) < c(20e3));
}

#[test]
fn a0_strictly_increasing_against_dense_root_scan() {
    let p = al15();
    let curve = build_curve(Mode::A0, 5e3, 1e6, 60, &p).unwrap();
    for w in curve.samples.windows(2) {
        assert!(w[1].phase_velocity > w[0].phase_velocity);
    }
    for s in curve.samples.iter().step_by(7) {
        let scan = dense_sign_changes(Mode::A0, s.frequency, &p, 1.0, p.ct * 0.999, 50_000);
        assert!((scan[0] - s.phase_velocity).abs() < 0.2, "{} vs {}", scan[0], s.phase_velocity);
    }
}

#[test]
fn curve_samples_satisfy_equation_and_wavenumber() {
    let p = al15();
    for mode in [Mode::S0, Mode::A0] {
        let curve = build_curve(mode, 10e3, 2e6, 80, &p).unwrap();
        assert_eq!(curve.samples.len(), 80);
        for w in curve.samples.windows(2) {
            assert!(w[1].frequency > w[0].frequency);
        }
        for s in &curve.samples {
            let r = rayleigh_lamb_residual(mode, s.frequency, s.phase_velocity, &p).unwrap();
            assert!(r.abs() < 1e-9, "{mode} {} Hz: {r}", s.frequency);
            let k = 2.0 * std::f64::consts::PI * s.frequency / s.phase_velocity;
            assert_eq!(s.wavenumber, k);
            assert!(s.phase_velocity > 0.0 && s.group_velocity > 0.0);
        }
    }
}

#[test]
fn s0_group_velocity_equals_phase_velocity_at_low_frequency() {
    let p = al15();
    let curve = build_curve(Mode::S0, 10e3, 2e6, 200, &p).unwrap();
    let s = curve.samples[0];
    assert!((s.group_velocity - s.phase_velocity).abs() / s.phase_velocity < 0.02);
    assert!((s.group_velocity - 5438.0).abs() / 5438.0 < 0.02);
}

#[test]
fn a0_group_velocity_below_shear_velocity_up_to_550_khz() {
    let p = al15();
    let curve = build_curve(Mode::A0, 50e3, 550e3, 101, &p).unwrap();
    for s in &curve.samples {
        assert!(s.group_velocity > 0.0 && s.group_velocity < p.ct, "{} Hz: {}", s.frequency, s.group_velocity);
    }
}

/// The A0 group velocity of 1.5 mm aluminum peaks slightly above cT near
/// 0.9 MHz (f*d = 1.35 MHz*mm). Reference value from an independent
/// 40-digit root solve of the antisymmetric equation at 900 kHz +/- 1 Hz.
#[test]
fn a0_group_velocity_peak_matches_high_precision_oracle() {
    const VG_900KHZ: f64 = 3167.468;
    let p = al15();
    let curve = build_curve(Mode::A0, 50e3, 1e6, 96, &p).unwrap();
    let s = curve.samples.iter().find(|s| (s.frequency - 900e3).abs() < 1.0).unwrap();
    assert!((s.group_velocity - VG_900KHZ).abs() / VG_900KHZ < 5e-3, "{}", s.group_velocity);
    let peak = curve.samples.iter().map(|s| s.group_velocity).fold(0.0, f64::max);
    assert!(peak > p.ct && peak < 1.02 * p.ct, "{peak}");
}

#[test]
fn three_point_curve_has_finite_group_velocities() {
    for mode in [Mode::S0, Mode::A0] {
        let curve = build_curve(mode, 100e3, 300e3, 3, &al15()).unwrap();
        assert_eq!(curve.samples.len(), 3);
        assert!(curve.samples.iter().all(|s| s.group_velocity.is_finite()));
    }
}

#[test]
fn group_velocity_converges_under_refinement() {
    let p = al15();
    for mode in [Mode::S0, Mode::A0] {
        let coarse = build_curve(mode, 10e3, 2e6, 200, &p).unwrap();
        let fine = build_curve(mode, 10e3, 2e6, 399, &p).unwrap();
        for (i, s) in coarse.samples.iter().enumerate().skip(1).take(198) {
            let t = fine.samples[2 * i];
            assert!((t.frequency - s.frequency).abs() < 1e-6);
            let rel = (t.group_velocity - s.group_velocity).abs() / t.group_velocity;
            assert!(rel < 5e-3, "{mode} {} Hz: {rel}", s.frequency);
        }
    }
}

#[test]
fn s0_branch_tracking_stays_on_fundamental() {
    let p = al15();
    let curve = build_curve(Mode::S0, 10e3, 2e6, 200, &p).unwrap();
    for s in &curve.samples {
        let lowest = phase_velocity_roots(Mode::S0, s.frequency, &p).unwrap()[0];
        assert_eq!(s.phase_velocity, lowest);
    }
}
