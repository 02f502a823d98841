// A 200 kHz A0 burst spreading as it travels across an aluminum plate.

use shmkit::dispersion::{build_curve, MaterialPlate, Mode};
use shmkit::excitation::{reference_waveform, ExcitationSpec};
use shmkit::plate::{propagate, PlateScenario, VelocityModel, DEFAULT_PLATE_SIDE};

pub fn run_example() -> shmkit::Result<()> {
    let fc = 200e3;
    let fs = 8e6;
    let curve = build_curve(Mode::A0, 10e3, 1e6, 100, &MaterialPlate::aluminum(1.5e-3))?;
    let scenario = PlateScenario {
        width: DEFAULT_PLATE_SIDE,
        height: DEFAULT_PLATE_SIDE,
        transducers: vec![[0.0, 0.0], [0.3, 0.0]],
        damage: None,
        mode: Mode::A0,
        velocity: VelocityModel::Curve(curve),
        attenuation_alpha: 0.0,
        excitation: ExcitationSpec::hamming(fc),
        sample_rate: fs,
        edge_echoes: false,
    };
    let vg = scenario.imaging_velocity()?;
    let burst = reference_waveform(&scenario.excitation, fs)?;
    println!("A0 group velocity at 200 kHz: {vg:.1} m/s");
    for d in [0.05, 0.1, 0.2, 0.4] {
        let y = propagate(&burst, d, &scenario)?;
        let k = y.argmax_abs().unwrap_or(0);
        // samples within half of the peak give a rough duration
        let above = y.samples.iter().filter(|v| v.abs() >= 0.5 * y.peak_abs()).count();
        println!(
            "d = {d:.2} m: peak {:.3} V at {:.1} us (group delay {:.1} us), {above} samples above half peak",
            y.peak_abs(),
            y.time(k) * 1e6,
            d / vg * 1e6
        );
    }
    Ok(())
}

fn main() -> shmkit::Result<()> {
    run_example()
}
