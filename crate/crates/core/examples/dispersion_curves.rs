// S0 and A0 dispersion of a 1.5 mm aluminum plate, printed as a short table.
//
// ```text
// cargo run --example dispersion_curves
// ```

use shmkit::dispersion::{build_curve, MaterialPlate, Mode};

pub fn run_example() -> shmkit::Result<()> {
    let plate = MaterialPlate::aluminum(1.5e-3);
    println!("plate velocity (thin-plate S0 limit): {:.1} m/s", plate.plate_velocity());
    let s0 = build_curve(Mode::S0, 10e3, 2e6, 200, &plate)?;
    let a0 = build_curve(Mode::A0, 10e3, 2e6, 200, &plate)?;
    println!("{:>10} {:>10} {:>10} {:>10} {:>10}", "f (kHz)", "S0 cp", "S0 vg", "A0 cp", "A0 vg");
    for (s, a) in s0.samples.iter().zip(&a0.samples).step_by(20) {
        println!(
            "{:>10.1} {:>10.1} {:>10.1} {:>10.1} {:>10.1}",
            s.frequency / 1e3,
            s.phase_velocity,
            s.group_velocity,
            a.phase_velocity,
            a.group_velocity
        );
    }
    let vg = s0.group_velocity_at(200e3).expect("200 kHz is on the curve");
    println!("S0 group velocity at 200 kHz: {vg:.1} m/s");
    Ok(())
}

fn main() -> shmkit::Result<()> {
    run_example()
}
