// The fundamental of a +/-5 V square wave, the upper bound any two-level
// excitation can reach at the carrier.

use shmkit::excitation::{fundamental_amplitude, pwm_waveform, Pulse, PwmProgram, DEFAULT_RAIL};

pub fn run_example() -> shmkit::Result<()> {
    let fc = 200e3;
    let ticks = 16u32;
    let t_syn = 1.0 / (ticks as f64 * fc);
    let cycles = 20;
    // each cycle: up for the first half, down for the second
    let up = (0..cycles).map(|c| Pulse::new(c * ticks, (ticks / 2) as u8)).collect();
    let down = (0..cycles).map(|c| Pulse::new(c * ticks + ticks / 2, (ticks / 2) as u8)).collect();
    let program = PwmProgram::new(t_syn, up, down, DEFAULT_RAIL)?;
    let wave = pwm_waveform(&program, 64.0 * ticks as f64 * fc)?;
    let amp = fundamental_amplitude(&wave, fc)?;
    let expected = 4.0 / std::f64::consts::PI * DEFAULT_RAIL;
    println!("fundamental: {:.4} Vpp (4/pi x 10 V = {:.4} Vpp)", 2.0 * amp, 2.0 * expected);
    Ok(())
}

fn main() -> shmkit::Result<()> {
    run_example()
}
