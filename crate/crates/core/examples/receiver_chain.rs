// A received 200 kHz burst through the LNA, quadrature mixer and PGA, with
// and without noise, and the auto-zero cancelling a static offset.

use shmkit::excitation::{reference_waveform, ExcitationSpec};
use shmkit::receiver::{auto_zero, magnitude_phase, receive, ReceiverConfig};

pub fn run_example() -> shmkit::Result<()> {
    let fc = 200e3;
    let fs = 25.6e6;
    // a 10 mV burst, padded so the baseband filters can ring down
    let spec = ExcitationSpec { amplitude_pp: 20e-3, ..ExcitationSpec::hamming(fc) };
    let input = reference_waveform(&spec, fs)?.resized(2048);

    let cfg = ReceiverConfig::new(fc);
    let (mag, phase) = magnitude_phase(&receive(&input, &cfg, false)?);
    let k = mag.argmax_abs().unwrap_or(0);
    let gain_db = 20.0 * (cfg.lna_gain() * cfg.mixer_loss()).log10();
    println!("chain gain {gain_db:.1} dB");
    println!(
        "peak magnitude {:.3} mV at {:.2} us, phase {:.3} rad",
        mag.samples[k] * 1e3,
        mag.time(k) * 1e6,
        phase.samples[k]
    );

    let noisy = magnitude_phase(&receive(&input, &ReceiverConfig { seed: 42, ..cfg.clone() }, true)?).0;
    println!("noisy peak magnitude {:.3} mV", noisy.peak_abs() * 1e3);

    let offset = ReceiverConfig { offset_in: 2e-3, ..cfg };
    let raw = receive(&input, &offset, false)?;
    let zeroed = auto_zero(&input, &offset, false, 200e-6)?;
    println!(
        "2 mV input offset: first I sample {:.3} mV raw, {:.3e} V after auto-zero",
        raw.samples[0].re * 1e3,
        zeroed.output.samples[0].re
    );
    Ok(())
}

fn main() -> shmkit::Result<()> {
    run_example()
}
