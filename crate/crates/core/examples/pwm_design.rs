// Least-squares PWM pulse widths for a 5-cycle Hamming burst at 200 kHz,
// compared with the reference ROM widths.

use shmkit::excitation::{
    apply_lc_filter, baseline_comparison, optimize_pulse_widths, pwm_waveform, ExcitationSpec, FrameModel, LcFilterSpec,
};

pub fn run_example() -> shmkit::Result<()> {
    let fc = 200e3;
    let spec = ExcitationSpec::hamming(fc);
    let frame = FrameModel::default();
    let filter = LcFilterSpec::for_center(fc);
    let t_syn = 1.0 / (frame.ticks_per_cycle as f64 * fc);

    let result = optimize_pulse_widths(&spec, &frame, &filter, t_syn)?;
    for (k, r) in result.restarts.iter().enumerate() {
        println!("restart {k}: seed {:?} -> {:?}, error {:.3}", r.seed_widths, r.widths, r.error);
    }
    println!("optimum up {:?} down {:?}", result.best.up, result.best.down);
    println!("  error {:.3}, NRMSE {:.2}%", result.best.error, 100.0 * result.best.nrmse);

    let baseline = baseline_comparison(&spec, &frame, &filter, t_syn)?;
    println!("ROM widths as labeled: error {:.3}", baseline.as_labeled.error);
    println!("ROM widths swapped:    error {:.3}", baseline.swapped.error);

    let filtered = apply_lc_filter(&pwm_waveform(&result.program, 128.0 * fc)?, &filter)?;
    println!("filtered output peak: {:.3} V", filtered.peak_abs());
    print!("program:\n{}", result.program.to_text());
    Ok(())
}

fn main() -> shmkit::Result<()> {
    run_example()
}
