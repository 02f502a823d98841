// Loop filter for a 32.768 kHz reference, N = 25, 3.5 kHz crossover and
// 50 degrees of phase margin, then a lock transient from a 5% offset.

use shmkit::synthesizer::{design_loop, open_loop_gain, simulate_lock, LockOptions, LOCK_TOLERANCE};

pub fn run_example() -> shmkit::Result<()> {
    let (config, report) = design_loop(32768.0, 25, 3.5e3, 50.0)?;
    print!("{}", report.to_text());
    let lf = config.loop_filter;
    println!("C1 {:.4e} F  R2 {:.4e} ohm  C2 {:.4e} F  R3 {:.4e} ohm  C3 {:.4e} F", lf.c1, lf.r2, lf.c2, lf.r3, lf.c3);
    let [p1, p2] = lf.pole_frequencies();
    println!("zero {:.1} Hz, poles {:.1} Hz and {:.1} Hz", lf.zero_hz(), p1, p2);
    for f in [100.0, 1e3, 3.5e3, 10e3] {
        let l = open_loop_gain(&config, f)?;
        println!("  |L({f} Hz)| = {:.3}, arg = {:.1} deg", l.norm(), l.arg().to_degrees());
    }

    let f_target = 25.0 * 32768.0;
    let options = LockOptions { f_start: Some(1.05 * f_target), ..LockOptions::new(&config, 50.0 / 3.5e3) };
    let lock = simulate_lock(&config, f_target, &options)?;
    match lock.settle_time(LOCK_TOLERANCE) {
        Some(t) => println!("locked to 0.1% after {:.3} ms", t * 1e3),
        None => println!("did not settle"),
    }
    Ok(())
}

fn main() -> shmkit::Result<()> {
    run_example()
}
