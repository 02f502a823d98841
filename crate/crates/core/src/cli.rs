//! Command implementations behind the `shmkit` binary.
//!
//! Every command writes its artifacts into `--out` through a temp file and
//! rename, then writes `manifest.json` last. Exit codes: 0 success,
//! 2 usage or validation, 3 infeasible design, 4 no detection, 1 anything
//! else.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::dispersion::{build_curve, MaterialPlate, Mode};
use crate::error::{Error, Result};
use crate::excitation::{
    baseline_comparison, optimize_pulse_widths, ExcitationSpec, FrameModel, LcFilterSpec, ROM_DOWN_WIDTHS,
    ROM_UP_WIDTHS,
};
use crate::localization::{baseline_subtract, envelope, image, locate, EnvelopeMethod, GridSpec, ImagingOptions};
use crate::numfmt::fmt_sig9;
use crate::plate::{distance, synthesize_measurements, PlateScenario};
use crate::receiver::{receive, ReceiverConfig};
use crate::synthesizer::{design_loop, simulate_lock, LockOptions, LOCK_TOLERANCE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NO_DETECTION: i32 = 4;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Center frequencies the transmitter is specified for (Hz).
pub const FC_PROGRAMMABLE_RANGE: (f64, f64) = (0.1e6, 2.75e6);

#[derive(Debug, Parser)]
#[command(name = "shmkit", version, about = "Structural-health-monitoring transceiver model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// S0 and A0 dispersion curves as CSV.
    Dispersion(DispersionArgs),
    /// Optimize PWM pulse widths against the windowed reference.
    DesignPwm(DesignPwmArgs),
    /// Design the synthesizer loop filter and simulate a lock transient.
    DesignLoop(DesignLoopArgs),
    /// Synthesize pitch-catch measurements and run them through the receiver.
    Simulate(SimulateArgs),
    /// Delay-and-sum damage image and location estimate.
    Localize(LocalizeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct DispersionArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value = "aluminum")]
    pub material: String,
    /// Longitudinal bulk velocity (m/s).
    #[arg(long, default_value_t = 6320.0)]
    pub cl: f64,
    /// Shear bulk velocity (m/s).
    #[arg(long, default_value_t = 3130.0)]
    pub ct: f64,
    #[arg(long, default_value_t = 1.5e-3)]
    pub thickness_m: f64,
    #[arg(long, default_value_t = 10e3)]
    pub f_min_hz: f64,
    #[arg(long, default_value_t = 2e6)]
    pub f_max_hz: f64,
    #[arg(long, default_value_t = 200)]
    pub points: usize,
}

#[derive(Debug, Clone, Args)]
pub struct DesignPwmArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 200e3)]
    pub fc_hz: f64,
    #[arg(long, default_value_t = 5)]
    pub cycles: u32,
    /// Peak-to-peak amplitude of the reference burst (V).
    #[arg(long, default_value_t = 10.0)]
    pub amplitude_vpp: f64,
    /// PWM ticks per carrier cycle.
    #[arg(long, default_value_t = 16)]
    pub ticks_per_cycle: u32,
    #[arg(long, default_value_t = 4)]
    pub pulses_per_side: usize,
    #[arg(long, default_value_t = 8)]
    pub max_width: u8,
    /// LC low-pass cutoff (Hz); defaults to 1.5 fc.
    #[arg(long)]
    pub lc_cutoff_hz: Option<f64>,
    #[arg(long, default_value_t = std::f64::consts::FRAC_1_SQRT_2)]
    pub lc_q: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DesignLoopArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 32768.0)]
    pub f_ref_hz: f64,
    #[arg(long, default_value_t = 25)]
    pub n_div: u32,
    #[arg(long, default_value_t = 3500.0)]
    pub bandwidth_hz: f64,
    #[arg(long, default_value_t = 50.0)]
    pub phase_margin_deg: f64,
    /// Relative offset of the starting oscillator frequency.
    #[arg(long, default_value_t = 0.05)]
    pub start_offset: f64,
    /// Simulated time (s); defaults to 100 / bandwidth.
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvelopeArg {
    Analytic,
    Iq,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Add LNA thermal noise to the receiver outputs.
    #[arg(long)]
    pub noise: bool,
    /// Transducer coupling from plate wave to receiver input (V/V).
    #[arg(long, default_value_t = 1e-3)]
    pub rx_coupling: f64,
    /// Baseband low-pass cutoff (Hz); defaults to 0.4 fc.
    #[arg(long)]
    pub lpf_cutoff_hz: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub pga_gain: f64,
    #[arg(long, value_enum, default_value_t = EnvelopeArg::Analytic)]
    pub envelope: EnvelopeArg,
}

#[derive(Debug, Clone, Args)]
pub struct LocalizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, default_value_t = crate::localization::DEFAULT_GRID_SPACING)]
    pub grid_spacing_m: f64,
    #[arg(long, value_enum, default_value_t = EnvelopeArg::Analytic)]
    pub envelope: EnvelopeArg,
    /// Scale envelopes by sqrt(path) to undo geometric spreading.
    #[arg(long)]
    pub path_compensation: bool,
    /// Run on a scenario without damage (expects exit code 4).
    #[arg(long)]
    pub allow_no_damage: bool,
}

/// Record of one command run, written last as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub output_dir: String,
    /// Output file names relative to `output_dir`, in write order.
    pub outputs: Vec<String>,
    pub config: Map<String, Value>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// One-line human summary for stdout.
    pub summary: String,
    pub manifest: RunManifest,
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Design(_) => EXIT_INFEASIBLE,
        Error::Domain(_)
        | Error::Precondition(_)
        | Error::Range(_)
        | Error::Input(_)
        | Error::Validation { .. }
        | Error::Parse { .. } => EXIT_USAGE,
        Error::RootNotFound { .. } | Error::Invariant(_) | Error::Io(_) => EXIT_FAILURE,
    }
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Dispersion(a) => cmd_dispersion(a),
        Command::DesignPwm(a) => cmd_design_pwm(a),
        Command::DesignLoop(a) => cmd_design_loop(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Localize(a) => cmd_localize(a),
    }
}

/// Collects artifacts for one run and writes each atomically.
struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn start(command: &str, common: &CommonArgs, inputs: Vec<String>) -> Result<Self> {
        fs::create_dir_all(&common.out)?;
        Ok(Self {
            dir: common.out.clone(),
            manifest: RunManifest {
                command: command.into(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                seed: common.seed,
                inputs,
                output_dir: common.out.display().to_string(),
                outputs: Vec::new(),
                config: Map::new(),
                warnings: Vec::new(),
                exit_code: EXIT_OK,
            },
        })
    }

    fn num(&mut self, key: &str, x: f64) {
        // round through the 9-digit text so the JSON echo matches the files
        let v = fmt_sig9(x).parse::<f64>().ok().and_then(Number::from_f64).map_or(Value::Null, Value::Number);
        self.manifest.config.insert(key.into(), v);
    }

    fn int(&mut self, key: &str, x: u64) {
        self.manifest.config.insert(key.into(), Value::from(x));
    }

    fn text(&mut self, key: &str, s: &str) {
        self.manifest.config.insert(key.into(), Value::from(s));
    }

    fn flag(&mut self, key: &str, b: bool) {
        self.manifest.config.insert(key.into(), Value::from(b));
    }

    fn warn(&mut self, message: String) {
        self.manifest.warnings.push(message);
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        write_atomic(&self.dir, name, bytes.as_ref())?;
        self.manifest.outputs.push(name.into());
        Ok(())
    }

    fn finish(mut self, exit_code: i32, summary: String) -> Result<Outcome> {
        self.manifest.exit_code = exit_code;
        let mut json = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::Invariant(format!("manifest serialization: {e}")))?;
        json.push('\n');
        write_atomic(&self.dir, MANIFEST_NAME, json.as_bytes())?;
        Ok(Outcome { exit_code, summary, manifest: self.manifest })
    }
}

/// Writes `dir/name` through a sibling temp file and a rename.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, dir.join(name)).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn load_scenario(path: &Path) -> Result<PlateScenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    PlateScenario::parse(&text, &path.display().to_string(), path.parent())
}

fn envelope_method(arg: EnvelopeArg, scenario: &PlateScenario) -> EnvelopeMethod {
    match arg {
        EnvelopeArg::Analytic => EnvelopeMethod::Analytic,
        EnvelopeArg::Iq => EnvelopeMethod::IqDemod { f_center: scenario.excitation.f_center },
    }
}

pub fn cmd_dispersion(args: &DispersionArgs) -> Result<Outcome> {
    let plate = MaterialPlate::new(args.material.clone(), args.cl, args.ct, args.thickness_m)?;
    // validate and solve before touching the output directory
    let curves = [Mode::S0, Mode::A0]
        .into_iter()
        .map(|mode| build_curve(mode, args.f_min_hz, args.f_max_hz, args.points, &plate))
        .collect::<Result<Vec<_>>>()?;

    let mut run = Run::start("dispersion", &args.common, Vec::new())?;
    run.text("material", &args.material);
    run.num("cl_mps", args.cl);
    run.num("ct_mps", args.ct);
    run.num("thickness_m", args.thickness_m);
    run.num("f_min_hz", args.f_min_hz);
    run.num("f_max_hz", args.f_max_hz);
    run.int("points", args.points as u64);
    for curve in &curves {
        run.write(&format!("{}.csv", curve.mode.to_string().to_ascii_lowercase()), curve.to_csv())?;
    }
    let s0 = &curves[0].samples[0];
    let summary = format!(
        "S0 at {} Hz: cp {} m/s, vg {} m/s",
        fmt_sig9(s0.frequency),
        fmt_sig9(s0.phase_velocity),
        fmt_sig9(s0.group_velocity)
    );
    run.finish(EXIT_OK, summary)
}

pub fn cmd_design_pwm(args: &DesignPwmArgs) -> Result<Outcome> {
    let spec = ExcitationSpec {
        f_center: args.fc_hz,
        n_cycles: args.cycles,
        amplitude_pp: args.amplitude_vpp,
        ..ExcitationSpec::hamming(args.fc_hz)
    };
    spec.validate()?;
    let frame = FrameModel {
        pulses_per_side: args.pulses_per_side,
        ticks_per_cycle: args.ticks_per_cycle,
        max_width: args.max_width,
        ..FrameModel::default()
    };
    let filter = LcFilterSpec { f_cutoff: args.lc_cutoff_hz.unwrap_or(1.5 * args.fc_hz), q_factor: args.lc_q };
    filter.validate()?;
    let t_syn = 1.0 / (args.ticks_per_cycle as f64 * args.fc_hz);
    let result = optimize_pulse_widths(&spec, &frame, &filter, t_syn)?;
    // the ROM widths only fit the default four-pulse frame
    let baseline = if frame.pulses_per_side == ROM_UP_WIDTHS.len() && frame.max_width >= 7 {
        Some(baseline_comparison(&spec, &frame, &filter, t_syn)?)
    } else {
        None
    };

    let mut run = Run::start("design-pwm", &args.common, Vec::new())?;
    let (lo, hi) = FC_PROGRAMMABLE_RANGE;
    if !(lo..=hi).contains(&args.fc_hz) {
        run.warn(format!(
            "fc {} Hz is outside the programmable range {}-{} Hz",
            fmt_sig9(args.fc_hz),
            fmt_sig9(lo),
            fmt_sig9(hi)
        ));
    }
    run.num("fc_hz", args.fc_hz);
    run.int("cycles", args.cycles as u64);
    run.num("amplitude_vpp", args.amplitude_vpp);
    run.int("ticks_per_cycle", args.ticks_per_cycle as u64);
    run.int("pulses_per_side", args.pulses_per_side as u64);
    run.int("max_width", args.max_width as u64);
    run.num("t_syn_s", t_syn);
    run.num("lc_cutoff_hz", filter.f_cutoff);
    run.num("lc_q", filter.q_factor);

    let widths = |w: &[u8]| w.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut report = String::new();
    report.push_str(&format!("optimum_up_widths {}\n", widths(&result.best.up)));
    report.push_str(&format!("optimum_down_widths {}\n", widths(&result.best.down)));
    report.push_str(&format!("optimum_error {}\n", fmt_sig9(result.best.error)));
    report.push_str(&format!("optimum_nrmse {}\n", fmt_sig9(result.best.nrmse)));
    if let Some(b) = &baseline {
        report.push_str(&format!("baseline_up_widths {}\n", widths(&ROM_UP_WIDTHS)));
        report.push_str(&format!("baseline_down_widths {}\n", widths(&ROM_DOWN_WIDTHS)));
        report.push_str(&format!("baseline_error {}\n", fmt_sig9(b.as_labeled.error)));
        report.push_str(&format!("baseline_nrmse {}\n", fmt_sig9(b.as_labeled.nrmse)));
        report.push_str(&format!("baseline_swapped_error {}\n", fmt_sig9(b.swapped.error)));
        report.push_str(&format!("baseline_swapped_nrmse {}\n", fmt_sig9(b.swapped.nrmse)));
    }
    run.write("program.txt", result.program.to_text())?;
    run.write("report.txt", report)?;
    let summary = format!(
        "up {} / down {}: error {}, nrmse {}",
        widths(&result.best.up),
        widths(&result.best.down),
        fmt_sig9(result.best.error),
        fmt_sig9(result.best.nrmse)
    );
    run.finish(EXIT_OK, summary)
}

pub fn cmd_design_loop(args: &DesignLoopArgs) -> Result<Outcome> {
    let (config, report) = design_loop(args.f_ref_hz, args.n_div, args.bandwidth_hz, args.phase_margin_deg)?;
    let f_target = args.n_div as f64 * args.f_ref_hz;
    let duration = args.duration_s.unwrap_or(100.0 / args.bandwidth_hz);
    let options =
        LockOptions { f_start: Some(f_target * (1.0 + args.start_offset)), ..LockOptions::new(&config, duration) };
    let lock = simulate_lock(&config, f_target, &options)?;

    let mut run = Run::start("design-loop", &args.common, Vec::new())?;
    run.num("f_ref_hz", args.f_ref_hz);
    run.int("n_div", args.n_div as u64);
    run.num("bandwidth_hz", args.bandwidth_hz);
    run.num("phase_margin_deg", args.phase_margin_deg);
    run.num("start_offset", args.start_offset);
    run.num("duration_s", duration);
    run.num("i_cp_a", config.i_cp);
    run.num("k_cco_hz_per_v", config.k_cco);
    if lock.clamped {
        run.warn("oscillator clamped at a frequency limit at the end of the run".into());
    }

    let lf = config.loop_filter;
    let [p1, p2] = lf.pole_frequencies();
    let settle = lock.settle_time(LOCK_TOLERANCE);
    let mut text = report.to_text();
    for (k, v) in [("c1_f", lf.c1), ("r2_ohm", lf.r2), ("c2_f", lf.c2), ("r3_ohm", lf.r3), ("c3_f", lf.c3)] {
        text.push_str(&format!("{k} {}\n", fmt_sig9(v)));
    }
    text.push_str(&format!("zero_hz {}\n", fmt_sig9(lf.zero_hz())));
    text.push_str(&format!("pole_hz {} {}\n", fmt_sig9(p1), fmt_sig9(p2)));
    text.push_str(&format!("f_target_hz {}\n", fmt_sig9(f_target)));
    text.push_str(&format!("settle_time_s {}\n", settle.map_or("none".into(), fmt_sig9)));
    text.push_str(&format!("locked {}\nclamped {}\n", lock.locked, lock.clamped));
    run.write("loop.txt", text)?;
    run.write("lock.csv", lock.to_csv())?;
    let summary = format!(
        "f_unity {} Hz, phase margin {} deg, settle {}",
        fmt_sig9(report.f_unity),
        fmt_sig9(report.phase_margin),
        settle.map_or("never".into(), |t| format!("{} s", fmt_sig9(t)))
    );
    run.finish(EXIT_OK, summary)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let scenario = load_scenario(&args.scenario)?;
    let fs_hz = scenario.sample_rate;
    let mut rx = ReceiverConfig::new(scenario.excitation.f_center);
    if let Some(fc) = args.lpf_cutoff_hz {
        rx.lpf_cutoff = fc;
    }
    rx.pga_ibias1 = args.pga_gain * rx.pga_ibias2;
    rx.validate()?;
    if !(args.rx_coupling.is_finite() && args.rx_coupling > 0.0) {
        return Err(Error::Validation { field: "rx_coupling".into(), message: "must be > 0".into() });
    }
    let set = synthesize_measurements(&scenario, fs_hz)?;
    let residuals = baseline_subtract(&set)?;
    let method = envelope_method(args.envelope, &scenario);
    let iq = set
        .damaged
        .iter()
        .enumerate()
        .map(|(k, trace)| {
            let cfg = ReceiverConfig { seed: args.common.seed.wrapping_add(k as u64), ..rx.clone() };
            receive(&trace.scaled(args.rx_coupling), &cfg, args.noise)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut run = Run::start("simulate", &args.common, vec![args.scenario.display().to_string()])?;
    echo_scenario(&mut run, &scenario);
    run.flag("noise", args.noise);
    run.num("rx_coupling", args.rx_coupling);
    run.num("lpf_cutoff_hz", rx.lpf_cutoff);
    run.num("pga_gain", args.pga_gain);
    run.text("envelope", method.name());
    for (k, &(tx, rx_i)) in set.pairs.iter().enumerate() {
        let stem = format!("pair_{tx}_{rx_i}");
        run.write(&format!("{stem}_baseline.csv"), set.baseline[k].to_csv())?;
        run.write(&format!("{stem}_damaged.csv"), set.damaged[k].to_csv())?;
        run.write(&format!("{stem}_residual.csv"), residuals[k].to_csv())?;
        run.write(&format!("{stem}_envelope.csv"), envelope(&residuals[k], method)?.to_csv())?;
        run.write(&format!("{stem}_iq.csv"), iq[k].to_csv())?;
    }
    let peak = residuals.iter().map(|r| r.peak_abs()).fold(0.0, f64::max);
    let summary = format!("{} pairs, residual peak {} V", set.pairs.len(), fmt_sig9(peak));
    run.finish(EXIT_OK, summary)
}

pub fn cmd_localize(args: &LocalizeArgs) -> Result<Outcome> {
    let scenario = load_scenario(&args.scenario)?;
    if scenario.damage.is_none() && !args.allow_no_damage {
        return Err(Error::Validation {
            field: "damage".into(),
            message: "scenario has no damage; pass --allow-no-damage to image it anyway".into(),
        });
    }
    let options = ImagingOptions {
        method: envelope_method(args.envelope, &scenario),
        grid: GridSpec::covering(scenario.width, scenario.height, args.grid_spacing_m)?,
        path_compensation: args.path_compensation,
    };
    let set = synthesize_measurements(&scenario, scenario.sample_rate)?;
    let imaging = image(&scenario, &set, &options)?;
    let location = locate(&imaging.map)?;

    let mut run = Run::start("localize", &args.common, vec![args.scenario.display().to_string()])?;
    echo_scenario(&mut run, &scenario);
    run.num("grid_spacing_m", options.grid.spacing);
    run.int("grid_nx", options.grid.nx as u64);
    run.int("grid_ny", options.grid.ny as u64);
    run.text("envelope", options.method.name());
    run.flag("path_compensation", options.path_compensation);
    run.num("t0_s", imaging.t0);
    run.write("map.pgm", imaging.map.to_pgm())?;
    run.write("map.csv", imaging.map.to_csv())?;
    let (report, code, summary) = match location {
        Some(loc) => {
            let err = scenario.damage.map(|d| distance([loc.x, loc.y], d.position));
            let err_text = err.map_or("nan".into(), fmt_sig9);
            (
                format!("estimated_x_m estimated_y_m error_m\n{} {} {}\n", fmt_sig9(loc.x), fmt_sig9(loc.y), err_text),
                EXIT_OK,
                format!("damage at ({}, {}) m, error {} m", fmt_sig9(loc.x), fmt_sig9(loc.y), err_text),
            )
        }
        None => ("no_detection\n".to_string(), EXIT_NO_DETECTION, "no detection: the damage map is all zero".into()),
    };
    run.write("location.txt", report)?;
    run.finish(code, summary)
}

fn echo_scenario(run: &mut Run, s: &PlateScenario) {
    run.num("plate.width_m", s.width);
    run.num("plate.height_m", s.height);
    run.int("transducers", s.transducers.len() as u64);
    run.text("mode", &s.mode.to_string());
    if let Ok(vg) = s.imaging_velocity() {
        run.num("imaging_vg_mps", vg);
    }
    run.num("excitation.fc_hz", s.excitation.f_center);
    run.int("excitation.cycles", s.excitation.n_cycles as u64);
    run.num("excitation.amplitude_vpp", s.excitation.amplitude_pp);
    run.num("sample_rate_hz", s.sample_rate);
    run.num("attenuation_alpha_per_m", s.attenuation_alpha);
    run.flag("edge_echoes", s.edge_echoes);
    if let Some(d) = s.damage {
        run.num("damage.x_m", d.position[0]);
        run.num("damage.y_m", d.position[1]);
        run.num("damage.coeff", d.coeff);
    }
}
