// Drives the command functions the `shmkit` binary uses, writing every
// artifact and manifest into a temporary directory.

use clap::Parser;
use shmkit::cli::{run, Cli};

pub fn run_example() -> shmkit::Result<()> {
    let root = std::env::temp_dir().join(format!("shmkit_cli_example_{}", std::process::id()));
    let scenario = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/scenarios/ring8.txt");
    let commands: [&[&str]; 4] =
        [&["dispersion"], &["design-pwm"], &["design-loop"], &["localize", "--scenario", scenario]];
    for args in commands {
        let out = root.join(args[0]).display().to_string();
        let argv: Vec<&str> = ["shmkit"].iter().chain(args).chain(&["--out", out.as_str()]).copied().collect();
        let cli = Cli::try_parse_from(argv).expect("valid command line");
        let outcome = run(&cli)?;
        println!("{:<12} exit {}  {}", args[0], outcome.exit_code, outcome.summary);
        println!("             outputs: {}", outcome.manifest.outputs.join(", "));
    }
    std::fs::remove_dir_all(&root)?;
    Ok(())
}

fn main() -> shmkit::Result<()> {
    run_example()
}
