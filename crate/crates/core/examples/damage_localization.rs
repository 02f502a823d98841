// Delay-and-sum imaging of a scatterer inside a ring of eight transducers
// on a one-foot plate, with the damage map saved as a PGM image.

use std::path::Path;

use shmkit::localization::{image, locate, ImagingOptions};
use shmkit::plate::{distance, synthesize_measurements, PlateScenario};

const SCENARIO: &str = include_str!("scenarios/ring8.txt");

pub fn run_example() -> shmkit::Result<()> {
    let scenario = PlateScenario::parse(SCENARIO, "ring8.txt", None)?;
    let set = synthesize_measurements(&scenario, scenario.sample_rate)?;
    let options = ImagingOptions::for_scenario(&scenario)?;
    let imaging = image(&scenario, &set, &options)?;
    let truth = scenario.damage.expect("scenario has damage").position;
    match locate(&imaging.map)? {
        Some(loc) => println!(
            "estimated ({:.4}, {:.4}) m, true ({:.4}, {:.4}) m, error {:.2} mm",
            loc.x,
            loc.y,
            truth[0],
            truth[1],
            distance([loc.x, loc.y], truth) * 1e3
        ),
        None => println!("no detection"),
    }
    let out = std::env::temp_dir().join("shmkit_damage_map.pgm");
    std::fs::write(&out, imaging.map.to_pgm())?;
    println!("map written to {}", Path::new(&out).display());
    Ok(())
}

fn main() -> shmkit::Result<()> {
    run_example()
}
