//! Benchmarks on the public UJIIndoorLoc files: the building 1, floor 3
//! error/fit-time table and the multi-building 3D error.
//!
//! ```bash
//! cargo run --release --example uji_benchmark -- /path/to/UJIIndoorLoc
//! ```
//!
//! The directory must contain `trainingData.csv` and `validationData.csv`.

use std::path::PathBuf;

use sgpri::bench::{run_bench, BenchConfig};
use sgpri::dataset::{load_uji, SplitMode, DEFAULT_FILL};
use sgpri::locate::{evaluate, floor_hit_rate, train_all_floors, BuildingMode, Deployment, FloorAssigner};
use sgpri::{KernelConfig, TrainConfig};

const SEED: u64 = 42;

fn main() -> sgpri::Result<()> {
    let Some(dir) = std::env::args().nth(1).map(PathBuf::from) else {
        eprintln!("usage: uji_benchmark <dir with trainingData.csv and validationData.csv>");
        std::process::exit(2);
    };
    let training = load_uji(dir.join("trainingData.csv"), DEFAULT_FILL)?;
    let validation = load_uji(dir.join("validationData.csv"), DEFAULT_FILL)?;
    println!("{} training and {} validation rows, {} WAPs", training.len(), validation.len(), training.n_waps());

    let (train, test) = training.subset(1, 3).split(SplitMode::Random { fraction: 0.8, seed: SEED })?;
    let report = run_bench(&train, &test, &[30.0, 40.0, 50.0], &BenchConfig { seed: SEED, ..Default::default() })?;
    report.write_csv(&mut std::io::stdout()).expect("stdout");

    let (train, test) = training.concat(&validation)?.split(SplitMode::Random { fraction: 0.8, seed: SEED })?;
    let models = train_all_floors(&train, &TrainConfig::sparse(KernelConfig::default(), 50.0, SEED))?;
    let assigner = FloorAssigner::new(Deployment::from_beacons(&train)?, train)?;
    println!("floor hit rate {:.3}", floor_hit_rate(&assigner, &test)?);
    let m = evaluate(&models, &assigner, &test, BuildingMode::KnownBuilding)?;
    println!("2D {:.2} m, 3D {:.2} m, floor hit {:.3}", m.mean_2d, m.mean_3d, m.floor_hit);
    Ok(())
}
