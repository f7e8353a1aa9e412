//! Loading, imputation, filtering and splitting of fingerprint files.
//!
//! ```bash
//! cargo run --example dataset_prep
//! ```

use sgpri::dataset::{load_any, DEFAULT_FILL};
use sgpri::oracles::{gen_multi_floor, MultiFloorSpec};
use sgpri::SplitMode;

fn main() -> sgpri::Result<()> {
    let dir = std::env::temp_dir().join("sgpri-dataset-prep");
    std::fs::create_dir_all(&dir).map_err(|e| sgpri::Error::Config(e.to_string()))?;

    // a file in the UJI layout, undetected readings written as 100
    let uji = dir.join("trainingData.csv");
    gen_multi_floor(&MultiFloorSpec::default())?.write_uji(&uji, DEFAULT_FILL)?;

    let ds = load_any(&uji, DEFAULT_FILL)?;
    println!("{} rows x {} WAPs, floors {:?}", ds.len(), ds.n_waps(), ds.floors());

    let floor = ds.subset(1, 2);
    let (train, test) = floor.split(SplitMode::Random { fraction: 0.8, seed: 9 })?;
    println!("building 1 floor 2: {} train / {} test", train.len(), test.len());

    let generic = dir.join("b1f2_train.csv");
    train.write_generic(&generic)?;
    assert_eq!(load_any(&generic, DEFAULT_FILL)?, train);
    println!("wrote {}", generic.display());
    Ok(())
}
