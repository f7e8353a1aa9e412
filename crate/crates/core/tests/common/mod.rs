#![allow(dead_code)]

use std::path::{Path, PathBuf};

use sgpri::dataset::{FingerprintDataset, DEFAULT_FILL};
use sgpri::oracles::{gen_multi_floor, MultiFloorSpec};

pub fn surrogate_spec(seed: u64) -> MultiFloorSpec {
    MultiFloorSpec {
        buildings: 3,
        floors: 4,
        rps_per_floor: 40,
        samples_per_rp: 4,
        waps_per_floor: 8,
        seed,
        ..Default::default()
    }
}

pub fn surrogate(seed: u64) -> FingerprintDataset {
    gen_multi_floor(&surrogate_spec(seed)).unwrap()
}

/// Writes UJI-layout training and validation files into `dir`.
pub fn write_uji_pair(dir: &Path) -> (PathBuf, PathBuf) {
    let train = dir.join("trainingData.csv");
    let validation = dir.join("validationData.csv");
    surrogate(11).write_uji(&train, DEFAULT_FILL).unwrap();
    surrogate(12).write_uji(&validation, DEFAULT_FILL).unwrap();
    (train, validation)
}
