//! The UJI code paths end to end, on generated files in the UJI layout.

mod common;

use sgpri::bench::{run_bench, sgp_label, BenchConfig};
use sgpri::dataset::{load_uji, SplitMode, DEFAULT_FILL};
use sgpri::kernel::KernelConfig;
use sgpri::locate::{
    evaluate, floor_hit_rate, train_all_floors, BuildingMode, Deployment, FloorAssigner, TrainConfig,
};

fn split() -> (sgpri::FingerprintDataset, sgpri::FingerprintDataset) {
    let dir = tempfile::tempdir().unwrap();
    let (t, v) = common::write_uji_pair(dir.path());
    let all = load_uji(&t, DEFAULT_FILL)
        .unwrap()
        .concat(&load_uji(&v, DEFAULT_FILL).unwrap())
        .unwrap();
    all.split(SplitMode::Random { fraction: 0.8, seed: 42 }).unwrap()
}

#[test]
fn single_floor_bench_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (t, _) = common::write_uji_pair(dir.path());
    let floor = load_uji(&t, DEFAULT_FILL).unwrap().subset(1, 3);
    assert_eq!(floor.len(), 160);
    let (train, test) = floor.split(SplitMode::Random { fraction: 0.8, seed: 42 }).unwrap();
    assert_eq!(train.len(), 128);
    let cfg = BenchConfig { repeats: 1, ..Default::default() };
    let r = run_bench(&train, &test, &[30.0, 50.0], &cfg).unwrap();
    let names: Vec<&str> = r.rows.iter().map(|r| r.model.as_str()).collect();
    assert_eq!(names, ["GP", "SGP-RI(30%)", "SGP-RI(50%)", "kNN"]);
    let s30 = r.row(&sgp_label(30.0)).unwrap().sparsity.unwrap();
    let s50 = r.row(&sgp_label(50.0)).unwrap().sparsity.unwrap();
    assert!(s30 < s50 && s50 <= 100.0, "{s30} {s50}");
    assert!(r.rows.iter().all(|row| row.mean_2d.is_finite() && row.fit_seconds >= 0.0));
}

#[test]
fn floor_vote_on_held_out_rows() {
    let (train, test) = split();
    let assigner = FloorAssigner::new(Deployment::from_beacons(&train).unwrap(), train.clone()).unwrap();
    let rate = floor_hit_rate(&assigner, &test).unwrap();
    assert!(rate >= 0.9, "floor hit rate {rate}");
}

#[test]
fn multi_floor_3d_error() {
    let (train, test) = split();
    let models = train_all_floors(&train, &TrainConfig::sparse(KernelConfig::default(), 50.0, 42)).unwrap();
    assert_eq!(models.len(), 12);
    let assigner = FloorAssigner::new(Deployment::from_beacons(&train).unwrap(), train.clone()).unwrap();
    let known = evaluate(&models, &assigner, &test, BuildingMode::KnownBuilding).unwrap();
    assert_eq!(known.building_hit, 1.0);
    let expected = known.mean_2d + (1.0 - known.floor_hit) * 4.0;
    assert!((known.mean_3d - expected).abs() < 1e-9);
    let strongest = evaluate(&models, &assigner, &test, BuildingMode::StrongestNode).unwrap();
    assert!(strongest.building_hit >= 0.95, "building hit {}", strongest.building_hit);
    assert!(strongest.mean_3d >= known.mean_3d - 1e-9);
}
