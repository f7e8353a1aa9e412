//! Multi-building evaluation: one localizer per floor, building from the
//! strongest node or from ground truth, floor by neighbour-floor vote, and
//! the penalized 3D error.
//!
//! ```bash
//! cargo run --release --example multi_floor
//! ```

use sgpri::dataset::SplitMode;
use sgpri::locate::{evaluate, train_all_floors, BuildingMode, Deployment, FloorAssigner};
use sgpri::oracles::{gen_multi_floor, MultiFloorSpec};
use sgpri::{KernelConfig, TrainConfig};

fn main() -> sgpri::Result<()> {
    let ds = gen_multi_floor(&MultiFloorSpec { floors: 4, ..Default::default() })?;
    let (train, test) = ds.split(SplitMode::Random { fraction: 0.8, seed: 5 })?;

    let models = train_all_floors(&train, &TrainConfig::sparse(KernelConfig::default(), 50.0, 5))?;
    let deployment = Deployment::from_beacons(&train)?;
    for n in &deployment.nodes {
        println!("node {} at ({:.1}, {:.1}) listens on {}", n.id, n.location.0, n.location.1, train.column_ids()[n.beacon]);
    }
    let assigner = FloorAssigner::new(deployment, train)?;

    for mode in [BuildingMode::KnownBuilding, BuildingMode::StrongestNode] {
        let m = evaluate(&models, &assigner, &test, mode)?;
        println!(
            "{mode:?}: building hit {:.3}, floor hit {:.3}, 2D {:.2} m, 3D {:.2} m",
            m.building_hit, m.floor_hit, m.mean_2d, m.mean_3d
        );
    }
    Ok(())
}
