//! Single-floor localization: train a localizer, predict positions with
//! uncertainty, and score it against k-NN.
//!
//! ```bash
//! cargo run --release --example floor_localization
//! ```

use sgpri::baseline::knn_regress;
use sgpri::dataset::SplitMode;
use sgpri::locate::evaluate_floor;
use sgpri::oracles::{gen_synthetic, SyntheticSpec};
use sgpri::{FloorLocalizer, KernelConfig, KnnConfig, TrainConfig};

fn main() -> sgpri::Result<()> {
    let spec = SyntheticSpec { samples_per_rp: 10, ..Default::default() };
    let ds = gen_synthetic(&spec, 1)?.remove(0);
    let (train, test) = ds.split(SplitMode::Random { fraction: 0.8, seed: 3 })?;

    for cfg in [TrainConfig::exact(KernelConfig::default()), TrainConfig::sparse(KernelConfig::default(), 40.0, 3)] {
        let loc = FloorLocalizer::train(&train, &cfg)?;
        let m = evaluate_floor(&loc, &test)?;
        println!(
            "{:?}: {} WAPs kept, sparsity {:.1}%, fit {:.3}s, mean 2D error {:.2} m",
            cfg.inducing,
            loc.columns.achieved,
            loc.sparsity(),
            loc.train_seconds,
            m.mean_2d
        );
        let p = loc.predict_position(test.rssi(0))?;
        let t = test.labels()[0];
        println!(
            "  first test scan at ({:.1}, {:.1}) -> ({:.1} +/- {:.2}, {:.1} +/- {:.2})",
            t.x, t.y, p.x, p.sd_x, p.y, p.sd_y
        );
    }

    let knn = KnnConfig::default();
    let err: f64 = (0..test.len())
        .map(|i| {
            let (x, y) = knn_regress(&train, &knn, test.rssi(i)).unwrap();
            let t = test.labels()[i];
            ((x - t.x).powi(2) + (y - t.y).powi(2)).sqrt()
        })
        .sum::<f64>()
        / test.len() as f64;
    println!("k-NN (k = {}): mean 2D error {err:.2} m", knn.k);
    Ok(())
}
