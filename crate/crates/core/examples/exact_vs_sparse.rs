//! Exact GP against FITC sparse GP on one synthetic floor: predictions,
//! fit time, and the collapse of FITC onto the exact GP when every training
//! input is an inducing input.
//!
//! ```bash
//! cargo run --release --example exact_vs_sparse
//! ```

use std::time::Instant;

use sgpri::oracles::{gen_synthetic, SyntheticSpec};
use sgpri::reduce::{select_inducing, sparsity_to_grid};
use sgpri::{GpModel, KernelConfig, SgpModel};

fn main() -> sgpri::Result<()> {
    let spec = SyntheticSpec { n_rps: 100, samples_per_rp: 6, ..Default::default() };
    let mut periods = gen_synthetic(&spec, 2)?;
    let (train, test) = (periods.remove(0), periods.remove(0));
    let cfg = KernelConfig::default();
    let x = train.features();
    let cx = train.xs().iter().sum::<f64>() / train.len() as f64;
    let y: Vec<f64> = train.xs().iter().map(|v| v - cx).collect();

    let t = Instant::now();
    let exact = GpModel::fit(x, &y, &cfg)?;
    println!("exact GP: N = {}, fit {:.3}s", exact.n_train(), t.elapsed().as_secs_f64());

    for pct in [20.0, 50.0] {
        let grid = sparsity_to_grid(&train, pct, 5.0, 0)?;
        let z = x.select_rows(&select_inducing(&train, &grid)?);
        let t = Instant::now();
        let sparse = SgpModel::fit(x, &y, &z, &cfg)?;
        let fit = t.elapsed().as_secs_f64();
        let (pe, ps) = (exact.predict(test.features())?, sparse.predict(test.features())?);
        let gap = pe.mean.iter().zip(&ps.mean).map(|(a, b)| (a - b).abs()).sum::<f64>() / pe.mean.len() as f64;
        println!(
            "FITC {:5.1}% (M = {}): fit {fit:.3}s, mean |exact - sparse| = {gap:.3} m",
            sparse.sparsity(),
            sparse.n_inducing()
        );
    }

    let full = SgpModel::fit(x, &y, x, &cfg)?;
    let (a, b) = (exact.predict(test.features())?, full.predict(test.features())?);
    let worst = a.mean.iter().zip(&b.mean).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    println!("FITC with Z = X: largest mean difference {worst:.2e}");
    Ok(())
}
