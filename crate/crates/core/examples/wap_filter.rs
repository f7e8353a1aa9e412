//! Column reduction: dead access points first, then the similarity scan
//! that drops near-duplicate columns.
//!
//! ```bash
//! cargo run --example wap_filter
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgpri::dataset::DEFAULT_FILL;
use sgpri::oracles::{gen_multi_floor, MultiFloorSpec};
use sgpri::reduce::{drop_dead_columns, wap_filter};
use sgpri::{RowMatrix, WapFilterConfig};

fn main() -> sgpri::Result<()> {
    let ds = gen_multi_floor(&MultiFloorSpec::default())?.subset(0, 1);
    let live = drop_dead_columns(&ds, DEFAULT_FILL)?;
    println!("{} of {} columns are ever detected on this floor", live.achieved, ds.n_waps());
    let x = ds.features().select_columns(&live.kept);

    // append a twin of every live column, within 1 dBm of the original
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows: Vec<Vec<f64>> = x
        .rows_iter()
        .map(|r| {
            let twins: Vec<f64> = r.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
            [r, &twins].concat()
        })
        .collect();
    let doubled = RowMatrix::from_rows(&rows)?;
    let w = doubled.ncols();

    let cfg = WapFilterConfig::default();
    let sel = wap_filter(&doubled, 1, &cfg)?;
    let twins = sel.kept.iter().filter(|&&j| j >= w / 2).count();
    println!("full scan: {} of {w} columns survive, {twins} of them twins", sel.achieved);

    let sel = wap_filter(&doubled, w - 4, &cfg)?;
    println!("target {}: kept {:?}", w - 4, sel.kept);
    Ok(())
}
