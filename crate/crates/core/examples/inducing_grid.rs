//! Grid-based inducing-point selection and the sparsity-to-grid sizing rule.
//!
//! ```bash
//! cargo run --example inducing_grid
//! ```

use sgpri::oracles::{gen_synthetic, SyntheticSpec};
use sgpri::reduce::{indices_to_csv, select_inducing, sparsity_to_grid};
use sgpri::GridSpec;

fn main() -> sgpri::Result<()> {
    let ds = gen_synthetic(&SyntheticSpec::default(), 1)?.remove(0);

    for eta in [1, 2, 4] {
        let grid = GridSpec { origin: (0.0, 0.0), cell_size: 5.0, max_per_cell: eta, seed: 7 };
        let idx = select_inducing(&ds, &grid)?;
        println!(
            "eta = {eta}: {} of {} rows (bound L x eta = {})",
            idx.len(),
            ds.len(),
            grid.cell_count(&ds) * eta
        );
    }

    for pct in [25.0, 50.0, 75.0] {
        let grid = sparsity_to_grid(&ds, pct, 5.0, 7)?;
        let idx = select_inducing(&ds, &grid)?;
        println!(
            "target {pct}%: eta = {}, achieved {:.1}%",
            grid.max_per_cell,
            100.0 * idx.len() as f64 / ds.len() as f64
        );
    }

    let grid = sparsity_to_grid(&ds, 10.0, 10.0, 7)?;
    let csv = indices_to_csv(&select_inducing(&ds, &grid)?);
    println!("first rows of the index CSV:\n{}", csv.lines().take(5).collect::<Vec<_>>().join("\n"));
    Ok(())
}
