//! Rational-quadratic kernel values and Gram matrices.
//!
//! ```bash
//! cargo run --example kernel_gram
//! ```

use sgpri::kernel::{gram, ratquad, KernelConfig};
use sgpri::RowMatrix;

fn main() -> sgpri::Result<()> {
    let cfg = KernelConfig::default();
    println!("alpha = {}, l = {}", cfg.alpha, cfg.length_scale);

    // squared distance 400 dBm^2 gives (1 + 400 / 400)^-2
    let a = [-60.0, -70.0, -80.0, -90.0];
    let b = [-50.0, -60.0, -70.0, -80.0];
    println!("k(a, b) = {}", ratquad(&a, &b, &cfg)?);

    let scans = RowMatrix::from_rows(&[
        [-45.0, -80.0, -110.0],
        [-48.0, -77.0, -110.0],
        [-90.0, -52.0, -70.0],
    ])?;
    let k = gram(&scans, &scans, &cfg)?;
    println!("Gram matrix of three scans:{k:.4}");
    Ok(())
}
