use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Largest diagonal stabilizer tried before a factorization is declared failed.
pub const MAX_JITTER: f64 = 1e-2;

/// Starting point for escalation when the configured jitter is zero.
const FIRST_NONZERO_JITTER: f64 = 1e-8;

/// Cholesky factor of `a + jitter * I`, retrying with ten times the jitter
/// until it succeeds or the jitter exceeds [`MAX_JITTER`].
///
/// Returns the factor and the jitter that was actually applied.
pub(crate) fn cholesky_with_jitter(
    a: &DMatrix<f64>,
    jitter: f64,
    matrix: &'static str,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut j = jitter;
    loop {
        let mut m = a.clone();
        if j > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += j;
            }
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, j));
        }
        let next = if j == 0.0 { FIRST_NONZERO_JITTER } else { j * 10.0 };
        if next > MAX_JITTER * (1.0 + 1e-9) {
            return Err(Error::Factorization { matrix, jitter: j });
        }
        log::debug!("{matrix}: Cholesky failed at jitter {j:e}, retrying with {next:e}");
        j = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escalates_on_singular_matrix() {
        // rank one: needs a positive jitter to factor
        let a = DMatrix::from_element(3, 3, 1.0);
        let (_, used) = cholesky_with_jitter(&a, 0.0, "test").unwrap();
        assert_eq!(used, 1e-8);
    }

    #[test]
    fn gives_up_on_indefinite_matrix() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        match cholesky_with_jitter(&a, 1e-8, "K_test") {
            Err(Error::Factorization { matrix, jitter }) => {
                assert_eq!(matrix, "K_test");
                assert!(jitter <= MAX_JITTER * 1.000001 && jitter > MAX_JITTER / 2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
