//! Dense kernels for the tiny (d×d) symmetric positive-definite systems that
//! appear in every column update.

use crate::error::{Error, Result};

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, `n×n`).
///
/// `a` is overwritten by its lower Cholesky factor and `b` by the solution.
/// Only the lower triangle of `a` is read.
pub fn cholesky_solve_in_place(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);

    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / diag;
        }
    }

    // L y = b
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    // L^T x = y
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_diagonal_system() {
        let mut a = vec![2.0, 0.0, 0.0, 1.0];
        let mut b = vec![2.0, 0.0];
        cholesky_solve_in_place(&mut a, &mut b, 2).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-15 && b[1] == 0.0, "{b:?}");
    }

    #[test]
    fn solves_dense_3x3() {
        // A = M M^T + I for a fixed M, x = (1, -2, 0.5)
        let a0 = [
            [6.0, 2.0, 1.0],
            [2.0, 5.0, 2.0],
            [1.0, 2.0, 4.0],
        ];
        let x = [1.0, -2.0, 0.5];
        let mut b: Vec<f64> = a0.iter().map(|row| dot(row, &x)).collect();
        let mut a: Vec<f64> = a0.iter().flatten().copied().collect();
        cholesky_solve_in_place(&mut a, &mut b, 3).unwrap();
        for (got, want) in b.iter().zip(x) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_indefinite_and_nan() {
        let mut a = vec![1.0, 2.0, 2.0, 1.0];
        let mut b = vec![1.0, 1.0];
        assert_eq!(
            cholesky_solve_in_place(&mut a, &mut b, 2),
            Err(Error::NotPositiveDefinite)
        );
        let mut a = vec![f64::NAN];
        let mut b = vec![1.0];
        assert!(cholesky_solve_in_place(&mut a, &mut b, 1).is_err());
    }
}
