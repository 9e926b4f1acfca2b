//! Dense LU factorisation with partial pivoting, sized for |S| up to a few
//! hundred.

use crate::error::{ClareError, Result};
use crate::scalar::Scalar;

/// Solves `a * x = b` in place for a row-major `n x n` matrix.
pub(crate) fn solve_dense<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, n: usize) -> Result<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i * n + col]
                    .abs()
                    .partial_cmp(&a[j * n + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if a[pivot * n + col].abs() <= T::epsilon() {
            return Err(ClareError::Singular("state visitation"));
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[row * n + k] = a[row * n + k] - factor * v;
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system_with_pivoting() {
        // [0 1; 2 1] x = [1; 4]  ->  x = [1.5, 1]
        let x = solve_dense(vec![0.0, 1.0, 2.0, 1.0], vec![1.0, 4.0], 2).unwrap();
        assert!((x[0] - 1.5f64).abs() < 1e-15);
        assert!((x[1] - 1.0f64).abs() < 1e-15);
    }

    #[test]
    fn singular_is_reported() {
        assert!(solve_dense(vec![1.0f64, 2.0, 2.0, 4.0], vec![1.0, 1.0], 2).is_err());
    }
}
