//! Dense linear solve backing the least-squares fits.

use super::ModelError;

/// Pivot magnitude below which a system counts as rank deficient.
pub(crate) const PIVOT_TOLERANCE: f64 = 1e-10;

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is row-major `k x k` and is consumed along with `b`. The systems here
/// are small normal equations, so a direct dense solve is the right tool.
pub(crate) fn solve_linear_system(
    mut a: Vec<f64>,
    mut b: Vec<f64>,
    k: usize,
) -> Result<Vec<f64>, ModelError> {
    debug_assert_eq!(a.len(), k * k);
    debug_assert_eq!(b.len(), k);
    for col in 0..k {
        let mut pivot = col;
        for row in col + 1..k {
            if a[row * k + col].abs() > a[pivot * k + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * k + col].abs() < PIVOT_TOLERANCE {
            return Err(ModelError::RankDeficient);
        }
        if pivot != col {
            for c in 0..k {
                a.swap(col * k + c, pivot * k + c);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * k + col];
        for row in col + 1..k {
            let factor = a[row * k + col] / diag;
            if factor != 0.0 {
                for c in col..k {
                    a[row * k + c] -= factor * a[col * k + c];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut acc = b[row];
        for c in row + 1..k {
            acc -= a[row * k + c] * x[c];
        }
        x[row] = acc / a[row * k + row];
    }
    Ok(x)
}
