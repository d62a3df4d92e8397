//! Matrix inverse by partially pivoted LU elimination.

use super::{Complex64, ComplexMatrix, LinalgError, Result};

/// Inverse of a square matrix. Fails with [`LinalgError::Singular`] when a
/// pivot collapses relative to the matrix scale.
pub(super) fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = m.rows();
    let scale = m.max_abs();
    if scale == 0.0 {
        return Err(LinalgError::Singular(0.0, 0.0));
    }
    // Augmented elimination: [A | I] -> [I | A⁻¹].
    let mut a = m.clone();
    let mut inv = ComplexMatrix::identity(n);
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = a[(col, col)].norm();
        for r in (col + 1)..n {
            let mag = a[(r, col)].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = r;
            }
        }
        if pivot_mag <= 1e-300 + f64::EPSILON * 1e-2 * scale {
            return Err(LinalgError::Singular(pivot_mag, scale));
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(pivot_row, j)];
                a[(pivot_row, j)] = tmp;
                let tmp = inv[(col, j)];
                inv[(col, j)] = inv[(pivot_row, j)];
                inv[(pivot_row, j)] = tmp;
            }
        }
        let pivot = a[(col, col)];
        let pivot_inv = Complex64::new(1.0, 0.0) / pivot;
        for j in 0..n {
            a[(col, j)] *= pivot_inv;
            inv[(col, j)] *= pivot_inv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[(r, col)];
            if factor.re == 0.0 && factor.im == 0.0 {
                continue;
            }
            for j in 0..n {
                let acj = a[(col, j)];
                let icj = inv[(col, j)];
                a[(r, j)] -= factor * acj;
                inv[(r, j)] -= factor * icj;
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_inverts_to_itself() {
        let id = ComplexMatrix::identity(3);
        assert!(inverse(&id).unwrap().sub(&id).max_abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(inverse(&m), Err(LinalgError::Singular(_, _))));
    }

    #[test]
    fn permutation_with_pivoting() {
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let inv = inverse(&m).unwrap();
        assert!(inv.sub(&m).max_abs() < 1e-15);
    }
}
