//! Singular values by one-sided Jacobi orthogonalization.
//!
//! Column pairs are rotated until mutually orthogonal; the singular values
//! are the final column norms. This keeps high relative accuracy even for
//! tiny singular values, which matters for condition numbers and
//! singularity tests.

use super::{Complex64, ComplexMatrix};

const MAX_SWEEPS: usize = 60;
const ORTHO_TOL: f64 = 1e-15;

/// All singular values of `m`, sorted descending. Always nonempty for a
/// constructed matrix.
pub(super) fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    // Work on whichever orientation has no more columns than rows; the
    // nonzero singular values agree and the extra exact zeros of the wider
    // orientation are not wanted.
    let mut a = if m.rows() >= m.cols() {
        m.clone()
    } else {
        m.adjoint()
    };
    let rows = a.rows();
    let cols = a.cols();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = Complex64::new(0.0, 0.0);
                for k in 0..rows {
                    let x = a[(k, p)];
                    let y = a[(k, q)];
                    app += x.norm_sqr();
                    aqq += y.norm_sqr();
                    apq += x.conj() * y;
                }
                let norm_apq = apq.norm();
                if norm_apq <= ORTHO_TOL * (app * aqq).sqrt() || norm_apq == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = apq / norm_apq;
                let tau = (aqq - app) / (2.0 * norm_apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let s_phase = phase * s;
                let s_phase_conj = s_phase.conj();
                for k in 0..rows {
                    let x = a[(k, p)];
                    let y = a[(k, q)];
                    a[(k, p)] = x * c - y * s_phase_conj;
                    a[(k, q)] = x * s_phase + y * c;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sv: Vec<f64> = (0..cols)
        .map(|j| {
            (0..rows)
                .map(|k| a[(k, j)].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).expect("finite singular values"));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_singular_values() {
        let m = ComplexMatrix::from_diag(&[3.0, -1.0, 2.0]);
        let sv = singular_values(&m);
        assert!((sv[0] - 3.0).abs() < 1e-14);
        assert!((sv[1] - 2.0).abs() < 1e-14);
        assert!((sv[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rectangular_orientations_agree() {
        let wide = ComplexMatrix::from_real(2, 3, &[1.0, 0.0, 2.0, 0.0, -1.0, 1.0]).unwrap();
        let tall = wide.adjoint();
        let a = singular_values(&wide);
        let b = singular_values(&tall);
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 2);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_singular_value_kept_accurately() {
        // cond = 1e8 with well-separated scales.
        let m = ComplexMatrix::from_diag(&[1.0, 1e-8]);
        let sv = singular_values(&m);
        assert!((sv[0] - 1.0).abs() < 1e-14);
        assert!((sv[1] - 1e-8).abs() < 1e-22);
    }
}
