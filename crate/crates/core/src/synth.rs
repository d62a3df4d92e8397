//! Seeded synthesis of test operators.
//!
//! Every generator takes an explicit RNG so fixtures are reproducible from a
//! seed alone; tests freeze seeds and assert against values computed by
//! independent oracles. The distributions are not calibrated for statistical
//! uniformity — they only need to produce well-conditioned, generic matrices.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{herm_sqrt, ComplexMatrix, HermitianMatrix};

/// Deterministic RNG for fixture synthesis.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Dense matrix with entries uniform in the unit square of the plane.
pub fn random_matrix<R: Rng>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let rows: Vec<Vec<Complex64>> = (0..dim)
        .map(|_| (0..dim).map(|_| random_complex(rng)).collect())
        .collect();
    ComplexMatrix::from_rows(&rows).expect("random entries are finite")
}

/// Unitary matrix, produced by orthonormalizing a random matrix.
///
/// Modified Gram–Schmidt with a second orthogonalization pass keeps the
/// columns orthonormal to machine precision; degenerate draws (near-dependent
/// columns) are retried with fresh randomness.
pub fn random_unitary<R: Rng>(dim: usize, rng: &mut R) -> ComplexMatrix {
    assert!(dim > 0, "unitary dimension must be positive");
    loop {
        let m = random_matrix(dim, rng);
        let mut cols: Vec<Vec<Complex64>> = (0..dim)
            .map(|j| (0..dim).map(|i| m[(i, j)]).collect())
            .collect();
        let mut ok = true;
        'gs: for j in 0..dim {
            for _pass in 0..2 {
                for k in 0..j {
                    let proj: Complex64 = (0..dim)
                        .map(|i| cols[k][i].conj() * cols[j][i])
                        .sum();
                    for i in 0..dim {
                        let correction = proj * cols[k][i];
                        cols[j][i] -= correction;
                    }
                }
            }
            let norm: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-6 {
                ok = false;
                break 'gs;
            }
            for entry in cols[j].iter_mut() {
                *entry /= norm;
            }
        }
        if !ok {
            continue;
        }
        let rows: Vec<Vec<Complex64>> = (0..dim)
            .map(|i| (0..dim).map(|j| cols[j][i]).collect())
            .collect();
        return ComplexMatrix::from_rows(&rows).expect("orthonormalized entries are finite");
    }
}

/// Random Hermitian matrix with entries of unit scale.
pub fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> HermitianMatrix {
    let m = random_matrix(dim, rng);
    HermitianMatrix::symmetrized(m.add(&m.adjoint()).scale(0.5))
}

/// Random positive semidefinite matrix `M* M`.
pub fn random_psd<R: Rng>(dim: usize, rng: &mut R) -> HermitianMatrix {
    let m = random_matrix(dim, rng);
    HermitianMatrix::symmetrized(m.adjoint().matmul(&m))
}

/// Invertible matrix `U₁ · diag(σ) · U₂*` whose condition number is exactly
/// `cond` (singular values log-spaced in `[1/√cond, √cond]`).
pub fn random_invertible_with_cond<R: Rng>(
    dim: usize,
    cond: f64,
    rng: &mut R,
) -> ComplexMatrix {
    assert!(cond >= 1.0, "condition number must be at least 1");
    let u1 = random_unitary(dim, rng);
    let u2 = random_unitary(dim, rng);
    let hi = cond.sqrt();
    let lo = 1.0 / hi;
    let sigma: Vec<f64> = if dim == 1 {
        vec![1.0]
    } else {
        (0..dim)
            .map(|k| {
                let t = k as f64 / (dim - 1) as f64;
                hi.powf(1.0 - t) * lo.powf(t)
            })
            .collect()
    };
    u1.matmul(&ComplexMatrix::from_diag(&sigma))
        .matmul(&u2.adjoint())
}

/// Operator `L U L⁻¹` similar to a random unitary via a positive conjugator
/// of condition number `cond`. Returns `(operator, conjugator, unitary)`.
///
/// The conjugator is positive definite, so the operator is a generic example
/// that is power bounded in both directions but not itself unitary.
pub fn conjugated_unitary<R: Rng>(
    dim: usize,
    cond: f64,
    rng: &mut R,
) -> (ComplexMatrix, HermitianMatrix, ComplexMatrix) {
    let u = random_unitary(dim, rng);
    let g = random_invertible_with_cond(dim, cond, rng);
    // Positive part of g: (g* g)^{1/2}, condition number again `cond`.
    let gram = HermitianMatrix::symmetrized(g.adjoint().matmul(&g));
    let l = herm_sqrt(&gram).expect("gram of invertible matrix is positive definite");
    let l_inv = crate::linalg::inverse(l.matrix()).expect("positive definite conjugator");
    let t = l.matrix().matmul(&u).matmul(&l_inv);
    (t, l, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{condition_number, unitary_residual};

    #[test]
    fn random_unitary_is_unitary_to_machine_precision() {
        let mut r = rng(7);
        for dim in [1usize, 2, 3, 5, 8] {
            let u = random_unitary(dim, &mut r);
            assert!(
                unitary_residual(&u).unwrap() < 1e-12,
                "dim {dim} draw is not unitary"
            );
        }
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let a = random_matrix(4, &mut rng(42));
        let b = random_matrix(4, &mut rng(42));
        assert_eq!(a.sub(&b).max_abs(), 0.0);
    }

    #[test]
    fn invertible_with_cond_hits_requested_condition_number() {
        let mut r = rng(3);
        let m = random_invertible_with_cond(5, 25.0, &mut r);
        let kappa = condition_number(&m).unwrap();
        assert!(
            (kappa - 25.0).abs() < 1e-9 * 25.0,
            "condition number {kappa} != 25"
        );
    }

    #[test]
    fn conjugated_unitary_round_trips() {
        let mut r = rng(11);
        let (t, l, u) = conjugated_unitary(4, 9.0, &mut r);
        let l_inv = crate::linalg::inverse(l.matrix()).unwrap();
        let back = l_inv.matmul(&t).matmul(l.matrix());
        assert!(back.sub(&u).max_abs() < 1e-10);
    }

    #[test]
    fn random_psd_has_nonnegative_spectrum() {
        let mut r = rng(5);
        let p = random_psd(6, &mut r);
        let eigs = crate::linalg::herm_eigenvalues(&p).unwrap();
        assert!(eigs[0] > -1e-12, "psd spectrum dipped to {}", eigs[0]);
    }
}
