//! Dense complex matrices and the spectral kernel used everywhere else.
//!
//! Everything spectral routes through one primitive: the Hermitian
//! eigendecomposition ([`herm_eigen`]). Square roots, positivity tests and
//! condition numbers of Hermitian matrices are derived from it; general
//! (non-Hermitian) eigenvalues and singular values have their own small
//! kernels in [`eigen`] and [`svd`].
//!
//! Matrices are immutable values: operations return new matrices and never
//! mutate their inputs. Entries are `num_complex::Complex<f64>` and are
//! required to be finite at construction.

mod eigen;
mod lu;
mod svd;

use thiserror::Error;

pub use num_complex::Complex64;

/// Tolerances for the structural checks in this module.
///
/// These are pinned here so every caller agrees on what "Hermitian",
/// "positive semidefinite" and "singular" mean numerically.
pub mod tol {
    /// Relative asymmetry `‖M − M*‖₂ / ‖M‖₂` above which a matrix is
    /// rejected as non-Hermitian.
    pub const HERMITIAN_REL: f64 = 1e-12;
    /// Eigenvalues of a Hermitian matrix above `PSD_FLOOR_REL · ‖M‖₂` below
    /// zero are clamped to zero by [`super::herm_sqrt`]; anything lower is a
    /// genuine negativity and is rejected.
    pub const PSD_FLOOR_REL: f64 = 1e-12;
    /// A matrix counts as numerically singular when its smallest singular
    /// value is at most `SINGULAR_REL` times its largest.
    pub const SINGULAR_REL: f64 = 1e-14;
}

/// Errors for matrix construction and the spectral operations.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is not Hermitian: relative asymmetry {0:.3e} exceeds {1:.3e}")]
    NotHermitian(f64, f64),
    #[error("matrix is not positive semidefinite: eigenvalue {0:.6e} below floor {1:.6e}")]
    NotPsd(f64, f64),
    #[error("matrix is numerically singular: smallest singular value {0:.3e} vs largest {1:.3e}")]
    Singular(f64, f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry at row {0}, column {1}")]
    NonFinite(usize, usize),
    #[error("matrix dimensions must be positive: {0}x{1}")]
    EmptyDimension(usize, usize),
    #[error("eigenvalue iteration did not converge")]
    EigenNoConverge,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyDimension(rows, cols));
        }
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected {} entries for a {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                data.len()
            )));
        }
        let m = ComplexMatrix { rows, cols, data };
        for i in 0..rows {
            for j in 0..cols {
                let z = m[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(LinalgError::NonFinite(i, j));
                }
            }
        }
        Ok(m)
    }

    /// Builds a matrix from rows of entries.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(LinalgError::EmptyDimension(0, 0));
        }
        let cols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(LinalgError::DimensionMismatch(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            data.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    /// Square matrix of zeros.
    pub(crate) fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Diagonal matrix with the given real diagonal.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Diagonal matrix with the given complex diagonal.
    pub fn from_complex_diag(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    /// Entrywise sum. Panics if shapes differ.
    pub fn add(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix addition requires equal shapes"
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Entrywise difference. Panics if shapes differ.
    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix subtraction requires equal shapes"
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Scalar multiple by a real factor.
    pub fn scale(&self, factor: f64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    /// Matrix product. Panics if the inner dimensions differ.
    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matrix product requires inner dimensions to agree"
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// True if every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `n`-th matrix power for square matrices, by repeated squaring.
    /// Panics if not square; `pow(0)` is the identity.
    pub fn pow(&self, n: u64) -> ComplexMatrix {
        assert!(self.is_square(), "matrix power requires a square matrix");
        let mut result = Self::identity(self.rows);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.matmul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Square matrix certified Hermitian at construction
/// (`‖M − M*‖₂ ≤ 1e-12 · ‖M‖₂`).
#[derive(Debug, Clone)]
pub struct HermitianMatrix {
    m: ComplexMatrix,
}

impl HermitianMatrix {
    /// Validates squareness and Hermitian symmetry within [`tol::HERMITIAN_REL`].
    ///
    /// The check is exact in the operator norm; cheap Frobenius bounds decide
    /// the clear cases and the 2-norm is only computed when they are
    /// inconclusive.
    pub fn try_new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare(m.rows, m.cols));
        }
        let diff = m.sub(&m.adjoint());
        let diff_f = diff.fro_norm();
        if diff_f == 0.0 {
            return Ok(HermitianMatrix { m });
        }
        let m_f = m.fro_norm();
        let sqrt_n = (m.rows as f64).sqrt();
        // ‖Δ‖₂ ≤ ‖Δ‖_F and ‖M‖₂ ≥ ‖M‖_F/√n, so this bound is sufficient.
        if diff_f <= tol::HERMITIAN_REL * m_f / sqrt_n {
            return Ok(HermitianMatrix { m });
        }
        // ‖Δ‖₂ ≥ ‖Δ‖_F/√n and ‖M‖₂ ≤ ‖M‖_F, so this bound is conclusive too.
        if diff_f / sqrt_n > tol::HERMITIAN_REL * m_f {
            let rel = op_norm(&diff) / op_norm(&m).max(f64::MIN_POSITIVE);
            return Err(LinalgError::NotHermitian(rel, tol::HERMITIAN_REL));
        }
        let asym = op_norm(&diff);
        let scale = op_norm(&m);
        if asym <= tol::HERMITIAN_REL * scale {
            Ok(HermitianMatrix { m })
        } else {
            Err(LinalgError::NotHermitian(
                asym / scale.max(f64::MIN_POSITIVE),
                tol::HERMITIAN_REL,
            ))
        }
    }

    /// Projects a square matrix onto its Hermitian part `(M + M*)/2` and
    /// wraps it without further checking. Internal fast path for iteration
    /// kernels whose drift from Hermitian is pure rounding.
    pub(crate) fn symmetrized(m: ComplexMatrix) -> Self {
        assert!(m.is_square(), "symmetrization requires a square matrix");
        let mut s = m.clone();
        for i in 0..m.rows {
            s[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
            for j in (i + 1)..m.cols {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
                s[(i, j)] = avg;
                s[(j, i)] = avg.conj();
            }
        }
        HermitianMatrix { m: s }
    }

    /// Dimension of the matrix.
    pub fn dim(&self) -> usize {
        self.m.rows
    }

    /// The underlying matrix.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.m
    }

    /// Identity as a Hermitian value.
    pub fn identity(n: usize) -> Self {
        HermitianMatrix {
            m: ComplexMatrix::identity(n),
        }
    }

    /// Diagonal Hermitian matrix from a real diagonal.
    pub fn from_diag(diag: &[f64]) -> Self {
        HermitianMatrix {
            m: ComplexMatrix::from_diag(diag),
        }
    }
}

/// Eigendecomposition of a Hermitian matrix: `M = V diag(λ) V*` with real
/// eigenvalues sorted ascending and orthonormal columns in `V`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: ComplexMatrix,
}

impl SpectralDecomposition {
    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary matrix whose columns are the eigenvectors, in eigenvalue order.
    pub fn eigenvectors(&self) -> &ComplexMatrix {
        &self.eigenvectors
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    /// Rebuilds `V diag(λ) V*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_eigenvalues(|l| l).into_matrix()
    }

    /// Builds `V diag(f(λ)) V*` as a Hermitian matrix.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let fl = f(l);
            for i in 0..n {
                scaled[(i, j)] = v[(i, j)] * fl;
            }
        }
        HermitianMatrix::symmetrized(scaled.matmul(&v.adjoint()))
    }
}

/// Conjugate transpose of any matrix.
pub fn adjoint(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint()
}

/// Operator norm (largest singular value).
pub fn op_norm(m: &ComplexMatrix) -> f64 {
    svd::singular_values(m)[0]
}

/// All singular values, descending.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    svd::singular_values(m)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Cyclic Jacobi rotations; the reconstruction error and eigenvector
/// orthogonality defect are both far below `1e-10 · max(1, ‖M‖₂)` at the
/// dimensions this crate targets.
pub fn herm_eigen(h: &HermitianMatrix) -> Result<SpectralDecomposition> {
    let (eigenvalues, v) = eigen::jacobi_hermitian(h.matrix(), true)?;
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: v.expect("vectors requested"),
    })
}

/// Eigenvalues only (ascending) of a Hermitian matrix; cheaper than
/// [`herm_eigen`] when the vectors are not needed.
pub fn herm_eigenvalues(h: &HermitianMatrix) -> Result<Vec<f64>> {
    let (eigenvalues, _) = eigen::jacobi_hermitian(h.matrix(), false)?;
    Ok(eigenvalues)
}

/// Eigenvalues of a general square complex matrix (unordered).
///
/// Householder reduction to Hessenberg form followed by shifted QR.
pub fn general_eigenvalues(m: &ComplexMatrix) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.rows(), m.cols()));
    }
    eigen::general_eigenvalues(m)
}

/// Positive-semidefinite square root `M^{1/2}` of a Hermitian matrix.
///
/// Eigenvalues in `[-1e-12 · ‖M‖₂, 0)` are treated as rounding and clamped
/// to zero; anything more negative is rejected as not PSD.
pub fn herm_sqrt(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let dec = herm_eigen(h)?;
    let scale = dec
        .eigenvalues()
        .iter()
        .fold(0.0f64, |a, &l| a.max(l.abs()));
    let floor = -tol::PSD_FLOOR_REL * scale;
    let min = dec.min_eigenvalue();
    if min < floor {
        return Err(LinalgError::NotPsd(min, floor));
    }
    Ok(dec.map_eigenvalues(|l| l.max(0.0).sqrt()))
}

/// `‖T*T − I‖₂`: how far `T` is from being an isometry.
pub fn isometry_residual(t: &ComplexMatrix) -> Result<f64> {
    if !t.is_square() {
        return Err(LinalgError::NotSquare(t.rows(), t.cols()));
    }
    let n = t.rows();
    let gram = t.adjoint().matmul(t);
    Ok(op_norm(&gram.sub(&ComplexMatrix::identity(n))))
}

/// `max(‖T*T − I‖₂, ‖TT* − I‖₂)`: how far `T` is from being unitary.
pub fn unitary_residual(t: &ComplexMatrix) -> Result<f64> {
    if !t.is_square() {
        return Err(LinalgError::NotSquare(t.rows(), t.cols()));
    }
    let n = t.rows();
    let id = ComplexMatrix::identity(n);
    let left = op_norm(&t.adjoint().matmul(t).sub(&id));
    let right = op_norm(&t.matmul(&t.adjoint()).sub(&id));
    Ok(left.max(right))
}

/// Ratio of the largest to the smallest singular value.
///
/// Fails with [`LinalgError::Singular`] when the smallest singular value is
/// at most `1e-14` times the largest.
pub fn condition_number(m: &ComplexMatrix) -> Result<f64> {
    let sv = svd::singular_values(m);
    let largest = sv[0];
    let smallest = *sv.last().expect("nonempty singular spectrum");
    if smallest <= tol::SINGULAR_REL * largest {
        return Err(LinalgError::Singular(smallest, largest));
    }
    Ok(largest / smallest)
}

/// Inverse of a square matrix by partially pivoted LU.
pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.rows(), m.cols()));
    }
    lu::inverse(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn construction_rejects_bad_shapes_and_entries() {
        assert!(matches!(
            ComplexMatrix::new(0, 2, vec![]),
            Err(LinalgError::EmptyDimension(0, 2))
        ));
        assert!(matches!(
            ComplexMatrix::new(2, 2, vec![c(1.0, 0.0); 3]),
            Err(LinalgError::DimensionMismatch(_))
        ));
        assert!(matches!(
            ComplexMatrix::new(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]),
            Err(LinalgError::NonFinite(0, 1))
        ));
    }

    #[test]
    fn adjoint_swaps_and_conjugates() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(1.0, 2.0), c(3.0, -1.0)],
            vec![c(0.0, 0.5), c(-2.0, 0.0)],
        ])
        .unwrap();
        let a = m.adjoint();
        assert_eq!(a[(0, 0)], c(1.0, -2.0));
        assert_eq!(a[(0, 1)], c(0.0, -0.5));
        assert_eq!(a[(1, 0)], c(3.0, 1.0));
        assert_eq!(a[(1, 1)], c(-2.0, 0.0));
        // Involution.
        assert_eq!(a.adjoint(), m);
    }

    #[test]
    fn matmul_and_pow_agree_on_small_cases() {
        let t = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(2.0, 0.0)],
            vec![c(0.5, 0.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let t2 = t.matmul(&t);
        // This matrix squares to the identity.
        assert!(t2.sub(&ComplexMatrix::identity(2)).max_abs() < 1e-15);
        assert!(t.pow(4).sub(&ComplexMatrix::identity(2)).max_abs() < 1e-15);
        assert!(t.pow(3).sub(&t).max_abs() < 1e-15);
    }

    #[test]
    fn hermitian_wrapper_accepts_and_rejects() {
        let h = ComplexMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(1.0, 1.0)],
            vec![c(1.0, -1.0), c(3.0, 0.0)],
        ])
        .unwrap();
        assert!(HermitianMatrix::try_new(h).is_ok());

        let bad = ComplexMatrix::from_rows(&[
            vec![c(2.0, 0.0), c(1.0, 1.0)],
            vec![c(1.0, 1.0), c(3.0, 0.0)],
        ])
        .unwrap();
        assert!(matches!(
            HermitianMatrix::try_new(bad),
            Err(LinalgError::NotHermitian(_, _))
        ));

        let rect = ComplexMatrix::from_real(1, 2, &[1.0, 2.0]).unwrap();
        assert!(matches!(
            HermitianMatrix::try_new(rect),
            Err(LinalgError::NotSquare(1, 2))
        ));
    }

    #[test]
    fn op_norm_known_values() {
        // Diagonal: largest magnitude wins.
        let d = ComplexMatrix::from_diag(&[1.0, -3.0]);
        assert!((op_norm(&d) - 3.0).abs() < 1e-12);
        // Nilpotent shift scaled by 2.
        let m = ComplexMatrix::from_real(2, 2, &[0.0, 2.0, 0.0, 0.0]).unwrap();
        assert!((op_norm(&m) - 2.0).abs() < 1e-12);
        // Zero matrix.
        let z = ComplexMatrix::from_real(2, 3, &[0.0; 6]).unwrap();
        assert_eq!(op_norm(&z), 0.0);
    }

    #[test]
    fn residuals_known_values() {
        let shift = ComplexMatrix::from_real(2, 2, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!((isometry_residual(&shift).unwrap() - 1.0).abs() < 1e-12);
        assert!((unitary_residual(&shift).unwrap() - 1.0).abs() < 1e-12);

        let d2 = ComplexMatrix::from_diag(&[2.0, 2.0]);
        assert!((isometry_residual(&d2).unwrap() - 3.0).abs() < 1e-12);

        let stretch = ComplexMatrix::from_diag(&[1.0, 0.5]);
        assert!((unitary_residual(&stretch).unwrap() - 0.75).abs() < 1e-12);

        let perm = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(unitary_residual(&perm).unwrap() < 1e-15);

        let rect = ComplexMatrix::from_real(1, 2, &[1.0, 0.0]).unwrap();
        assert!(matches!(
            isometry_residual(&rect),
            Err(LinalgError::NotSquare(1, 2))
        ));
    }

    #[test]
    fn condition_number_known_values() {
        let u = ComplexMatrix::from_complex_diag(&[c(0.0, 1.0), c(1.0, 0.0)]);
        assert!((condition_number(&u).unwrap() - 1.0).abs() < 1e-12);
        let d = ComplexMatrix::from_diag(&[10.0, 1.0]);
        assert!((condition_number(&d).unwrap() - 10.0).abs() < 1e-12);
        let s = ComplexMatrix::from_diag(&[2.0, 0.0]);
        assert!(matches!(
            condition_number(&s),
            Err(LinalgError::Singular(_, _))
        ));
    }

    #[test]
    fn inverse_round_trips() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(1.0, 1.0), c(2.0, 0.0)],
            vec![c(0.0, -1.0), c(1.0, 0.5)],
        ])
        .unwrap();
        let inv = inverse(&m).unwrap();
        let prod = m.matmul(&inv);
        assert!(prod.sub(&ComplexMatrix::identity(2)).max_abs() < 1e-13);
    }
}
