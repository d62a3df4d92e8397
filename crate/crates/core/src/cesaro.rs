//! Running Gram averages of operator powers and similarity certificates.
//!
//! For a square complex operator `T`, the running average
//!
//! `A_N = (1/N) Σ_{n=0}^{N-1} T*ⁿ Tⁿ`
//!
//! converges to a positive fixed point `F` of `X ↦ T* X T` exactly when the
//! powers of `T` stay bounded, and then `D = F^{1/2}` conjugates `T` into an
//! isometry. This module maintains the averages incrementally, watches for
//! divergence and lower-bound collapse, and produces [`SimilarityCertificate`]s
//! with two-sided spectral bounds on the limit Gram matrix:
//!
//! - [`isometrize`]: the general single-operator path (power-bounded `T`);
//! - [`expansive_isometrize`]: the variant for `T* T ⪰ I`, where the averages
//!   are monotone;
//! - [`sznagy_unitarize`]: the two-sided variant for invertible `T` with both
//!   power directions bounded, using symmetric windows `[-N, N]`.
//!
//! The sequential phase scans `A_1, A_2, …` one step at a time so trend
//! diagnostics see every window; certificates then refine the average by
//! doubling (see the crate-internal averaging engine), which pushes the
//! fixed-point defect — exactly `(T*ᴺ Tᴺ - I)/N` — down to roughly `1e-12`
//! regardless of how slowly the sequential averages settle.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::averaging::{refine_one_sided, refine_two_sided, RefineOutcome};
use crate::linalg::{
    self, general_eigenvalues, herm_eigen, herm_eigenvalues, op_norm, ComplexMatrix,
    HermitianMatrix, LinalgError,
};

/// Pinned thresholds for divergence, collapse, and certificate acceptance.
pub mod tol {
    /// Absolute eigenvalue cap: any running average whose largest eigenvalue
    /// exceeds this is declared divergent.
    pub const DIVERGENCE_CAP: f64 = 1e12;
    /// Absolute floor: a smallest eigenvalue below this flags lower-bound
    /// collapse regardless of trend.
    pub const COLLAPSE_FLOOR: f64 = 1e-12;
    /// Dyadic growth ratio `λ_max(A_{2N})/λ_max(A_N)` treated as divergence
    /// when sustained over two consecutive doublings.
    pub const GROWTH_RATIO: f64 = 1.5;
    /// Dyadic shrink ratio `λ_min(A_{2N})/λ_min(A_N)` treated as collapse
    /// when sustained over two consecutive doublings.
    pub const COLLAPSE_RATIO: f64 = 2.0 / 3.0;
    /// Smallest window length at which trend ratios are consulted.
    pub const TREND_MIN_N: u64 = 16;
    /// Default fixed-point/certificate tolerance.
    pub const DEFAULT_CERT_TOL: f64 = 1e-8;
    /// Default tolerance for the eigenvalue-modulus screen.
    pub const DEFAULT_EIGEN_TOL: f64 = 1e-6;
    /// Default floor under the certified lower bound `m²`.
    pub const DEFAULT_MIN_LOWER_SQ: f64 = 1e-8;
    /// Default number of doubling levels per refinement run.
    pub const DEFAULT_REFINE_LEVELS: u32 = crate::averaging::DEFAULT_LEVELS;
    /// Cap on the number of window-average runs in the refinement phase.
    pub const MAX_REFINE_RUNS: u32 = crate::averaging::DEFAULT_MAX_RUNS;
    /// The refinement drives the fixed-point defect this far below the
    /// certificate tolerance, leaving headroom for the conjugation step.
    pub const REFINE_TARGET_FACTOR: f64 = 1e-2;
    /// Expansivity slack: `λ_min(T* T) ≥ 1 - EXPANSIVE_GAP` is required.
    pub const EXPANSIVE_GAP: f64 = 1e-10;
    /// Slack in the joint lower-bound comparison of `k_condition_check`.
    pub const K_CONDITION_SLACK: f64 = 1e-10;
    /// Frobenius guard the sequential scans use to stop before overflow.
    pub const SEQ_FRO_GUARD: f64 = 1e100;
}

/// A single reason the similarity hypothesis was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum HypothesisFailure {
    /// The running averages grow without bound: `T` is not power bounded.
    DivergentUpperBound,
    /// The lower spectral bound of the averages collapses towards zero.
    LowerBoundCollapse {
        /// Smallest average eigenvalue observed.
        lower_sq: f64,
        /// Floor it was required to stay above.
        floor: f64,
    },
    /// Some eigenvalue modulus is incompatible with similarity to an isometry.
    EigenvalueModulus { offenders: Vec<Complex64> },
    /// The refined average did not reach the fixed-point tolerance.
    GramNotConverged { residual: f64 },
    /// The limit Gram matrix is numerically singular, so no bounded
    /// conjugation exists.
    SingularTransform,
}

impl fmt::Display for HypothesisFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HypothesisFailure::DivergentUpperBound => {
                write!(f, "running averages diverge (not power bounded)")
            }
            HypothesisFailure::LowerBoundCollapse { lower_sq, floor } => write!(
                f,
                "lower spectral bound collapsed to {lower_sq:.3e} (floor {floor:.3e})"
            ),
            HypothesisFailure::EigenvalueModulus { offenders } => {
                write!(f, "eigenvalue moduli off the unit circle:")?;
                for z in offenders {
                    write!(f, " |{:.6}+{:.6}i|={:.6}", z.re, z.im, z.norm())?;
                }
                Ok(())
            }
            HypothesisFailure::GramNotConverged { residual } => write!(
                f,
                "limit Gram average not converged (fixed-point residual {residual:.3e})"
            ),
            HypothesisFailure::SingularTransform => {
                write!(f, "limit Gram matrix is singular")
            }
        }
    }
}

fn join_failures(failures: &[HypothesisFailure]) -> String {
    failures
        .iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Which power direction of an invertible operator grows without bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerDirection {
    Forward,
    Backward,
}

impl fmt::Display for PowerDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerDirection::Forward => write!(f, "forward"),
            PowerDirection::Backward => write!(f, "backward"),
        }
    }
}

/// Errors from the averaging scans and certificate constructions.
#[derive(Debug, Error)]
pub enum CesaroError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("averaging horizon {got} is too small (need at least {min})")]
    HorizonTooSmall { got: u64, min: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("running Gram averages diverged: the operator is not power bounded")]
    Diverged,
    #[error("similarity hypothesis failed: {}", join_failures(.failures))]
    HypothesisFailed { failures: Vec<HypothesisFailure> },
    #[error("operator is not expansive: smallest Gram eigenvalue {min_gram_eigenvalue}")]
    NotExpansive { min_gram_eigenvalue: f64 },
    #[error("operator is singular, so two-sided averages do not exist")]
    SingularOperator,
    #[error("{direction} power norms grow without bound")]
    PowerUnbounded { direction: PowerDirection },
}

/// Convenience result alias for this module.
pub type Result<T> = std::result::Result<T, CesaroError>;

/// Incremental state of the running average at window length `N`.
///
/// Holds `A_N` together with the last power Gram matrix `T*^{N-1} T^{N-1}`,
/// so one step costs two matrix products:
/// `P_N = T* P_{N-1} T`, then `A_{N+1} = (N·A_N + P_N)/(N+1)`.
#[derive(Debug, Clone)]
pub struct CesaroState {
    t: ComplexMatrix,
    n: u64,
    power_gram: HermitianMatrix,
    average: HermitianMatrix,
}

impl CesaroState {
    /// Starts at `N = 1`, where `A_1 = I` and the power Gram matrix is `I`.
    pub fn new(t: ComplexMatrix) -> Result<Self> {
        if !t.is_square() {
            return Err(LinalgError::NotSquare(t.rows(), t.cols()).into());
        }
        let dim = t.rows();
        Ok(CesaroState {
            t,
            n: 1,
            power_gram: HermitianMatrix::identity(dim),
            average: HermitianMatrix::identity(dim),
        })
    }

    /// The operator being averaged.
    pub fn operator(&self) -> &ComplexMatrix {
        &self.t
    }

    /// Current window length `N`.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// The running average `A_N`.
    pub fn average(&self) -> &HermitianMatrix {
        &self.average
    }

    /// The power Gram matrix `T*^{N-1} T^{N-1}` of the last window element.
    pub fn power_gram(&self) -> &HermitianMatrix {
        &self.power_gram
    }

    /// Returns the state at window length `N + 1`, or [`CesaroError::Diverged`]
    /// if the step overflows to non-finite entries.
    pub fn advanced(&self) -> Result<CesaroState> {
        let mut next = self.clone();
        next.advance_in_place();
        if !next.power_gram.matrix().all_finite() || !next.average.matrix().all_finite() {
            return Err(CesaroError::Diverged);
        }
        Ok(next)
    }

    fn advance_in_place(&mut self) {
        let p_next = HermitianMatrix::symmetrized(
            self.t
                .adjoint()
                .matmul(self.power_gram.matrix())
                .matmul(&self.t),
        );
        let n = self.n as f64;
        let avg_next = HermitianMatrix::symmetrized(
            self.average
                .matrix()
                .scale(n)
                .add(p_next.matrix())
                .scale(1.0 / (n + 1.0)),
        );
        self.power_gram = p_next;
        self.average = avg_next;
        self.n += 1;
    }
}

/// Two-sided spectral bounds gathered from a sequential scan.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsEstimate {
    /// Smallest average eigenvalue observed over the scan (never negative).
    pub lower_sq: f64,
    /// Largest average eigenvalue observed over the scan.
    pub upper_sq: f64,
    /// Horizon the scan was asked to run to.
    pub n_max: u64,
    /// Divergence was detected (absolute cap or sustained dyadic growth).
    pub divergent: bool,
    /// Lower-bound collapse was detected (absolute floor or sustained
    /// dyadic shrinkage).
    pub lower_collapse: bool,
    /// `max λ_max(T*ᴺ Tᴺ)/N` over the tail `N ∈ [n_max/2, n_max]`; tends to
    /// zero exactly when no tail power norm grows like `√N` or faster.
    pub decay_stat: f64,
}

/// Default sequential horizon for a given operator dimension.
pub fn default_horizon(dim: usize) -> u64 {
    if dim <= 16 {
        4096
    } else if dim <= 32 {
        1024
    } else {
        256
    }
}

/// Options shared by the certificate-producing operations.
#[derive(Debug, Clone)]
pub struct SimilarityOpts {
    /// Sequential horizon; `None` picks [`default_horizon`] for the dimension.
    pub n_max: Option<u64>,
    /// Fixed-point tolerance for accepting the refined Gram average.
    pub tol: f64,
    /// Tolerance for the eigenvalue-modulus screen.
    pub eigen_tol: f64,
    /// Floor below which the certified lower bound counts as collapsed.
    pub min_lower_sq: f64,
    /// Number of doubling levels in the refinement phase.
    pub refine_levels: u32,
}

impl Default for SimilarityOpts {
    fn default() -> Self {
        SimilarityOpts {
            n_max: None,
            tol: tol::DEFAULT_CERT_TOL,
            eigen_tol: tol::DEFAULT_EIGEN_TOL,
            min_lower_sq: tol::DEFAULT_MIN_LOWER_SQ,
            refine_levels: tol::DEFAULT_REFINE_LEVELS,
        }
    }
}

/// What kind of operator the certified conjugation produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    Isometry,
    Unitary,
}

/// A positive conjugation certified to carry the operator to a (near)
/// isometry or unitary, with two-sided bounds witnessing the similarity.
#[derive(Debug, Clone)]
pub struct SimilarityCertificate {
    pub kind: CertificateKind,
    /// Positive definite `D`; the certified operator is `D T D⁻¹`.
    pub transform: HermitianMatrix,
    /// Lower similarity bound `m`: `m‖x‖ ≤ ‖D x‖` for all `x`.
    pub bound_lower: f64,
    /// Upper similarity bound `M`: `‖D x‖ ≤ M‖x‖` for all `x`.
    pub bound_upper: f64,
    /// Condition number of the transform (ratio of extreme singular values).
    pub condition_number: f64,
    /// `‖(D T D⁻¹)* (D T D⁻¹) - I‖` (isometry kind) or the two-sided unitary
    /// defect (unitary kind).
    pub residual: f64,
    /// `‖T* F T - F‖` for the limit Gram matrix `F = D²` actually used.
    pub gram_fixed_point_residual: f64,
}

/// The refined limit of the running averages.
#[derive(Debug, Clone)]
pub struct LimitGram {
    /// Refined Gram average (positive semidefinite).
    pub gram: HermitianMatrix,
    /// Whether the fixed-point residual met the requested tolerance.
    pub converged: bool,
    /// `‖T* F T - F‖` for the returned average `F`.
    pub fixed_point_residual: f64,
    /// Bounds gathered over the sequential scan and refinement levels.
    pub bounds: BoundsEstimate,
}

/// Result of the eigenvalue-modulus screen.
#[derive(Debug, Clone, PartialEq)]
pub struct UnimodularCheck {
    /// All eigenvalue moduli are within tolerance of 1.
    pub all_unimodular: bool,
    /// Eigenvalues whose modulus is off the unit circle.
    pub offenders: Vec<Complex64>,
}

fn extreme_eigs(h: &HermitianMatrix) -> Result<(f64, f64)> {
    let eigs = herm_eigenvalues(h)?;
    Ok((eigs[0], *eigs.last().expect("nonempty spectrum")))
}

fn max_eig(h: &HermitianMatrix) -> Result<f64> {
    Ok(extreme_eigs(h)?.1)
}

/// `‖T* F T - F‖` in operator norm.
fn fixed_point_defect(t: &ComplexMatrix, f: &HermitianMatrix) -> f64 {
    let conj = t.adjoint().matmul(f.matrix()).matmul(t);
    op_norm(&conj.sub(f.matrix()))
}

struct SeqScan {
    lower_sq: f64,
    upper_sq: f64,
    divergent: bool,
    lower_collapse: bool,
    decay_stat: f64,
}

impl SeqScan {
    fn bounds(&self, n_max: u64) -> BoundsEstimate {
        BoundsEstimate {
            lower_sq: self.lower_sq.max(0.0),
            upper_sq: self.upper_sq,
            n_max,
            divergent: self.divergent,
            lower_collapse: self.lower_collapse,
            decay_stat: self.decay_stat,
        }
    }
}

/// Scans `A_1 … A_{n_max}` one window at a time, tracking spectral extremes,
/// dyadic trend diagnostics, and the tail decay statistic. Stops early once
/// divergence is certain.
fn seq_scan(t: &ComplexMatrix, n_max: u64) -> Result<SeqScan> {
    let mut state = CesaroState::new(t.clone())?;
    let (mut lo, mut hi) = extreme_eigs(state.average())?;
    let mut scan = SeqScan {
        lower_sq: lo,
        upper_sq: hi,
        divergent: hi > tol::DIVERGENCE_CAP,
        lower_collapse: lo < tol::COLLAPSE_FLOOR,
        decay_stat: 0.0,
    };
    let mut prev_dyadic = (lo, hi);
    let mut growth_streak = 0u32;
    let mut collapse_streak = 0u32;
    let tail_start = (n_max / 2).max(1);

    while state.n() < n_max && !scan.divergent {
        if state.power_gram().matrix().fro_norm() > tol::SEQ_FRO_GUARD {
            scan.divergent = true;
            break;
        }
        state.advance_in_place();
        if !state.average().matrix().all_finite() {
            scan.divergent = true;
            break;
        }
        let extremes = extreme_eigs(state.average())?;
        lo = extremes.0;
        hi = extremes.1;
        scan.lower_sq = scan.lower_sq.min(lo);
        scan.upper_sq = scan.upper_sq.max(hi);
        if hi > tol::DIVERGENCE_CAP {
            scan.divergent = true;
        }
        if lo < tol::COLLAPSE_FLOOR {
            scan.lower_collapse = true;
        }

        let n = state.n();
        if n.is_power_of_two() {
            // Trend ratios compare consecutive dyadic windows; both windows
            // must be at least TREND_MIN_N long before ratios count.
            if n >= 2 * tol::TREND_MIN_N {
                let (plo, phi) = prev_dyadic;
                if phi > 0.0 && hi / phi >= tol::GROWTH_RATIO {
                    growth_streak += 1;
                } else {
                    growth_streak = 0;
                }
                if plo > 0.0 && lo / plo <= tol::COLLAPSE_RATIO {
                    collapse_streak += 1;
                } else {
                    collapse_streak = 0;
                }
                if growth_streak >= 2 {
                    scan.divergent = true;
                }
                if collapse_streak >= 2 {
                    scan.lower_collapse = true;
                }
            }
            prev_dyadic = (lo, hi);
        }

        // The state at window N carries the power Gram matrix of exponent
        // N - 1; the decay tail covers exponents in [n_max/2, n_max].
        let p_index = n - 1;
        if p_index >= tail_start {
            let p_hi = max_eig(state.power_gram())?;
            scan.decay_stat = scan.decay_stat.max(p_hi / p_index as f64);
        }
    }

    if scan.divergent {
        // Report how far growth had gone when the scan stopped.
        let p_hi = max_eig(state.power_gram())?;
        scan.decay_stat = scan.decay_stat.max(p_hi / state.n().max(1) as f64);
    } else if state.n() == n_max {
        // One extra power step so the tail includes the exponent n_max.
        let p_last = HermitianMatrix::symmetrized(
            t.adjoint().matmul(state.power_gram().matrix()).matmul(t),
        );
        if p_last.matrix().all_finite() {
            scan.decay_stat = scan.decay_stat.max(max_eig(&p_last)? / n_max as f64);
        }
    }

    Ok(scan)
}

fn require_square(t: &ComplexMatrix) -> Result<()> {
    if !t.is_square() {
        return Err(LinalgError::NotSquare(t.rows(), t.cols()).into());
    }
    Ok(())
}

fn require_horizon(n_max: u64, min: u64) -> Result<()> {
    if n_max < min {
        return Err(CesaroError::HorizonTooSmall { got: n_max, min });
    }
    Ok(())
}

/// The running average `A_N` computed by the incremental recurrence.
pub fn cesaro_average(t: &ComplexMatrix, n: u64) -> Result<HermitianMatrix> {
    if n == 0 {
        return Err(CesaroError::InvalidParameter(
            "window length must be at least 1".into(),
        ));
    }
    let mut state = CesaroState::new(t.clone())?;
    while state.n() < n {
        state = state.advanced()?;
    }
    Ok(state.average().clone())
}

/// Sequentially scans the averages up to `n_max` and reports spectral bounds
/// with divergence/collapse/decay diagnostics. Requires `n_max ≥ 8`.
pub fn estimate_bounds(t: &ComplexMatrix, n_max: u64) -> Result<BoundsEstimate> {
    require_square(t)?;
    require_horizon(n_max, 8)?;
    Ok(seq_scan(t, n_max)?.bounds(n_max))
}

/// `max λ_max(T*ᴺ Tᴺ)/N` over `N ∈ [n_max/2, n_max]`.
///
/// Power-bounded operators drive this to zero like `1/N`; an operator whose
/// power norms grow at least like `√N` keeps it bounded away from zero.
pub fn decay_check(t: &ComplexMatrix, n_max: u64) -> Result<f64> {
    require_square(t)?;
    require_horizon(n_max, 2)?;
    let tail_start = (n_max / 2).max(1);
    let mut p = HermitianMatrix::identity(t.rows());
    let mut stat = 0.0f64;
    for n in 1..=n_max {
        p = HermitianMatrix::symmetrized(t.adjoint().matmul(p.matrix()).matmul(t));
        if !p.matrix().all_finite() {
            break;
        }
        let guard_tripped = p.matrix().fro_norm() > tol::SEQ_FRO_GUARD;
        if n >= tail_start || guard_tripped {
            stat = stat.max(max_eig(&p)? / n as f64);
        }
        if guard_tripped {
            break;
        }
    }
    Ok(stat)
}

/// Screens the eigenvalue moduli of `T` against the unit circle.
///
/// Similarity to an isometry of the same finite dimension forces every
/// eigenvalue modulus to equal 1, so any offender refutes the hypothesis
/// before averaging starts.
pub fn eigen_unimodular_check(t: &ComplexMatrix, tolerance: f64) -> Result<UnimodularCheck> {
    let eigs = general_eigenvalues(t)?;
    let offenders: Vec<Complex64> = eigs
        .into_iter()
        .filter(|z| (z.norm() - 1.0).abs() > tolerance)
        .collect();
    Ok(UnimodularCheck {
        all_unimodular: offenders.is_empty(),
        offenders,
    })
}

/// Checks `A_N ⪰ m·K*K` for every window `N ≤ n_max` (up to a fixed slack).
///
/// `K` may be rectangular but must act on the same space as `T`.
pub fn k_condition_check(t: &ComplexMatrix, k: &ComplexMatrix, m: f64, n_max: u64) -> Result<bool> {
    require_square(t)?;
    require_horizon(n_max, 1)?;
    if k.cols() != t.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "comparison operator acts on dimension {}, operator on {}",
            k.cols(),
            t.cols()
        ))
        .into());
    }
    if !(m > 0.0) {
        return Err(CesaroError::InvalidParameter(
            "lower-bound weight must be strictly positive".into(),
        ));
    }
    let kk = HermitianMatrix::symmetrized(k.adjoint().matmul(k).scale(m));
    let mut state = CesaroState::new(t.clone())?;
    loop {
        let diff = HermitianMatrix::symmetrized(state.average().matrix().sub(kk.matrix()));
        let (lo, _) = extreme_eigs(&diff)?;
        if lo < -tol::K_CONDITION_SLACK {
            return Ok(false);
        }
        if state.n() >= n_max {
            return Ok(true);
        }
        state = state.advanced()?;
    }
}

/// Scans to `n_max`, then refines by doubling and returns the refined limit
/// Gram matrix with its fixed-point residual and gathered bounds.
///
/// Fails with [`CesaroError::Diverged`] when the averages grow without bound.
pub fn limit_gram(t: &ComplexMatrix, tolerance: f64, n_max: u64) -> Result<LimitGram> {
    require_square(t)?;
    require_horizon(n_max, 8)?;
    let scan = seq_scan(t, n_max)?;
    if scan.divergent {
        return Err(CesaroError::Diverged);
    }
    let out = refine(t, tolerance, tol::DEFAULT_REFINE_LEVELS);
    if out.grew_unbounded() {
        return Err(CesaroError::Diverged);
    }
    let mut bounds = scan.bounds(n_max);
    bounds.lower_sq = bounds.lower_sq.min(out.min_eigenvalue()).max(0.0);
    bounds.upper_sq = bounds.upper_sq.max(out.max_eigenvalue());
    if bounds.lower_sq < tol::COLLAPSE_FLOOR {
        bounds.lower_collapse = true;
    }
    let scale = max_eig(&out.avg)?.max(1.0);
    Ok(LimitGram {
        converged: out.defect <= tolerance * scale,
        fixed_point_residual: out.defect,
        gram: out.avg,
        bounds,
    })
}

/// Iterated window-average refinement of the running averages of `t`.
fn refine(t: &ComplexMatrix, tolerance: f64, levels: u32) -> RefineOutcome {
    refine_one_sided(
        t,
        &HermitianMatrix::identity(t.rows()),
        levels,
        tol::MAX_REFINE_RUNS,
        tolerance * tol::REFINE_TARGET_FACTOR,
    )
}

/// Shared tail of the certificate builders: takes the refined Gram matrix and
/// the folded bounds, produces the positive transform and residuals.
fn build_certificate(
    t: &ComplexMatrix,
    gram: &HermitianMatrix,
    bounds: (f64, f64),
    kind: CertificateKind,
) -> Result<SimilarityCertificate> {
    let dec = herm_eigen(gram)?;
    let lo = dec.min_eigenvalue();
    let hi = dec.max_eigenvalue();
    if lo <= linalg::tol::SINGULAR_REL * hi.max(1.0) {
        return Err(CesaroError::HypothesisFailed {
            failures: vec![HypothesisFailure::SingularTransform],
        });
    }
    let transform = dec.map_eigenvalues(f64::sqrt);
    let inverse = dec.map_eigenvalues(|x| 1.0 / x.sqrt());
    let conjugated = transform.matrix().matmul(t).matmul(inverse.matrix());
    let residual = match kind {
        CertificateKind::Isometry => linalg::isometry_residual(&conjugated)?,
        CertificateKind::Unitary => linalg::unitary_residual(&conjugated)?,
    };
    Ok(SimilarityCertificate {
        kind,
        transform,
        bound_lower: bounds.0.max(0.0).sqrt(),
        bound_upper: bounds.1.max(0.0).sqrt(),
        condition_number: (hi / lo).sqrt(),
        residual,
        gram_fixed_point_residual: fixed_point_defect(t, gram),
    })
}

/// Certifies `T` similar to an isometry via the limit of the running
/// averages, or reports every detected reason the hypothesis fails.
pub fn isometrize(t: &ComplexMatrix, opts: &SimilarityOpts) -> Result<SimilarityCertificate> {
    require_square(t)?;
    let n_max = opts.n_max.unwrap_or_else(|| default_horizon(t.rows()));
    require_horizon(n_max, 8)?;
    let unimodular = eigen_unimodular_check(t, opts.eigen_tol)?;
    let scan = seq_scan(t, n_max)?;

    let mut failures = Vec::new();
    let mut refined: Option<(RefineOutcome, f64, f64)> = None;
    if scan.divergent {
        failures.push(HypothesisFailure::DivergentUpperBound);
        if scan.lower_collapse {
            failures.push(HypothesisFailure::LowerBoundCollapse {
                lower_sq: scan.lower_sq.max(0.0),
                floor: opts.min_lower_sq,
            });
        }
    } else {
        let out = refine(t, opts.tol, opts.refine_levels);
        if out.grew_unbounded() {
            failures.push(HypothesisFailure::DivergentUpperBound);
        } else {
            let lower_sq = scan.lower_sq.min(out.min_eigenvalue()).max(0.0);
            let upper_sq = scan.upper_sq.max(out.max_eigenvalue());
            if lower_sq < opts.min_lower_sq {
                failures.push(HypothesisFailure::LowerBoundCollapse {
                    lower_sq,
                    floor: opts.min_lower_sq,
                });
            }
            refined = Some((out, lower_sq, upper_sq));
        }
    }
    if !unimodular.all_unimodular {
        failures.push(HypothesisFailure::EigenvalueModulus {
            offenders: unimodular.offenders,
        });
    }
    if let Some((out, _, _)) = &refined {
        let scale = max_eig(&out.avg)?.max(1.0);
        if out.defect > opts.tol * scale {
            failures.push(HypothesisFailure::GramNotConverged {
                residual: out.defect,
            });
        }
    }
    if !failures.is_empty() {
        return Err(CesaroError::HypothesisFailed { failures });
    }
    let (out, lower_sq, upper_sq) = refined.expect("refinement ran on the non-divergent path");
    build_certificate(t, &out.avg, (lower_sq, upper_sq), CertificateKind::Isometry)
}

/// Certifies an expansive operator (`T* T ⪰ I`) similar to an isometry.
///
/// For expansive operators the averages are monotone nondecreasing, so the
/// only outcomes are a certificate or divergence; in finite dimension a
/// successful certificate always lands on a unitary.
pub fn expansive_isometrize(
    t: &ComplexMatrix,
    opts: &SimilarityOpts,
) -> Result<SimilarityCertificate> {
    require_square(t)?;
    let n_max = opts.n_max.unwrap_or_else(|| default_horizon(t.rows()));
    require_horizon(n_max, 8)?;
    let gram1 = HermitianMatrix::symmetrized(t.adjoint().matmul(t));
    let (lo, _) = extreme_eigs(&gram1)?;
    if lo < 1.0 - tol::EXPANSIVE_GAP {
        return Err(CesaroError::NotExpansive {
            min_gram_eigenvalue: lo,
        });
    }
    let scan = seq_scan(t, n_max)?;
    if scan.divergent {
        return Err(CesaroError::Diverged);
    }
    let out = refine(t, opts.tol, opts.refine_levels);
    if out.grew_unbounded() {
        return Err(CesaroError::Diverged);
    }
    let lower_sq = scan.lower_sq.min(out.min_eigenvalue()).max(0.0);
    let upper_sq = scan.upper_sq.max(out.max_eigenvalue());
    build_certificate(t, &out.avg, (lower_sq, upper_sq), CertificateKind::Isometry)
}

/// The symmetric window average `B_N = (1/(2N+1)) Σ_{n=-N}^{N} (Tⁿ)* Tⁿ`
/// (negative exponents through the matrix inverse), computed by the same
/// recurrence the two-sided certifier scans.
pub fn symmetric_window_average(t: &ComplexMatrix, n: u64) -> Result<HermitianMatrix> {
    require_square(t)?;
    if n == 0 {
        return Err(CesaroError::InvalidParameter(
            "window half-width must be at least 1".into(),
        ));
    }
    let t_inv = match linalg::inverse(t) {
        Ok(inv) => inv,
        Err(LinalgError::Singular(..)) => return Err(CesaroError::SingularOperator),
        Err(other) => return Err(other.into()),
    };
    let dim = t.rows();
    let mut p = HermitianMatrix::identity(dim);
    let mut q = HermitianMatrix::identity(dim);
    let mut sum = ComplexMatrix::identity(dim);
    for _ in 1..=n {
        p = HermitianMatrix::symmetrized(t.adjoint().matmul(p.matrix()).matmul(t));
        q = HermitianMatrix::symmetrized(t_inv.adjoint().matmul(q.matrix()).matmul(&t_inv));
        if !p.matrix().all_finite() || !q.matrix().all_finite() {
            return Err(CesaroError::Diverged);
        }
        sum = sum.add(p.matrix()).add(q.matrix());
    }
    Ok(HermitianMatrix::symmetrized(
        sum.scale(1.0 / (2 * n + 1) as f64),
    ))
}

/// Certifies an invertible `T` with both power directions bounded similar to
/// a unitary, by averaging over symmetric windows `[-N, N]`.
pub fn sznagy_unitarize(t: &ComplexMatrix, opts: &SimilarityOpts) -> Result<SimilarityCertificate> {
    require_square(t)?;
    let n_max = opts.n_max.unwrap_or_else(|| default_horizon(t.rows()));
    require_horizon(n_max, 8)?;
    let t_inv = match linalg::inverse(t) {
        Ok(inv) => inv,
        Err(LinalgError::Singular(..)) => return Err(CesaroError::SingularOperator),
        Err(other) => return Err(other.into()),
    };

    let dim = t.rows();
    let mut p = HermitianMatrix::identity(dim); // T*ⁿ Tⁿ
    let mut q = HermitianMatrix::identity(dim); // T⁻ⁿ* T⁻ⁿ
    let mut sum = ComplexMatrix::identity(dim); // Σ over the window so far
    let mut lower_sq = 1.0f64; // B_0 = I
    let mut upper_sq = 1.0f64;

    // Power norms of a bounded-but-not-unitary operator oscillate, so trend
    // ratios on them are unreliable; only absolute caps reject here, and the
    // refinement below catches slow polynomial growth the caps miss.
    for n in 1..=n_max {
        p = HermitianMatrix::symmetrized(t.adjoint().matmul(p.matrix()).matmul(t));
        q = HermitianMatrix::symmetrized(t_inv.adjoint().matmul(q.matrix()).matmul(&t_inv));
        if !p.matrix().all_finite()
            || p.matrix().fro_norm() > tol::SEQ_FRO_GUARD
            || max_eig(&p)? > tol::DIVERGENCE_CAP
        {
            return Err(CesaroError::PowerUnbounded {
                direction: PowerDirection::Forward,
            });
        }
        if !q.matrix().all_finite()
            || q.matrix().fro_norm() > tol::SEQ_FRO_GUARD
            || max_eig(&q)? > tol::DIVERGENCE_CAP
        {
            return Err(CesaroError::PowerUnbounded {
                direction: PowerDirection::Backward,
            });
        }
        sum = sum.add(p.matrix()).add(q.matrix());
        let window = HermitianMatrix::symmetrized(sum.scale(1.0 / (2 * n + 1) as f64));
        let (lo, hi) = extreme_eigs(&window)?;
        lower_sq = lower_sq.min(lo);
        upper_sq = upper_sq.max(hi);
    }

    let refined = refine_two_sided(
        t,
        &t_inv,
        &HermitianMatrix::identity(dim),
        opts.refine_levels,
        tol::MAX_REFINE_RUNS,
        opts.tol * tol::REFINE_TARGET_FACTOR,
    );
    if refined.out.grew_unbounded() {
        let direction = if refined.forward_grew {
            PowerDirection::Forward
        } else if refined.backward_grew {
            PowerDirection::Backward
        } else if refined.last_forward_max >= refined.last_backward_max {
            PowerDirection::Forward
        } else {
            PowerDirection::Backward
        };
        return Err(CesaroError::PowerUnbounded { direction });
    }
    let lower_sq = lower_sq.min(refined.out.min_eigenvalue()).max(0.0);
    let upper_sq = upper_sq.max(refined.out.max_eigenvalue());
    build_certificate(
        t,
        &refined.out.avg,
        (lower_sq, upper_sq),
        CertificateKind::Unitary,
    )
}
