//! Dyadic refinement of running conjugation averages.
//!
//! The maps being averaged are linear in the averaged matrix, so the average
//! over a window of length `2N` is an exact function of the average over a
//! window of length `N` and the `N`-th power of the stepping operator:
//!
//! `A_{2N} = (A_N + S^{N*} A_N S^N) / 2`.
//!
//! Maintaining the stepping power by repeated squaring reaches window length
//! `2^K` in `K` cheap levels. Squaring doubles the accumulated rounding
//! error of the power, so a single deep run is useless — by level 45 the
//! drift reaches `1e-3`. Instead the engine iterates a *moderate* window:
//! one run of `K = 17` levels keeps its rounding drift near `2e-11` while
//! damping every oscillating spectral mode of the conjugation by its window
//! factor, and reapplying the same window average multiplies those damping
//! factors run over run. The iteration therefore converges to the projection
//! of the starting matrix onto the fixed space of the conjugation — the same
//! limit the one-shot average has — with the fixed-point defect driven to
//! the rounding floor instead of stalling at the single-window defect
//! `(S^{N*} X S^N - X)/N`.
//!
//! Both the single-operator averages and the per-axis averages over product
//! set families use this engine; the two-sided variant combines a forward
//! and a backward run over the symmetric window `[-(2^K - 1), 2^K - 1]`.

use crate::linalg::{herm_eigenvalues, op_norm, ComplexMatrix, HermitianMatrix};

/// Growth threshold above which an average is declared divergent.
pub(crate) const HARD_UPPER: f64 = 1e12;
/// Frobenius guard that stops iteration well before floating-point overflow.
const FRO_GUARD: f64 = 1e100;
/// Default number of doubling levels per run (window length `2^17`), chosen
/// so the repeated-squaring drift stays near `1e-11` per run.
pub(crate) const DEFAULT_LEVELS: u32 = 17;
/// Default cap on window-average iterations.
pub(crate) const DEFAULT_MAX_RUNS: u32 = 40;

/// Outcome of a dyadic averaging run.
pub(crate) struct DyadicTrace {
    /// The refined average (last finite level).
    pub avg: HermitianMatrix,
    /// `(λ_min, λ_max)` of the running average after each completed level,
    /// including the starting window.
    pub level_extremes: Vec<(f64, f64)>,
    /// Whether the Frobenius guard stopped the iteration.
    pub overflowed: bool,
    /// Whether the largest eigenvalue crossed [`HARD_UPPER`].
    pub diverged: bool,
}

impl DyadicTrace {
    pub fn grew_unbounded(&self) -> bool {
        self.overflowed || self.diverged
    }

    /// Smallest eigenvalue seen at any level.
    pub fn min_eigenvalue(&self) -> f64 {
        self.level_extremes
            .iter()
            .map(|&(lo, _)| lo)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest eigenvalue seen at any level.
    pub fn max_eigenvalue(&self) -> f64 {
        self.level_extremes
            .iter()
            .map(|&(_, hi)| hi)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn extremes(h: &HermitianMatrix) -> (f64, f64) {
    let eigs = herm_eigenvalues(h).expect("Hermitian eigenvalues of a symmetrized average");
    (eigs[0], *eigs.last().expect("nonempty spectrum"))
}

/// Averages `X` over the one-sided window `n ∈ [0, 2^levels)` of the map
/// `X ↦ S* X S`, by doubling.
pub(crate) fn one_sided_dyadic(
    step: &ComplexMatrix,
    x0: &HermitianMatrix,
    levels: u32,
) -> DyadicTrace {
    let mut avg = HermitianMatrix::symmetrized(x0.matrix().clone());
    let mut s = step.clone();
    let mut level_extremes = Vec::with_capacity(levels as usize + 1);
    let mut overflowed = false;
    let mut diverged = false;

    let (lo, hi) = extremes(&avg);
    level_extremes.push((lo, hi));
    if hi > HARD_UPPER {
        diverged = true;
    }

    for _ in 0..levels {
        if diverged {
            break;
        }
        if avg.matrix().fro_norm() > FRO_GUARD || s.fro_norm() > FRO_GUARD {
            overflowed = true;
            break;
        }
        let conj = s.adjoint().matmul(avg.matrix()).matmul(&s);
        let next = HermitianMatrix::symmetrized(avg.matrix().add(&conj).scale(0.5));
        if !next.matrix().all_finite() {
            overflowed = true;
            break;
        }
        avg = next;
        s = s.matmul(&s);
        let (lo, hi) = extremes(&avg);
        level_extremes.push((lo, hi));
        if hi > HARD_UPPER {
            diverged = true;
        }
    }

    DyadicTrace {
        avg,
        level_extremes,
        overflowed,
        diverged,
    }
}

/// Outcome of a symmetric-window averaging run, with per-direction growth
/// attribution on top of the combined trace.
pub(crate) struct TwoSidedTrace {
    pub combined: DyadicTrace,
    /// The forward one-sided average grew past the guards.
    pub forward_grew: bool,
    /// The backward one-sided average grew past the guards.
    pub backward_grew: bool,
    /// Largest eigenvalue of the forward one-sided average at the last level.
    pub last_forward_max: f64,
    /// Largest eigenvalue of the backward one-sided average at the last level.
    pub last_backward_max: f64,
}

/// Averages `X` over the symmetric window `n ∈ [-(2^levels - 1), 2^levels - 1]`
/// of `X ↦ S* X S`, where `back` must be the inverse of `fwd`.
///
/// Runs the forward and backward one-sided windows in lockstep and combines
/// them per level (the `n = 0` term is shared); extremes and the tail step
/// refer to the combined symmetric average.
pub(crate) fn two_sided_dyadic(
    fwd: &ComplexMatrix,
    back: &ComplexMatrix,
    x0: &HermitianMatrix,
    levels: u32,
) -> TwoSidedTrace {
    let mut avg_f = HermitianMatrix::symmetrized(x0.matrix().clone());
    let mut avg_b = avg_f.clone();
    let mut sf = fwd.clone();
    let mut sb = back.clone();
    let mut level_extremes = Vec::with_capacity(levels as usize + 1);
    let mut overflowed = false;
    let mut diverged = false;
    let mut forward_grew = false;
    let mut backward_grew = false;
    let mut last_forward_max = extremes(&avg_f).1;
    let mut last_backward_max = last_forward_max;

    let mut combined = avg_f.clone();
    let (lo, hi) = extremes(&combined);
    level_extremes.push((lo, hi));
    if hi > HARD_UPPER {
        diverged = true;
    }

    let mut window = 1.0f64; // 2^k, exact in f64 for k ≤ 52
    for _ in 0..levels {
        if diverged || forward_grew || backward_grew {
            break;
        }
        if avg_f.matrix().fro_norm() > FRO_GUARD || sf.fro_norm() > FRO_GUARD {
            forward_grew = true;
        }
        if avg_b.matrix().fro_norm() > FRO_GUARD || sb.fro_norm() > FRO_GUARD {
            backward_grew = true;
        }
        if forward_grew || backward_grew {
            overflowed = true;
            break;
        }
        let conj_f = sf.adjoint().matmul(avg_f.matrix()).matmul(&sf);
        let conj_b = sb.adjoint().matmul(avg_b.matrix()).matmul(&sb);
        let next_f = HermitianMatrix::symmetrized(avg_f.matrix().add(&conj_f).scale(0.5));
        let next_b = HermitianMatrix::symmetrized(avg_b.matrix().add(&conj_b).scale(0.5));
        if !next_f.matrix().all_finite() {
            forward_grew = true;
        }
        if !next_b.matrix().all_finite() {
            backward_grew = true;
        }
        if forward_grew || backward_grew {
            overflowed = true;
            break;
        }
        avg_f = next_f;
        avg_b = next_b;
        sf = sf.matmul(&sf);
        sb = sb.matmul(&sb);
        window *= 2.0;

        last_forward_max = extremes(&avg_f).1;
        last_backward_max = extremes(&avg_b).1;
        if last_forward_max > HARD_UPPER {
            forward_grew = true;
        }
        if last_backward_max > HARD_UPPER {
            backward_grew = true;
        }

        // Symmetric window of size 2·window − 1: both one-sided windows
        // contain the n = 0 term, so it is subtracted once.
        let total = avg_f
            .matrix()
            .add(avg_b.matrix())
            .scale(window)
            .sub(x0.matrix());
        let next_combined = HermitianMatrix::symmetrized(total.scale(1.0 / (2.0 * window - 1.0)));
        combined = next_combined;
        let (lo, hi) = extremes(&combined);
        level_extremes.push((lo, hi));
        if hi > HARD_UPPER {
            diverged = true;
        }
    }

    TwoSidedTrace {
        combined: DyadicTrace {
            avg: combined,
            level_extremes,
            overflowed,
            diverged,
        },
        forward_grew,
        backward_grew,
        last_forward_max,
        last_backward_max,
    }
}

/// `‖S* X S - X‖` in operator norm: how far `X` is from being a fixed point
/// of the conjugation by `S`.
pub(crate) fn conjugation_defect(step: &ComplexMatrix, x: &HermitianMatrix) -> f64 {
    let conj = step.adjoint().matmul(x.matrix()).matmul(step);
    op_norm(&conj.sub(x.matrix()))
}

/// Outcome of an iterated window-average refinement.
pub(crate) struct RefineOutcome {
    /// The refined average after the last run.
    pub avg: HermitianMatrix,
    /// `(λ_min, λ_max)` samples from every level of every run.
    pub level_extremes: Vec<(f64, f64)>,
    /// `‖S* F S - F‖` (operator norm) of the final average; infinite when
    /// growth guards stopped the iteration.
    pub defect: f64,
    /// Number of window-average runs performed (diagnostic; asserted on by
    /// the early-stop tests).
    #[allow(dead_code)]
    pub runs: u32,
    pub overflowed: bool,
    pub diverged: bool,
}

impl RefineOutcome {
    pub fn grew_unbounded(&self) -> bool {
        self.overflowed || self.diverged
    }

    /// Smallest eigenvalue seen at any level of any run.
    pub fn min_eigenvalue(&self) -> f64 {
        self.level_extremes
            .iter()
            .map(|&(lo, _)| lo)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest eigenvalue seen at any level of any run.
    pub fn max_eigenvalue(&self) -> f64 {
        self.level_extremes
            .iter()
            .map(|&(_, hi)| hi)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Iterates the one-sided window average from `x0` until the fixed-point
/// defect drops below `target_rel` relative to the average's scale, growth
/// is detected, or `max_runs` window averages have been applied.
pub(crate) fn refine_one_sided(
    step: &ComplexMatrix,
    x0: &HermitianMatrix,
    levels: u32,
    max_runs: u32,
    target_rel: f64,
) -> RefineOutcome {
    let mut avg = HermitianMatrix::symmetrized(x0.matrix().clone());
    let mut level_extremes = Vec::new();
    let mut overflowed = false;
    let mut diverged = false;
    let mut defect = f64::INFINITY;
    let mut runs = 0;

    for _ in 0..max_runs.max(1) {
        let trace = one_sided_dyadic(step, &avg, levels);
        runs += 1;
        level_extremes.extend_from_slice(&trace.level_extremes);
        overflowed |= trace.overflowed;
        diverged |= trace.diverged;
        avg = trace.avg;
        if overflowed || diverged {
            defect = f64::INFINITY;
            break;
        }
        defect = conjugation_defect(step, &avg);
        let scale = trace
            .level_extremes
            .last()
            .map(|&(_, hi)| hi)
            .unwrap_or(1.0)
            .max(1.0);
        if defect <= target_rel * scale {
            break;
        }
    }

    RefineOutcome {
        avg,
        level_extremes,
        defect,
        runs,
        overflowed,
        diverged,
    }
}

/// Two-sided analogue of [`RefineOutcome`], with growth attribution.
pub(crate) struct TwoSidedRefine {
    pub out: RefineOutcome,
    pub forward_grew: bool,
    pub backward_grew: bool,
    pub last_forward_max: f64,
    pub last_backward_max: f64,
}

/// Iterates the symmetric window average from `x0`; `back` must be the
/// inverse of `fwd`. Exit conditions match [`refine_one_sided`] (the defect
/// is measured against the forward conjugation; the backward defect is
/// controlled by it through the inverse).
pub(crate) fn refine_two_sided(
    fwd: &ComplexMatrix,
    back: &ComplexMatrix,
    x0: &HermitianMatrix,
    levels: u32,
    max_runs: u32,
    target_rel: f64,
) -> TwoSidedRefine {
    let mut avg = HermitianMatrix::symmetrized(x0.matrix().clone());
    let mut level_extremes = Vec::new();
    let mut overflowed = false;
    let mut diverged = false;
    let mut forward_grew = false;
    let mut backward_grew = false;
    let mut last_forward_max = 0.0;
    let mut last_backward_max = 0.0;
    let mut defect = f64::INFINITY;
    let mut runs = 0;

    for _ in 0..max_runs.max(1) {
        let trace = two_sided_dyadic(fwd, back, &avg, levels);
        runs += 1;
        level_extremes.extend_from_slice(&trace.combined.level_extremes);
        overflowed |= trace.combined.overflowed;
        diverged |= trace.combined.diverged;
        forward_grew |= trace.forward_grew;
        backward_grew |= trace.backward_grew;
        last_forward_max = trace.last_forward_max;
        last_backward_max = trace.last_backward_max;
        avg = trace.combined.avg;
        if overflowed || diverged || forward_grew || backward_grew {
            defect = f64::INFINITY;
            break;
        }
        defect = conjugation_defect(fwd, &avg);
        let scale = trace
            .combined
            .level_extremes
            .last()
            .map(|&(_, hi)| hi)
            .unwrap_or(1.0)
            .max(1.0);
        if defect <= target_rel * scale {
            break;
        }
    }

    TwoSidedRefine {
        out: RefineOutcome {
            avg,
            level_extremes,
            defect,
            runs,
            overflowed,
            diverged: diverged || forward_grew || backward_grew,
        },
        forward_grew,
        backward_grew,
        last_forward_max,
        last_backward_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Complex64;

    #[test]
    fn doubling_matches_direct_summation() {
        // Window 2^3 = 8 elements, against a direct sum of conjugated powers.
        let t = ComplexMatrix::from_rows(&[
            vec![Complex64::new(0.4, 0.1), Complex64::new(0.7, 0.0)],
            vec![Complex64::new(-0.2, 0.3), Complex64::new(0.1, -0.5)],
        ])
        .unwrap();
        let id = HermitianMatrix::identity(2);
        let trace = one_sided_dyadic(&t, &id, 3);
        let mut direct = ComplexMatrix::zeros(2, 2);
        for n in 0..8u64 {
            let tn = t.pow(n);
            direct = direct.add(&tn.adjoint().matmul(&tn));
        }
        let direct_avg = direct.scale(1.0 / 8.0);
        assert!(trace.avg.matrix().sub(&direct_avg).max_abs() < 1e-13);
        assert!(!trace.grew_unbounded());
    }

    #[test]
    fn two_sided_matches_direct_summation() {
        // Diagonal invertible: windows computable in closed form.
        let t = ComplexMatrix::from_diag(&[2.0, 0.5]);
        let tinv = ComplexMatrix::from_diag(&[0.5, 2.0]);
        let id = HermitianMatrix::identity(2);
        let trace = two_sided_dyadic(&t, &tinv, &id, 2);
        // Window [-3, 3]: average of diag(4^n, 4^{-n}) over n = -3..3.
        let mut want0 = 0.0;
        let mut want1 = 0.0;
        for n in -3i32..=3 {
            want0 += 4.0f64.powi(n);
            want1 += 4.0f64.powi(-n);
        }
        want0 /= 7.0;
        want1 /= 7.0;
        let avg = trace.combined.avg.matrix();
        assert!((avg[(0, 0)].re - want0).abs() < 1e-12 * want0);
        assert!((avg[(1, 1)].re - want1).abs() < 1e-12 * want1);
    }

    #[test]
    fn unbounded_growth_is_flagged() {
        let t = ComplexMatrix::from_diag(&[2.0, 1.0]);
        let trace = one_sided_dyadic(&t, &HermitianMatrix::identity(2), DEFAULT_LEVELS);
        assert!(trace.grew_unbounded());
        let out = refine_one_sided(
            &t,
            &HermitianMatrix::identity(2),
            DEFAULT_LEVELS,
            DEFAULT_MAX_RUNS,
            1e-10,
        );
        assert!(out.grew_unbounded());
        assert_eq!(out.runs, 1, "growth must stop the iteration immediately");
    }

    #[test]
    fn two_sided_attributes_the_growing_direction() {
        let t = ComplexMatrix::from_diag(&[2.0, 1.0]);
        let tinv = ComplexMatrix::from_diag(&[0.5, 1.0]);
        let fwd = two_sided_dyadic(&t, &tinv, &HermitianMatrix::identity(2), DEFAULT_LEVELS);
        assert!(fwd.forward_grew && !fwd.backward_grew);
        let bwd = two_sided_dyadic(&tinv, &t, &HermitianMatrix::identity(2), DEFAULT_LEVELS);
        assert!(bwd.backward_grew && !bwd.forward_grew);
    }

    #[test]
    fn unitary_average_stays_identity() {
        let u = ComplexMatrix::from_complex_diag(&[
            Complex64::new(0.0, 1.0),
            Complex64::from_polar(1.0, 0.7),
        ]);
        let out = refine_one_sided(
            &u,
            &HermitianMatrix::identity(2),
            DEFAULT_LEVELS,
            DEFAULT_MAX_RUNS,
            1e-10,
        );
        assert!(!out.grew_unbounded());
        assert!(out.avg.matrix().sub(&ComplexMatrix::identity(2)).max_abs() < 1e-10);
        assert!(out.defect < 1e-10);
        assert_eq!(out.runs, 1, "a unitary is already at the fixed point");
    }

    #[test]
    fn iteration_reaches_defects_a_single_window_cannot() {
        // Conjugated unitary: one window of length 2^17 leaves a defect near
        // (C² + 1)/2^17 ≈ 1e-4; iterating the window multiplies the damping.
        let (t, _, _) = crate::synth::conjugated_unitary(4, 9.0, &mut crate::synth::rng(3));
        let id = HermitianMatrix::identity(4);
        let single = one_sided_dyadic(&t, &id, DEFAULT_LEVELS);
        let single_defect = conjugation_defect(&t, &single.avg);
        let out = refine_one_sided(&t, &id, DEFAULT_LEVELS, DEFAULT_MAX_RUNS, 1e-10);
        assert!(!out.grew_unbounded());
        assert!(
            out.defect <= 1e-10 * out.max_eigenvalue().max(1.0),
            "iterated defect {} did not reach the target",
            out.defect
        );
        assert!(
            out.defect < single_defect / 100.0,
            "iteration ({:.3e} after {} runs) should beat one window ({:.3e})",
            out.defect,
            out.runs,
            single_defect
        );
    }

    #[test]
    fn two_sided_iteration_reaches_tight_fixed_point() {
        let (t, _, _) = crate::synth::conjugated_unitary(3, 4.0, &mut crate::synth::rng(8));
        let tinv = crate::linalg::inverse(&t).unwrap();
        let id = HermitianMatrix::identity(3);
        let ref2 = refine_two_sided(&t, &tinv, &id, DEFAULT_LEVELS, DEFAULT_MAX_RUNS, 1e-10);
        assert!(!ref2.out.grew_unbounded());
        assert!(ref2.out.defect <= 1e-10 * ref2.out.max_eigenvalue().max(1.0));
    }
}
