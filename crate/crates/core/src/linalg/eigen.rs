//! Eigenvalue kernels: cyclic Jacobi for Hermitian matrices and
//! Hessenberg-plus-shifted-QR for general complex matrices.

use super::{Complex64, ComplexMatrix, LinalgError, Result};

const MAX_JACOBI_SWEEPS: usize = 64;

/// Eigenvalues (ascending) and, optionally, the unitary of eigenvectors of a
/// Hermitian matrix, by cyclic Jacobi rotations.
///
/// The caller is responsible for `a` being Hermitian; the kernel only reads
/// the upper triangle consistently with the lower through the rotations.
pub(super) fn jacobi_hermitian(
    a: &ComplexMatrix,
    want_vectors: bool,
) -> Result<(Vec<f64>, Option<ComplexMatrix>)> {
    let n = a.rows();
    let mut w = a.clone();
    // Force exact Hermitian structure so rounding in the input cannot leak
    // imaginary parts onto the diagonal.
    for i in 0..n {
        w[(i, i)] = Complex64::new(w[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = 0.5 * (w[(i, j)] + w[(j, i)].conj());
            w[(i, j)] = avg;
            w[(j, i)] = avg.conj();
        }
    }
    let mut v = if want_vectors {
        Some(ComplexMatrix::identity(n))
    } else {
        None
    };

    let fro = w.fro_norm().max(f64::MIN_POSITIVE);
    let target = (n as f64) * f64::EPSILON * fro;
    let mut converged = n <= 1;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        if off_norm(&w) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate_pair(&mut w, v.as_mut(), p, q);
            }
        }
    }
    if !converged && off_norm(&w) > 1e-11 * fro {
        return Err(LinalgError::EigenNoConverge);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        w[(i, i)]
            .re
            .partial_cmp(&w[(j, j)].re)
            .expect("finite eigenvalues")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| w[(i, i)].re).collect();
    let vectors = v.map(|v| {
        let mut out = ComplexMatrix::zeros(n, n);
        for (new_j, &old_j) in order.iter().enumerate() {
            for i in 0..n {
                out[(i, new_j)] = v[(i, old_j)];
            }
        }
        out
    });
    Ok((eigenvalues, vectors))
}

/// Frobenius norm of the off-diagonal part.
fn off_norm(w: &ComplexMatrix) -> f64 {
    let n = w.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * w[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// One Jacobi rotation zeroing `w[p][q]`, with `w ← U*wU` and `v ← vU`.
///
/// `U` is the identity outside the `(p, q)` plane and
/// `[[c, s·e^{iφ}], [-s·e^{-iφ}, c]]` inside it, where `φ = arg w[p][q]`.
fn rotate_pair(w: &mut ComplexMatrix, v: Option<&mut ComplexMatrix>, p: usize, q: usize) {
    let beta = w[(p, q)];
    let babs = beta.norm();
    if babs == 0.0 {
        return;
    }
    let alpha = w[(p, p)].re;
    let gamma = w[(q, q)].re;
    // Skip rotations that cannot change anything at working precision.
    if babs <= f64::EPSILON * 1e-6 * (alpha.abs() + gamma.abs()) {
        w[(p, q)] = Complex64::new(0.0, 0.0);
        w[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    let phase = beta / babs;
    let tau = (gamma - alpha) / (2.0 * babs);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let s_phase = phase * s; // s·e^{iφ}
    let s_phase_conj = s_phase.conj();

    let n = w.rows();
    // Update rows/columns outside the plane; Hermitian symmetry is kept
    // explicitly.
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let wkp = w[(k, p)];
        let wkq = w[(k, q)];
        let new_kp = wkp * c - wkq * s_phase_conj;
        let new_kq = wkp * s_phase + wkq * c;
        w[(k, p)] = new_kp;
        w[(p, k)] = new_kp.conj();
        w[(k, q)] = new_kq;
        w[(q, k)] = new_kq.conj();
    }
    w[(p, p)] = Complex64::new(alpha - t * babs, 0.0);
    w[(q, q)] = Complex64::new(gamma + t * babs, 0.0);
    w[(p, q)] = Complex64::new(0.0, 0.0);
    w[(q, p)] = Complex64::new(0.0, 0.0);

    if let Some(v) = v {
        for k in 0..n {
            let vkp = v[(k, p)];
            let vkq = v[(k, q)];
            v[(k, p)] = vkp * c - vkq * s_phase_conj;
            v[(k, q)] = vkp * s_phase + vkq * c;
        }
    }
}

/// Eigenvalues of a general square complex matrix: Householder reduction to
/// Hessenberg form, then explicit single-shift QR with deflation.
pub(super) fn general_eigenvalues(m: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = m.rows();
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let mut h = m.clone();
    hessenberg_in_place(&mut h);
    qr_eigenvalues(&mut h)
}

/// In-place unitary reduction to upper Hessenberg form.
fn hessenberg_in_place(h: &mut ComplexMatrix) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        // Householder vector for column k, rows k+1..n.
        let mut xnorm_sq = 0.0;
        for i in (k + 1)..n {
            xnorm_sq += h[(i, k)].norm_sqr();
        }
        let xnorm = xnorm_sq.sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let alpha = if x0.norm() == 0.0 {
            Complex64::new(-xnorm, 0.0)
        } else {
            -(x0 / x0.norm()) * xnorm
        };
        let mut v = vec![Complex64::new(0.0, 0.0); n - k - 1];
        v[0] = x0 - alpha;
        for i in (k + 2)..n {
            v[i - k - 1] = h[(i, k)];
        }
        let vnorm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let scale = 2.0 / vnorm_sq;

        // Left: rows k+1..n of columns k..n get (I - scale·vv*) applied.
        for j in k..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in (k + 1)..n {
                dot += v[i - k - 1].conj() * h[(i, j)];
            }
            let f = dot * scale;
            for i in (k + 1)..n {
                let vi = v[i - k - 1];
                let cur = h[(i, j)];
                h[(i, j)] = cur - vi * f;
            }
        }
        // Right: columns k+1..n of all rows.
        for i in 0..n {
            let mut dot = Complex64::new(0.0, 0.0);
            for j in (k + 1)..n {
                dot += h[(i, j)] * v[j - k - 1];
            }
            let f = dot * scale;
            for j in (k + 1)..n {
                let vj = v[j - k - 1];
                let cur = h[(i, j)];
                h[(i, j)] = cur - f * vj.conj();
            }
        }
        // The column below the subdiagonal is now zero by construction.
        h[(k + 1, k)] = alpha;
        for i in (k + 2)..n {
            h[(i, k)] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Shifted QR iteration on an upper Hessenberg matrix, eigenvalues only.
fn qr_eigenvalues(h: &mut ComplexMatrix) -> Result<Vec<Complex64>> {
    let n = h.rows();
    let mut eigenvalues = vec![Complex64::new(0.0, 0.0); n];
    let mut hi = n; // active block is rows/cols [lo, hi)
    let mut iters_this_block = 0usize;
    let mut total_iters = 0usize;
    let max_total = 120 * n;

    while hi > 0 {
        // Deflate tiny subdiagonals.
        for i in 1..hi {
            let sub = h[(i, i - 1)].norm();
            if sub <= f64::EPSILON * (h[(i - 1, i - 1)].norm() + h[(i, i)].norm())
                || sub < f64::MIN_POSITIVE
            {
                h[(i, i - 1)] = Complex64::new(0.0, 0.0);
            }
        }
        if hi == 1 || h[(hi - 1, hi - 2)].norm() == 0.0 {
            eigenvalues[hi - 1] = h[(hi - 1, hi - 1)];
            hi -= 1;
            iters_this_block = 0;
            continue;
        }
        // Start of the unreduced block ending at hi.
        let mut lo = hi - 1;
        while lo > 0 && h[(lo, lo - 1)].norm() != 0.0 {
            lo -= 1;
        }

        total_iters += 1;
        iters_this_block += 1;
        if total_iters > max_total {
            return Err(LinalgError::EigenNoConverge);
        }

        // Wilkinson shift from the trailing 2x2, with an occasional
        // exceptional shift to break symmetric stalls.
        let shift = if iters_this_block % 24 == 23 {
            h[(hi - 1, hi - 1)] + Complex64::new(0.75 * h[(hi - 1, hi - 2)].norm(), 0.0)
        } else {
            wilkinson_shift(h, hi)
        };

        qr_step(h, lo, hi, shift);
    }
    Ok(eigenvalues)
}

/// Eigenvalue of the trailing 2x2 block closest to the corner entry.
fn wilkinson_shift(h: &ComplexMatrix, hi: usize) -> Complex64 {
    let a = h[(hi - 2, hi - 2)];
    let b = h[(hi - 2, hi - 1)];
    let c = h[(hi - 1, hi - 2)];
    let d = h[(hi - 1, hi - 1)];
    let mid = 0.5 * (a - d);
    let disc = (mid * mid + b * c).sqrt();
    let r1 = d + mid + disc;
    let r2 = d + mid - disc;
    if (r1 - d).norm() <= (r2 - d).norm() {
        r1
    } else {
        r2
    }
}

/// One explicit shifted QR step on the block `[lo, hi)`:
/// `H - σI = QR` by Givens rotations, then `H ← RQ + σI`.
fn qr_step(h: &mut ComplexMatrix, lo: usize, hi: usize, shift: Complex64) {
    for i in lo..hi {
        let d = h[(i, i)];
        h[(i, i)] = d - shift;
    }
    let mut rotations = Vec::with_capacity(hi - lo);
    for i in lo..(hi - 1) {
        let (c, s) = givens(h[(i, i)], h[(i + 1, i)]);
        // Apply G* on the left to rows i, i+1 over columns i..hi.
        for j in i..hi {
            let a = h[(i, j)];
            let b = h[(i + 1, j)];
            h[(i, j)] = a * c + b * s;
            h[(i + 1, j)] = -a * s.conj() + b * c;
        }
        rotations.push((c, s));
    }
    for (idx, &(c, s)) in rotations.iter().enumerate() {
        let i = lo + idx;
        // Apply G* on the right to columns i, i+1 over rows lo..min(i+2, hi).
        let row_end = (i + 2).min(hi);
        for k in lo..row_end {
            let a = h[(k, i)];
            let b = h[(k, i + 1)];
            h[(k, i)] = a * c + b * s.conj();
            h[(k, i + 1)] = -a * s + b * c;
        }
    }
    for i in lo..hi {
        let d = h[(i, i)];
        h[(i, i)] = d + shift;
    }
}

/// Complex Givens pair `(c real, s)` with
/// `[[c, s], [-s̄, c]] · (f, g)ᵀ = (r, 0)ᵀ`.
fn givens(f: Complex64, g: Complex64) -> (f64, Complex64) {
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    let fn_ = f.norm();
    if fn_ == 0.0 {
        return (0.0, g.conj() / gn);
    }
    let r = (fn_ * fn_ + gn * gn).sqrt();
    let c = fn_ / r;
    let s = (f / fn_) * g.conj() / r;
    (c, s)
}
