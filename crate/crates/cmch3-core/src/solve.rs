//! Dense complex linear algebra at the sizes this crate needs: LU with
//! partial pivoting for the truncated Riemann-Hilbert systems and a
//! Cholesky factorization for block-Toeplitz Gram matrices. Matrices are
//! row major in flat slices.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// Failure of a dense solve, with a crude pivot-ratio condition estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolveError {
    /// A pivot vanished (or underflowed) during LU elimination.
    Singular { pivot_index: usize },
    /// A diagonal entry failed positivity during Cholesky; the index is the
    /// order of the offending leading minor.
    NotPositiveDefinite { minor: usize },
}

impl core::fmt::Display for SolveError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SolveError::Singular { pivot_index } => {
                write!(f, "singular system (zero pivot at row {pivot_index})")
            }
            SolveError::NotPositiveDefinite { minor } => {
                write!(f, "matrix not positive definite (leading minor {minor})")
            }
        }
    }
}

/// Solves `A X = B` in place for `nrhs` right-hand columns. `a` is n x n,
/// `b` is n x nrhs, both row major; `b` is overwritten with the solution.
/// Returns the pivot-ratio condition estimate max|pivot| / min|pivot|.
pub fn lu_solve(a: &mut [Complex64], b: &mut [Complex64], n: usize, nrhs: usize) -> Result<f64, SolveError> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n * nrhs);
    let mut piv_min = f64::INFINITY;
    let mut piv_max = 0.0f64;

    for col in 0..n {
        let mut best = col;
        let mut best_val = a[col * n + col].norm();
        for row in col + 1..n {
            let v = a[row * n + col].norm();
            if v > best_val {
                best_val = v;
                best = row;
            }
        }
        if best_val == 0.0 || !best_val.is_finite() {
            return Err(SolveError::Singular { pivot_index: col });
        }
        piv_min = piv_min.min(best_val);
        piv_max = piv_max.max(best_val);
        if best != col {
            for k in 0..n {
                a.swap(col * n + k, best * n + k);
            }
            for k in 0..nrhs {
                b.swap(col * nrhs + k, best * nrhs + k);
            }
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            a[row * n + col] = factor;
            for k in col + 1..n {
                let t = a[col * n + k] * factor;
                a[row * n + k] -= t;
            }
            for k in 0..nrhs {
                let t = b[col * nrhs + k] * factor;
                b[row * nrhs + k] -= t;
            }
        }
    }

    for col in (0..n).rev() {
        let pivot = a[col * n + col];
        for k in 0..nrhs {
            let mut s = b[col * nrhs + k];
            for j in col + 1..n {
                s -= a[col * n + j] * b[j * nrhs + k];
            }
            b[col * nrhs + k] = s / pivot;
        }
    }

    Ok(piv_max / piv_min)
}

/// In-place lower Cholesky `A = L L*` of a Hermitian positive definite
/// matrix (only the lower triangle of `a` is read). On success the strict
/// upper triangle is zeroed and `a` holds `L`.
pub fn cholesky_lower(a: &mut [Complex64], n: usize) -> Result<(), SolveError> {
    assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(SolveError::NotPositiveDefinite { minor: j });
        }
        let ljj = d.sqrt();
        a[j * n + j] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                let t = a[i * n + k] * a[j * n + k].conj();
                s -= t;
            }
            a[i * n + j] = s / ljj;
        }
        for i in 0..j {
            a[i * n + j] = Complex64::new(0.0, 0.0);
        }
    }
    Ok(())
}

/// Convenience: dense matrix-vector residual `max |A x - b|` for checking
/// solves in tests.
pub fn residual_inf(a: &[Complex64], x: &[Complex64], b: &[Complex64], n: usize, nrhs: usize) -> f64 {
    let mut worst = 0.0f64;
    let mut row = vec![Complex64::new(0.0, 0.0); nrhs];
    for i in 0..n {
        for item in row.iter_mut() {
            *item = Complex64::new(0.0, 0.0);
        }
        for j in 0..n {
            for (k, item) in row.iter_mut().enumerate() {
                *item += a[i * n + j] * x[j * nrhs + k];
            }
        }
        for (k, item) in row.iter().enumerate() {
            worst = worst.max((*item - b[i * nrhs + k]).norm());
        }
    }
    worst
}

/// Multiplies the Hermitian matrix reconstructed from a lower factor,
/// `L L*`, for factorization tests.
pub fn reconstruct_lower(l: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..=i.min(j) {
                s += l[i * n + k] * l[j * n + k].conj();
            }
            out[i * n + j] = s;
        }
    }
    out
}
