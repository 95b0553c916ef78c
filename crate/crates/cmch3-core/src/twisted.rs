//! Truncated twisted loops in SL(2,C) and their two factorizations.
//!
//! A loop is a matrix Laurent polynomial `g(theta) = sum_{|j|<=N} c_j theta^j`
//! subject to the twisting condition `g(-theta) = sigma3 g(theta) sigma3`:
//! coefficients at even degree are diagonal, at odd degree off-diagonal.
//! All four entry slots are stored; the twisted sparsity pattern is preserved
//! exactly by multiplication, star, inversion and both splittings, because
//! the dead entries only ever accumulate products with exact zeros.
//!
//! The two decompositions of the loop group used by the construction:
//!
//! * Birkhoff: `L = p_plus * p_minus^{-1}` with `p_minus` normalized to the
//!   identity at theta = infinity. Solved as one dense linear system over
//!   the stacked Fourier coefficients (a truncated Riemann-Hilbert
//!   projection); failure of that system signals a loop off the big cell.
//! * Iwasawa: `Phi = F * B_plus` with `F` pointwise unitary on the circle
//!   and `B_plus` holomorphic in the disk, constant term upper triangular
//!   with positive diagonal. Computed by spectral (Fejer-Riesz type)
//!   factorization of the Gram symbol `star(Phi) * Phi` via a Bauer
//!   block-Toeplitz Cholesky; loss of positive definiteness is exactly the
//!   singular-point failure mode.
//!
//! Truncation is hard at degree N. Every operation records the mass of the
//! coefficients it drops in the `tail` budget of its result, so a pipeline
//! can report how much Laurent content was lost end to end.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::mat2::{cr, Mat2C};
use crate::solve::{cholesky_lower, lu_solve, SolveError};

/// Default truncation degree.
pub const DEFAULT_DEGREE: usize = 16;

/// Number of circle samples used by the residual helpers unless a caller
/// asks otherwise.
pub const CIRCLE_SAMPLES: usize = 64;

/// Pivot-ratio ceiling beyond which a truncated linear system is reported
/// as numerically singular.
const COND_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LoopError {
    /// The theta^0-dominant system for a loop inverse is singular.
    Singular { cond: f64 },
    /// Birkhoff splitting failed: the loop is (numerically) off the big cell.
    NotInBigCell { cond: f64 },
    /// Iwasawa splitting failed: the Gram symbol is not positive definite on
    /// the circle. Carries the order of the failing leading minor.
    SingularPoint { minor: usize },
}

impl core::fmt::Display for LoopError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LoopError::Singular { cond } => write!(f, "loop inverse is singular (cond ~ {cond:.3e})"),
            LoopError::NotInBigCell { cond } => {
                write!(f, "loop is not in the big cell (cond ~ {cond:.3e})")
            }
            LoopError::SingularPoint { minor } => {
                write!(f, "Gram symbol not positive definite (leading minor {minor})")
            }
        }
    }
}

/// Result of a Birkhoff factorization `L = plus * minus^{-1}`.
#[derive(Clone, Debug)]
pub struct BirkhoffSplit {
    /// Holomorphic in the disk (degrees 0..=N).
    pub plus: Loop,
    /// Holomorphic outside the disk, identity constant term (degrees -N..=0).
    pub minus: Loop,
    /// Sup over the enforced window of the defect `(L * minus)_k`, k < 0,
    /// plus the spilled mass below degree -N.
    pub residual: f64,
}

/// Result of an Iwasawa factorization `Phi = unitary * plus`.
#[derive(Clone, Debug)]
pub struct IwasawaSplit {
    /// Pointwise unitary on |theta| = 1.
    pub unitary: Loop,
    /// Holomorphic in the disk; constant term upper triangular with positive
    /// real diagonal.
    pub plus: Loop,
}

/// Matrix Laurent polynomial with degrees in [-N, N].
#[derive(Clone, Debug)]
pub struct Loop {
    n: usize,
    c: Vec<Mat2C>,
    tail: f64,
}

impl Loop {
    pub fn zero(n: usize) -> Self {
        Loop {
            n,
            c: vec![Mat2C::zero(); 2 * n + 1],
            tail: 0.0,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut g = Loop::zero(n);
        g.set_coeff(0, Mat2C::identity());
        g
    }

    /// Loop with a single coefficient `m` at degree `j`.
    pub fn monomial(n: usize, j: i32, m: Mat2C) -> Self {
        let mut g = Loop::zero(n);
        g.set_coeff(j, m);
        g
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    /// Accumulated truncation budget.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn add_tail(&mut self, t: f64) {
        self.tail += t;
    }

    #[inline]
    fn idx(&self, j: i32) -> usize {
        debug_assert!(j.unsigned_abs() as usize <= self.n);
        (j + self.n as i32) as usize
    }

    /// Coefficient at degree `j`. Panics when |j| exceeds the truncation
    /// degree.
    pub fn coeff(&self, j: i32) -> Mat2C {
        assert!(
            j.unsigned_abs() as usize <= self.n,
            "coefficient degree {j} out of range (N = {})",
            self.n
        );
        self.c[self.idx(j)]
    }

    pub fn try_coeff(&self, j: i32) -> Option<Mat2C> {
        if j.unsigned_abs() as usize <= self.n {
            Some(self.c[self.idx(j)])
        } else {
            None
        }
    }

    pub fn set_coeff(&mut self, j: i32, m: Mat2C) {
        assert!(
            j.unsigned_abs() as usize <= self.n,
            "coefficient degree {j} out of range (N = {})",
            self.n
        );
        let k = self.idx(j);
        self.c[k] = m;
    }

    /// Re-truncates to degree `n2`, recording any dropped mass.
    pub fn with_degree(&self, n2: usize) -> Loop {
        let mut out = Loop::zero(n2);
        out.tail = self.tail;
        for j in -(self.n as i32)..=(self.n as i32) {
            let m = self.c[self.idx(j)];
            if j.unsigned_abs() as usize <= n2 {
                out.set_coeff(j, m);
            } else {
                out.tail += m.norm();
            }
        }
        out
    }

    pub fn add(&self, other: &Loop) -> Loop {
        assert_eq!(self.n, other.n, "loop degree mismatch");
        let mut out = Loop::zero(self.n);
        for k in 0..self.c.len() {
            out.c[k] = self.c[k] + other.c[k];
        }
        out.tail = self.tail + other.tail;
        out
    }

    pub fn sub(&self, other: &Loop) -> Loop {
        assert_eq!(self.n, other.n, "loop degree mismatch");
        let mut out = Loop::zero(self.n);
        for k in 0..self.c.len() {
            out.c[k] = self.c[k] - other.c[k];
        }
        out.tail = self.tail + other.tail;
        out
    }

    pub fn scale(&self, s: Complex64) -> Loop {
        let mut out = self.clone();
        for m in out.c.iter_mut() {
            *m = m.scale(s);
        }
        out.tail = self.tail * s.norm();
        out
    }

    /// Full (untruncated) convolution product; result degrees span
    /// [-(na+nb), na+nb], returned with its offset implicit.
    fn mul_raw(&self, other: &Loop) -> Vec<Mat2C> {
        let na = self.n as i32;
        let nb = other.n as i32;
        let nout = (na + nb) as usize;
        let mut out = vec![Mat2C::zero(); 2 * nout + 1];
        for ja in -na..=na {
            let a = self.c[self.idx(ja)];
            if a.norm_inf() == 0.0 {
                continue;
            }
            for jb in -nb..=nb {
                let b = other.c[other.idx(jb)];
                if b.norm_inf() == 0.0 {
                    continue;
                }
                let k = (ja + jb + nout as i32) as usize;
                out[k] = out[k] + a * b;
            }
        }
        out
    }

    /// Product truncated to the degree of `self`; dropped coefficients feed
    /// the tail budget.
    pub fn mul(&self, other: &Loop) -> Loop {
        assert_eq!(self.n, other.n, "loop degree mismatch");
        let n = self.n;
        let raw = self.mul_raw(other);
        let nout = 2 * n as i32;
        let mut out = Loop::zero(n);
        let mut dropped = 0.0;
        for (k, m) in raw.iter().enumerate() {
            let j = k as i32 - nout;
            if j.unsigned_abs() as usize <= n {
                out.set_coeff(j, *m);
            } else {
                dropped += m.norm();
            }
        }
        out.tail = self.tail + other.tail + dropped;
        out
    }

    /// Right multiplication by a single term `m theta^shift`, truncated.
    /// Cheaper than building a monomial loop; used in the frame integrators.
    pub fn mul_term(&self, m: &Mat2C, shift: i32) -> Loop {
        let n = self.n as i32;
        let mut out = Loop::zero(self.n);
        let mut dropped = 0.0;
        for j in -n..=n {
            let a = self.c[self.idx(j)];
            if a.norm_inf() == 0.0 {
                continue;
            }
            let k = j + shift;
            let prod = a * *m;
            if k.unsigned_abs() as usize <= self.n {
                let t = out.coeff(k) + prod;
                out.set_coeff(k, t);
            } else {
                dropped += prod.norm();
            }
        }
        out.tail = self.tail + dropped;
        out
    }

    /// Adjoint loop: `star(g)(theta) = g(theta)^dagger` on the unit circle,
    /// i.e. coefficientwise `(c_{-j})^dagger`.
    pub fn star(&self) -> Loop {
        let n = self.n as i32;
        let mut out = Loop::zero(self.n);
        for j in -n..=n {
            out.set_coeff(j, self.c[self.idx(-j)].dagger());
        }
        out.tail = self.tail;
        out
    }

    /// Evaluation by Horner recursion from the top degree. Panics at
    /// theta = 0, where a Laurent polynomial with negative degrees has no
    /// value.
    pub fn eval(&self, theta: Complex64) -> Mat2C {
        assert!(theta.norm_sqr() > 0.0, "loop evaluation at theta = 0");
        let n = self.n as i32;
        let mut acc = self.c[self.idx(n)];
        let mut j = n - 1;
        while j >= -n {
            acc = acc.scale(theta) + self.c[self.idx(j)];
            j -= 1;
        }
        acc.scale(theta.powi(-n))
    }

    /// l1 mass of all coefficients.
    pub fn coeff_abs_sum(&self) -> f64 {
        self.c.iter().map(|m| m.norm()).sum()
    }

    /// Mass sitting in entries forbidden by the twisting condition.
    pub fn parity_deviation(&self) -> f64 {
        let n = self.n as i32;
        let mut dev = 0.0;
        for j in -n..=n {
            let m = self.c[self.idx(j)];
            if j.rem_euclid(2) == 0 {
                dev += m.m[0][1].norm() + m.m[1][0].norm();
            } else {
                dev += m.m[0][0].norm() + m.m[1][1].norm();
            }
        }
        dev
    }

    pub fn is_twisted(&self, tol: f64) -> bool {
        self.parity_deviation() <= tol * (1.0 + self.coeff_abs_sum())
    }

    /// Mass of coefficients at negative degrees.
    pub fn negative_mass(&self) -> f64 {
        (1..=self.n as i32)
            .map(|j| self.c[self.idx(-j)].norm())
            .sum()
    }

    /// Mass of coefficients at positive degrees.
    pub fn positive_mass(&self) -> f64 {
        (1..=self.n as i32).map(|j| self.c[self.idx(j)].norm()).sum()
    }

    /// Equally spaced points on the unit circle.
    pub fn circle(samples: usize) -> impl Iterator<Item = Complex64> {
        (0..samples).map(move |k| {
            Complex64::from_polar(1.0, core::f64::consts::TAU * k as f64 / samples as f64)
        })
    }

    /// Sup over sampled circle points of `||self(theta) - other(theta)||`.
    pub fn sup_diff(&self, other: &Loop, samples: usize) -> f64 {
        Loop::circle(samples)
            .map(|t| (self.eval(t) - other.eval(t)).norm())
            .fold(0.0, f64::max)
    }

    /// Sup of `||g(theta) g(theta)^dagger - I||` over sampled circle points.
    pub fn unitarity_deviation(&self, samples: usize) -> f64 {
        Loop::circle(samples)
            .map(|t| {
                let g = self.eval(t);
                (g * g.dagger() - Mat2C::identity()).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Sup of `|det g(theta) - 1|` over sampled circle points.
    pub fn det_deviation(&self, samples: usize) -> f64 {
        Loop::circle(samples)
            .map(|t| (self.eval(t).det() - cr(1.0)).norm())
            .fold(0.0, f64::max)
    }

    /// Truncated loop inverse: solves the convolution system
    /// `sum_m g_{k-m} X_m = delta_{k0} I` over the representable window.
    /// The spill of `g * X` outside the window joins the tail budget.
    pub fn inv(&self) -> Result<Loop, LoopError> {
        let n = self.n;
        let nb = 2 * n + 1;
        let dim = 2 * nb;
        let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
        let mut b = vec![Complex64::new(0.0, 0.0); dim * 2];
        for k in -(n as i32)..=(n as i32) {
            for m in -(n as i32)..=(n as i32) {
                let d = k - m;
                if d.unsigned_abs() as usize > n {
                    continue;
                }
                let blk = self.c[self.idx(d)];
                for r in 0..2 {
                    for s in 0..2 {
                        let row = (k + n as i32) as usize * 2 + r;
                        let col = (m + n as i32) as usize * 2 + s;
                        a[row * dim + col] = blk.m[r][s];
                    }
                }
            }
        }
        for r in 0..2 {
            b[(n * 2 + r) * 2 + r] = Complex64::new(1.0, 0.0);
        }
        let cond = match lu_solve(&mut a, &mut b, dim, 2) {
            Ok(c) => c,
            Err(SolveError::Singular { .. }) => return Err(LoopError::Singular { cond: f64::INFINITY }),
            Err(SolveError::NotPositiveDefinite { minor }) => {
                return Err(LoopError::SingularPoint { minor })
            }
        };
        if cond > COND_LIMIT {
            return Err(LoopError::Singular { cond });
        }
        let mut x = Loop::zero(n);
        for m in -(n as i32)..=(n as i32) {
            let base = (m + n as i32) as usize * 2;
            let blk = Mat2C::new(b[base * 2], b[base * 2 + 1], b[(base + 1) * 2], b[(base + 1) * 2 + 1]);
            x.set_coeff(m, blk);
        }
        // Window spill of g * x measures how much inverse tail was cut off.
        let raw = self.mul_raw(&x);
        let nout = 2 * n as i32;
        let mut spill = 0.0;
        for (k, m) in raw.iter().enumerate() {
            let j = k as i32 - nout;
            if j.unsigned_abs() as usize > n {
                spill += m.norm();
            }
        }
        x.tail = self.tail + spill;
        Ok(x)
    }

    /// Birkhoff factorization `self = plus * minus^{-1}` with
    /// `minus(inf) = I`, by a single dense solve of the truncated
    /// Riemann-Hilbert system for the negative window.
    pub fn birkhoff_split(&self) -> Result<BirkhoffSplit, LoopError> {
        let n = self.n;
        let mut minus = Loop::identity(n);
        let mut cond = 1.0;
        if n > 0 {
            let dim = 2 * n;
            let mut a = vec![Complex64::new(0.0, 0.0); dim * dim];
            let mut b = vec![Complex64::new(0.0, 0.0); dim * 2];
            // unknown blocks x_m, m = -n..=-1; equations k = -n..=-1
            for k in -(n as i32)..=-1 {
                for m in -(n as i32)..=-1 {
                    let d = k - m;
                    if d.unsigned_abs() as usize > n {
                        continue;
                    }
                    let blk = self.c[self.idx(d)];
                    for r in 0..2 {
                        for s in 0..2 {
                            let row = (k + n as i32) as usize * 2 + r;
                            let col = (m + n as i32) as usize * 2 + s;
                            a[row * dim + col] = blk.m[r][s];
                        }
                    }
                }
                let rhs = -self.c[self.idx(k)];
                for r in 0..2 {
                    for s in 0..2 {
                        b[((k + n as i32) as usize * 2 + r) * 2 + s] = rhs.m[r][s];
                    }
                }
            }
            cond = match lu_solve(&mut a, &mut b, dim, 2) {
                Ok(c) => c,
                Err(_) => return Err(LoopError::NotInBigCell { cond: f64::INFINITY }),
            };
            if cond > COND_LIMIT {
                return Err(LoopError::NotInBigCell { cond });
            }
            for m in -(n as i32)..=-1 {
                let base = (m + n as i32) as usize * 2;
                let blk = Mat2C::new(
                    b[base * 2],
                    b[base * 2 + 1],
                    b[(base + 1) * 2],
                    b[(base + 1) * 2 + 1],
                );
                minus.set_coeff(m, blk);
            }
        }

        // plus = nonnegative part of L * minus; the negative part is the
        // factorization defect.
        let raw = self.mul_raw(&minus);
        let nout = 2 * n as i32;
        let mut plus = Loop::zero(n);
        let mut residual = 0.0f64;
        for (kk, m) in raw.iter().enumerate() {
            let j = kk as i32 - nout;
            if j >= 0 && j as usize <= n {
                plus.set_coeff(j, *m);
            } else {
                residual = residual.max(m.norm());
            }
        }
        let _ = cond;
        plus.tail = self.tail;
        minus.tail = self.tail;
        Ok(BirkhoffSplit {
            plus,
            minus,
            residual,
        })
    }

    /// Iwasawa factorization `self = unitary * plus` through a Bauer-type
    /// block-Toeplitz Cholesky of the Gram symbol `star(self) * self` with
    /// `blocks` Toeplitz rows. Positive-definiteness failure is reported as
    /// a singular point.
    pub fn iwasawa_split_with(&self, blocks: usize) -> Result<IwasawaSplit, LoopError> {
        let n = self.n;
        let band = 2 * n as i32;
        // Gram coefficients R_k, |k| <= 2n, computed without truncation.
        let star = self.star();
        let raw = star.mul_raw(self);
        let r_coeff = |k: i32| -> Mat2C {
            if k.unsigned_abs() as usize > 2 * n {
                Mat2C::zero()
            } else {
                raw[(k + band) as usize]
            }
        };

        let mm = blocks.max(2 * n + 2);
        let dim = 2 * mm;
        // Flipped Toeplitz: block (i, j) holds R_{j-i}; its lower Cholesky
        // factor carries the spectral factor along the last block row.
        let mut t = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..mm {
            for j in 0..mm {
                let d = j as i32 - i as i32;
                if d.abs() > band {
                    continue;
                }
                let blk = r_coeff(d);
                for r in 0..2 {
                    for s in 0..2 {
                        t[(i * 2 + r) * dim + (j * 2 + s)] = blk.m[r][s];
                    }
                }
            }
        }
        match cholesky_lower(&mut t, dim) {
            Ok(()) => {}
            Err(SolveError::NotPositiveDefinite { minor }) => {
                return Err(LoopError::SingularPoint { minor })
            }
            Err(SolveError::Singular { pivot_index }) => {
                return Err(LoopError::SingularPoint { minor: pivot_index })
            }
        }

        // B_m = (bottom-row block at column M-1-m)^dagger, m = 0..=2n.
        let last = mm - 1;
        let mut plus = Loop::zero(n);
        let mut dropped = 0.0;
        for m in 0..=(2 * n).min(last) {
            let jb = last - m;
            let blk = Mat2C::new(
                t[(last * 2) * dim + (jb * 2)],
                t[(last * 2) * dim + (jb * 2 + 1)],
                t[(last * 2 + 1) * dim + (jb * 2)],
                t[(last * 2 + 1) * dim + (jb * 2 + 1)],
            )
            .dagger();
            if m <= n {
                plus.set_coeff(m as i32, blk);
            } else {
                dropped += blk.norm();
            }
        }
        plus.tail = self.tail + dropped;

        let plus_inv = match plus.inv() {
            Ok(p) => p,
            Err(_) => return Err(LoopError::SingularPoint { minor: 0 }),
        };
        let unitary = self.mul(&plus_inv);
        Ok(IwasawaSplit { unitary, plus })
    }

    /// [`Self::iwasawa_split_with`] at the default Toeplitz depth
    /// `max(64, 4N + 8)`.
    pub fn iwasawa_split(&self) -> Result<IwasawaSplit, LoopError> {
        self.iwasawa_split_with((4 * self.n + 8).max(64))
    }
}
