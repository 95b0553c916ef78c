//! Complex 2x2 matrices and the Hermitian model of Minkowski 4-space.
//!
//! A point x = (x0, x1, x2, x3) of R^{3,1} is identified with the Hermitian
//! matrix
//!
//! ```text
//!     X = [ x0 + x3    x1 + i x2 ]
//!         [ x1 - i x2  x0 - x3   ]
//! ```
//!
//! so that det X = -<x, x> for the inner product of signature (-,+,+,+).
//! Hyperbolic 3-space is the sheet { <x,x> = -1, x0 > 0 }, on which
//! SL(2,C) acts isometrically by g . X = g X g*.
//!
//! The Pauli basis used throughout is
//! sigma0 = I, sigma1 = [[0,1],[1,0]], sigma2 = [[0,i],[-i,0]],
//! sigma3 = diag(1,-1). Note the sign of sigma2: it is the negative of the
//! convention common in the physics literature.

use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

/// Relative tolerance used by the Hermitian-matrix predicates when the
/// caller does not supply one.
pub const HERMITIAN_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Dense complex 2x2 matrix, row major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2C {
    pub m: [[Complex64; 2]; 2],
}

impl Mat2C {
    pub const fn new(m11: Complex64, m12: Complex64, m21: Complex64, m22: Complex64) -> Self {
        Mat2C {
            m: [[m11, m12], [m21, m22]],
        }
    }

    pub fn zero() -> Self {
        Mat2C::new(cr(0.0), cr(0.0), cr(0.0), cr(0.0))
    }

    pub fn identity() -> Self {
        Mat2C::new(cr(1.0), cr(0.0), cr(0.0), cr(1.0))
    }

    pub fn diag(d1: Complex64, d2: Complex64) -> Self {
        Mat2C::new(d1, cr(0.0), cr(0.0), d2)
    }

    pub fn trace(&self) -> Complex64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Mat2C {
        Mat2C::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    /// Adjugate: adj(X) X = det(X) I. Linear in the entries, which makes it
    /// the right tool for polarizing the determinant.
    pub fn adjugate(&self) -> Mat2C {
        Mat2C::new(self.m[1][1], -self.m[0][1], -self.m[1][0], self.m[0][0])
    }

    /// Inverse through the adjugate. Returns `None` when `det` vanishes to
    /// working precision relative to the matrix size.
    pub fn inverse(&self) -> Option<Mat2C> {
        let d = self.det();
        if d.norm() <= 1e-14 * (1.0 + self.norm_inf()) {
            return None;
        }
        let inv_d = cr(1.0) / d;
        Some(self.adjugate().scale(inv_d))
    }

    pub fn scale(&self, s: Complex64) -> Mat2C {
        Mat2C::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn scale_re(&self, s: f64) -> Mat2C {
        self.scale(cr(s))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..2 {
            for cidx in 0..2 {
                s += self.m[r][cidx].norm_sqr();
            }
        }
        s.sqrt()
    }

    /// Largest entry modulus.
    pub fn norm_inf(&self) -> f64 {
        let mut s: f64 = 0.0;
        for r in 0..2 {
            for cidx in 0..2 {
                s = s.max(self.m[r][cidx].norm());
            }
        }
        s
    }

    /// ||X - X^dagger||, absolute.
    pub fn hermitian_deviation(&self) -> f64 {
        (*self - self.dagger()).norm()
    }

    /// |det X - 1|.
    pub fn sl2_deviation(&self) -> f64 {
        (self.det() - cr(1.0)).norm()
    }

    /// ||X X^dagger - I|| + |det X - 1|.
    pub fn su2_deviation(&self) -> f64 {
        (*self * self.dagger() - Mat2C::identity()).norm() + self.sl2_deviation()
    }

    /// |tr X|.
    pub fn traceless_deviation(&self) -> f64 {
        self.trace().norm()
    }

    /// Relative Hermitian test: deviation measured against `tol * (1 + ||X||)`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol * (1.0 + self.norm())
    }

    pub fn is_sl2(&self, tol: f64) -> bool {
        self.sl2_deviation() <= tol * (1.0 + self.norm())
    }

    pub fn is_su2(&self, tol: f64) -> bool {
        self.su2_deviation() <= tol * (1.0 + self.norm())
    }

    pub fn is_traceless(&self, tol: f64) -> bool {
        self.traceless_deviation() <= tol * (1.0 + self.norm())
    }
}

impl Add for Mat2C {
    type Output = Mat2C;
    fn add(self, rhs: Mat2C) -> Mat2C {
        Mat2C::new(
            self.m[0][0] + rhs.m[0][0],
            self.m[0][1] + rhs.m[0][1],
            self.m[1][0] + rhs.m[1][0],
            self.m[1][1] + rhs.m[1][1],
        )
    }
}

impl Sub for Mat2C {
    type Output = Mat2C;
    fn sub(self, rhs: Mat2C) -> Mat2C {
        Mat2C::new(
            self.m[0][0] - rhs.m[0][0],
            self.m[0][1] - rhs.m[0][1],
            self.m[1][0] - rhs.m[1][0],
            self.m[1][1] - rhs.m[1][1],
        )
    }
}

impl Mul for Mat2C {
    type Output = Mat2C;
    fn mul(self, rhs: Mat2C) -> Mat2C {
        let a = &self.m;
        let b = &rhs.m;
        Mat2C::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Neg for Mat2C {
    type Output = Mat2C;
    fn neg(self) -> Mat2C {
        self.scale_re(-1.0)
    }
}

/// Pauli basis element, index 0..=3. Panics on a larger index.
pub fn pauli(i: usize) -> Mat2C {
    match i {
        0 => Mat2C::identity(),
        1 => Mat2C::new(cr(0.0), cr(1.0), cr(1.0), cr(0.0)),
        2 => Mat2C::new(cr(0.0), c(0.0, 1.0), c(0.0, -1.0), cr(0.0)),
        3 => Mat2C::diag(cr(1.0), cr(-1.0)),
        _ => panic!("pauli index out of range: {i}"),
    }
}

/// Point of R^{3,1} with coordinates (x0, x1, x2, x3), signature (-,+,+,+).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzVec {
    pub x0: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

impl LorentzVec {
    pub fn new(x0: f64, x1: f64, x2: f64, x3: f64) -> Self {
        LorentzVec { x0, x1, x2, x3 }
    }

    pub fn minkowski_sq(&self) -> f64 {
        -self.x0 * self.x0 + self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3
    }
}

/// Hermitian matrix of a Lorentz vector: x0 sigma0 + x1 sigma1 + x2 sigma2 + x3 sigma3.
pub fn to_hermitian(v: &LorentzVec) -> Mat2C {
    Mat2C::new(
        cr(v.x0 + v.x3),
        c(v.x1, v.x2),
        c(v.x1, -v.x2),
        cr(v.x0 - v.x3),
    )
}

/// Inverse of [`to_hermitian`]. Fails when `x` is not Hermitian within
/// `tol * (1 + ||x||)`; the error carries the measured deviation.
pub fn from_hermitian(x: &Mat2C, tol: f64) -> Result<LorentzVec, NotHermitian> {
    let dev = x.hermitian_deviation();
    if dev > tol * (1.0 + x.norm()) {
        return Err(NotHermitian { deviation: dev });
    }
    let x0 = 0.5 * (x.m[0][0].re + x.m[1][1].re);
    let x3 = 0.5 * (x.m[0][0].re - x.m[1][1].re);
    let x1 = 0.5 * (x.m[0][1].re + x.m[1][0].re);
    let x2 = 0.5 * (x.m[0][1].im - x.m[1][0].im);
    Ok(LorentzVec::new(x0, x1, x2, x3))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NotHermitian {
    pub deviation: f64,
}

impl core::fmt::Display for NotHermitian {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "matrix is not Hermitian (deviation {:.3e})",
            self.deviation
        )
    }
}

/// Complex-bilinear extension of the Minkowski inner product,
/// `<X, Y> = -1/2 tr(X adj(Y))`. Both arguments may be arbitrary complex
/// matrices (complexified vectors); for Hermitian inputs the value is real.
pub fn minkowski_pairing(x: &Mat2C, y: &Mat2C) -> Complex64 {
    (*x * y.adjugate()).trace() * cr(-0.5)
}

/// Minkowski inner product of two Hermitian matrices. The Hermitian
/// precondition is the caller's responsibility; only the real part is
/// returned.
pub fn minkowski_inner(x: &Mat2C, y: &Mat2C) -> f64 {
    minkowski_pairing(x, y).re
}
