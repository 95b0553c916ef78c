//! Normalized potentials: the holomorphic input of the reconstruction.
//!
//! A potential is assembled from two expressions in `z` and a weight:
//!
//! * `q`, the Hopf differential coefficient,
//! * `w`, the holomorphic polarization of the log conformal factor along
//!   the reference slice, normalized so only `w(z) - w(0)` matters up to
//!   one residual `w(0)` twist,
//! * `a > 0`, `a != 1`, the weight carrying the target mean curvature
//!   `h = (a^2 + 1) / (a^2 - 1)`.
//!
//! The potential matrix is off-diagonal (it rides at theta^{-1} in the
//! loop picture, so the twisting condition forces this shape):
//!
//! ```text
//! P(z) = [0,                                   -e^{-2w(z)+w(0)} q(z)]
//!        [(1/2) e^{2w(z)-w(0)} sqrt(h^2-1),     0                   ]
//! ```
//!
//! The same data read through the flat-space recipe at mean curvature
//! `sqrt(h^2 - 1)` must reproduce the identical matrix; that correspondence
//! is implemented twice on purpose ([`euclidean_potential_at`] shares no
//! code or cached values with [`NormalizedPotential::matrix_at`]) so the
//! two routes can be compared in tests.

use num_complex::Complex64;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::expr::{EvalError, Expr};
use crate::geometry::h_of_a;
use crate::mat2::{cr, Mat2C};
use crate::twisted::Loop;

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialError {
    /// Weight outside (0, inf) \ {1}.
    InvalidWeight { a: f64 },
    /// `w` has a pole at the base point z = 0, so the normalization
    /// constant does not exist.
    BasePointPole,
    /// An entry expression hit a pole at the evaluation point; carries the
    /// byte position of the offending operator.
    EntryPole { pos: usize },
    /// Overflow while assembling the matrix.
    NonFinite { pos: usize },
}

impl core::fmt::Display for PotentialError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PotentialError::InvalidWeight { a } => {
                write!(f, "weight a = {a} must be positive and different from 1")
            }
            PotentialError::BasePointPole => {
                write!(f, "w has a pole at the base point z = 0")
            }
            PotentialError::EntryPole { pos } => {
                write!(f, "potential entry has a pole (operator at byte {pos})")
            }
            PotentialError::NonFinite { pos } => {
                write!(f, "potential entry overflowed (operator at byte {pos})")
            }
        }
    }
}

impl From<EvalError> for PotentialError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Pole { pos } => PotentialError::EntryPole { pos },
            EvalError::NonFinite { pos } => PotentialError::NonFinite { pos },
        }
    }
}

/// Weight whose reconstruction targets mean curvature `h`, |h| > 1:
/// the inverse of [`h_of_a`].
pub fn weight_for_h(h: f64) -> f64 {
    assert!(h.abs() > 1.0, "target mean curvature needs |h| > 1");
    ((h + 1.0) / (h - 1.0)).sqrt()
}

#[derive(Clone, Debug)]
pub struct NormalizedPotential {
    pub q: Expr,
    pub w: Expr,
    pub a: f64,
    /// Cached normalization w(0).
    w0: Complex64,
    /// Cached h_of_a(a).
    h: f64,
    /// Cached sqrt(h^2 - 1).
    root: f64,
}

impl NormalizedPotential {
    pub fn new(q: Expr, w: Expr, a: f64) -> Result<NormalizedPotential, PotentialError> {
        if !(a > 0.0) || a == 1.0 || !a.is_finite() {
            return Err(PotentialError::InvalidWeight { a });
        }
        let w0 = w
            .eval(Complex64::new(0.0, 0.0))
            .map_err(|_| PotentialError::BasePointPole)?;
        let h = h_of_a(a);
        Ok(NormalizedPotential {
            q,
            w,
            a,
            w0,
            h,
            root: (h * h - 1.0).sqrt(),
        })
    }

    /// Target mean curvature of this potential.
    pub fn target_h(&self) -> f64 {
        self.h
    }

    /// The reciprocal curvature candidate, for verifiers that decide the
    /// branch a posteriori.
    pub fn target_h_reciprocal(&self) -> f64 {
        1.0 / self.h
    }

    pub fn normalization(&self) -> Complex64 {
        self.w0
    }

    /// Potential matrix at a point.
    pub fn matrix_at(&self, z: Complex64) -> Result<Mat2C, PotentialError> {
        let qv = self.q.eval(z)?;
        let wv = self.w.eval(z)?;
        let upper = -((-2.0 * wv + self.w0).exp()) * qv;
        let lower = 0.5 * self.root * (2.0 * wv - self.w0).exp();
        let m = Mat2C::new(cr(0.0), upper, lower, cr(0.0));
        if !m.norm().is_finite() {
            return Err(PotentialError::NonFinite { pos: 0 });
        }
        Ok(m)
    }

    /// Potential as a twisted loop of degree `n`: the matrix rides at
    /// theta^{-1}.
    pub fn loop_at(&self, z: Complex64, n: usize) -> Result<Loop, PotentialError> {
        Ok(Loop::monomial(n, -1, self.matrix_at(z)?))
    }
}

/// Flat-space normalized potential at mean curvature `m` from the same
/// expression data. Deliberately self-contained: it evaluates its own
/// normalization and assembles its own entries, so agreement with the
/// curved-space construction at `m = sqrt(h^2 - 1)` is a real cross-check
/// rather than a tautology.
pub fn euclidean_potential_at(
    q: &Expr,
    w: &Expr,
    m: f64,
    z: Complex64,
) -> Result<Mat2C, PotentialError> {
    let w0 = w
        .eval(Complex64::new(0.0, 0.0))
        .map_err(|_| PotentialError::BasePointPole)?;
    let wv = w.eval(z)?;
    let qv = q.eval(z)?;
    let scale = (wv + wv - w0).exp();
    let out = Mat2C::new(
        cr(0.0),
        -qv / scale,
        Complex64::new(0.5 * m, 0.0) * scale,
        cr(0.0),
    );
    if !out.norm().is_finite() {
        return Err(PotentialError::NonFinite { pos: 0 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat2::c;
    use crate::sample::Rng;

    fn parse(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn vacuum_potential_is_constant_rotation_generator() {
        // a = 1 + sqrt(2) targets h = sqrt(2), so sqrt(h^2-1) = 1 and
        // P = [[0, -1/2], [1/2, 0]] everywhere
        let a = 1.0 + core::f64::consts::SQRT_2;
        let p = NormalizedPotential::new(parse("1/2"), parse("0"), a).unwrap();
        assert!((p.target_h() - core::f64::consts::SQRT_2).abs() < 1e-14);
        for z in [c(0.0, 0.0), c(0.3, -0.2), c(-0.5, 0.5)] {
            let m = p.matrix_at(z).unwrap();
            let want = Mat2C::new(cr(0.0), cr(-0.5), cr(0.5), cr(0.0));
            assert!((m - want).norm() < 1e-14);
        }
    }

    #[test]
    fn weight_sqrt3_targets_h_two() {
        let p = NormalizedPotential::new(parse("1/2"), parse("0"), 3f64.sqrt()).unwrap();
        assert!((p.target_h() - 2.0).abs() < 1e-14);
        assert!((p.target_h_reciprocal() - 0.5).abs() < 1e-14);
        let m = p.matrix_at(c(0.1, 0.1)).unwrap();
        assert!((m.m[0][1] - cr(-0.5)).norm() < 1e-14);
        assert!((m.m[1][0] - cr(0.5 * 3f64.sqrt())).norm() < 1e-14);
    }

    #[test]
    fn weight_validation() {
        assert!(matches!(
            NormalizedPotential::new(parse("z"), parse("0"), 1.0),
            Err(PotentialError::InvalidWeight { .. })
        ));
        assert!(matches!(
            NormalizedPotential::new(parse("z"), parse("0"), -2.0),
            Err(PotentialError::InvalidWeight { .. })
        ));
        assert!(matches!(
            NormalizedPotential::new(parse("z"), parse("1/z"), 2.0),
            Err(PotentialError::BasePointPole)
        ));
    }

    #[test]
    fn weight_for_h_inverts_h_of_a() {
        let mut rng = Rng::new(0x91);
        for _ in 0..100 {
            let a = 0.2 + 4.8 * rng.unit();
            if (a - 1.0).abs() < 1e-3 {
                continue;
            }
            let back = weight_for_h(h_of_a(a));
            assert!((back - a).abs() < 1e-10 * (1.0 + a));
        }
        assert!((weight_for_h(2.0) - 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn poles_surface_as_entry_errors() {
        let p = NormalizedPotential::new(parse("1/z"), parse("0"), 2.0).unwrap();
        assert!(matches!(
            p.matrix_at(c(0.0, 0.0)),
            Err(PotentialError::EntryPole { pos: 1 })
        ));
        assert!(p.matrix_at(c(0.25, 0.0)).is_ok());
    }

    #[test]
    fn nonconstant_w_twists_the_entries() {
        let p = NormalizedPotential::new(parse("z"), parse("z^2 - 1/4"), 2.0).unwrap();
        let z = c(0.3, -0.1);
        let m = p.matrix_at(z).unwrap();
        let wv = z * z - cr(0.25);
        let w0 = cr(-0.25);
        let want_01 = -((-2.0 * wv + w0).exp()) * z;
        assert!((m.m[0][1] - want_01).norm() < 1e-13);
        // the two exponential factors cancel in the determinant
        let det = m.det();
        let h = p.target_h();
        let want_det = 0.5 * z * (h * h - 1.0).sqrt();
        assert!((det - want_det).norm() < 1e-13);
    }

    #[test]
    fn loop_form_is_twisted_and_sits_at_theta_inverse() {
        let p = NormalizedPotential::new(parse("z^2"), parse("z/2"), 0.5).unwrap();
        let l = p.loop_at(c(0.2, 0.4), 8).unwrap();
        assert_eq!(l.parity_deviation(), 0.0);
        assert!(l.coeff(-1).norm() > 0.0);
        assert_eq!(l.coeff(0), Mat2C::zero());
        assert_eq!(l.coeff(1), Mat2C::zero());
    }

    fn random_poly(rng: &mut Rng, deg: usize) -> Expr {
        let mut e = Expr::Num((rng.below(100) as f64 + 1.0) / 50.0);
        if rng.unit() < 0.5 {
            e = Expr::Neg(Box::new(e));
        }
        for k in 1..=deg {
            let coef = Expr::Num((rng.below(100) as f64 + 1.0) / (25.0 * k as f64));
            let term = Expr::Mul(
                Box::new(coef),
                Box::new(Expr::Pow(Box::new(Expr::Z), k as i32, 0)),
            );
            e = if rng.unit() < 0.5 {
                Expr::Add(Box::new(e), Box::new(term))
            } else {
                Expr::Sub(Box::new(e), Box::new(term))
            };
        }
        e
    }

    #[test]
    fn euclidean_route_reproduces_the_matrix() {
        let mut rng = Rng::new(0x92);
        for _ in 0..20 {
            let q = random_poly(&mut rng, 3);
            let w = random_poly(&mut rng, 2);
            let a = if rng.unit() < 0.5 {
                0.2 + 0.6 * rng.unit()
            } else {
                1.2 + 2.0 * rng.unit()
            };
            let p = NormalizedPotential::new(q.clone(), w.clone(), a).unwrap();
            let h = p.target_h();
            let m = (h * h - 1.0).sqrt();
            for _ in 0..10 {
                let z = rng.complex(0.8);
                let curved = p.matrix_at(z).unwrap();
                let flat = euclidean_potential_at(&q, &w, m, z).unwrap();
                assert!(
                    (curved - flat).norm() <= 1e-12 * (1.0 + curved.norm()),
                    "routes disagree at {z}"
                );
            }
        }
    }
}
