//! Surface data in conformal coordinates and its integrability structure.
//!
//! A surface of constant mean curvature `h` with |h| > 1 is described on a
//! grid by the triple (u, Q, h): the log conformal factor `u`, the Hopf
//! differential coefficient `Q`, and `h` itself. The triple is admissible
//! exactly when the compatibility residuals vanish:
//!
//! * Gauss:   `u_zzbar - (e^{2u}/4)(1 - h^2) - e^{-2u} |Q|^2 = 0`
//! * Codazzi: `Q_zbar = 0`
//!
//! Two commuting deformations act on admissible triples. The `s`-deformation
//! rescales the principal directions through the factor
//! `k = (s(1+h) + s^{-1}(1-h)) / 2`, sending `(u, Q, h)` to
//! `(u + ln|k|, kQ, ((s(1+h) - s^{-1}(1-h)) / (2k))`; it degenerates (mean
//! curvature runs off to infinity) exactly where `k = 0`. The associate
//! (theta) deformation rotates `Q` by `theta^{-2}` and leaves `u` and `h`
//! alone. Both map solutions to solutions, transforming the residual fields
//! covariantly, which the tests pin down numerically.
//!
//! The same data feeds the zero-curvature (Lax) pairs: an untwisted pair
//! with spectral parameter appearing in even powers, and its twisted
//! counterpart obtained by conjugating with the off-diagonal gauge
//! `i [[0, lambda], [lambda^{-1}, 0]]`, `lambda^2 = theta`. At the
//! unitarizing value of `s` the twisted pair becomes su(2)-valued on the
//! unit circle; that specialization is the Maurer-Cartan data of the
//! unitary frame and the anchor for the whole reconstruction.

use alloc::vec::Vec;

use num_complex::Complex64;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::fd;
use crate::grid::Grid;
use crate::mat2::{c, cr, Mat2C};
use crate::twisted::Loop;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeformError {
    /// The deformation factor k vanished; the deformed mean curvature is
    /// unbounded at this parameter.
    InfiniteMeanCurvature,
    /// Deformation parameters must be positive reals.
    NonPositiveParameter,
}

impl core::fmt::Display for DeformError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DeformError::InfiniteMeanCurvature => {
                write!(f, "deformation factor vanishes: mean curvature diverges")
            }
            DeformError::NonPositiveParameter => write!(f, "deformation parameter must be > 0"),
        }
    }
}

/// Conformal-coordinate surface data on a grid.
#[derive(Clone, Debug)]
pub struct SurfaceTriple {
    pub grid: Grid,
    /// Log conformal factor, one value per node.
    pub u: Vec<f64>,
    /// Hopf differential coefficient, one value per node.
    pub q: Vec<Complex64>,
    /// Mean curvature, constant over the surface.
    pub h: f64,
}

impl SurfaceTriple {
    pub fn new(grid: Grid, u: Vec<f64>, q: Vec<Complex64>, h: f64) -> SurfaceTriple {
        assert_eq!(u.len(), grid.len(), "u field size mismatch");
        assert_eq!(q.len(), grid.len(), "Q field size mismatch");
        SurfaceTriple { grid, u, q, h }
    }

    /// Gauss residual field, second-order stencils (one-sided at edges).
    pub fn gauss_residual(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.len());
        for (ix, iy, _) in g.iter() {
            let uzz =
                0.25 * fd::laplacian2(&self.u, g.nx, g.ny, ix, iy, g.dx(), g.dy());
            let k = g.idx(ix, iy);
            let e2u = (2.0 * self.u[k]).exp();
            let qq = self.q[k].norm_sqr();
            out.push(uzz - 0.25 * e2u * (1.0 - self.h * self.h) - qq / e2u);
        }
        out
    }

    /// Codazzi residual field `Q_zbar`, second-order stencils.
    pub fn codazzi_residual(&self) -> Vec<Complex64> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.len());
        for (ix, iy, _) in g.iter() {
            out.push(fd::wirt_zbar2(&self.q, g.nx, g.ny, ix, iy, g.dx(), g.dy()));
        }
        out
    }
}

/// Deformation factor `k` for parameter `s` at mean curvature `h`.
pub fn deform_factor(h: f64, s: f64) -> Result<f64, DeformError> {
    if !(s > 0.0) {
        return Err(DeformError::NonPositiveParameter);
    }
    Ok(0.5 * (s * (1.0 + h) + (1.0 - h) / s))
}

/// Mean curvature of the `s`-deformed surface.
pub fn deformed_h(h: f64, s: f64) -> Result<f64, DeformError> {
    let k = deform_factor(h, s)?;
    if k == 0.0 {
        return Err(DeformError::InfiniteMeanCurvature);
    }
    Ok(0.5 * (s * (1.0 + h) - (1.0 - h) / s) / k)
}

/// The `s`-deformation of a triple. `s = 1` is the identity and returns an
/// exact copy.
pub fn s_deform(t: &SurfaceTriple, s: f64) -> Result<SurfaceTriple, DeformError> {
    if !(s > 0.0) {
        return Err(DeformError::NonPositiveParameter);
    }
    if s == 1.0 {
        return Ok(t.clone());
    }
    let k = deform_factor(t.h, s)?;
    if k == 0.0 || !k.is_finite() {
        return Err(DeformError::InfiniteMeanCurvature);
    }
    let h2 = deformed_h(t.h, s)?;
    let lnk = k.abs().ln();
    Ok(SurfaceTriple {
        grid: t.grid,
        u: t.u.iter().map(|v| v + lnk).collect(),
        q: t.q.iter().map(|v| v * k).collect(),
        h: h2,
    })
}

/// The associate-family rotation: `Q -> theta^{-2} Q` for unimodular theta.
pub fn theta_deform(t: &SurfaceTriple, theta: Complex64) -> SurfaceTriple {
    let w = theta.powi(-2);
    SurfaceTriple {
        grid: t.grid,
        u: t.u.clone(),
        q: t.q.iter().map(|v| v * w).collect(),
        h: t.h,
    }
}

/// Parameter at which the `s`-deformation reverses the sign of the mean
/// curvature (|k| = 1 there, so u and |Q| are preserved).
pub fn proper_s(h: f64) -> f64 {
    ((1.0 - h) / (1.0 + h)).abs()
}

/// Parameter at which the twisted Lax pair becomes su(2)-valued on the unit
/// circle. Requires |h| > 1; this is also where `deform_factor` vanishes.
pub fn unitarizing_s(h: f64) -> f64 {
    assert!(h.abs() > 1.0, "unitarizing parameter needs |h| > 1");
    ((h - 1.0) / (h + 1.0)).sqrt()
}

/// Mean curvature reconstructed from the weight parameter `a` of a
/// normalized potential.
pub fn h_of_a(a: f64) -> f64 {
    assert!(a > 0.0 && a != 1.0, "weight must be positive and != 1");
    (a * a + 1.0) / (a * a - 1.0)
}

/// The reciprocal candidate `1 / h_of_a`; kept alongside [`h_of_a`] so a
/// verifier can decide empirically which branch a computed surface landed
/// on instead of trusting one formula.
pub fn h_of_a_reciprocal(a: f64) -> f64 {
    1.0 / h_of_a(a)
}

/// Deformation parameter tied to the weight `a` at mean curvature `h`.
/// Equals 1 exactly when `h = h_of_a(a)`.
pub fn s_of_a(a: f64, h: f64) -> f64 {
    assert!(a > 0.0, "weight must be positive");
    a * unitarizing_s(h)
}

/// Pointwise surface data entering the Lax pairs.
#[derive(Clone, Copy, Debug)]
pub struct LaxData {
    pub u: f64,
    pub uz: Complex64,
    pub uzbar: Complex64,
    pub q: Complex64,
    pub h: f64,
}

/// Twisted Lax matrix, dz direction:
/// `[[-u_z/2, -theta^{-1} e^{-u} Q], [theta^{-1} (s/2) e^u (1+h), u_z/2]]`.
pub fn lax_dz(d: &LaxData, s: f64, theta: Complex64) -> Mat2C {
    let ti = theta.inv();
    let eu = d.u.exp();
    Mat2C::new(
        -0.5 * d.uz,
        -ti * d.q / eu,
        ti * (0.5 * s * eu * (1.0 + d.h)),
        0.5 * d.uz,
    )
}

/// Twisted Lax matrix, dzbar direction:
/// `[[u_zbar/2, theta (1/(2s)) e^u (1-h)], [theta e^{-u} conj(Q), -u_zbar/2]]`.
pub fn lax_dzbar(d: &LaxData, s: f64, theta: Complex64) -> Mat2C {
    let eu = d.u.exp();
    Mat2C::new(
        0.5 * d.uzbar,
        theta * (0.5 / s * eu * (1.0 - d.h)),
        theta * d.q.conj() / eu,
        -0.5 * d.uzbar,
    )
}

/// Untwisted Lax matrix, dz direction; the spectral parameter enters in
/// even powers only.
pub fn lax_dz_untwisted(d: &LaxData, s: f64, lambda: Complex64) -> Mat2C {
    let eu = d.u.exp();
    Mat2C::new(
        0.5 * d.uz,
        cr(0.5 * s * eu * (1.0 + d.h)),
        -lambda.powi(-4) * d.q / eu,
        -0.5 * d.uz,
    )
}

/// Untwisted Lax matrix, dzbar direction.
pub fn lax_dzbar_untwisted(d: &LaxData, s: f64, lambda: Complex64) -> Mat2C {
    let eu = d.u.exp();
    Mat2C::new(
        -0.5 * d.uzbar,
        lambda.powi(4) * d.q.conj() / eu,
        cr(0.5 / s * eu * (1.0 - d.h)),
        0.5 * d.uzbar,
    )
}

/// Off-diagonal gauge `i [[0, lambda], [lambda^{-1}, 0]]` conjugating the
/// untwisted pair into the twisted one at `theta = lambda^2`. It is its own
/// negative inverse: `gauge^{-1} = -gauge`, `gauge^2 = -I`.
pub fn gauge(lambda: Complex64) -> Mat2C {
    let i = c(0.0, 1.0);
    Mat2C::new(cr(0.0), i * lambda, i * lambda.inv(), cr(0.0))
}

/// Maurer-Cartan coefficient of the unitary frame, dz direction: the
/// twisted Lax matrix at the unitarizing `s`.
pub fn adjusted_mc_dz(d: &LaxData, theta: Complex64) -> Mat2C {
    lax_dz(d, unitarizing_s(d.h), theta)
}

/// Maurer-Cartan coefficient of the unitary frame, dzbar direction. On
/// |theta| = 1 this equals minus the adjoint of [`adjusted_mc_dz`].
pub fn adjusted_mc_dzbar(d: &LaxData, theta: Complex64) -> Mat2C {
    lax_dzbar(d, unitarizing_s(d.h), theta)
}

/// The adjusted Maurer-Cartan coefficients as twisted loops of degree `n`:
/// dz part with coefficients at theta^0 and theta^{-1}, dzbar part at
/// theta^0 and theta^{+1}.
pub fn adjusted_mc_loops(d: &LaxData, n: usize) -> (Loop, Loop) {
    let s = unitarizing_s(d.h);
    let eu = d.u.exp();
    let mut dz = Loop::zero(n);
    dz.set_coeff(0, Mat2C::diag(-0.5 * d.uz, 0.5 * d.uz));
    dz.set_coeff(
        -1,
        Mat2C::new(
            cr(0.0),
            -d.q / eu,
            cr(0.5 * s * eu * (1.0 + d.h)),
            cr(0.0),
        ),
    );
    let mut dzbar = Loop::zero(n);
    dzbar.set_coeff(0, Mat2C::diag(0.5 * d.uzbar, -0.5 * d.uzbar));
    dzbar.set_coeff(
        1,
        Mat2C::new(
            cr(0.0),
            cr(0.5 / s * eu * (1.0 - d.h)),
            d.q.conj() / eu,
            cr(0.0),
        ),
    );
    (dz, dzbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{smooth_field, Rng};
    use crate::twisted::Loop;

    fn random_triple(rng: &mut Rng, n: usize) -> SurfaceTriple {
        let grid = Grid::square(0.5, n);
        let u = smooth_field(rng, n, n, 0.8);
        let qre = smooth_field(rng, n, n, 1.5);
        let qim = smooth_field(rng, n, n, 1.5);
        let q = qre
            .iter()
            .zip(qim.iter())
            .map(|(a, b)| c(*a, *b))
            .collect();
        let h = (1.05 + 8.95 * rng.unit()) * if rng.unit() < 0.5 { -1.0 } else { 1.0 };
        SurfaceTriple::new(grid, u, q, h)
    }

    fn random_lax(rng: &mut Rng) -> LaxData {
        LaxData {
            u: rng.sym(1.0),
            uz: rng.complex(1.0),
            uzbar: rng.complex(1.0),
            q: rng.complex(2.0),
            h: (1.05 + 8.95 * rng.unit()) * if rng.unit() < 0.5 { -1.0 } else { 1.0 },
        }
    }

    #[test]
    fn flat_vacuum_solves_both_equations() {
        // u = 0, Q = 1/2, h = sqrt(2): residuals vanish identically
        let grid = Grid::square(0.5, 17);
        let t = SurfaceTriple::new(
            grid,
            vec![0.0; grid.len()],
            vec![cr(0.5); grid.len()],
            core::f64::consts::SQRT_2,
        );
        for r in t.gauss_residual() {
            assert!(r.abs() < 1e-13);
        }
        for r in t.codazzi_residual() {
            assert!(r.norm() < 1e-13);
        }
        // same data at a different h misses by a constant
        let bad = SurfaceTriple::new(grid, t.u.clone(), t.q.clone(), 2.0);
        for r in bad.gauss_residual() {
            assert!((r - 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn deformation_arithmetic_examples() {
        // h = 3, s = 1/2: k = -1, deformed h = -3
        assert!((deform_factor(3.0, 0.5).unwrap() + 1.0).abs() < 1e-15);
        assert!((deformed_h(3.0, 0.5).unwrap() + 3.0).abs() < 1e-15);
        // h = 5/3, s = 1/2 collapses
        assert_eq!(
            deformed_h(5.0 / 3.0, 0.5),
            Err(DeformError::InfiniteMeanCurvature)
        );
        assert_eq!(deform_factor(2.0, -1.0), Err(DeformError::NonPositiveParameter));
    }

    #[test]
    fn special_parameters() {
        // h = 2: flip parameter 1/3 sends h to -2 with |k| = 1
        assert!((proper_s(2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((deformed_h(2.0, proper_s(2.0)).unwrap() + 2.0).abs() < 1e-14);
        assert!((deform_factor(2.0, proper_s(2.0)).unwrap().abs() - 1.0).abs() < 1e-14);
        // unitarizing s is exactly the collapse point of the deformation
        let s0 = unitarizing_s(2.0);
        assert!((s0 - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(deform_factor(2.0, s0).unwrap().abs() < 1e-15);
        // and works on the negative branch
        let s0n = unitarizing_s(-2.0);
        assert!((s0n - 3f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn weight_to_curvature_map() {
        let a = 3f64.sqrt();
        assert!((h_of_a(a) - 2.0).abs() < 1e-14);
        assert!((h_of_a_reciprocal(a) - 0.5).abs() < 1e-14);
        // a = 1 + sqrt(2) is the self-consistent point h = sqrt(2)
        let a2 = 1.0 + core::f64::consts::SQRT_2;
        assert!((h_of_a(a2) - core::f64::consts::SQRT_2).abs() < 1e-14);
        // s_of_a is the identity deformation exactly on the matched branch
        assert!((s_of_a(a, h_of_a(a)) - 1.0).abs() < 1e-14);
        assert!((s_of_a(a2, h_of_a(a2)) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_deformation_is_exact_copy() {
        let mut rng = Rng::new(0x81);
        let t = random_triple(&mut rng, 9);
        let d = s_deform(&t, 1.0).unwrap();
        assert_eq!(t.u, d.u);
        assert_eq!(t.q, d.q);
        assert_eq!(t.h, d.h);
    }

    #[test]
    fn deformations_transport_residuals() {
        let mut rng = Rng::new(0x82);
        for _ in 0..12 {
            let t = random_triple(&mut rng, 17);
            let s = 0.3 + 2.2 * rng.unit();
            let k = deform_factor(t.h, s).unwrap();
            if k.abs() < 1e-3 {
                continue;
            }
            let d = s_deform(&t, s).unwrap();
            // Gauss residual is invariant, Codazzi residual picks up k
            let (g0, g1) = (t.gauss_residual(), d.gauss_residual());
            for (a, b) in g0.iter().zip(g1.iter()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
            let (c0, c1) = (t.codazzi_residual(), d.codazzi_residual());
            for (a, b) in c0.iter().zip(c1.iter()) {
                assert!((b - k * a).norm() <= 1e-12 * (1.0 + a.norm()));
            }

            let theta = rng.unit_circle();
            let r = theta_deform(&t, theta);
            let w = theta.powi(-2);
            let (g2, c2) = (r.gauss_residual(), r.codazzi_residual());
            for (a, b) in g0.iter().zip(g2.iter()) {
                assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
            for (a, b) in c0.iter().zip(c2.iter()) {
                assert!((b - w * a).norm() <= 1e-12 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn deformation_composes_on_curvature() {
        // deforming by s then s' matches deforming by s s'
        let mut rng = Rng::new(0x83);
        for _ in 0..50 {
            let h = (1.05 + 5.0 * rng.unit()) * if rng.unit() < 0.5 { -1.0 } else { 1.0 };
            let s1 = 0.4 + 2.0 * rng.unit();
            let s2 = 0.4 + 2.0 * rng.unit();
            let (Ok(h1), Ok(h12)) = (deformed_h(h, s1), deformed_h(h, s1 * s2)) else {
                continue;
            };
            let Ok(h2) = deformed_h(h1, s2) else { continue };
            assert!(
                (h12 - h2).abs() <= 1e-9 * (1.0 + h12.abs()),
                "composition broke: {h12} vs {h2}"
            );
        }
    }

    #[test]
    fn gauge_conjugation_links_the_two_pairs() {
        let mut rng = Rng::new(0x84);
        for _ in 0..100 {
            let d = random_lax(&mut rng);
            let s = 0.3 + 2.4 * rng.unit();
            let lambda = rng.unit_circle();
            let theta = lambda * lambda;
            let g = gauge(lambda);
            let gi = -g; // gauge^{-1} = -gauge
            assert!((g * gi - Mat2C::identity()).norm() < 1e-14);
            let a = gi * lax_dz_untwisted(&d, s, lambda) * g;
            assert!((a - lax_dz(&d, s, theta)).norm() < 1e-12);
            let b = gi * lax_dzbar_untwisted(&d, s, lambda) * g;
            assert!((b - lax_dzbar(&d, s, theta)).norm() < 1e-12);
        }
    }

    #[test]
    fn lax_matrices_are_traceless() {
        let mut rng = Rng::new(0x85);
        for _ in 0..20 {
            let d = random_lax(&mut rng);
            let s = 0.3 + 2.4 * rng.unit();
            let t = rng.unit_circle();
            assert!(lax_dz(&d, s, t).trace().norm() < 1e-14);
            assert!(lax_dzbar(&d, s, t).trace().norm() < 1e-14);
            assert!(lax_dz_untwisted(&d, s, t).trace().norm() < 1e-14);
            assert!(lax_dzbar_untwisted(&d, s, t).trace().norm() < 1e-14);
        }
    }

    #[test]
    fn adjusted_mc_is_su2_on_the_circle() {
        let mut rng = Rng::new(0x86);
        for _ in 0..200 {
            let mut d = random_lax(&mut rng);
            // u is a real field, so its zbar derivative is conj(u_z)
            d.uzbar = d.uz.conj();
            let theta = rng.unit_circle();
            let a = adjusted_mc_dz(&d, theta);
            let b = adjusted_mc_dzbar(&d, theta);
            assert!(
                (b + a.dagger()).norm() <= 1e-13 * (1.0 + a.norm()),
                "dzbar part is not minus the adjoint"
            );
        }
    }

    #[test]
    fn adjusted_mc_loops_match_pointwise_values() {
        let mut rng = Rng::new(0x87);
        for _ in 0..20 {
            let d = random_lax(&mut rng);
            let (lz, lzb) = adjusted_mc_loops(&d, 4);
            assert_eq!(lz.parity_deviation(), 0.0);
            assert_eq!(lzb.parity_deviation(), 0.0);
            for theta in Loop::circle(8) {
                assert!((lz.eval(theta) - adjusted_mc_dz(&d, theta)).norm() < 1e-13);
                assert!((lzb.eval(theta) - adjusted_mc_dzbar(&d, theta)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn vacuum_lax_pair_commutes_only_at_sqrt2() {
        let vac = LaxData {
            u: 0.0,
            uz: cr(0.0),
            uzbar: cr(0.0),
            q: cr(0.5),
            h: core::f64::consts::SQRT_2,
        };
        let mut rng = Rng::new(0x88);
        for _ in 0..20 {
            let s = 0.3 + 2.4 * rng.unit();
            let t = rng.unit_circle();
            let a = lax_dz(&vac, s, t);
            let b = lax_dzbar(&vac, s, t);
            assert!((a * b - b * a).norm() < 1e-14);
        }
        let off = LaxData { h: 2.0, ..vac };
        let a = lax_dz(&off, 1.0, cr(1.0));
        let b = lax_dzbar(&off, 1.0, cr(1.0));
        assert!((a * b - b * a).norm() > 0.1);
    }
}
