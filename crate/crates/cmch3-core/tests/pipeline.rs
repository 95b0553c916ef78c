//! End-to-end checks of the reconstruction against elementary closed forms.
//!
//! At weight a = 1 + sqrt(2) the vacuum potential (Q = 1/2, w = 0) makes
//! the whole construction explicit: the weighted connection is a
//! constant-diagonal conjugate of a constant-coefficient form, so the
//! immersion has a 2x2 closed form with no loop machinery in it. The tests
//! here compare pipeline output against that, and pin the grid-resolution
//! floors of the path-independence diagnostics.

use num_complex::Complex64;

use cmch3_core::dpw::{adjusted_mc, immerse, run_pipeline, PipelineParams};
use cmch3_core::expr::Expr;
use cmch3_core::grid::Grid;
use cmch3_core::mat2::{cr, Mat2C};
use cmch3_core::potential::NormalizedPotential;
use cmch3_core::twisted::Loop;
use cmch3_core::verify::{report, HBranch};

/// Weight whose target curvature is sqrt(2); the dressed vacuum coincides
/// with the undeformed one there.
const A: f64 = 1.0 + std::f64::consts::SQRT_2;

fn vacuum(a: f64) -> NormalizedPotential {
    NormalizedPotential::new(Expr::parse("1/2").unwrap(), Expr::parse("0").unwrap(), a).unwrap()
}

fn params(degree: usize, two_path: bool) -> PipelineParams {
    PipelineParams {
        two_path,
        ..PipelineParams::with_degree(degree)
    }
}

fn p0() -> Mat2C {
    Mat2C::new(cr(0.0), cr(-0.5), cr(0.5), cr(0.0))
}

/// exp(w P0) in closed form: P0 squares to -I/4.
fn exp_p0(w: Complex64) -> Mat2C {
    let half = w * cr(0.5);
    Mat2C::identity().scale(half.cos()) + p0().scale(half.sin() * cr(2.0))
}

#[test]
fn vacuum_immersion_matches_closed_form() {
    let grid = Grid::square(0.5, 33);
    let field = run_pipeline(&vacuum(A), grid, &params(8, false)).unwrap();
    let im = immerse(&field, cr(1.0));
    // f(z) = D exp(K) D^{-2} exp(K)^dagger D at theta = 1, where
    // K = (sqrt(a) z + zbar/sqrt(a)) P0 and D = diag(a^{-1/4}, a^{1/4}):
    // conjugating the weighted connection by D makes its coefficients
    // proportional to P0, hence commuting, hence exactly integrable
    let sq = A.sqrt();
    let mu = A.powf(-0.25);
    let d = Mat2C::diag(cr(mu), cr(1.0 / mu));
    let d_inv2 = Mat2C::diag(cr(sq), cr(1.0 / sq));
    let mut worst = 0.0f64;
    for (ix, iy, z) in grid.iter() {
        let k = grid.idx(ix, iy);
        let got = im.f[k].expect("vacuum leaves no masked nodes");
        let e = exp_p0(cr(sq) * z + cr(1.0 / sq) * z.conj());
        let want = d * e * d_inv2 * e.dagger() * d;
        worst = worst.max((got - want).norm());
    }
    // loop truncation at N = 8 dominates near the corners
    assert!(worst < 5e-5, "closed-form defect {worst:.3e}");
}

#[test]
fn adjusted_mc_is_constant_on_vacuum() {
    // u = 0 on this vacuum, so Omega' = theta^{-1} P0 and
    // Omega'' = theta P0 exactly: lower-left at theta^{-1} is
    // (1/2) sqrt(H^2 - 1) = 1/2, upper-right is -Q = -1/2
    let grid = Grid::square(0.5, 33);
    let field = run_pipeline(&vacuum(A), grid, &params(8, false)).unwrap();
    for (ix, iy, _) in grid.iter() {
        if ix < 2 || iy < 2 || ix + 2 >= grid.nx || iy + 2 >= grid.ny {
            continue;
        }
        let (oz, ozb) = adjusted_mc(&grid, &field.unitary, ix, iy).unwrap();
        let dev_z = (oz.coeff(-1) - p0()).norm();
        let dev_zb = (ozb.coeff(1) - p0()).norm();
        assert!(dev_z < 1e-6, "({ix},{iy}) Omega' {dev_z:.3e}");
        assert!(dev_zb < 1e-6, "({ix},{iy}) Omega'' {dev_zb:.3e}");
        // diagonal constant term carries u_z, which vanishes here
        assert!(oz.coeff(0).norm() < 1e-6);
    }
}

#[test]
fn factored_transport_frames_match_linear_closed_form() {
    // the minus system integrates a constant source: G- = I + theta^{-1}
    // (a-1)/2 z E21; likewise G+ with the conjugate slot
    let grid = Grid::square(0.5, 33);
    let field = run_pipeline(&vacuum(A), grid, &params(8, false)).unwrap();
    let c_m = (A - 1.0) / 2.0;
    let c_p = (1.0 / A - 1.0) * (-0.5);
    let mut worst = 0.0f64;
    for (ix, iy, z) in grid.iter() {
        let k = grid.idx(ix, iy);
        let gm = field.g_minus[k].as_ref().unwrap();
        let gp = field.g_plus[k].as_ref().unwrap();
        let want_m = Loop::identity(8).add(&Loop::monomial(
            8,
            -1,
            Mat2C::new(cr(0.0), cr(0.0), cr(c_m) * z, cr(0.0)),
        ));
        let want_p = Loop::identity(8).add(&Loop::monomial(
            8,
            1,
            Mat2C::new(cr(0.0), cr(c_p) * z.conj(), cr(0.0), cr(0.0)),
        ));
        worst = worst.max(gm.sup_diff(&want_m, 16));
        worst = worst.max(gp.sup_diff(&want_p, 16));
    }
    // sources ride on finite differences of the unitary frame; their
    // boundary-stencil noise integrates to the floor seen here
    assert!(worst < 1e-5, "transport closed-form defect {worst:.3e}");
}

#[test]
fn two_path_floors_at_this_resolution() {
    let grid = Grid::square(0.5, 33);
    let field = run_pipeline(&vacuum(A), grid, &params(8, true)).unwrap();
    let pd = field.diag.path_dependence.unwrap();
    // exact integrand: machine floor
    assert!(pd.minus_frame < 1e-9, "phi {:.3e}", pd.minus_frame);
    // finite-difference sources: stencil-noise floor at h = 1/32
    assert!(pd.g_minus < 1e-5, "g_minus {:.3e}", pd.g_minus);
    assert!(pd.g_plus < 1e-5, "g_plus {:.3e}", pd.g_plus);
}

#[test]
fn acceptance_weight_resolves_target_branch() {
    // a = sqrt(3): candidate curvatures 2 and 1/2; the measured surface
    // picks the former
    let a = 3.0f64.sqrt();
    let pot = vacuum(a);
    let grid = Grid::square(0.5, 33);
    let field = run_pipeline(&pot, grid, &params(8, false)).unwrap();
    let im = immerse(&field, cr(1.0));
    let rep = report(&im, pot.target_h(), 1e-2);
    assert_eq!(rep.ok_nodes, 33 * 33);
    assert!(rep.det_max < 1e-6, "det {:.3e}", rep.det_max);
    assert!(rep.conformal_max < 1e-4, "conformal {:.3e}", rep.conformal_max);
    assert!(
        rep.h_stdev / rep.h_mean.abs() < 1e-3,
        "H {:.6} +- {:.3e}",
        rep.h_mean,
        rep.h_stdev
    );
    assert_eq!(rep.branch, HBranch::Target, "measured H {:.6}", rep.h_mean);
}
