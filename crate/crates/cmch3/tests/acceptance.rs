//! Acceptance suite: one test per shipping criterion, each printing a
//! single verdict line with the measured numbers (shown with
//! `--nocapture`, and always shown for failures).
//!
//! Criteria 5, 6, 7 and 10 share one end-to-end vacuum reconstruction
//! (Q = 1/2, h = 0, a = sqrt(3), 65x65 over [-0.5, 0.5]^2, degree 8),
//! built once behind a `OnceLock`.

use std::sync::OnceLock;
use std::time::Instant;

use num_complex::Complex64;

use cmch3_core::dpw::{immerse, run_pipeline, FrameField, PipelineParams};
use cmch3_core::expr::{EvalError, Expr, Func, ParseError};
use cmch3_core::geometry::{
    adjusted_mc_dz, adjusted_mc_dzbar, deform_factor, gauge, lax_dz, lax_dz_untwisted, lax_dzbar,
    lax_dzbar_untwisted, s_deform, theta_deform, LaxData, SurfaceTriple,
};
use cmch3_core::grid::Grid;
use cmch3_core::mat2::{c, cr};
use cmch3_core::potential::{euclidean_potential_at, weight_for_h, NormalizedPotential};
use cmch3_core::sample::{smooth_field, twisted_group_loop, Rng};
use cmch3_core::verify::{recover, report, HBranch, RecoveredSurface, VerifyReport};
use cmch3::report::decision_name;

const CIRCLE: usize = 64;

fn verdict(ord: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {ord:>2} [{tag}] {name}: {detail}");
    assert!(pass, "criterion {ord} ({name}) failed: {detail}");
}

// ---------------------------------------------------------------- shared run

struct Vacuum {
    field: FrameField,
    /// Wall time for pipeline + 8 immersions + verification.
    seconds: f64,
    thetas: Vec<Complex64>,
    reports: Vec<VerifyReport>,
    recovered: Vec<RecoveredSurface>,
}

static VACUUM: OnceLock<Vacuum> = OnceLock::new();

fn vacuum() -> &'static Vacuum {
    VACUUM.get_or_init(|| {
        let start = Instant::now();
        let pot = NormalizedPotential::new(
            Expr::parse("1/2").unwrap(),
            Expr::parse("0").unwrap(),
            3f64.sqrt(),
        )
        .unwrap();
        let grid = Grid::square(0.5, 65);
        let field = run_pipeline(&pot, grid, &PipelineParams::with_degree(8)).unwrap();
        let mut thetas = Vec::new();
        let mut reports = Vec::new();
        let mut recovered = Vec::new();
        for j in 0..8 {
            let ang = core::f64::consts::TAU * j as f64 / 8.0;
            let theta = c(ang.cos(), ang.sin());
            let im = immerse(&field, theta);
            reports.push(report(&im, pot.target_h(), 1e-2));
            recovered.push(recover(&im));
            thetas.push(theta);
        }
        let seconds = start.elapsed().as_secs_f64();
        Vacuum { field, seconds, thetas, reports, recovered }
    })
}

// ------------------------------------------------------------------ criteria

#[test]
fn criterion_01_loop_factorizations() {
    let mut rng = Rng::new(0xACCE01);
    let (mut remult_b, mut remult_i, mut unit_max, mut slowest) = (0f64, 0f64, 0f64, 0f64);
    for _ in 0..200 {
        let deg = 1 + rng.below(4);
        let l = twisted_group_loop(&mut rng, 16, deg, 0.2);

        let t0 = Instant::now();
        let b = l.birkhoff_split().expect("birkhoff split");
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        let back = b.plus.mul(&b.minus.inv().expect("minus factor inverse"));
        remult_b = remult_b.max(back.sup_diff(&l, CIRCLE));

        let t0 = Instant::now();
        let iw = l.iwasawa_split().expect("iwasawa split");
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        let back = iw.unitary.mul(&iw.plus);
        remult_i = remult_i.max(back.sup_diff(&l, CIRCLE));
        unit_max = unit_max.max(iw.unitary.unitarity_deviation(CIRCLE));
    }
    let pass = remult_b < 1e-9 && remult_i < 1e-9 && unit_max < 1e-9 && slowest < 1.0;
    verdict(
        1,
        "loop factorizations (200 draws, N=16)",
        pass,
        &format!(
            "birkhoff remult {remult_b:.3e}, iwasawa remult {remult_i:.3e}, \
             unitarity {unit_max:.3e} (all < 1e-9), slowest split {slowest:.3}s (< 1s)"
        ),
    );
}

#[test]
fn criterion_02_adjusted_form_is_su2() {
    let mut rng = Rng::new(0xACCE02);
    let mut worst = 0f64;
    for _ in 0..1000 {
        let uz = rng.complex(1.0);
        let d = LaxData {
            u: rng.sym(1.0),
            uz,
            // real metric factor: the zbar derivative is the conjugate
            uzbar: uz.conj(),
            q: rng.complex(2.0),
            h: (10.0 - 9.0 * rng.unit()) * if rng.unit() < 0.5 { -1.0 } else { 1.0 },
        };
        let theta = rng.unit_circle();
        let a = adjusted_mc_dz(&d, theta);
        let b = adjusted_mc_dzbar(&d, theta);
        worst = worst.max((b + a.dagger()).norm());
    }
    verdict(
        2,
        "adjusted form su(2)-valued (1000 draws)",
        worst < 1e-13,
        &format!("max |dzbar + dz^dagger| = {worst:.3e} (< 1e-13)"),
    );
}

fn random_triple(rng: &mut Rng, n: usize) -> SurfaceTriple {
    let grid = Grid::square(0.5, n);
    let u = smooth_field(rng, n, n, 0.8);
    let qre = smooth_field(rng, n, n, 1.5);
    let qim = smooth_field(rng, n, n, 1.5);
    let q = qre.iter().zip(qim.iter()).map(|(a, b)| c(*a, *b)).collect();
    let h = (1.05 + 8.95 * rng.unit()) * if rng.unit() < 0.5 { -1.0 } else { 1.0 };
    SurfaceTriple::new(grid, u, q, h)
}

#[test]
fn criterion_03_deformations_preserve_residuals() {
    let mut rng = Rng::new(0xACCE03);
    let (mut gauss_s, mut codazzi_s, mut gauss_t, mut codazzi_t) = (0f64, 0f64, 0f64, 0f64);
    let mut done = 0;
    while done < 100 {
        let t = random_triple(&mut rng, 17);
        let s = 0.3 + 2.2 * rng.unit();
        let k = deform_factor(t.h, s).unwrap();
        if k.abs() < 1e-3 {
            continue; // near-degenerate deformation, nothing to compare
        }
        done += 1;
        let g0 = t.gauss_residual();
        let c0 = t.codazzi_residual();

        // s-deformation: Gauss field invariant, Codazzi field carries the
        // conformal factor k exactly (Q^s = k Q)
        let d = s_deform(&t, s).unwrap();
        for (a, b) in g0.iter().zip(d.gauss_residual().iter()) {
            gauss_s = gauss_s.max((a - b).abs() / (1.0 + a.abs()));
        }
        for (a, b) in c0.iter().zip(d.codazzi_residual().iter()) {
            codazzi_s = codazzi_s.max((b - k * a).norm() / (1.0 + a.norm()));
        }

        // theta-deformation: Gauss invariant, Codazzi rotates with the
        // Hopf coefficient (Q -> theta^{-2} Q)
        let theta = rng.unit_circle();
        let r = theta_deform(&t, theta);
        let w = theta.powi(-2);
        for (a, b) in g0.iter().zip(r.gauss_residual().iter()) {
            gauss_t = gauss_t.max((a - b).abs() / (1.0 + a.abs()));
        }
        for (a, b) in c0.iter().zip(r.codazzi_residual().iter()) {
            codazzi_t = codazzi_t.max((b - w * a).norm() / (1.0 + a.norm()));
        }
    }
    let pass = gauss_s < 1e-12 && codazzi_s < 1e-12 && gauss_t < 1e-12 && codazzi_t < 1e-12;
    verdict(
        3,
        "deformation residual identities (100 triples)",
        pass,
        &format!(
            "s-deform gauss {gauss_s:.3e}, codazzi {codazzi_s:.3e}; \
             theta-deform gauss {gauss_t:.3e}, codazzi {codazzi_t:.3e} (all < 1e-12)"
        ),
    );
}

#[test]
fn criterion_04_gauge_conjugation_identity() {
    let mut rng = Rng::new(0xACCE04);
    let mut worst = 0f64;
    for _ in 0..100 {
        let d = LaxData {
            u: rng.sym(1.0),
            uz: rng.complex(1.0),
            uzbar: rng.complex(1.0),
            q: rng.complex(2.0),
            h: (1.05 + 8.95 * rng.unit()) * if rng.unit() < 0.5 { -1.0 } else { 1.0 },
        };
        let s = 0.3 + 2.4 * rng.unit();
        let lambda = rng.unit_circle();
        let theta = lambda * lambda;
        let g = gauge(lambda);
        let gi = -g; // gauge^{-1} = -gauge
        let a = gi * lax_dz_untwisted(&d, s, lambda) * g;
        worst = worst.max((a - lax_dz(&d, s, theta)).norm());
        let b = gi * lax_dzbar_untwisted(&d, s, lambda) * g;
        worst = worst.max((b - lax_dzbar(&d, s, theta)).norm());
    }
    verdict(
        4,
        "twisted pair = gauge-conjugated pair (100 draws)",
        worst < 1e-12,
        &format!("max entry deviation {worst:.3e} (< 1e-12)"),
    );
}

#[test]
fn criterion_05_vacuum_reconstruction() {
    let v = vacuum();
    let r = &v.reports[0];
    let rel_stdev = r.h_stdev / r.h_mean.abs();
    let matched = r.branch != HBranch::Neither;
    let pass = r.det_max < 1e-6
        && r.conformal_max < 1e-4
        && rel_stdev < 1e-3
        && matched
        && v.seconds < 60.0;
    verdict(
        5,
        "vacuum run a=sqrt(3), 65x65, N=8",
        pass,
        &format!(
            "|det f - 1| {:.3e} (< 1e-6), conformality {:.3e} (< 1e-4), \
             H = {:.6} +- {:.1e} rel {:.3e} (< 1e-3), matched branch: {} \
             (targets 2 or 1/2, rel tol 1e-2), runtime {:.2}s (< 60s)",
            r.det_max,
            r.conformal_max,
            r.h_mean,
            r.h_stdev,
            rel_stdev,
            decision_name(r.branch),
            v.seconds,
        ),
    );
}

#[test]
fn criterion_06_recovered_gauss_codazzi() {
    let v = vacuum();
    let r = &v.reports[0];
    let pass = r.gauss_sup < 1e-3 && r.codazzi_sup < 1e-3;
    verdict(
        6,
        "recovered triple solves the structure equations",
        pass,
        &format!(
            "gauss residual {:.3e}, codazzi residual {:.3e} (both < 1e-3 at spacing 1/64)",
            r.gauss_sup, r.codazzi_sup
        ),
    );
}

#[test]
fn criterion_07_associate_family() {
    let v = vacuum();
    let base = &v.recovered[0];
    let (mut u_dev, mut q_dev) = (0f64, 0f64);
    for j in 1..8 {
        let rot = &v.recovered[j];
        let spin = v.thetas[j] * v.thetas[j];
        for k in 0..base.grid.len() {
            let (Some(u0), Some(u1), Some(q0), Some(q1)) =
                (&base.u[k], &rot.u[k], &base.q[k], &rot.q[k])
            else {
                continue;
            };
            u_dev = u_dev.max((u0 - u1).abs());
            // Hopf coefficient rotates by theta^{-2} along the family
            q_dev = q_dev.max((q1 * spin - q0).norm());
        }
    }
    let pass = u_dev < 1e-4 && q_dev < 1e-3;
    verdict(
        7,
        "associate family across 8 thetas",
        pass,
        &format!("metric drift {u_dev:.3e} (< 1e-4), Hopf rotation defect {q_dev:.3e} (< 1e-3)"),
    );
}

fn random_coeff(rng: &mut Rng, amp: f64) -> Expr {
    Expr::Add(
        Box::new(Expr::Num(rng.sym(amp))),
        Box::new(Expr::Mul(
            Box::new(Expr::Num(rng.sym(amp))),
            Box::new(Expr::I),
        )),
    )
}

fn random_poly(rng: &mut Rng, max_deg: usize, amp: f64) -> Expr {
    let mut e = random_coeff(rng, amp);
    for k in 1..=rng.below(max_deg + 1) {
        let term = Expr::Mul(
            Box::new(random_coeff(rng, amp)),
            Box::new(Expr::Pow(Box::new(Expr::Z), k as i32, 0)),
        );
        e = Expr::Add(Box::new(e), Box::new(term));
    }
    e
}

#[test]
fn criterion_08_euclidean_potential_identity() {
    let mut rng = Rng::new(0xACCE08);
    let mut worst = 0f64;
    for _ in 0..20 {
        let q = random_poly(&mut rng, 3, 0.8);
        let w = random_poly(&mut rng, 3, 0.5);
        let h = (1.05 + 8.95 * rng.unit()) * if rng.unit() < 0.5 { -1.0 } else { 1.0 };
        let pot = NormalizedPotential::new(q.clone(), w.clone(), weight_for_h(h)).unwrap();
        let m = (h * h - 1.0).sqrt();
        for _ in 0..50 {
            let z = rng.complex(0.8);
            let curved = pot.matrix_at(z).unwrap();
            let flat = euclidean_potential_at(&q, &w, m, z).unwrap();
            worst = worst.max((curved - flat).norm());
        }
    }
    verdict(
        8,
        "flat-space potential identity (20 specs x 50 points)",
        worst < 1e-12,
        &format!("max entry deviation {worst:.3e} (< 1e-12)"),
    );
}

// Independent evaluation oracle for criterion 9: same pole convention as
// the expression evaluator, separate arithmetic path.
fn oracle_eval(e: &Expr, z: Complex64) -> Result<Complex64, &'static str> {
    let fin = |v: Complex64| {
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err("nonfinite")
        }
    };
    match e {
        Expr::Num(v) => Ok(cr(*v)),
        Expr::I => Ok(c(0.0, 1.0)),
        Expr::Pi => Ok(cr(core::f64::consts::PI)),
        Expr::Z => Ok(z),
        Expr::Neg(x) => Ok(-oracle_eval(x, z)?),
        Expr::Add(a, b) => fin(oracle_eval(a, z)? + oracle_eval(b, z)?),
        Expr::Sub(a, b) => fin(oracle_eval(a, z)? - oracle_eval(b, z)?),
        Expr::Mul(a, b) => fin(oracle_eval(a, z)? * oracle_eval(b, z)?),
        Expr::Div(a, b, _) => {
            let num = oracle_eval(a, z)?;
            let den = oracle_eval(b, z)?;
            if den.norm() <= 1e-12 * (1.0 + num.norm()) {
                return Err("pole");
            }
            fin(num / den)
        }
        Expr::Pow(b, k, _) => {
            let base = oracle_eval(b, z)?;
            if *k < 0 && base.norm() <= 1e-12 {
                return Err("pole");
            }
            fin(base.powi(*k))
        }
        Expr::Call(f, x) => {
            let v = oracle_eval(x, z)?;
            fin(match f {
                Func::Exp => v.exp(),
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Sinh => v.sinh(),
                Func::Cosh => v.cosh(),
            })
        }
    }
}

fn random_expr(rng: &mut Rng, depth: usize) -> Expr {
    if depth == 0 {
        return match rng.below(4) {
            0 => Expr::Num((rng.below(2000) as f64 + 1.0) / 100.0),
            1 => Expr::I,
            2 => Expr::Pi,
            _ => Expr::Z,
        };
    }
    let sub = |rng: &mut Rng| Box::new(random_expr(rng, depth - 1));
    match rng.below(8) {
        0 => Expr::Add(sub(rng), sub(rng)),
        1 => Expr::Sub(sub(rng), sub(rng)),
        2 => Expr::Mul(sub(rng), sub(rng)),
        3 => Expr::Div(sub(rng), sub(rng), 0),
        4 => Expr::Neg(sub(rng)),
        5 => Expr::Pow(sub(rng), rng.below(9) as i32 - 4, 0),
        6 => {
            let f = match rng.below(5) {
                0 => Func::Exp,
                1 => Func::Sin,
                2 => Func::Cos,
                3 => Func::Sinh,
                _ => Func::Cosh,
            };
            Expr::Call(f, sub(rng))
        }
        _ => random_expr(rng, depth - 1),
    }
}

#[test]
fn criterion_09_expression_parser() {
    // 1000 round trips: print, re-parse, evaluate against the oracle
    let mut rng = Rng::new(0xACCE09);
    let mut worst = 0f64;
    let mut compared = 0usize;
    for _ in 0..1000 {
        let e = random_expr(&mut rng, 4);
        let text = e.pretty();
        let back = Expr::parse(&text)
            .unwrap_or_else(|err| panic!("re-parse of `{text}` failed: {err}"));
        for _ in 0..3 {
            let z = rng.complex(1.5);
            match (oracle_eval(&e, z), back.eval(z)) {
                (Ok(want), Ok(got)) => {
                    let dev = (want - got).norm() / (1.0 + want.norm());
                    assert!(dev <= 1e-12, "`{text}` deviates by {dev:.3e} at {z}");
                    worst = worst.max(dev);
                    compared += 1;
                }
                (Err("pole"), Err(EvalError::Pole { .. })) => {}
                (Err("nonfinite"), Err(EvalError::NonFinite { .. })) => {}
                // overflow inside a function argument surfaces one level up
                (Err("nonfinite"), Ok(v)) if !v.norm().is_finite() => {}
                (want, got) => panic!("`{text}` at {z}: oracle {want:?} vs parser {got:?}"),
            }
        }
    }

    // every grammar error class reports a byte-accurate position
    let cases: &[(&str, usize, &str)] = &[
        ("2 + @", 4, "unexpected character"),
        ("z @ 2", 2, "unexpected character"),
        (".", 0, "malformed number"),
        ("z +", 3, "expected a value"),
        ("", 0, "expected a value"),
        ("(z + 1", 6, "expected `)`"),
        ("foo(z)", 0, "unknown identifier"),
        ("z^2^3", 3, "chained `^`"),
        ("z^1.5", 2, "plain integer"),
        ("z^z", 2, "integer exponent"),
        ("sin z", 4, "after function name"),
        ("z 2", 2, "trailing input"),
        ("1e", 1, "trailing input"),
    ];
    let mut diag_ok = true;
    for (src, pos, frag) in cases {
        match Expr::parse(src) {
            Err(ParseError { pos: p, msg }) if p == *pos && msg.contains(frag) => {}
            other => {
                diag_ok = false;
                println!("  diagnostic miss for `{src}`: wanted byte {pos} `{frag}`, got {other:?}");
            }
        }
    }

    verdict(
        9,
        "expression parser round trips + diagnostics",
        diag_ok && compared > 1500,
        &format!(
            "{compared} oracle comparisons, worst relative deviation {worst:.3e} (<= 1e-12), \
             {} diagnostic cases positioned",
            cases.len()
        ),
    );
}

#[test]
fn criterion_10_path_independence() {
    let v = vacuum();
    let pd = v
        .field
        .diag
        .path_dependence
        .expect("two-path diagnostics enabled");
    let pass = pd.minus_frame < 1e-6 && pd.g_minus < 1e-6 && pd.g_plus < 1e-6;
    verdict(
        10,
        "two-path transport discrepancies",
        pass,
        &format!(
            "F- {:.3e}, G- {:.3e}, G+ {:.3e} (all < 1e-6); the factored G systems \
             integrate a z-bar-dependent source, so their order-of-sweep disagreement \
             sits at the level the run report warns about",
            pd.minus_frame, pd.g_minus, pd.g_plus
        ),
    );
}
