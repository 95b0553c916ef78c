//! The run report: one JSON document merging pipeline diagnostics with
//! the independent per-theta verification.
//!
//! Both curvature candidates are always written out along with which one
//! the measured surface matched: the weight fixes only the pair
//! `(a^2+1)/(a^2-1)` and its reciprocal, and the report records the
//! empirical decision instead of promising one formula. Tolerance
//! violations become warnings; a run with warnings still exits 0.

use serde::{Deserialize, Serialize};

use cmch3_core::dpw::{FrameField, PipelineDiagnostics};
use cmch3_core::verify::{HBranch, VerifyReport};

use crate::config::{RunConfig, Tolerances};

/// Decision names: the plus candidate carries `a^2 + 1` in the
/// numerator, the minus candidate `a^2 - 1`.
pub fn decision_name(branch: HBranch) -> &'static str {
    match branch {
        HBranch::Target => "plus-candidate",
        HBranch::Reciprocal => "minus-candidate",
        HBranch::Neither => "neither",
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MaskCounts {
    pub pole: usize,
    pub singular_point: usize,
    pub off_big_cell: usize,
    pub blocked: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathDependenceReport {
    pub minus_frame: f64,
    pub g_minus: f64,
    pub g_plus: f64,
}

/// Pipeline-side diagnostics, independent of theta.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub root: [usize; 2],
    pub rerooted: bool,
    pub masked: MaskCounts,
    pub iwasawa_residual_max: f64,
    pub unitarity_max: f64,
    pub integration_error_est: f64,
    pub mc_su2_max: f64,
    pub birkhoff_residual_max: f64,
    /// Defect of the factored-and-recombined route against the directly
    /// integrated frame. Monitored, not assumed small.
    pub recombination_max: f64,
    pub tail_max: f64,
    pub degenerate_f0: usize,
    pub path_dependence: Option<PathDependenceReport>,
}

impl PipelineReport {
    pub fn of(diag: &PipelineDiagnostics) -> PipelineReport {
        PipelineReport {
            root: [diag.root.0, diag.root.1],
            rerooted: diag.rerooted,
            masked: MaskCounts {
                pole: diag.masked_pole,
                singular_point: diag.masked_singular,
                off_big_cell: diag.masked_off_cell,
                blocked: diag.masked_blocked,
            },
            iwasawa_residual_max: diag.split_residual_max,
            unitarity_max: diag.unitarity_max,
            integration_error_est: diag.integration_error_est,
            mc_su2_max: diag.mc_su2_max,
            birkhoff_residual_max: diag.birkhoff_residual_max,
            recombination_max: diag.recombination_max,
            tail_max: diag.tail_max,
            degenerate_f0: diag.degenerate_f0,
            path_dependence: diag.path_dependence.map(|pd| PathDependenceReport {
                minus_frame: pd.minus_frame,
                g_minus: pd.g_minus,
                g_plus: pd.g_plus,
            }),
        }
    }
}

/// Verification of the immersion at one theta sample.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaReport {
    pub theta: [f64; 2],
    /// Angle in radians, also the tag in output file names.
    pub angle: f64,
    pub mesh: String,
    pub fields: String,
    pub ok_nodes: usize,
    pub verified_nodes: usize,
    pub interior_nodes: usize,
    pub det_max: f64,
    pub hermitian_max: f64,
    pub upper_sheet: bool,
    pub conformal_max: f64,
    pub h_mean: f64,
    pub h_stdev: f64,
    pub h_im_max: f64,
    pub decision: String,
    pub codazzi_sup: f64,
    pub gauss_sup: f64,
    /// Interior sup of the connection flatness residual at this theta.
    pub flatness_max: f64,
}

impl ThetaReport {
    pub fn of(
        theta: num_complex::Complex64,
        rep: &VerifyReport,
        flatness_max: f64,
        mesh: String,
        fields: String,
    ) -> ThetaReport {
        ThetaReport {
            theta: [theta.re, theta.im],
            angle: crate::run::theta_angle(theta),
            mesh,
            fields,
            ok_nodes: rep.ok_nodes,
            verified_nodes: rep.verified_nodes,
            interior_nodes: rep.interior_nodes,
            det_max: rep.det_max,
            hermitian_max: rep.hermitian_max,
            upper_sheet: rep.upper_sheet,
            conformal_max: rep.conformal_max,
            h_mean: rep.h_mean,
            h_stdev: rep.h_stdev,
            h_im_max: rep.h_im_max,
            decision: decision_name(rep.branch).to_string(),
            codazzi_sup: rep.codazzi_sup,
            gauss_sup: rep.gauss_sup,
            flatness_max,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HCandidates {
    pub plus: f64,
    pub minus: f64,
}

/// The full run report, written as `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub potential: crate::config::PotentialConfig,
    pub grid: crate::config::GridConfig,
    pub loop_degree: usize,
    pub h_candidates: HCandidates,
    /// Decision at theta = 1, the canonical member of the family.
    pub decision: String,
    pub pipeline: PipelineReport,
    pub per_theta: Vec<ThetaReport>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

/// Notes worth surfacing: where poles were masked, whether the base
/// point moved.
pub fn collect_notes(field: &FrameField) -> Vec<String> {
    use cmch3_core::dpw::NodeState;
    let mut notes = Vec::new();
    let mut pole_examples = Vec::new();
    let mut pole_count = 0usize;
    for (ix, iy, z) in field.grid.iter() {
        if let NodeState::Pole { pos } = field.state[field.grid.idx(ix, iy)] {
            pole_count += 1;
            if pole_examples.len() < 3 {
                pole_examples.push(format!("z = {:.6} + {:.6}i (expression byte {pos})", z.re, z.im));
            }
        }
    }
    if pole_count > 0 {
        notes.push(format!(
            "potential pole masked at {} node(s): {}",
            pole_count,
            pole_examples.join("; ")
        ));
    }
    if field.diag.rerooted {
        notes.push(format!(
            "origin masked; integration rerooted at grid node ({}, {})",
            field.diag.root.0, field.diag.root.1
        ));
    }
    if field.diag.degenerate_f0 > 0 {
        notes.push(format!(
            "factored dressing sources dropped at {} node(s) (near-singular unitary constant term)",
            field.diag.degenerate_f0
        ));
    }
    notes
}

fn check(w: &mut Vec<String>, name: &str, measured: f64, allowed: f64) {
    if measured > allowed {
        w.push(format!("{name} {measured:.3e} exceeds {allowed:.1e}"));
    }
}

/// One warning line per exceeded tolerance, empty when the run is clean.
pub fn collect_warnings(
    pipeline: &PipelineReport,
    per_theta: &[ThetaReport],
    tol: &Tolerances,
) -> Vec<String> {
    let mut w = Vec::new();
    check(
        &mut w,
        "iwasawa remultiplication",
        pipeline.iwasawa_residual_max,
        tol.factorization_max,
    );
    check(&mut w, "unitarity", pipeline.unitarity_max, tol.factorization_max);
    check(
        &mut w,
        "birkhoff remultiplication",
        pipeline.birkhoff_residual_max,
        tol.factorization_max,
    );
    if let Some(pd) = &pipeline.path_dependence {
        check(&mut w, "path dependence (holomorphic frame)", pd.minus_frame, tol.path_max);
        check(&mut w, "path dependence (g-minus)", pd.g_minus, tol.path_max);
        check(&mut w, "path dependence (g-plus)", pd.g_plus, tol.path_max);
    }
    for t in per_theta {
        let tag = format!("theta {:.4}", t.angle);
        check(&mut w, &format!("{tag}: det"), t.det_max, tol.det_max);
        check(&mut w, &format!("{tag}: conformality"), t.conformal_max, tol.conformal_max);
        if t.h_mean != 0.0 {
            check(
                &mut w,
                &format!("{tag}: H relative stdev"),
                t.h_stdev / t.h_mean.abs(),
                tol.h_rel_stdev,
            );
        }
        check(&mut w, &format!("{tag}: gauss"), t.gauss_sup, tol.gauss_max);
        check(&mut w, &format!("{tag}: codazzi"), t.codazzi_sup, tol.codazzi_max);
        check(&mut w, &format!("{tag}: flatness"), t.flatness_max, tol.flatness_max);
        if t.decision == "neither" {
            w.push(format!(
                "{tag}: measured H {:.6} matches neither candidate",
                t.h_mean
            ));
        }
        if !t.upper_sheet {
            w.push(format!("{tag}: some position matrices left the upper sheet"));
        }
    }
    w
}

fn budget_line(s: &mut String, name: &str, measured: f64, allowed: f64) {
    let verdict = if measured <= allowed { "ok" } else { "EXCEEDED" };
    s.push_str(&format!(
        "  {name:<42} {measured:>12.3e} / {allowed:>8.1e}  {verdict}\n"
    ));
}

/// The plain-text run log: configuration echo, pipeline summary, and the
/// tolerance budget table. Deterministic for a fixed config.
pub fn run_log(cfg: &RunConfig, report: &RunReport) -> String {
    let mut s = String::new();
    let p = &report.pipeline;
    s.push_str("cmch3 run log\n");
    s.push_str(&format!(
        "potential: Q = \"{}\", h = \"{}\", a = {:.17}\n",
        cfg.potential.q, cfg.potential.h, cfg.potential.a
    ));
    s.push_str(&format!(
        "grid: center ({}, {}), half widths ({}, {}), {} x {} nodes\n",
        cfg.grid.center[0],
        cfg.grid.center[1],
        cfg.grid.half_widths[0],
        cfg.grid.half_widths[1],
        cfg.grid.nx,
        cfg.grid.ny
    ));
    s.push_str(&format!(
        "loop degree {}, theta evaluations {}\n",
        report.loop_degree,
        report.per_theta.len()
    ));
    s.push_str(&format!(
        "curvature candidates: plus {:.12}, minus {:.12}; decision {}\n",
        report.h_candidates.plus, report.h_candidates.minus, report.decision
    ));
    s.push_str(&format!(
        "pipeline: root ({}, {}), rerooted {}, masked pole {} / singular {} / off-cell {} / blocked {}\n\n",
        p.root[0],
        p.root[1],
        p.rerooted,
        p.masked.pole,
        p.masked.singular_point,
        p.masked.off_big_cell,
        p.masked.blocked
    ));

    s.push_str("tolerance budget (measured / allowed)\n");
    let tol = &cfg.tolerances;
    budget_line(
        &mut s,
        "iwasawa remultiplication",
        p.iwasawa_residual_max,
        tol.factorization_max,
    );
    budget_line(&mut s, "unitarity", p.unitarity_max, tol.factorization_max);
    budget_line(
        &mut s,
        "birkhoff remultiplication",
        p.birkhoff_residual_max,
        tol.factorization_max,
    );
    budget_line(
        &mut s,
        "integration error estimate",
        p.integration_error_est,
        tol.path_max,
    );
    if let Some(pd) = &p.path_dependence {
        budget_line(&mut s, "path dependence: holomorphic frame", pd.minus_frame, tol.path_max);
        budget_line(&mut s, "path dependence: g-minus", pd.g_minus, tol.path_max);
        budget_line(&mut s, "path dependence: g-plus", pd.g_plus, tol.path_max);
    }
    for t in &report.per_theta {
        s.push('\n');
        s.push_str(&format!(
            "theta {:.4} ({} ok, {} verified, {} interior) decision {}\n",
            t.angle, t.ok_nodes, t.verified_nodes, t.interior_nodes, t.decision
        ));
        budget_line(&mut s, "det defect", t.det_max, tol.det_max);
        budget_line(&mut s, "hermitian defect", t.hermitian_max, tol.det_max);
        budget_line(&mut s, "conformality", t.conformal_max, tol.conformal_max);
        if t.h_mean != 0.0 {
            budget_line(&mut s, "H relative stdev", t.h_stdev / t.h_mean.abs(), tol.h_rel_stdev);
        }
        budget_line(&mut s, "gauss residual", t.gauss_sup, tol.gauss_max);
        budget_line(&mut s, "codazzi residual", t.codazzi_sup, tol.codazzi_max);
        budget_line(&mut s, "flatness residual", t.flatness_max, tol.flatness_max);
    }
    s.push('\n');
    if report.warnings.is_empty() {
        s.push_str("no warnings\n");
    } else {
        for w in &report.warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
    }
    for n in &report.notes {
        s.push_str(&format!("note: {n}\n"));
    }
    s
}
