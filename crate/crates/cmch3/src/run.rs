//! Command orchestration: build, deform, verify, export.
//!
//! Exit codes: 0 for a completed run (warnings included), 2 for config
//! or input problems, 3 for a degenerate run (the pipeline produced no
//! usable nodes). `build` writes one mesh and one fields file per theta
//! sample, then `report.json` and `run.log`; `verify` and `export` rerun
//! on saved fields files without touching the pipeline; `deform` maps a
//! saved `(u, Q, H)` triple through the spectral deformation and records
//! the residual comparison that certifies metric invariance.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use cmch3_core::dpw::{immerse, run_pipeline, PipelineError, PipelineParams};
use cmch3_core::geometry::{s_deform, theta_deform, SurfaceTriple};
use cmch3_core::mat2::Mat2C;
use cmch3_core::verify;

use crate::config::{ConfigError, RunConfig, Tolerances};
use crate::export::{export_mesh, MeshFormat, Projection};
use crate::fields::{FieldsFile, GridData, TripleFile};
use crate::report::{
    collect_notes, collect_warnings, decision_name, run_log, HCandidates, PipelineReport,
    RunReport, ThetaReport,
};

/// Failure modes with their process exit codes.
#[derive(Debug)]
pub enum AppError {
    /// Bad config or bad input file: exit 2.
    Config(String),
    /// The pipeline produced no usable surface: exit 3.
    Degenerate(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Degenerate(_) => 3,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "{m}"),
            AppError::Degenerate(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> AppError {
        AppError::Config(e.to_string())
    }
}

impl From<anyhow::Error> for AppError {
    fn from(e: anyhow::Error) -> AppError {
        AppError::Config(format!("{e:#}"))
    }
}

/// Angle of a unit-circle parameter, normalized to [0, 2pi).
pub fn theta_angle(theta: Complex64) -> f64 {
    let a = theta.arg();
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}

fn angle_tag(theta: Complex64) -> String {
    format!("{:.6}", theta_angle(theta))
}

/// Connection flatness at one theta: the weighted connection loops
/// evaluated there must satisfy the zero-curvature equation.
fn flatness_at(field: &cmch3_core::dpw::FrameField, theta: Complex64) -> f64 {
    let a_field: Vec<Option<Mat2C>> = field
        .wz
        .iter()
        .map(|w| w.as_ref().map(|l| l.eval(theta)))
        .collect();
    let b_field: Vec<Option<Mat2C>> = field
        .wzb
        .iter()
        .map(|w| w.as_ref().map(|l| l.eval(theta)))
        .collect();
    verify::flatness_residual(&field.grid, &a_field, &b_field)
}

/// Full build: pipeline, per-theta verification, meshes, fields,
/// report.json, run.log.
pub fn run_build(
    config_path: &Path,
    extra_thetas: &[f64],
    out_override: Option<&Path>,
) -> Result<(), AppError> {
    let cfg = RunConfig::load(config_path)?;
    let pot = cfg.potential_spec()?;
    let grid = cfg.grid_spec();
    let params = PipelineParams::with_degree(cfg.loop_degree);

    let field = run_pipeline(&pot, grid, &params).map_err(|e| match e {
        PipelineError::NoBasePoint => AppError::Config(e.to_string()),
        PipelineError::NoUsableRoot | PipelineError::Degenerate => {
            AppError::Degenerate(e.to_string())
        }
    })?;

    let out_dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let format = MeshFormat::from_name(&cfg.output.format)?;
    let projection = Projection::from_name(&cfg.output.projection)?;

    let mut per_theta = Vec::new();
    for theta in cfg.theta_evals(extra_thetas) {
        let im = immerse(&field, theta);
        let rep = verify::report(&im, pot.target_h(), cfg.tolerances.h_match_rel);
        let flatness = flatness_at(&field, theta);

        let tag = angle_tag(theta);
        let mesh_name = format!("surface_{tag}.{}", format.extension());
        let fields_name = format!("fields_{tag}.json");
        export_mesh(&im, format, projection, &out_dir.join(&mesh_name))
            .map_err(|e| AppError::Degenerate(format!("{e:#}")))?;
        FieldsFile::of(&im, pot.a).save(&out_dir.join(&fields_name))?;

        per_theta.push(ThetaReport::of(theta, &rep, flatness, mesh_name, fields_name));
    }

    let pipeline = PipelineReport::of(&field.diag);
    let warnings = collect_warnings(&pipeline, &per_theta, &cfg.tolerances);
    let notes = collect_notes(&field);
    let report = RunReport {
        potential: cfg.potential.clone(),
        grid: cfg.grid.clone(),
        loop_degree: cfg.loop_degree,
        h_candidates: HCandidates {
            plus: pot.target_h(),
            minus: pot.target_h_reciprocal(),
        },
        decision: per_theta[0].decision.clone(),
        pipeline,
        per_theta,
        warnings,
        notes,
    };

    let json = serde_json::to_string_pretty(&report).context("serializing report")?;
    fs::write(out_dir.join("report.json"), json).context("writing report.json")?;
    fs::write(out_dir.join("run.log"), run_log(&cfg, &report)).context("writing run.log")?;

    for t in &report.per_theta {
        println!(
            "theta {:.4}: H = {:.6} +- {:.2e}, decision {}, {} -> {}",
            t.angle, t.h_mean, t.h_stdev, t.decision, t.fields, t.mesh
        );
    }
    if !report.warnings.is_empty() {
        println!("{} warning(s); see run.log", report.warnings.len());
    }
    Ok(())
}

/// Verification of one saved fields file, written alongside the run
/// report schema's per-theta entries.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SavedVerifyReport {
    pub source: String,
    pub theta: [f64; 2],
    pub weight_a: f64,
    pub h_candidates: HCandidates,
    pub decision: String,
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
    pub codazzi_sup: f64,
    pub gauss_sup: f64,
}

/// Reruns the independent verifier on saved fields files.
pub fn run_verify(inputs: &[PathBuf], config: Option<&Path>) -> Result<(), AppError> {
    let tol = match config {
        Some(p) => RunConfig::load(p)?.tolerances,
        None => Tolerances::default(),
    };
    for input in inputs {
        let file = FieldsFile::load(input)?;
        let im = file.immersion()?;
        let h_plus = cmch3_core::geometry::h_of_a(file.weight_a);
        let rep = verify::report(&im, h_plus, tol.h_match_rel);
        let out = SavedVerifyReport {
            source: input.display().to_string(),
            theta: file.theta,
            weight_a: file.weight_a,
            h_candidates: HCandidates {
                plus: h_plus,
                minus: 1.0 / h_plus,
            },
            decision: decision_name(rep.branch).to_string(),
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
            codazzi_sup: rep.codazzi_sup,
            gauss_sup: rep.gauss_sup,
        };
        let out_path = verify_output_path(input);
        let json = serde_json::to_string_pretty(&out).context("serializing verify report")?;
        fs::write(&out_path, json)
            .with_context(|| format!("writing {}", out_path.display()))?;
        println!(
            "{}: H = {:.6} +- {:.2e}, decision {}, det {:.2e} -> {}",
            input.display(),
            out.h_mean,
            out.h_stdev,
            out.decision,
            out.det_max,
            out_path.display()
        );
    }
    Ok(())
}

fn verify_output_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("fields");
    input.with_file_name(format!("verify_{stem}.json"))
}

/// Residual comparison of a triple and its deformation; the deformation
/// leaves both residual fields pointwise unchanged.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeformResiduals {
    pub s: f64,
    pub theta_angle: f64,
    pub h_original: f64,
    pub h_deformed: f64,
    pub gauss_original: Vec<f64>,
    pub gauss_deformed: Vec<f64>,
    /// Pointwise difference of the Gauss residual fields.
    pub gauss_difference: Vec<f64>,
    pub codazzi_original: Vec<[f64; 2]>,
    pub codazzi_deformed: Vec<[f64; 2]>,
    pub codazzi_difference: Vec<[f64; 2]>,
    pub gauss_difference_sup: f64,
    pub codazzi_difference_sup: f64,
}

fn residual_comparison(
    original: &SurfaceTriple,
    deformed: &SurfaceTriple,
    s: f64,
    theta_ang: f64,
) -> DeformResiduals {
    let g0 = original.gauss_residual();
    let g1 = deformed.gauss_residual();
    let c0 = original.codazzi_residual();
    let c1 = deformed.codazzi_residual();
    let gd: Vec<f64> = g0.iter().zip(&g1).map(|(a, b)| b - a).collect();
    let cd: Vec<Complex64> = c0.iter().zip(&c1).map(|(a, b)| b - a).collect();
    DeformResiduals {
        s,
        theta_angle: theta_ang,
        h_original: original.h,
        h_deformed: deformed.h,
        gauss_difference_sup: gd.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        codazzi_difference_sup: cd.iter().fold(0.0f64, |m, v| m.max(v.norm())),
        gauss_original: g0,
        gauss_deformed: g1,
        gauss_difference: gd,
        codazzi_original: c0.iter().map(|v| [v.re, v.im]).collect(),
        codazzi_deformed: c1.iter().map(|v| [v.re, v.im]).collect(),
        codazzi_difference: cd.iter().map(|v| [v.re, v.im]).collect(),
    }
}

/// Applies the spectral deformation to a saved triple. `s = 1` with
/// `theta = 1` copies the input byte for byte.
pub fn run_deform(
    input: &Path,
    s: f64,
    theta_ang: f64,
    output: Option<&Path>,
) -> Result<(), AppError> {
    let out_path = output.map(Path::to_path_buf).unwrap_or_else(|| {
        let stem = input.file_stem().and_then(|v| v.to_str()).unwrap_or("triple");
        input.with_file_name(format!("{stem}_deformed.json"))
    });
    let residual_path = {
        let stem = out_path
            .file_stem()
            .and_then(|v| v.to_str())
            .unwrap_or("triple");
        out_path.with_file_name(format!("{stem}_residuals.json"))
    };

    let file = TripleFile::load(input)?;
    let original = file.triple()?;

    let identity = s == 1.0 && theta_ang == 0.0;
    let deformed = if identity {
        // byte-identical passthrough, checked by copying the raw input
        let bytes = fs::read(input)
            .with_context(|| format!("reading {}", input.display()))?;
        fs::write(&out_path, bytes)
            .with_context(|| format!("writing {}", out_path.display()))?;
        original.clone()
    } else {
        let stepped = s_deform(&original, s)
            .map_err(|e| AppError::Config(format!("deformation failed: {e}")))?;
        let theta = Complex64::from_polar(1.0, theta_ang);
        let rotated = theta_deform(&stepped, theta);
        TripleFile::of(&rotated).save(&out_path)?;
        rotated
    };

    let residuals = residual_comparison(&original, &deformed, s, theta_ang);
    let json = serde_json::to_string(&residuals).context("serializing residuals")?;
    fs::write(&residual_path, json)
        .with_context(|| format!("writing {}", residual_path.display()))?;
    println!(
        "deformed H {:.6} -> {:.6}; residual difference sup {:.3e} (gauss), {:.3e} (codazzi)",
        residuals.h_original,
        residuals.h_deformed,
        residuals.gauss_difference_sup,
        residuals.codazzi_difference_sup
    );
    Ok(())
}

/// Re-exports a saved fields file as a mesh.
pub fn run_export(
    input: &Path,
    format_name: &str,
    projection_name: &str,
    output: Option<&Path>,
) -> Result<(), AppError> {
    let format = MeshFormat::from_name(format_name)?;
    let projection = Projection::from_name(projection_name)?;
    let file = FieldsFile::load(input)?;
    let im = file.immersion()?;
    let out_path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| input.with_extension(format.extension()));
    let count = export_mesh(&im, format, projection, &out_path)
        .map_err(|e| AppError::Degenerate(format!("{e:#}")))?;
    println!("{} vertices -> {}", count, out_path.display());
    Ok(())
}

/// Builds a triple file from a grid and constant data; the quickest way
/// to seed `deform`.
pub fn constant_triple(grid_data: GridData, u: f64, q: Complex64, h: f64) -> anyhow::Result<TripleFile> {
    let grid = grid_data.grid()?;
    let t = SurfaceTriple::new(
        grid,
        vec![u; grid.len()],
        vec![q; grid.len()],
        h,
    );
    Ok(TripleFile::of(&t))
}
