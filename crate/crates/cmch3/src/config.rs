//! Run configuration: JSON schema, defaults, and validation.
//!
//! A config names a potential (two expression strings and the weight),
//! the evaluation grid, the loop truncation degree, how many associate
//! family samples to emit, the tolerance budget for the report, and where
//! output goes. Every field except the potential has a documented
//! default. Validation failures carry the path of the offending field so
//! the error message points at the config, not at the code.

use std::fmt;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use cmch3_core::expr::Expr;
use cmch3_core::grid::Grid;
use cmch3_core::potential::NormalizedPotential;

/// A config rejection: which field, and why.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    /// Hopf differential coefficient, an expression in `z`.
    #[serde(rename = "Q")]
    pub q: String,
    /// Holomorphic metric part, an expression in `z`; must be finite at 0.
    pub h: String,
    /// Weight parameter; positive and not 1.
    pub a: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub center: [f64; 2],
    pub half_widths: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> GridConfig {
        GridConfig {
            center: [0.0, 0.0],
            half_widths: [0.5, 0.5],
            nx: 65,
            ny: 65,
        }
    }
}

/// Tolerance budget checked by the report writer. Exceeding an entry
/// produces a warning in the report, never a failed run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Hyperboloid membership: sup |det f - 1|.
    pub det_max: f64,
    /// Conformality defect sup |<f_z, f_z>|.
    pub conformal_max: f64,
    /// Constancy of the measured curvature: stdev / |mean|.
    pub h_rel_stdev: f64,
    /// Relative window for matching the measured H against a candidate.
    pub h_match_rel: f64,
    /// Interior sup of the Gauss residual of the recovered triple.
    pub gauss_max: f64,
    /// Interior sup of |d_zbar Q| of the recovered Hopf field.
    pub codazzi_max: f64,
    /// Interior sup of the connection flatness residual per theta.
    pub flatness_max: f64,
    /// Two-path integration disagreement.
    pub path_max: f64,
    /// Unitarity and factorization remultiplication defects.
    pub factorization_max: f64,
}

impl Default for Tolerances {
    fn default() -> Tolerances {
        Tolerances {
            det_max: 1e-6,
            conformal_max: 1e-4,
            h_rel_stdev: 1e-3,
            h_match_rel: 1e-2,
            gauss_max: 1e-3,
            codazzi_max: 1e-3,
            flatness_max: 1e-4,
            path_max: 1e-6,
            factorization_max: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory receiving meshes, field files, report, and log.
    pub dir: String,
    /// Mesh format: "obj" or "ply".
    pub format: String,
    /// Vertex projection: "poincare" or "lorentz-raw".
    pub projection: String,
}

impl Default for OutputConfig {
    fn default() -> OutputConfig {
        OutputConfig {
            dir: "out".to_string(),
            format: "obj".to_string(),
            projection: "poincare".to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// Loop truncation degree N.
    #[serde(default = "default_degree")]
    pub loop_degree: usize,
    /// Associate family: number of equally spaced theta evaluations on the
    /// unit circle, starting at theta = 1.
    #[serde(default = "default_theta_samples")]
    pub theta_samples: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_degree() -> usize {
    16
}

fn default_theta_samples() -> usize {
    1
}

impl RunConfig {
    /// Parses and validates a config file.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::new("(file)", format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError::new("(json)", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let a = self.potential.a;
        if !(a > 0.0) || !a.is_finite() {
            return Err(ConfigError::new("potential.a", "must be a positive real"));
        }
        if a == 1.0 {
            return Err(ConfigError::new(
                "potential.a",
                "weight 1 puts the mean curvature at its pole",
            ));
        }
        Expr::parse(&self.potential.q)
            .map_err(|e| ConfigError::new("potential.Q", e.to_string()))?;
        Expr::parse(&self.potential.h)
            .map_err(|e| ConfigError::new("potential.h", e.to_string()))?;

        if self.grid.nx < 3 || self.grid.ny < 3 {
            return Err(ConfigError::new("grid.nx", "grid needs at least 3 nodes per axis"));
        }
        if !(self.grid.half_widths[0] > 0.0 && self.grid.half_widths[1] > 0.0) {
            return Err(ConfigError::new("grid.half_widths", "must be positive"));
        }
        let grid = self.grid_spec();
        if grid.origin_node().is_none() {
            return Err(ConfigError::new(
                "grid",
                "the origin z = 0 must be a grid node (potentials are normalized there)",
            ));
        }

        if self.loop_degree < 2 || self.loop_degree > 64 {
            return Err(ConfigError::new("loop_degree", "must be between 2 and 64"));
        }
        if self.theta_samples == 0 {
            return Err(ConfigError::new("theta_samples", "must be at least 1"));
        }

        match self.output.format.as_str() {
            "obj" | "ply" => {}
            other => {
                return Err(ConfigError::new(
                    "output.format",
                    format!("unknown format `{other}` (expected \"obj\" or \"ply\")"),
                ))
            }
        }
        match self.output.projection.as_str() {
            "poincare" | "lorentz-raw" => {}
            other => {
                return Err(ConfigError::new(
                    "output.projection",
                    format!("unknown projection `{other}` (expected \"poincare\" or \"lorentz-raw\")"),
                ))
            }
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Grid {
        Grid::new(
            Complex64::new(self.grid.center[0], self.grid.center[1]),
            (self.grid.half_widths[0], self.grid.half_widths[1]),
            self.grid.nx,
            self.grid.ny,
        )
    }

    /// Builds the potential named by the config. Weight problems were
    /// already caught by [`RunConfig::validate`]; expression poles at the
    /// base point surface here.
    pub fn potential_spec(&self) -> Result<NormalizedPotential, ConfigError> {
        let q = Expr::parse(&self.potential.q)
            .map_err(|e| ConfigError::new("potential.Q", e.to_string()))?;
        let h = Expr::parse(&self.potential.h)
            .map_err(|e| ConfigError::new("potential.h", e.to_string()))?;
        NormalizedPotential::new(q, h, self.potential.a)
            .map_err(|e| ConfigError::new("potential", format!("{e}")))
    }

    /// The requested associate-family samples: `theta_samples` equally
    /// spaced points starting at 1, then any extra angles, deduplicated.
    pub fn theta_evals(&self, extra_angles: &[f64]) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::new();
        for j in 0..self.theta_samples {
            let ang = std::f64::consts::TAU * j as f64 / self.theta_samples as f64;
            push_theta(&mut out, Complex64::from_polar(1.0, ang));
        }
        for ang in extra_angles {
            push_theta(&mut out, Complex64::from_polar(1.0, *ang));
        }
        out
    }
}

fn push_theta(list: &mut Vec<Complex64>, theta: Complex64) {
    if !list.iter().any(|t| (t - theta).norm() < 1e-12) {
        list.push(theta);
    }
}
