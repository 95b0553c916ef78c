//! The `cmch3` binary: constant-mean-curvature surfaces in hyperbolic
//! 3-space from holomorphic potential data.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmch3::run::{run_build, run_deform, run_export, run_verify, AppError};

#[derive(Parser)]
#[command(
    name = "cmch3",
    version,
    about = "Construct and verify constant-mean-curvature surfaces in hyperbolic 3-space"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full construction from a config file and write meshes,
    /// saved fields, report.json, and run.log.
    Build {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Extra associate-family angle in radians; repeatable.
        #[arg(long = "theta")]
        theta: Vec<f64>,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply the spectral deformation to a saved (u, Q, H) triple and
    /// record the residual comparison.
    Deform {
        /// Saved triple file (JSON).
        input: PathBuf,
        /// Deformation parameter, positive real; 1 is the identity.
        #[arg(long)]
        s: f64,
        /// Associate-family angle in radians; 0 is the identity.
        #[arg(long = "theta", default_value_t = 0.0)]
        theta: f64,
        /// Deformed triple path; defaults next to the input.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rerun the independent verifier on saved fields files.
    Verify {
        /// Saved fields files (JSON); one verify report each.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Config supplying the tolerance budget; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Re-export a saved fields file as a mesh.
    Export {
        /// Saved fields file (JSON).
        input: PathBuf,
        /// Mesh format: obj or ply.
        #[arg(long, default_value = "obj")]
        format: String,
        /// Vertex projection: poincare or lorentz-raw.
        #[arg(long, default_value = "poincare")]
        projection: String,
        /// Mesh path; defaults to the input with the format extension.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.cmd {
        Cmd::Build { config, theta, out } => run_build(&config, &theta, out.as_deref()),
        Cmd::Deform {
            input,
            s,
            theta,
            output,
        } => run_deform(&input, s, theta, output.as_deref()),
        Cmd::Verify { inputs, config } => run_verify(&inputs, config.as_deref()),
        Cmd::Export {
            input,
            format,
            projection,
            output,
        } => run_export(&input, &format, &projection, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
