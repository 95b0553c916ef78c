//! On-disk field files: saved immersions and saved surface triples.
//!
//! An immersion file carries everything the independent verifier and the
//! mesh exporter need (grid, theta, weight, mask codes, position and
//! normal matrices), so `verify` and `export` rerun on saved data without
//! touching the pipeline. A triple file carries gridded `(u, Q, H)` for
//! the deformation command. Complex numbers serialize as `[re, im]`
//! pairs; matrices as four such pairs in row-major order; masked nodes as
//! `null`.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use cmch3_core::dpw::Immersion;
use cmch3_core::geometry::SurfaceTriple;
use cmch3_core::grid::Grid;
use cmch3_core::mat2::{c, from_hermitian, Mat2C, HERMITIAN_TOL};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GridData {
    pub center: [f64; 2],
    pub half_widths: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl GridData {
    pub fn of(grid: &Grid) -> GridData {
        GridData {
            center: [grid.center.re, grid.center.im],
            half_widths: [grid.half_width.0, grid.half_width.1],
            nx: grid.nx,
            ny: grid.ny,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        if self.nx < 2 || self.ny < 2 {
            bail!("field file grid is degenerate: {} x {}", self.nx, self.ny);
        }
        if !(self.half_widths[0] > 0.0 && self.half_widths[1] > 0.0) {
            bail!("field file grid has nonpositive half widths");
        }
        Ok(Grid::new(
            Complex64::new(self.center[0], self.center[1]),
            (self.half_widths[0], self.half_widths[1]),
            self.nx,
            self.ny,
        ))
    }
}

type PackedMat = [[f64; 2]; 4];

fn pack(m: &Mat2C) -> PackedMat {
    [
        [m.m[0][0].re, m.m[0][0].im],
        [m.m[0][1].re, m.m[0][1].im],
        [m.m[1][0].re, m.m[1][0].im],
        [m.m[1][1].re, m.m[1][1].im],
    ]
}

fn unpack(p: &PackedMat) -> Mat2C {
    Mat2C::new(
        c(p[0][0], p[0][1]),
        c(p[1][0], p[1][1]),
        c(p[2][0], p[2][1]),
        c(p[3][0], p[3][1]),
    )
}

/// A saved immersion at one associate-family parameter.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldsFile {
    pub grid: GridData,
    /// Associate-family parameter, unit modulus.
    pub theta: [f64; 2],
    /// Weight of the potential that produced the run; fixes the two
    /// curvature candidates.
    pub weight_a: f64,
    /// Node state codes: 0 usable, 1 pole, 2 singular point, 3 off big
    /// cell, 4 blocked.
    pub mask: Vec<u8>,
    /// Position matrices `f`, `null` where masked.
    pub f: Vec<Option<PackedMat>>,
    /// Normal matrices `N`, `null` where masked.
    pub normal: Vec<Option<PackedMat>>,
}

impl FieldsFile {
    pub fn of(im: &Immersion, weight_a: f64) -> FieldsFile {
        FieldsFile {
            grid: GridData::of(&im.grid),
            theta: [im.theta.re, im.theta.im],
            weight_a,
            mask: im.state.iter().map(|s| s.code()).collect(),
            f: im.f.iter().map(|m| m.as_ref().map(pack)).collect(),
            normal: im.normal.iter().map(|m| m.as_ref().map(pack)).collect(),
        }
    }

    /// Reconstructs the immersion for the verifier and exporter. Mask
    /// codes other than 0 come back as `Blocked`; the original reasons
    /// live in the run report, not here.
    pub fn immersion(&self) -> Result<Immersion> {
        use cmch3_core::dpw::NodeState;
        let grid = self.grid.grid()?;
        let n = grid.len();
        if self.mask.len() != n || self.f.len() != n || self.normal.len() != n {
            bail!(
                "field file arrays do not match the grid: {} nodes, {} mask, {} f, {} normal",
                n,
                self.mask.len(),
                self.f.len(),
                self.normal.len()
            );
        }
        let f: Vec<Option<Mat2C>> = self.f.iter().map(|p| p.as_ref().map(unpack)).collect();
        let normal: Vec<Option<Mat2C>> =
            self.normal.iter().map(|p| p.as_ref().map(unpack)).collect();
        let mut hermitian_max = 0.0f64;
        let mut x = Vec::with_capacity(n);
        for fk in &f {
            match fk {
                Some(m) => {
                    hermitian_max = hermitian_max.max(m.hermitian_deviation());
                    x.push(from_hermitian(m, HERMITIAN_TOL).ok());
                }
                None => x.push(None),
            }
        }
        let state = self
            .mask
            .iter()
            .zip(f.iter())
            .map(|(code, fk)| {
                if *code == 0 && fk.is_some() {
                    NodeState::Ok
                } else {
                    NodeState::Blocked
                }
            })
            .collect();
        Ok(Immersion {
            grid,
            theta: c(self.theta[0], self.theta[1]),
            state,
            f,
            normal,
            x,
            hermitian_max,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FieldsFile> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: FieldsFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing field file {}", path.display()))?;
        Ok(file)
    }
}

/// A saved `(u, Q, H)` triple for the deformation command.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TripleFile {
    pub grid: GridData,
    /// Constant mean curvature of the triple.
    pub h: f64,
    pub u: Vec<f64>,
    pub q: Vec<[f64; 2]>,
}

impl TripleFile {
    pub fn of(t: &SurfaceTriple) -> TripleFile {
        TripleFile {
            grid: GridData::of(&t.grid),
            h: t.h,
            u: t.u.clone(),
            q: t.q.iter().map(|v| [v.re, v.im]).collect(),
        }
    }

    pub fn triple(&self) -> Result<SurfaceTriple> {
        let grid = self.grid.grid()?;
        if self.u.len() != grid.len() || self.q.len() != grid.len() {
            bail!(
                "triple file arrays do not match the grid: {} nodes, {} u, {} q",
                grid.len(),
                self.u.len(),
                self.q.len()
            );
        }
        Ok(SurfaceTriple::new(
            grid,
            self.u.clone(),
            self.q.iter().map(|p| c(p[0], p[1])).collect(),
            self.h,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TripleFile> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file: TripleFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing triple file {}", path.display()))?;
        Ok(file)
    }
}
