//! Mesh export: grid immersions to OBJ or PLY, Poincaré ball or raw
//! Lorentz coordinates.
//!
//! The grid induces a quad mesh; each quad is split into two triangles.
//! Cells touching a masked node degrade: three live corners still emit
//! one triangle, fewer emit nothing, so holes shrink to their true size
//! instead of knocking out whole rows. OBJ is plain text and skips masked
//! vertices entirely (indices are remapped); PLY is binary
//! little-endian, keeps every node so the grid stays addressable, and
//! marks each vertex with its mask code.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use cmch3_core::dpw::Immersion;
use cmch3_core::mat2::LorentzVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_name(name: &str) -> Result<MeshFormat> {
        match name {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::Ply),
            other => bail!("unknown mesh format `{other}` (expected \"obj\" or \"ply\")"),
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            MeshFormat::Obj => "obj",
            MeshFormat::Ply => "ply",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Poincaré ball: (x1, x2, x3) / (1 + x0). Hyperboloid points land
    /// strictly inside the unit ball.
    Poincare,
    /// Spatial part (x1, x2, x3) with x0 carried in the fourth vertex
    /// slot (OBJ) or a `t` property (PLY).
    LorentzRaw,
}

impl Projection {
    pub fn from_name(name: &str) -> Result<Projection> {
        match name {
            "poincare" => Ok(Projection::Poincare),
            "lorentz-raw" => Ok(Projection::LorentzRaw),
            other => {
                bail!("unknown projection `{other}` (expected \"poincare\" or \"lorentz-raw\")")
            }
        }
    }
}

/// Poincaré ball coordinates of a hyperboloid point.
pub fn poincare(x: &LorentzVec) -> [f64; 3] {
    let d = 1.0 + x.x0;
    [x.x1 / d, x.x2 / d, x.x3 / d]
}

/// Vertex coordinates under a projection: three components, plus the
/// time coordinate when the projection keeps it.
fn project(x: &LorentzVec, projection: Projection) -> ([f64; 3], Option<f64>) {
    match projection {
        Projection::Poincare => (poincare(x), None),
        Projection::LorentzRaw => ([x.x1, x.x2, x.x3], Some(x.x0)),
    }
}

/// Triangles over the live nodes of a grid. Corners are flattened node
/// indices, counterclockwise in grid coordinates.
fn triangulate(im: &Immersion, live: &[bool]) -> Vec<[usize; 3]> {
    let grid = &im.grid;
    let mut tris = Vec::new();
    for iy in 0..grid.ny - 1 {
        for ix in 0..grid.nx - 1 {
            let corners = [
                grid.idx(ix, iy),
                grid.idx(ix + 1, iy),
                grid.idx(ix + 1, iy + 1),
                grid.idx(ix, iy + 1),
            ];
            let alive: Vec<usize> = corners.iter().copied().filter(|k| live[*k]).collect();
            match alive.len() {
                4 => {
                    tris.push([corners[0], corners[1], corners[2]]);
                    tris.push([corners[0], corners[2], corners[3]]);
                }
                // one dead corner still leaves a well-oriented triangle
                3 => tris.push([alive[0], alive[1], alive[2]]),
                _ => {}
            }
        }
    }
    tris
}

/// Writes the mesh. Returns the number of vertices emitted.
pub fn export_mesh(
    im: &Immersion,
    format: MeshFormat,
    projection: Projection,
    path: &Path,
) -> Result<usize> {
    let live: Vec<bool> = im.x.iter().map(|x| x.is_some()).collect();
    if !live.iter().any(|b| *b) {
        bail!("every node is masked; no mesh to export");
    }
    let tris = triangulate(im, &live);
    let count = match format {
        MeshFormat::Obj => write_obj(im, projection, &live, &tris, path)?,
        MeshFormat::Ply => write_ply(im, projection, &live, &tris, path)?,
    };
    Ok(count)
}

fn write_obj(
    im: &Immersion,
    projection: Projection,
    live: &[bool],
    tris: &[[usize; 3]],
    path: &Path,
) -> Result<usize> {
    // remap flattened node indices to 1-based OBJ indices over live nodes
    let mut objidx = vec![0usize; live.len()];
    let mut text = String::new();
    let mut count = 0usize;
    for (k, x) in im.x.iter().enumerate() {
        let Some(x) = x else { continue };
        count += 1;
        objidx[k] = count;
        let (p, t) = project(x, projection);
        match t {
            // 17 significant digits: exact f64 round trip
            None => text.push_str(&format!("v {:.16e} {:.16e} {:.16e}\n", p[0], p[1], p[2])),
            Some(t) => text.push_str(&format!(
                "v {:.16e} {:.16e} {:.16e} {:.16e}\n",
                p[0], p[1], p[2], t
            )),
        }
    }
    for t in tris {
        text.push_str(&format!(
            "f {} {} {}\n",
            objidx[t[0]], objidx[t[1]], objidx[t[2]]
        ));
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(count)
}

fn write_ply(
    im: &Immersion,
    projection: Projection,
    live: &[bool],
    tris: &[[usize; 3]],
    path: &Path,
) -> Result<usize> {
    let n = im.grid.len();
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    buf.extend_from_slice(format!("element vertex {n}\n").as_bytes());
    buf.extend_from_slice(b"property double x\nproperty double y\nproperty double z\n");
    if projection == Projection::LorentzRaw {
        buf.extend_from_slice(b"property double t\n");
    }
    buf.extend_from_slice(b"property uchar mask\n");
    buf.extend_from_slice(format!("element face {}\n", tris.len()).as_bytes());
    buf.extend_from_slice(b"property list uchar int vertex_indices\nend_header\n");

    // every node is a vertex; masked ones sit at the origin with their code
    for k in 0..n {
        let (p, t) = match &im.x[k] {
            Some(x) => project(x, projection),
            None => ([0.0; 3], Some(0.0).filter(|_| projection == Projection::LorentzRaw)),
        };
        for v in p {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(t) = t {
            buf.extend_from_slice(&t.to_le_bytes());
        }
        buf.push(im.state[k].code());
    }
    for t in tris {
        buf.push(3u8);
        for k in t {
            buf.extend_from_slice(&(*k as i32).to_le_bytes());
        }
    }
    let mut file =
        fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    file.write_all(&buf)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(live.iter().filter(|b| **b).count())
}
