//! Rectangular evaluation grids in the complex coordinate plane.
//!
//! A grid is a closed axis-aligned rectangle sampled at `nx` by `ny` nodes,
//! addressed either by integer pair `(ix, iy)` or by the flattened row-major
//! index `iy * nx + ix`. Fields over a grid are plain slices in that order.

use num_complex::Complex64;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub center: Complex64,
    /// Half extents along the real and imaginary axes.
    pub half_width: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(center: Complex64, half_width: (f64, f64), nx: usize, ny: usize) -> Grid {
        assert!(nx >= 2 && ny >= 2, "grid needs at least 2 nodes per axis");
        assert!(
            half_width.0 > 0.0 && half_width.1 > 0.0,
            "grid half widths must be positive"
        );
        Grid {
            center,
            half_width,
            nx,
            ny,
        }
    }

    /// Square grid centered at the origin with `n` nodes per axis.
    pub fn square(half_width: f64, n: usize) -> Grid {
        Grid::new(Complex64::new(0.0, 0.0), (half_width, half_width), n, n)
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width.0 / (self.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 * self.half_width.1 / (self.ny - 1) as f64
    }

    pub fn z(&self, ix: usize, iy: usize) -> Complex64 {
        debug_assert!(ix < self.nx && iy < self.ny);
        Complex64::new(
            self.center.re - self.half_width.0 + ix as f64 * self.dx(),
            self.center.im - self.half_width.1 + iy as f64 * self.dy(),
        )
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All nodes with their coordinates, row-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.ny).flat_map(move |iy| (0..self.nx).map(move |ix| (ix, iy, self.z(ix, iy))))
    }

    /// Node whose coordinate equals `z` up to a small fraction of the
    /// spacing, if any.
    pub fn node_at(&self, z: Complex64) -> Option<(usize, usize)> {
        let fx = (z.re - (self.center.re - self.half_width.0)) / self.dx();
        let fy = (z.im - (self.center.im - self.half_width.1)) / self.dy();
        let ix = fx.round();
        let iy = fy.round();
        let tol = 1e-9;
        if (fx - ix).abs() > tol || (fy - iy).abs() > tol {
            return None;
        }
        if ix < 0.0 || iy < 0.0 || ix >= self.nx as f64 || iy >= self.ny as f64 {
            return None;
        }
        Some((ix as usize, iy as usize))
    }

    /// The node sitting exactly at z = 0, when the grid has one. Potentials
    /// are normalized at the origin, so pipelines insist on it.
    pub fn origin_node(&self) -> Option<(usize, usize)> {
        self.node_at(Complex64::new(0.0, 0.0))
    }

    /// Axis-aligned neighbor nodes.
    pub fn neighbors(&self, ix: usize, iy: usize) -> impl Iterator<Item = (usize, usize)> {
        let nx = self.nx;
        let ny = self.ny;
        let mut out = [(0usize, 0usize); 4];
        let mut k = 0;
        if ix > 0 {
            out[k] = (ix - 1, iy);
            k += 1;
        }
        if ix + 1 < nx {
            out[k] = (ix + 1, iy);
            k += 1;
        }
        if iy > 0 {
            out[k] = (ix, iy - 1);
            k += 1;
        }
        if iy + 1 < ny {
            out[k] = (ix, iy + 1);
            k += 1;
        }
        out.into_iter().take(k)
    }

    /// Same rectangle at doubled resolution (shared nodes at even indices).
    pub fn refined(&self) -> Grid {
        Grid {
            center: self.center,
            half_width: self.half_width,
            nx: 2 * self.nx - 1,
            ny: 2 * self.ny - 1,
        }
    }
}
