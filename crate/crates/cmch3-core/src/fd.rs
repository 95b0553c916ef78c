//! Finite-difference stencils on rectangular grids.
//!
//! Fields live in row-major slices (`iy * nx + ix`, matching
//! [`crate::grid::Grid`]) with values in any [`Linear`] type: real scalars,
//! complex scalars, or 2x2 complex matrices. First derivatives come in a
//! fourth-order flavor (five-point, with one-sided variants two nodes deep
//! at each edge) and a second-order flavor; pure second derivatives are
//! second order. Exposing the stencil offset patterns lets callers decide
//! whether a node has a fully valid neighborhood before differentiating.
//!
//! Wirtinger combinations use the convention
//! `f_z = (f_x - i f_y) / 2`, `f_zbar = (f_x + i f_y) / 2`, so that
//! `f_zzbar = Laplacian(f) / 4`.

use num_complex::Complex64;

use crate::mat2::Mat2C;

/// Value types that form a real vector space.
pub trait Linear: Copy {
    fn lin_zero() -> Self;
    /// `self + w * x`
    fn lin_axpy(self, w: f64, x: Self) -> Self;
}

/// Vector spaces that also carry multiplication by the imaginary unit.
pub trait ComplexLinear: Linear {
    fn lin_i(self) -> Self;
}

impl Linear for f64 {
    fn lin_zero() -> Self {
        0.0
    }
    fn lin_axpy(self, w: f64, x: Self) -> Self {
        self + w * x
    }
}

impl Linear for Complex64 {
    fn lin_zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn lin_axpy(self, w: f64, x: Self) -> Self {
        self + x * w
    }
}

impl ComplexLinear for Complex64 {
    fn lin_i(self) -> Self {
        Complex64::new(-self.im, self.re)
    }
}

impl Linear for Mat2C {
    fn lin_zero() -> Self {
        Mat2C::zero()
    }
    fn lin_axpy(self, w: f64, x: Self) -> Self {
        self + x.scale_re(w)
    }
}

impl ComplexLinear for Mat2C {
    fn lin_i(self) -> Self {
        self.scale(Complex64::new(0.0, 1.0))
    }
}

/// Fourth-order first-derivative stencil (offsets, weights) for position
/// `i` on an axis of `n` nodes, unit spacing. Falls back to second order
/// (zero-padded) when the axis is too short for five points.
pub fn d1_stencil4(i: usize, n: usize) -> ([i32; 5], [f64; 5]) {
    if n < 5 {
        let (o, w) = d1_stencil2(i, n);
        return ([o[0], o[1], o[2], 0, 0], [w[0], w[1], w[2], 0.0, 0.0]);
    }
    let c = 1.0 / 12.0;
    if i == 0 {
        ([0, 1, 2, 3, 4], [-25.0 * c, 48.0 * c, -36.0 * c, 16.0 * c, -3.0 * c])
    } else if i == 1 {
        ([-1, 0, 1, 2, 3], [-3.0 * c, -10.0 * c, 18.0 * c, -6.0 * c, 1.0 * c])
    } else if i == n - 1 {
        ([-4, -3, -2, -1, 0], [3.0 * c, -16.0 * c, 36.0 * c, -48.0 * c, 25.0 * c])
    } else if i == n - 2 {
        ([-3, -2, -1, 0, 1], [-1.0 * c, 6.0 * c, -18.0 * c, 10.0 * c, 3.0 * c])
    } else {
        ([-2, -1, 0, 1, 2], [1.0 * c, -8.0 * c, 0.0, 8.0 * c, -1.0 * c])
    }
}

/// Second-order first-derivative stencil.
pub fn d1_stencil2(i: usize, n: usize) -> ([i32; 3], [f64; 3]) {
    assert!(n >= 3, "axis too short for differentiation");
    if i == 0 {
        ([0, 1, 2], [-1.5, 2.0, -0.5])
    } else if i == n - 1 {
        ([-2, -1, 0], [0.5, -2.0, 1.5])
    } else {
        ([-1, 0, 1], [-0.5, 0.0, 0.5])
    }
}

/// Second-order second-derivative stencil (fourth slot zero-padded in the
/// interior).
pub fn d2_stencil2(i: usize, n: usize) -> ([i32; 4], [f64; 4]) {
    assert!(n >= 4, "axis too short for second derivatives");
    if i == 0 {
        ([0, 1, 2, 3], [2.0, -5.0, 4.0, -1.0])
    } else if i == n - 1 {
        ([-3, -2, -1, 0], [-1.0, 4.0, -5.0, 2.0])
    } else {
        ([-1, 0, 1, 0], [1.0, -2.0, 1.0, 0.0])
    }
}

fn apply_x<T: Linear>(
    data: &[T],
    nx: usize,
    ix: usize,
    iy: usize,
    scale: f64,
    offs: &[i32],
    w: &[f64],
) -> T {
    let mut acc = T::lin_zero();
    for (o, wk) in offs.iter().zip(w.iter()) {
        if *wk == 0.0 {
            continue;
        }
        let jx = (ix as i32 + o) as usize;
        acc = acc.lin_axpy(wk * scale, data[iy * nx + jx]);
    }
    acc
}

fn apply_y<T: Linear>(
    data: &[T],
    nx: usize,
    ix: usize,
    iy: usize,
    scale: f64,
    offs: &[i32],
    w: &[f64],
) -> T {
    let mut acc = T::lin_zero();
    for (o, wk) in offs.iter().zip(w.iter()) {
        if *wk == 0.0 {
            continue;
        }
        let jy = (iy as i32 + o) as usize;
        acc = acc.lin_axpy(wk * scale, data[jy * nx + ix]);
    }
    acc
}

/// d/dx, fourth order.
pub fn dx4<T: Linear>(data: &[T], nx: usize, _ny: usize, ix: usize, iy: usize, hx: f64) -> T {
    let (o, w) = d1_stencil4(ix, nx);
    apply_x(data, nx, ix, iy, 1.0 / hx, &o, &w)
}

/// d/dy, fourth order.
pub fn dy4<T: Linear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hy: f64) -> T {
    let (o, w) = d1_stencil4(iy, ny);
    apply_y(data, nx, ix, iy, 1.0 / hy, &o, &w)
}

/// d/dx, second order.
pub fn dx2<T: Linear>(data: &[T], nx: usize, _ny: usize, ix: usize, iy: usize, hx: f64) -> T {
    let (o, w) = d1_stencil2(ix, nx);
    apply_x(data, nx, ix, iy, 1.0 / hx, &o, &w)
}

/// d/dy, second order.
pub fn dy2<T: Linear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hy: f64) -> T {
    let (o, w) = d1_stencil2(iy, ny);
    apply_y(data, nx, ix, iy, 1.0 / hy, &o, &w)
}

/// d2/dx2, second order.
pub fn dxx2<T: Linear>(data: &[T], nx: usize, _ny: usize, ix: usize, iy: usize, hx: f64) -> T {
    let (o, w) = d2_stencil2(ix, nx);
    apply_x(data, nx, ix, iy, 1.0 / (hx * hx), &o, &w)
}

/// d2/dy2, second order.
pub fn dyy2<T: Linear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hy: f64) -> T {
    let (o, w) = d2_stencil2(iy, ny);
    apply_y(data, nx, ix, iy, 1.0 / (hy * hy), &o, &w)
}

/// Mixed d2/dxdy, second order, as nested first derivatives.
pub fn dxy2<T: Linear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hx: f64, hy: f64) -> T {
    let (oy, wy) = d1_stencil2(iy, ny);
    let mut acc = T::lin_zero();
    for (o, wk) in oy.iter().zip(wy.iter()) {
        if *wk == 0.0 {
            continue;
        }
        let jy = (iy as i32 + o) as usize;
        let row = dx2(data, nx, ny, ix, jy, hx);
        acc = acc.lin_axpy(wk / hy, row);
    }
    acc
}

pub fn laplacian2<T: Linear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hx: f64, hy: f64) -> T {
    dxx2(data, nx, ny, ix, iy, hx).lin_axpy(1.0, dyy2(data, nx, ny, ix, iy, hy))
}

/// Wirtinger d/dz, fourth order, on complex-linear values.
pub fn wirt_z4<T: ComplexLinear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hx: f64, hy: f64) -> T {
    let fx = dx4(data, nx, ny, ix, iy, hx);
    let fy = dy4(data, nx, ny, ix, iy, hy);
    half(fx.lin_axpy(-1.0, fy.lin_i()))
}

/// Wirtinger d/dzbar, fourth order.
pub fn wirt_zbar4<T: ComplexLinear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hx: f64, hy: f64) -> T {
    let fx = dx4(data, nx, ny, ix, iy, hx);
    let fy = dy4(data, nx, ny, ix, iy, hy);
    half(fx.lin_axpy(1.0, fy.lin_i()))
}

/// Wirtinger d/dz, second order.
pub fn wirt_z2<T: ComplexLinear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hx: f64, hy: f64) -> T {
    let fx = dx2(data, nx, ny, ix, iy, hx);
    let fy = dy2(data, nx, ny, ix, iy, hy);
    half(fx.lin_axpy(-1.0, fy.lin_i()))
}

/// Wirtinger d/dzbar, second order.
pub fn wirt_zbar2<T: ComplexLinear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hx: f64, hy: f64) -> T {
    let fx = dx2(data, nx, ny, ix, iy, hx);
    let fy = dy2(data, nx, ny, ix, iy, hy);
    half(fx.lin_axpy(1.0, fy.lin_i()))
}

/// d2/dz dzbar = Laplacian / 4, second order.
pub fn wirt_zzbar2<T: Linear>(data: &[T], nx: usize, ny: usize, ix: usize, iy: usize, hx: f64, hy: f64) -> T {
    T::lin_zero().lin_axpy(0.25, laplacian2(data, nx, ny, ix, iy, hx, hy))
}

/// d/dz of a real scalar field.
pub fn wirt_z4_re(data: &[f64], nx: usize, ny: usize, ix: usize, iy: usize, hx: f64, hy: f64) -> Complex64 {
    let fx = dx4(data, nx, ny, ix, iy, hx);
    let fy = dy4(data, nx, ny, ix, iy, hy);
    Complex64::new(0.5 * fx, -0.5 * fy)
}

/// d/dz of a real scalar field, second order.
pub fn wirt_z2_re(data: &[f64], nx: usize, ny: usize, ix: usize, iy: usize, hx: f64, hy: f64) -> Complex64 {
    let fx = dx2(data, nx, ny, ix, iy, hx);
    let fy = dy2(data, nx, ny, ix, iy, hy);
    Complex64::new(0.5 * fx, -0.5 * fy)
}

fn half<T: Linear>(x: T) -> T {
    T::lin_zero().lin_axpy(0.5, x)
}
