//! Deterministic sample data for tests and calibration runs.
//!
//! A small splitmix-style generator keeps the crate free of external RNG
//! dependencies while giving every test suite reproducible draws.

use alloc::vec;

use num_complex::Complex64;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::mat2::{c, cr, Mat2C};
use crate::twisted::Loop;

/// SplitMix64 stream. Deterministic across platforms.
#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [-amp, amp].
    pub fn sym(&mut self, amp: f64) -> f64 {
        (2.0 * self.unit() - 1.0) * amp
    }

    /// Uniform in [lo, hi].
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    pub fn complex(&mut self, amp: f64) -> Complex64 {
        c(self.sym(amp), self.sym(amp))
    }

    /// Point on the unit circle.
    pub fn unit_circle(&mut self) -> Complex64 {
        Complex64::from_polar(1.0, self.range(0.0, core::f64::consts::TAU))
    }
}

/// Traceless twisted loop-algebra element: diagonal coefficients at even
/// degrees, off-diagonal at odd ones, all degrees |j| <= deg. Coefficient
/// amplitude decays like `amp / (1 + j^2)`, fast enough that truncated
/// factorization tails stay well under the verification tolerances.
pub fn twisted_algebra_loop(rng: &mut Rng, n: usize, deg: usize, amp: f64) -> Loop {
    let deg = deg.min(n);
    let mut g = Loop::zero(n);
    for j in -(deg as i32)..=(deg as i32) {
        let a = amp / (1.0 + (j * j) as f64);
        let m = if j.rem_euclid(2) == 0 {
            let d = rng.complex(a);
            Mat2C::diag(d, -d)
        } else {
            Mat2C::new(cr(0.0), rng.complex(a), rng.complex(a), cr(0.0))
        };
        g.set_coeff(j, m);
    }
    g
}

/// Twisted loop-group element: truncated exponential of a random twisted
/// algebra loop. Unit determinant up to the truncation tail.
pub fn twisted_group_loop(rng: &mut Rng, n: usize, deg: usize, amp: f64) -> Loop {
    let x = twisted_algebra_loop(rng, n, deg, amp);
    loop_exp(&x)
}

/// Series exponential of a loop, truncated at the loop's degree.
pub fn loop_exp(x: &Loop) -> Loop {
    let mut acc = Loop::identity(x.degree());
    let mut term = Loop::identity(x.degree());
    for k in 1..32 {
        term = term.mul(x).scale(cr(1.0 / k as f64));
        if term.coeff_abs_sum() < 1e-18 {
            break;
        }
        acc = acc.add(&term);
    }
    acc
}

/// Smooth real scalar field on an `nx` x `ny` grid: a short cosine series
/// with wavelengths comparable to the domain.
pub fn smooth_field(rng: &mut Rng, nx: usize, ny: usize, amp: f64) -> alloc::vec::Vec<f64> {
    let mut modes = vec![];
    for _ in 0..4 {
        modes.push((
            rng.sym(2.0),
            rng.sym(2.0),
            rng.range(0.0, core::f64::consts::TAU),
            rng.sym(amp),
        ));
    }
    let mut out = vec![0.0; nx * ny];
    for jy in 0..ny {
        for ix in 0..nx {
            let x = ix as f64 / (nx.max(2) - 1) as f64 - 0.5;
            let y = jy as f64 / (ny.max(2) - 1) as f64 - 0.5;
            let mut v = 0.0;
            for &(kx, ky, ph, a) in &modes {
                v += a * (kx * x + ky * y + ph).cos();
            }
            out[jy * nx + ix] = v;
        }
    }
    out
}
