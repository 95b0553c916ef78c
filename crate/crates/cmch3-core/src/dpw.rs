//! Frame reconstruction from a normalized potential.
//!
//! The pipeline turns a holomorphic potential into a grid of dressed
//! frames whose evaluations immerse the domain into the hyperboloid model
//! of hyperbolic 3-space. Steps, per grid:
//!
//! 1. integrate `d Phi = Phi theta^{-1} P(z) dz`, `Phi(0) = I`, along grid
//!    lines (RK4 with exact midpoint evaluation of the potential); a second
//!    pass with halved steps gives a Richardson estimate of the
//!    integration error;
//! 2. split `Phi = F B_plus` (Iwasawa) at every node; `F` is the unitary
//!    frame, its constant term `F_0` is diagonal by the twisting;
//! 3. differentiate `F` to get the Maurer-Cartan coefficients
//!    `Omega' = F^* F_z`, `Omega'' = F^* F_zbar`; the weight acts on these
//!    by scaling the lower-left entry of the theta^{-1} coefficient by `a`
//!    and the upper-right entry of the theta^{+1} coefficient by `1/a`;
//!    the scaled pair stays a flat connection, and the added pieces
//!    (weighted single entries at theta^{-1} dz and theta^{+1} dzbar) are
//!    the dressing terms;
//! 4. integrate the dressed frame directly from the full connection:
//!    `d F_ext = F_ext (Omega'_a dz + Omega''_a dzbar)`, `F_ext(0) = I`,
//!    with loop-valued RK4 along grid edges; this route drives the
//!    immersion;
//! 5. as a monitored alternative, integrate the factored transport
//!    systems `d G_minus = G_minus W_minus dz` and
//!    `d G_plus = G_plus W_plus dzbar`, where the dressing terms are
//!    conjugated by the diagonal constant term `F_0`, then recombine
//!    through a Birkhoff split of `G_minus^{-1} G_plus`; the factored
//!    route drops the off-diagonal transport of the full connection, so
//!    its defect against the direct frame is recorded rather than assumed
//!    to vanish;
//! 6. evaluate: immersion `f = F_ext F_ext^dagger`, normal
//!    `N = F_ext sigma3 F_ext^dagger` (see [`immerse`]).
//!
//! Nodes where the potential has a pole, the Iwasawa symbol degenerates,
//! the Birkhoff system is off the big cell, or no integration path exists
//! are masked with the reason; integration routes around masked nodes by
//! breadth-first repair. The same integrations rerun with the transposed
//! sweep order give the path-dependence diagnostics: for an exactly closed
//! connection the two orders agree up to discretization error.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::fd::{d1_stencil2, d1_stencil4};
use crate::grid::Grid;
use crate::mat2::{cr, from_hermitian, pauli, LorentzVec, Mat2C, HERMITIAN_TOL};
use crate::potential::{NormalizedPotential, PotentialError};
use crate::twisted::Loop;

/// Reasons a node carries no frame, in precedence order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Ok,
    /// Potential evaluation failed here (pole or overflow); byte position
    /// of the offending operator in the source expression.
    Pole { pos: usize },
    /// Iwasawa symbol lost positive definiteness.
    SingularPoint,
    /// Birkhoff system singular: the factored dressing loop left the big
    /// cell.
    OffBigCell,
    /// No usable integration path reached this node.
    Blocked,
}

impl NodeState {
    /// Stable small integer for file formats: 0 ok, 1 pole, 2 singular
    /// point, 3 off big cell, 4 blocked.
    pub fn code(&self) -> u8 {
        match self {
            NodeState::Ok => 0,
            NodeState::Pole { .. } => 1,
            NodeState::SingularPoint => 2,
            NodeState::OffBigCell => 3,
            NodeState::Blocked => 4,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, NodeState::Ok)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PipelineError {
    /// The grid has no node at z = 0; potentials are normalized there.
    NoBasePoint,
    /// The potential failed to evaluate at every single node.
    NoUsableRoot,
    /// Every node ended up masked.
    Degenerate,
}

impl core::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PipelineError::NoBasePoint => write!(f, "grid has no node at the origin"),
            PipelineError::NoUsableRoot => write!(f, "potential evaluates nowhere on the grid"),
            PipelineError::Degenerate => write!(f, "all nodes masked; no surface produced"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PipelineParams {
    /// Loop truncation degree.
    pub degree: usize,
    /// Toeplitz depth for the Iwasawa factorization.
    pub bauer_blocks: usize,
    /// Circle samples for per-node residual diagnostics.
    pub circle_samples: usize,
    /// Rerun the integrations in transposed order and record the
    /// disagreement.
    pub two_path: bool,
}

impl PipelineParams {
    pub fn with_degree(n: usize) -> PipelineParams {
        PipelineParams {
            degree: n,
            bauer_blocks: (4 * n + 8).max(40),
            circle_samples: 16,
            two_path: true,
        }
    }
}

/// Disagreement between row-first and column-first integration, sup over
/// commonly reached nodes and sampled circle points.
#[derive(Clone, Copy, Debug, Default)]
pub struct PathDependence {
    pub minus_frame: f64,
    pub g_minus: f64,
    pub g_plus: f64,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineDiagnostics {
    /// Base point actually used (grid indices).
    pub root: (usize, usize),
    /// True when the origin itself was masked and the base point moved.
    pub rerooted: bool,
    pub masked_pole: usize,
    pub masked_singular: usize,
    pub masked_off_cell: usize,
    pub masked_blocked: usize,
    /// Sup over nodes of the Iwasawa remultiplication defect on the circle.
    pub split_residual_max: f64,
    /// Sup over nodes of the unitary factor's unitarity defect.
    pub unitarity_max: f64,
    /// Richardson estimate of the step-1 integration error (full-step
    /// versus two half-step sweeps).
    pub integration_error_est: f64,
    /// Sup over nodes and circle samples of `Omega'' + (Omega')^dagger`;
    /// vanishes when the Maurer-Cartan pair of the unitary frame is
    /// su(2)-compatible.
    pub mc_su2_max: f64,
    /// Sup over nodes of the Birkhoff factorization defect in the factored
    /// route.
    pub birkhoff_residual_max: f64,
    /// Sup over nodes of the difference between the Birkhoff-recombined
    /// factored frame and the directly integrated dressed frame.
    pub recombination_max: f64,
    /// Largest accumulated truncation budget on any dressed frame.
    pub tail_max: f64,
    /// Factored dressing sources dropped because the unitary constant term
    /// was too close to singular.
    pub degenerate_f0: usize,
    pub path_dependence: Option<PathDependence>,
}

/// Frames and masks produced by the reconstruction.
#[derive(Clone, Debug)]
pub struct FrameField {
    pub grid: Grid,
    /// Weight of the potential that produced this field.
    pub a: f64,
    pub params: PipelineParams,
    pub state: Vec<NodeState>,
    /// Holomorphic frame from step 1.
    pub phi: Vec<Option<Loop>>,
    /// Unitary factor from step 2.
    pub unitary: Vec<Option<Loop>>,
    /// Positive factor from step 2.
    pub plus: Vec<Option<Loop>>,
    /// Weighted connection coefficients: `ext` solves
    /// `d ext = ext (wz dz + wzb dzbar)`.
    pub wz: Vec<Option<Loop>>,
    pub wzb: Vec<Option<Loop>>,
    /// Dressed extended frame from step 4; drives the immersion.
    pub ext: Vec<Option<Loop>>,
    /// Dressing factor `ext * unitary^{-1}`.
    pub frame: Vec<Option<Loop>>,
    /// Factored transport frames from step 5 (diagnostic route).
    pub g_minus: Vec<Option<Loop>>,
    pub g_plus: Vec<Option<Loop>>,
    pub diag: PipelineDiagnostics,
}

impl FrameField {
    pub fn ok_nodes(&self) -> usize {
        self.state.iter().filter(|s| s.is_ok()).count()
    }
}

/// Immersion data at one associate-family parameter.
#[derive(Clone, Debug)]
pub struct Immersion {
    pub grid: Grid,
    pub theta: Complex64,
    pub state: Vec<NodeState>,
    /// Hermitian position matrices `F F^dagger`.
    pub f: Vec<Option<Mat2C>>,
    /// Normal matrices `F sigma3 F^dagger`.
    pub normal: Vec<Option<Mat2C>>,
    /// Minkowski coordinates of `f`.
    pub x: Vec<Option<LorentzVec>>,
    /// Largest Hermitian defect of any position matrix.
    pub hermitian_max: f64,
}

#[derive(Clone, Copy)]
enum SweepOrder {
    RowFirst,
    ColumnFirst,
}

/// One RK4 step of `state' = state * M(t) * step` along an edge, where the
/// multiplier rides at a fixed theta shift.
fn rk4_edge(
    state: &Loop,
    m0: &Mat2C,
    mm: &Mat2C,
    m1: &Mat2C,
    shift: i32,
    step: Complex64,
) -> Loop {
    let k1 = state.mul_term(m0, shift).scale(step);
    let s2 = state.add(&k1.scale(cr(0.5)));
    let k2 = s2.mul_term(mm, shift).scale(step);
    let s3 = state.add(&k2.scale(cr(0.5)));
    let k3 = s3.mul_term(mm, shift).scale(step);
    let s4 = state.add(&k3);
    let k4 = s4.mul_term(m1, shift).scale(step);
    let incr = k1
        .add(&k2.scale(cr(2.0)))
        .add(&k3.scale(cr(2.0)))
        .add(&k4)
        .scale(cr(1.0 / 6.0));
    state.add(&incr)
}

/// One RK4 step of `state' = state * V(t)` along an edge with loop-valued
/// multipliers sampled at the start, midpoint, and end; the edge step is
/// already folded into the multipliers.
fn rk4_loop(state: &Loop, v0: &Loop, vm: &Loop, v1: &Loop) -> Loop {
    let k1 = state.mul(v0);
    let k2 = state.add(&k1.scale(cr(0.5))).mul(vm);
    let k3 = state.add(&k2.scale(cr(0.5))).mul(vm);
    let k4 = state.add(&k3).mul(v1);
    let incr = k1
        .add(&k2.scale(cr(2.0)))
        .add(&k3.scale(cr(2.0)))
        .add(&k4)
        .scale(cr(1.0 / 6.0));
    state.add(&incr)
}

/// Edge integrator for the sweeps. `None` means the edge cannot be
/// integrated from this side.
trait EdgeSource {
    /// Is the target node usable at all?
    fn available(&self, grid: &Grid, ix: usize, iy: usize) -> bool;
    /// Advance the frame across one grid edge.
    fn step(
        &self,
        grid: &Grid,
        from: (usize, usize),
        to: (usize, usize),
        state: &Loop,
    ) -> Option<Loop>;
}

/// Potential-driven source for step 1: multipliers are exact evaluations.
/// With `halved` set, every edge is integrated in two RK4 half-steps with
/// quarter-point evaluations, for the Richardson error estimate.
struct PotentialSource<'a> {
    pot: &'a NormalizedPotential,
    values: &'a [Option<Mat2C>],
    halved: bool,
}

impl<'a> EdgeSource for PotentialSource<'a> {
    fn available(&self, grid: &Grid, ix: usize, iy: usize) -> bool {
        self.values[grid.idx(ix, iy)].is_some()
    }

    fn step(
        &self,
        grid: &Grid,
        from: (usize, usize),
        to: (usize, usize),
        state: &Loop,
    ) -> Option<Loop> {
        let z0 = grid.z(from.0, from.1);
        let z1 = grid.z(to.0, to.1);
        let m0 = self.values[grid.idx(from.0, from.1)]?;
        let m1 = self.values[grid.idx(to.0, to.1)]?;
        let zm = 0.5 * (z0 + z1);
        let mm = self.pot.matrix_at(zm).ok()?;
        if !self.halved {
            return Some(rk4_edge(state, &m0, &mm, &m1, -1, z1 - z0));
        }
        let mq1 = self.pot.matrix_at(0.5 * (z0 + zm)).ok()?;
        let mq3 = self.pot.matrix_at(0.5 * (zm + z1)).ok()?;
        let half = rk4_edge(state, &m0, &mq1, &mm, -1, zm - z0);
        Some(rk4_edge(&half, &mm, &mq3, &m1, -1, z1 - zm))
    }
}

/// Node-sampled source for the factored transport systems: a scalar field
/// occupying one off-diagonal slot, midpoints interpolated along the edge
/// axis.
struct FormSource<'a> {
    grid: Grid,
    w: &'a [Option<Complex64>],
    /// true: lower-left entry at theta^{-1} integrated against dz;
    /// false: upper-right entry at theta^{+1} integrated against dzbar.
    lower: bool,
}

impl<'a> FormSource<'a> {
    fn value(&self, ix: i32, iy: i32) -> Option<Complex64> {
        if ix < 0 || iy < 0 || ix as usize >= self.grid.nx || iy as usize >= self.grid.ny {
            return None;
        }
        self.w[self.grid.idx(ix as usize, iy as usize)]
    }

    fn matrix(&self, w: Complex64) -> Mat2C {
        if self.lower {
            Mat2C::new(cr(0.0), cr(0.0), w, cr(0.0))
        } else {
            Mat2C::new(cr(0.0), w, cr(0.0), cr(0.0))
        }
    }
}

impl<'a> EdgeSource for FormSource<'a> {
    fn available(&self, grid: &Grid, ix: usize, iy: usize) -> bool {
        self.w[grid.idx(ix, iy)].is_some()
    }

    fn step(
        &self,
        grid: &Grid,
        from: (usize, usize),
        to: (usize, usize),
        state: &Loop,
    ) -> Option<Loop> {
        let (dx, dy) = (to.0 as i32 - from.0 as i32, to.1 as i32 - from.1 as i32);
        let w0 = self.w[grid.idx(from.0, from.1)]?;
        let w1 = self.w[grid.idx(to.0, to.1)]?;
        // neighbors one step behind / ahead along the edge axis
        let behind = self.value(from.0 as i32 - dx, from.1 as i32 - dy);
        let ahead = self.value(to.0 as i32 + dx, to.1 as i32 + dy);
        let wm = match (behind, ahead) {
            // cubic through 4 points, evaluated at the midpoint
            (Some(b), Some(a)) => (9.0 * (w0 + w1) - b - a) * (1.0 / 16.0),
            // one-sided quadratics
            (None, Some(a)) => 0.375 * w0 + 0.75 * w1 - 0.125 * a,
            (Some(b), None) => -0.125 * b + 0.75 * w0 + 0.375 * w1,
            (None, None) => 0.5 * (w0 + w1),
        };
        let z0 = grid.z(from.0, from.1);
        let z1 = grid.z(to.0, to.1);
        let step = if self.lower { z1 - z0 } else { (z1 - z0).conj() };
        let shift = if self.lower { -1 } else { 1 };
        Some(rk4_edge(
            state,
            &self.matrix(w0),
            &self.matrix(wm),
            &self.matrix(w1),
            shift,
            step,
        ))
    }
}

/// Node-sampled full connection for the direct dressed-frame integration:
/// loop pair `(wz, wzb)` per node, contracted against the edge direction
/// as `wz dz + wzb dzbar` and interpolated at edge midpoints.
struct ConnectionSource<'a> {
    grid: Grid,
    wz: &'a [Option<Loop>],
    wzb: &'a [Option<Loop>],
}

impl<'a> ConnectionSource<'a> {
    fn contracted(&self, k: usize, dz: Complex64) -> Option<Loop> {
        let wz = self.wz[k].as_ref()?;
        let wzb = self.wzb[k].as_ref()?;
        Some(wz.scale(dz).add(&wzb.scale(dz.conj())))
    }

    fn contracted_at(&self, ix: i32, iy: i32, dz: Complex64) -> Option<Loop> {
        if ix < 0 || iy < 0 || ix as usize >= self.grid.nx || iy as usize >= self.grid.ny {
            return None;
        }
        self.contracted(self.grid.idx(ix as usize, iy as usize), dz)
    }
}

impl<'a> EdgeSource for ConnectionSource<'a> {
    fn available(&self, grid: &Grid, ix: usize, iy: usize) -> bool {
        let k = grid.idx(ix, iy);
        self.wz[k].is_some() && self.wzb[k].is_some()
    }

    fn step(
        &self,
        grid: &Grid,
        from: (usize, usize),
        to: (usize, usize),
        state: &Loop,
    ) -> Option<Loop> {
        let (dx, dy) = (to.0 as i32 - from.0 as i32, to.1 as i32 - from.1 as i32);
        let dz = grid.z(to.0, to.1) - grid.z(from.0, from.1);
        let v0 = self.contracted(grid.idx(from.0, from.1), dz)?;
        let v1 = self.contracted(grid.idx(to.0, to.1), dz)?;
        let behind = self.contracted_at(from.0 as i32 - dx, from.1 as i32 - dy, dz);
        let ahead = self.contracted_at(to.0 as i32 + dx, to.1 as i32 + dy, dz);
        // same midpoint weights as the scalar source, applied loop-wise
        let vm = match (behind, ahead) {
            (Some(b), Some(a)) => v0
                .add(&v1)
                .scale(cr(9.0 / 16.0))
                .sub(&b.add(&a).scale(cr(1.0 / 16.0))),
            (None, Some(a)) => v0
                .scale(cr(0.375))
                .add(&v1.scale(cr(0.75)))
                .sub(&a.scale(cr(0.125))),
            (Some(b), None) => v0
                .scale(cr(0.75))
                .add(&v1.scale(cr(0.375)))
                .sub(&b.scale(cr(0.125))),
            (None, None) => v0.add(&v1).scale(cr(0.5)),
        };
        Some(rk4_loop(state, &v0, &vm, &v1))
    }
}

/// Integrates a frame field from `root` over all reachable nodes: spine
/// along one axis, lines along the other, then breadth-first repair around
/// obstacles.
fn sweep_with(
    grid: &Grid,
    degree: usize,
    src: &dyn EdgeSource,
    root: (usize, usize),
    order: SweepOrder,
) -> Vec<Option<Loop>> {
    let mut out: Vec<Option<Loop>> = vec![None; grid.len()];
    if !src.available(grid, root.0, root.1) {
        return out;
    }
    out[grid.idx(root.0, root.1)] = Some(Loop::identity(degree));

    let step_edge = |out: &mut Vec<Option<Loop>>, from: (usize, usize), to: (usize, usize)| -> bool {
        if out[grid.idx(to.0, to.1)].is_some() {
            return true;
        }
        if !src.available(grid, to.0, to.1) {
            return false;
        }
        let Some(state) = out[grid.idx(from.0, from.1)].clone() else {
            return false;
        };
        let Some(next) = src.step(grid, from, to, &state) else {
            return false;
        };
        out[grid.idx(to.0, to.1)] = Some(next);
        true
    };

    // walk a straight line from the root of the line; stop at the first
    // failure (repair picks up anything beyond)
    let walk = |out: &mut Vec<Option<Loop>>, start: (usize, usize), dx: i32, dy: i32| {
        let (mut ix, mut iy) = (start.0 as i32, start.1 as i32);
        loop {
            let (jx, jy) = (ix + dx, iy + dy);
            if jx < 0 || jy < 0 || jx as usize >= grid.nx || jy as usize >= grid.ny {
                return;
            }
            if !step_edge(out, (ix as usize, iy as usize), (jx as usize, jy as usize)) {
                return;
            }
            ix = jx;
            iy = jy;
        }
    };

    match order {
        SweepOrder::RowFirst => {
            walk(&mut out, root, 1, 0);
            walk(&mut out, root, -1, 0);
            for ix in 0..grid.nx {
                if out[grid.idx(ix, root.1)].is_some() {
                    walk(&mut out, (ix, root.1), 0, 1);
                    walk(&mut out, (ix, root.1), 0, -1);
                }
            }
        }
        SweepOrder::ColumnFirst => {
            walk(&mut out, root, 0, 1);
            walk(&mut out, root, 0, -1);
            for iy in 0..grid.ny {
                if out[grid.idx(root.0, iy)].is_some() {
                    walk(&mut out, (root.0, iy), 1, 0);
                    walk(&mut out, (root.0, iy), -1, 0);
                }
            }
        }
    }

    // repair: reach leftover nodes from any integrated neighbor
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for (ix, iy, _) in grid.iter() {
        if out[grid.idx(ix, iy)].is_some() {
            queue.push_back((ix, iy));
        }
    }
    while let Some((ix, iy)) = queue.pop_front() {
        for (jx, jy) in grid.neighbors(ix, iy) {
            if out[grid.idx(jx, jy)].is_none() && step_edge(&mut out, (ix, iy), (jx, jy)) {
                queue.push_back((jx, jy));
            }
        }
    }
    out
}

/// Sup over commonly integrated nodes of the circle-sampled difference.
fn field_disagreement(a: &[Option<Loop>], b: &[Option<Loop>], samples: usize) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        if let (Some(x), Some(y)) = (x, y) {
            worst = worst.max(x.sup_diff(y, samples));
        }
    }
    worst
}

/// Exact inverse of `I + (strictly one-sided nilpotent)`: the off-diagonal
/// block squares to zero structurally, so `g^{-1} = 2I - g`.
fn unipotent_inv(g: &Loop) -> Loop {
    debug_assert!((g.coeff(0) - Mat2C::identity()).norm() < 1.0);
    Loop::identity(g.degree()).scale(cr(2.0)).sub(g)
}

/// Runs steps 1 through 5 on a grid.
pub fn run_pipeline(
    pot: &NormalizedPotential,
    grid: Grid,
    params: &PipelineParams,
) -> Result<FrameField, PipelineError> {
    let n = params.degree;
    let origin = grid.origin_node().ok_or(PipelineError::NoBasePoint)?;

    // node-level potential evaluation and pole mask
    let mut pvals: Vec<Option<Mat2C>> = Vec::with_capacity(grid.len());
    let mut state: Vec<NodeState> = Vec::with_capacity(grid.len());
    for (_, _, z) in grid.iter() {
        match pot.matrix_at(z) {
            Ok(m) => {
                pvals.push(Some(m));
                state.push(NodeState::Ok);
            }
            Err(e) => {
                pvals.push(None);
                let pos = match e {
                    PotentialError::EntryPole { pos } => pos,
                    PotentialError::NonFinite { pos } => pos,
                    _ => 0,
                };
                state.push(NodeState::Pole { pos });
            }
        }
    }

    // base point: the origin, or the nearest node whose whole 3x3
    // neighborhood evaluates (the dressing sources need derivative
    // stencils of the unitary frame at their root), or failing that the
    // nearest evaluable node
    let mut diag = PipelineDiagnostics::default();
    let root = if pvals[grid.idx(origin.0, origin.1)].is_some() {
        origin
    } else {
        diag.rerooted = true;
        let block_clean = |ix: usize, iy: usize| {
            let mut ok = pvals[grid.idx(ix, iy)].is_some();
            for ddx in -1i32..=1 {
                for ddy in -1i32..=1 {
                    let (jx, jy) = (ix as i32 + ddx, iy as i32 + ddy);
                    if jx >= 0 && jy >= 0 && (jx as usize) < grid.nx && (jy as usize) < grid.ny {
                        ok &= pvals[grid.idx(jx as usize, jy as usize)].is_some();
                    }
                }
            }
            ok
        };
        nearest_matching(&grid, origin, &block_clean)
            .or_else(|| {
                nearest_matching(&grid, origin, &|ix, iy| pvals[grid.idx(ix, iy)].is_some())
            })
            .ok_or(PipelineError::NoUsableRoot)?
    };
    diag.root = root;

    // step 1: holomorphic frame, plus Richardson halving for the error
    // estimate
    let psrc = PotentialSource {
        pot,
        values: &pvals,
        halved: false,
    };
    let phi = sweep_with(&grid, n, &psrc, root, SweepOrder::RowFirst);
    {
        let half_src = PotentialSource {
            pot,
            values: &pvals,
            halved: true,
        };
        let phi_half = sweep_with(&grid, n, &half_src, root, SweepOrder::RowFirst);
        diag.integration_error_est =
            field_disagreement(&phi, &phi_half, params.circle_samples);
    }
    if params.two_path {
        let phi2 = sweep_with(&grid, n, &psrc, root, SweepOrder::ColumnFirst);
        diag.path_dependence = Some(PathDependence {
            minus_frame: field_disagreement(&phi, &phi2, params.circle_samples),
            ..Default::default()
        });
    }

    // step 2: pointwise Iwasawa
    let mut unitary: Vec<Option<Loop>> = vec![None; grid.len()];
    let mut plus: Vec<Option<Loop>> = vec![None; grid.len()];
    let mut f0_pair: Vec<Option<(Complex64, Complex64)>> = vec![None; grid.len()];
    for k in 0..grid.len() {
        let Some(ph) = &phi[k] else { continue };
        match ph.iwasawa_split_with(params.bauer_blocks) {
            Ok(split) => {
                let remult = split.unitary.mul(&split.plus);
                diag.split_residual_max = diag
                    .split_residual_max
                    .max(remult.sup_diff(ph, params.circle_samples));
                diag.unitarity_max = diag
                    .unitarity_max
                    .max(split.unitary.unitarity_deviation(params.circle_samples));
                let f0 = split.unitary.coeff(0);
                f0_pair[k] = Some((f0.m[0][0], f0.m[1][1]));
                unitary[k] = Some(split.unitary);
                plus[k] = Some(split.plus);
            }
            Err(_) => {
                state[k] = NodeState::SingularPoint;
            }
        }
    }

    // step 3: weighted connection and factored dressing sources from the
    // Maurer-Cartan coefficients of F
    let a = pot.a;
    let mut w_minus: Vec<Option<Complex64>> = vec![None; grid.len()];
    let mut w_plus: Vec<Option<Complex64>> = vec![None; grid.len()];
    let mut wz: Vec<Option<Loop>> = vec![None; grid.len()];
    let mut wzb: Vec<Option<Loop>> = vec![None; grid.len()];
    for (ix, iy, _) in grid.iter() {
        let k = grid.idx(ix, iy);
        let Some((omega_z, omega_zb)) = adjusted_mc(&grid, &unitary, ix, iy) else {
            continue;
        };
        // su(2) compatibility of the pair on the unit circle
        for t in Loop::circle(params.circle_samples) {
            let dev = (omega_zb.eval(t) + omega_z.eval(t).dagger()).norm();
            diag.mc_su2_max = diag.mc_su2_max.max(dev);
        }
        let src_minus = omega_z.coeff(-1).m[1][0];
        let src_plus = omega_zb.coeff(1).m[0][1];
        // full connection: scale the theta^{-1} lower-left by a and the
        // theta^{+1} upper-right by 1/a
        let beta_m = Mat2C::new(cr(0.0), cr(0.0), (a - 1.0) * src_minus, cr(0.0));
        let beta_p = Mat2C::new(cr(0.0), (1.0 / a - 1.0) * src_plus, cr(0.0), cr(0.0));
        wz[k] = Some(omega_z.add(&Loop::monomial(n, -1, beta_m)));
        wzb[k] = Some(omega_zb.add(&Loop::monomial(n, 1, beta_p)));
        // factored sources carry the conjugation by the diagonal constant
        // term
        let Some((d0, d1)) = f0_pair[k] else { continue };
        if d0.norm() < 1e-8 || d1.norm() < 1e-8 {
            diag.degenerate_f0 += 1;
            continue;
        }
        w_minus[k] = Some((a - 1.0) * src_minus * d1 / d0);
        w_plus[k] = Some((1.0 / a - 1.0) * src_plus * d0 / d1);
    }

    // step 4: direct integration of the dressed frame
    let csrc = ConnectionSource {
        grid,
        wz: &wz,
        wzb: &wzb,
    };
    let ext = sweep_with(&grid, n, &csrc, root, SweepOrder::RowFirst);

    // step 5: factored transport systems and their recombination
    let src_m = FormSource {
        grid,
        w: &w_minus,
        lower: true,
    };
    let src_p = FormSource {
        grid,
        w: &w_plus,
        lower: false,
    };
    let gm = sweep_with(&grid, n, &src_m, root, SweepOrder::RowFirst);
    let gp = sweep_with(&grid, n, &src_p, root, SweepOrder::RowFirst);
    if params.two_path {
        let gm2 = sweep_with(&grid, n, &src_m, root, SweepOrder::ColumnFirst);
        let gp2 = sweep_with(&grid, n, &src_p, root, SweepOrder::ColumnFirst);
        if let Some(pd) = diag.path_dependence.as_mut() {
            pd.g_minus = field_disagreement(&gm, &gm2, params.circle_samples);
            pd.g_plus = field_disagreement(&gp, &gp2, params.circle_samples);
        }
    }

    let mut frame: Vec<Option<Loop>> = vec![None; grid.len()];
    for k in 0..grid.len() {
        if !state[k].is_ok() {
            continue;
        }
        let (Some(gmk), Some(gpk), Some(extk), Some(uk)) = (&gm[k], &gp[k], &ext[k], &unitary[k])
        else {
            state[k] = NodeState::Blocked;
            continue;
        };
        // dressing factor of the direct route
        let g_direct = extk.mul(&uk.star());
        diag.tail_max = diag.tail_max.max(extk.tail().max(g_direct.tail()));
        let l = unipotent_inv(gmk).mul(gpk);
        match l.birkhoff_split() {
            Ok(split) => {
                diag.birkhoff_residual_max = diag.birkhoff_residual_max.max(split.residual);
                let g_factored = gmk.mul(&split.plus);
                diag.recombination_max = diag
                    .recombination_max
                    .max(g_factored.sup_diff(&g_direct, params.circle_samples));
                frame[k] = Some(g_direct);
            }
            Err(_) => {
                state[k] = NodeState::OffBigCell;
            }
        }
    }

    for k in 0..grid.len() {
        if state[k].is_ok() && (frame[k].is_none() || ext[k].is_none() || unitary[k].is_none()) {
            state[k] = NodeState::Blocked;
        }
    }
    for s in &state {
        match s {
            NodeState::Ok => {}
            NodeState::Pole { .. } => diag.masked_pole += 1,
            NodeState::SingularPoint => diag.masked_singular += 1,
            NodeState::OffBigCell => diag.masked_off_cell += 1,
            NodeState::Blocked => diag.masked_blocked += 1,
        }
    }

    let field = FrameField {
        grid,
        a,
        params: *params,
        state,
        phi,
        unitary,
        plus,
        wz,
        wzb,
        ext,
        frame,
        g_minus: gm,
        g_plus: gp,
        diag,
    };
    if field.ok_nodes() == 0 {
        return Err(PipelineError::Degenerate);
    }
    Ok(field)
}

/// Maurer-Cartan coefficient loops `(Omega', Omega'')` of a unitary frame
/// field at one node, from grid differentiation:
/// `Omega' = F^* F_z`, `Omega'' = F^* F_zbar`.
pub fn adjusted_mc(
    grid: &Grid,
    unitary: &[Option<Loop>],
    ix: usize,
    iy: usize,
) -> Option<(Loop, Loop)> {
    let fk = unitary[grid.idx(ix, iy)].as_ref()?;
    let fx = loop_field_axis_deriv(grid, unitary, ix, iy, true)?;
    let fy = loop_field_axis_deriv(grid, unitary, ix, iy, false)?;
    // F_z = (F_x - i F_y)/2, F_zbar = (F_x + i F_y)/2
    let i = Complex64::new(0.0, 1.0);
    let fz = fx.sub(&fy.scale(i)).scale(cr(0.5));
    let fzb = fx.add(&fy.scale(i)).scale(cr(0.5));
    let star = fk.star();
    Some((star.mul(&fz), star.mul(&fzb)))
}

/// Fourth-order axis derivative of an optional loop field, falling back to
/// second order near masked windows; `None` when even three consecutive
/// usable nodes are missing.
fn loop_field_axis_deriv(
    grid: &Grid,
    field: &[Option<Loop>],
    ix: usize,
    iy: usize,
    x_axis: bool,
) -> Option<Loop> {
    let (i, count, h) = if x_axis {
        (ix, grid.nx, grid.dx())
    } else {
        (iy, grid.ny, grid.dy())
    };
    let probe = |off: i32| -> Option<&Loop> {
        let j = i as i32 + off;
        if j < 0 || j as usize >= count {
            return None;
        }
        let k = if x_axis {
            grid.idx(j as usize, iy)
        } else {
            grid.idx(ix, j as usize)
        };
        field[k].as_ref()
    };
    let attempt = |offs: &[i32], weights: &[f64]| -> Option<Loop> {
        let mut acc: Option<Loop> = None;
        for (o, w) in offs.iter().zip(weights.iter()) {
            if *w == 0.0 {
                continue;
            }
            let f = probe(*o)?;
            let term = f.scale(cr(*w / h));
            acc = Some(match acc {
                None => term,
                Some(prev) => prev.add(&term),
            });
        }
        acc
    };
    if count >= 5 {
        let (o, w) = d1_stencil4(i, count);
        if let Some(d) = attempt(&o, &w) {
            return Some(d);
        }
    }
    if count >= 3 {
        let (o, w) = d1_stencil2(i, count);
        if let Some(d) = attempt(&o, &w) {
            return Some(d);
        }
    }
    None
}

fn nearest_matching(
    grid: &Grid,
    from: (usize, usize),
    pred: &dyn Fn(usize, usize) -> bool,
) -> Option<(usize, usize)> {
    let mut seen = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    queue.push_back(from);
    seen[grid.idx(from.0, from.1)] = true;
    while let Some((ix, iy)) = queue.pop_front() {
        if pred(ix, iy) {
            return Some((ix, iy));
        }
        for (jx, jy) in grid.neighbors(ix, iy) {
            if !seen[grid.idx(jx, jy)] {
                seen[grid.idx(jx, jy)] = true;
                queue.push_back((jx, jy));
            }
        }
    }
    None
}

/// Step 6: evaluate the dressed frames at an associate-family parameter.
pub fn immerse(field: &FrameField, theta: Complex64) -> Immersion {
    let sigma3 = pauli(3);
    let mut f = vec![None; field.grid.len()];
    let mut normal = vec![None; field.grid.len()];
    let mut x = vec![None; field.grid.len()];
    let mut herm_max = 0.0f64;
    for k in 0..field.grid.len() {
        if !field.state[k].is_ok() {
            continue;
        }
        let Some(extk) = &field.ext[k] else { continue };
        let cap = extk.eval(theta);
        let pos = cap * cap.dagger();
        let nor = cap * sigma3 * cap.dagger();
        let dev = pos.hermitian_deviation();
        herm_max = herm_max.max(dev);
        if dev <= HERMITIAN_TOL * (1.0 + pos.norm()) {
            // symmetrize before reading off coordinates
            let sym = (pos + pos.dagger()).scale_re(0.5);
            if let Ok(v) = from_hermitian(&sym, HERMITIAN_TOL) {
                x[k] = Some(v);
            }
        }
        f[k] = Some(pos);
        normal[k] = Some(nor);
    }
    Immersion {
        grid: field.grid,
        theta,
        state: field.state.clone(),
        f,
        normal,
        x,
        hermitian_max: herm_max,
    }
}
