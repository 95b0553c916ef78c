//! Numerical construction of constant mean curvature (|H| > 1) surfaces in
//! hyperbolic 3-space from holomorphic potential data.
//!
//! The crate implements a loop-group (DPW style) pipeline at desk scale:
//!
//! 1. integrate a holomorphic frame from a normalized potential,
//! 2. Iwasawa-factor it pointwise into a unitary frame,
//! 3. read off the adjusted Maurer-Cartan form by finite differences and
//!    let the weight scale its extreme theta coefficients,
//! 4. integrate the dressed frame from that weighted connection,
//! 5. evaluate the immersion `f = F F^dagger` into the Hermitian model
//!    of H^3.
//!
//! The factored transport systems (one per dressing term, recombined
//! through a Birkhoff factorization) are integrated alongside as a
//! monitored alternative route; their defect against the direct frame is
//! part of the diagnostics. Every step is paired with an independent
//! check: remultiplication and unitarity residuals for the
//! factorizations, path-dependence monitors for the frame integrations,
//! and a verifier that re-derives the fundamental forms of the output
//! surface from `f` and its normal alone.
//!
//! The crate is `no_std` (with `alloc`); all IO, configuration and mesh
//! formats live in the companion `cmch3` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dpw;
pub mod expr;
pub mod fd;
pub mod geometry;
pub mod grid;
pub mod mat2;
pub mod potential;
pub mod sample;
pub mod solve;
pub mod twisted;
pub mod verify;

pub use mat2::{LorentzVec, Mat2C};
pub use twisted::Loop;
