//! Elastic Kirchhoff rod swimmer in a viscous Stokes fluid.
//!
//! The rod carries an orthonormal material frame and a preferred,
//! calcium-dependent strain-twist configuration. Differences between the
//! actual and preferred configuration generate point forces and torques,
//! which drive the surrounding fluid through regularized Stokeslet,
//! rotlet and dipole kernels. The rod moves with the local fluid velocity
//! (no slip), so trajectories, waveforms and flagelloid curves are
//! emergent.
//!
//! Units are g–μm–s throughout: lengths in μm, times in s, forces in
//! g·μm/s², concentrations in μM.

// validation uses `!(x > 0.0)` so NaN fails the checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod calcium;
pub mod config;
pub mod elasticity;
pub mod error;
pub mod hydro;
pub mod output;
pub mod rod;
pub mod sim;

pub use error::Error;

/// 3-vector used for positions, forces, velocities.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 matrix used for frames and rotations.
pub type Mat3 = nalgebra::Matrix3<f64>;
