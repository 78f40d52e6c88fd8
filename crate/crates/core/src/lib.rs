//! Half-time range test for the free-space wave observation operator.
//!
//! Forward simulation of boundary traces g(t, θ) on (0, 1] × S from analytic
//! phantoms, projection of the traces onto spherical-harmonic channels,
//! the exterior channel functions R_l^m on [−1, 0], the moment and
//! smoothness residuals that decide range membership, and reconstruction of
//! the source through the Radon transform. Dimensions 2 and 3.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod container;
pub mod error;
pub mod exterior;
pub mod fit;
pub mod forward;
pub mod grids;
pub mod par;
pub mod pipeline;
pub mod quad;
pub mod range;
pub mod recon;
pub mod selftest;
pub mod special;

pub use error::{HtrwError, Result};
