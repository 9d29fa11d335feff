//! Certified lower bounds for the spectral gap of group Laplacians.
//!
//! The pipeline enumerates word-metric balls in a matrix group, models the
//! sum-of-hermitian-squares decomposition of `Δ² − λΔ` as a conic program,
//! solves it with a first-order splitting method and turns the floating-point
//! solution into a rigorous bound using exact rationals and interval arithmetic.

// `!(x > 0.0)` is kept so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod group;
pub mod group_ring;
pub mod numerics;
pub mod oracle;
pub mod pipeline;
pub mod sdp;
pub mod solver;

pub use error::{Error, Result};
