//! Conic models of the sum-of-squares problem.
//!
//! The Gram-matrix formulation asks for `λ` and a positive semidefinite `P`
//! with `x* P x^T = Δ² − λΔ` over the basis `x` of `B_d`. Every group element
//! `g` of the product ball `B_2d` contributes one linear equality
//! `Σ_{x_i^-1 x_j = g} P_ij + λ Δ(g) = Δ²(g)`.

mod instance;
mod program;
mod sdpa;
mod solution;
pub mod svec;

pub use instance::{build_instance, build_instance_with, SosInstance};
pub use program::{
    build_constrained, build_unconstrained, lambda_upper_bound, warm_row_map, ConeBlock, ConicProgram, ProgramMetadata,
    ProgramVariant, VariableSpan,
};
pub use sdpa::{read_sdpa, write_sdpa};
pub use solution::{SolverSolution, SolverStatus};
