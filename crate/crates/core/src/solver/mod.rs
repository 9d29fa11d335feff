//! First-order conic solver.
//!
//! Operator splitting for `minimize qᵀx  subject to  Ax + s = b, s ∈ K` with
//! `K` a product of zero, nonnegative and PSD cones. Each iteration solves
//! one linear system against a cached factorization of `σI + AᵀRA`, projects
//! onto `K` and updates the dual variable, with over-relaxation `α`.
//!
//! The dual iterate `y` is kept in `K*`, so the optimality conditions read
//! `q + Aᵀy = 0`, `y ∈ K*`, `b − Ax ∈ K` and `qᵀx + bᵀy = 0`. Residuals are
//! reported relative to the data:
//!
//! * primal: `‖Ax + s − b‖∞ / (1 + ‖b‖∞)`
//! * dual: `‖q + Aᵀy‖∞ / (1 + ‖q‖∞)`
//! * gap: `|qᵀx + bᵀy| / (1 + |qᵀx| + |bᵀy|)`

mod admm;
mod cones;
mod csr;
mod linsys;
mod polish;
mod settings;

pub use admm::{
    project_slack, residuals, solve, solve_on_faces, solve_sos, solve_with_observer, sos_faces, IterationLog,
    SolveReport, SolverState,
};
pub use cones::{cone_distance, project_psd, PsdFace};
pub use polish::{polish, PolishSettings, Polished};
pub use settings::Settings;
