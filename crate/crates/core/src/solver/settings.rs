use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the splitting method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Target for the primal residual, dual residual and relative gap.
    pub eps: f64,
    pub max_iters: u64,
    /// Over-relaxation, in (0, 2).
    pub alpha: f64,
    /// Multiplier applied to the objective before iterating.
    pub scale: f64,
    /// Iterations between convergence checks.
    pub check_interval: u64,
    /// Number of checks over which a stall is judged.
    pub stall_window: usize,
    /// Minimal improvement factor of the residual over `stall_window` checks.
    pub stall_factor: f64,
    pub rho: f64,
    /// Step size multiplier for zero-cone rows.
    pub equality_rho_factor: f64,
    pub sigma: f64,
    pub adaptive_rho: bool,
    /// Minimal number of iterations between two step-size changes.
    pub adaptive_rho_interval: u64,
    /// Threshold of the infeasibility tests; 0 disables them.
    pub eps_infeasible: f64,
    /// Ruiz equilibration passes; 0 disables scaling.
    pub equilibrate_passes: u32,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            eps: 1e-8,
            max_iters: 200_000,
            alpha: 1.6,
            scale: 1.0,
            check_interval: 10,
            stall_window: 1000,
            stall_factor: 10.0,
            rho: 0.1,
            equality_rho_factor: 1e3,
            sigma: 1e-6,
            adaptive_rho: true,
            adaptive_rho_interval: 100,
            eps_infeasible: 1e-9,
            equilibrate_passes: 10,
        }
    }
}

impl Settings {
    /// Loose accuracy and a short budget, for the pre-solve phase. SOS
    /// programs do better with a fixed unit step: adapting it chases the dual
    /// residual, which on these degenerate problems settles slowly, and ends
    /// with a pre-solve `λ₀` above the optimum. The stall window spans the
    /// whole budget, so only accuracy or the iteration cap end the phase.
    pub fn presolve() -> Settings {
        Settings {
            eps: 1e-5,
            max_iters: 20_000,
            rho: 1.0,
            adaptive_rho: false,
            stall_window: 2_000,
            ..Settings::default()
        }
    }

    /// The constrained solve that feeds the certifier.
    pub fn constrained() -> Settings {
        Settings { rho: 1.0, adaptive_rho: false, ..Settings::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return fail("eps must be positive");
        }
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1");
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return fail("alpha must lie in (0, 2)");
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return fail("scale must be positive");
        }
        if self.check_interval == 0 {
            return fail("check_interval must be at least 1");
        }
        if self.stall_window == 0 || !(self.stall_factor >= 1.0) {
            return fail("stall_window must be positive and stall_factor at least 1");
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(positive(self.rho) && positive(self.sigma) && positive(self.equality_rho_factor)) {
            return fail("rho, equality_rho_factor and sigma must be positive");
        }
        if !(self.eps_infeasible.is_finite() && self.eps_infeasible >= 0.0) {
            return fail("eps_infeasible must be non-negative");
        }
        Ok(())
    }
}
