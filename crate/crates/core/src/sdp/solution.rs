use serde::{Deserialize, Serialize};

use super::svec::{smat, svec_len};
use super::ConicProgram;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal {
        eps: f64,
    },
    IterationLimit,
    Stalled,
    /// The iterates certify primal (`dual = false`) or dual infeasibility.
    InfeasibleCertificate {
        dual: bool,
    },
}

impl SolverStatus {
    pub fn is_optimal(&self) -> bool {
        matches!(self, SolverStatus::Optimal { .. })
    }
}

impl std::fmt::Display for SolverStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolverStatus::Optimal { eps } => write!(f, "optimal (eps {eps:e})"),
            SolverStatus::IterationLimit => f.write_str("iteration limit"),
            SolverStatus::Stalled => f.write_str("stalled"),
            SolverStatus::InfeasibleCertificate { dual: false } => f.write_str("primal infeasible"),
            SolverStatus::InfeasibleCertificate { dual: true } => f.write_str("dual infeasible"),
        }
    }
}

/// `λ₀` and the Gram matrix `P₀` read off a solver iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSolution {
    pub lambda0: f64,
    pub side: usize,
    /// Row-major, exactly symmetric.
    pub p0: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub status: SolverStatus,
    pub iterations: u64,
}

impl SolverSolution {
    /// Extracts the `lambda` and `P` spans of `x`.
    pub fn from_primal(
        program: &ConicProgram,
        x: &[f64],
        residuals: (f64, f64, f64),
        status: SolverStatus,
        iterations: u64,
    ) -> Result<SolverSolution> {
        if x.len() != program.n_vars() {
            return Err(Error::Mismatch("iterate length differs from the variable count".into()));
        }
        let lam = program.variable("lambda").filter(|v| v.len == 1);
        let p = program.variable("P");
        let (Some(lam), Some(p)) = (lam, p) else {
            return Err(Error::Schema("program has no lambda/P variables".into()));
        };
        let side = side_of(p.len).ok_or_else(|| Error::Schema("P span is not a triangular number".into()))?;
        let mut p0 = smat(&x[p.offset..p.offset + p.len], side);
        for i in 0..side {
            for j in 0..i {
                let v = 0.5 * (p0[i * side + j] + p0[j * side + i]);
                p0[i * side + j] = v;
                p0[j * side + i] = v;
            }
        }
        Ok(SolverSolution {
            lambda0: x[lam.offset],
            side,
            p0,
            primal_residual: residuals.0,
            dual_residual: residuals.1,
            gap: residuals.2,
            status,
            iterations,
        })
    }

    pub fn p0_entry(&self, i: usize, j: usize) -> f64 {
        self.p0[i * self.side + j]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<SolverSolution> {
        let s: SolverSolution = serde_json::from_str(text)?;
        if s.p0.len() != s.side * s.side {
            return Err(Error::Schema("P0 has the wrong number of entries".into()));
        }
        for i in 0..s.side {
            for j in 0..i {
                if s.p0_entry(i, j) != s.p0_entry(j, i) {
                    return Err(Error::Schema("P0 is not symmetric".into()));
                }
            }
        }
        Ok(s)
    }
}

fn side_of(len: usize) -> Option<usize> {
    let mut side = 0;
    while svec_len(side) < len {
        side += 1;
    }
    (svec_len(side) == len).then_some(side)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{elementary_generators, Ring};
    use crate::sdp::{build_instance, build_unconstrained};

    #[test]
    fn extraction_symmetrizes() {
        let inst = build_instance(&elementary_generators(2, Ring::IntegersModP(3)).unwrap(), 1).unwrap();
        let p = build_unconstrained(&inst);
        let x: Vec<f64> = (0..p.n_vars()).map(|i| i as f64 * 0.25).collect();
        let s = SolverSolution::from_primal(&p, &x, (0.0, 0.0, 0.0), SolverStatus::Stalled, 7).unwrap();
        assert_eq!(s.side, 5);
        assert_eq!(s.lambda0, 0.0);
        assert_eq!(s.p0_entry(0, 0), 0.25);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(s.p0_entry(i, j), s.p0_entry(j, i));
            }
        }
        let back = SolverSolution::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(SolverSolution::from_primal(&p, &x[1..], (0.0, 0.0, 0.0), SolverStatus::Stalled, 0).is_err());
    }
}
