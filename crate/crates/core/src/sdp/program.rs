use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};

use super::svec::{svec_len, svec_pairs};
use super::SosInstance;
use crate::error::{Error, Result};
use crate::group_ring::Scalar;
use crate::numerics::BigRational;
use num_traits::ToPrimitive;

/// One block of the cone product, in row order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeBlock {
    /// `count` rows with `s = 0`.
    Zero(usize),
    /// `count` rows with `s >= 0`.
    Nonneg(usize),
    /// `side (side+1)/2` rows holding `svec(S)` with `S ⪰ 0`.
    Psd(usize),
}

impl ConeBlock {
    pub fn dim(&self) -> usize {
        match *self {
            ConeBlock::Zero(k) | ConeBlock::Nonneg(k) => k,
            ConeBlock::Psd(side) => svec_len(side),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpan {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProgramVariant {
    Unconstrained,
    Constrained { lambda0: f64, delta: f64 },
}

/// Provenance of an SOS program.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramMetadata {
    pub group: String,
    pub radius: u32,
    pub basis_size: usize,
    pub product_size: usize,
    pub ball_hash: String,
    pub variant: ProgramVariant,
}

/// `minimize c^T x  subject to  A x + s = b,  s ∈ K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProgramRepr", into = "ProgramRepr")]
pub struct ConicProgram {
    n_vars: usize,
    objective: Vec<(usize, f64)>,
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<ConeBlock>,
    variables: Vec<VariableSpan>,
    metadata: Option<ProgramMetadata>,
}

pub const PROGRAM_FORMAT: &str = "sosgap-conic/1";

#[derive(Serialize, Deserialize)]
struct ProgramRepr {
    format: String,
    n_vars: usize,
    n_rows: usize,
    cones: Vec<ConeBlock>,
    variables: Vec<VariableSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<ProgramMetadata>,
    objective: Vec<(usize, f64)>,
    a: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
}

impl TryFrom<ProgramRepr> for ConicProgram {
    type Error = Error;
    fn try_from(r: ProgramRepr) -> Result<Self> {
        if r.format != PROGRAM_FORMAT {
            return Err(Error::Schema(format!("unexpected format {:?}", r.format)));
        }
        let p = ConicProgram::new(r.n_vars, r.objective, r.a, r.b, r.cones, r.variables, r.metadata)?;
        if p.n_rows() != r.n_rows {
            return Err(Error::Schema("row count disagrees with the cone layout".into()));
        }
        Ok(p)
    }
}

impl From<ConicProgram> for ProgramRepr {
    fn from(p: ConicProgram) -> Self {
        ProgramRepr {
            format: PROGRAM_FORMAT.into(),
            n_vars: p.n_vars,
            n_rows: p.b.len(),
            cones: p.cones,
            variables: p.variables,
            metadata: p.metadata,
            objective: p.objective,
            a: p.triplets,
            b: p.b,
        }
    }
}

impl ConicProgram {
    /// Validates dimensions and sorts triplets by `(row, col)`; duplicate
    /// positions are rejected.
    pub fn new(
        n_vars: usize,
        mut objective: Vec<(usize, f64)>,
        mut triplets: Vec<(usize, usize, f64)>,
        b: Vec<f64>,
        cones: Vec<ConeBlock>,
        variables: Vec<VariableSpan>,
        metadata: Option<ProgramMetadata>,
    ) -> Result<ConicProgram> {
        let n_rows: usize = cones.iter().map(ConeBlock::dim).sum();
        let bad = |m: String| Err(Error::Schema(m));
        if b.len() != n_rows {
            return bad(format!("b has {} entries but the cones need {n_rows}", b.len()));
        }
        objective.sort_by_key(|&(i, _)| i);
        if objective.windows(2).any(|w| w[0].0 == w[1].0) || objective.iter().any(|&(i, _)| i >= n_vars) {
            return bad("objective index invalid or repeated".into());
        }
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        if triplets.windows(2).any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return bad("constraint matrix has repeated entries".into());
        }
        if triplets.iter().any(|&(r, c, _)| r >= n_rows || c >= n_vars) {
            return bad("constraint matrix entry out of range".into());
        }
        let values = objective.iter().map(|o| o.1).chain(triplets.iter().map(|t| t.2)).chain(b.iter().copied());
        if values.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("program data must be finite".into()));
        }
        for v in &variables {
            if v.offset + v.len > n_vars {
                return bad(format!("variable span {} exceeds the variable count", v.name));
            }
        }
        Ok(ConicProgram { n_vars, objective, triplets, b, cones, variables, metadata })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self) -> &[(usize, f64)] {
        &self.objective
    }

    pub fn objective_dense(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_vars];
        for &(i, v) in &self.objective {
            c[i] = v;
        }
        c
    }

    /// Constraint matrix entries sorted by `(row, col)`.
    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn cones(&self) -> &[ConeBlock] {
        &self.cones
    }

    pub fn variables(&self) -> &[VariableSpan] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&VariableSpan> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn metadata(&self) -> Option<&ProgramMetadata> {
        self.metadata.as_ref()
    }

    pub fn zero_rows(&self) -> usize {
        self.cones.iter().map(|c| if let ConeBlock::Zero(k) = c { *k } else { 0 }).sum()
    }

    pub fn nonneg_rows(&self) -> usize {
        self.cones.iter().map(|c| if let ConeBlock::Nonneg(k) = c { *k } else { 0 }).sum()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows()];
        for &(r, c, v) in &self.triplets {
            out[r] += v * x[c];
        }
        out
    }

    /// `A^T y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_vars];
        for &(r, c, v) in &self.triplets {
            out[c] += v * y[r];
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<ConicProgram> {
        Ok(serde_json::from_str(text)?)
    }
}

fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Constraint rows of `x* P x^T + λΔ = Δ²`, one per product-ball element,
/// with variables `[λ, svec(P)]`.
fn gram_rows(inst: &SosInstance) -> (Vec<(usize, usize, f64)>, Vec<f64>) {
    let n = inst.basis().len();
    let table = inst.table();
    let mut triplets = Vec::with_capacity(n * n + inst.product().len());
    for (g, c) in inst.laplacian().coeffs().iter().enumerate() {
        if !Scalar::is_zero(c) {
            triplets.push((g, 0, to_f64(c)));
        }
    }
    for (k, (r, c)) in svec_pairs(n).enumerate() {
        let col = 1 + k;
        if r == c {
            triplets.push((table.get(r, r), col, 1.0));
            continue;
        }
        // P_rc and P_cr both equal v/√2 and land on g and g^-1
        let (g1, g2) = (table.get(r, c), table.get(c, r));
        if g1 == g2 {
            triplets.push((g1, col, SQRT_2));
        } else {
            triplets.push((g1, col, FRAC_1_SQRT_2));
            triplets.push((g2, col, FRAC_1_SQRT_2));
        }
    }
    let b = inst.laplacian_squared().coeffs().iter().map(to_f64).collect();
    (triplets, b)
}

fn layout(n: usize) -> Vec<VariableSpan> {
    vec![
        VariableSpan { name: "lambda".into(), offset: 0, len: 1 },
        VariableSpan { name: "P".into(), offset: 1, len: svec_len(n) },
    ]
}

fn metadata(inst: &SosInstance, variant: ProgramVariant) -> ProgramMetadata {
    ProgramMetadata {
        group: inst.group_label(),
        radius: inst.radius(),
        basis_size: inst.basis().len(),
        product_size: inst.product().len(),
        ball_hash: inst.hash(),
        variant,
    }
}

fn push_psd_rows(triplets: &mut Vec<(usize, usize, f64)>, b: &mut Vec<f64>, n: usize) {
    let start = b.len();
    for k in 0..svec_len(n) {
        triplets.push((start + k, 1 + k, -1.0));
        b.push(0.0);
    }
}

/// `minimize −λ` subject to `x* P x^T = Δ² − λΔ`, `λ ≥ 0`, `P ⪰ 0`.
pub fn build_unconstrained(inst: &SosInstance) -> ConicProgram {
    let n = inst.basis().len();
    let n_eq = inst.product().len();
    let (mut triplets, mut b) = gram_rows(inst);
    triplets.push((n_eq, 0, -1.0));
    b.push(0.0);
    push_psd_rows(&mut triplets, &mut b, n);
    let cones = vec![ConeBlock::Zero(n_eq), ConeBlock::Nonneg(1), ConeBlock::Psd(n)];
    ConicProgram::new(
        1 + svec_len(n),
        vec![(0, -1.0)],
        triplets,
        b,
        cones,
        layout(n),
        Some(metadata(inst, ProgramVariant::Unconstrained)),
    )
    .expect("assembled program is well formed")
}

/// The unconstrained program plus `λ ≤ (1−δ)λ₀` and the explicit
/// `Σ_ij P_ij = 0` row.
/// `(1−δ)·λ₀` as used for the upper-bound row; the float is the exact dyadic
/// value the certifier works with.
pub fn lambda_upper_bound(lambda0: f64, delta: f64) -> f64 {
    (1.0 - delta) * lambda0
}

pub fn build_constrained(inst: &SosInstance, lambda0: f64, delta: f64) -> Result<ConicProgram> {
    if !(lambda0.is_finite() && lambda0 > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda0 must be positive, got {lambda0}")));
    }
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!("delta must lie in [0, 1), got {delta}")));
    }
    let n = inst.basis().len();
    let n_eq = inst.product().len();
    let (mut triplets, mut b) = gram_rows(inst);
    for (k, (r, c)) in svec_pairs(n).enumerate() {
        triplets.push((n_eq, 1 + k, if r == c { 1.0 } else { SQRT_2 }));
    }
    b.push(0.0);
    triplets.push((n_eq + 1, 0, -1.0));
    b.push(0.0);
    triplets.push((n_eq + 2, 0, 1.0));
    b.push(lambda_upper_bound(lambda0, delta));
    push_psd_rows(&mut triplets, &mut b, n);
    let cones = vec![ConeBlock::Zero(n_eq + 1), ConeBlock::Nonneg(2), ConeBlock::Psd(n)];
    ConicProgram::new(
        1 + svec_len(n),
        vec![(0, -1.0)],
        triplets,
        b,
        cones,
        layout(n),
        Some(metadata(inst, ProgramVariant::Constrained { lambda0, delta })),
    )
}

/// For every row of `to`, the row of `from` holding the same constraint (if
/// any). Supports identical layouts and unconstrained → constrained.
pub fn warm_row_map(from: &ConicProgram, to: &ConicProgram) -> Result<Vec<Option<usize>>> {
    if from.n_vars() != to.n_vars() {
        return Err(Error::Mismatch("programs have different variable counts".into()));
    }
    if from.cones() == to.cones() {
        return Ok((0..to.n_rows()).map(Some).collect());
    }
    let (Some(mf), Some(mt)) = (from.metadata(), to.metadata()) else {
        return Err(Error::Mismatch("cannot map rows between unrelated programs".into()));
    };
    if mf.ball_hash != mt.ball_hash
        || mf.variant != ProgramVariant::Unconstrained
        || !matches!(mt.variant, ProgramVariant::Constrained { .. })
    {
        return Err(Error::Mismatch("warm start needs the unconstrained program of the same instance".into()));
    }
    let n_eq = mf.product_size;
    let psd = svec_len(mf.basis_size);
    let mut map: Vec<Option<usize>> = (0..n_eq).map(Some).collect();
    map.push(None); // Σ P_ij = 0
    map.push(Some(n_eq)); // λ ≥ 0
    map.push(None); // λ ≤ (1−δ)λ₀
    map.extend((0..psd).map(|k| Some(n_eq + 1 + k)));
    Ok(map)
}
