//! From an approximate Gram matrix to a rigorous lower bound on `λ(G,S)`.
//!
//! 1. `Q = Re(√P₀)` by eigenvalue clamping ([`sqrt_psd_real`]).
//! 2. Entrywise dyadic rounding to denominator `2^k` ([`rationalize`]).
//! 3. Exact mean subtraction per column, so every `ξ_i = x·q_i` lies in the
//!    augmentation ideal ([`project_augmentation`]).
//! 4. `r = Δ² − λΔ − Σ ξ_i* ξ_i` enclosed in interval arithmetic
//!    ([`compute_residual`]).
//! 5. `λ(G,S) ≥ λ − prec − 2^m ‖r‖₁` ([`certified_bound`]).

mod certificate;

use std::sync::Arc;

use faer::{Mat, Side};
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::group::{Ball, GeneratingSet};
use crate::group_ring::GroupRingElement;
use crate::numerics::{float_to_rational_truncated, rational_to_interval, BigRational, Interval};
use crate::sdp::SosInstance;

pub use certificate::{certify, verify, Certificate, CertifySettings, Provenance, VerifyError, CERTIFICATE_FORMAT};

/// Symmetric square root of the PSD part of `p0` (row-major), with negative
/// eigenvalues clamped to zero.
pub fn sqrt_psd_real(p0: &[f64], side: usize) -> Result<Vec<f64>> {
    if p0.len() != side * side {
        return Err(Error::Mismatch(format!("expected {} entries, got {}", side * side, p0.len())));
    }
    if p0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Gram matrix has non-finite entries".into()));
    }
    let mat = Mat::from_fn(side, side, |i, j| 0.5 * (p0[i * side + j] + p0[j * side + i]));
    let eig =
        mat.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let mu = eig.S().column_vector();
    let u = eig.U();
    let keep: Vec<usize> = (0..side).filter(|&k| mu[k] > 0.0).collect();
    // W Wᵀ = U diag(√μ) Uᵀ
    let w = Mat::from_fn(side, keep.len(), |i, k| u[(i, keep[k])] * mu[keep[k]].sqrt().sqrt());
    let q = &w * w.transpose();
    let mut out = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..=i {
            let v = 0.5 * (q[(i, j)] + q[(j, i)]);
            out[i * side + j] = v;
            out[j * side + i] = v;
        }
    }
    Ok(out)
}

/// Dense rational matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.entries[i * self.cols + j]
    }

    pub fn column_sum(&self, j: usize) -> BigRational {
        (0..self.rows).fold(BigRational::zero(), |acc, i| acc + self.get(i, j))
    }
}

/// Rounds every entry to the nearest multiple of `2^-bits`.
pub fn rationalize(q: &[f64], rows: usize, cols: usize, bits: u32) -> Result<RationalMatrix> {
    if q.len() != rows * cols {
        return Err(Error::Mismatch(format!("expected {} entries, got {}", rows * cols, q.len())));
    }
    let entries = q.iter().map(|&v| float_to_rational_truncated(v, bits)).collect::<Result<Vec<_>>>()?;
    Ok(RationalMatrix { rows, cols, entries })
}

/// Subtracts from each column its mean: the orthogonal projection onto
/// zero-sum columns.
pub fn project_augmentation(q: &RationalMatrix) -> RationalMatrix {
    let n = BigRational::from_integer(q.rows.max(1).into());
    let mut out = q.clone();
    for j in 0..q.cols {
        let mean = q.column_sum(j) / &n;
        if mean.is_zero() {
            continue;
        }
        for i in 0..q.rows {
            out.entries[i * q.cols + j] -= &mean;
        }
    }
    out
}

/// Rational SOS witness: columns `q_i` of `Q`, each representing
/// `ξ_i = Σ_j q_ji x_j` over the basis ball.
#[derive(Clone, Debug)]
pub struct SosWitness {
    pub basis: Arc<Ball>,
    pub q: RationalMatrix,
    pub lambda_used: BigRational,
}

impl SosWitness {
    pub fn new(basis: Arc<Ball>, q: RationalMatrix, lambda_used: BigRational) -> Result<SosWitness> {
        if q.rows != basis.len() {
            return Err(Error::Mismatch(format!("witness has {} rows, basis has {}", q.rows, basis.len())));
        }
        if let Some(j) = (0..q.cols).find(|&j| !q.column_sum(j).is_zero()) {
            return Err(Error::InvalidArgument(format!("witness column {j} does not sum to zero")));
        }
        Ok(SosWitness { basis, q, lambda_used })
    }

    /// Steps 1–3 applied to `p0` with `λ = lambda_used`.
    pub fn from_gram(basis: Arc<Ball>, p0: &[f64], bits: u32, lambda_used: BigRational) -> Result<SosWitness> {
        let side = basis.len();
        let q = sqrt_psd_real(p0, side)?;
        let q = project_augmentation(&rationalize(&q, side, side, bits)?);
        SosWitness::new(basis, q, lambda_used)
    }
}

/// Encloses `r = Δ² − λΔ − Σ ξ_i* ξ_i` coefficientwise and bounds `‖r‖₁`
/// from above.
pub fn compute_residual(inst: &SosInstance, witness: &SosWitness) -> Result<(GroupRingElement<Interval>, f64)> {
    let basis = inst.basis();
    if witness.basis.id() != basis.id() {
        return Err(Error::SupportMismatch("witness basis differs from the instance basis".into()));
    }
    let (n, cols) = (witness.q.rows, witness.q.cols);
    let qi: Vec<Interval> = witness.q.entries.iter().map(rational_to_interval).collect::<Result<_>>()?;
    let lam = rational_to_interval(&witness.lambda_used)?;
    let product = inst.product();
    let lap = inst.laplacian();
    let lap_sq = inst.laplacian_squared();
    let mut acc: Vec<Interval> = (0..product.len())
        .map(|g| Ok(rational_to_interval(lap_sq.coeff(g))? - lam * rational_to_interval(lap.coeff(g))?))
        .collect::<Result<_>>()?;
    let table = inst.table();
    // Σ_i ξ_i* ξ_i = Σ_{j,k} (QQᵀ)_jk x_j^-1 x_k
    let mut row = vec![Interval::zero(); n];
    for j in 0..n {
        let qj = &qi[j * cols..(j + 1) * cols];
        for (k, slot) in row.iter_mut().enumerate() {
            let qk = &qi[k * cols..(k + 1) * cols];
            *slot = qj.iter().zip(qk).fold(Interval::zero(), |s, (a, b)| s + *a * *b);
        }
        for (k, &g) in table.row(j).iter().enumerate() {
            let g = g as usize;
            acc[g] = acc[g] - row[k];
        }
    }
    let l1 = acc.iter().fold(Interval::zero(), |s, r| s + r.abs()).hi();
    if !l1.is_finite() {
        return Err(Error::NonFinite("residual norm overflowed".into()));
    }
    Ok((GroupRingElement::from_coeffs(product.clone(), acc)?, l1))
}

/// `χ(S)`: 1 if some generator has order two, else 2.
pub fn chi(generators: &GeneratingSet) -> Result<u32> {
    Ok(if generators.has_involution()? { 1 } else { 2 })
}

/// `m = max_{g ∈ supp} 2·wl(g) − χ(S)`, with the support taken to be the whole ball.
pub fn m_of(support: &Ball, generators: &GeneratingSet) -> Result<u32> {
    Ok((2 * support.max_word_length()).saturating_sub(chi(generators)?))
}

/// `lambda_used − prec − 2^m · r_l1_upper`, rounded down.
pub fn certified_bound(lambda_used: f64, prec: f64, r_l1_upper: f64, m: u32) -> f64 {
    let penalty = Interval::point(2f64.powi(m as i32)) * Interval::point(r_l1_upper);
    (Interval::point(lambda_used) - Interval::point(prec) - penalty).lo()
}

/// `√(2λ/|S|)`, rounded down; zero for non-positive `λ`.
pub fn kazhdan_from_lambda(lambda: f64, s_size: usize) -> f64 {
    if lambda.is_nan() || lambda <= 0.0 || s_size == 0 {
        return 0.0;
    }
    let exact = |x: f64| BigRational::from_float(x).expect("finite");
    let target = exact(lambda) * BigRational::new(2.into(), (s_size as i64).into());
    let mut root = crate::numerics::round_down(&target).unwrap_or(f64::MAX).sqrt();
    while root > 0.0 && exact(root) * exact(root) > target {
        root = root.next_down();
    }
    root
}
