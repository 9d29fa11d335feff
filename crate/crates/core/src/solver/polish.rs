//! Face polishing for programs with a single Gram-matrix block.
//!
//! First-order iterates satisfy the equality rows only to the solver
//! tolerance. When the PSD variable `P` sits on a face `P = V X Vᵀ` with
//! `X ≻ 0`, the equality rows are linear in `X` and can be solved to
//! roundoff by least squares (CGLS) while `X` stays positive definite.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::admm::{relative_residuals, SolverState};
use super::cones::{orthonormal, project_cone};
use super::csr::Csr;
use crate::error::{Error, Result};
use crate::sdp::svec::{smat, svec, svec_len};
use crate::sdp::{ConeBlock, ConicProgram};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolishSettings {
    pub enabled: bool,
    /// Eigenvalue cut-offs, relative to the largest eigenvalue, tried in order.
    pub thresholds: Vec<f64>,
    pub max_cg_iters: usize,
}

impl Default for PolishSettings {
    fn default() -> Self {
        PolishSettings { enabled: true, thresholds: vec![1e-9, 1e-7, 1e-5, 1e-3], max_cg_iters: 2000 }
    }
}

/// A polished iterate and its relative residuals.
#[derive(Clone, Debug)]
pub struct Polished {
    pub state: SolverState,
    pub residuals: (f64, f64, f64),
    pub rank: usize,
}

struct GramLayout {
    offset: usize,
    side: usize,
    zero_rows: usize,
}

fn layout(program: &ConicProgram) -> Result<GramLayout> {
    let bad = |m: &str| Error::InvalidArgument(format!("cannot polish: {m}"));
    let p = program.variable("P").ok_or_else(|| bad("no P variable"))?;
    let psd: Vec<usize> =
        program.cones().iter().filter_map(|c| if let ConeBlock::Psd(k) = c { Some(*k) } else { None }).collect();
    let [side] = psd[..] else { return Err(bad("need exactly one PSD block")) };
    if svec_len(side) != p.len {
        return Err(bad("P does not match the PSD block"));
    }
    let zero_rows = program.zero_rows();
    let psd0 = program.n_rows() - p.len;
    if !matches!(program.cones().last(), Some(ConeBlock::Psd(_))) {
        return Err(bad("PSD block must come last"));
    }
    // PSD rows are exactly −svec(P) + s = 0
    for &(r, c, v) in program.triplets() {
        let in_p = (p.offset..p.offset + p.len).contains(&c);
        if r >= psd0 {
            if !(in_p && c - p.offset == r - psd0 && v == -1.0) {
                return Err(bad("PSD rows are not −svec(P)"));
            }
        } else if r >= zero_rows && in_p {
            return Err(bad("inequality rows involve P"));
        }
    }
    if program.b()[psd0..].iter().any(|&b| b != 0.0) {
        return Err(bad("PSD rows have a nonzero offset"));
    }
    Ok(GramLayout { offset: p.offset, side, zero_rows })
}

fn sym_mat(v: &[f64], side: usize) -> Mat<f64> {
    let m = smat(v, side);
    Mat::from_fn(side, side, |i, j| m[i * side + j])
}

fn to_svec(m: &Mat<f64>) -> Vec<f64> {
    let n = m.nrows();
    let dense: Vec<f64> = (0..n * n).map(|k| 0.5 * (m[(k / n, k % n)] + m[(k % n, k / n)])).collect();
    svec(&dense, n)
}

fn frob(m: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s
}

/// Re-solves the equality rows on numerical faces of `P`, keeping every
/// other variable fixed. `kernel` lists vectors known to be in the kernel of
/// every feasible `P`; they are projected out of the face. Each dual in
/// `duals` (and the state's own) is scored and the best is kept. Returns the
/// polished candidate with the smallest `max(primal, dual, gap)`, or `None`
/// if no face kept `X` positive definite.
pub fn polish(
    program: &ConicProgram,
    state: &SolverState,
    kernel: &[Vec<f64>],
    duals: &[Vec<f64>],
    settings: &PolishSettings,
) -> Result<Option<Polished>> {
    let lay = layout(program)?;
    let (n, side, off) = (program.n_vars(), lay.side, lay.offset);
    let plen = svec_len(side);
    if state.x.len() != n || state.y.len() != program.n_rows() {
        return Err(Error::Mismatch("state does not belong to the program".into()));
    }
    if kernel.iter().any(|k| k.len() != side) {
        return Err(Error::Mismatch("kernel vectors must have the side of P".into()));
    }
    // zero rows split into the P part and the rest
    let mut p_trip = Vec::new();
    let mut fixed = vec![0.0; lay.zero_rows];
    for &(r, c, v) in program.triplets() {
        if r >= lay.zero_rows {
            break;
        }
        if (off..off + plen).contains(&c) {
            p_trip.push((r, c - off, v));
        } else {
            fixed[r] += v * state.x[c];
        }
    }
    let a = Csr::from_sorted(lay.zero_rows, plen, &p_trip);
    let target: Vec<f64> = (0..lay.zero_rows).map(|r| program.b()[r] - fixed[r]).collect();

    let p0 = sym_mat(&state.x[off..off + plen], side);
    let eig = p0.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let mu = eig.S().column_vector();
    let u = eig.U();
    let top = (0..side).map(|k| mu[k]).fold(0.0, f64::max);
    if !(top > 0.0) {
        return Ok(None);
    }
    // orthonormal basis of the kernel complement
    let kernel_basis = orthonormal(kernel);

    let mut duals_all: Vec<&[f64]> = vec![&state.y];
    duals_all.extend(duals.iter().map(|d| d.as_slice()));
    if duals_all.iter().any(|d| d.len() != program.n_rows()) {
        return Err(Error::Mismatch("dual candidate has the wrong length".into()));
    }
    let q = program.objective_dense();
    let mut best: Option<Polished> = None;
    for &tau in &settings.thresholds {
        let keep: Vec<usize> = (0..side).filter(|&k| mu[k] > tau * top).collect();
        if keep.is_empty() {
            continue;
        }
        let mut v = Mat::from_fn(side, keep.len(), |i, k| u[(i, keep[k])]);
        for kv in &kernel_basis {
            for c in 0..v.ncols() {
                let d: f64 = (0..side).map(|i| kv[i] * v[(i, c)]).sum();
                for i in 0..side {
                    v[(i, c)] -= d * kv[i];
                }
            }
        }
        let v = match thin_orthonormal(&v) {
            Some(v) => v,
            None => continue,
        };
        let r = v.ncols();
        let x0 = v.transpose() * &p0 * &v;
        let forward = |x: &Mat<f64>| -> Vec<f64> { a.mul(&to_svec(&(&v * x * v.transpose()))) };
        let adjoint = |rho: &[f64]| -> Mat<f64> {
            let m = sym_mat(&a.mul_t(rho), side);
            v.transpose() * &m * &v
        };
        let base = forward(&x0);
        let mut res: Vec<f64> = target.iter().zip(&base).map(|(t, b)| t - b).collect();
        let scale = target.iter().fold(1.0f64, |m, t| m.max(t.abs()));
        // CGLS on B(ΔX) = res
        let mut dx = Mat::<f64>::zeros(r, r);
        let mut s = adjoint(&res);
        let mut p = s.clone();
        let mut gamma = frob(&s);
        for _ in 0..settings.max_cg_iters {
            if res.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= 1e-15 * scale || gamma == 0.0 {
                break;
            }
            let qv = forward(&p);
            let qq: f64 = qv.iter().map(|v| v * v).sum();
            if qq == 0.0 {
                break;
            }
            let alpha = gamma / qq;
            dx += alpha * &p;
            for (ri, qi) in res.iter_mut().zip(&qv) {
                *ri -= alpha * qi;
            }
            s = adjoint(&res);
            let g = frob(&s);
            p = &s + (g / gamma) * &p;
            gamma = g;
        }
        let x = &x0 + &dx;
        let xs = Mat::from_fn(r, r, |i, j| 0.5 * (x[(i, j)] + x[(j, i)]));
        let min_eig = xs
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?
            .S()
            .column_vector()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !(min_eig > 0.0) {
            continue;
        }
        let mut xn = state.x.clone();
        xn[off..off + plen].copy_from_slice(&to_svec(&(&v * &xs * v.transpose())));
        let ax = program.apply(&xn);
        let mut sn: Vec<f64> = program.b().iter().zip(&ax).map(|(b, a)| b - a).collect();
        sn[..lay.zero_rows].fill(0.0);
        project_cone(program.cones(), &mut sn)?;
        for y in &duals_all {
            let res = relative_residuals(program, &q, &xn, &sn, y);
            let merit = res.0.max(res.1).max(res.2);
            if best.as_ref().is_none_or(|b| merit < b.residuals.0.max(b.residuals.1).max(b.residuals.2)) {
                best = Some(Polished {
                    state: SolverState { x: xn.clone(), s: sn.clone(), y: y.to_vec(), ..state.clone() },
                    residuals: res,
                    rank: r,
                });
            }
        }
    }
    Ok(best)
}

/// Orthonormal basis of the column space via a thin QR; `None` if rank-deficient.
fn thin_orthonormal(v: &Mat<f64>) -> Option<Mat<f64>> {
    let qr = v.qr();
    let rr = qr.thin_R();
    let d = (0..rr.ncols()).map(|i| rr[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(d > 1e-8) {
        return None;
    }
    Some(qr.compute_thin_Q())
}
