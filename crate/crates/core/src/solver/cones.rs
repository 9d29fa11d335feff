//! Projections onto the cone product and its pieces.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::sdp::svec::svec_pairs;
use crate::sdp::ConeBlock;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

/// Frobenius-nearest PSD matrix to a dense row-major symmetric matrix.
pub fn project_psd(m: &[f64], side: usize) -> Result<Vec<f64>> {
    if m.len() != side * side {
        return Err(Error::Mismatch(format!("expected {} entries, got {}", side * side, m.len())));
    }
    for i in 0..side {
        for j in 0..i {
            if m[i * side + j] != m[j * side + i] {
                return Err(Error::InvalidArgument("matrix is not symmetric".into()));
            }
        }
    }
    let mat = Mat::from_fn(side, side, |i, j| m[i * side + j]);
    let out = project_mat(mat)?;
    Ok((0..side * side).map(|k| out[(k / side, k % side)]).collect())
}

fn project_mat(mat: Mat<f64>) -> Result<Mat<f64>> {
    let side = mat.nrows();
    let eig =
        mat.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let mu = eig.S().column_vector();
    let u = eig.U();
    let neg: Vec<usize> = (0..side).filter(|&k| mu[k] < 0.0).collect();
    if neg.is_empty() {
        return Ok(mat);
    }
    if !mu.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("eigensolver returned non-finite values".into()));
    }
    // build from whichever eigenvalue group is smaller
    let pos: Vec<usize> = (0..side).filter(|&k| mu[k] > 0.0).collect();
    let mut out = Mat::<f64>::zeros(side, side);
    if pos.len() <= neg.len() {
        let w = Mat::from_fn(side, pos.len(), |i, k| u[(i, pos[k])] * mu[pos[k]].sqrt());
        out += &w * w.transpose();
    } else {
        let w = Mat::from_fn(side, neg.len(), |i, k| u[(i, neg[k])] * (-mu[neg[k]]).sqrt());
        out += &mat;
        out += &w * w.transpose();
    }
    for i in 0..side {
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Projects an svec in place.
pub(crate) fn project_psd_svec(v: &mut [f64], side: usize) -> Result<()> {
    let mut mat = Mat::<f64>::zeros(side, side);
    for ((r, c), &x) in svec_pairs(side).zip(v.iter()) {
        let val = if r == c { x } else { x * FRAC_1_SQRT_2 };
        mat[(r, c)] = val;
        mat[(c, r)] = val;
    }
    let out = project_mat(mat.clone())?;
    for ((r, c), x) in svec_pairs(side).zip(v.iter_mut()) {
        if out[(r, c)] != mat[(r, c)] {
            *x = if r == c { out[(r, c)] } else { out[(r, c)] * SQRT_2 };
        }
    }
    Ok(())
}

/// Projects an svec onto `{M ⪰ 0 : M k = 0 for k in kernel}`, the kernel
/// given as orthonormal vectors.
fn project_face_svec(v: &mut [f64], side: usize, kernel: &[Vec<f64>]) -> Result<()> {
    let mut mat = Mat::<f64>::zeros(side, side);
    for ((r, c), &x) in svec_pairs(side).zip(v.iter()) {
        let val = if r == c { x } else { x * FRAC_1_SQRT_2 };
        mat[(r, c)] = val;
        mat[(c, r)] = val;
    }
    // M ← (I − KKᵀ) M (I − KKᵀ)
    for k in kernel {
        let mk: Vec<f64> = (0..side).map(|i| (0..side).map(|j| mat[(i, j)] * k[j]).sum()).collect();
        let kmk: f64 = (0..side).map(|i| k[i] * mk[i]).sum();
        for i in 0..side {
            for j in 0..side {
                mat[(i, j)] += -mk[i] * k[j] - k[i] * mk[j] + kmk * k[i] * k[j];
            }
        }
    }
    let out = project_mat(mat)?;
    for ((r, c), x) in svec_pairs(side).zip(v.iter_mut()) {
        *x = if r == c { out[(r, c)] } else { out[(r, c)] * SQRT_2 };
    }
    Ok(())
}

/// A face of one PSD block: matrices whose kernel contains the given vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PsdFace {
    /// Index into the cone list.
    pub cone: usize,
    pub kernel: Vec<Vec<f64>>,
}

impl PsdFace {
    /// Checks the face against `cones` and orthonormalizes the kernel.
    pub(crate) fn normalized(&self, cones: &[ConeBlock]) -> Result<PsdFace> {
        let Some(&ConeBlock::Psd(side)) = cones.get(self.cone) else {
            return Err(Error::InvalidArgument(format!("cone {} is not a PSD block", self.cone)));
        };
        if self.kernel.iter().any(|k| k.len() != side || !k.iter().all(|x| x.is_finite())) {
            return Err(Error::Mismatch("kernel vectors must be finite and match the block side".into()));
        }
        Ok(PsdFace { cone: self.cone, kernel: orthonormal(&self.kernel) })
    }
}

/// Gram–Schmidt, dropping vectors that are (numerically) dependent.
pub(crate) fn orthonormal(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for o in &out {
            let d: f64 = o.iter().zip(&w).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(o).for_each(|(x, o)| *x -= d * o);
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            out.push(w.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// Projects `v` onto the product `K` described by `cones`.
pub(crate) fn project_cone(cones: &[ConeBlock], v: &mut [f64]) -> Result<()> {
    project_cone_faces(cones, &[], v)
}

/// As [`project_cone`], with the PSD blocks listed in `faces` replaced by
/// those faces. `faces` must be normalized.
pub(crate) fn project_cone_faces(cones: &[ConeBlock], faces: &[PsdFace], v: &mut [f64]) -> Result<()> {
    let mut at = 0;
    for (i, cone) in cones.iter().enumerate() {
        let d = cone.dim();
        let block = &mut v[at..at + d];
        match *cone {
            ConeBlock::Zero(_) => block.fill(0.0),
            ConeBlock::Nonneg(_) => block.iter_mut().for_each(|x| *x = x.max(0.0)),
            ConeBlock::Psd(side) => match faces.iter().find(|f| f.cone == i) {
                Some(f) if !f.kernel.is_empty() => project_face_svec(block, side, &f.kernel)?,
                _ => project_psd_svec(block, side)?,
            },
        }
        at += d;
    }
    Ok(())
}

/// Projects `v` onto the dual cone `K*` (zero rows are free).
pub(crate) fn project_dual_cone(cones: &[ConeBlock], v: &mut [f64]) -> Result<()> {
    let mut at = 0;
    for cone in cones {
        let d = cone.dim();
        let block = &mut v[at..at + d];
        match *cone {
            ConeBlock::Zero(_) => {}
            ConeBlock::Nonneg(_) => block.iter_mut().for_each(|x| *x = x.max(0.0)),
            ConeBlock::Psd(side) => project_psd_svec(block, side)?,
        }
        at += d;
    }
    Ok(())
}

/// Euclidean distance from `v` to `K`, or to `K*` when `dual` is set.
pub fn cone_distance(cones: &[ConeBlock], v: &[f64], dual: bool) -> Result<f64> {
    let mut p = v.to_vec();
    if dual {
        project_dual_cone(cones, &mut p)?;
    } else {
        project_cone(cones, &mut p)?;
    }
    Ok(v.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng, side: usize) -> Vec<f64> {
        let mut m = vec![0.0; side * side];
        for i in 0..side {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m[i * side + j] = v;
                m[j * side + i] = v;
            }
        }
        m
    }

    fn frob(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    fn min_eig(m: &[f64], side: usize) -> f64 {
        let mat = Mat::from_fn(side, side, |i, j| m[i * side + j]);
        let eig = mat.self_adjoint_eigen(Side::Lower).unwrap();
        eig.S().column_vector().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn clamps_negative_diagonal() {
        assert_eq!(project_psd(&[1.0, 0.0, 0.0, -2.0], 2).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn psd_input_is_fixed() {
        let m = [2.0, 1.0, 1.0, 2.0];
        assert_eq!(project_psd(&m, 2).unwrap(), m.to_vec());
        assert!(project_psd(&[1.0, 2.0, 0.0, 1.0], 2).is_err());
    }

    #[test]
    fn nearest_among_sampled_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for side in 1..8 {
            let m = random_symmetric(&mut rng, side);
            let p = project_psd(&m, side).unwrap();
            assert!(min_eig(&p, side) > -1e-12);
            let best = frob(&m, &p);
            for _ in 0..50 {
                // random PSD candidates near the projection
                let g = random_symmetric(&mut rng, side);
                let mut cand = p.clone();
                for i in 0..side {
                    for j in 0..side {
                        let gg: f64 = (0..side).map(|k| g[i * side + k] * g[j * side + k]).sum();
                        cand[i * side + j] += 0.1 * gg;
                    }
                }
                assert!(frob(&m, &cand) >= best - 1e-12);
            }
        }
    }

    #[test]
    fn svec_projection_agrees_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let side = 6;
        let m = random_symmetric(&mut rng, side);
        let mut v = crate::sdp::svec::svec(&m, side);
        project_psd_svec(&mut v, side).unwrap();
        let dense = project_psd(&m, side).unwrap();
        let back = crate::sdp::svec::smat(&v, side);
        assert!(frob(&back, &dense) < 1e-12);
        let cones = [ConeBlock::Zero(1), ConeBlock::Nonneg(2), ConeBlock::Psd(2)];
        let mut w = vec![3.0, -1.0, 2.0, 1.0, 0.0, -1.0];
        project_cone(&cones, &mut w).unwrap();
        assert_eq!(w, vec![0.0, 0.0, 2.0, 1.0, 0.0, 0.0]);
        assert!(cone_distance(&cones, &[3.0, 0.0, 0.0, 0.0, 0.0, 0.0], true).unwrap() == 0.0);
    }

    #[test]
    fn face_projection_is_nearest_in_face() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let side = 5;
        let face = PsdFace { cone: 0, kernel: vec![vec![1.0; side]] }.normalized(&[ConeBlock::Psd(side)]).unwrap();
        for _ in 0..20 {
            let m = random_symmetric(&mut rng, side);
            let mut v = crate::sdp::svec::svec(&m, side);
            project_cone_faces(&[ConeBlock::Psd(side)], std::slice::from_ref(&face), &mut v).unwrap();
            let p = crate::sdp::svec::smat(&v, side);
            assert!(min_eig(&p, side) > -1e-12);
            for i in 0..side {
                assert!((0..side).map(|j| p[i * side + j]).sum::<f64>().abs() < 1e-12);
            }
            // idempotent, and no farther than the plain projection of the centred matrix
            let mut again = v.clone();
            project_cone_faces(&[ConeBlock::Psd(side)], std::slice::from_ref(&face), &mut again).unwrap();
            assert!(frob(&again, &v) < 1e-12);
        }
        let bad = PsdFace { cone: 0, kernel: vec![vec![1.0; 3]] };
        assert!(bad.normalized(&[ConeBlock::Psd(side)]).is_err());
        assert!(PsdFace { cone: 0, kernel: vec![] }.normalized(&[ConeBlock::Zero(1)]).is_err());
    }
}
