//! The iteration matrix `σI + Aᵀ R A`, factorized once per step size.
//!
//! Rows with many entries would make `AᵀRA` dense; they are kept out of the
//! sparse Cholesky factor and added back through a Woodbury correction.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};

use super::csr::Csr;
use crate::error::{Error, Result};

pub(crate) struct LinearSystem {
    n: usize,
    sparse_rows: Vec<usize>,
    dense_rows: Vec<usize>,
    /// Row and position pairs feeding each stored lower-triangle value, in
    /// the order of `pattern`.
    contributions: Vec<Contribution>,
    symbolic_mat: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    symbolic: SymbolicLlt<usize>,
    llt: Option<Llt<usize, f64>>,
    woodbury: Option<Woodbury>,
}

enum Contribution {
    Diagonal,
    Product { row: usize, a: usize, b: usize },
}

struct Woodbury {
    /// `M0^-1 A_dᵀ`, one column per dense row.
    w: Mat<f64>,
    cap: faer::linalg::solvers::Llt<f64>,
}

fn is_dense(nnz: usize, n: usize) -> bool {
    nnz * nnz > 8 * n + 10_000
}

impl LinearSystem {
    pub(crate) fn new(a: &Csr) -> Result<LinearSystem> {
        let n = a.ncols;
        let (mut sparse_rows, mut dense_rows) = (Vec::new(), Vec::new());
        for i in 0..a.nrows {
            if is_dense(a.row_len(i), n) {
                dense_rows.push(i);
            } else {
                sparse_rows.push(i);
            }
        }
        let mut pairs = Vec::new();
        let mut contributions = Vec::new();
        for j in 0..n {
            pairs.push(Pair::new(j, j));
            contributions.push(Contribution::Diagonal);
        }
        for &i in &sparse_rows {
            let (lo, hi) = a.row_range(i);
            for p in lo..hi {
                for q in lo..=p {
                    let (cp, cq) = (a.cols[p], a.cols[q]);
                    let (r, c) = if cp >= cq { (cp, cq) } else { (cq, cp) };
                    pairs.push(Pair::new(r, c));
                    contributions.push(Contribution::Product { row: i, a: p, b: q });
                }
            }
        }
        let (symbolic_mat, argsort) = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
            .map_err(|e| Error::Numerical(format!("sparse pattern: {e:?}")))?;
        let symbolic = SymbolicLlt::try_new(symbolic_mat.as_ref(), Side::Lower)
            .map_err(|e| Error::Numerical(format!("symbolic factorization: {e:?}")))?;
        Ok(LinearSystem {
            n,
            sparse_rows,
            dense_rows,
            contributions,
            symbolic_mat,
            argsort,
            symbolic,
            llt: None,
            woodbury: None,
        })
    }

    #[cfg(test)]
    pub(crate) fn dense_row_count(&self) -> usize {
        self.dense_rows.len()
    }

    pub(crate) fn factor(&mut self, a: &Csr, sigma: f64, rho: &[f64]) -> Result<()> {
        debug_assert_eq!(self.sparse_rows.len() + self.dense_rows.len(), a.nrows);
        let vals: Vec<f64> = self
            .contributions
            .iter()
            .map(|c| match *c {
                Contribution::Diagonal => sigma,
                Contribution::Product { row, a: p, b: q } => {
                    // off-diagonal pairs of a row appear once but hold a_p a_q
                    rho[row] * a.vals[p] * a.vals[q]
                }
            })
            .collect();
        let m0 = SparseColMat::new_from_argsort(self.symbolic_mat.clone(), &self.argsort, &vals)
            .map_err(|e| Error::Numerical(format!("assembly: {e:?}")))?;
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), m0.as_ref(), Side::Lower)
            .map_err(|e| Error::Numerical(format!("Cholesky factorization failed: {e:?}")))?;
        self.llt = Some(llt);
        self.woodbury = None;
        if !self.dense_rows.is_empty() {
            let k = self.dense_rows.len();
            let mut w = Mat::<f64>::zeros(self.n, k);
            for (t, &i) in self.dense_rows.iter().enumerate() {
                let (lo, hi) = a.row_range(i);
                for p in lo..hi {
                    w[(a.cols[p], t)] = a.vals[p];
                }
            }
            self.llt.as_ref().unwrap().solve_in_place(w.as_mut());
            let cap = Mat::from_fn(k, k, |s, t| {
                let (lo, hi) = a.row_range(self.dense_rows[s]);
                let dot: f64 = (lo..hi).map(|p| a.vals[p] * w[(a.cols[p], t)]).sum();
                dot + if s == t { 1.0 / rho[self.dense_rows[s]] } else { 0.0 }
            });
            let cap = cap
                .llt(Side::Lower)
                .map_err(|e| Error::Numerical(format!("capacitance factorization failed: {e:?}")))?;
            self.woodbury = Some(Woodbury { w, cap });
        }
        Ok(())
    }

    pub(crate) fn solve(&self, a: &Csr, rhs: &mut [f64]) {
        let llt = self.llt.as_ref().expect("factor before solve");
        let mut z = Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        llt.solve_in_place(z.as_mut());
        if let Some(wb) = &self.woodbury {
            let k = self.dense_rows.len();
            let mut t = Mat::from_fn(k, 1, |s, _| {
                let (lo, hi) = a.row_range(self.dense_rows[s]);
                (lo..hi).map(|p| a.vals[p] * z[(a.cols[p], 0)]).sum::<f64>()
            });
            wb.cap.solve_in_place(t.as_mut());
            z -= &wb.w * &t;
        }
        for (i, r) in rhs.iter_mut().enumerate() {
            *r = z[(i, 0)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_normal_equations() {
        // a dense first row forces the Woodbury path
        let n = 200;
        let mut trip = Vec::new();
        for j in 0..n {
            trip.push((0, j, 1.0 + j as f64 / n as f64));
            trip.push((1 + j, j, -1.0));
            trip.push((1 + j, (j + 1) % n, 0.5));
        }
        trip.sort_by_key(|t| (t.0, t.1));
        let a = Csr::from_sorted(n + 1, n, &trip);
        let mut sys = LinearSystem::new(&a).unwrap();
        assert_eq!(sys.dense_row_count(), 1);
        let rho: Vec<f64> = (0..=n).map(|i| if i == 0 { 100.0 } else { 0.3 }).collect();
        sys.factor(&a, 1e-3, &rho).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        // rhs = (σI + AᵀRA) x
        let ax = a.mul(&x);
        let rax: Vec<f64> = ax.iter().zip(&rho).map(|(v, r)| v * r).collect();
        let mut rhs = a.mul_t(&rax);
        for (r, xi) in rhs.iter_mut().zip(&x) {
            *r += 1e-3 * xi;
        }
        sys.solve(&a, &mut rhs);
        for (u, v) in rhs.iter().zip(&x) {
            assert!((u - v).abs() < 1e-8, "{u} vs {v}");
        }
    }
}
