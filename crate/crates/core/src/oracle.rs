//! Exact spectral gaps of finite groups through the regular representation.
//!
//! The regular representation contains every irreducible representation, so
//! the smallest nonzero eigenvalue of `Δ` acting on `ℓ²(G)` is `λ(G, S)`.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{generate_ball_with, BallOptions, GeneratingSet};

/// Cayley table of a finite group; element 0 is the identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroupTableRepr", into = "GroupTableRepr")]
pub struct FiniteGroupTable {
    order: usize,
    product: Vec<u32>,
    inverse: Vec<u32>,
    generator_indices: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct GroupTableRepr {
    format: String,
    order: usize,
    generator_indices: Vec<u32>,
    inverse: Vec<u32>,
    rows: Vec<Vec<u32>>,
}

pub const GROUP_TABLE_FORMAT: &str = "sosgap-group-table/1";

impl TryFrom<GroupTableRepr> for FiniteGroupTable {
    type Error = Error;
    fn try_from(r: GroupTableRepr) -> Result<Self> {
        if r.format != GROUP_TABLE_FORMAT {
            return Err(Error::Schema(format!("unexpected format {:?}", r.format)));
        }
        if r.rows.len() != r.order || r.rows.iter().any(|row| row.len() != r.order) {
            return Err(Error::Schema("group table must be order x order".into()));
        }
        FiniteGroupTable::new(r.rows.concat(), r.inverse, r.generator_indices)
    }
}

impl From<FiniteGroupTable> for GroupTableRepr {
    fn from(t: FiniteGroupTable) -> Self {
        GroupTableRepr {
            format: GROUP_TABLE_FORMAT.into(),
            order: t.order,
            generator_indices: t.generator_indices,
            inverse: t.inverse,
            rows: t.product.chunks(t.order.max(1)).map(|r| r.to_vec()).collect(),
        }
    }
}

impl FiniteGroupTable {
    /// Validates the group axioms: unit row and column at 0, two-sided
    /// inverses, and associativity on a deterministic sample of triples.
    pub fn new(product: Vec<u32>, inverse: Vec<u32>, generator_indices: Vec<u32>) -> Result<Self> {
        let n = inverse.len();
        let bad = |m: &str| Err(Error::Schema(format!("group table: {m}")));
        if n == 0 || product.len() != n * n {
            return bad("size mismatch");
        }
        if product.iter().chain(&inverse).chain(&generator_indices).any(|&v| v as usize >= n) {
            return bad("index out of range");
        }
        let t = FiniteGroupTable { order: n, product, inverse, generator_indices };
        for g in 0..n {
            if t.mul(0, g) != g || t.mul(g, 0) != g {
                return bad("element 0 is not the identity");
            }
            let gi = t.inverse[g] as usize;
            if t.mul(g, gi) != 0 || t.mul(gi, g) != 0 {
                return bad("inverse table is inconsistent");
            }
        }
        let step = (n / 17).max(1);
        for a in (0..n).step_by(step) {
            for b in (0..n).step_by(step) {
                for c in (0..n).step_by(step) {
                    if t.mul(t.mul(a, b), c) != t.mul(a, t.mul(b, c)) {
                        return bad("multiplication is not associative");
                    }
                }
            }
        }
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.product[a * self.order + b] as usize
    }

    pub fn inverse(&self, a: usize) -> usize {
        self.inverse[a] as usize
    }

    pub fn generator_indices(&self) -> &[u32] {
        &self.generator_indices
    }

    /// The same group with elements renamed by `perm` (`perm[old] = new`, `perm[0] = 0`).
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.order;
        let mut product = vec![0u32; n * n];
        let mut inverse = vec![0u32; n];
        for a in 0..n {
            inverse[perm[a]] = perm[self.inverse(a)] as u32;
            for b in 0..n {
                product[perm[a] * n + perm[b]] = perm[self.mul(a, b)] as u32;
            }
        }
        let gens = self.generator_indices.iter().map(|&g| perm[g as usize] as u32).collect();
        FiniteGroupTable::new(product, inverse, gens)
    }
}

/// Closure of `S` under multiplication, ordered as the word-metric ball.
pub fn enumerate_group(generators: &GeneratingSet, cap: usize) -> Result<FiniteGroupTable> {
    let options = BallOptions { max_elements: cap };
    let radius = u32::try_from(cap).unwrap_or(u32::MAX);
    let ball = generate_ball_with(generators, radius, &options)?;
    let n = ball.len();
    let elements: Vec<_> = ball.elements().collect();
    let mut product = Vec::with_capacity(n * n);
    for a in &elements {
        for b in &elements {
            let ab = a.multiply(b)?;
            let pos = ball
                .index_of(&ab)
                .ok_or_else(|| Error::MissingElement(format!("{ab} escapes the enumerated group")))?;
            product.push(pos as u32);
        }
    }
    let inverse = ball
        .inverse_positions()
        .ok_or_else(|| Error::NonSymmetric("enumerated set is not closed under inversion".into()))?
        .to_vec();
    let generator_indices = generators
        .elements()
        .iter()
        .map(|s| ball.index_of(s).map(|i| i as u32))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::MissingElement("generator outside the group".into()))?;
    FiniteGroupTable::new(product, inverse, generator_indices)
}

/// Dense Laplacian `|S|·I − A` of the right Cayley graph, where
/// `A[g][h]` counts generators `s` with `h = g s`.
pub fn laplacian_matrix(table: &FiniteGroupTable) -> Mat<f64> {
    let n = table.order();
    let mut m = Mat::<f64>::zeros(n, n);
    let k = table.generator_indices().len() as f64;
    for g in 0..n {
        m[(g, g)] += k;
        for &s in table.generator_indices() {
            let h = table.mul(g, s as usize);
            m[(g, h)] -= 1.0;
        }
    }
    m
}

/// All eigenvalues of the regular-representation Laplacian, ascending.
pub fn laplacian_spectrum(table: &FiniteGroupTable) -> Result<Vec<f64>> {
    let m = laplacian_matrix(table);
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let s = eig.S();
    let mut values: Vec<f64> = (0..table.order()).map(|i| s[i]).collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Smallest nonzero Laplacian eigenvalue; eigenvalues within
/// `1e-8·‖Δ‖` of zero count as zero and must have multiplicity one.
pub fn spectral_gap_exact(table: &FiniteGroupTable) -> Result<f64> {
    let spectrum = laplacian_spectrum(table)?;
    let norm = 2.0 * table.generator_indices().len() as f64;
    let tol = 1e-8 * norm.max(1.0);
    let zeros = spectrum.iter().filter(|v| v.abs() <= tol).count();
    if zeros != 1 {
        return Err(Error::InvalidArgument(format!(
            "Laplacian kernel has dimension {zeros}; the generators do not generate the group"
        )));
    }
    spectrum.iter().copied().find(|v| *v > tol).ok_or_else(|| Error::Numerical("no nonzero eigenvalue".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{elementary_generators, GroupElement, Ring};

    fn cyclic(ring: Ring, t: Vec<i64>) -> GeneratingSet {
        let t = GroupElement::new(2, ring, t).unwrap();
        let inv = t.inverse().unwrap();
        if inv == t {
            GeneratingSet::new(vec![t]).unwrap()
        } else {
            GeneratingSet::new(vec![t, inv]).unwrap()
        }
    }

    #[test]
    fn orders_of_small_groups() {
        let sl23 = elementary_generators(2, Ring::IntegersModP(3)).unwrap();
        assert_eq!(enumerate_group(&sl23, 1000).unwrap().order(), 24);
        let sl27 = elementary_generators(2, Ring::IntegersModP(7)).unwrap();
        assert_eq!(enumerate_group(&sl27, 1000).unwrap().order(), 336);
        let c4 = cyclic(Ring::Integers, vec![0, -1, 1, 0]);
        assert_eq!(enumerate_group(&c4, 100).unwrap().order(), 4);
    }

    #[test]
    fn infinite_group_hits_cap() {
        let s = elementary_generators(2, Ring::Integers).unwrap();
        assert!(matches!(enumerate_group(&s, 500), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn cyclic_gaps() {
        let c3 = cyclic(Ring::IntegersModP(3), vec![1, 1, 0, 1]);
        let gap = spectral_gap_exact(&enumerate_group(&c3, 10).unwrap()).unwrap();
        assert!((gap - 3.0).abs() < 1e-12);
        let c4 = cyclic(Ring::Integers, vec![0, -1, 1, 0]);
        let t = enumerate_group(&c4, 10).unwrap();
        let spectrum = laplacian_spectrum(&t).unwrap();
        let expected = [0.0, 2.0, 2.0, 4.0];
        for (a, b) in spectrum.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((spectral_gap_exact(&t).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_nonnegative_and_relabel_invariant() {
        let s = elementary_generators(2, Ring::IntegersModP(3)).unwrap();
        let t = enumerate_group(&s, 100).unwrap();
        let spectrum = laplacian_spectrum(&t).unwrap();
        assert!(spectrum.iter().all(|&v| v >= -1e-10 * 8.0));
        let n = t.order();
        let perm: Vec<usize> = (0..n).map(|i| if i == 0 { 0 } else { (i * 5) % (n - 1) + 1 }).collect();
        let mut check = perm.clone();
        check.sort();
        assert_eq!(check, (0..n).collect::<Vec<_>>());
        let relabeled = t.relabel(&perm).unwrap();
        let a = spectral_gap_exact(&t).unwrap();
        let b = spectral_gap_exact(&relabeled).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn non_generating_set_reported() {
        // S = {t, t^-1} generating a proper subgroup, but we feed a table
        // of the whole group with only that generator.
        let s = elementary_generators(2, Ring::IntegersModP(3)).unwrap();
        let t = enumerate_group(&s, 100).unwrap();
        let sub =
            FiniteGroupTable::new(t.product.clone(), t.inverse.clone(), t.generator_indices()[..2].to_vec()).unwrap();
        assert!(spectral_gap_exact(&sub).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = elementary_generators(2, Ring::IntegersModP(3)).unwrap();
        let t = enumerate_group(&s, 100).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: FiniteGroupTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        v["rows"][0][1] = serde_json::json!(2);
        assert!(serde_json::from_value::<FiniteGroupTable>(v).is_err());
    }

    #[test]
    fn pinned_sl2_gaps() {
        // first computed with this eigensolver; they match 3-√3, 3-√5, 2-√2
        let pinned = [(3, 1.267949192431122), (5, 0.763932022500208), (7, 0.585786437626902)];
        for (p, expected) in pinned {
            let s = elementary_generators(2, Ring::IntegersModP(p)).unwrap();
            let t = enumerate_group(&s, 10_000).unwrap();
            assert!((spectral_gap_exact(&t).unwrap() - expected).abs() < 1e-10, "p = {p}");
        }
    }
}
