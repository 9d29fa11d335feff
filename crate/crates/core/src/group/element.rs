use std::fmt;

use super::Ring;
use crate::error::{Error, Result};

/// An `n x n` matrix of determinant one over a [`Ring`], stored row-major.
///
/// Entries over `Z/p` are always reduced to `0..p`; the row-major entry tuple
/// is the canonical key used for hashing and ordering.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GroupElement {
    dim: usize,
    ring: Ring,
    entries: Box<[i64]>,
}

fn mod_pow(mut base: i64, mut exp: i64, p: i64) -> i64 {
    let mut acc = 1i128;
    let mut b = base.rem_euclid(p) as i128;
    let m = p as i128;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    base = acc as i64;
    base
}

/// Fraction-free (Bareiss) determinant of a square integer matrix.
fn det_bareiss(mut m: Vec<i128>, n: usize) -> Result<i128> {
    if n == 0 {
        return Ok(1);
    }
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if m[k * n + k] == 0 {
            let Some(swap) = (k + 1..n).find(|&r| m[r * n + k] != 0) else {
                return Ok(0);
            };
            for c in 0..n {
                m.swap(k * n + c, swap * n + c);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let a = m[i * n + j].checked_mul(m[k * n + k]);
                let b = m[i * n + k].checked_mul(m[k * n + j]);
                let v = match (a, b) {
                    (Some(a), Some(b)) => a.checked_sub(b),
                    _ => None,
                }
                .ok_or(Error::Overflow("determinant"))?;
                m[i * n + j] = v / prev;
            }
        }
        prev = m[k * n + k];
    }
    Ok(sign * m[(n - 1) * n + (n - 1)])
}

fn det_mod(mut m: Vec<i64>, n: usize, p: i64) -> i64 {
    let mut det = 1i64;
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| m[r * n + col] != 0) else {
            return 0;
        };
        if pivot != col {
            for c in 0..n {
                m.swap(col * n + c, pivot * n + c);
            }
            det = (p - det) % p;
        }
        let pv = m[col * n + col];
        det = det * pv % p;
        let inv = mod_pow(pv, p - 2, p);
        for r in col + 1..n {
            let f = m[r * n + col] * inv % p;
            if f == 0 {
                continue;
            }
            for c in col..n {
                m[r * n + c] = (m[r * n + c] - f * m[col * n + c]).rem_euclid(p);
            }
        }
    }
    det
}

impl GroupElement {
    /// Validates shape and determinant; entries are reduced into the ring first.
    pub fn new(dim: usize, ring: Ring, entries: Vec<i64>) -> Result<GroupElement> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::InvalidElement(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let entries: Box<[i64]> = entries.into_iter().map(|v| ring.reduce(v)).collect();
        let g = GroupElement { dim, ring, entries };
        let det = g.determinant()?;
        if det != 1 {
            return Err(Error::InvalidElement(format!("determinant is {det}, expected 1")));
        }
        Ok(g)
    }

    /// Caller guarantees entries are canonical with determinant one.
    pub(crate) fn from_canonical(dim: usize, ring: Ring, entries: Box<[i64]>) -> GroupElement {
        debug_assert_eq!(entries.len(), dim * dim);
        GroupElement { dim, ring, entries }
    }

    pub fn identity(dim: usize, ring: Ring) -> GroupElement {
        let mut entries = vec![0i64; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1;
        }
        GroupElement { dim, ring, entries: entries.into() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    /// Row-major canonical entry tuple.
    pub fn key(&self) -> &[i64] {
        &self.entries
    }

    pub fn into_key(self) -> Box<[i64]> {
        self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> i64 {
        self.entries[row * self.dim + col]
    }

    pub fn is_identity(&self) -> bool {
        let n = self.dim;
        self.entries.iter().enumerate().all(|(k, &v)| v == i64::from(k / n == k % n))
    }

    /// Determinant as a canonical ring element.
    pub fn determinant(&self) -> Result<i64> {
        let n = self.dim;
        match self.ring {
            Ring::Integers => {
                let m = self.entries.iter().map(|&v| v as i128).collect();
                let d = det_bareiss(m, n)?;
                i64::try_from(d).map_err(|_| Error::Overflow("determinant"))
            }
            Ring::IntegersModP(p) => Ok(det_mod(self.entries.to_vec(), n, p)),
        }
    }

    fn check_compatible(&self, other: &GroupElement) -> Result<()> {
        if self.dim != other.dim || self.ring != other.ring {
            return Err(Error::Mismatch(format!(
                "cannot combine {}x{} over {} with {}x{} over {}",
                self.dim, self.dim, self.ring, other.dim, other.dim, other.ring
            )));
        }
        Ok(())
    }

    /// Matrix product; integer overflow is reported, never wrapped.
    pub fn multiply(&self, other: &GroupElement) -> Result<GroupElement> {
        self.check_compatible(other)?;
        let n = self.dim;
        let a = &self.entries;
        let b = &other.entries;
        let mut out = vec![0i64; n * n];
        match self.ring {
            Ring::Integers => {
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = 0i64;
                        for k in 0..n {
                            let t = a[i * n + k].checked_mul(b[k * n + j]).ok_or(Error::Overflow("matrix product"))?;
                            acc = acc.checked_add(t).ok_or(Error::Overflow("matrix product"))?;
                        }
                        out[i * n + j] = acc;
                    }
                }
            }
            Ring::IntegersModP(p) => {
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = 0i64;
                        for k in 0..n {
                            acc = (acc + a[i * n + k] * b[k * n + j]) % p;
                        }
                        out[i * n + j] = acc;
                    }
                }
            }
        }
        Ok(GroupElement { dim: n, ring: self.ring, entries: out.into() })
    }

    /// Exact inverse: the adjugate over `Z`, Gauss-Jordan elimination over `Z/p`.
    pub fn inverse(&self) -> Result<GroupElement> {
        let n = self.dim;
        let mut out = vec![0i64; n * n];
        match self.ring {
            Ring::Integers => {
                if n == 1 {
                    return Ok(self.clone());
                }
                for i in 0..n {
                    for j in 0..n {
                        let minor: Vec<i128> = (0..n)
                            .filter(|&r| r != i)
                            .flat_map(|r| (0..n).filter(move |&c| c != j).map(move |c| (r, c)))
                            .map(|(r, c)| self.entries[r * n + c] as i128)
                            .collect();
                        let cof = det_bareiss(minor, n - 1)?;
                        let cof = if (i + j) % 2 == 0 { cof } else { -cof };
                        out[j * n + i] = i64::try_from(cof).map_err(|_| Error::Overflow("inverse"))?;
                    }
                }
            }
            Ring::IntegersModP(p) => {
                let mut m = self.entries.to_vec();
                for i in 0..n {
                    out[i * n + i] = 1;
                }
                for col in 0..n {
                    let pivot = (col..n)
                        .find(|&r| m[r * n + col] != 0)
                        .ok_or_else(|| Error::InvalidElement("singular matrix".into()))?;
                    for c in 0..n {
                        m.swap(col * n + c, pivot * n + c);
                        out.swap(col * n + c, pivot * n + c);
                    }
                    let inv = mod_pow(m[col * n + col], p - 2, p);
                    for c in 0..n {
                        m[col * n + c] = m[col * n + c] * inv % p;
                        out[col * n + c] = out[col * n + c] * inv % p;
                    }
                    for r in 0..n {
                        let f = m[r * n + col];
                        if r == col || f == 0 {
                            continue;
                        }
                        for c in 0..n {
                            m[r * n + c] = (m[r * n + c] - f * m[col * n + c]).rem_euclid(p);
                            out[r * n + c] = (out[r * n + c] - f * out[col * n + c]).rem_euclid(p);
                        }
                    }
                }
            }
        }
        Ok(GroupElement { dim: n, ring: self.ring, entries: out.into() })
    }

    /// Smallest `k` in `1..=cap` with `self^k = e`, if any.
    pub fn order(&self, cap: u64) -> Result<Option<u64>> {
        let mut power = self.clone();
        for k in 1..=cap {
            if power.is_identity() {
                return Ok(Some(k));
            }
            power = match power.multiply(self) {
                Ok(p) => p,
                // integer entries of a non-torsion element eventually overflow
                Err(Error::Overflow(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
        }
        Ok(None)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (r, row) in self.entries.chunks(self.dim).enumerate() {
            if r > 0 {
                write!(f, "; ")?;
            }
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            write!(f, "{}", cells.join(" "))?;
        }
        write!(f, "]")
    }
}
