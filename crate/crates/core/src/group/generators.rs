use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{GroupElement, Ring};
use crate::error::{Error, Result};

/// Finite generating set; `symmetric` records closure under inversion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeneratingSetRepr", into = "GeneratingSetRepr")]
pub struct GeneratingSet {
    dim: usize,
    ring: Ring,
    elements: Vec<GroupElement>,
    symmetric: bool,
}

#[derive(Serialize, Deserialize)]
struct GeneratingSetRepr {
    dim: usize,
    ring: Ring,
    elements: Vec<Vec<i64>>,
}

impl GeneratingSet {
    pub fn new(elements: Vec<GroupElement>) -> Result<GeneratingSet> {
        let first = elements.first().ok_or_else(|| Error::InvalidArgument("generating set is empty".into()))?;
        let (dim, ring) = (first.dim(), first.ring());
        let mut seen = HashSet::new();
        for g in &elements {
            if g.dim() != dim || g.ring() != ring {
                return Err(Error::Mismatch("generators differ in dimension or ring".into()));
            }
            if !seen.insert(g.key().to_vec()) {
                return Err(Error::InvalidArgument(format!("duplicate generator {g}")));
            }
        }
        let mut symmetric = true;
        for g in &elements {
            if !seen.contains(g.inverse()?.key()) {
                symmetric = false;
                break;
            }
        }
        Ok(GeneratingSet { dim, ring, elements, symmetric })
    }

    pub fn from_entries(dim: usize, ring: Ring, elements: &[Vec<i64>]) -> Result<GeneratingSet> {
        let elements = elements.iter().map(|e| GroupElement::new(dim, ring, e.clone())).collect::<Result<Vec<_>>>()?;
        GeneratingSet::new(elements)
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    /// True when some generator `s != e` satisfies `s^2 = e`.
    pub fn has_involution(&self) -> Result<bool> {
        for s in &self.elements {
            if !s.is_identity() && s.multiply(s)?.is_identity() {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

impl TryFrom<GeneratingSetRepr> for GeneratingSet {
    type Error = Error;
    fn try_from(r: GeneratingSetRepr) -> Result<GeneratingSet> {
        GeneratingSet::from_entries(r.dim, r.ring, &r.elements)
    }
}

impl From<GeneratingSet> for GeneratingSetRepr {
    fn from(s: GeneratingSet) -> GeneratingSetRepr {
        GeneratingSetRepr { dim: s.dim, ring: s.ring, elements: s.elements.iter().map(|g| g.key().to_vec()).collect() }
    }
}

/// `E(n)`: all `I ± E_ij` with `i != j`, deduplicated in the ring.
pub fn elementary_generators(n: usize, ring: Ring) -> Result<GeneratingSet> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("elementary generators need n >= 2, got {n}")));
    }
    let mut out: Vec<GroupElement> = Vec::with_capacity(2 * n * (n - 1));
    let mut seen = HashSet::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for sign in [1i64, -1] {
                let mut entries = vec![0i64; n * n];
                for k in 0..n {
                    entries[k * n + k] = 1;
                }
                entries[i * n + j] = sign;
                let g = GroupElement::new(n, ring, entries)?;
                if seen.insert(g.key().to_vec()) {
                    out.push(g);
                }
            }
        }
    }
    GeneratingSet::new(out)
}
