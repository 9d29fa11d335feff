use std::sync::OnceLock;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GeneratingSet, GroupElement, Ring};
use crate::error::{Error, Result};

/// Limits applied while growing a ball.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallOptions {
    /// Abort with [`Error::CapExceeded`] past this many elements.
    pub max_elements: usize,
}

impl Default for BallOptions {
    fn default() -> Self {
        BallOptions { max_elements: 20_000_000 }
    }
}

/// The ball `B_d(e, S)` in the word metric, ordered by word length and then
/// lexicographically by canonical entry tuple. The identity is position 0.
#[derive(Debug)]
pub struct Ball {
    generators: GeneratingSet,
    radius: u32,
    keys: IndexSet<Box<[i64]>>,
    word_length: Vec<u32>,
    inverse: Option<Vec<u32>>,
    id: OnceLock<String>,
}

impl PartialEq for Ball {
    fn eq(&self, other: &Ball) -> bool {
        self.radius == other.radius
            && self.generators == other.generators
            && self.word_length == other.word_length
            && self.keys.iter().eq(other.keys.iter())
    }
}

pub fn generate_ball(generators: &GeneratingSet, radius: u32) -> Result<Ball> {
    generate_ball_with(generators, radius, &BallOptions::default())
}

/// Breadth-first search from the identity, right-multiplying by generators.
pub fn generate_ball_with(generators: &GeneratingSet, radius: u32, options: &BallOptions) -> Result<Ball> {
    let (dim, ring) = (generators.dim(), generators.ring());
    let mut keys: IndexSet<Box<[i64]>> = IndexSet::new();
    let mut word_length = vec![0u32];
    keys.insert(GroupElement::identity(dim, ring).into_key());
    let mut layer_start = 0;
    for k in 1..=radius {
        let layer_end = keys.len();
        let mut fresh: Vec<Box<[i64]>> = Vec::new();
        for pos in layer_start..layer_end {
            let g = GroupElement::from_canonical(dim, ring, keys[pos].clone());
            for s in generators.elements() {
                let h = g.multiply(s)?;
                if !keys.contains(h.key()) {
                    fresh.push(h.into_key());
                }
            }
        }
        fresh.sort_unstable();
        fresh.dedup();
        if keys.len() + fresh.len() > options.max_elements {
            return Err(Error::CapExceeded { cap: options.max_elements });
        }
        if fresh.is_empty() {
            break;
        }
        word_length.extend(std::iter::repeat_n(k, fresh.len()));
        keys.extend(fresh);
        layer_start = layer_end;
    }
    Ok(Ball::assemble(generators.clone(), radius, keys, word_length))
}

impl Ball {
    fn assemble(generators: GeneratingSet, radius: u32, keys: IndexSet<Box<[i64]>>, word_length: Vec<u32>) -> Ball {
        let mut ball = Ball { generators, radius, keys, word_length, inverse: None, id: OnceLock::new() };
        ball.inverse = ball.compute_inverses();
        ball
    }

    fn compute_inverses(&self) -> Option<Vec<u32>> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let inv = self.element(i).inverse().ok()?;
            out.push(self.keys.get_index_of(inv.key())? as u32);
        }
        Some(out)
    }

    /// Rebuilds a ball from explicit elements and word lengths (e.g. produced
    /// by another program), checking that the labelling is the word metric.
    pub fn from_parts(
        generators: GeneratingSet,
        radius: u32,
        elements: Vec<GroupElement>,
        word_length: Vec<u32>,
    ) -> Result<Ball> {
        if elements.len() != word_length.len() {
            return Err(Error::Schema("element and word-length counts differ".into()));
        }
        let mut keys = IndexSet::with_capacity(elements.len());
        for g in elements {
            if g.dim() != generators.dim() || g.ring() != generators.ring() {
                return Err(Error::Mismatch("ball element differs from generators".into()));
            }
            let repr = g.to_string();
            if !keys.insert(g.into_key()) {
                return Err(Error::Schema(format!("duplicate ball element {repr}")));
            }
        }
        let ball = Ball::assemble(generators, radius, keys, word_length);
        ball.validate_word_metric()?;
        Ok(ball)
    }

    /// Checks that the stored word lengths are the exact geodesic lengths and
    /// that the ball contains every element of length at most `radius`.
    pub fn validate_word_metric(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Schema(msg));
        if self.is_empty() || !self.element(0).is_identity() || self.word_length[0] != 0 {
            return bad("identity must be element 0 with word length 0".into());
        }
        let gens = self.generators.elements();
        let inverses = gens.iter().map(|s| s.inverse()).collect::<Result<Vec<_>>>()?;
        for i in 1..self.len() {
            let wl = self.word_length[i];
            if wl == 0 || wl > self.radius {
                return bad(format!("element {i} has word length {wl} outside 1..={}", self.radius));
            }
            let g = self.element(i);
            let mut has_parent = false;
            for s_inv in &inverses {
                let h = g.multiply(s_inv)?;
                if let Some(j) = self.index_of(&h) {
                    if self.word_length[j] + 1 == wl {
                        has_parent = true;
                        break;
                    }
                }
            }
            if !has_parent {
                return bad(format!("element {i} has no neighbour one step closer to e"));
            }
        }
        for i in 0..self.len() {
            let wl = self.word_length[i];
            if wl >= self.radius {
                continue;
            }
            let g = self.element(i);
            for s in gens {
                let h = g.multiply(s)?;
                match self.index_of(&h) {
                    Some(j) if self.word_length[j] <= wl + 1 => {}
                    Some(_) => return bad(format!("neighbour of element {i} has inconsistent length")),
                    None => return bad(format!("ball is missing a neighbour of element {i}")),
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn generators(&self) -> &GeneratingSet {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.generators.dim()
    }

    pub fn ring(&self) -> Ring {
        self.generators.ring()
    }

    pub fn key(&self, i: usize) -> &[i64] {
        &self.keys[i]
    }

    pub fn element(&self, i: usize) -> GroupElement {
        GroupElement::from_canonical(self.dim(), self.ring(), self.keys[i].clone())
    }

    pub fn elements(&self) -> impl Iterator<Item = GroupElement> + '_ {
        (0..self.len()).map(|i| self.element(i))
    }

    pub fn index_of(&self, g: &GroupElement) -> Option<usize> {
        self.keys.get_index_of(g.key())
    }

    pub fn index_of_key(&self, key: &[i64]) -> Option<usize> {
        self.keys.get_index_of(key)
    }

    pub fn word_length(&self, i: usize) -> u32 {
        self.word_length[i]
    }

    pub fn word_lengths(&self) -> &[u32] {
        &self.word_length
    }

    pub fn max_word_length(&self) -> u32 {
        self.word_length.last().copied().unwrap_or(0)
    }

    /// Sizes of `B_0, B_1, ...` within this ball.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.max_word_length() as usize + 1];
        for &w in &self.word_length {
            sizes[w as usize] += 1;
        }
        sizes
    }

    /// Position of `x^-1` for every `x`, when the ball is closed under inversion.
    pub fn inverse_positions(&self) -> Option<&[u32]> {
        self.inverse.as_deref()
    }

    pub fn inverse_index(&self, i: usize) -> Option<usize> {
        self.inverse.as_ref().map(|inv| inv[i] as usize)
    }

    /// Positions of this ball's elements inside `larger`.
    pub fn embedding_into(&self, larger: &Ball) -> Result<Vec<u32>> {
        if self.dim() != larger.dim() || self.ring() != larger.ring() {
            return Err(Error::Mismatch("cannot embed balls of different groups".into()));
        }
        self.keys
            .iter()
            .map(|k| {
                larger
                    .index_of_key(k)
                    .map(|j| j as u32)
                    .ok_or_else(|| Error::MissingElement(format!("{:?} not in target ball", k)))
            })
            .collect()
    }

    /// SHA-256 of the generators, radius and ordered element list.
    pub fn id(&self) -> &str {
        self.id.get_or_init(|| {
            let mut h = Sha256::new();
            h.update(format!("{}|{}|{}|", self.dim(), self.ring(), self.radius).as_bytes());
            for s in self.generators.elements() {
                for v in s.key() {
                    h.update(v.to_le_bytes());
                }
            }
            h.update(b"|");
            for (k, w) in self.keys.iter().zip(&self.word_length) {
                for v in k.iter() {
                    h.update(v.to_le_bytes());
                }
                h.update(w.to_le_bytes());
            }
            hex_digest(&h.finalize())
        })
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
pub(crate) struct BallRepr {
    pub generators: GeneratingSet,
    pub radius: u32,
    pub elements: Vec<Vec<i64>>,
    pub word_lengths: Vec<u32>,
}

impl Serialize for Ball {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BallRepr {
            generators: self.generators.clone(),
            radius: self.radius,
            elements: self.keys.iter().map(|k| k.to_vec()).collect(),
            word_lengths: self.word_length.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Ball {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Ball, D::Error> {
        let repr = BallRepr::deserialize(d)?;
        let (dim, ring) = (repr.generators.dim(), repr.generators.ring());
        let elements = repr
            .elements
            .into_iter()
            .map(|e| GroupElement::new(dim, ring, e))
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        Ball::from_parts(repr.generators, repr.radius, elements, repr.word_lengths).map_err(serde::de::Error::custom)
    }
}
