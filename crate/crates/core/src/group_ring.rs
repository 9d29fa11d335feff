//! The real group ring restricted to ball-supported subspaces.
//!
//! Elements are dense coefficient vectors indexed by ball position and are
//! generic over the coefficient [`Scalar`]: `f64`, exact [`BigRational`] or
//! outward-rounded [`Interval`].

use std::fmt::Debug;
use std::sync::Arc;

use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::group::{Ball, GeneratingSet, MultiplicationTable};
use crate::numerics::{format_hex, format_rational, parse_hex, parse_rational, BigRational, Interval};

/// Coefficient ring for group-ring elements.
pub trait Scalar: Clone + Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn from_i64(v: i64) -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn abs(&self) -> Self;
    /// Exactly zero; used to skip work, never for tolerance decisions.
    fn is_zero(&self) -> bool;
    fn to_text(&self) -> String;
    fn from_text(s: &str) -> Result<Self>;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_text(&self) -> String {
        format_hex(*self)
    }
    fn from_text(s: &str) -> Result<Self> {
        parse_hex(s)
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(v.into())
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn to_text(&self) -> String {
        format_rational(self)
    }
    fn from_text(s: &str) -> Result<Self> {
        parse_rational(s)
    }
}

impl Scalar for Interval {
    fn zero() -> Self {
        Interval::zero()
    }
    fn from_i64(v: i64) -> Self {
        let f = v as f64;
        if f as i128 == v as i128 {
            Interval::point(f)
        } else {
            Interval::new(f.next_down(), f.next_up())
        }
    }
    fn add(&self, rhs: &Self) -> Self {
        *self + *rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        *self - *rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        *self * *rhs
    }
    fn abs(&self) -> Self {
        Interval::abs(self)
    }
    fn is_zero(&self) -> bool {
        self.lo() == 0.0 && self.hi() == 0.0
    }
    fn to_text(&self) -> String {
        format!("[{}, {}]", format_hex(self.lo()), format_hex(self.hi()))
    }
    fn from_text(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("malformed interval {s:?}"));
        let inner = s.trim().strip_prefix('[').and_then(|t| t.strip_suffix(']')).ok_or_else(bad)?;
        let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
        Interval::try_new(parse_hex(lo)?, parse_hex(hi)?).ok_or_else(bad)
    }
}

/// Finitely supported element of the group ring, supported on a ball.
#[derive(Clone, Debug)]
pub struct GroupRingElement<T> {
    support: Arc<Ball>,
    coeffs: Vec<T>,
}

fn same_support(a: &Arc<Ball>, b: &Arc<Ball>) -> bool {
    Arc::ptr_eq(a, b) || a.id() == b.id()
}

impl<T: Scalar> GroupRingElement<T> {
    pub fn zeros(support: Arc<Ball>) -> Self {
        let coeffs = vec![T::zero(); support.len()];
        GroupRingElement { support, coeffs }
    }

    pub fn from_coeffs(support: Arc<Ball>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != support.len() {
            return Err(Error::SupportMismatch(format!(
                "{} coefficients for a ball of {} elements",
                coeffs.len(),
                support.len()
            )));
        }
        Ok(GroupRingElement { support, coeffs })
    }

    /// `c · x_i` for the `i`-th ball element.
    pub fn monomial(support: Arc<Ball>, i: usize, c: T) -> Self {
        let mut out = Self::zeros(support);
        out.coeffs[i] = c;
        out
    }

    pub fn support(&self) -> &Arc<Ball> {
        &self.support
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> &T {
        &self.coeffs[i]
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> GroupRingElement<U> {
        GroupRingElement { support: self.support.clone(), coeffs: self.coeffs.iter().map(f).collect() }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if !same_support(&self.support, &other.support) {
            return Err(Error::SupportMismatch("operands live on different balls".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect();
        Ok(GroupRingElement { support: self.support.clone(), coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.sub(b)).collect();
        Ok(GroupRingElement { support: self.support.clone(), coeffs })
    }

    pub fn scale(&self, c: &T) -> Self {
        self.map(|a| a.mul(c))
    }

    /// Re-indexes onto a ball containing the current support.
    pub fn embed(&self, target: &Arc<Ball>) -> Result<Self> {
        if same_support(&self.support, target) {
            return Ok(self.clone());
        }
        let positions = self.support.embedding_into(target)?;
        let mut out = Self::zeros(target.clone());
        for (c, &p) in self.coeffs.iter().zip(&positions) {
            out.coeffs[p as usize] = c.clone();
        }
        Ok(out)
    }

    /// The involution `g -> g^-1` extended linearly.
    pub fn star(&self) -> Result<Self> {
        let inv = self
            .support
            .inverse_positions()
            .ok_or_else(|| Error::SupportMismatch("support is not closed under inversion".into()))?;
        let mut coeffs = vec![T::zero(); self.coeffs.len()];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[inv[i] as usize] = c.clone();
        }
        Ok(GroupRingElement { support: self.support.clone(), coeffs })
    }

    /// Sum of coefficients.
    pub fn augmentation(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, c| acc.add(c))
    }

    /// `Σ |c_g|`; for intervals the upper endpoint bounds every enclosed element.
    pub fn l1_norm(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, c| acc.add(&c.abs()))
    }

    /// `(a b)(g) = Σ_{hk = g} a(h) b(k)`, multiplying group elements directly
    /// and locating products in `product`.
    pub fn convolve(&self, other: &Self, product: &Arc<Ball>) -> Result<Self> {
        let mut out = Self::zeros(product.clone());
        let rhs: Vec<(usize, crate::group::GroupElement)> = other
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, _)| (j, other.support.element(j)))
            .collect();
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let h = self.support.element(i);
            for (j, k) in &rhs {
                let g = h.multiply(k)?;
                let pos = product
                    .index_of(&g)
                    .ok_or_else(|| Error::SupportMismatch(format!("product {g} outside target ball")))?;
                out.coeffs[pos] = out.coeffs[pos].add(&a.mul(&other.coeffs[*j]));
            }
        }
        Ok(out)
    }

    fn check_table(&self, other: &Self, table: &MultiplicationTable, product: &Arc<Ball>) -> Result<()> {
        self.check_same(other)?;
        if table.basis_size() != self.coeffs.len() || table.product_size() != product.len() {
            return Err(Error::SupportMismatch("table does not match operand or product sizes".into()));
        }
        Ok(())
    }

    /// `a* b` over the basis of `table`, i.e. `Σ_{i,j} a_i b_j x_i^-1 x_j`.
    pub fn star_convolve(&self, other: &Self, table: &MultiplicationTable, product: &Arc<Ball>) -> Result<Self> {
        self.check_table(other, table, product)?;
        let mut out = Self::zeros(product.clone());
        self.star_convolve_into(other, table, &mut out.coeffs);
        Ok(out)
    }

    /// Accumulates `a* b` into `acc` (indexed by product ball position).
    pub(crate) fn star_convolve_into(&self, other: &Self, table: &MultiplicationTable, acc: &mut [T]) {
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let row = table.row(i);
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                let g = row[j] as usize;
                acc[g] = acc[g].add(&a.mul(b));
            }
        }
    }

    /// `a b` over the basis of `table`, using `x_i x_j = (x_i^-1)^-1 x_j`.
    pub fn convolve_table(&self, other: &Self, table: &MultiplicationTable, product: &Arc<Ball>) -> Result<Self> {
        self.star()?.star_convolve(other, table, product)
    }

    /// Serializes as the ball id plus the nonzero `(index, coefficient)` terms.
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| json!([i, c.to_text()]))
            .collect();
        json!({ "ball": self.support.id(), "terms": terms })
    }

    pub fn from_json(value: &Value, support: Arc<Ball>) -> Result<Self> {
        let bad = |m: &str| Error::Schema(format!("group ring element: {m}"));
        let id = value["ball"].as_str().ok_or_else(|| bad("missing ball id"))?;
        if id != support.id() {
            return Err(bad("ball id does not match the supplied support"));
        }
        let mut out = Self::zeros(support);
        for term in value["terms"].as_array().ok_or_else(|| bad("missing terms"))? {
            let i = term[0].as_u64().ok_or_else(|| bad("bad index"))? as usize;
            let c = term[1].as_str().ok_or_else(|| bad("bad coefficient"))?;
            if i >= out.coeffs.len() {
                return Err(bad("index outside the ball"));
            }
            out.coeffs[i] = T::from_text(c)?;
        }
        Ok(out)
    }
}

/// The unnormalized Laplacian `Δ_S = |S| − Σ_{s∈S} s`, supported on `B_1`.
#[derive(Clone, Debug)]
pub struct Laplacian {
    generators: GeneratingSet,
    support: Arc<Ball>,
    coeffs: Vec<i64>,
}

impl Laplacian {
    /// Requires a symmetric generating set: otherwise `½Σ(1−s)*(1−s)` and
    /// `|S| − Σ s` are different elements.
    pub fn new(generators: &GeneratingSet) -> Result<Laplacian> {
        let support = Arc::new(crate::group::generate_ball(generators, 1)?);
        Self::on_ball(generators, support)
    }

    /// Laplacian with coefficients laid out on `support` (which must contain `S`).
    pub fn on_ball(generators: &GeneratingSet, support: Arc<Ball>) -> Result<Laplacian> {
        if !generators.is_symmetric() {
            return Err(Error::NonSymmetric("the Laplacian needs S = S^-1".into()));
        }
        if generators.is_empty() {
            return Err(Error::InvalidArgument("empty generating set".into()));
        }
        let mut coeffs = vec![0i64; support.len()];
        coeffs[0] = generators.len() as i64;
        for s in generators.elements() {
            let pos =
                support.index_of(s).ok_or_else(|| Error::MissingElement(format!("generator {s} outside support")))?;
            coeffs[pos] -= 1;
        }
        Ok(Laplacian { generators: generators.clone(), support, coeffs })
    }

    pub fn generators(&self) -> &GeneratingSet {
        &self.generators
    }

    pub fn support(&self) -> &Arc<Ball> {
        &self.support
    }

    pub fn integer_coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn element<T: Scalar>(&self) -> GroupRingElement<T> {
        GroupRingElement {
            support: self.support.clone(),
            coeffs: self.coeffs.iter().map(|&c| T::from_i64(c)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{elementary_generators, generate_ball, multiplication_table, GroupElement, Ring};

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn laplacian_of_e2() {
        let s = elementary_generators(2, Ring::Integers).unwrap();
        let lap = Laplacian::new(&s).unwrap();
        assert_eq!(lap.integer_coeffs(), &[4, -1, -1, -1, -1]);
        let d = lap.element::<BigRational>();
        assert_eq!(d.augmentation(), q(0));
        assert_eq!(d.l1_norm(), q(8));
        assert_eq!(d.star().unwrap().coeffs(), d.coeffs());
    }

    #[test]
    fn laplacian_of_cyclic_group() {
        let t = GroupElement::new(2, Ring::IntegersModP(3), vec![1, 1, 0, 1]).unwrap();
        let t2 = t.multiply(&t).unwrap();
        let s = GeneratingSet::new(vec![t.clone(), t2.clone()]).unwrap();
        let lap = Laplacian::new(&s).unwrap();
        let b = lap.support();
        assert_eq!(b.len(), 3);
        assert_eq!(lap.integer_coeffs()[0], 2);
        assert_eq!(lap.integer_coeffs()[b.index_of(&t).unwrap()], -1);
        assert_eq!(lap.integer_coeffs()[b.index_of(&t2).unwrap()], -1);
    }

    #[test]
    fn non_symmetric_rejected() {
        let t = GroupElement::new(2, Ring::IntegersModP(3), vec![1, 1, 0, 1]).unwrap();
        let s = GeneratingSet::new(vec![t]).unwrap();
        assert!(matches!(Laplacian::new(&s), Err(Error::NonSymmetric(_))));
    }

    #[test]
    fn laplacian_squared_at_identity() {
        let s = elementary_generators(2, Ring::Integers).unwrap();
        let lap = Laplacian::new(&s).unwrap();
        let b2 = Arc::new(generate_ball(&s, 2).unwrap());
        let d = lap.element::<BigRational>();
        let sq = d.convolve(&d, &b2).unwrap();
        assert_eq!(sq.coeff(0), &q(20));
        assert_eq!(sq.augmentation(), q(0));
        // table route agrees
        let table = multiplication_table(lap.support(), &b2).unwrap();
        let via_table = d.convolve_table(&d, &table, &b2).unwrap();
        assert_eq!(via_table.coeffs(), sq.coeffs());
        let via_star = d.star_convolve(&d, &table, &b2).unwrap();
        assert_eq!(via_star.coeffs(), sq.coeffs());
    }

    #[test]
    fn unit_law_and_norms() {
        let s = elementary_generators(2, Ring::IntegersModP(3)).unwrap();
        let ball = Arc::new(generate_ball(&s, 4).unwrap());
        let one = GroupRingElement::<BigRational>::monomial(ball.clone(), 0, q(1));
        let b = GroupRingElement::from_coeffs(ball.clone(), (0..24).map(|i| q(i - 7)).collect()).unwrap();
        assert_eq!(one.convolve(&b, &ball).unwrap().coeffs(), b.coeffs());
        let zero = GroupRingElement::<BigRational>::zeros(ball.clone());
        assert_eq!(zero.l1_norm(), q(0));
        let e_plus_g = one.add(&GroupRingElement::monomial(ball, 3, q(1))).unwrap();
        assert_eq!(e_plus_g.augmentation(), q(2));
    }

    #[test]
    fn mismatched_supports() {
        let s = elementary_generators(2, Ring::Integers).unwrap();
        let b1 = Arc::new(generate_ball(&s, 1).unwrap());
        let b2 = Arc::new(generate_ball(&s, 2).unwrap());
        let a = GroupRingElement::<f64>::zeros(b1.clone());
        let b = GroupRingElement::<f64>::zeros(b2.clone());
        assert!(a.add(&b).is_err());
        assert!(GroupRingElement::<f64>::from_coeffs(b1.clone(), vec![0.0; 3]).is_err());
        let up = a.embed(&b2).unwrap();
        assert!(up.add(&b).is_ok());
    }

    #[test]
    fn json_terms() {
        let s = elementary_generators(2, Ring::Integers).unwrap();
        let lap = Laplacian::new(&s).unwrap();
        let d = lap.element::<BigRational>().scale(&BigRational::new(1.into(), 3.into()));
        let v = d.to_json();
        assert_eq!(v["terms"][0], json!([0, "4/3"]));
        let back = GroupRingElement::<BigRational>::from_json(&v, lap.support().clone()).unwrap();
        assert_eq!(back.coeffs(), d.coeffs());
        let iv = lap.element::<Interval>();
        let back = GroupRingElement::<Interval>::from_json(&iv.to_json(), lap.support().clone()).unwrap();
        assert_eq!(back.coeffs(), iv.coeffs());
    }
}
