use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{generate_ball_with, Ball, BallOptions, GeneratingSet};
use crate::error::{Error, Result};

/// `rows[i][j]` is the position in the product ball of `x_i^-1 x_j` for basis
/// elements `x_i, x_j`; stored flat, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct MultiplicationTable {
    basis_size: usize,
    product_size: usize,
    basis_radius: u32,
    product_radius: u32,
    rows: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    basis_radius: u32,
    product_radius: u32,
    product_size: usize,
    rows: Vec<Vec<u32>>,
}

impl TryFrom<TableRepr> for MultiplicationTable {
    type Error = Error;
    fn try_from(r: TableRepr) -> Result<MultiplicationTable> {
        let n = r.rows.len();
        if r.rows.iter().any(|row| row.len() != n) {
            return Err(Error::Schema("multiplication table is not square".into()));
        }
        let rows: Vec<u32> = r.rows.into_iter().flatten().collect();
        if rows.iter().any(|&v| v as usize >= r.product_size) {
            return Err(Error::Schema("table index outside the product ball".into()));
        }
        Ok(MultiplicationTable {
            basis_size: n,
            product_size: r.product_size,
            basis_radius: r.basis_radius,
            product_radius: r.product_radius,
            rows,
        })
    }
}

impl From<MultiplicationTable> for TableRepr {
    fn from(t: MultiplicationTable) -> TableRepr {
        let rows =
            if t.basis_size == 0 { Vec::new() } else { t.rows.chunks(t.basis_size).map(|r| r.to_vec()).collect() };
        TableRepr { basis_radius: t.basis_radius, product_radius: t.product_radius, product_size: t.product_size, rows }
    }
}

/// Builds the table of `x_i^-1 x_j` over `basis`, looked up in `product`.
pub fn multiplication_table(basis: &Ball, product: &Ball) -> Result<MultiplicationTable> {
    if basis.generators() != product.generators() {
        return Err(Error::Mismatch("basis and product balls use different generators".into()));
    }
    if product.radius() < 2 * basis.radius() {
        return Err(Error::InvalidArgument(format!(
            "product radius {} is less than twice the basis radius {}",
            product.radius(),
            basis.radius()
        )));
    }
    let n = basis.len();
    let inverses = basis.elements().map(|g| g.inverse()).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(n * n);
    for inv in &inverses {
        for j in 0..n {
            let g = inv.multiply(&basis.element(j))?;
            let pos = product.index_of(&g).ok_or_else(|| Error::MissingElement(format!("{g} not in product ball")))?;
            rows.push(pos as u32);
        }
    }
    Ok(MultiplicationTable {
        basis_size: n,
        product_size: product.len(),
        basis_radius: basis.radius(),
        product_radius: product.radius(),
        rows,
    })
}

impl MultiplicationTable {
    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn product_size(&self) -> usize {
        self.product_size
    }

    pub fn basis_radius(&self) -> u32 {
        self.basis_radius
    }

    pub fn product_radius(&self) -> u32 {
        self.product_radius
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.rows[i * self.basis_size + j] as usize
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i * self.basis_size..(i + 1) * self.basis_size]
    }

    /// Recomputes every entry from the balls and compares.
    pub fn check_against(&self, basis: &Ball, product: &Ball) -> Result<()> {
        let fresh = multiplication_table(basis, product)?;
        if fresh != *self {
            return Err(Error::Schema("multiplication table disagrees with the balls".into()));
        }
        Ok(())
    }
}

/// Basis ball `B_d`, product ball `B_2d` and their multiplication table: the
/// artifact exchanged between stages (and accepted from external programs).
#[derive(Clone, Debug)]
pub struct BallBundle {
    pub basis: Arc<Ball>,
    pub product: Arc<Ball>,
    pub table: Arc<MultiplicationTable>,
}

#[derive(Serialize)]
struct BundleReprRef<'a> {
    format: &'a str,
    basis: &'a Ball,
    product: &'a Ball,
    table: &'a MultiplicationTable,
}

#[derive(Deserialize)]
struct BundleRepr {
    format: String,
    basis: Ball,
    product: Ball,
    table: MultiplicationTable,
}

pub const BUNDLE_FORMAT: &str = "sosgap-balls/1";

impl BallBundle {
    pub fn generate(generators: &GeneratingSet, radius: u32, options: &BallOptions) -> Result<BallBundle> {
        let product = generate_ball_with(generators, 2 * radius, options)?;
        let basis = generate_ball_with(generators, radius, options)?;
        let table = multiplication_table(&basis, &product)?;
        Ok(BallBundle { basis: Arc::new(basis), product: Arc::new(product), table: Arc::new(table) })
    }

    pub fn to_json(&self) -> Result<String> {
        let repr =
            BundleReprRef { format: BUNDLE_FORMAT, basis: &self.basis, product: &self.product, table: &self.table };
        Ok(serde_json::to_string(&repr)?)
    }

    /// Parses and fully validates a bundle, including every table entry.
    pub fn from_json(text: &str) -> Result<BallBundle> {
        let repr: BundleRepr = serde_json::from_str(text)?;
        if repr.format != BUNDLE_FORMAT {
            return Err(Error::Schema(format!("unexpected format {:?}", repr.format)));
        }
        repr.table.check_against(&repr.basis, &repr.product)?;
        Ok(BallBundle { basis: Arc::new(repr.basis), product: Arc::new(repr.product), table: Arc::new(repr.table) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{elementary_generators, generate_ball, Ring};

    #[test]
    fn identity_row_and_diagonal() {
        let s = elementary_generators(2, Ring::Integers).unwrap();
        let basis = generate_ball(&s, 2).unwrap();
        let product = generate_ball(&s, 4).unwrap();
        let t = multiplication_table(&basis, &product).unwrap();
        for j in 0..basis.len() {
            // basis B_2 is a prefix of B_4 in this ordering
            assert_eq!(t.get(0, j), j);
            assert_eq!(t.get(j, j), 0);
        }
    }

    #[test]
    fn sl2_3_table_matches_direct_products() {
        let s = elementary_generators(2, Ring::IntegersModP(3)).unwrap();
        let basis = generate_ball(&s, 1).unwrap();
        let product = generate_ball(&s, 2).unwrap();
        let t = multiplication_table(&basis, &product).unwrap();
        assert_eq!(t.basis_size(), 5);
        for i in 0..5 {
            for j in 0..5 {
                let direct = basis.element(i).inverse().unwrap().multiply(&basis.element(j)).unwrap();
                assert_eq!(product.element(t.get(i, j)), direct);
            }
        }
    }

    #[test]
    fn every_quotient_is_found() {
        // exhaustive x^-1 y over B_2 x B_2 lands in B_4 for SL(3, Z)
        let s = elementary_generators(3, Ring::Integers).unwrap();
        let bundle = BallBundle::generate(&s, 1, &BallOptions::default()).unwrap();
        assert_eq!(bundle.table.basis_size(), 13);
        let distinct: std::collections::HashSet<_> =
            (0..13).flat_map(|i| (0..13).map(move |j| (i, j))).map(|(i, j)| bundle.table.get(i, j)).collect();
        assert!(distinct.len() <= bundle.product.len());
    }

    #[test]
    fn radius_precondition() {
        let s = elementary_generators(2, Ring::Integers).unwrap();
        let basis = generate_ball(&s, 2).unwrap();
        let product = generate_ball(&s, 3).unwrap();
        assert!(multiplication_table(&basis, &product).is_err());
    }

    #[test]
    fn bundle_json_round_trip() {
        let s = elementary_generators(2, Ring::IntegersModP(3)).unwrap();
        let bundle = BallBundle::generate(&s, 2, &BallOptions::default()).unwrap();
        let json = bundle.to_json().unwrap();
        let back = BallBundle::from_json(&json).unwrap();
        assert_eq!(*back.basis, *bundle.basis);
        assert_eq!(*back.table, *bundle.table);
        assert_eq!(back.to_json().unwrap(), json);

        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let old = v["table"]["rows"][1][2].as_u64().unwrap();
        v["table"]["rows"][1][2] = serde_json::json!((old + 1) % 24);
        assert!(BallBundle::from_json(&v.to_string()).is_err());
    }
}
