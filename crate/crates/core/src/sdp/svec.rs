//! Symmetric-matrix vectorization: lower triangle, column by column, with
//! off-diagonal entries scaled by `√2` so that `⟨svec A, svec B⟩ = ⟨A, B⟩_F`.

use std::f64::consts::SQRT_2;

pub fn svec_len(side: usize) -> usize {
    side * (side + 1) / 2
}

/// Position of entry `(i, j)` (either triangle) in the svec ordering.
#[inline]
pub fn svec_index(i: usize, j: usize, side: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    c * side - c * (c + 1) / 2 + r
}

/// Row/column pair of every svec position, in order.
pub fn svec_pairs(side: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..side).flat_map(move |c| (c..side).map(move |r| (r, c)))
}

/// `svec` of a dense row-major `side x side` matrix (only the lower triangle is read).
pub fn svec(mat: &[f64], side: usize) -> Vec<f64> {
    svec_pairs(side)
        .map(|(r, c)| {
            let v = mat[r * side + c];
            if r == c {
                v
            } else {
                v * SQRT_2
            }
        })
        .collect()
}

/// Dense symmetric row-major matrix from its svec.
pub fn smat(v: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; side * side];
    for ((r, c), &x) in svec_pairs(side).zip(v) {
        let val = if r == c { x } else { exact_inverse(x, |v| v * SQRT_2, x / SQRT_2) };
        out[r * side + c] = val;
        out[c * side + r] = val;
    }
    out
}

/// A float within one ulp of `guess` that `f` maps exactly to `target`,
/// falling back to `guess`. Ties go to the shortest mantissa, which recovers
/// short dyadic inputs.
pub(crate) fn exact_inverse(target: f64, f: impl Fn(f64) -> f64, guess: f64) -> f64 {
    [guess, guess.next_up(), guess.next_down()]
        .into_iter()
        .filter(|&v| f(v) == target)
        .max_by_key(|v| (v.to_bits() & ((1u64 << 52) - 1)).trailing_zeros())
        .unwrap_or(guess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn index_matches_enumeration() {
        for side in 1..9 {
            for (k, (r, c)) in svec_pairs(side).enumerate() {
                assert_eq!(svec_index(r, c, side), k);
                assert_eq!(svec_index(c, r, side), k);
            }
            assert_eq!(svec_pairs(side).count(), svec_len(side));
        }
    }

    #[test]
    fn inner_product_preserved() {
        let a = [1.0, 2.0, 2.0, 3.0];
        let b = [4.0, -1.0, -1.0, 0.5];
        let frob: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let sv: f64 = svec(&a, 2).iter().zip(svec(&b, 2)).map(|(x, y)| x * y).sum();
        assert!((frob - sv).abs() < 1e-12);
    }

    proptest! {
        // small dyadic entries survive the √2 scaling and unscaling bit for bit
        #[test]
        fn dyadic_round_trip(side in 1usize..8, seed in proptest::collection::vec(-4096i32..4096, 64)) {
            let mut m = vec![0.0; side * side];
            for r in 0..side {
                for c in 0..=r {
                    let v = seed[(r * 8 + c) % 64] as f64 / 256.0;
                    m[r * side + c] = v;
                    m[c * side + r] = v;
                }
            }
            prop_assert_eq!(smat(&svec(&m, side), side), m);
        }
    }
}
