use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::Interval;
use crate::error::{Error, Result};

pub use num_rational::BigRational;

/// The exact dyadic rational equal to `x`.
pub fn float_to_rational(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("cannot convert {x} to a rational")));
    }
    // from_float decodes the IEEE-754 bits, so this is exact.
    BigRational::from_float(x).ok_or_else(|| Error::NonFinite(x.to_string()))
}

/// Nearest rational with denominator `2^bits`; the error is at most `2^-(bits+1)`.
pub fn float_to_rational_truncated(x: f64, bits: u32) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("cannot convert {x} to a rational")));
    }
    let exact = float_to_rational(x)?;
    let den = BigInt::one() << bits;
    let scaled = exact * BigRational::from_integer(den.clone());
    // round half away from zero, exactly
    let num = scaled.round().to_integer();
    Ok(BigRational::new(num, den))
}

/// Largest float not exceeding `q` (errors if `q` lies outside the finite range).
pub fn round_down(q: &BigRational) -> Result<f64> {
    Ok(rational_to_interval(q)?.lo())
}

/// Smallest float not below `q`.
pub fn round_up(q: &BigRational) -> Result<f64> {
    Ok(rational_to_interval(q)?.hi())
}

/// Tightest interval with float endpoints that contains `q`.
pub fn rational_to_interval(q: &BigRational) -> Result<Interval> {
    let approx = q.to_f64().unwrap_or(f64::NAN);
    if !approx.is_finite() {
        return Err(Error::NonFinite(format!("rational {} is outside the double range", format_rational(q))));
    }
    let as_q = |f: f64| BigRational::from_float(f).expect("finite");
    let mut lo = approx;
    while as_q(lo) > *q {
        lo = lo.next_down();
    }
    while lo.next_up().is_finite() && as_q(lo.next_up()) <= *q {
        lo = lo.next_up();
    }
    if as_q(lo) == *q {
        return Ok(Interval::point(lo));
    }
    let hi = lo.next_up();
    if !hi.is_finite() || !lo.is_finite() {
        return Err(Error::NonFinite(format!("rational {} is outside the double range", format_rational(q))));
    }
    Ok(Interval::new(lo, hi))
}

/// `num/den` with a positive denominator, always printing the denominator.
pub fn format_rational(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Parses `num/den` or a bare integer.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::Parse(format!("malformed rational {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() || den.is_negative() {
        return Err(bad());
    }
    Ok(BigRational::new(num, den))
}
