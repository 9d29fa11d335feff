use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficient ring of a matrix group: the integers or a prime field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Ring {
    Integers,
    IntegersModP(i64),
}

fn is_prime(p: i64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2i64;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

impl Ring {
    /// `Z/p`, rejecting non-primes and moduli too large for overflow-free products.
    pub fn modulo(p: i64) -> Result<Ring> {
        if !is_prime(p) {
            return Err(Error::InvalidRing(format!("{p} is not prime")));
        }
        if p >= 1 << 31 {
            return Err(Error::InvalidRing(format!("modulus {p} exceeds 2^31")));
        }
        Ok(Ring::IntegersModP(p))
    }

    pub fn modulus(&self) -> Option<i64> {
        match self {
            Ring::Integers => None,
            Ring::IntegersModP(p) => Some(*p),
        }
    }

    /// Canonical representative of an integer in this ring.
    pub fn reduce(&self, v: i64) -> i64 {
        match self {
            Ring::Integers => v,
            Ring::IntegersModP(p) => v.rem_euclid(*p),
        }
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ring::Integers => write!(f, "Z"),
            Ring::IntegersModP(p) => write!(f, "Z/{p}"),
        }
    }
}

impl FromStr for Ring {
    type Err = Error;

    /// Accepts `Z`, `Z/p` or a bare prime `p`.
    fn from_str(s: &str) -> Result<Ring> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("z") || s.eq_ignore_ascii_case("integers") {
            return Ok(Ring::Integers);
        }
        let digits = s.strip_prefix("Z/").or_else(|| s.strip_prefix("z/")).or_else(|| s.strip_prefix("F")).unwrap_or(s);
        let p: i64 = digits.parse().map_err(|_| Error::InvalidRing(format!("cannot parse ring {s:?}")))?;
        Ring::modulo(p)
    }
}

impl TryFrom<String> for Ring {
    type Error = Error;
    fn try_from(s: String) -> Result<Ring> {
        s.parse()
    }
}

impl From<Ring> for String {
    fn from(r: Ring) -> String {
        r.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_checked() {
        assert!(Ring::modulo(7).is_ok());
        assert!(Ring::modulo(2).is_ok());
        assert!(Ring::modulo(9).is_err());
        assert!(Ring::modulo(1).is_err());
        assert!(Ring::modulo(-3).is_err());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("Z".parse::<Ring>().unwrap(), Ring::Integers);
        assert_eq!("Z/7".parse::<Ring>().unwrap(), Ring::IntegersModP(7));
        assert_eq!("19".parse::<Ring>().unwrap(), Ring::IntegersModP(19));
        assert!("Z/8".parse::<Ring>().is_err());
        assert_eq!(Ring::IntegersModP(3).to_string(), "Z/3");
        let json = serde_json::to_string(&Ring::IntegersModP(5)).unwrap();
        assert_eq!(json, "\"Z/5\"");
        assert!(serde_json::from_str::<Ring>("\"Z/6\"").is_err());
    }

    #[test]
    fn reduce_is_canonical() {
        let r = Ring::IntegersModP(7);
        assert_eq!(r.reduce(-1), 6);
        assert_eq!(r.reduce(15), 1);
        assert_eq!(Ring::Integers.reduce(-4), -4);
    }
}
