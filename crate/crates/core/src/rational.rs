//! Exact rational helpers on top of `num-rational`.
//!
//! Canonical text form is `"p/q"` with `q > 0` and `gcd(p, q) = 1`; integers
//! are written with an explicit `/1`.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi<T: Into<BigInt>>(n: T) -> Q {
    Q::from_integer(n.into())
}

pub fn qu(n: &BigUint) -> Q {
    Q::from_integer(BigInt::from_biguint(Sign::Plus, n.clone()))
}

pub fn to_canonical(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `"p/q"` or a bare integer `"p"`. Non-reduced input is accepted and
/// reduced; a zero denominator is rejected.
pub fn parse_q(s: &str) -> Result<Q, Error> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational `{s}`"));
    match s.split_once('/') {
        Some((p, d)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Q::new(p, d))
        }
        None => Ok(Q::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn ceil_to_int(x: &Q) -> BigInt {
    x.ceil().to_integer()
}

pub fn floor_to_int(x: &Q) -> BigInt {
    x.floor().to_integer()
}

/// Non-negative integer value of `x`, if it is one.
pub fn as_nat(x: &Q) -> Option<BigUint> {
    if x.is_integer() && !x.is_negative() {
        x.to_integer().to_biguint()
    } else {
        None
    }
}

pub fn as_u64(x: &Q) -> Option<u64> {
    as_nat(x).and_then(|v| v.to_u64())
}

pub fn big_to_q(n: &BigUint) -> Q {
    qu(n)
}

/// Number of bits of the integer part of `|x|`.
pub fn int_bits(x: &Q) -> u64 {
    x.abs().to_integer().bits()
}

pub fn min_q<'a>(a: &'a Q, b: &'a Q) -> &'a Q {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn max_q<'a>(a: &'a Q, b: &'a Q) -> &'a Q {
    if a >= b {
        a
    } else {
        b
    }
}

/// Serde adapter for canonical rational strings.
pub mod canon {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
        to_canonical(x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s).map_err(serde::de::Error::custom)
    }
}

pub mod canon_vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[Q], s: S) -> Result<S::Ok, S::Error> {
        xs.iter().map(to_canonical).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| parse_q(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for `(index, value)` traces.
pub mod canon_trace {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[(u64, Q)], s: S) -> Result<S::Ok, S::Error> {
        xs.iter()
            .map(|(n, v)| (*n, to_canonical(v)))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(u64, Q)>, D::Error> {
        let v = Vec::<(u64, String)>::deserialize(d)?;
        v.into_iter()
            .map(|(n, s)| parse_q(&s).map(|x| (n, x)).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for big integers as decimal strings.
pub mod big {
    use super::*;

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        x.to_string().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
