//! Exact rational scalars and their `"p/q"` string encoding.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serializer};

/// The scalar field of every computation in this crate.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
  Q::from_integer(BigInt::from(n))
}

pub fn qf(n: i64, d: i64) -> Q {
  Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn zero() -> Q {
  Q::zero()
}

pub fn one() -> Q {
  Q::one()
}

pub fn half() -> Q {
  qf(1, 2)
}

/// Formats as `"p/q"`, or `"p"` when the denominator is one.
pub fn fmt_q(x: &Q) -> String {
  if x.denom().is_one() {
    x.numer().to_string()
  } else {
    format!("{}/{}", x.numer(), x.denom())
  }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {0:?}")]
pub struct ParseRationalError(pub String);

pub fn parse_q(s: &str) -> Result<Q, ParseRationalError> {
  let err = || ParseRationalError(s.to_string());
  let s = s.trim();
  match s.split_once('/') {
    Some((n, d)) => {
      let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
      let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
      if d.is_zero() {
        return Err(err());
      }
      Ok(Q::new(n, d))
    }
    None => BigInt::from_str(s).map(Q::from_integer).map_err(|_| err()),
  }
}

/// Largest absolute value of numerator or denominator.
pub fn height(x: &Q) -> BigInt {
  let n = x.numer().abs();
  let d = x.denom().abs();
  if n > d {
    n
  } else {
    d
  }
}

pub fn ser_q<S: Serializer>(x: &Q, s: S) -> Result<S::Ok, S::Error> {
  s.serialize_str(&fmt_q(x))
}

pub fn de_q<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
  let s = String::deserialize(d)?;
  parse_q(&s).map_err(serde::de::Error::custom)
}
