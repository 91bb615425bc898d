//! Exact rational scalars shared by the reduction engine and the moment calculus.
//!
//! Values are arbitrary-precision fractions, always stored reduced with a
//! positive denominator (`num`'s `BigRational` maintains both invariants).
//! The text form is `num/den`, with the `/den` part omitted when the
//! denominator is 1; `parse_rational` accepts both shapes.

use num::BigInt;
use num::BigRational;
use std::str::FromStr;
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid rational literal {0:?}")]
pub struct RationalParseError(pub String);

/// Builds a rational from small integer parts. Panics on a zero denominator.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn parse_rational(s: &str) -> Result<Rational, RationalParseError> {
    Rational::from_str(s.trim()).map_err(|_| RationalParseError(s.to_string()))
}
