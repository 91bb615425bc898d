//! Exact polynomials in the sample size `n`, in two bases.
//!
//! `FactorialPolynomial` stores coefficients against the falling factorials
//! `n↓ℓ = n(n-1)…(n-ℓ+1)`, which is the basis in which partition sweeps
//! accumulate naturally (one term per block count). `StandardPolynomial` is
//! the ordinary monomial basis used for coefficient extraction and display.
//! Conversion between the two goes through Stirling numbers and is exact.

use crate::rational::{parse_rational, Rational};
use num::{BigInt, One, Signed, Zero};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyJsonError {
    #[error("polynomial JSON must be an object with \"basis\" and \"coeffs\"")]
    Shape,
    #[error("expected basis {expected:?}, found {found:?}")]
    Basis { expected: &'static str, found: String },
    #[error("bad degree key {0:?}")]
    Degree(String),
    #[error("bad coefficient {0:?}")]
    Coefficient(String),
}

/// `n(n-1)…(n-l+1)` as an exact integer; 1 for `l = 0`. The product form is
/// valid (and zero) whenever `0 <= n < l`.
pub fn falling_factorial(n: &BigInt, l: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..l {
        acc *= n - BigInt::from(i);
    }
    acc
}

/// Monomial coefficients of `n↓l`, i.e. the signed Stirling numbers of the
/// first kind `s(l, k)` for `k = 0..=l`.
fn falling_factorial_monomials(l: usize) -> Vec<BigInt> {
    let mut coeffs = vec![BigInt::one()];
    for i in 0..l {
        // multiply by (n - i)
        let mut next = vec![BigInt::zero(); coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * BigInt::from(i);
        }
        coeffs = next;
    }
    coeffs
}

/// Stirling numbers of the second kind `S(k, j)` for `j = 0..=k`, giving the
/// expansion `n^k = Σ_j S(k, j) n↓j`.
fn stirling_second_row(k: usize) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()]; // S(0,0) = 1
    for _ in 0..k {
        let mut next = vec![BigInt::zero(); row.len() + 1];
        for (j, s) in row.iter().enumerate() {
            next[j + 1] += s;
            next[j] += s * BigInt::from(j);
        }
        row = next;
    }
    row
}

fn clean_insert(map: &mut BTreeMap<usize, Rational>, deg: usize, c: Rational) {
    if c.is_zero() {
        return;
    }
    let entry = map.entry(deg).or_insert_with(Rational::zero);
    *entry += c;
    if entry.is_zero() {
        map.remove(&deg);
    }
}

fn coeffs_to_json(basis: &str, coeffs: &BTreeMap<usize, Rational>) -> Value {
    let mut obj = serde_json::Map::new();
    for (deg, c) in coeffs {
        obj.insert(deg.to_string(), Value::String(c.to_string()));
    }
    json!({ "basis": basis, "coeffs": Value::Object(obj) })
}

fn coeffs_from_json(
    expected: &'static str,
    v: &Value,
) -> Result<BTreeMap<usize, Rational>, PolyJsonError> {
    let obj = v.as_object().ok_or(PolyJsonError::Shape)?;
    let basis = obj
        .get("basis")
        .and_then(Value::as_str)
        .ok_or(PolyJsonError::Shape)?;
    if basis != expected {
        return Err(PolyJsonError::Basis {
            expected,
            found: basis.to_string(),
        });
    }
    let coeffs = obj
        .get("coeffs")
        .and_then(Value::as_object)
        .ok_or(PolyJsonError::Shape)?;
    let mut map = BTreeMap::new();
    for (k, raw) in coeffs {
        let deg: usize = k.parse().map_err(|_| PolyJsonError::Degree(k.clone()))?;
        let s = raw
            .as_str()
            .ok_or_else(|| PolyJsonError::Coefficient(raw.to_string()))?;
        let c = parse_rational(s).map_err(|e| PolyJsonError::Coefficient(e.0))?;
        clean_insert(&mut map, deg, c);
    }
    Ok(map)
}

/// Writes one monomial-style term, e.g. `n^3/16`, `5n^2/48`, `n`, `7`.
fn write_term(f: &mut fmt::Formatter<'_>, c: &Rational, var: &str) -> fmt::Result {
    let numer = c.numer();
    let denom = c.denom();
    if var.is_empty() {
        return write!(f, "{}", c);
    }
    if numer.abs().is_one() {
        write!(f, "{}", var)?;
    } else {
        write!(f, "{}{}", numer.abs(), var)?;
    }
    if !denom.is_one() {
        write!(f, "/{}", denom)?;
    }
    Ok(())
}

fn write_poly(
    f: &mut fmt::Formatter<'_>,
    coeffs: &BTreeMap<usize, Rational>,
    var_of: impl Fn(usize) -> String,
) -> fmt::Result {
    if coeffs.is_empty() {
        return write!(f, "0");
    }
    for (i, (deg, c)) in coeffs.iter().rev().enumerate() {
        if i == 0 {
            if c.is_negative() {
                write!(f, "-")?;
            }
        } else if c.is_negative() {
            write!(f, " - ")?;
        } else {
            write!(f, " + ")?;
        }
        write_term(f, c, &var_of(*deg))?;
    }
    Ok(())
}

/// Polynomial `P(n) = Σ_ℓ c_ℓ · n↓ℓ` with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FactorialPolynomial {
    coeffs: BTreeMap<usize, Rational>,
}

impl FactorialPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The symbolic falling factorial `n↓l` itself.
    pub fn falling(l: usize) -> Self {
        let mut p = Self::zero();
        p.add_term(l, Rational::one());
        p
    }

    pub fn add_term(&mut self, level: usize, c: Rational) {
        clean_insert(&mut self.coeffs, level, c);
    }

    pub fn coeff(&self, level: usize) -> Rational {
        self.coeffs.get(&level).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Rational)> {
        self.coeffs.iter().map(|(l, c)| (*l, c))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        let mut out = Self::zero();
        for (l, c) in &self.coeffs {
            out.add_term(*l, c * s);
        }
        out
    }

    pub fn evaluate(&self, n: &BigInt) -> Rational {
        let mut acc = Rational::zero();
        for (l, c) in &self.coeffs {
            acc += c * Rational::from(falling_factorial(n, *l));
        }
        acc
    }

    pub fn to_standard(&self) -> StandardPolynomial {
        let mut out = StandardPolynomial::zero();
        for (l, c) in &self.coeffs {
            for (k, s) in falling_factorial_monomials(*l).into_iter().enumerate() {
                out.add_term(k, c * Rational::from(s));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        coeffs_to_json("falling", &self.coeffs)
    }

    pub fn from_json(v: &Value) -> Result<Self, PolyJsonError> {
        Ok(Self {
            coeffs: coeffs_from_json("falling", v)?,
        })
    }
}

impl Add for FactorialPolynomial {
    type Output = FactorialPolynomial;
    fn add(mut self, rhs: FactorialPolynomial) -> FactorialPolynomial {
        for (l, c) in rhs.coeffs {
            self.add_term(l, c);
        }
        self
    }
}

impl fmt::Display for FactorialPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, &self.coeffs, |deg| {
            if deg == 0 {
                String::new()
            } else {
                format!("n↓{}", deg)
            }
        })
    }
}

/// Polynomial `P(n) = Σ_k c_k · n^k` with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StandardPolynomial {
    coeffs: BTreeMap<usize, Rational>,
}

impl StandardPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(0, c);
        p
    }

    pub fn add_term(&mut self, deg: usize, c: Rational) {
        clean_insert(&mut self.coeffs, deg, c);
    }

    pub fn coeff(&self, deg: usize) -> Rational {
        self.coeffs.get(&deg).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Rational)> {
        self.coeffs.iter().map(|(l, c)| (*l, c))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        let mut out = Self::zero();
        for (k, c) in &self.coeffs {
            out.add_term(*k, c * s);
        }
        out
    }

    pub fn evaluate(&self, n: &BigInt) -> Rational {
        let mut acc = Rational::zero();
        let mut power = BigInt::one();
        let mut last = 0usize;
        for (k, c) in &self.coeffs {
            for _ in last..*k {
                power *= n;
            }
            last = *k;
            acc += c * Rational::from(power.clone());
        }
        acc
    }

    pub fn to_factorial(&self) -> FactorialPolynomial {
        let mut out = FactorialPolynomial::zero();
        for (k, c) in &self.coeffs {
            for (j, s) in stirling_second_row(*k).into_iter().enumerate() {
                out.add_term(j, c * Rational::from(s));
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        coeffs_to_json("monomial", &self.coeffs)
    }

    pub fn from_json(v: &Value) -> Result<Self, PolyJsonError> {
        Ok(Self {
            coeffs: coeffs_from_json("monomial", v)?,
        })
    }
}

impl Add for StandardPolynomial {
    type Output = StandardPolynomial;
    fn add(mut self, rhs: StandardPolynomial) -> StandardPolynomial {
        for (k, c) in rhs.coeffs {
            self.add_term(k, c);
        }
        self
    }
}

impl Sub for StandardPolynomial {
    type Output = StandardPolynomial;
    fn sub(mut self, rhs: StandardPolynomial) -> StandardPolynomial {
        for (k, c) in rhs.coeffs {
            self.add_term(k, -c);
        }
        self
    }
}

impl Mul for &StandardPolynomial {
    type Output = StandardPolynomial;
    fn mul(self, rhs: &StandardPolynomial) -> StandardPolynomial {
        let mut out = StandardPolynomial::zero();
        for (i, a) in &self.coeffs {
            for (j, b) in &rhs.coeffs {
                out.add_term(i + j, a * b);
            }
        }
        out
    }
}

impl fmt::Display for StandardPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, &self.coeffs, |deg| match deg {
            0 => String::new(),
            1 => "n".to_string(),
            d => format!("n^{}", d),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use proptest::prelude::*;

    #[test]
    fn falling_factorial_values() {
        assert_eq!(falling_factorial(&BigInt::from(5), 3), BigInt::from(60));
        assert_eq!(falling_factorial(&BigInt::from(2), 4), BigInt::from(0));
        assert_eq!(falling_factorial(&BigInt::from(7), 0), BigInt::from(1));
    }

    #[test]
    fn symbolic_falling_factorial_in_monomial_basis() {
        // n↓2 = n^2 - n
        let p = FactorialPolynomial::falling(2).to_standard();
        assert_eq!(p.coeff(2), rat(1, 1));
        assert_eq!(p.coeff(1), rat(-1, 1));
        assert_eq!(p.coeff(0), rat(0, 1));
    }

    #[test]
    fn display_matches_reference_layout() {
        let mut p = StandardPolynomial::zero();
        p.add_term(3, rat(1, 16));
        p.add_term(2, rat(-5, 48));
        p.add_term(1, rat(1, 24));
        assert_eq!(p.to_string(), "n^3/16 - 5n^2/48 + n/24");
    }

    #[test]
    fn json_round_trip() {
        let mut p = StandardPolynomial::zero();
        p.add_term(4, rat(269, 40320));
        p.add_term(1, rat(-1, 280));
        let back = StandardPolynomial::from_json(&p.to_json()).unwrap();
        assert_eq!(p, back);
        assert!(StandardPolynomial::from_json(&FactorialPolynomial::falling(2).to_json()).is_err());
    }

    #[test]
    fn evaluate_agrees_across_bases() {
        let mut p = FactorialPolynomial::zero();
        p.add_term(3, rat(1, 16));
        p.add_term(2, rat(1, 12));
        let q = p.to_standard();
        for n in 0..8i64 {
            let n = BigInt::from(n);
            assert_eq!(p.evaluate(&n), q.evaluate(&n));
        }
    }

    fn arb_rat() -> impl Strategy<Value = Rational> {
        (-40i64..40, 1i64..20).prop_map(|(a, b)| rat(a, b))
    }

    proptest! {
        // Basis round-trip is the identity on random rational polynomials.
        #[test]
        fn basis_round_trip(coeffs in proptest::collection::vec(arb_rat(), 1..11)) {
            let mut p = FactorialPolynomial::zero();
            for (l, c) in coeffs.into_iter().enumerate() {
                p.add_term(l, c);
            }
            prop_assert_eq!(p.to_standard().to_factorial(), p.clone());
            let s = p.to_standard();
            prop_assert_eq!(s.to_factorial().to_standard(), s);
        }
    }
}
