//! Exact number helpers and the textual interchange formats.
//!
//! Rationals travel as `"numerator/denominator"` strings and digit sequences
//! as comma-separated positive integers.

use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision fraction, always kept in lowest terms with a positive denominator.
pub type Rational = BigRational;

pub fn ratio(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Rational {
    Rational::new(num.into(), den.into())
}

pub fn from_uint(n: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from(n.clone()))
}

pub fn recip_uint(n: &BigUint) -> Rational {
    Rational::new(BigInt::one(), BigInt::from(n.clone()))
}

/// Parses `"n/d"` or a bare integer `"n"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num = BigInt::from_str(num).map_err(|_| bad())?;
    let den = BigInt::from_str(den).map_err(|_| bad())?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(num, den))
}

/// Always `"numerator/denominator"`, even for integers.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn parse_digits(s: &str) -> Result<Vec<BigUint>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let d = BigUint::from_str(tok)
                .map_err(|_| Error::Parse(format!("not a positive integer: {tok:?}")))?;
            if d.is_zero() {
                return Err(Error::Validation("digits must be >= 1".into()));
            }
            Ok(d)
        })
        .collect()
}

pub fn format_digits(digits: &[BigUint]) -> String {
    digits
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Nearest f64 for display purposes. Handles numerators and denominators far
/// beyond the f64 exponent range by rescaling both to ~64 significant bits.
pub fn to_f64(r: &Rational) -> f64 {
    if let Some(v) = r.to_f64() {
        if v.is_finite() && (v != 0.0 || r.is_zero()) {
            return v;
        }
    }
    let num = r.numer().abs();
    let den = r.denom();
    let shift_n = num.bits().saturating_sub(64);
    let shift_d = den.bits().saturating_sub(64);
    let n = (num >> shift_n).to_f64().unwrap_or(f64::NAN);
    let d = (den >> shift_d).to_f64().unwrap_or(f64::NAN);
    let exp = shift_n as f64 - shift_d as f64;
    let v = n / d * exp.exp2();
    if r.is_negative() {
        -v
    } else {
        v
    }
}

/// Serde adapter writing rationals as `"n/d"` strings.
pub mod serde_rational {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_rational_vec {
    use super::*;
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for r in v {
            seq.serialize_element(&format_rational(r))?;
        }
        seq.end()
    }
}

/// Serde adapter writing big integers as decimal strings.
pub mod serde_biguint {
    use super::*;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }
}

pub mod serde_digits {
    use super::*;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(d: &[BigUint], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_digits(d))
    }
}
