//! Digit sequences of the alternating Pierce series and their cylinders.
//!
//! A real `x` in `(0, 1)` is written as
//!
//! ```text
//! x = 1/q1 - 1/(q1 q2) + 1/(q1 q2 q3) - ...      q1 < q2 < q3 < ...
//! ```
//!
//! and, in difference form, through the digits `g1 = q1`, `g(n+1) = q(n+1) - q(n)`,
//! all of which are `>= 1`. [`QSequence`] holds the first form and [`GSequence`]
//! the second; `q(n)` is the running sum `sigma(n) = g1 + ... + gn`.
//!
//! Cylinder orientation: for a prefix of length `k` with partial sum `S_k`, every
//! point of the cylinder is `S_k + (-1)^k t / (q1 ... qk)` with `t` in
//! `[0, 1/(q(k) + 1)]`. Odd `k` puts `S_k` on the right endpoint, even `k` on the
//! left one; the other endpoint is the partial sum of the prefix extended by a
//! single digit `1`.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Strictly increasing denominators `q1 < q2 < ...` of the series.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QSequence(Vec<BigUint>);

impl QSequence {
    pub fn new(digits: Vec<BigUint>) -> Result<Self> {
        if digits.first().is_some_and(Zero::is_zero) {
            return Err(Error::Validation("q-digits must be positive".into()));
        }
        if let Some(w) = digits.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Validation(format!(
                "q-digits must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self(digits))
    }

    pub fn digits(&self) -> &[BigUint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Difference-form digits `g1, g2, ...`, each `>= 1`.
///
/// A `terminated` sequence is the complete expansion of a rational; otherwise it
/// is a prefix of some longer (possibly infinite) expansion.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GSequence {
    #[serde(with = "rational::serde_digits")]
    digits: Vec<BigUint>,
    terminated: bool,
}

impl GSequence {
    /// A prefix of an expansion. Any digits `>= 1` are admissible.
    pub fn prefix(digits: Vec<BigUint>) -> Result<Self> {
        if digits.iter().any(Zero::is_zero) {
            return Err(Error::Validation("g-digits must be >= 1".into()));
        }
        Ok(Self {
            digits,
            terminated: false,
        })
    }

    pub fn prefix_u64(digits: &[u64]) -> Result<Self> {
        Self::prefix(digits.iter().map(|&d| BigUint::from(d)).collect())
    }

    /// The complete expansion of a rational in `(0, 1)`.
    ///
    /// Only the canonical form is accepted: a finite expansion must end in a
    /// digit `>= 2`. The alternative form ending in `..., g, 1` denotes the same
    /// number as `..., g + 1` and is rejected.
    pub fn terminated(digits: Vec<BigUint>) -> Result<Self> {
        let mut seq = Self::prefix(digits)?;
        match seq.digits.last() {
            None => return Err(Error::Validation("terminated expansion is empty".into())),
            Some(last) if last.is_one() => {
                return Err(Error::Validation(
                    "non-canonical expansion: a finite expansion ends in a digit >= 2".into(),
                ))
            }
            Some(_) => {}
        }
        seq.terminated = true;
        Ok(seq)
    }

    pub fn digits(&self) -> &[BigUint] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// Running sums `sigma(j) = g1 + ... + gj`, i.e. the q-digits.
    pub fn sigmas(&self) -> Vec<BigUint> {
        self.digits
            .iter()
            .scan(BigUint::zero(), |acc, g| {
                *acc += g;
                Some(acc.clone())
            })
            .collect()
    }

    pub fn to_q(&self) -> QSequence {
        QSequence(self.sigmas())
    }

    pub fn from_q(q: &QSequence) -> Self {
        let mut prev = BigUint::zero();
        let digits = q
            .digits()
            .iter()
            .map(|qk| {
                let g = qk - &prev;
                prev = qk.clone();
                g
            })
            .collect();
        Self {
            digits,
            terminated: false,
        }
    }

    /// The first `n` digits, as a prefix.
    pub fn truncate(&self, n: usize) -> Self {
        Self {
            digits: self.digits[..n.min(self.len())].to_vec(),
            terminated: self.terminated && n >= self.len(),
        }
    }

    /// Appends a digit; the result is a prefix.
    pub fn extended(&self, digit: BigUint) -> Result<Self> {
        if digit.is_zero() {
            return Err(Error::Validation("g-digits must be >= 1".into()));
        }
        let mut digits = self.digits.clone();
        digits.push(digit);
        Ok(Self {
            digits,
            terminated: false,
        })
    }
}

impl fmt::Display for GSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&rational::format_digits(&self.digits))
    }
}

pub fn q_from_g(g: &GSequence) -> QSequence {
    g.to_q()
}

pub fn g_from_q(q: &QSequence) -> GSequence {
    GSequence::from_q(q)
}

/// Lazy g-digit extraction for `numerator / denominator` in `(0, 1)`.
///
/// With `x = r / d` the greedy step `q = floor(1/x)`, `x' = 1 - q x` keeps the
/// denominator: `q = d div r` and the new remainder is `d mod r`. Remainders
/// strictly decrease, so the iterator is finite and needs no gcd work.
#[derive(Debug, Clone)]
pub struct PierceDigits {
    den: BigUint,
    rem: BigUint,
    prev_q: BigUint,
}

impl PierceDigits {
    pub fn new(numerator: BigUint, denominator: BigUint) -> Result<Self> {
        if numerator.is_zero() || numerator >= denominator {
            return Err(Error::Domain(format!(
                "expansion needs 0 < x < 1, got {numerator}/{denominator}"
            )));
        }
        Ok(Self {
            den: denominator,
            rem: numerator,
            prev_q: BigUint::zero(),
        })
    }

    pub fn from_rational(x: &Rational) -> Result<Self> {
        if !x.is_positive() || x >= &Rational::one() {
            return Err(Error::Domain(format!(
                "expansion needs 0 < x < 1, got {}",
                rational::format_rational(x)
            )));
        }
        let num = x.numer().to_biguint().expect("positive");
        let den = x.denom().to_biguint().expect("positive");
        Self::new(num, den)
    }

    /// Current remainder, `x_n = remainder / denominator`.
    pub fn remainder(&self) -> &BigUint {
        &self.rem
    }
}

impl Iterator for PierceDigits {
    type Item = BigUint;

    fn next(&mut self) -> Option<BigUint> {
        if self.rem.is_zero() {
            return None;
        }
        let (q, r) = self.den.div_rem(&self.rem);
        let g = &q - &self.prev_q;
        self.prev_q = q;
        self.rem = r;
        Some(g)
    }
}

/// Full canonical expansion of a rational in `(0, 1)`.
pub fn encode(x: &Rational) -> Result<GSequence> {
    let digits: Vec<BigUint> = PierceDigits::from_rational(x)?.collect();
    GSequence::terminated(digits)
}

/// Partial sum `S_depth` of the series built on `g`.
pub fn evaluate(g: &GSequence, depth: usize) -> Result<Rational> {
    if depth == 0 {
        return Err(Error::Domain("evaluation depth must be >= 1".into()));
    }
    if depth > g.len() {
        return Err(Error::Domain(format!(
            "depth {depth} exceeds the {} available digits",
            g.len()
        )));
    }
    Ok(nested_sum(&g.sigmas()[..depth]))
}

/// `1/q1 (1 - 1/q2 (1 - ... (1 - 1/qk)))`, accumulated from the inside with a
/// shared denominator and reduced once at the end.
fn nested_sum(q: &[BigUint]) -> Rational {
    let mut num = BigInt::zero();
    let mut den = BigInt::one();
    for qk in q.iter().rev() {
        let qk = BigInt::from(qk.clone());
        num = &den - &num;
        den *= qk;
    }
    Rational::new(num, den)
}

/// Closure of the set of points whose expansion starts with `prefix`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cylinder {
    pub prefix: GSequence,
    #[serde(serialize_with = "serialize_sigmas")]
    pub sigma: Vec<BigUint>,
    #[serde(with = "rational::serde_rational")]
    pub left: Rational,
    #[serde(with = "rational::serde_rational")]
    pub right: Rational,
    #[serde(with = "rational::serde_rational")]
    pub length: Rational,
}

fn serialize_sigmas<S: serde::Serializer>(
    v: &[BigUint],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    rational::serde_digits::serialize(v, s)
}

impl Cylinder {
    pub fn depth(&self) -> usize {
        self.prefix.len()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.left <= x && x <= &self.right
    }

    pub fn midpoint(&self) -> Rational {
        (&self.left + &self.right) / BigInt::from(2)
    }
}

/// Exact cylinder of a digit prefix. The empty prefix yields `[0, 1]`.
pub fn cylinder(prefix: &GSequence) -> Cylinder {
    let sigma = prefix.sigmas();
    let prefix = prefix.truncate(prefix.len());
    let Some(last) = sigma.last() else {
        return Cylinder {
            prefix: GSequence::prefix(Vec::new()).expect("empty prefix"),
            sigma,
            left: Rational::zero(),
            right: Rational::one(),
            length: Rational::one(),
        };
    };
    let product: BigUint = sigma.iter().product();
    let length = rational::recip_uint(&(product * (last + 1u32)));
    let partial = nested_sum(&sigma);
    let (left, right) = if sigma.len() % 2 == 1 {
        (&partial - &length, partial)
    } else {
        (partial.clone(), partial + &length)
    };
    Cylinder {
        prefix: GSequence {
            digits: prefix.digits,
            terminated: false,
        },
        sigma,
        left,
        right,
        length,
    }
}

/// One-sided shift: drops the leading digit.
pub fn shift(g: &GSequence) -> Result<GSequence> {
    match g.len() {
        0 => Err(Error::Domain("cannot shift an empty sequence".into())),
        1 if g.terminated => Err(Error::OrbitTerminated),
        _ => Ok(GSequence {
            digits: g.digits[1..].to_vec(),
            terminated: g.terminated,
        }),
    }
}

/// `k`-fold shift.
pub fn shift_n(g: &GSequence, k: usize) -> Result<GSequence> {
    (0..k).try_fold(g.clone(), |acc, _| shift(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use proptest::prelude::*;

    fn g(d: &[u64]) -> GSequence {
        GSequence::prefix_u64(d).unwrap()
    }

    fn digits(d: &[u64]) -> Vec<BigUint> {
        d.iter().map(|&x| BigUint::from(x)).collect()
    }

    /// Direct evaluation of the q-form series, term by term.
    fn q_series(q: &[u64]) -> Rational {
        let mut sum = Rational::zero();
        let mut prod = BigInt::one();
        for (k, &qk) in q.iter().enumerate() {
            prod *= qk;
            let term = Rational::new(BigInt::one(), prod.clone());
            if k % 2 == 0 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        sum
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode(&ratio(1, 2)).unwrap().digits(), digits(&[2]));
        let e = encode(&ratio(2, 5)).unwrap();
        assert_eq!(e.digits(), digits(&[2, 3]));
        assert_eq!(e.to_q().digits(), digits(&[2, 5]));
        assert_eq!(q_series(&[2, 5]), ratio(2, 5));
        let e = encode(&ratio(5, 7)).unwrap();
        assert_eq!(e.digits(), digits(&[1, 2, 4]));
        assert_eq!(q_series(&[1, 3, 7]), ratio(5, 7));
        assert!(e.is_terminated());
    }

    #[test]
    fn encode_rejects_outside_unit_interval() {
        for x in [ratio(0, 1), ratio(1, 1), ratio(3, 2), ratio(-1, 3)] {
            assert!(matches!(encode(&x), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(evaluate(&g(&[2]), 1).unwrap(), ratio(1, 2));
        assert_eq!(evaluate(&g(&[1, 1, 1]), 3).unwrap(), ratio(2, 3));
        assert_eq!(evaluate(&g(&[2, 3]), 2).unwrap(), ratio(2, 5));
        assert!(matches!(evaluate(&g(&[2, 3]), 0), Err(Error::Domain(_))));
        assert!(evaluate(&g(&[2, 3]), 3).is_err());
    }

    #[test]
    fn q_g_conversions() {
        assert_eq!(g(&[2, 3]).to_q().digits(), digits(&[2, 5]));
        let q = QSequence::new(digits(&[1, 3, 7])).unwrap();
        assert_eq!(g_from_q(&q).digits(), digits(&[1, 2, 4]));
        assert_eq!(g(&[1, 1, 1, 1]).to_q().digits(), digits(&[1, 2, 3, 4]));
        assert!(QSequence::new(digits(&[2, 2])).is_err());
        assert!(QSequence::new(digits(&[3, 1])).is_err());
        assert!(QSequence::new(digits(&[0, 1])).is_err());
    }

    #[test]
    fn non_canonical_terminated_rejected() {
        // (1, 1) sums to 1 - 1/2 = 1/2, the same number as (2).
        assert_eq!(evaluate(&g(&[1, 1]), 2).unwrap(), ratio(1, 2));
        assert!(GSequence::terminated(digits(&[1, 1])).is_err());
        assert!(GSequence::terminated(digits(&[1])).is_err());
        assert!(GSequence::terminated(digits(&[1, 2])).is_ok());
        assert!(GSequence::prefix(digits(&[1, 0])).is_err());
    }

    #[test]
    fn cylinder_examples() {
        let c = cylinder(&g(&[1]));
        assert_eq!(
            (c.left.clone(), c.right.clone()),
            (ratio(1, 2), ratio(1, 1))
        );
        assert_eq!(c.length, ratio(1, 2));
        let c = cylinder(&g(&[2]));
        assert_eq!(
            (c.left.clone(), c.right.clone()),
            (ratio(1, 3), ratio(1, 2))
        );
        assert_eq!(c.length, ratio(1, 6));
        let c = cylinder(&g(&[]));
        assert_eq!(
            (c.left, c.right, c.length),
            (ratio(0, 1), ratio(1, 1), ratio(1, 1))
        );
        let c = cylinder(&g(&[1, 1]));
        assert_eq!(c.length, ratio(1, 6));
    }

    #[test]
    fn all_ones_cylinder_length() {
        let mut fact = BigInt::one();
        for k in 1..=15u32 {
            fact *= k;
            let c = cylinder(&g(&vec![1; k as usize]));
            assert_eq!(c.length, Rational::new(BigInt::one(), &fact * (k + 1)));
        }
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift(&g(&[2, 3, 7])).unwrap(), g(&[3, 7]));
        assert_eq!(shift(&g(&[1, 1, 1])).unwrap(), g(&[1, 1]));
        let t = encode(&ratio(1, 2)).unwrap();
        assert_eq!(shift(&t), Err(Error::OrbitTerminated));
        assert!(shift(&g(&[])).is_err());
        let x = encode(&ratio(5, 7)).unwrap();
        let s = shift(&x).unwrap();
        assert!(s.is_terminated());
        assert_eq!(s.digits(), digits(&[2, 4]));
    }

    #[test]
    fn shift_then_evaluate_is_suffix_value() {
        let seq = g(&[2, 3, 7, 1, 5]);
        for k in 0..4 {
            let shifted = shift_n(&seq, k).unwrap();
            let suffix = g(&[2, 3, 7, 1, 5][k..]);
            assert_eq!(
                evaluate(&shifted, shifted.len()).unwrap(),
                evaluate(&suffix, suffix.len()).unwrap()
            );
        }
    }

    #[test]
    fn other_endpoint_is_one_digit_extension() {
        for prefix in [&[1u64][..], &[2, 3], &[1, 4, 2], &[3, 1, 1, 2]] {
            let p = g(prefix);
            let c = cylinder(&p);
            let ext = p.extended(BigUint::one()).unwrap();
            let v = evaluate(&ext, ext.len()).unwrap();
            let s = evaluate(&p, p.len()).unwrap();
            assert!(v == c.left || v == c.right);
            assert!(s == c.left || s == c.right);
            assert_ne!(v, s);
        }
    }

    proptest! {
        #[test]
        fn round_trip(num in 1u64..1_000_000, den in 2u64..1_000_000) {
            prop_assume!(num < den);
            let x = ratio(num, den);
            let e = encode(&x).unwrap();
            prop_assert_eq!(evaluate(&e, e.len()).unwrap(), x);
            prop_assert!(QSequence::new(e.sigmas()).is_ok());
        }

        #[test]
        fn q_g_bijection(d in proptest::collection::vec(1u64..50, 0..12)) {
            let seq = g(&d);
            prop_assert_eq!(g_from_q(&q_from_g(&seq)), seq);
        }

        #[test]
        fn nesting(d in proptest::collection::vec(1u64..20, 0..6), c in 1u64..40) {
            let parent = cylinder(&g(&d));
            let mut dd = d.clone();
            dd.push(c);
            let child = cylinder(&g(&dd));
            prop_assert!(child.left >= parent.left);
            prop_assert!(child.right <= parent.right);
            prop_assert_eq!(&child.right - &child.left, child.length.clone());
        }

        #[test]
        fn alternating_enclosure(d in proptest::collection::vec(1u64..30, 2..14)) {
            let seq = g(&d);
            let sums: Vec<Rational> = (1..=seq.len()).map(|k| evaluate(&seq, k).unwrap()).collect();
            let x = sums.last().unwrap().clone();
            for (i, s) in sums.iter().enumerate() {
                // odd partial sums (1-based) sit above the limit, even ones below
                if i % 2 == 0 { prop_assert!(s >= &x); } else { prop_assert!(s <= &x); }
            }
            for w in sums.windows(3) {
                let (a, c) = (&w[0], &w[2]);
                let from_above = a >= &w[1];
                let ordered = if from_above { a >= c } else { a <= c };
                prop_assert!(ordered);
            }
        }
    }
}
