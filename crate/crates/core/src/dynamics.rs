//! Digit statistics along shift orbits and uniform-sample frequency experiments.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::{GSequence, PierceDigits};
use crate::rational::{self, Rational};
use crate::rng;

/// Counts `N_i(x, n)` of every digit among the first `n` digits of `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitStats {
    pub depth: usize,
    pub counts: BTreeMap<BigUint, u64>,
    pub max_digit: BigUint,
}

impl DigitStats {
    pub fn from_digits<I>(digits: I, depth: usize) -> Result<Self>
    where
        I: IntoIterator<Item = BigUint>,
    {
        if depth == 0 {
            return Err(Error::Domain("depth must be >= 1".into()));
        }
        let mut counts = BTreeMap::new();
        let mut max_digit = BigUint::zero();
        let mut seen = 0;
        for d in digits.into_iter().take(depth) {
            if d > max_digit {
                max_digit = d.clone();
            }
            *counts.entry(d).or_insert(0) += 1;
            seen += 1;
        }
        if seen < depth {
            return Err(Error::Terminated {
                achieved: seen,
                requested: depth,
            });
        }
        Ok(Self {
            depth,
            counts,
            max_digit,
        })
    }

    pub fn count(&self, digit: &BigUint) -> u64 {
        self.counts.get(digit).copied().unwrap_or(0)
    }

    /// `N_i(x, n) / n`.
    pub fn frequency(&self, digit: &BigUint) -> Rational {
        rational::ratio(self.count(digit), self.depth as u64)
    }
}

pub fn digit_stats(x: &Rational, depth: usize) -> Result<DigitStats> {
    DigitStats::from_digits(PierceDigits::from_rational(x)?, depth)
}

/// Indicator of the cylinder fixed by `prefix`; a single digit gives the
/// observable behind the digit frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CylinderIndicator {
    prefix: Vec<BigUint>,
}

impl CylinderIndicator {
    pub fn new(prefix: Vec<BigUint>) -> Result<Self> {
        if prefix.is_empty() || prefix.iter().any(Zero::is_zero) {
            return Err(Error::Validation(
                "indicator prefix must be non-empty with digits >= 1".into(),
            ));
        }
        Ok(Self { prefix })
    }

    pub fn digit(i: u64) -> Result<Self> {
        Self::new(vec![BigUint::from(i)])
    }

    /// Value on the point whose digits start with `orbit_point`.
    pub fn eval(&self, orbit_point: &[BigUint]) -> bool {
        orbit_point.starts_with(&self.prefix)
    }

    pub fn span(&self) -> usize {
        self.prefix.len()
    }
}

/// `(1/n) * sum_{j<n} phi(T^j x)` with `T^j x` read off as the digit suffix from
/// position `j`.
pub fn birkhoff_average(
    g: &GSequence,
    observable: &CylinderIndicator,
    n: usize,
) -> Result<Rational> {
    if n == 0 {
        return Err(Error::Domain("orbit length must be >= 1".into()));
    }
    let needed = n + observable.span() - 1;
    if g.len() < needed {
        return Err(Error::Terminated {
            achieved: g.len(),
            requested: needed,
        });
    }
    let digits = g.digits();
    let hits = (0..n).filter(|&j| observable.eval(&digits[j..])).count();
    Ok(rational::ratio(hits as u64, n as u64))
}

/// Dyadic stand-in for a Lebesgue-random point: `p / 2^bits` with `p` uniform
/// on `1..2^bits`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UniformSampler {
    pub bits: u32,
    pub seed: u64,
}

impl UniformSampler {
    pub fn new(bits: u32, seed: u64) -> Result<Self> {
        if bits < 2 {
            return Err(Error::Validation(
                "uniform sampler needs at least 2 bits".into(),
            ));
        }
        Ok(Self { bits, seed })
    }

    pub fn denominator(&self) -> BigUint {
        BigUint::from(1u32) << self.bits
    }

    pub fn draw_numerator<R: Rng>(&self, rng: &mut R) -> BigUint {
        let words = self.bits.div_ceil(32) as usize;
        let mask = self.denominator() - 1u32;
        loop {
            let raw: Vec<u32> = (0..words).map(|_| rng.random()).collect();
            let p = BigUint::from_slice(&raw) & &mask;
            if !p.is_zero() {
                return p;
            }
        }
    }

    /// The `index`-th sample of this sampler's own stream.
    pub fn sample(&self, index: u64) -> Rational {
        let p = self.draw_numerator(&mut rng::sample_stream(self.seed, index));
        Rational::new(p.into(), self.denominator().into())
    }

    pub fn digits<R: Rng>(&self, rng: &mut R) -> PierceDigits {
        PierceDigits::new(self.draw_numerator(rng), self.denominator())
            .expect("0 < p < 2^bits by construction")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleRecord {
    pub index: u64,
    pub digits_observed: usize,
    pub count: u64,
    #[serde(with = "rational::serde_biguint")]
    pub max_digit: BigUint,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Percentiles {
    pub p50: u64,
    pub p90: u64,
    pub p99: u64,
}

impl Percentiles {
    /// Nearest-rank percentiles of an already sorted slice.
    pub fn nearest_rank(sorted: &[u64]) -> Option<Self> {
        let at = |p: usize| -> Option<u64> {
            let n = sorted.len();
            let rank = (p * n).div_ceil(100).max(1);
            sorted.get(rank - 1).copied()
        };
        Some(Self {
            p50: at(50)?,
            p90: at(90)?,
            p99: at(99)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencySummary {
    pub seed: u64,
    pub bits: u32,
    pub samples: u64,
    pub depth: usize,
    #[serde(with = "rational::serde_biguint")]
    pub digit: BigUint,
    pub included: u64,
    pub excluded: u64,
    /// Mean of `N_i(x, n)` over included samples.
    #[serde(serialize_with = "opt_rational")]
    pub mean_count: Option<Rational>,
    /// Mean of `N_i(x, n) / n` over included samples.
    #[serde(serialize_with = "opt_rational")]
    pub mean_frequency: Option<Rational>,
    pub max_count: u64,
    pub count_percentiles: Option<Percentiles>,
    #[serde(serialize_with = "opt_biguint")]
    pub median_max_digit: Option<BigUint>,
}

pub(crate) fn opt_rational<S: serde::Serializer>(
    r: &Option<Rational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_str(&rational::format_rational(r)),
        None => s.serialize_none(),
    }
}

fn opt_biguint<S: serde::Serializer>(
    n: &Option<BigUint>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match n {
        Some(n) => s.serialize_str(&n.to_string()),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyReport {
    pub summary: FrequencySummary,
    pub records: Vec<SampleRecord>,
}

/// Counts digit `digit` among the first `depth` digits of `samples` uniform
/// points. Samples whose expansion terminates early are kept in the records
/// but excluded from every aggregate.
pub fn frequency_experiment(
    sampler: &UniformSampler,
    samples: u64,
    depth: usize,
    digit: u64,
    workers: usize,
) -> Result<FrequencyReport> {
    if samples == 0 || depth == 0 || digit == 0 {
        return Err(Error::Validation(
            "samples, depth and digit must all be >= 1".into(),
        ));
    }
    let digit = BigUint::from(digit);
    let records: Vec<SampleRecord> = rng::with_workers(workers, || {
        (0..samples)
            .into_par_iter()
            .map(|index| {
                let mut stream = rng::sample_stream(sampler.seed, index);
                record_for(index, sampler.digits(&mut stream), depth, &digit)
            })
            .collect()
    });
    let summary = summarize(sampler, samples, depth, &digit, &records);
    Ok(FrequencyReport { summary, records })
}

pub(crate) fn record_for<I>(index: u64, digits: I, depth: usize, digit: &BigUint) -> SampleRecord
where
    I: IntoIterator<Item = BigUint>,
{
    let mut count = 0;
    let mut max_digit = BigUint::zero();
    let mut observed = 0;
    for d in digits.into_iter().take(depth) {
        observed += 1;
        if &d == digit {
            count += 1;
        }
        if d > max_digit {
            max_digit = d;
        }
    }
    SampleRecord {
        index,
        digits_observed: observed,
        count,
        max_digit,
        excluded: observed < depth,
    }
}

/// Mean of `count / depth` over the included records.
pub(crate) fn mean_frequency(records: &[SampleRecord], depth: usize) -> Option<Rational> {
    let included: Vec<&SampleRecord> = records.iter().filter(|r| !r.excluded).collect();
    if included.is_empty() {
        return None;
    }
    let total: u64 = included.iter().map(|r| r.count).sum();
    Some(rational::ratio(total, (included.len() * depth) as u64))
}

fn summarize(
    sampler: &UniformSampler,
    samples: u64,
    depth: usize,
    digit: &BigUint,
    records: &[SampleRecord],
) -> FrequencySummary {
    let included: Vec<&SampleRecord> = records.iter().filter(|r| !r.excluded).collect();
    let n = included.len() as u64;
    let total: u64 = included.iter().map(|r| r.count).sum();
    let mut counts: Vec<u64> = included.iter().map(|r| r.count).collect();
    counts.sort_unstable();
    let mut maxima: Vec<&BigUint> = included.iter().map(|r| &r.max_digit).collect();
    maxima.sort();
    FrequencySummary {
        seed: sampler.seed,
        bits: sampler.bits,
        samples,
        depth,
        digit: digit.clone(),
        included: n,
        excluded: samples - n,
        mean_count: (n > 0).then(|| rational::ratio(total, n)),
        mean_frequency: mean_frequency(records, depth),
        max_count: counts.last().copied().unwrap_or(0),
        count_percentiles: Percentiles::nearest_rank(&counts),
        median_max_digit: maxima
            .get(maxima.len().saturating_sub(1) / 2)
            .map(|d| (*d).clone()),
    }
}
