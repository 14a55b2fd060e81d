//! Random series `eta = O(eta_1, eta_2, ...)` with independent digits.
//!
//! Digit laws are exact rationals: a finite head `p_1..p_M` plus an optional
//! geometric tail `p_(M+j) = T (1 - r) r^(j-1)` carrying the remaining mass
//! `T = 1 - (p_1 + ... + p_M)`. Samples are digit prefixes together with the
//! cylinder that encloses the realized value.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{self, SampleRecord, UniformSampler};
use crate::error::{Error, Result};
use crate::expansion::{cylinder, Cylinder, GSequence};
use crate::rational::{self, Rational};
use crate::rng;

/// Probability law of one digit over `{1, 2, ...}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitDistribution {
    head: Vec<Rational>,
    geometric: Option<Rational>,
}

impl DigitDistribution {
    pub fn new(head: Vec<Rational>, geometric: Option<Rational>) -> Result<Self> {
        if head.iter().any(Signed::is_negative) {
            return Err(Error::Validation("probabilities must be >= 0".into()));
        }
        let total: Rational = head.iter().sum();
        if total > Rational::one() {
            return Err(Error::Validation(format!(
                "head probabilities sum to {} > 1",
                rational::format_rational(&total)
            )));
        }
        match &geometric {
            Some(r) if !r.is_positive() || r >= &Rational::one() => {
                return Err(Error::Validation(
                    "geometric ratio must lie in (0, 1)".into(),
                ))
            }
            None if !total.is_one() => {
                return Err(Error::Validation(format!(
                    "probabilities sum to {}, expected 1",
                    rational::format_rational(&total)
                )))
            }
            _ => {}
        }
        Ok(Self { head, geometric })
    }

    /// `p_digit = 1`.
    pub fn point_mass(digit: u64) -> Result<Self> {
        if digit == 0 {
            return Err(Error::Validation("digits must be >= 1".into()));
        }
        let mut head = vec![Rational::zero(); digit as usize];
        head[digit as usize - 1] = Rational::one();
        Self::new(head, None)
    }

    /// `p_m = (1 - r) r^(m-1)`; `r = 1/2` gives `p_m = 2^-m`.
    pub fn geometric(ratio: Rational) -> Result<Self> {
        Self::new(Vec::new(), Some(ratio))
    }

    pub fn head(&self) -> &[Rational] {
        &self.head
    }

    pub fn geometric_ratio(&self) -> Option<&Rational> {
        self.geometric.as_ref()
    }

    /// Mass assigned to the geometric tail.
    pub fn tail_mass(&self) -> Rational {
        match self.geometric {
            Some(_) => Rational::one() - self.head.iter().sum::<Rational>(),
            None => Rational::zero(),
        }
    }

    pub fn prob(&self, digit: u64) -> Rational {
        let m = self.head.len() as u64;
        match (digit, &self.geometric) {
            (0, _) => Rational::zero(),
            (d, _) if d <= m => self.head[d as usize - 1].clone(),
            (_, None) => Rational::zero(),
            (d, Some(r)) => {
                let j = (d - m - 1) as u32;
                self.tail_mass() * (Rational::one() - r) * pow(r, j)
            }
        }
    }

    /// `sum_{m > cutoff} p_m`, exactly.
    pub fn mass_above(&self, cutoff: u64) -> Rational {
        let m = self.head.len() as u64;
        if cutoff >= m {
            return match &self.geometric {
                Some(r) => self.tail_mass() * pow(r, (cutoff - m) as u32),
                None => Rational::zero(),
            };
        }
        self.head[cutoff as usize..].iter().sum::<Rational>() + self.tail_mass()
    }

    pub fn max_prob(&self) -> Rational {
        let tail_first = match &self.geometric {
            Some(r) => self.tail_mass() * (Rational::one() - r),
            None => Rational::zero(),
        };
        self.head
            .iter()
            .fold(tail_first, |acc, p| if p > &acc { p.clone() } else { acc })
    }

    /// Smallest digit attaining [`max_prob`](Self::max_prob).
    pub fn mode(&self) -> u64 {
        let best = self.max_prob();
        (1..=self.head.len() as u64)
            .find(|&d| self.head[d as usize - 1] == best)
            .unwrap_or(self.head.len() as u64 + 1)
    }

    /// Largest digit of positive probability, `None` for an infinite support.
    pub fn support_max(&self) -> Option<u64> {
        if self.geometric.is_some() && self.tail_mass().is_positive() {
            return None;
        }
        self.head
            .iter()
            .rposition(Signed::is_positive)
            .map(|i| i as u64 + 1)
    }

    pub fn sampler(&self) -> DigitSampler {
        DigitSampler::new(self)
    }
}

fn pow(r: &Rational, e: u32) -> Rational {
    Rational::new(r.numer().pow(e), r.denom().pow(e))
}

impl FromStr for DigitDistribution {
    type Err = Error;

    /// `"p1 p2 ... pM [geom:r]"`.
    fn from_str(line: &str) -> Result<Self> {
        let mut head = Vec::new();
        let mut geometric = None;
        for tok in line.split_whitespace() {
            if let Some(r) = tok.strip_prefix("geom:") {
                if geometric.is_some() {
                    return Err(Error::Parse("more than one geom: entry".into()));
                }
                geometric = Some(rational::parse_rational(r)?);
            } else if geometric.is_some() {
                return Err(Error::Parse("geom: must come last on a row".into()));
            } else {
                head.push(rational::parse_rational(tok)?);
            }
        }
        Self::new(head, geometric)
    }
}

impl fmt::Display for DigitDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.head.iter().map(rational::format_rational).collect();
        if let Some(r) = &self.geometric {
            parts.push(format!("geom:{}", rational::format_rational(r)));
        }
        f.write_str(&parts.join(" "))
    }
}

const CUT_BITS: u32 = 128;
const TAIL_GUARD_BITS: u32 = 64;

/// Inversion sampler on 128-bit uniform words.
///
/// `cuts[m-1] = floor(P(digit <= m) * 2^128)` for every digit before `last`;
/// `last` receives whatever mass remains, so digits of zero probability are
/// never emitted and the law is reproduced up to `2^-128` per cut.
#[derive(Debug, Clone)]
pub struct DigitSampler {
    cuts: Vec<u128>,
    last: u64,
}

impl DigitSampler {
    fn new(p: &DigitDistribution) -> Self {
        let scale = BigInt::one() << CUT_BITS;
        let mut cuts = Vec::new();
        let mut cum = Rational::zero();
        let head_total: Rational = p.head.iter().sum();
        let tail = p.tail_mass();
        for (i, pm) in p.head.iter().enumerate() {
            cum += pm;
            let done = if tail.is_zero() {
                cum == head_total
            } else {
                false
            };
            if done {
                return Self {
                    cuts,
                    last: i as u64 + 1,
                };
            }
            let cut = (&cum * &scale).floor().to_integer();
            cuts.push(cut.to_u128().expect("cumulative mass below 1"));
        }
        let Some(r) = &p.geometric else {
            unreachable!("finite law sums to 1 and returned above");
        };
        // Remaining mass in fixed point with guard bits; each step multiplies by r.
        let fixed_bits = CUT_BITS + TAIL_GUARD_BITS;
        let one = BigUint::one() << fixed_bits;
        let mut remaining = (tail * Rational::from_integer(BigInt::from(one.clone())))
            .floor()
            .to_integer()
            .to_biguint()
            .expect("non-negative");
        let (num, den) = (
            r.numer().to_biguint().expect("positive"),
            r.denom().to_biguint().expect("positive"),
        );
        let mut digit = p.head.len() as u64;
        loop {
            digit += 1;
            remaining = remaining * &num / &den;
            if (&remaining >> (fixed_bits as usize - CUT_BITS as usize)).is_zero() {
                return Self { cuts, last: digit };
            }
            let cut = (&one - &remaining) >> TAIL_GUARD_BITS as usize;
            cuts.push(cut.to_u128().expect("below 2^128"));
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u64 {
        let u: u128 = rng.random();
        let idx = self.cuts.partition_point(|&c| c <= u);
        if idx == self.cuts.len() {
            self.last
        } else {
            idx as u64 + 1
        }
    }

    /// Largest digit this sampler can emit.
    pub fn max_digit(&self) -> u64 {
        self.last
    }
}

#[derive(Clone)]
pub struct GeneratedRows {
    label: String,
    row: Arc<dyn Fn(usize) -> DigitDistribution + Send + Sync>,
}

impl fmt::Debug for GeneratedRows {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratedRows")
            .field("label", &self.label)
            .finish()
    }
}

/// Digit laws `p_(i k)` for positions `k = 1, 2, ...`.
#[derive(Debug, Clone)]
pub enum StochasticMatrix {
    /// Listed rows; the last one repeats forever.
    Stationary(Vec<DigitDistribution>),
    /// Rows computed from the 1-based position, with no known stationary tail.
    Generated(GeneratedRows),
}

impl StochasticMatrix {
    pub fn iid(p: DigitDistribution) -> Self {
        StochasticMatrix::Stationary(vec![p])
    }

    pub fn stationary(rows: Vec<DigitDistribution>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("matrix needs at least one row".into()));
        }
        Ok(StochasticMatrix::Stationary(rows))
    }

    pub fn generated<F>(label: impl Into<String>, row: F) -> Self
    where
        F: Fn(usize) -> DigitDistribution + Send + Sync + 'static,
    {
        StochasticMatrix::Generated(GeneratedRows {
            label: label.into(),
            row: Arc::new(row),
        })
    }

    /// Law of the digit at 1-based position `k`.
    pub fn row(&self, k: usize) -> DigitDistribution {
        match self {
            StochasticMatrix::Stationary(rows) => rows[(k.max(1) - 1).min(rows.len() - 1)].clone(),
            StochasticMatrix::Generated(g) => (g.row)(k.max(1)),
        }
    }

    fn samplers(&self, depth: usize) -> Vec<DigitSampler> {
        match self {
            StochasticMatrix::Stationary(rows) => {
                let built: Vec<DigitSampler> = rows
                    .iter()
                    .take(depth)
                    .map(DigitDistribution::sampler)
                    .collect();
                let tail = built.last().cloned().expect("non-empty matrix");
                (0..depth)
                    .map(|k| built.get(k).cloned().unwrap_or_else(|| tail.clone()))
                    .collect()
            }
            StochasticMatrix::Generated(_) => (1..=depth).map(|k| self.row(k).sampler()).collect(),
        }
    }
}

impl FromStr for StochasticMatrix {
    type Err = Error;

    /// One row per line; blank lines and `#` comments are skipped.
    fn from_str(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<DigitDistribution>>>()?;
        Self::stationary(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EtaSample {
    pub index: u64,
    pub digits: GSequence,
    pub cylinder: Cylinder,
}

fn draw_eta(samplers: &[DigitSampler], seed: u64, index: u64) -> EtaSample {
    let mut stream = rng::sample_stream(seed, index);
    let digits: Vec<u64> = samplers.iter().map(|s| s.sample(&mut stream)).collect();
    let digits = GSequence::prefix_u64(&digits).expect("sampled digits are >= 1");
    let cylinder = cylinder(&digits);
    EtaSample {
        index,
        digits,
        cylinder,
    }
}

/// One depth-`depth` prefix of `eta` with its enclosing cylinder.
pub fn sample_eta(matrix: &StochasticMatrix, depth: usize, seed: u64) -> Result<EtaSample> {
    Ok(sample_eta_batch(matrix, depth, seed, 1, 1)?.remove(0))
}

/// Samples `0..samples`, each from its own stream; sample 0 equals [`sample_eta`].
pub fn sample_eta_batch(
    matrix: &StochasticMatrix,
    depth: usize,
    seed: u64,
    samples: u64,
    workers: usize,
) -> Result<Vec<EtaSample>> {
    if depth == 0 || samples == 0 {
        return Err(Error::Validation("depth and samples must be >= 1".into()));
    }
    let samplers = matrix.samplers(depth);
    Ok(rng::with_workers(workers, || {
        (0..samples)
            .into_par_iter()
            .map(|i| draw_eta(&samplers, seed, i))
            .collect()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PurityClass {
    /// Purely atomic law; `degenerate` when every row is a point mass.
    Discrete {
        degenerate: bool,
    },
    SingularContinuous,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PurityVerdict {
    pub class: PurityClass,
    pub horizon: usize,
    /// `prod_{k <= horizon} max_i p_(i k)`
    #[serde(with = "rational::serde_rational")]
    pub partial_product: Rational,
    /// Exact infinite product when the stationary tail makes it computable.
    #[serde(serialize_with = "dynamics::opt_rational")]
    pub limit_product: Option<Rational>,
    /// A digit whose probabilities have a divergent sum.
    pub divergent_digit: Option<u64>,
}

/// Classifies the law of `eta` by the product of row maxima.
///
/// A stationary tail row that is a point mass freezes the product at a positive
/// value: the law is discrete. A tail row with maximum below 1 sends the product
/// to 0 (no atoms) while its most likely digit has a divergent probability sum,
/// which forces singularity. Generated rows only yield partial products.
pub fn discreteness_criterion(matrix: &StochasticMatrix, horizon: usize) -> Result<PurityVerdict> {
    if horizon == 0 {
        return Err(Error::Validation("horizon must be >= 1".into()));
    }
    let partial_product: Rational = (1..=horizon).map(|k| matrix.row(k).max_prob()).product();
    let verdict = match matrix {
        StochasticMatrix::Stationary(rows) => {
            let tail = rows.last().expect("non-empty");
            if tail.max_prob().is_one() {
                let limit: Rational = rows.iter().map(DigitDistribution::max_prob).product();
                PurityVerdict {
                    class: PurityClass::Discrete {
                        degenerate: limit.is_one(),
                    },
                    horizon,
                    partial_product,
                    limit_product: Some(limit),
                    divergent_digit: Some(tail.mode()),
                }
            } else {
                PurityVerdict {
                    class: PurityClass::SingularContinuous,
                    horizon,
                    partial_product,
                    limit_product: Some(Rational::zero()),
                    divergent_digit: Some(tail.mode()),
                }
            }
        }
        StochasticMatrix::Generated(_) => PurityVerdict {
            class: PurityClass::Undetermined,
            horizon,
            partial_product,
            limit_product: None,
            divergent_digit: None,
        },
    };
    Ok(verdict)
}

/// `|mu(D) - sum_{i <= cutoff} mu(i D)|` for the cylinder `D` of `prefix` under
/// iid digits, where `i D` prepends digit `i`.
pub fn invariance_check(
    p: &DigitDistribution,
    prefix: &GSequence,
    cutoff: u64,
) -> Result<Rational> {
    let digits = prefix
        .digits()
        .iter()
        .map(|d| {
            d.to_u64()
                .ok_or_else(|| Error::Validation("digit exceeds u64".into()))
        })
        .collect::<Result<Vec<u64>>>()?;
    let mass = |ds: &mut dyn Iterator<Item = u64>| -> Rational { ds.map(|d| p.prob(d)).product() };
    let direct = mass(&mut digits.iter().copied());
    let preimage: Rational = (1..=cutoff)
        .map(|i| mass(&mut std::iter::once(i).chain(digits.iter().copied())))
        .sum();
    Ok((direct - preimage).abs())
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical law of `points`
/// and the uniform law on `[0, 1]`.
pub fn ks_statistic_uniform(points: &[Rational]) -> Rational {
    if points.is_empty() {
        return Rational::zero();
    }
    let mut sorted = points.to_vec();
    sorted.sort();
    let n = BigInt::from(sorted.len());
    let mut best = Rational::zero();
    for (i, x) in sorted.iter().enumerate() {
        let above = Rational::new(BigInt::from(i + 1), n.clone()) - x;
        let below = x - Rational::new(BigInt::from(i), n.clone());
        for d in [above, below] {
            if d > best {
                best = d;
            }
        }
    }
    best.min(Rational::one())
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[Rational], b: &[Rational]) -> Rational {
    if a.is_empty() || b.is_empty() {
        return Rational::zero();
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort();
    b.sort();
    let (na, nb) = (BigInt::from(a.len()), BigInt::from(b.len()));
    let (mut i, mut j) = (0, 0);
    let mut best = Rational::zero();
    while i < a.len() && j < b.len() {
        let x = match a[i].cmp(&b[j]) {
            Ordering::Greater => b[j].clone(),
            _ => a[i].clone(),
        };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        let d = (Rational::new(BigInt::from(i), na.clone())
            - Rational::new(BigInt::from(j), nb.clone()))
        .abs();
        if d > best {
            best = d;
        }
    }
    best
}

/// Asymptotic one-sample Kolmogorov critical value `sqrt(-ln(level/2) / 2) / sqrt(n)`.
pub fn ks_critical_value(n: u64, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

pub const KS_LEVEL: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaRecord {
    pub index: u64,
    #[serde(with = "rational::serde_digits")]
    pub digits: Vec<BigUint>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularityReport {
    pub seed: u64,
    pub digit: u64,
    pub samples: u64,
    pub depth: usize,
    pub bits: u32,
    /// Mean of `N_i0 / n` over the eta samples.
    #[serde(serialize_with = "dynamics::opt_rational")]
    pub eta_freq: Option<Rational>,
    /// Mean of `N_i0 / n` over uniform dyadic samples.
    #[serde(serialize_with = "dynamics::opt_rational")]
    pub lebesgue_freq: Option<Rational>,
    pub lebesgue_excluded: u64,
    /// `sum_{k <= n} p_(i0 k)`
    #[serde(with = "rational::serde_rational")]
    pub divergence_partial: Rational,
    /// KS distance between cylinder midpoints and the uniform law, with
    /// midpoints floored to 128 fractional bits.
    #[serde(with = "rational::serde_rational")]
    pub ks_statistic: Rational,
    /// Half the widest sample cylinder plus the midpoint rounding.
    #[serde(with = "rational::serde_rational")]
    pub ks_resolution: Rational,
    pub ks_level: f64,
    pub ks_critical: f64,
    #[serde(skip)]
    pub eta_records: Vec<EtaRecord>,
    #[serde(skip)]
    pub lebesgue_records: Vec<SampleRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularityConfig {
    pub digit: u64,
    pub samples: u64,
    pub depth: usize,
    pub seed: u64,
    pub bits: u32,
    pub workers: usize,
}

/// Contrasts the frequency of `digit` under the law of `eta` with its frequency
/// for uniform points, and measures how far the eta samples sit from uniform.
pub fn singularity_experiment(
    matrix: &StochasticMatrix,
    cfg: &SingularityConfig,
) -> Result<SingularityReport> {
    if cfg.digit == 0 {
        return Err(Error::Validation("digit must be >= 1".into()));
    }
    let samples = sample_eta_batch(matrix, cfg.depth, cfg.seed, cfg.samples, cfg.workers)?;
    let target = BigUint::from(cfg.digit);
    let eta_records: Vec<EtaRecord> = samples
        .iter()
        .map(|s| EtaRecord {
            index: s.index,
            count: s.digits.digits().iter().filter(|d| **d == target).count() as u64,
            digits: s.digits.digits().to_vec(),
        })
        .collect();
    let eta_total: u64 = eta_records.iter().map(|r| r.count).sum();
    let eta_freq = Some(rational::ratio(eta_total, cfg.samples * cfg.depth as u64));

    let uniform = UniformSampler::new(cfg.bits, cfg.seed)?;
    let lebesgue_records: Vec<SampleRecord> = rng::with_workers(cfg.workers, || {
        (0..cfg.samples)
            .into_par_iter()
            .map(|i| {
                let mut stream = rng::reference_stream(cfg.seed, i);
                dynamics::record_for(i, uniform.digits(&mut stream), cfg.depth, &target)
            })
            .collect()
    });
    let lebesgue_freq = dynamics::mean_frequency(&lebesgue_records, cfg.depth);
    let lebesgue_excluded = lebesgue_records.iter().filter(|r| r.excluded).count() as u64;

    let divergence_partial = (1..=cfg.depth).map(|k| matrix.row(k).prob(cfg.digit)).sum();

    let scale = BigInt::one() << CUT_BITS;
    let midpoints: Vec<Rational> = samples
        .iter()
        .map(|s| {
            let mid = s.cylinder.midpoint();
            Rational::new((mid * &scale).floor().to_integer(), scale.clone())
        })
        .collect();
    let widest = samples
        .iter()
        .map(|s| &s.cylinder.length)
        .max()
        .cloned()
        .unwrap_or_else(Rational::zero);
    let ks_resolution = widest / BigInt::from(2) + Rational::new(BigInt::one(), scale);

    Ok(SingularityReport {
        seed: cfg.seed,
        digit: cfg.digit,
        samples: cfg.samples,
        depth: cfg.depth,
        bits: cfg.bits,
        eta_freq,
        lebesgue_freq,
        lebesgue_excluded,
        divergence_partial,
        ks_statistic: ks_statistic_uniform(&midpoints),
        ks_resolution,
        ks_level: KS_LEVEL,
        ks_critical: ks_critical_value(cfg.samples, KS_LEVEL),
        eta_records,
        lebesgue_records,
    })
}
