//! Lebesgue measure of digit-restricted sets, Hausdorff alpha-volumes of the
//! canonical covers, and the measure of the digit-position sets `A_k^i`.
//!
//! The depth-`k` cover of `C({V_n})` is the union of all cylinders whose prefix
//! digits lie in `V_1, ..., V_k`. Its measure is
//!
//! ```text
//! sum over admissible prefixes of 1 / (sigma_1 ... sigma_k (sigma_k + 1))
//! ```
//!
//! which only depends on the prefix through the running sum `sigma`, so it is
//! computed by a dynamic program over `sigma` rather than by enumerating
//! prefixes. The last level and every dropped tail are summed in closed form:
//!
//! ```text
//! sum_{c=a..b} 1/((s+c)(s+c+1)) = 1/(s+a) - 1/(s+b+1)
//! ```

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Upper limit on dynamic-programming work units for one cover computation.
pub const DEFAULT_WORK_CAP: u64 = 10_000_000;

/// Above this many reachable partial-sum states the cover switches from exact
/// rationals to directed-rounding enclosures.
pub const EXACT_STATE_LIMIT: u64 = 2_000;

/// Fractional bits carried by the enclosure arithmetic.
pub const ENCLOSURE_BITS: u32 = 256;

/// Admissible digits at one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LevelSet {
    /// `{1, ..., m}`
    Range(u64),
    /// `{v + 1, v + 2, ...}`
    Tail(u64),
    /// An explicit finite set, kept sorted and deduplicated.
    Set(Vec<u64>),
    /// Every positive integer.
    All,
}

impl LevelSet {
    pub fn set(digits: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut v: Vec<u64> = digits.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        let level = LevelSet::Set(v);
        level.validate()?;
        Ok(level)
    }

    fn validate(&self) -> Result<()> {
        match self {
            LevelSet::Range(0) => Err(Error::Validation("range bound must be >= 1".into())),
            LevelSet::Tail(0) => Err(Error::Validation(
                "tail parameter must be >= 1 (use `all` for every digit)".into(),
            )),
            LevelSet::Set(v) if v.is_empty() => {
                Err(Error::Validation("admissible digit set is empty".into()))
            }
            LevelSet::Set(v) if v[0] == 0 => Err(Error::Validation("digits must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, c: u64) -> bool {
        match self {
            LevelSet::Range(m) => (1..=*m).contains(&c),
            LevelSet::Tail(v) => c > *v,
            LevelSet::Set(s) => s.binary_search(&c).is_ok(),
            LevelSet::All => c >= 1,
        }
    }

    /// Largest admissible digit of a finite set.
    pub fn finite_bound(&self) -> Option<u64> {
        match self {
            LevelSet::Range(m) => Some(*m),
            LevelSet::Set(s) => s.last().copied(),
            LevelSet::Tail(_) | LevelSet::All => None,
        }
    }

    fn truncate(&self, cutoff: u64) -> Truncated {
        match self {
            LevelSet::Range(m) => Truncated {
                kept: Kept::Interval(1, *m),
                dropped_from: None,
            },
            LevelSet::Tail(v) => Truncated {
                kept: Kept::Interval(v + 1, cutoff),
                dropped_from: Some(cutoff.max(*v) + 1),
            },
            LevelSet::All => Truncated {
                kept: Kept::Interval(1, cutoff),
                dropped_from: Some(cutoff + 1),
            },
            LevelSet::Set(s) => Truncated {
                kept: Kept::Digits(s.clone()),
                dropped_from: None,
            },
        }
    }
}

impl fmt::Display for LevelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelSet::Range(m) => write!(f, "range:{m}"),
            LevelSet::Tail(v) => write!(f, "tail:{v}"),
            LevelSet::All => f.write_str("all"),
            LevelSet::Set(s) => {
                let items: Vec<String> = s.iter().map(u64::to_string).collect();
                write!(f, "set:{}", items.join(","))
            }
        }
    }
}

impl FromStr for LevelSet {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let line = line.trim();
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad number {s:?} in constraint {line:?}")))
        };
        let level = match line.split_once(':') {
            None if line == "all" => LevelSet::All,
            Some(("range", m)) => LevelSet::Range(num(m)?),
            Some(("tail", v)) => LevelSet::Tail(num(v)?),
            Some(("set", items)) => {
                if items.trim().is_empty() {
                    return Err(Error::Validation("admissible digit set is empty".into()));
                }
                LevelSet::set(items.split(',').map(num).collect::<Result<Vec<_>>>()?)?
            }
            _ => return Err(Error::Parse(format!("unknown constraint line {line:?}"))),
        };
        level.validate()?;
        Ok(level)
    }
}

/// Per-level admissible sets `V_1, V_2, ...`; the last listed level repeats forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitConstraint {
    levels: Vec<LevelSet>,
}

impl DigitConstraint {
    pub fn new(levels: Vec<LevelSet>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Validation(
                "constraint needs at least one level".into(),
            ));
        }
        levels.iter().try_for_each(LevelSet::validate)?;
        Ok(Self { levels })
    }

    pub fn stationary(level: LevelSet) -> Result<Self> {
        Self::new(vec![level])
    }

    /// Admissible set at 1-based level `k`.
    pub fn level(&self, k: usize) -> &LevelSet {
        &self.levels[(k.max(1) - 1).min(self.levels.len() - 1)]
    }

    pub fn levels(&self) -> &[LevelSet] {
        &self.levels
    }
}

impl FromStr for DigitConstraint {
    type Err = Error;

    /// One level per line; blank lines and `#` comments are skipped.
    fn from_str(text: &str) -> Result<Self> {
        let levels = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<LevelSet>>>()?;
        Self::new(levels)
    }
}

impl fmt::Display for DigitConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for level in &self.levels {
            writeln!(f, "{level}")?;
        }
        Ok(())
    }
}

/// Two-sided bound on a Lebesgue measure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MeasureEstimate {
    #[serde(with = "rational::serde_rational")]
    pub lower: Rational,
    #[serde(with = "rational::serde_rational")]
    pub upper: Rational,
    pub depth: usize,
    pub cutoff: u64,
    /// `false` when the bounds come from rounded enclosures rather than exact sums.
    pub exact: bool,
}

impl MeasureEstimate {
    fn exact_value(value: Rational, depth: usize, cutoff: u64) -> Self {
        Self {
            lower: value.clone(),
            upper: value,
            depth,
            cutoff,
            exact: true,
        }
    }
}

#[derive(Debug, Clone)]
enum Kept {
    /// `{a, ..., b}`, empty when `a > b`.
    Interval(u64, u64),
    Digits(Vec<u64>),
}

impl Kept {
    fn span(&self) -> Option<(u64, u64)> {
        match self {
            Kept::Interval(a, b) if a <= b => Some((*a, *b)),
            Kept::Interval(..) => None,
            Kept::Digits(d) => Some((d[0], *d.last().expect("non-empty"))),
        }
    }

    fn cost(&self) -> u64 {
        match self {
            Kept::Interval(..) => 1,
            Kept::Digits(d) => d.len() as u64,
        }
    }
}

/// A level after truncating infinite admissible sets at the cutoff. Every
/// admissible digit `>= dropped_from` is left out of the sum.
#[derive(Debug, Clone)]
struct Truncated {
    kept: Kept,
    dropped_from: Option<u64>,
}

/// Non-negative weight arithmetic used by the cover recursion.
trait Weight: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(&self, other: &Self) -> Self;
    /// `self - other`, clamped at zero; callers only subtract smaller prefix sums.
    fn sub(&self, other: &Self) -> Self;
    /// `self * num / den`
    fn scale(&self, num: &BigUint, den: &BigUint) -> Self;
    fn bounds(&self) -> (Rational, Rational);
}

#[derive(Debug, Clone)]
struct Exact(Rational);

impl Weight for Exact {
    fn zero() -> Self {
        Exact(Rational::zero())
    }
    fn one() -> Self {
        Exact(Rational::one())
    }
    fn add(&self, other: &Self) -> Self {
        Exact(&self.0 + &other.0)
    }
    fn sub(&self, other: &Self) -> Self {
        Exact(&self.0 - &other.0)
    }
    fn scale(&self, num: &BigUint, den: &BigUint) -> Self {
        Exact(&self.0 * Rational::new(num.clone().into(), den.clone().into()))
    }
    fn bounds(&self) -> (Rational, Rational) {
        (self.0.clone(), self.0.clone())
    }
}

/// `[lo, hi] / 2^ENCLOSURE_BITS`, rounded outward on every operation.
#[derive(Debug, Clone)]
struct Enclosure {
    lo: BigInt,
    hi: BigInt,
}

impl Weight for Enclosure {
    fn zero() -> Self {
        Enclosure {
            lo: BigInt::zero(),
            hi: BigInt::zero(),
        }
    }
    fn one() -> Self {
        let unit = BigInt::one() << ENCLOSURE_BITS;
        Enclosure {
            lo: unit.clone(),
            hi: unit,
        }
    }
    fn add(&self, other: &Self) -> Self {
        Enclosure {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }
    fn sub(&self, other: &Self) -> Self {
        let lo = &self.lo - &other.hi;
        Enclosure {
            lo: if lo.is_negative() { BigInt::zero() } else { lo },
            hi: &self.hi - &other.lo,
        }
    }
    fn scale(&self, num: &BigUint, den: &BigUint) -> Self {
        let num = BigInt::from(num.clone());
        let den = BigInt::from(den.clone());
        Enclosure {
            lo: (&self.lo * &num).div_floor(&den),
            hi: (&self.hi * &num).div_ceil(&den),
        }
    }
    fn bounds(&self) -> (Rational, Rational) {
        let unit = BigInt::one() << ENCLOSURE_BITS;
        (
            Rational::new(self.lo.clone(), unit.clone()),
            Rational::new(self.hi.clone(), unit),
        )
    }
}

/// Weights `w(s)` for `s = base, base + 1, ...`: the sum of
/// `1/(sigma_1 ... sigma_j)` over admissible prefixes with `sigma_j = s`.
struct States<W> {
    base: u64,
    weights: Vec<W>,
}

impl<W: Weight> States<W> {
    fn initial() -> Self {
        States {
            base: 0,
            weights: vec![W::one()],
        }
    }

    fn iter(&self) -> impl Iterator<Item = (u64, &W)> {
        let base = self.base;
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, w)| (base + i as u64, w))
    }

    /// `sum_s w(s) / (s + f)`: the measure of every cylinder continuing with a
    /// digit `>= f`.
    fn tail_mass(&self, f: u64) -> W {
        self.iter().fold(W::zero(), |acc, (s, w)| {
            acc.add(&w.scale(&BigUint::one(), &BigUint::from(s + f)))
        })
    }

    /// `sum_s w(s) sum_{c in kept} 1/((s+c)(s+c+1))`, the cover measure when this
    /// is the last level.
    fn closing_mass(&self, kept: &Kept) -> W {
        self.iter().fold(W::zero(), |acc, (s, w)| {
            let term = match kept {
                Kept::Interval(a, b) if a > b => return acc,
                Kept::Interval(a, b) => {
                    let num = BigUint::from(b + 1 - a);
                    let den = BigUint::from(s + a) * BigUint::from(s + b + 1);
                    w.scale(&num, &den)
                }
                Kept::Digits(digits) => {
                    let sum: Rational = digits
                        .iter()
                        .map(|&c| rational::ratio(1, (s + c) as u128 * (s + c + 1) as u128))
                        .sum();
                    w.scale(
                        &sum.numer().to_biguint().expect("positive"),
                        &sum.denom().to_biguint().expect("positive"),
                    )
                }
            };
            acc.add(&term)
        })
    }

    /// Appends one admissible digit: `w'(t) = (1/t) sum_{c in kept} w(t - c)`.
    fn advance(&self, kept: &Kept) -> Self {
        let Some((a, b)) = kept.span() else {
            return States {
                base: self.base + 1,
                weights: Vec::new(),
            };
        };
        let len = self.weights.len() as u64;
        let base = self.base + a;
        let top = self.base + len - 1 + b;
        let mut sums: Vec<W> = match kept {
            Kept::Interval(..) => {
                let mut prefix = Vec::with_capacity(self.weights.len() + 1);
                prefix.push(W::zero());
                for w in &self.weights {
                    let next = prefix.last().expect("non-empty").add(w);
                    prefix.push(next);
                }
                (base..=top)
                    .map(|t| {
                        let lo = t.saturating_sub(b).max(self.base) - self.base;
                        let hi = (t - a).min(self.base + len - 1) - self.base;
                        prefix[hi as usize + 1].sub(&prefix[lo as usize])
                    })
                    .collect()
            }
            Kept::Digits(digits) => {
                let mut acc = vec![W::zero(); (top - base + 1) as usize];
                for (s, w) in self.iter() {
                    for &c in digits {
                        let slot = &mut acc[(s + c - base) as usize];
                        *slot = slot.add(w);
                    }
                }
                acc
            }
        };
        for (t, w) in (base..).zip(sums.iter_mut()) {
            *w = w.scale(&BigUint::one(), &BigUint::from(t));
        }
        States {
            base,
            weights: sums,
        }
    }
}

/// State counts per level and total work, without doing any arithmetic.
fn plan(levels: &[Truncated]) -> (u64, u64) {
    let mut len = 1u64;
    let mut states = 0u64;
    let mut work = 0u64;
    for (j, level) in levels.iter().enumerate() {
        work = work.saturating_add(len.saturating_mul(level.kept.cost()));
        if level.dropped_from.is_some() {
            work = work.saturating_add(len);
        }
        if j + 1 < levels.len() {
            len = match level.kept.span() {
                Some((a, b)) => len.saturating_add(b - a),
                None => 0,
            };
            states = states.saturating_add(len);
        }
    }
    (states, work)
}

fn run_cover<W: Weight>(levels: &[Truncated]) -> (W, W) {
    let mut states = States::<W>::initial();
    let mut dropped = W::zero();
    let mut lower = W::zero();
    for (j, level) in levels.iter().enumerate() {
        if let Some(f) = level.dropped_from {
            dropped = dropped.add(&states.tail_mass(f));
        }
        if j + 1 == levels.len() {
            lower = states.closing_mass(&level.kept);
        } else {
            states = states.advance(&level.kept);
        }
    }
    (lower, dropped)
}

fn cover_levels(
    levels: Vec<Truncated>,
    depth: usize,
    cutoff: u64,
    work_cap: u64,
) -> Result<MeasureEstimate> {
    let (states, work) = plan(&levels);
    if work > work_cap {
        return Err(Error::ResourceCap {
            work,
            cap: work_cap,
        });
    }
    let (lower, upper, exact) = if states <= EXACT_STATE_LIMIT {
        let (lower, dropped) = run_cover::<Exact>(&levels);
        let (lo, _) = lower.bounds();
        let (d, _) = dropped.bounds();
        let up = &lo + d;
        (lo, up, true)
    } else {
        let (lower, dropped) = run_cover::<Enclosure>(&levels);
        let (lo, lo_hi) = lower.bounds();
        let (_, d_hi) = dropped.bounds();
        (lo, (lo_hi + d_hi).min(Rational::one()), false)
    };
    Ok(MeasureEstimate {
        lower,
        upper,
        depth,
        cutoff,
        exact,
    })
}

/// Bounds on the measure of the depth-`depth` cover of `C({V_n})`.
///
/// `lower` sums the cylinders whose digits are admissible and at most
/// `cutoff`; `upper` adds the exact measure of every admissible cylinder that
/// was dropped by the truncation, so `upper` bounds the cover measure itself.
pub fn cover_measure(
    constraint: &DigitConstraint,
    depth: usize,
    cutoff: u64,
) -> Result<MeasureEstimate> {
    cover_measure_capped(constraint, depth, cutoff, DEFAULT_WORK_CAP)
}

pub fn cover_measure_capped(
    constraint: &DigitConstraint,
    depth: usize,
    cutoff: u64,
    work_cap: u64,
) -> Result<MeasureEstimate> {
    if depth == 0 {
        return Err(Error::Domain("cover depth must be >= 1".into()));
    }
    if cutoff == 0 {
        return Err(Error::Domain("cutoff must be >= 1".into()));
    }
    let levels = (1..=depth)
        .map(|k| {
            let level = constraint.level(k);
            match level.finite_bound() {
                Some(m) if m > cutoff => Err(Error::Validation(format!(
                    "level {k} admits digit {m}, above the cutoff {cutoff}"
                ))),
                _ => Ok(level.truncate(cutoff)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    cover_levels(levels, depth, cutoff, work_cap)
}

/// Partial sums of the two series deciding the measure of `C({V_n})` for
/// `V_k = {1, ..., m_k}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Theorem1Series {
    /// `sum_{k<=K} (m_1 + ... + m_k) / m_{k+1}`; convergence gives positive measure.
    #[serde(with = "rational::serde_rational_vec")]
    pub positive_test: Vec<Rational>,
    /// `sum_{k<=K} k / m_k`; divergence gives measure zero.
    #[serde(with = "rational::serde_rational_vec")]
    pub null_test: Vec<Rational>,
}

/// `bounds[k-1] = m_k`; needs `K + 1` bounds for `K` terms.
pub fn theorem1_series(bounds: &[BigUint], terms: usize) -> Result<Theorem1Series> {
    if bounds.iter().any(Zero::is_zero) {
        return Err(Error::Validation("level bounds m_k must be >= 1".into()));
    }
    if bounds.len() < terms + 1 {
        return Err(Error::Validation(format!(
            "{terms} terms need {} level bounds, got {}",
            terms + 1,
            bounds.len()
        )));
    }
    let mut running = BigUint::zero();
    let mut pos = Rational::zero();
    let mut null = Rational::zero();
    let mut positive_test = Vec::with_capacity(terms);
    let mut null_test = Vec::with_capacity(terms);
    for k in 1..=terms {
        running += &bounds[k - 1];
        pos += Rational::new(running.clone().into(), bounds[k].clone().into());
        null += Rational::new(BigInt::from(k), bounds[k - 1].clone().into());
        positive_test.push(pos.clone());
        null_test.push(null.clone());
    }
    Ok(Theorem1Series {
        positive_test,
        null_test,
    })
}

/// `m_k = 2^(k!)` for `k = 1..=count`.
pub fn pow2_factorial_bounds(count: usize) -> Vec<BigUint> {
    let mut fact = 1usize;
    (1..=count)
        .map(|k| {
            fact *= k;
            BigUint::one() << fact
        })
        .collect()
}

/// `m_k = k^2` for `k = 1..=count`.
pub fn square_bounds(count: usize) -> Vec<BigUint> {
    (1..=count as u64).map(|k| BigUint::from(k * k)).collect()
}

/// Largest exponent denominator handled exactly by [`hausdorff_alpha_volume`].
pub const MAX_EXACT_ALPHA_DENOMINATOR: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeKind {
    Exact,
    /// `alpha` was rounded down to `alpha_used`, which can only enlarge the volume.
    UpperBound,
}

/// `n^k (k! (k+1))^(-alpha)`, the alpha-volume of the `n^k` cylinders of depth
/// `k` covering the set of points with all digits in `{1, ..., n}`.
///
/// Held exactly as `value = power^(1/root)` with `alpha_used = p/root`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlphaVolume {
    pub n: u64,
    pub k: u64,
    pub alpha: Rational,
    pub alpha_used: Rational,
    pub kind: VolumeKind,
    pub root: u32,
    pub power: Rational,
}

impl AlphaVolume {
    /// The value itself when it is rational.
    pub fn exact_value(&self) -> Option<Rational> {
        if self.root == 1 {
            return Some(self.power.clone());
        }
        let root_of = |x: &BigInt| {
            let x = x.to_biguint()?;
            let r = x.nth_root(self.root);
            (r.pow(self.root) == x).then_some(r)
        };
        let num = root_of(self.power.numer())?;
        let den = root_of(self.power.denom())?;
        Some(Rational::new(num.into(), den.into()))
    }

    /// Exact comparison against a non-negative rational.
    pub fn cmp_rational(&self, t: &Rational) -> Ordering {
        if t.is_negative() {
            return Ordering::Greater;
        }
        self.power.cmp(&pow_rational(t, self.root))
    }

    /// Exact comparison of two volumes.
    pub fn cmp_volume(&self, other: &AlphaVolume) -> Ordering {
        pow_rational(&self.power, other.root).cmp(&pow_rational(&other.power, self.root))
    }

    /// `floor(value * 2^bits) / 2^bits`
    pub fn lower_bound(&self, bits: u32) -> Rational {
        let (floor, _) = self.scaled_root(bits);
        Rational::new(floor.into(), BigInt::one() << bits)
    }

    /// `ceil(value * 2^bits) / 2^bits`
    pub fn upper_bound(&self, bits: u32) -> Rational {
        let (floor, exact) = self.scaled_root(bits);
        let ceil = if exact { floor } else { floor + 1u32 };
        Rational::new(ceil.into(), BigInt::one() << bits)
    }

    /// Floor of `value * 2^bits` and whether it is exact.
    fn scaled_root(&self, bits: u32) -> (BigUint, bool) {
        let num =
            self.power.numer().to_biguint().expect("positive") << (bits as u64 * self.root as u64);
        let den = self.power.denom().to_biguint().expect("positive");
        let (q, r) = num.div_rem(&den);
        let root = q.nth_root(self.root);
        let exact = r.is_zero() && root.pow(self.root) == q;
        (root, exact)
    }

    /// Natural logarithm of the value, for display.
    pub fn ln(&self) -> f64 {
        (ln_big(self.power.numer()) - ln_big(self.power.denom())) / self.root as f64
    }
}

fn ln_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(60);
    let top = (x >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn pow_rational(r: &Rational, e: u32) -> Rational {
    Rational::new(r.numer().pow(e), r.denom().pow(e))
}

pub fn hausdorff_alpha_volume(n: u64, alpha: &Rational, k: u64) -> Result<AlphaVolume> {
    if n == 0 || k == 0 {
        return Err(Error::Domain("alphabet size and depth must be >= 1".into()));
    }
    if !alpha.is_positive() || alpha > &Rational::one() {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1], got {}",
            rational::format_rational(alpha)
        )));
    }
    let denominator_limit = BigInt::from(MAX_EXACT_ALPHA_DENOMINATOR);
    let (alpha_used, kind) = if alpha.denom() <= &denominator_limit {
        (alpha.clone(), VolumeKind::Exact)
    } else {
        let down = (alpha * &denominator_limit).floor() / &denominator_limit;
        (down, VolumeKind::UpperBound)
    };
    let p = alpha_used.numer().to_u32().expect("alpha <= 1");
    let root = alpha_used.denom().to_u32().expect("small denominator");
    let factorial: BigUint = (1..=k).map(BigUint::from).product();
    let cover = factorial * (k + 1);
    let power = Rational::new(
        BigInt::from(BigUint::from(n).pow(k as u32 * root)),
        BigInt::from(cover.pow(p)),
    );
    Ok(AlphaVolume {
        n,
        k,
        alpha: alpha.clone(),
        alpha_used,
        kind,
        root,
        power,
    })
}

/// Smallest `k` from which the volumes strictly decrease:
/// `V(k+1) / V(k) = n / (k+2)^alpha < 1` iff `(k+2)^p > n^q`.
pub fn ratio_test_threshold(n: u64, alpha: &Rational) -> Result<u64> {
    if n == 0 || !alpha.is_positive() || alpha > &Rational::one() {
        return Err(Error::Domain("need n >= 1 and alpha in (0, 1]".into()));
    }
    let p = alpha.numer().to_u32().expect("alpha <= 1");
    let q = alpha
        .denom()
        .to_u32()
        .ok_or_else(|| Error::Domain("alpha denominator too large for the ratio test".into()))?;
    // smallest t with t^p > n^q is floor((n^q)^(1/p)) + 1
    let target = BigUint::from(n).pow(q);
    let t = target.nth_root(p) + 1u32;
    let k = t.to_u64().expect("threshold fits in u64").saturating_sub(2);
    Ok(k.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AkMode {
    /// Closed form; available for digit 1 only.
    Exact,
    /// Truncated sum over earlier digits `<= cutoff` plus the dropped tail mass.
    Truncated(u64),
}

/// `sum_{m > s} 1/(m(m+1)(m+2)) = 1/(2(s+1)(s+2))`.
pub fn triple_tail_sum(s: u64) -> Rational {
    rational::ratio(1, 2 * (s as u128 + 1) * (s as u128 + 2))
}

/// Measure of the set of points whose `k`-th digit equals `digit`.
///
/// For digit 1 the sum over the free digits telescopes level by level: with the
/// innermost factor `F(s) = 1/((s+1)(s+2))`, summing `F(m)/m` over `m > s` gives
/// `F(s)/2` by [`triple_tail_sum`], so `k - 1` free digits leave
/// `2^(1-k) F(0) = 2^(-k)`. Other digits are bounded by truncated sums, and from
/// above by the digit-1 value since the cylinder length decreases in the last
/// digit.
pub fn a_k_measure(digit: u64, k: usize, mode: AkMode) -> Result<MeasureEstimate> {
    if digit == 0 || k == 0 {
        return Err(Error::Domain("digit and position must be >= 1".into()));
    }
    match mode {
        AkMode::Exact if digit == 1 => {
            let mut coefficient = Rational::one();
            for _ in 1..k {
                coefficient /= BigInt::from(2);
            }
            let value = coefficient * rational::ratio(1, 2);
            Ok(MeasureEstimate::exact_value(value, k, 0))
        }
        AkMode::Exact => Err(Error::Validation(format!(
            "no closed form for digit {digit}; use a truncated estimate"
        ))),
        AkMode::Truncated(cutoff) => {
            if cutoff < digit {
                return Err(Error::Validation(format!(
                    "cutoff {cutoff} is below the fixed digit {digit}"
                )));
            }
            let mut levels = vec![LevelSet::All.truncate(cutoff); k - 1];
            levels.push(LevelSet::Set(vec![digit]).truncate(cutoff));
            let mut est = cover_levels(levels, k, cutoff, DEFAULT_WORK_CAP)?;
            let digit_one = Rational::one() / BigInt::from(BigUint::one() << k);
            if est.upper > digit_one {
                est.upper = digit_one;
            }
            Ok(est)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{cylinder, GSequence};
    use crate::rational::ratio;

    fn stationary(level: LevelSet) -> DigitConstraint {
        DigitConstraint::stationary(level).unwrap()
    }

    /// Brute-force oracle: enumerate every prefix with digits <= cutoff and add
    /// up the exact cylinder lengths.
    fn enumerate_cover(constraint: &DigitConstraint, depth: usize, cutoff: u64) -> Rational {
        fn go(
            c: &DigitConstraint,
            depth: usize,
            cutoff: u64,
            prefix: &mut Vec<u64>,
            acc: &mut Rational,
        ) {
            if prefix.len() == depth {
                *acc += cylinder(&GSequence::prefix_u64(prefix).unwrap()).length;
                return;
            }
            let level = c.level(prefix.len() + 1);
            for d in 1..=cutoff {
                if level.contains(d) {
                    prefix.push(d);
                    go(c, depth, cutoff, prefix, acc);
                    prefix.pop();
                }
            }
        }
        let mut acc = Rational::zero();
        go(constraint, depth, cutoff, &mut Vec::new(), &mut acc);
        acc
    }

    #[test]
    fn parse_constraint_lines() {
        let c: DigitConstraint = "range:3\n# comment\ntail:2\n\nset:5,1,5\nall\n"
            .parse()
            .unwrap();
        assert_eq!(
            c.levels(),
            &[
                LevelSet::Range(3),
                LevelSet::Tail(2),
                LevelSet::Set(vec![1, 5]),
                LevelSet::All
            ]
        );
        assert_eq!(c.level(1), &LevelSet::Range(3));
        assert_eq!(c.level(40), &LevelSet::All);
        assert_eq!(c.to_string().parse::<DigitConstraint>().unwrap(), c);
        assert!("".parse::<DigitConstraint>().is_err());
        assert!("range:0".parse::<DigitConstraint>().is_err());
        assert!("tail:0".parse::<DigitConstraint>().is_err());
        assert!("set:".parse::<DigitConstraint>().is_err());
        assert!("set:0,1".parse::<DigitConstraint>().is_err());
        assert!("bogus:1".parse::<DigitConstraint>().is_err());
    }

    #[test]
    fn dp_matches_enumeration() {
        let cases = [
            "all",
            "range:3",
            "tail:2",
            "set:1,3,4",
            "range:2\ntail:1\nset:2,5",
            "set:1\nall",
        ];
        for text in cases {
            let c: DigitConstraint = text.parse().unwrap();
            for depth in 1..=3 {
                let est = cover_measure(&c, depth, 6).unwrap();
                assert!(est.exact);
                assert_eq!(
                    est.lower,
                    enumerate_cover(&c, depth, 6),
                    "{text} depth {depth}"
                );
                assert!(est.lower <= est.upper);
            }
        }
    }

    #[test]
    fn full_space_is_one() {
        for depth in 1..=4 {
            let est = cover_measure(&stationary(LevelSet::All), depth, 40).unwrap();
            assert_eq!(est.upper, ratio(1, 1));
            assert!(est.lower < est.upper);
        }
    }

    #[test]
    fn depth_one_partition_telescopes() {
        for c in [1u64, 10, 100, 10_000, 1_000_000] {
            let est = cover_measure(&stationary(LevelSet::All), 1, c).unwrap();
            assert_eq!(est.lower, Rational::one() - ratio(1, c + 1));
        }
    }

    #[test]
    fn lower_grows_with_cutoff() {
        let all = stationary(LevelSet::All);
        let mut prev = Rational::zero();
        for c in [2, 4, 8, 16, 32] {
            let est = cover_measure(&all, 2, c).unwrap();
            assert!(est.lower > prev);
            prev = est.lower;
        }
    }

    #[test]
    fn all_ones_cover() {
        let ones = stationary(LevelSet::set([1]).unwrap());
        let mut fact = BigInt::one();
        for k in 1..=12u32 {
            fact *= k;
            let est = cover_measure(&ones, k as usize, 1).unwrap();
            let expect = Rational::new(BigInt::one(), &fact * (k + 1));
            assert_eq!((est.lower, est.upper), (expect.clone(), expect));
        }
    }

    #[test]
    fn tail_depth_one() {
        let est = cover_measure(&stationary(LevelSet::Tail(1)), 1, 100).unwrap();
        assert_eq!(est.upper, ratio(1, 2));
        assert_eq!(est.lower, ratio(1, 2) - ratio(1, 101));
        // cutoff below the tail start keeps nothing but still bounds from above
        let est = cover_measure(&stationary(LevelSet::Tail(5)), 1, 3).unwrap();
        assert_eq!(est.lower, Rational::zero());
        assert_eq!(est.upper, ratio(1, 6));
    }

    #[test]
    fn upper_non_increasing_in_depth() {
        for text in ["tail:1", "range:4", "all", "set:1,2\ntail:2"] {
            let c: DigitConstraint = text.parse().unwrap();
            let uppers: Vec<Rational> = (1..=5)
                .map(|k| cover_measure(&c, k, 12).unwrap().upper)
                .collect();
            assert!(uppers.windows(2).all(|w| w[1] <= w[0]), "{text}");
        }
    }

    #[test]
    fn squares_cover_decays() {
        let levels = (1..=8u64).map(|k| LevelSet::Range(k * k)).collect();
        let c = DigitConstraint::new(levels).unwrap();
        let at4 = cover_measure(&c, 4, 64).unwrap();
        let at8 = cover_measure(&c, 8, 64).unwrap();
        assert!(at4.exact && at8.exact);
        assert!(at8.upper < at4.upper);
        // regression baselines recorded at build time
        assert!((rational::to_f64(&at4.upper) - 0.165_108).abs() < 1e-6);
        assert!((rational::to_f64(&at8.upper) - 0.029_348).abs() < 1e-6);
    }

    #[test]
    fn finite_bound_above_cutoff_is_rejected() {
        let c = stationary(LevelSet::Range(50));
        assert!(matches!(
            cover_measure(&c, 2, 10),
            Err(Error::Validation(_))
        ));
        assert!(cover_measure(&c, 0, 10).is_err());
        assert!(cover_measure(&c, 1, 0).is_err());
    }

    #[test]
    fn work_cap_fails_loudly() {
        let c = stationary(LevelSet::set(1..=500).unwrap());
        let err = cover_measure_capped(&c, 4, 500, 1_000).unwrap_err();
        assert!(matches!(err, Error::ResourceCap { cap: 1_000, .. }));
    }

    #[test]
    fn enclosure_agrees_with_exact() {
        let levels = vec![
            LevelSet::All.truncate(60),
            LevelSet::All.truncate(60),
            LevelSet::Set(vec![2]).truncate(60),
        ];
        let (lo, d) = run_cover::<Exact>(&levels);
        let (elo, ed) = run_cover::<Enclosure>(&levels);
        let (x, _) = lo.bounds();
        let (a, b) = elo.bounds();
        assert!(a <= x && x <= b);
        assert!(&b - &a < ratio(1, u64::MAX));
        let (y, _) = d.bounds();
        let (c, e) = ed.bounds();
        assert!(c <= y && y <= e);
    }

    #[test]
    fn triple_tail_identity() {
        // partial sums up to M differ from the closed form by 1/(2(M+1)(M+2))
        for s in 0..6u64 {
            for top in [s + 1, s + 5, s + 40] {
                let partial: Rational =
                    (s + 1..=top).map(|m| ratio(1, m * (m + 1) * (m + 2))).sum();
                assert_eq!(partial + triple_tail_sum(top), triple_tail_sum(s));
            }
        }
    }

    #[test]
    fn a_k_exact_digit_one() {
        assert_eq!(a_k_measure(1, 1, AkMode::Exact).unwrap().upper, ratio(1, 2));
        assert_eq!(a_k_measure(1, 2, AkMode::Exact).unwrap().upper, ratio(1, 4));
        for k in 1..=10 {
            let est = a_k_measure(1, k, AkMode::Exact).unwrap();
            assert_eq!(est.lower * BigInt::from(1u64 << k), Rational::one());
        }
        assert!(a_k_measure(2, 3, AkMode::Exact).is_err());
        assert!(a_k_measure(0, 3, AkMode::Exact).is_err());
    }

    #[test]
    fn a_k_truncated_small_cutoff_matches_enumeration() {
        let est = a_k_measure(3, 3, AkMode::Truncated(8)).unwrap();
        let c = DigitConstraint::new(vec![LevelSet::All, LevelSet::All, LevelSet::Set(vec![3])])
            .unwrap();
        assert_eq!(est.lower, enumerate_cover(&c, 3, 8));
        assert!(est.upper <= ratio(1, 8));
    }

    #[test]
    fn a_k_digit_three_below_digit_one() {
        let est = a_k_measure(3, 2, AkMode::Truncated(10_000)).unwrap();
        assert!(est.upper < ratio(1, 4));
        assert!(est.lower <= est.upper);
        // regression baseline: lambda(A_2^3) = 13/144 (sum of 1/(c(c+3)(c+4)))
        assert!((rational::to_f64(&est.lower) - 0.090_277_8).abs() < 1e-6);
    }

    #[test]
    fn theorem1_examples() {
        let fast = theorem1_series(&pow2_factorial_bounds(7), 6).unwrap();
        let last = fast.positive_test.last().unwrap();
        assert!(last < &ratio(2, 1));
        assert!(fast.positive_test.windows(2).all(|w| w[0] <= w[1]));
        let squares = theorem1_series(&square_bounds(201), 200).unwrap();
        // sum k/k^2 is the harmonic sum H_200 > 5.8
        assert!(squares.null_test[199] > ratio(58, 10));
        let harmonic: Rational = (1..=200u64).map(|k| ratio(1, k)).sum();
        assert_eq!(squares.null_test[199], harmonic);
        let ones = theorem1_series(&vec![BigUint::one(); 11], 10).unwrap();
        assert_eq!(ones.null_test[9], ratio(55, 1));
        assert!(theorem1_series(&square_bounds(3), 3).is_err());
        assert!(theorem1_series(&[BigUint::zero(), BigUint::one()], 1).is_err());
    }

    #[test]
    fn alpha_volume_examples() {
        let v = hausdorff_alpha_volume(1, &ratio(1, 1), 2).unwrap();
        assert_eq!(v.exact_value(), Some(ratio(1, 6)));
        let v = hausdorff_alpha_volume(2, &ratio(1, 1), 3).unwrap();
        assert_eq!(v.exact_value(), Some(ratio(1, 3)));
        assert!(hausdorff_alpha_volume(2, &ratio(0, 1), 3).is_err());
        assert!(hausdorff_alpha_volume(2, &ratio(3, 2), 3).is_err());
        assert!(hausdorff_alpha_volume(0, &ratio(1, 2), 3).is_err());
    }

    #[test]
    fn alpha_volume_bounds_bracket() {
        let v = hausdorff_alpha_volume(3, &ratio(1, 5), 30).unwrap();
        let (lo, hi) = (v.lower_bound(64), v.upper_bound(64));
        assert!(lo < hi);
        assert_eq!(v.cmp_rational(&lo), Ordering::Greater);
        assert_eq!(v.cmp_rational(&hi), Ordering::Less);
        assert!((rational::to_f64(&lo).ln() - v.ln()).abs() < 1e-9);
        // perfect power: 16^(1/2) style value stays exact
        let v = hausdorff_alpha_volume(2, &ratio(1, 2), 1).unwrap();
        assert_eq!(v.power, ratio(4, 2));
        assert_eq!(v.exact_value(), None);
    }

    #[test]
    fn three_fifths_alpha_grows_before_threshold() {
        let alpha = ratio(1, 5);
        assert_eq!(ratio_test_threshold(3, &alpha).unwrap(), 242);
        let v30 = hausdorff_alpha_volume(3, &alpha, 30).unwrap();
        let v60 = hausdorff_alpha_volume(3, &alpha, 60).unwrap();
        assert_eq!(v60.cmp_volume(&v30), Ordering::Greater);
        assert_eq!(v60.cmp_rational(&ratio(1, 1_000_000)), Ordering::Greater);
    }

    #[test]
    fn ratio_threshold_small_cases() {
        assert_eq!(ratio_test_threshold(2, &ratio(1, 1)).unwrap(), 1);
        assert_eq!(ratio_test_threshold(1, &ratio(1, 1)).unwrap(), 1);
        assert_eq!(ratio_test_threshold(5, &ratio(1, 2)).unwrap(), 24);
        for (n, alpha) in [(2u64, ratio(1, 1)), (3, ratio(1, 2)), (2, ratio(2, 3))] {
            let k0 = ratio_test_threshold(n, &alpha).unwrap();
            for k in k0..k0 + 20 {
                let a = hausdorff_alpha_volume(n, &alpha, k).unwrap();
                let b = hausdorff_alpha_volume(n, &alpha, k + 1).unwrap();
                assert_eq!(b.cmp_volume(&a), Ordering::Less, "n={n} k={k}");
            }
            if k0 > 1 {
                let a = hausdorff_alpha_volume(n, &alpha, k0 - 1).unwrap();
                let b = hausdorff_alpha_volume(n, &alpha, k0).unwrap();
                assert_ne!(b.cmp_volume(&a), Ordering::Less);
            }
        }
    }

    #[test]
    fn large_alpha_denominator_gives_upper_bound() {
        let alpha = ratio(100, 1001);
        let v = hausdorff_alpha_volume(3, &alpha, 40).unwrap();
        assert_eq!(v.kind, VolumeKind::UpperBound);
        assert!(v.alpha_used <= alpha);
        assert_eq!(v.alpha_used, ratio(1, 16));
        let tiny = hausdorff_alpha_volume(3, &ratio(1, 1000), 5).unwrap();
        assert_eq!(tiny.alpha_used, Rational::zero());
        assert_eq!(tiny.exact_value(), Some(ratio(243, 1)));
    }
}
