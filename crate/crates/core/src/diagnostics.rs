//! Derived series over a finished [`Trace`].
//!
//! Series that can be half-integral (`E(n) = Q(n) - n/2`, `s`, `d`) are
//! carried as [`Halves`], i.e. twice their value, so nothing here touches
//! floating point. All functions are pure reads.

use std::fmt;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::engine::{EngineError, Perturbation, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Range(#[from] EngineError),
    #[error("{what} needs {needed} terms but the trace has {len}")]
    TooShort { what: &'static str, needed: usize, len: usize },
    #[error("Q({n}) is even; the relation requires an all-odd trace")]
    Parity { n: usize },
    #[error("invalid parameter: {0}")]
    Config(String),
}

type Result<T> = std::result::Result<T, DiagnosticsError>;

/// An exact multiple of one half, stored as its double.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Halves(pub i64);

impl Halves {
    pub fn from_int(v: i64) -> Self {
        Halves(2 * v)
    }

    /// `Some(v)` when the value is an integer.
    pub fn to_int(self) -> Option<i64> {
        (self.0 % 2 == 0).then_some(self.0 / 2)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

/// Exactly one decimal digit: `-0.5`, `0.0`, `3.5`.
impl fmt::Display for Halves {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let frac = if abs % 2 == 1 { '5' } else { '0' };
        write!(f, "{sign}{}.{frac}", abs / 2)
    }
}

/// Horizontal coordinate of a series point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Abscissa {
    Index(u64),
    /// `num / den`, e.g. a normalized position or a log2 grid point.
    Ratio {
        num: u64,
        den: u64,
    },
}

impl Abscissa {
    pub fn to_f64(self) -> f64 {
        match self {
            Abscissa::Index(i) => i as f64,
            Abscissa::Ratio { num, den } => num as f64 / den as f64,
        }
    }
}

/// Integers bare, ratios with nine decimals.
impl fmt::Display for Abscissa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Abscissa::Index(i) => write!(f, "{i}"),
            r @ Abscissa::Ratio { .. } => write!(f, "{:.9}", r.to_f64()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeriesPoint {
    pub x: Abscissa,
    pub y: Halves,
}

impl fmt::Display for SeriesPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.x, self.y)
    }
}

fn need(trace: &Trace, what: &'static str, needed: usize) -> Result<()> {
    if needed > trace.len() {
        return Err(DiagnosticsError::TooShort { what, needed, len: trace.len() });
    }
    Ok(())
}

fn q(trace: &Trace, n: usize) -> i64 {
    trace.q(n) as i64
}

/// `2 E(n) = 2 Q(n) - n`.
pub fn fluctuation(trace: &Trace, n: usize) -> Result<Halves> {
    trace.check(n)?;
    Ok(Halves(2 * q(trace, n) - n as i64))
}

/// Safety margin `S(n) = n - max(Q(n-1), Q(n-2))`, for `3 <= n <= len`.
pub fn safety(trace: &Trace, n: usize) -> Result<i64> {
    check_from(trace, n, 3)?;
    Ok(n as i64 - q(trace, n - 1).max(q(trace, n - 2)))
}

/// `D(n) = Q(n+1) - Q(n)`.
pub fn difference(trace: &Trace, n: usize) -> Result<i64> {
    trace.check(n)?;
    trace.check(n + 1)?;
    Ok(q(trace, n + 1) - q(trace, n))
}

/// Clock indices `(t1, t2) = (n - Q(n-1), n - Q(n-2))`.
pub fn clocks(trace: &Trace, n: usize) -> Result<(i64, i64)> {
    check_from(trace, n, 3)?;
    Ok((n as i64 - q(trace, n - 1), n as i64 - q(trace, n - 2)))
}

/// `R(n) = Q(2n) - 2 Q(n)`.
pub fn renorm(trace: &Trace, n: usize) -> Result<i64> {
    trace.check(n)?;
    trace.check(2 * n)?;
    Ok(q(trace, 2 * n) - 2 * q(trace, n))
}

/// `(R_odd(k), R_even(k)) = (Q(4k-2) - 2Q(2k-1), Q(4k) - 2Q(2k))`.
pub fn renorm_split(trace: &Trace, k: usize) -> Result<(i64, i64)> {
    trace.check(k)?;
    trace.check(4 * k)?;
    Ok((q(trace, 4 * k - 2) - 2 * q(trace, 2 * k - 1), q(trace, 4 * k) - 2 * q(trace, 2 * k)))
}

fn check_from(trace: &Trace, n: usize, first: usize) -> Result<()> {
    if n < first {
        return Err(EngineError::Range { n, len: trace.len() }.into());
    }
    trace.check(n)?;
    Ok(())
}

/// Odd- and even-indexed subsequences `A(k) = Q(2k-1)`, `B(k) = Q(2k)` and
/// their deviations from `k`.
#[derive(Debug, Clone, Copy)]
pub struct Subsequences<'a> {
    trace: &'a Trace,
}

pub fn subsequences(trace: &Trace) -> Result<Subsequences<'_>> {
    need(trace, "subsequences", 2)?;
    Ok(Subsequences { trace })
}

impl Subsequences<'_> {
    /// Largest `k` with `A(k)` defined.
    pub fn odd_len(&self) -> usize {
        self.trace.len().div_ceil(2)
    }

    /// Largest `k` with `B(k)` defined.
    pub fn even_len(&self) -> usize {
        self.trace.len() / 2
    }

    fn idx(&self, n: usize) -> Result<i64> {
        if n == 0 {
            return Err(EngineError::Range { n, len: self.trace.len() }.into());
        }
        Ok(self.trace.value_at(n)? as i64)
    }

    pub fn odd(&self, k: usize) -> Result<i64> {
        self.idx((2 * k).wrapping_sub(1))
    }

    pub fn even(&self, k: usize) -> Result<i64> {
        self.idx(2 * k)
    }

    /// `a(k) = A(k) - k`
    pub fn odd_dev(&self, k: usize) -> Result<i64> {
        Ok(self.odd(k)? - k as i64)
    }

    /// `b(k) = B(k) - k`
    pub fn even_dev(&self, k: usize) -> Result<i64> {
        Ok(self.even(k)? - k as i64)
    }

    /// `s(k) = (a + b) / 2`
    pub fn mean_dev(&self, k: usize) -> Result<Halves> {
        Ok(Halves(self.odd_dev(k)? + self.even_dev(k)?))
    }

    /// `d(k) = (b - a) / 2`
    pub fn half_gap(&self, k: usize) -> Result<Halves> {
        Ok(Halves(self.even_dev(k)? - self.odd_dev(k)?))
    }
}

/// Checks the closed relations between `A` and `B` for every `k` in `ks`:
///
/// ```text
/// A(k) = B((2k-1-B(k-1))/2) + B((2k-1-A(k-1))/2) - 1
/// B(k) = A((2k-A(k)+1)/2) + A((2k-B(k-1)+1)/2) + 1
/// ```
///
/// Returns the `k` that violate either relation. An argument that is not a
/// positive integer counts as a violation.
pub fn check_subsequence_identities(trace: &Trace, ks: RangeInclusive<usize>) -> Result<Vec<usize>> {
    if let Some(n) = trace.first_even() {
        return Err(DiagnosticsError::Parity { n });
    }
    let (lo, hi) = (*ks.start(), *ks.end());
    if lo < 2 {
        return Err(DiagnosticsError::Config(format!("identities start at k=2, got {lo}")));
    }
    need(trace, "subsequence identities", 2 * hi)?;
    let sub = Subsequences { trace };

    // (2k - 1 - odd) / 2 and (2k - odd + 1) / 2 as exact positive indices.
    let half = |num: i64| -> Option<usize> { (num > 0 && num % 2 == 0).then_some((num / 2) as usize) };
    let at = |f: &dyn Fn(usize) -> Result<i64>, i: Option<usize>| -> Option<i64> { f(i?).ok() };
    let a = |k: usize| sub.odd(k);
    let b = |k: usize| sub.even(k);

    let mut violations = Vec::new();
    for k in lo..=hi {
        let k2 = 2 * k as i64;
        let (ak, bk, ap, bp) = (a(k)?, b(k)?, a(k - 1)?, b(k - 1)?);
        let odd_rhs = at(&b, half(k2 - 1 - bp)).zip(at(&b, half(k2 - 1 - ap))).map(|(x, y)| x + y - 1);
        let even_rhs = at(&a, half(k2 - ak + 1)).zip(at(&a, half(k2 - bp + 1))).map(|(x, y)| x + y + 1);
        if odd_rhs != Some(ak) || even_rhs != Some(bk) {
            violations.push(k);
        }
    }
    Ok(violations)
}

/// Rescaled dyadic profile at scale `k`: for `1 <= m <= M = floor(len / 2^k)`
/// the point `(m / M, R_k(m))` with `R_k(m) = Q(2^k m) - 2^(k-1) m`.
pub fn selfsim_profile(trace: &Trace, k: u32) -> Result<Vec<SeriesPoint>> {
    let scale = 1usize.checked_shl(k).filter(|&s| s <= trace.len()).ok_or(DiagnosticsError::TooShort {
        what: "dyadic profile",
        needed: 1usize.checked_shl(k).unwrap_or(usize::MAX),
        len: trace.len(),
    })?;
    let count = trace.len() / scale;
    Ok((1..=count)
        .map(|m| {
            let n = scale * m;
            SeriesPoint {
                x: Abscissa::Ratio { num: m as u64, den: count as u64 },
                y: Halves(2 * q(trace, n) - n as i64),
            }
        })
        .collect())
}

/// Log-scale sampling `G(x) = E(2^x)` on `x = j / samples_per_octave`
/// for `0 <= x <= log2(len)`, with `n = round(2^x)` clamped to `[1, len]`.
pub fn log_profile(trace: &Trace, samples_per_octave: u32) -> Result<Vec<SeriesPoint>> {
    if samples_per_octave == 0 {
        return Err(DiagnosticsError::Config("samples per octave must be positive".into()));
    }
    need(trace, "log profile", 2)?;
    let len = trace.len();
    let density = samples_per_octave as f64;
    let last = ((len as f64).log2() * density).floor() as u64;
    Ok((0..=last)
        .map(|j| {
            let x = j as f64 / density;
            let n = (x.exp2().round() as usize).clamp(1, len);
            SeriesPoint {
                x: Abscissa::Ratio { num: j, den: samples_per_octave as u64 },
                y: Halves(2 * q(trace, n) - n as i64),
            }
        })
        .collect())
}

/// Whether the parity lemma applies: odd seed with alternating forcing.
pub fn parity_lemma_applies(trace: &Trace) -> bool {
    let config = trace.config();
    config.perturbation == Perturbation::Alternating && config.seed.is_all_odd()
}
