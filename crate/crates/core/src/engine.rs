//! Sequential evaluation of the recursion.
//!
//! Every term is stored densely in one fixed-width slot, so the trace can be
//! random-accessed around `n/2` at each step. Four-byte slots hold every
//! value reachable at desk scale (`Q(n) ≈ n/2`). Overflow at either width
//! aborts the run and never wraps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default upper bound on seed length.
pub const MAX_SEED_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid seed: {0}")]
    InvalidSeed(String),
    #[error("horizon {horizon} is below the seed length {seed_len}")]
    HorizonBelowSeed { horizon: usize, seed_len: usize },
    #[error("Q({n}) does not fit in a {width} slot")]
    Overflow { n: usize, width: ValueWidth },
    #[error("trace died at n={step} and cannot be extended")]
    Dead { step: usize },
    #[error("requested horizon {requested} is below the current length {len}")]
    Shrink { requested: usize, len: usize },
    #[error("index {n} is outside 1..={len}")]
    Range { n: usize, len: usize },
}

/// Initial values `Q(1), …, Q(s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct Seed(Vec<u64>);

impl Seed {
    pub fn new(values: Vec<u64>) -> Result<Self, EngineError> {
        Self::with_max_len(values, MAX_SEED_LEN)
    }

    pub fn with_max_len(values: Vec<u64>, max_len: usize) -> Result<Self, EngineError> {
        if values.len() < 2 || values.len() > max_len {
            return Err(EngineError::InvalidSeed(format!("length {} is outside 2..={max_len}", values.len())));
        }
        if let Some(pos) = values.iter().position(|&v| v == 0) {
            return Err(EngineError::InvalidSeed(format!("entry {} is zero", pos + 1)));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_all_odd(&self) -> bool {
        self.0.iter().all(|v| v % 2 == 1)
    }
}

impl TryFrom<Vec<u64>> for Seed {
    type Error = EngineError;

    fn try_from(values: Vec<u64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<Seed> for Vec<u64> {
    fn from(seed: Seed) -> Self {
        seed.0
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Parses `1,1,2` or `(1,1,2)`.
impl FromStr for Seed {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let values = inner
            .split(',')
            .map(|part| {
                part.trim().parse::<u64>().map_err(|_| EngineError::InvalidSeed(format!("cannot parse {part:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(values)
    }
}

/// Forcing term added at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    /// `(-1)^n`: `+1` at even `n`, `-1` at odd `n`.
    Alternating,
    /// Classical Hofstadter recursion.
    None,
}

impl Perturbation {
    #[inline]
    pub fn forcing(self, n: usize) -> i64 {
        match self {
            Perturbation::Alternating if n.is_multiple_of(2) => 1,
            Perturbation::Alternating => -1,
            Perturbation::None => 0,
        }
    }
}

impl fmt::Display for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Perturbation::Alternating => "alternating",
            Perturbation::None => "none",
        })
    }
}

impl FromStr for Perturbation {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "alternating" | "alt" => Ok(Perturbation::Alternating),
            "none" | "classical" => Ok(Perturbation::None),
            other => Err(EngineError::InvalidSeed(format!("unknown perturbation {other:?}"))),
        }
    }
}

/// Bytes per stored term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ValueWidth {
    #[default]
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

impl ValueWidth {
    pub fn bytes(self) -> usize {
        match self {
            ValueWidth::Four => 4,
            ValueWidth::Eight => 8,
        }
    }

    pub fn max_value(self) -> u64 {
        match self {
            ValueWidth::Four => u32::MAX as u64,
            ValueWidth::Eight => u64::MAX,
        }
    }
}

impl fmt::Display for ValueWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-byte", self.bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecursionConfig {
    pub seed: Seed,
    pub perturbation: Perturbation,
    /// Largest `n` to compute.
    pub horizon: usize,
    pub width: ValueWidth,
}

impl RecursionConfig {
    /// Alternating perturbation, four-byte slots.
    pub fn new(seed: Seed, horizon: usize) -> Self {
        Self { seed, perturbation: Perturbation::Alternating, horizon, width: ValueWidth::Four }
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Self {
        self.perturbation = perturbation;
        self
    }

    pub fn with_width(mut self, width: ValueWidth) -> Self {
        self.width = width;
        self
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.horizon < self.seed.len() {
            return Err(EngineError::HorizonBelowSeed { horizon: self.horizon, seed_len: self.seed.len() });
        }
        if let Some(&v) = self.seed.values().iter().find(|&&v| v > self.width.max_value()) {
            return Err(EngineError::InvalidSeed(format!("seed value {v} does not fit in a {} slot", self.width)));
        }
        Ok(())
    }
}

/// Which recursive index was non-positive in a weak death.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BadIndex {
    /// `t1 = n - Q(n-1)`
    First,
    /// `t2 = n - Q(n-2)`
    Second,
}

/// Termination status of a run.
///
/// A weak death has exactly one non-positive index and a strong death has
/// both. A strong death therefore also meets the "at least one index"
/// predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Alive,
    WeakDeath { step: usize, bad: BadIndex },
    StrongDeath { step: usize },
}

impl Outcome {
    pub fn is_alive(&self) -> bool {
        matches!(self, Outcome::Alive)
    }

    pub fn step(&self) -> Option<usize> {
        match *self {
            Outcome::Alive => None,
            Outcome::WeakDeath { step, .. } | Outcome::StrongDeath { step } => Some(step),
        }
    }

    /// `(t1 <= 0, t2 <= 0)` at the death step.
    pub fn bad_indices(&self) -> (bool, bool) {
        match self {
            Outcome::Alive => (false, false),
            Outcome::WeakDeath { bad: BadIndex::First, .. } => (true, false),
            Outcome::WeakDeath { bad: BadIndex::Second, .. } => (false, true),
            Outcome::StrongDeath { .. } => (true, true),
        }
    }

    fn from_flags(step: usize, first: bool, second: bool) -> Self {
        match (first, second) {
            (true, true) => Outcome::StrongDeath { step },
            (true, false) => Outcome::WeakDeath { step, bad: BadIndex::First },
            (false, true) => Outcome::WeakDeath { step, bad: BadIndex::Second },
            (false, false) => Outcome::Alive,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Alive => f.write_str("alive"),
            Outcome::WeakDeath { step, bad } => {
                let idx = match bad {
                    BadIndex::First => "t1",
                    BadIndex::Second => "t2",
                };
                write!(f, "weak death at n={step} ({idx} <= 0)")
            }
            Outcome::StrongDeath { step } => write!(f, "strong death at n={step} (t1, t2 <= 0)"),
        }
    }
}

trait Slot: Copy {
    const MAX: u64;
    fn get(self) -> u64;
    fn put(v: u64) -> Self;
}

impl Slot for u32 {
    const MAX: u64 = u32::MAX as u64;
    #[inline]
    fn get(self) -> u64 {
        self as u64
    }
    #[inline]
    fn put(v: u64) -> Self {
        v as u32
    }
}

impl Slot for u64 {
    const MAX: u64 = u64::MAX;
    #[inline]
    fn get(self) -> u64 {
        self
    }
    #[inline]
    fn put(v: u64) -> Self {
        v
    }
}

/// Dense term store. Slot 0 is an unused zero so that `Q(n)` lives at index `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Values {
    Narrow(Vec<u32>),
    Wide(Vec<u64>),
}

impl Values {
    fn with_seed(seed: &Seed, width: ValueWidth, capacity: usize) -> Self {
        match width {
            ValueWidth::Four => {
                let mut v = Vec::with_capacity(capacity + 1);
                v.push(0);
                v.extend(seed.values().iter().map(|&x| x as u32));
                Values::Narrow(v)
            }
            ValueWidth::Eight => {
                let mut v = Vec::with_capacity(capacity + 1);
                v.push(0);
                v.extend_from_slice(seed.values());
                Values::Wide(v)
            }
        }
    }

    pub(crate) fn from_narrow(values: Vec<u32>) -> Self {
        Values::Narrow(values)
    }

    pub(crate) fn from_wide(values: Vec<u64>) -> Self {
        Values::Wide(values)
    }

    #[inline]
    fn len(&self) -> usize {
        match self {
            Values::Narrow(v) => v.len() - 1,
            Values::Wide(v) => v.len() - 1,
        }
    }

    #[inline]
    fn get(&self, n: usize) -> u64 {
        match self {
            Values::Narrow(v) => v[n] as u64,
            Values::Wide(v) => v[n],
        }
    }

    fn reserve_to(&mut self, horizon: usize) {
        match self {
            Values::Narrow(v) => v.reserve_exact((horizon + 1).saturating_sub(v.len())),
            Values::Wide(v) => v.reserve_exact((horizon + 1).saturating_sub(v.len())),
        }
    }

    fn advance(&mut self, perturbation: Perturbation, horizon: usize) -> Result<Outcome, EngineError> {
        match self {
            Values::Narrow(v) => advance(v, perturbation, horizon, ValueWidth::Four),
            Values::Wide(v) => advance(v, perturbation, horizon, ValueWidth::Eight),
        }
    }
}

fn advance<T: Slot>(
    q: &mut Vec<T>,
    perturbation: Perturbation,
    horizon: usize,
    width: ValueWidth,
) -> Result<Outcome, EngineError> {
    for n in q.len()..=horizon {
        let prev1 = q[n - 1].get();
        let prev2 = q[n - 2].get();
        let first_bad = prev1 >= n as u64;
        let second_bad = prev2 >= n as u64;
        if first_bad || second_bad {
            return Ok(Outcome::from_flags(n, first_bad, second_bad));
        }
        let t1 = n - prev1 as usize;
        let t2 = n - prev2 as usize;
        let overflow = EngineError::Overflow { n, width };
        let sum = q[t1].get().checked_add(q[t2].get()).ok_or(overflow.clone())?;
        // Both summands are at least 1, so subtracting 1 cannot underflow.
        let value = match perturbation.forcing(n) {
            1 => sum.checked_add(1).ok_or(overflow.clone())?,
            -1 => sum - 1,
            _ => sum,
        };
        if value > T::MAX {
            return Err(overflow);
        }
        q.push(T::put(value));
    }
    Ok(Outcome::Alive)
}

/// A computed prefix `Q(1..=len)` with its termination status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    config: RecursionConfig,
    values: Values,
    outcome: Outcome,
}

impl Trace {
    pub(crate) fn from_parts(config: RecursionConfig, values: Values, outcome: Outcome) -> Self {
        Self { config, values, outcome }
    }

    pub fn config(&self) -> &RecursionConfig {
        &self.config
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    /// Number of computed terms.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn value_at(&self, n: usize) -> Result<u64, EngineError> {
        self.check(n)?;
        Ok(self.values.get(n))
    }

    /// `Q(n)` without the range check. Panics if `n` is outside `1..=len`.
    #[inline]
    pub fn q(&self, n: usize) -> u64 {
        debug_assert!(n >= 1);
        self.values.get(n)
    }

    pub fn check(&self, n: usize) -> Result<(), EngineError> {
        if n == 0 || n > self.len() {
            return Err(EngineError::Range { n, len: self.len() });
        }
        Ok(())
    }

    /// `Q(1), Q(2), …` in order.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = u64> + '_ {
        (1..self.len() + 1).map(|n| self.values.get(n))
    }

    pub fn to_vec(&self) -> Vec<u64> {
        self.iter().collect()
    }

    /// Smallest `n` with an even `Q(n)`, if any.
    pub fn first_even(&self) -> Option<usize> {
        match &self.values {
            Values::Narrow(v) => v[1..].iter().position(|x| x % 2 == 0).map(|i| i + 1),
            Values::Wide(v) => v[1..].iter().position(|x| x % 2 == 0).map(|i| i + 1),
        }
    }

    pub fn is_all_odd(&self) -> bool {
        self.first_even().is_none()
    }

    pub(crate) fn values(&self) -> &Values {
        &self.values
    }
}

/// Evaluates the recursion from `config.seed` up to `config.horizon`.
///
/// A death at step `n` is not an error. The returned trace then has
/// `len = n - 1` and the outcome records the failing indices.
pub fn run(config: RecursionConfig) -> Result<Trace, EngineError> {
    config.validate()?;
    let mut values = Values::with_seed(&config.seed, config.width, config.horizon);
    let outcome = values.advance(config.perturbation, config.horizon)?;
    Ok(Trace { config, values, outcome })
}

/// Continues a live trace to `new_horizon`. The result equals
/// `run` with the larger horizon.
pub fn extend(mut trace: Trace, new_horizon: usize) -> Result<Trace, EngineError> {
    if let Some(step) = trace.outcome.step() {
        return Err(EngineError::Dead { step });
    }
    if new_horizon < trace.len() {
        return Err(EngineError::Shrink { requested: new_horizon, len: trace.len() });
    }
    trace.values.reserve_to(new_horizon);
    trace.outcome = trace.values.advance(trace.config.perturbation, new_horizon)?;
    trace.config.horizon = new_horizon;
    Ok(trace)
}
