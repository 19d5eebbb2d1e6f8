//! Seed enumeration and classification against the `(1,1)` reference
//! trajectory.

use std::collections::BTreeSet;
use std::ops::RangeInclusive;
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{run, EngineError, Outcome, RecursionConfig, Seed, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeedError {
    #[error("invalid parameter: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

type Result<T> = std::result::Result<T, SeedError>;

/// Every seed of `length` entries drawn from `1..=max_value`, in
/// lexicographic order.
pub fn enumerate_seeds(length: usize, max_value: u64) -> Result<Vec<Seed>> {
    if !(2..=3).contains(&length) {
        return Err(SeedError::Config(format!("seed length {length} is not 2 or 3")));
    }
    if max_value == 0 {
        return Err(SeedError::Config("max value must be at least 1".into()));
    }
    let mut out = vec![Vec::new()];
    for _ in 0..length {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<u64>| {
                (1..=max_value).map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out.into_iter().map(|v| Seed::new(v).map_err(SeedError::from)).collect()
}

/// The `(1,1)` trace used as the merge reference, long enough for
/// [`classify`] at `horizon` with shifts up to `max_shift`.
pub fn reference_trace(horizon: usize, max_shift: usize) -> Result<Trace> {
    let seed = Seed::new(vec![1, 1])?;
    Ok(run(RecursionConfig::new(seed, horizon + max_shift))?)
}

/// `Q(2m) = 2m` and `Q(2m+1) = 2` for every `m` in the range. False if the
/// trace does not reach `2m+1`.
pub fn detect_orbit_112(trace: &Trace, ms: RangeInclusive<usize>) -> bool {
    let hi = *ms.end();
    if ms.is_empty() || 2 * hi + 1 > trace.len() || *ms.start() == 0 {
        return false;
    }
    ms.into_iter().all(|m| trace.q(2 * m) == 2 * m as u64 && trace.q(2 * m + 1) == 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Merge {
    /// `trace(n) = reference(n + shift)`.
    pub shift: i64,
    /// First `n` of the agreeing suffix.
    pub merge_index: usize,
    /// Number of agreeing terms from `merge_index` to the end of the
    /// comparable range.
    pub span: usize,
}

fn comparable_range(trace: &Trace, reference: &Trace, shift: i64) -> Option<(usize, usize)> {
    let lo = (1 - shift).max(1);
    let hi = (trace.len() as i64).min(reference.len() as i64 - shift);
    (hi >= lo).then_some((lo as usize, hi as usize))
}

fn at_shift(n: usize, shift: i64) -> usize {
    (n as i64 + shift) as usize
}

/// Looks for the smallest `|shift| <= max_shift` (negative first on ties)
/// such that `trace` agrees with `reference` shifted by `shift` on a suffix
/// of at least `probe_window` terms. The agreeing suffix runs to the end of
/// the comparable range and starts as early as possible.
pub fn detect_merge(trace: &Trace, reference: &Trace, max_shift: usize, probe_window: usize) -> Result<Option<Merge>> {
    if probe_window == 0 || probe_window > trace.len() {
        return Err(SeedError::Config(format!("probe window {probe_window} is outside 1..={}", trace.len())));
    }
    let max_shift = max_shift as i64;
    let mut shifts: Vec<i64> = (-max_shift..=max_shift).collect();
    shifts.sort_by_key(|&s| (s.abs(), s));
    for shift in shifts {
        let Some((lo, hi)) = comparable_range(trace, reference, shift) else {
            continue;
        };
        let mut n = hi;
        while n >= lo && trace.q(n) == reference.q(at_shift(n, shift)) {
            n -= 1;
        }
        let merge_index = n + 1;
        let span = hi + 1 - merge_index;
        if span >= probe_window {
            return Ok(Some(Merge { shift, merge_index, span }));
        }
    }
    Ok(None)
}

/// Re-compares the full span claimed by `merge`, front to back.
pub fn verify_merge(trace: &Trace, reference: &Trace, merge: &Merge) -> bool {
    let Some((lo, hi)) = comparable_range(trace, reference, merge.shift) else {
        return false;
    };
    merge.merge_index >= lo
        && hi + 1 - merge.merge_index == merge.span
        && (merge.merge_index..=hi).all(|n| trace.q(n) == reference.q(at_shift(n, merge.shift)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    /// Identical to the reference from `n = 1`.
    Original,
    /// Agrees with the reference without shift after a transient.
    MergesIntoOriginal {
        shift: i64,
        merge_index: usize,
    },
    /// Agrees with a shifted copy of the reference.
    ShiftedOriginal {
        shift: i64,
        merge_index: usize,
    },
    /// `Q(2m) = 2m`, `Q(2m+1) = 2`.
    ExplicitOrbit112,
    LongLivedIrregular,
    WeakDying {
        step: usize,
    },
    StrongDying {
        step: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassGroup {
    OriginalEquivalent,
    ExplicitOrbit,
    LongLivedIrregular,
    StrongDeath,
    WeakDeath,
}

impl Classification {
    pub fn group(&self) -> ClassGroup {
        match self {
            Classification::Original
            | Classification::MergesIntoOriginal { .. }
            | Classification::ShiftedOriginal { .. } => ClassGroup::OriginalEquivalent,
            Classification::ExplicitOrbit112 => ClassGroup::ExplicitOrbit,
            Classification::LongLivedIrregular => ClassGroup::LongLivedIrregular,
            Classification::StrongDying { .. } => ClassGroup::StrongDeath,
            Classification::WeakDying { .. } => ClassGroup::WeakDeath,
        }
    }

    pub fn is_death(&self) -> bool {
        matches!(self, Classification::WeakDying { .. } | Classification::StrongDying { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Classification::Original => "original",
            Classification::MergesIntoOriginal { .. } => "merges_into_original",
            Classification::ShiftedOriginal { .. } => "shifted_original",
            Classification::ExplicitOrbit112 => "explicit_orbit_112",
            Classification::LongLivedIrregular => "long_lived_irregular",
            Classification::WeakDying { .. } => "weak_dying",
            Classification::StrongDying { .. } => "strong_dying",
        }
    }
}

/// `2 Q(H) / H`, kept as its numerator and denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Growth {
    pub doubled_value: u64,
    pub horizon: usize,
}

impl Growth {
    pub fn ratio(&self) -> f64 {
        self.doubled_value as f64 / self.horizon as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedReport {
    pub seed: Seed,
    pub horizon: usize,
    pub outcome: Outcome,
    pub classification: Classification,
    /// Present only for surviving seeds.
    pub growth: Option<Growth>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifyOptions {
    pub horizon: usize,
    pub max_shift: usize,
    pub probe_window: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { horizon: 1_000_000, max_shift: 8, probe_window: 10_000 }
    }
}

/// Runs `seed` to `opts.horizon` and classifies it. Dead seeds take their
/// death class. Survivors are tested for the `(1,1,2)` orbit, then for a
/// merge with `reference`, and are otherwise long-lived irregular.
pub fn classify(seed: &Seed, opts: &ClassifyOptions, reference: &Trace) -> Result<SeedReport> {
    let needed = opts.horizon + opts.max_shift;
    if reference.len() < needed {
        return Err(SeedError::Config(format!(
            "reference has {} terms, classification needs {needed}",
            reference.len()
        )));
    }
    let trace = run(RecursionConfig::new(seed.clone(), opts.horizon))?;
    let outcome = trace.outcome();
    let (classification, growth) = match outcome {
        Outcome::WeakDeath { step, .. } => (Classification::WeakDying { step }, None),
        Outcome::StrongDeath { step } => (Classification::StrongDying { step }, None),
        Outcome::Alive => {
            let growth = Growth { doubled_value: 2 * trace.q(trace.len()), horizon: trace.len() };
            (survivor_class(&trace, reference, opts)?, Some(growth))
        }
    };
    Ok(SeedReport { seed: seed.clone(), horizon: opts.horizon, outcome, classification, growth })
}

fn survivor_class(trace: &Trace, reference: &Trace, opts: &ClassifyOptions) -> Result<Classification> {
    let last_m = trace.len().saturating_sub(1) / 2;
    if last_m >= 2 && detect_orbit_112(trace, 2..=last_m) {
        return Ok(Classification::ExplicitOrbit112);
    }
    let class = match detect_merge(trace, reference, opts.max_shift, opts.probe_window)? {
        Some(Merge { shift: 0, merge_index: 1, .. }) => Classification::Original,
        Some(Merge { shift: 0, merge_index, .. }) => Classification::MergesIntoOriginal { shift: 0, merge_index },
        Some(Merge { shift, merge_index, .. }) => Classification::ShiftedOriginal { shift, merge_index },
        None => Classification::LongLivedIrregular,
    };
    Ok(class)
}

/// Classifies independent seeds on worker threads sharing `reference`.
/// Reports come back in input order.
pub fn classify_all(seeds: &[Seed], opts: &ClassifyOptions, reference: &Trace) -> Result<Vec<SeedReport>> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len()).max(1);
    let chunk = seeds.len().div_ceil(workers).max(1);
    thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| classify(s, opts, reference)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("classification worker panicked")).collect()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassificationTable {
    pub seed_length: usize,
    pub max_value: u64,
    pub groups: Vec<TableGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableGroup {
    pub group: ClassGroup,
    pub rows: Vec<SeedReport>,
}

impl ClassificationTable {
    pub fn rows(&self) -> impl Iterator<Item = &SeedReport> {
        self.groups.iter().flat_map(|g| g.rows.iter())
    }

    pub fn group(&self, group: ClassGroup) -> &[SeedReport] {
        self.groups.iter().find(|g| g.group == group).map_or(&[], |g| &g.rows)
    }

    pub fn survivors(&self) -> impl Iterator<Item = &SeedReport> {
        self.rows().filter(|r| r.outcome.is_alive())
    }
}

/// Groups a complete enumeration of reports: original-equivalent, explicit
/// orbit, irregular survivors, strong deaths, then weak deaths by step.
pub fn table_report(reports: &[SeedReport]) -> Result<ClassificationTable> {
    let first = reports.first().ok_or_else(|| SeedError::Config("no reports".into()))?;
    let seed_length = first.seed.len();
    let max_value = reports.iter().flat_map(|r| r.seed.values().iter().copied()).max().unwrap_or(1);
    let expected: BTreeSet<Seed> = enumerate_seeds(seed_length, max_value)?.into_iter().collect();
    let got: BTreeSet<Seed> = reports.iter().map(|r| r.seed.clone()).collect();
    if got.len() != reports.len() {
        return Err(SeedError::Config("duplicate seeds in report set".into()));
    }
    if got != expected {
        let missing = expected.difference(&got).count();
        return Err(SeedError::Config(format!(
            "report set is not the full {seed_length}-seed enumeration up to {max_value} ({missing} missing)"
        )));
    }

    let mut groups: Vec<TableGroup> = Vec::new();
    for group in [
        ClassGroup::OriginalEquivalent,
        ClassGroup::ExplicitOrbit,
        ClassGroup::LongLivedIrregular,
        ClassGroup::StrongDeath,
        ClassGroup::WeakDeath,
    ] {
        let mut rows: Vec<SeedReport> = reports.iter().filter(|r| r.classification.group() == group).cloned().collect();
        if rows.is_empty() {
            continue;
        }
        rows.sort_by(|a, b| (a.outcome.step(), &a.seed).cmp(&(b.outcome.step(), &b.seed)));
        groups.push(TableGroup { group, rows });
    }
    Ok(ClassificationTable { seed_length, max_value, groups })
}
