//! Value multiplicities and dyadic block statistics.
//!
//! On all-odd traces `F(m)` counts the `n <= N` with `Q(n) = 2m - 1`.
//! Block `B_k` collects `m` in `2^k ..= 2^(k+1) - 1`. A block is
//! *complete* (saturated) when none of its values occurred after `N/2`.
//! Its histogram is then taken as final.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::Serialize;
use thiserror::Error;

use crate::engine::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrequencyError {
    #[error("Q({n}) is even; frequency tables need an all-odd trace")]
    Parity { n: usize },
    #[error("m_cap must be at least 1")]
    ZeroCap,
    #[error("value 2m-1 with m={m} occurs more than {} times", u8::MAX)]
    CountOverflow { m: usize },
    #[error("block {k} reaches m={needed} beyond m_cap={m_cap}")]
    BlockBeyondCap { k: u32, needed: usize, m_cap: usize },
    #[error("block {k} is not saturated at N={horizon}")]
    Incomplete { k: u32, horizon: usize },
}

type Result<T> = std::result::Result<T, FrequencyError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    horizon: usize,
    m_cap: usize,
    /// Index `m`; slot 0 unused.
    counts: Vec<u8>,
    last: Vec<u64>,
    /// Occurrences of values `2m - 1` with `m > m_cap`.
    beyond_cap: u64,
}

/// Default `m_cap`: `N / 2`, at least 1.
pub fn default_cap(horizon: usize) -> usize {
    (horizon / 2).max(1)
}

/// Counts every value of the trace in one pass.
pub fn build_frequency(trace: &Trace, m_cap: usize) -> Result<FrequencyTable> {
    if m_cap == 0 {
        return Err(FrequencyError::ZeroCap);
    }
    let mut counts = vec![0u8; m_cap + 1];
    let mut last = vec![0u64; m_cap + 1];
    let mut beyond_cap = 0u64;
    for (i, v) in trace.iter().enumerate() {
        let n = i + 1;
        if v % 2 == 0 {
            return Err(FrequencyError::Parity { n });
        }
        let m = v.div_ceil(2) as usize;
        if m > m_cap {
            beyond_cap += 1;
            continue;
        }
        counts[m] = counts[m].checked_add(1).ok_or(FrequencyError::CountOverflow { m })?;
        last[m] = n as u64;
    }
    Ok(FrequencyTable { horizon: trace.len(), m_cap, counts, last, beyond_cap })
}

impl FrequencyTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn m_cap(&self) -> usize {
        self.m_cap
    }

    /// `F(m)`; zero outside `1..=m_cap`.
    pub fn count(&self, m: usize) -> u32 {
        self.counts.get(m).filter(|_| m > 0).copied().unwrap_or(0) as u32
    }

    /// Largest `n` with `Q(n) = 2m - 1`, or 0.
    pub fn last_occurrence(&self, m: usize) -> u64 {
        self.last.get(m).filter(|_| m > 0).copied().unwrap_or(0)
    }

    pub fn beyond_cap(&self) -> u64 {
        self.beyond_cap
    }

    /// `F(1), …, F(m_cap)`.
    pub fn counts(&self) -> impl ExactSizeIterator<Item = u32> + '_ {
        self.counts[1..].iter().map(|&c| c as u32)
    }

    fn block(&self, k: u32) -> Result<RangeInclusive<usize>> {
        let start = 1usize.checked_shl(k).unwrap_or(usize::MAX);
        let end = start.saturating_mul(2) - 1;
        if end > self.m_cap || k >= usize::BITS - 1 {
            return Err(FrequencyError::BlockBeyondCap { k, needed: end, m_cap: self.m_cap });
        }
        Ok(start..=end)
    }

    /// Whether block `k` is saturated. Errors if the block exceeds `m_cap`.
    pub fn is_complete(&self, k: u32) -> Result<bool> {
        let half = (self.horizon / 2) as u64;
        Ok(self.block(k)?.all(|m| self.last[m] <= half))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockReport {
    pub k: u32,
    /// Trace length the counts were taken over.
    pub horizon: usize,
    /// `r -> N_k(r)`: how many `m` in the block have `F(m) = r`.
    pub histogram: BTreeMap<u32, u64>,
    /// `sum F(m)` over the block.
    pub total: u64,
    pub peak_m: usize,
    pub peak_count: u32,
    /// How many `m` share the maximal count.
    pub peak_ties: usize,
    pub complete: bool,
}

impl BlockReport {
    pub fn size(&self) -> u64 {
        1u64 << self.k
    }

    /// `total / 2^k`.
    pub fn average(&self) -> f64 {
        self.total as f64 / self.size() as f64
    }

    /// `peak_m / 2^k`.
    pub fn peak_ratio(&self) -> f64 {
        self.peak_m as f64 / self.size() as f64
    }

    fn require_complete(&self) -> Result<()> {
        if !self.complete {
            return Err(FrequencyError::Incomplete { k: self.k, horizon: self.horizon });
        }
        Ok(())
    }
}

pub fn block_report(table: &FrequencyTable, k: u32) -> Result<BlockReport> {
    let block = table.block(k)?;
    let mut histogram = BTreeMap::new();
    let mut total = 0u64;
    let (mut peak_m, mut peak_count, mut peak_ties) = (*block.start(), 0u32, 0usize);
    for m in block {
        let c = table.counts[m] as u32;
        *histogram.entry(c).or_insert(0u64) += 1;
        total += c as u64;
        if c > peak_count {
            (peak_m, peak_count, peak_ties) = (m, c, 1);
        } else if c == peak_count {
            peak_ties += 1;
        }
    }
    Ok(BlockReport {
        k,
        horizon: table.horizon,
        histogram,
        total,
        peak_m,
        peak_count,
        peak_ties,
        complete: table.is_complete(k)?,
    })
}

/// Histogram predicted by the dyadic law for block `k`:
/// `N_k(r) = 2^(k-r+2)` for `3 <= r <= k+1`, and `N_k(k+2) = N_k(k+3) = 1`.
pub fn dyadic_law(k: u32) -> BTreeMap<u32, u64> {
    let mut law: BTreeMap<u32, u64> = (3..=k + 1).map(|r| (r, 1u64 << (k + 2 - r))).collect();
    law.insert(k + 2, 1);
    law.insert(k + 3, 1);
    law
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LawDeviation {
    pub r: u32,
    pub expected: u64,
    pub observed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LawVerdict {
    pub k: u32,
    pub deviations: Vec<LawDeviation>,
}

impl LawVerdict {
    pub fn passed(&self) -> bool {
        self.deviations.is_empty()
    }
}

/// Compares a saturated block with [`dyadic_law`]. Refuses unsaturated blocks.
pub fn check_dyadic_law(report: &BlockReport) -> Result<LawVerdict> {
    report.require_complete()?;
    let law = dyadic_law(report.k);
    let mut rs: Vec<u32> = law.keys().chain(report.histogram.keys()).copied().collect();
    rs.sort_unstable();
    rs.dedup();
    let deviations = rs
        .into_iter()
        .filter_map(|r| {
            let expected = law.get(&r).copied().unwrap_or(0);
            let observed = report.histogram.get(&r).copied().unwrap_or(0);
            (expected != observed).then_some(LawDeviation { r, expected, observed })
        })
        .collect();
    Ok(LawVerdict { k: report.k, deviations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Peak {
    pub k: u32,
    pub peak_m: usize,
    pub peak_ratio: f64,
    pub ties: usize,
}

/// Smallest argmax of `F` in each block of `ks`.
pub fn peak_scan(table: &FrequencyTable, ks: RangeInclusive<u32>) -> Result<Vec<Peak>> {
    ks.map(|k| {
        let report = block_report(table, k)?;
        report.require_complete()?;
        Ok(Peak { k, peak_m: report.peak_m, peak_ratio: report.peak_ratio(), ties: report.peak_ties })
    })
    .collect()
}

/// `average - (4 - 2^-k)` as the exact fraction `numerator / 2^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AverageDeviation {
    pub k: u32,
    pub numerator: i64,
}

impl AverageDeviation {
    pub fn is_zero(&self) -> bool {
        self.numerator == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator as f64 / (1u64 << self.k) as f64
    }
}

pub fn average_check(report: &BlockReport) -> Result<AverageDeviation> {
    report.require_complete()?;
    // total/2^k - (4 - 2^-k) = (total - (2^(k+2) - 1)) / 2^k
    let predicted = (1i64 << (report.k + 2)) - 1;
    Ok(AverageDeviation { k: report.k, numerator: report.total as i64 - predicted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, RecursionConfig, Seed};

    fn trace(seed: &[u64], horizon: usize) -> Trace {
        run(RecursionConfig::new(Seed::new(seed.to_vec()).unwrap(), horizon)).unwrap()
    }

    #[test]
    fn small_counts() {
        let t = trace(&[1, 1], 20);
        let f = build_frequency(&t, 10).unwrap();
        // 5 = 2*3 - 1 occurs at n = 7, 8, 9, 11.
        assert_eq!((f.count(1), f.count(2), f.count(3)), (3, 3, 4));
        assert_eq!(f.last_occurrence(1), 3);
        assert_eq!(f.count(0), 0);
        assert_eq!(f.count(11), 0);
        let total: u64 = f.counts().map(u64::from).sum::<u64>() + f.beyond_cap();
        assert_eq!(total, 20);
    }

    #[test]
    fn cap_overflow_bucket() {
        let t = trace(&[1, 1], 200);
        let f = build_frequency(&t, 5).unwrap();
        let in_cap: u64 = f.counts().map(u64::from).sum();
        assert!(f.beyond_cap() > 0);
        assert_eq!(in_cap + f.beyond_cap(), 200);
        assert_eq!(build_frequency(&t, 0), Err(FrequencyError::ZeroCap));
    }

    #[test]
    fn rejects_even_values() {
        let t = trace(&[1, 1, 2], 50);
        assert_eq!(build_frequency(&t, 10), Err(FrequencyError::Parity { n: 3 }));
    }

    #[test]
    fn law_shape() {
        let law = dyadic_law(5);
        let expected: BTreeMap<u32, u64> = [(3, 16), (4, 8), (5, 4), (6, 2), (7, 1), (8, 1)].into_iter().collect();
        assert_eq!(law, expected);
        for k in 1..20 {
            assert_eq!(dyadic_law(k).values().sum::<u64>(), 1 << k);
        }
        let law3: BTreeMap<u32, u64> = [(3, 4), (4, 2), (5, 1), (6, 1)].into_iter().collect();
        assert_eq!(dyadic_law(3), law3);
    }

    #[test]
    fn small_blocks() {
        let t = trace(&[1, 1], 100_000);
        let f = build_frequency(&t, default_cap(100_000)).unwrap();
        for k in 1..=8 {
            let r = block_report(&f, k).unwrap();
            assert!(r.complete, "k={k}");
            assert_eq!(r.histogram.values().sum::<u64>(), 1 << k);
            assert!(check_dyadic_law(&r).unwrap().passed(), "k={k}");
            assert!(average_check(&r).unwrap().is_zero());
        }
        let r0 = block_report(&f, 0).unwrap();
        assert_eq!(r0.histogram, [(3, 1)].into_iter().collect());
        assert!(!check_dyadic_law(&r0).unwrap().passed());
    }

    #[test]
    fn unsaturated_blocks_are_refused() {
        let t = trace(&[1, 1], 2_000);
        let f = build_frequency(&t, 1_500).unwrap();
        // values 2m-1 ~ 1000 occur near n ~ 2000 > N/2
        let k = 9;
        let r = block_report(&f, k).unwrap();
        assert!(!r.complete);
        assert_eq!(check_dyadic_law(&r), Err(FrequencyError::Incomplete { k, horizon: 2_000 }));
        assert!(average_check(&r).is_err());
        assert!(peak_scan(&f, 5..=9).is_err());
        assert!(matches!(block_report(&f, 11), Err(FrequencyError::BlockBeyondCap { .. })));
    }
}
