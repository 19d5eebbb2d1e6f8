//! Large-scale values checked against a naive evaluator and against
//! constants frozen from an independent full scan.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use qlab_core::diagnostics::{self, Abscissa, Halves};
use qlab_core::frequency::{self, average_check, block_report, build_frequency};
use qlab_core::{run, RecursionConfig, Seed, Trace};

/// Straight transcription of the definition on signed integers, with no
/// width handling or death detection.
fn naive(seed: &[i64], horizon: usize) -> Vec<i64> {
    let mut q = vec![0i64];
    q.extend_from_slice(seed);
    for n in seed.len() + 1..=horizon {
        let sign = if n % 2 == 0 { 1 } else { -1 };
        let a = (n as i64 - q[n - 1]) as usize;
        let b = (n as i64 - q[n - 2]) as usize;
        q.push(q[a] + q[b] + sign);
    }
    q
}

const TEN_MILLION: usize = 10_000_000;

fn big() -> &'static Trace {
    static TRACE: OnceLock<Trace> = OnceLock::new();
    TRACE.get_or_init(|| run(RecursionConfig::new(Seed::new(vec![1, 1]).unwrap(), TEN_MILLION)).unwrap())
}

#[test]
fn million_terms_match_naive_evaluator() {
    let oracle = naive(&[1, 1], 1_000_000);
    let t = run(RecursionConfig::new(Seed::new(vec![1, 1]).unwrap(), 1_000_000)).unwrap();
    assert!(t.iter().zip(&oracle[1..]).all(|(a, &b)| a as i64 == b));
    assert_eq!(t.value_at(1_000_000), Ok(532_489));
    assert_eq!(diagnostics::fluctuation(&t, 1_000_000), Ok(Halves(64_978)));
}

#[test]
fn ten_million_frozen_values() {
    let t = big();
    assert_eq!(t.value_at(5_000_000), Ok(2_588_645));
    assert_eq!(t.value_at(TEN_MILLION), Ok(4_822_281));
    assert!(t.is_all_odd());
}

#[test]
fn safety_margin_stays_above_quarter() {
    let t = big();
    // min S(n)/n over 100 <= n <= 10^7 is S(124)/124 = 51/124.
    let (num, den) = (100..=TEN_MILLION)
        .map(|n| (diagnostics::safety(t, n).unwrap(), n as i64))
        .min_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)))
        .unwrap();
    assert_eq!((num, den), (51, 124));
    assert!(4 * num > den);
}

#[test]
fn clock_deviation() {
    let t = big();
    let (dev, at) = (3..=TEN_MILLION)
        .map(|n| ((2 * diagnostics::clocks(t, n).unwrap().0 - n as i64).abs(), n))
        .max_by_key(|&(d, n)| (d, std::cmp::Reverse(n)))
        .unwrap();
    // |t1(n) - n/2| peaks at 250963 (doubled: 501926) at n = 8388588.
    assert_eq!((dev, at), (501_926, 8_388_588));
}

#[test]
fn difference_histogram_summary() {
    let t = big();
    let mut hist: BTreeMap<i64, u64> = BTreeMap::new();
    for n in 1..TEN_MILLION {
        *hist.entry(diagnostics::difference(t, n).unwrap()).or_default() += 1;
    }
    assert!(hist.keys().all(|d| d % 2 == 0));
    assert_eq!(hist.len(), 501_906);
    assert_eq!(hist.get(&0), Some(&44));
    assert_eq!(hist.keys().map(|d| d.abs()).max(), Some(501_906));
}

#[test]
fn renorm_split_maxima() {
    let t = big();
    let max_abs = |limit: usize| {
        (1..=limit).fold((0i64, 0i64, 0i64, 0i64), |(mo, me, so, se), k| {
            let (o, e) = diagnostics::renorm_split(t, k).unwrap();
            (mo.max(o.abs()), me.max(e.abs()), so + o, se + e)
        })
    };
    assert_eq!(max_abs(100_000), (1_255, 19_531, -4_140_500, 290_768_244));
    let (odd, even, _, _) = max_abs(250_000);
    assert_eq!((odd, even), (3_387, 64_857));
}

#[test]
fn selfsim_profiles_match_scan() {
    let t = big();
    let expected: [(i64, i64, &str); 6] = [
        (203_459_976, 2_326_821_384_272, "0.000000100 0.5"),
        (-638_506_567_416, 1_163_382_906_228, "0.000000200 0.0"),
        (-319_253_374_892, 581_691_544_176, "0.000000400 1.0"),
        (-159_626_779_716, 290_845_860_904, "0.000000800 1.0"),
        (-79_813_478_784, 145_423_019_220, "0.000001600 3.0"),
        (-39_906_828_208, 72_711_598_220, "0.000003200 1.0"),
    ];
    for (k, (sum, sum_abs, first)) in expected.into_iter().enumerate() {
        let p = diagnostics::selfsim_profile(t, k as u32).unwrap();
        assert_eq!(p.len(), TEN_MILLION >> k);
        assert_eq!(p.iter().map(|pt| pt.y.0).sum::<i64>(), sum, "k={k}");
        assert_eq!(p.iter().map(|pt| pt.y.0.abs()).sum::<i64>(), sum_abs, "k={k}");
        assert_eq!(p[0].to_string(), first);
        assert_eq!(p.last().unwrap().to_string(), "1.000000000 -177719.0");
    }
}

#[test]
fn log_profile_matches_scan() {
    let g = diagnostics::log_profile(big(), 64).unwrap();
    assert_eq!(g.len(), 1_489);
    assert_eq!(g.iter().map(|p| p.y.0).sum::<i64>(), -1_579_110);
    assert_eq!(g.iter().map(|p| p.y.0.abs()).sum::<i64>(), 42_280_338);
    assert_eq!(g[1000].x, Abscissa::Ratio { num: 1000, den: 64 });
    assert_eq!(g[1000].y, Halves(-2_605));
}

#[test]
fn frequency_frozen_values() {
    let t = big();
    let f = build_frequency(t, frequency::default_cap(TEN_MILLION)).unwrap();
    assert_eq!(f.count(1), 3);
    assert_eq!(f.last_occurrence(1), 3);
    let r = block_report(&f, 15).unwrap();
    assert!(r.complete);
    assert!(average_check(&r).unwrap().is_zero());
    let r3 = block_report(&f, 3).unwrap();
    let law3: BTreeMap<u32, u64> = [(3, 4), (4, 2), (5, 1), (6, 1)].into_iter().collect();
    assert_eq!(r3.histogram, law3);
    for k in 5..=15 {
        assert_eq!(block_report(&f, k).unwrap().peak_ties, 1, "k={k}");
    }
}
