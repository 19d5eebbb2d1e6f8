//! Acceptance criteria, one test per criterion. Each test prints a single
//! `[PASS]` / `[FAIL]` line (run with `--nocapture` to see them) and fails
//! if its criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use qlab_core::diagnostics::{self, check_subsequence_identities, subsequences};
use qlab_core::frequency::{
    average_check, block_report, build_frequency, check_dyadic_law, default_cap, peak_scan, FrequencyTable,
};
use qlab_core::seedlab::{
    classify_all, detect_orbit_112, enumerate_seeds, reference_trace, table_report, ClassGroup, Classification,
    ClassifyOptions, SeedReport,
};
use qlab_core::{extend, run, store, Outcome, RecursionConfig, Seed, Trace};

const N7: usize = 10_000_000;
const N6: usize = 1_000_000;

fn seed(v: &[u64]) -> Seed {
    Seed::new(v.to_vec()).unwrap()
}

fn original(horizon: usize) -> Trace {
    run(RecursionConfig::new(seed(&[1, 1]), horizon)).unwrap()
}

fn trace_7() -> &'static Trace {
    static T: OnceLock<Trace> = OnceLock::new();
    T.get_or_init(|| original(N7))
}

fn table_7() -> &'static FrequencyTable {
    static F: OnceLock<FrequencyTable> = OnceLock::new();
    F.get_or_init(|| build_frequency(trace_7(), default_cap(N7)).unwrap())
}

fn seed_reports() -> &'static Vec<SeedReport> {
    static R: OnceLock<Vec<SeedReport>> = OnceLock::new();
    R.get_or_init(|| {
        let opts = ClassifyOptions::default();
        let reference = reference_trace(opts.horizon, opts.max_shift).unwrap();
        let mut seeds = enumerate_seeds(3, 3).unwrap();
        seeds.extend(enumerate_seeds(2, 2).unwrap());
        classify_all(&seeds, &opts, &reference).unwrap()
    })
}

/// Prints the verdict line and returns it for assertion.
fn verdict(id: u32, name: &str, failures: &[String]) -> bool {
    if failures.is_empty() {
        println!("[PASS] criterion {id:>2}: {name}");
    } else {
        println!("[FAIL] criterion {id:>2}: {name}: {}", failures.join("; "));
    }
    failures.is_empty()
}

fn expect<T: PartialEq + std::fmt::Debug>(failures: &mut Vec<String>, what: &str, observed: T, expected: T) {
    if observed != expected {
        failures.push(format!("{what}: expected {expected:?}, observed {observed:?}"));
    }
}

#[test]
fn c01_first_values() {
    let mut f = Vec::new();
    let t = original(20);
    expect(&mut f, "Q(1..20)", t.to_vec(), vec![1, 1, 1, 3, 3, 3, 5, 5, 5, 7, 5, 9, 7, 9, 7, 11, 9, 11, 11, 11]);
    assert!(verdict(1, "first twenty values", &f));
}

#[test]
fn c02_difference_prefix() {
    let mut f = Vec::new();
    let t = original(20);
    let d: Vec<i64> = (1..=16).map(|n| diagnostics::difference(&t, n).unwrap()).collect();
    expect(&mut f, "D(1..16)", d, vec![0, 0, 2, 0, 0, 2, 0, 0, 2, -2, 4, -2, 2, -2, 4, -2]);
    assert!(verdict(2, "difference prefix", &f));
}

#[test]
fn c03_subsequence_prefixes() {
    let mut f = Vec::new();
    let t = original(20);
    let s = subsequences(&t).unwrap();
    let a: Vec<i64> = (1..=10).map(|k| s.odd(k).unwrap()).collect();
    let b: Vec<i64> = (1..=9).map(|k| s.even(k).unwrap()).collect();
    expect(&mut f, "A(1..10)", a, vec![1, 1, 3, 5, 5, 5, 7, 7, 9, 11]);
    expect(&mut f, "B(1..9)", b, vec![1, 3, 3, 5, 7, 9, 9, 11, 11]);
    assert!(verdict(3, "subsequence prefixes", &f));
}

#[test]
fn c04_parity_lemma() {
    let mut f = Vec::new();
    let t = trace_7();
    expect(&mut f, "len", t.len(), N7);
    expect(&mut f, "first even index", t.first_even(), None);
    assert!(verdict(4, "all 10^7 values odd", &f));
}

#[test]
fn c05_subsequence_identities() {
    let mut f = Vec::new();
    let violations = check_subsequence_identities(trace_7(), 2..=N6).unwrap();
    expect(&mut f, "violations in k=2..=10^6", violations.len(), 0);
    assert!(verdict(5, "subsequence identities for k in [2, 10^6]", &f));
}

#[test]
fn c06_frequency_blocks() {
    let mut f = Vec::new();
    let table = table_7();
    let hist = |pairs: &[(u32, u64)]| pairs.iter().copied().collect::<BTreeMap<_, _>>();
    let b5 = block_report(table, 5).unwrap();
    let b6 = block_report(table, 6).unwrap();
    expect(&mut f, "B5", b5.histogram, hist(&[(3, 16), (4, 8), (5, 4), (6, 2), (7, 1), (8, 1)]));
    expect(&mut f, "B6", b6.histogram, hist(&[(3, 32), (4, 16), (5, 8), (6, 4), (7, 2), (8, 1), (9, 1)]));
    assert!(verdict(6, "B5 and B6 histograms at N=10^7", &f));
}

#[test]
fn c07_dyadic_law() {
    let mut f = Vec::new();
    let table = table_7();
    for k in 5..=15 {
        let r = block_report(table, k).unwrap();
        if !r.complete {
            f.push(format!("B{k} not saturated"));
            continue;
        }
        let v = check_dyadic_law(&r).unwrap();
        if !v.passed() {
            f.push(format!("B{k} deviates: {:?}", v.deviations));
        }
        expect(&mut f, &format!("B{k} total"), r.total, (1u64 << (k + 2)) - 1);
        expect(&mut f, &format!("B{k} average deviation"), average_check(&r).unwrap().numerator, 0);
    }
    assert!(verdict(7, "dyadic law and block totals for 5 <= k <= 15", &f));
}

#[test]
fn c08_peaks() {
    let mut f = Vec::new();
    let peaks = peak_scan(table_7(), 5..=15).unwrap();
    let first: Vec<usize> = peaks.iter().take(7).map(|p| p.peak_m).collect();
    expect(&mut f, "peak_m k=5..11", first, vec![43, 86, 171, 342, 683, 1366, 2731]);
    for p in &peaks {
        if (p.peak_ratio - 4.0 / 3.0).abs() > 0.011 {
            f.push(format!("k={} ratio {} off 4/3 by more than 0.011", p.k, p.peak_ratio));
        }
    }
    assert!(verdict(8, "peak locations and |ratio - 4/3| <= 0.011", &f));
}

#[test]
fn c09_seed_table() {
    let mut f = Vec::new();
    let reports: Vec<SeedReport> = seed_reports().iter().filter(|r| r.seed.len() == 3).cloned().collect();
    let table = table_report(&reports).unwrap();
    let by_seed = |v: &[u64]| reports.iter().find(|r| r.seed == seed(v)).unwrap();

    let survivors: BTreeSet<Seed> = table.survivors().map(|r| r.seed.clone()).collect();
    let expected: BTreeSet<Seed> =
        [[1, 1, 1], [2, 1, 1], [3, 1, 1], [1, 3, 3], [1, 1, 2], [1, 3, 1], [2, 1, 2], [2, 2, 1], [2, 3, 1], [3, 1, 2]]
            .iter()
            .map(|v| seed(v))
            .collect();
    expect(&mut f, "survivor set", survivors, expected);

    let equivalent: BTreeSet<Seed> =
        table.group(ClassGroup::OriginalEquivalent).iter().map(|r| r.seed.clone()).collect();
    let expected: BTreeSet<Seed> = [[1, 1, 1], [2, 1, 1], [3, 1, 1], [1, 3, 3]].iter().map(|v| seed(v)).collect();
    expect(&mut f, "original-equivalent set", equivalent, expected);

    let irregular: BTreeSet<Seed> =
        table.group(ClassGroup::LongLivedIrregular).iter().map(|r| r.seed.clone()).collect();
    let expected: BTreeSet<Seed> =
        [[1, 3, 1], [2, 1, 2], [2, 2, 1], [2, 3, 1], [3, 1, 2]].iter().map(|v| seed(v)).collect();
    expect(&mut f, "long-lived irregular set", irregular, expected);

    let deaths_at_5 = reports.iter().filter(|r| r.outcome.step() == Some(5)).count();
    expect(&mut f, "deaths at n=5", deaths_at_5, 14);
    let strong_at_5 = reports.iter().filter(|r| matches!(r.outcome, Outcome::StrongDeath { step: 5 })).count();
    expect(&mut f, "strong deaths at n=5", strong_at_5, 14);

    for (v, step) in [([3, 2, 1], 6), ([1, 2, 3], 7), ([1, 2, 1], 41)] {
        expect(&mut f, &format!("{}", seed(&v)), by_seed(&v).classification, Classification::WeakDying { step });
    }

    let orbit = run(RecursionConfig::new(seed(&[1, 1, 2]), 200_001)).unwrap();
    expect(&mut f, "(1,1,2) orbit for m in [2, 10^5]", detect_orbit_112(&orbit, 2..=100_000), true);
    expect(&mut f, "(1,1,2) class", by_seed(&[1, 1, 2]).classification, Classification::ExplicitOrbit112);

    match by_seed(&[1, 3, 3]).classification {
        Classification::ShiftedOriginal { shift, .. } if shift.abs() == 2 => {}
        other => f.push(format!("(1,3,3): expected a shift-2 relative, observed {other:?}")),
    }
    assert!(verdict(9, "classification of the 27 triples up to 3", &f));
}

#[test]
fn c10_growth_law() {
    let mut f = Vec::new();
    let mut checked = 0;
    for r in seed_reports() {
        if r.classification == Classification::ExplicitOrbit112 {
            continue;
        }
        if let Some(g) = r.growth {
            checked += 1;
            assert_eq!(g.horizon, N6);
            let dev = (g.ratio() - 1.0).abs();
            if dev > 0.1 {
                f.push(format!("{} has 2Q(H)/H = {}/{}, deviation {dev:.6}", r.seed, g.doubled_value, g.horizon));
            }
        }
    }
    // 9 long-lived triples besides (1,1,2), plus (1,1) and (2,1).
    expect(&mut f, "long-lived seeds checked", checked, 11);
    assert!(verdict(10, "|2Q(H)/H - 1| <= 0.1 at H=10^6", &f));
}

#[test]
fn c11_renorm_parity_split() {
    let mut f = Vec::new();
    let t = trace_7();
    let (mut odd, mut even) = (0i64, 0i64);
    for k in 1..=N6 / 4 {
        let (o, e) = diagnostics::renorm_split(t, k).unwrap();
        odd = odd.max(o.abs());
        even = even.max(e.abs());
    }
    if odd >= even {
        f.push(format!("max|R_odd| = {odd} is not below max|R_even| = {even}"));
    }
    expect(&mut f, "(max|R_odd|, max|R_even|)", (odd, even), (3_387, 64_857));
    assert!(verdict(11, "max|R_odd| < max|R_even| over k <= H/4, H=10^6", &f));
}

const PERF_CHILD: &str = "QLAB_ACCEPTANCE_PERF_CHILD";

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Runs only inside the child process spawned by `c12_performance_envelope`,
/// so its memory peak is not mixed with the other tests.
#[test]
fn perf_child() {
    if std::env::var_os(PERF_CHILD).is_none() {
        return;
    }
    let start = Instant::now();
    let t = original(100_000_000);
    let elapsed = start.elapsed();
    assert_eq!(t.len(), 100_000_000);
    println!(
        "PERF elapsed_ms={} peak_rss={} last={}",
        elapsed.as_millis(),
        peak_rss_bytes().unwrap_or(0),
        t.q(t.len())
    );
}

#[test]
fn c12_performance_envelope() {
    let mut f = Vec::new();
    let out = Command::new(std::env::current_exe().unwrap())
        .args(["--exact", "perf_child", "--nocapture", "--test-threads=1"])
        .env(PERF_CHILD, "1")
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().find_map(|l| l.split_once("PERF ")).map_or("", |(_, rest)| rest);
    let field = |key: &str| -> Option<u64> {
        line.split_whitespace().find_map(|kv| kv.strip_prefix(key)?.strip_prefix('=')).and_then(|v| v.parse().ok())
    };
    match (field("elapsed_ms"), field("peak_rss")) {
        (Some(ms), Some(rss)) => {
            println!("10^8 terms: {ms} ms, peak resident {:.1} MB", rss as f64 / 1e6);
            if ms >= 60_000 {
                f.push(format!("took {ms} ms"));
            }
            if rss == 0 || rss > 500_000_000 {
                f.push(format!("peak resident {rss} bytes"));
            }
        }
        _ => f.push(format!("child run failed: {stdout}")),
    }
    assert!(verdict(12, "10^8 terms in < 60 s and <= 500 MB", &f));
}

#[test]
fn c13_round_trip_and_extend() {
    let mut f = Vec::new();
    let t = original(N6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("million.qtr");
    store::save(&t, &path).unwrap();
    let loaded = store::load(&path).unwrap();
    expect(&mut f, "load(save(t)) == t", loaded == t, true);
    let bytes = std::fs::read(&path).unwrap();
    store::save(&loaded, &path).unwrap();
    expect(&mut f, "re-saved bytes identical", std::fs::read(&path).unwrap() == bytes, true);

    let extended = extend(original(100_000), N6).unwrap();
    expect(&mut f, "extend(10^5 -> 10^6) == run(10^6)", extended == t, true);
    assert!(verdict(13, "checkpoint round-trip and extend determinism", &f));
}
