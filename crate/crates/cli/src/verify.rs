//! The reproduction suite behind `qlab verify`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;
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

use crate::error::CliError;

pub const FIRST_VALUES: [u64; 20] = [1, 1, 1, 3, 3, 3, 5, 5, 5, 7, 5, 9, 7, 9, 7, 11, 9, 11, 11, 11];

const N8: usize = 100_000_000;
const N7: usize = 10_000_000;
const N6: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub id: u32,
    pub name: &'static str,
    /// One entry per mismatch, each naming what was expected and observed.
    pub failures: Vec<String>,
}

impl Check {
    fn new(id: u32, name: &'static str) -> Self {
        Self { id, name, failures: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn expect<T: PartialEq + Debug>(&mut self, what: &str, observed: T, expected: T) {
        if observed != expected {
            self.failures.push(format!("{what}: expected {expected:?}, observed {observed:?}"));
        }
    }

    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}", self.id, self.name)?;
        for failure in &self.failures {
            write!(f, "\n       {failure}")?;
        }
        Ok(())
    }
}

/// Compares `values` with the twenty reference terms and reports the first
/// index where they part.
pub fn check_first_values(values: &[u64]) -> Check {
    let mut c = Check::new(1, "first twenty values");
    if let Some(i) = (0..FIRST_VALUES.len()).find(|&i| values.get(i) != Some(&FIRST_VALUES[i])) {
        c.fail(format!(
            "first mismatch at n={}: expected {}, observed {}",
            i + 1,
            FIRST_VALUES[i],
            values.get(i).map_or("nothing".to_string(), |v| v.to_string())
        ));
    }
    c
}

fn seed(v: &[u64]) -> Seed {
    Seed::new(v.to_vec()).expect("literal seed")
}

fn original(horizon: usize) -> Result<Trace, CliError> {
    Ok(run(RecursionConfig::new(seed(&[1, 1]), horizon))?)
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Runs first so the resident-set peak belongs to this computation alone.
fn perf() -> Result<Check, CliError> {
    let mut c = Check::new(12, "10^8 terms in under 60 s within 500 MB");
    let start = Instant::now();
    let t = original(N8)?;
    let elapsed = start.elapsed();
    c.expect("terms", t.len(), N8);
    if elapsed.as_secs_f64() >= 60.0 {
        c.fail(format!("expected < 60 s, observed {:.1} s", elapsed.as_secs_f64()));
    }
    match peak_rss_bytes() {
        Some(rss) if rss <= 500_000_000 => {}
        Some(rss) => c.fail(format!("expected <= 500 MB resident, observed {:.1} MB", rss as f64 / 1e6)),
        None => c.fail("peak resident size unavailable".into()),
    }
    Ok(c)
}

fn prefixes() -> Result<Vec<Check>, CliError> {
    let t = original(20)?;
    let first = check_first_values(&t.to_vec());

    let mut diff = Check::new(2, "difference prefix D(1..16)");
    let d = (1..=16).map(|n| diagnostics::difference(&t, n)).collect::<Result<Vec<_>, _>>()?;
    diff.expect("D(1..16)", d, vec![0, 0, 2, 0, 0, 2, 0, 0, 2, -2, 4, -2, 2, -2, 4, -2]);

    let mut sub = Check::new(3, "subsequence prefixes A(1..10), B(1..9)");
    let s = subsequences(&t)?;
    let a = (1..=10).map(|k| s.odd(k)).collect::<Result<Vec<_>, _>>()?;
    let b = (1..=9).map(|k| s.even(k)).collect::<Result<Vec<_>, _>>()?;
    sub.expect("A(1..10)", a, vec![1, 1, 3, 5, 5, 5, 7, 7, 9, 11]);
    sub.expect("B(1..9)", b, vec![1, 3, 3, 5, 7, 9, 9, 11, 11]);
    Ok(vec![first, diff, sub])
}

fn large_trace(t: &Trace, table: &FrequencyTable) -> Result<Vec<Check>, CliError> {
    let mut parity = Check::new(4, "all 10^7 values odd");
    parity.expect("terms", t.len(), N7);
    parity.expect("first even index", t.first_even(), None);

    let mut ident = Check::new(5, "subsequence identities for k in [2, 10^6]");
    ident.expect("violations", check_subsequence_identities(t, 2..=N6)?.len(), 0);

    let mut blocks = Check::new(6, "B5 and B6 histograms at N=10^7");
    let hist = |pairs: &[(u32, u64)]| pairs.iter().copied().collect::<BTreeMap<_, _>>();
    blocks.expect("B5", block_report(table, 5)?.histogram, hist(&[(3, 16), (4, 8), (5, 4), (6, 2), (7, 1), (8, 1)]));
    blocks.expect(
        "B6",
        block_report(table, 6)?.histogram,
        hist(&[(3, 32), (4, 16), (5, 8), (6, 4), (7, 2), (8, 1), (9, 1)]),
    );

    let mut law = Check::new(7, "dyadic law and block totals for 5 <= k <= 15");
    for k in 5..=15 {
        let r = block_report(table, k)?;
        if !r.complete {
            law.fail(format!("B{k}: expected a saturated block, observed incomplete"));
            continue;
        }
        let v = check_dyadic_law(&r)?;
        for d in &v.deviations {
            law.fail(format!("B{k} r={}: expected {}, observed {}", d.r, d.expected, d.observed));
        }
        law.expect(&format!("B{k} total"), r.total, (1u64 << (k + 2)) - 1);
        law.expect(&format!("B{k} average numerator"), average_check(&r)?.numerator, 0);
    }

    let mut peaks = Check::new(8, "peak locations and |ratio - 4/3| <= 0.011");
    let scan = peak_scan(table, 5..=15)?;
    let first: Vec<usize> = scan.iter().take(7).map(|p| p.peak_m).collect();
    peaks.expect("peak_m k=5..11", first, vec![43, 86, 171, 342, 683, 1366, 2731]);
    for p in &scan {
        if (p.peak_ratio - 4.0 / 3.0).abs() > 0.011 {
            peaks.fail(format!("k={}: expected ratio within 0.011 of 4/3, observed {:.6}", p.k, p.peak_ratio));
        }
    }

    let mut split = Check::new(11, "max|R_odd| < max|R_even| over k <= 2.5*10^5");
    let (mut odd, mut even) = (0i64, 0i64);
    for k in 1..=N6 / 4 {
        let (o, e) = diagnostics::renorm_split(t, k)?;
        odd = odd.max(o.abs());
        even = even.max(e.abs());
    }
    if odd >= even {
        split.fail(format!("expected max|R_odd| < max|R_even|, observed {odd} >= {even}"));
    }
    split.expect("(max|R_odd|, max|R_even|)", (odd, even), (3_387, 64_857));

    Ok(vec![parity, ident, blocks, law, peaks, split])
}

fn seed_checks() -> Result<Vec<Check>, CliError> {
    let opts = ClassifyOptions::default();
    let reference = reference_trace(opts.horizon, opts.max_shift)?;
    let mut seeds = enumerate_seeds(3, 3)?;
    seeds.extend(enumerate_seeds(2, 2)?);
    let reports = classify_all(&seeds, &opts, &reference)?;
    let triples: Vec<SeedReport> = reports.iter().filter(|r| r.seed.len() == 3).cloned().collect();
    let table = table_report(&triples)?;
    let by_seed = |v: &[u64]| triples.iter().find(|r| r.seed == seed(v)).expect("enumerated seed");
    let set = |vs: &[[u64; 3]]| vs.iter().map(|v| seed(v)).collect::<BTreeSet<_>>();
    let seeds_of = |rows: &mut dyn Iterator<Item = &SeedReport>| rows.map(|r| r.seed.clone()).collect::<BTreeSet<_>>();

    let mut c = Check::new(9, "classification of the 27 triples up to 3");
    c.expect(
        "survivors",
        seeds_of(&mut table.survivors()),
        set(&[
            [1, 1, 1],
            [2, 1, 1],
            [3, 1, 1],
            [1, 3, 3],
            [1, 1, 2],
            [1, 3, 1],
            [2, 1, 2],
            [2, 2, 1],
            [2, 3, 1],
            [3, 1, 2],
        ]),
    );
    c.expect(
        "original-equivalent",
        seeds_of(&mut table.group(ClassGroup::OriginalEquivalent).iter()),
        set(&[[1, 1, 1], [2, 1, 1], [3, 1, 1], [1, 3, 3]]),
    );
    c.expect(
        "long-lived irregular",
        seeds_of(&mut table.group(ClassGroup::LongLivedIrregular).iter()),
        set(&[[1, 3, 1], [2, 1, 2], [2, 2, 1], [2, 3, 1], [3, 1, 2]]),
    );
    c.expect("deaths at n=5", triples.iter().filter(|r| r.outcome.step() == Some(5)).count(), 14);
    c.expect(
        "strong deaths at n=5",
        triples.iter().filter(|r| matches!(r.outcome, Outcome::StrongDeath { step: 5 })).count(),
        14,
    );
    for (v, step) in [([3, 2, 1], 6), ([1, 2, 3], 7), ([1, 2, 1], 41)] {
        c.expect(&seed(&v).to_string(), by_seed(&v).classification, Classification::WeakDying { step });
    }
    let orbit = run(RecursionConfig::new(seed(&[1, 1, 2]), 200_001))?;
    c.expect("(1,1,2) orbit for m in [2, 10^5]", detect_orbit_112(&orbit, 2..=100_000), true);
    match by_seed(&[1, 3, 3]).classification {
        Classification::ShiftedOriginal { shift, .. } if shift.abs() == 2 => {}
        other => c.fail(format!("(1,3,3): expected a shift-2 relative, observed {other:?}")),
    }

    let mut g = Check::new(10, "|2Q(H)/H - 1| <= 0.1 at H=10^6 for long-lived seeds");
    let mut checked = 0;
    for r in &reports {
        if r.classification == Classification::ExplicitOrbit112 {
            continue;
        }
        if let Some(growth) = r.growth {
            checked += 1;
            let dev = (growth.ratio() - 1.0).abs();
            if dev > 0.1 {
                g.fail(format!("{}: expected deviation <= 0.1, observed {dev:.6}", r.seed));
            }
        }
    }
    g.expect("long-lived seeds checked", checked, 11);
    Ok(vec![c, g])
}

fn round_trip(t6: &Trace) -> Result<Check, CliError> {
    let mut c = Check::new(13, "checkpoint round-trip and extend determinism");
    let dir = std::env::temp_dir().join(format!("qlab-verify-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("million.qtr");
    let result = (|| -> Result<(), CliError> {
        store::save(t6, &path)?;
        let loaded = store::load(&path)?;
        c.expect("load(save(t)) == t", &loaded == t6, true);
        let bytes = std::fs::read(&path)?;
        store::save(&loaded, &path)?;
        c.expect("re-saved bytes identical", std::fs::read(&path)? == bytes, true);
        Ok(())
    })();
    let _ = std::fs::remove_dir_all(&dir);
    result?;
    let extended = extend(original(100_000)?, N6)?;
    c.expect("extend(10^5 -> 10^6) == run(10^6)", &extended == t6, true);
    Ok(c)
}

/// Runs every check, printing each as it completes.
pub fn run_suite(skip_perf: bool) -> Result<Vec<Check>, CliError> {
    let start = Instant::now();
    let mut checks = Vec::new();
    let mut record = |batch: Vec<Check>| {
        for c in batch {
            println!("{c}");
            checks.push(c);
        }
    };
    if skip_perf {
        println!("[SKIP] 12 10^8 terms in under 60 s within 500 MB");
    } else {
        record(vec![perf()?]);
    }
    record(prefixes()?);
    let t7 = original(N7)?;
    let table = build_frequency(&t7, default_cap(N7))?;
    record(large_trace(&t7, &table)?);
    drop(table);
    drop(t7);
    record(seed_checks()?);
    record(vec![round_trip(&original(N6)?)?]);
    checks.sort_by_key(|c| c.id);
    let failed = checks.iter().filter(|c| !c.passed()).count();
    println!("{} of {} checks passed in {:.1} s", checks.len() - failed, checks.len(), start.elapsed().as_secs_f64());
    Ok(checks)
}
