use std::fmt::Display;
use std::path::{Path, PathBuf};

use qlab_core::diagnostics;
use qlab_core::frequency::{
    average_check, block_report, build_frequency, check_dyadic_law, default_cap, BlockReport, LawDeviation,
};
use qlab_core::seedlab::{
    classify_all, enumerate_seeds, reference_trace, table_report, Classification, ClassificationTable, ClassifyOptions,
};
use qlab_core::{extend, run, store, RecursionConfig, Trace};
use serde::Serialize;

use crate::args::{ComputeArgs, DiagnoseArgs, FreqArgs, SeedsArgs, SelfsimArgs, Series, TraceArgs};
use crate::error::CliError;
use crate::output::{resolve, write_atomic, write_columns};

type Result<T> = std::result::Result<T, CliError>;

const DEFAULT_EXPORT_SPAN: usize = 700;

fn config_of(args: &TraceArgs, default_horizon: usize) -> Result<RecursionConfig> {
    let config = RecursionConfig::new(args.seed.clone(), args.horizon.unwrap_or(default_horizon))
        .with_perturbation(args.perturbation)
        .with_width(args.width);
    config.validate()?;
    Ok(config)
}

/// Loads the checkpoint at `path` when it covers `config`, extends it when it
/// is a shorter prefix, and recomputes otherwise. The file is rewritten
/// whenever the trace changed.
fn checkpointed(config: RecursionConfig, path: &Path) -> Result<Trace> {
    if path.exists() {
        let stored = store::load(path)?;
        let same = stored.config().seed == config.seed
            && stored.config().perturbation == config.perturbation
            && stored.config().width == config.width;
        if same {
            let covers = match stored.outcome().step() {
                Some(step) => step <= config.horizon,
                None => stored.len() == config.horizon,
            };
            if covers {
                return Ok(stored);
            }
            if stored.outcome().is_alive() && stored.len() < config.horizon {
                let trace = extend(stored, config.horizon)?;
                store::save(&trace, path)?;
                return Ok(trace);
            }
        }
    }
    let trace = run(config)?;
    store::save(&trace, path)?;
    Ok(trace)
}

/// Computes or reuses the trace described by `args` and enforces the death
/// policy.
pub fn obtain_trace(args: &TraceArgs, default_horizon: usize) -> Result<Trace> {
    let config = config_of(args, default_horizon)?;
    let trace = match &args.trace {
        Some(path) => checkpointed(config, &resolve(path))?,
        None => run(config)?,
    };
    require_alive(&trace, args.allow_death)?;
    Ok(trace)
}

fn require_alive(trace: &Trace, allow_death: bool) -> Result<()> {
    if !allow_death && !trace.outcome().is_alive() {
        return Err(CliError::Death(trace.outcome()));
    }
    Ok(())
}

fn describe(trace: &Trace) -> String {
    let c = trace.config();
    format!("seed {} [{}, {}]: {} terms, {}", c.seed, c.perturbation, c.width, trace.len(), trace.outcome())
}

pub fn compute(args: &ComputeArgs) -> Result<()> {
    let config = config_of(&args.trace, DEFAULT_EXPORT_SPAN)?;
    let path = resolve(args.trace.trace.as_deref().unwrap_or(&args.out));
    let trace = checkpointed(config, &path)?;
    if let Some(export) = &args.export {
        write_columns(&resolve(export), (1..=trace.len()).map(|n| (n, trace.q(n))))?;
    }
    println!("{}", describe(&trace));
    println!("checkpoint: {}", path.display());
    require_alive(&trace, args.trace.allow_death)
}

/// Index range on which a series is defined for a trace of length `len`.
fn valid_range(series: Series, len: usize) -> (usize, usize) {
    match series {
        Series::Fluctuation => (1, len),
        Series::Safety | Series::Clock1 | Series::Clock2 => (3, len),
        Series::Difference => (1, len.saturating_sub(1)),
        Series::Renorm => (1, len / 2),
        Series::RenormOdd | Series::RenormEven => (1, len / 4),
        Series::Odd | Series::OddDev => (1, len.div_ceil(2)),
        Series::Even | Series::EvenDev | Series::MeanDev | Series::HalfGap => (1, len / 2),
        Series::LogProfile => (1, len),
    }
}

fn needs_odd_trace(series: Series) -> bool {
    matches!(series, Series::Odd | Series::Even | Series::OddDev | Series::EvenDev | Series::MeanDev | Series::HalfGap)
}

fn file_stem(series: Series) -> &'static str {
    match series {
        Series::Fluctuation => "E",
        Series::Safety => "S",
        Series::Difference => "D",
        Series::Clock1 => "t1",
        Series::Clock2 => "t2",
        Series::Renorm => "R",
        Series::RenormOdd => "Rodd",
        Series::RenormEven => "Reven",
        Series::Odd => "A",
        Series::Even => "B",
        Series::OddDev => "a",
        Series::EvenDev => "b",
        Series::MeanDev => "s",
        Series::HalfGap => "d",
        Series::LogProfile => "G",
    }
}

fn value_at(trace: &Trace, series: Series, i: usize) -> Result<Box<dyn Display>> {
    let sub = || diagnostics::subsequences(trace);
    let v: Box<dyn Display> = match series {
        Series::Fluctuation => Box::new(diagnostics::fluctuation(trace, i)?),
        Series::Safety => Box::new(diagnostics::safety(trace, i)?),
        Series::Difference => Box::new(diagnostics::difference(trace, i)?),
        Series::Clock1 => Box::new(diagnostics::clocks(trace, i)?.0),
        Series::Clock2 => Box::new(diagnostics::clocks(trace, i)?.1),
        Series::Renorm => Box::new(diagnostics::renorm(trace, i)?),
        Series::RenormOdd => Box::new(diagnostics::renorm_split(trace, i)?.0),
        Series::RenormEven => Box::new(diagnostics::renorm_split(trace, i)?.1),
        Series::Odd => Box::new(sub()?.odd(i)?),
        Series::Even => Box::new(sub()?.even(i)?),
        Series::OddDev => Box::new(sub()?.odd_dev(i)?),
        Series::EvenDev => Box::new(sub()?.even_dev(i)?),
        Series::MeanDev => Box::new(sub()?.mean_dev(i)?),
        Series::HalfGap => Box::new(sub()?.half_gap(i)?),
        Series::LogProfile => unreachable!("the log profile is exported as a whole"),
    };
    Ok(v)
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<PathBuf> {
    let trace = obtain_trace(&args.trace, 1_000_000)?;
    let series = args.series;
    if needs_odd_trace(series) {
        if let Some(n) = trace.first_even() {
            return Err(CliError::Parity(format!(
                "series {} needs an all-odd trace, Q({n}) = {} is even",
                file_stem(series),
                trace.q(n)
            )));
        }
    }
    let out = resolve(&args.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}_values.dat", file_stem(series)))));

    if series == Series::LogProfile {
        if args.from.is_some() || args.to.is_some() {
            return Err(CliError::Config("series G covers the whole trace; drop --from/--to".into()));
        }
        let points = diagnostics::log_profile(&trace, args.samples_per_octave)?;
        write_columns(&out, points.iter().map(|p| (p.x, p.y)))?;
        println!("wrote {} points to {}", points.len(), out.display());
        return Ok(out);
    }

    let (first, last) = valid_range(series, trace.len());
    let from = args.from.unwrap_or(first);
    let to = args.to.unwrap_or(last.min(DEFAULT_EXPORT_SPAN));
    if from < first || to > last || from > to {
        return Err(CliError::Config(format!(
            "range {from}..={to} is outside {first}..={last} for series {} on {} terms",
            file_stem(series),
            trace.len()
        )));
    }
    let rows = (from..=to).map(|i| value_at(&trace, series, i).map(|v| (i, v))).collect::<Result<Vec<_>>>()?;
    write_columns(&out, rows)?;
    println!("wrote {} lines to {}", to - from + 1, out.display());
    Ok(out)
}

pub fn selfsim(args: &SelfsimArgs) -> Result<Vec<PathBuf>> {
    let trace = obtain_trace(&args.trace, 1_000_000)?;
    if let Some(&k) = args.scales.iter().max() {
        if 1usize.checked_shl(k).is_none_or(|s| s > trace.len()) {
            return Err(CliError::Config(format!("2^{k} exceeds the {} computed terms", trace.len())));
        }
    }
    let dir = resolve(&args.out_dir);
    let mut written = Vec::new();
    for &k in &args.scales {
        let points = diagnostics::selfsim_profile(&trace, k)?;
        let path = dir.join(format!("selfsimilar_k{k}.dat"));
        write_columns(&path, points.iter().map(|p| (p.x, p.y)))?;
        println!("k={k}: {} points -> {}", points.len(), path.display());
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
struct FreqReport {
    seed: Vec<u64>,
    horizon: usize,
    m_cap: usize,
    beyond_cap: u64,
    blocks: Vec<BlockEntry>,
}

#[derive(Debug, Serialize)]
struct BlockEntry {
    #[serde(flatten)]
    report: BlockReport,
    average: f64,
    peak_ratio: f64,
    expected_total: u64,
    /// `average - (k+2)` as an exact fraction over `2^k`.
    average_deviation_numerator: Option<i64>,
    law: LawStatus,
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum LawStatus {
    Pass,
    Fail { deviations: Vec<LawDeviation> },
    Refused { reason: String },
}

pub fn freq(args: &FreqArgs) -> Result<PathBuf> {
    let trace = obtain_trace(&args.trace, 10_000_000)?;
    let m_cap = args.m_cap.unwrap_or_else(|| default_cap(trace.len()));
    let table = build_frequency(&trace, m_cap)?;

    let mut blocks = Vec::new();
    for k in 0..=args.kmax {
        let report = block_report(&table, k)?;
        let (law, numerator) = if report.complete {
            let verdict = check_dyadic_law(&report)?;
            let law =
                if verdict.passed() { LawStatus::Pass } else { LawStatus::Fail { deviations: verdict.deviations } };
            (law, Some(average_check(&report)?.numerator))
        } else {
            let reason = format!("block {k} is not saturated at N={}", report.horizon);
            (LawStatus::Refused { reason }, None)
        };
        blocks.push(BlockEntry {
            average: report.average(),
            peak_ratio: report.peak_ratio(),
            expected_total: (1u64 << (k + 2)) - 1,
            average_deviation_numerator: numerator,
            law,
            report,
        });
    }

    for b in &blocks {
        let r = &b.report;
        let law = match &b.law {
            LawStatus::Pass => "pass".to_string(),
            LawStatus::Fail { deviations } => format!("FAIL ({} deviations)", deviations.len()),
            LawStatus::Refused { .. } => "refused (incomplete)".to_string(),
        };
        let hist: Vec<String> = r.histogram.iter().map(|(f, c)| format!("{f}:{c}")).collect();
        println!(
            "B{:<2} total={:<8} peak_m={:<8} ratio={:.6} law={law} hist={{{}}}",
            r.k,
            r.total,
            r.peak_m,
            b.peak_ratio,
            hist.join(", ")
        );
    }

    let report = FreqReport {
        seed: trace.config().seed.values().to_vec(),
        horizon: trace.len(),
        m_cap,
        beyond_cap: table.beyond_cap(),
        blocks,
    };
    let report_path = resolve(&args.report);
    write_atomic(&report_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;

    let last_m = ((1usize << (args.kmax + 1)) - 1).min(m_cap);
    write_columns(&resolve(&args.data), (1..=last_m).map(|m| (m, table.count(m))))?;
    println!("report: {}", report_path.display());
    Ok(report_path)
}

pub fn seeds(args: &SeedsArgs) -> Result<PathBuf> {
    let seeds = enumerate_seeds(args.len, args.max)?;
    let opts = ClassifyOptions {
        horizon: args.horizon,
        max_shift: args.max_shift,
        probe_window: args.probe_window.min(args.horizon),
    };
    let reference = reference_trace(opts.horizon, opts.max_shift)?;
    let reports = classify_all(&seeds, &opts, &reference)?;
    let table = table_report(&reports)?;

    println!("{:<12} {:<24} {:>6} {:>12}  merge", "seed", "class", "death", "2Q(H)/H");
    for r in table.rows() {
        let death = r.outcome.step().map_or("-".to_string(), |s| s.to_string());
        let growth = r.growth.map_or("-".to_string(), |g| format!("{:.6}", g.ratio()));
        let merge = match r.classification {
            Classification::MergesIntoOriginal { shift, merge_index }
            | Classification::ShiftedOriginal { shift, merge_index } => {
                format!("shift {shift:+} from n={merge_index}")
            }
            _ => "-".to_string(),
        };
        println!("{:<12} {:<24} {:>6} {:>12}  {merge}", r.seed.to_string(), r.classification.label(), death, growth);
    }

    #[derive(Serialize)]
    struct SeedsReport<'a> {
        horizon: usize,
        max_shift: usize,
        probe_window: usize,
        #[serde(flatten)]
        table: &'a ClassificationTable,
    }
    let out = resolve(&args.out);
    let report = SeedsReport {
        horizon: opts.horizon,
        max_shift: opts.max_shift,
        probe_window: opts.probe_window,
        table: &table,
    };
    write_atomic(&out, |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        writeln!(w)
    })?;
    println!("report: {}", out.display());
    Ok(out)
}
