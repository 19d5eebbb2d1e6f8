use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qlab_core::{Perturbation, Seed, ValueWidth};

#[derive(Debug, Parser)]
#[command(name = "qlab", version, about = "Perturbed Hofstadter Q-recursion laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute a trace, write its checkpoint and optionally export `n Q(n)`.
    Compute(ComputeArgs),
    /// Export one derived series as two-column text.
    Diagnose(DiagnoseArgs),
    /// Export rescaled dyadic fluctuation profiles, one file per scale.
    Selfsim(SelfsimArgs),
    /// Frequency table, dyadic block report and `m F(m)` data.
    Freq(FreqArgs),
    /// Classify every seed of a given length and value range.
    Seeds(SeedsArgs),
    /// Run the reproduction checks and report pass/fail per check.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    /// Initial values, e.g. `1,1` or `1,3,3`.
    #[arg(long, default_value = "1,1")]
    pub seed: Seed,
    #[arg(long, default_value = "alternating")]
    pub perturbation: Perturbation,
    /// Largest n to compute. Accepts `1000000`, `1_000_000` or `1e6`.
    #[arg(long, value_parser = parse_count)]
    pub horizon: Option<usize>,
    /// Bytes per stored value.
    #[arg(long, default_value = "4", value_parser = parse_width)]
    pub width: ValueWidth,
    /// Checkpoint to reuse when it matches, or to create.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Treat a death before the horizon as a normal result.
    #[arg(long)]
    pub allow_death: bool,
}

#[derive(Debug, Args)]
pub struct ComputeArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Checkpoint path when `--trace` is not given.
    #[arg(long, default_value = "trace.qtr")]
    pub out: PathBuf,
    /// Also write `n Q(n)` lines to this file.
    #[arg(long)]
    pub export: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Series {
    #[value(name = "E")]
    Fluctuation,
    #[value(name = "S")]
    Safety,
    #[value(name = "D")]
    Difference,
    #[value(name = "t1")]
    Clock1,
    #[value(name = "t2")]
    Clock2,
    #[value(name = "R")]
    Renorm,
    #[value(name = "Rodd")]
    RenormOdd,
    #[value(name = "Reven")]
    RenormEven,
    #[value(name = "A")]
    Odd,
    #[value(name = "B")]
    Even,
    #[value(name = "a")]
    OddDev,
    #[value(name = "b")]
    EvenDev,
    #[value(name = "s")]
    MeanDev,
    #[value(name = "d")]
    HalfGap,
    #[value(name = "G")]
    LogProfile,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    #[arg(long, value_enum)]
    pub series: Series,
    /// First index (n or k) to export.
    #[arg(long)]
    pub from: Option<usize>,
    /// Last index to export; defaults to min(700, last valid index).
    #[arg(long)]
    pub to: Option<usize>,
    /// Grid density for the `G` series.
    #[arg(long, default_value_t = 64)]
    pub samples_per_octave: u32,
    /// Output file; defaults to `<series>_values.dat`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelfsimArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Scales to export.
    #[arg(long = "k", value_delimiter = ',', default_value = "0,1,2,3,4,5")]
    pub scales: Vec<u32>,
    /// Directory for `selfsimilar_k<k>.dat` files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FreqArgs {
    #[command(flatten)]
    pub trace: TraceArgs,
    /// Report blocks 0..=kmax.
    #[arg(long, default_value_t = 15)]
    pub kmax: u32,
    /// Largest m tracked; defaults to N/2.
    #[arg(long, value_parser = parse_count)]
    pub m_cap: Option<usize>,
    #[arg(long, default_value = "freq_report.json")]
    pub report: PathBuf,
    /// `m F(m)` for every m in blocks 0..=kmax.
    #[arg(long, default_value = "frequency.dat")]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeedsArgs {
    /// Seed length (2 or 3).
    #[arg(long, default_value_t = 3)]
    pub len: usize,
    /// Largest seed entry.
    #[arg(long, default_value_t = 3)]
    pub max: u64,
    #[arg(long, default_value = "1000000", value_parser = parse_count)]
    pub horizon: usize,
    #[arg(long, default_value_t = 8)]
    pub max_shift: usize,
    /// Minimum agreeing span for a merge; clamped to the horizon.
    #[arg(long, default_value = "10000", value_parser = parse_count)]
    pub probe_window: usize,
    #[arg(long, default_value = "seeds_report.json")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Every reproduction check.
    #[value(name = "paper")]
    Full,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::Full)]
    pub suite: Suite,
    /// Skip the 10^8-term performance check.
    #[arg(long)]
    pub skip_perf: bool,
}

/// Non-negative integer in plain, underscored or `1e7` notation.
pub fn parse_count(s: &str) -> Result<usize, String> {
    let clean = s.replace('_', "");
    if let Some((mantissa, exp)) = clean.split_once(['e', 'E']) {
        let m: usize = mantissa.parse().map_err(|_| format!("bad count {s:?}"))?;
        let e: u32 = exp.parse().map_err(|_| format!("bad exponent in {s:?}"))?;
        return 10usize.checked_pow(e).and_then(|p| p.checked_mul(m)).ok_or_else(|| format!("{s:?} is too large"));
    }
    clean.parse().map_err(|_| format!("bad count {s:?}"))
}

fn parse_width(s: &str) -> Result<ValueWidth, String> {
    match s {
        "4" => Ok(ValueWidth::Four),
        "8" => Ok(ValueWidth::Eight),
        _ => Err(format!("width must be 4 or 8, got {s:?}")),
    }
}
