//! Argument definitions and dispatch.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ilr_depth::geometry::TimeDomain;
use ilr_depth::intensity::BinRule;

use crate::commands::{
    self, CardinalityModel, ContourMode, ContourOpts, ConvergenceOpts, DepthOpts, Family, Mode, SimulateOpts,
};
use crate::expr::Expr;
use crate::ingest::{self, IngestOpts, Period};
use crate::io::{read_realizations, write_realizations, CliError, CliResult, Sample};

#[derive(Debug, Parser)]
#[command(name = "ilr-depth", version, about = "Depth ranking of temporal point-process realizations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Group a CSV of timestamps into one realization per period.
    Ingest(IngestArgs),
    /// Draw realizations from a homogeneous, inhomogeneous or Markov-interval process.
    Simulate(SimulateArgs),
    /// Rank realizations by overall depth.
    Depth(DepthArgs),
    /// Export a ternary depth grid for two-event realizations.
    Contours(ContoursArgs),
    /// Sup-error of the histogram cumulative intensity as the sample grows.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// CSV file with a header row; `-` reads stdin.
    #[arg(long, default_value = "-")]
    pub input: String,
    /// Output file; with --split-by one file per category is written next to it.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value = "timestamp")]
    pub time_column: String,
    /// Column whose values split the log into separate outputs.
    #[arg(long)]
    pub split_by: Option<String>,
    #[arg(long, value_enum, default_value_t = Period::Day)]
    pub period: Period,
    /// Emit periods without events as empty realizations.
    #[arg(long)]
    pub keep_empty: bool,
    /// Start of the observation window in hours from the period start.
    #[arg(long, requires = "t2")]
    pub t1: Option<f64>,
    #[arg(long, requires = "t1")]
    pub t2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t2: f64,
    /// Rate of the homogeneous process.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Intensity in t (ipp) or the time factor (imi).
    #[arg(long)]
    pub intensity: Option<String>,
    /// Markov-interval factor in tau, the time since the last event.
    #[arg(long)]
    pub gap_intensity: Option<String>,
    /// Upper bound on the intensity for thinning.
    #[arg(long)]
    pub bound: Option<f64>,
    /// Keep only realizations with this many events.
    #[arg(long)]
    pub cardinality: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DepthArgs {
    /// Realization file; `-` reads stdin.
    #[arg(long, default_value = "-")]
    pub input: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Hpp)]
    pub mode: Mode,
    /// Exponent on the cardinality weight.
    #[arg(long = "r", default_value_t = 1.0)]
    pub r: f64,
    /// Histogram bins (both factors in imi mode).
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub bins_t: Option<usize>,
    #[arg(long)]
    pub bins_tau: Option<usize>,
    /// Conditional intensity in t and tau for given-intensity.
    #[arg(long)]
    pub intensity: Option<String>,
    #[arg(long, value_enum, default_value_t = CardinalityModel::Empirical)]
    pub cardinality: CardinalityModel,
}

#[derive(Debug, Args)]
pub struct ContoursArgs {
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 30)]
    pub resolution: usize,
    #[arg(long, value_enum, default_value_t = ContourMode::Hpp)]
    pub mode: ContourMode,
    /// Sample for ipp-histogram.
    #[arg(long)]
    pub input: Option<String>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub intensity: Option<String>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t2: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub intensity: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t1: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t2: f64,
    /// Comma-separated realization counts.
    #[arg(long, value_delimiter = ',', default_values_t = commands::DEFAULT_N_GRID)]
    pub n_grid: Vec<usize>,
    /// fourth-root, sqrt, linear or fixed:M.
    #[arg(long, default_value = "fourth-root", value_parser = commands::parse_bin_rule)]
    pub rule: BinRule,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Thinning bound; defaults to 5% above the sampled maximum.
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_expr(src: &str, flag: &str) -> CliResult<Expr> {
    Expr::parse(src).map_err(|e| CliError::Usage(format!("{flag}: {e}")))
}

fn domain(t1: f64, t2: f64) -> CliResult<TimeDomain> {
    TimeDomain::new(t1, t2).map_err(|e| CliError::Usage(e.to_string()))
}

fn read_sample(input: &str) -> CliResult<Sample> {
    if input == "-" {
        read_realizations(io::stdin().lock())
    } else {
        let f = File::open(input).map_err(|e| CliError::Data(format!("{input}: {e}")))?;
        read_realizations(BufReader::new(f))
    }
}

fn sink(output: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let mut w = sink(output)?;
    w.write_all(bytes)?;
    w.flush()?;
    Ok(())
}

/// `out.jsonl` with category `a b` becomes `out-a_b.jsonl`.
pub fn category_path(base: &Path, category: &str) -> PathBuf {
    let clean: String = category
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}-{clean}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{clean}"),
    };
    base.with_file_name(name)
}

fn run_ingest(a: &IngestArgs) -> CliResult<()> {
    let opts = IngestOpts {
        time_column: a.time_column.clone(),
        split_by: a.split_by.clone(),
        period: a.period,
        keep_empty: a.keep_empty,
        window: a.t1.zip(a.t2),
    };
    if opts.split_by.is_some() && a.output.is_none() {
        return Err(CliError::Usage("--split-by needs --output to name the per-category files".into()));
    }
    let result = if a.input == "-" {
        ingest::ingest(io::stdin().lock(), &opts)?
    } else {
        let f = File::open(&a.input).map_err(|e| CliError::Data(format!("{}: {e}", a.input)))?;
        ingest::ingest(BufReader::new(f), &opts)?
    };
    for (line, reason) in &result.bad_rows {
        eprintln!("warning: line {line}: {reason}");
    }
    if result.dropped_outside_window > 0 {
        eprintln!("note: {} events outside the window were dropped", result.dropped_outside_window);
    }
    for (category, sample) in &result.groups {
        let path = match (category, &a.output) {
            (Some(c), Some(base)) => Some(category_path(base, c)),
            (None, out) => out.clone(),
            (Some(_), None) => unreachable!("checked above"),
        };
        let mut w = sink(path.as_deref())?;
        write_realizations(&mut w, sample)?;
        w.flush()?;
    }
    Ok(())
}

fn run_simulate(a: &SimulateArgs) -> CliResult<()> {
    let opts = SimulateOpts {
        family: a.family,
        n: a.n,
        seed: a.seed,
        domain: domain(a.t1, a.t2)?,
        rate: a.rate,
        intensity: a.intensity.as_deref().map(|s| parse_expr(s, "--intensity")).transpose()?,
        gap_intensity: a.gap_intensity.as_deref().map(|s| parse_expr(s, "--gap-intensity")).transpose()?,
        bound: a.bound,
        cardinality: a.cardinality,
    };
    let sample = commands::simulate(&opts)?;
    let mut w = sink(a.output.as_deref())?;
    write_realizations(&mut w, &sample)?;
    w.flush()?;
    Ok(())
}

fn run_depth(a: &DepthArgs) -> CliResult<()> {
    let opts = DepthOpts {
        mode: a.mode,
        r: a.r,
        bins: a.bins,
        bins_t: a.bins_t,
        bins_tau: a.bins_tau,
        intensity: a.intensity.as_deref().map(|s| parse_expr(s, "--intensity")).transpose()?,
        cardinality: a.cardinality,
    };
    if !(opts.r > 0.0 && opts.r.is_finite()) {
        return Err(CliError::Usage(format!("--r must be positive, got {}", opts.r)));
    }
    let sample = read_sample(&a.input)?;
    let reports = commands::depth(&sample, &opts)?;
    emit(a.output.as_deref(), &commands::depth_csv(&reports)?)
}

fn run_contours(a: &ContoursArgs) -> CliResult<()> {
    let opts = ContourOpts {
        k: a.k,
        resolution: a.resolution,
        mode: a.mode,
        bins: a.bins,
        intensity: a.intensity.as_deref().map(|s| parse_expr(s, "--intensity")).transpose()?,
        domain: domain(a.t1, a.t2)?,
    };
    let sample = a.input.as_deref().map(read_sample).transpose()?;
    let rows = commands::contours(sample.as_ref(), &opts)?;
    emit(a.output.as_deref(), &commands::contours_csv(&rows)?)
}

fn run_convergence(a: &ConvergenceArgs) -> CliResult<()> {
    let opts = ConvergenceOpts {
        intensity: parse_expr(&a.intensity, "--intensity")?,
        domain: domain(a.t1, a.t2)?,
        n_grid: a.n_grid.clone(),
        rule: a.rule,
        seed: a.seed,
        lambda_max: a.lambda_max,
    };
    let rows = commands::convergence(&opts)?;
    emit(a.output.as_deref(), &commands::convergence_csv(&rows)?)
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Ingest(a) => run_ingest(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Depth(a) => run_depth(a),
        Command::Contours(a) => run_contours(a),
        Command::Convergence(a) => run_convergence(a),
    }
}
