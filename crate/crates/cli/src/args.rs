//! Command-line argument definitions.

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use hci_core::index::{GroupingScheme, Smoothing, Statistic, WeightingPolicy};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "hci", about = "Hedonic collectable index pipeline", disable_version_flag = true)]
pub struct Cli {
    /// Worker threads; outputs are identical for any value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Increase log verbosity (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Print version and schema versions.
    #[arg(long)]
    pub version: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Write synthetic snapshots and the ground-truth index path.
    Generate(GenerateArgs),
    /// Fit the baseline predictor and write a model file.
    Fit(FitArgs),
    /// Compute the headline index series from snapshots.
    Index(IndexArgs),
    /// Compute sub-indices for a grouping scheme.
    Subindex(SubindexArgs),
    /// Confidence intervals for one snapshot's headline.
    Ci(CiArgs),
    /// Forecast an index series.
    Forecast(ForecastArgs),
    /// Run an end-to-end scenario experiment.
    Scenario(ScenarioArgs),
    /// Link a re-based series to its predecessor.
    Splice(SpliceArgs),
    /// Align an external series to an index series.
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Fit(_) => "fit",
            Command::Index(_) => "index",
            Command::Subindex(_) => "subindex",
            Command::Ci(_) => "ci",
            Command::Forecast(_) => "forecast",
            Command::Scenario(_) => "scenario",
            Command::Splice(_) => "splice",
            Command::Compare(_) => "compare",
        }
    }
}

fn parse_statistic(s: &str) -> Result<Statistic, String> {
    s.parse()
}

fn parse_weighting(s: &str) -> Result<WeightingPolicy, String> {
    s.parse()
}

fn parse_smoothing(s: &str) -> Result<Smoothing, String> {
    s.parse()
}

fn parse_scheme(s: &str) -> Result<GroupingScheme, String> {
    s.parse()
}

#[derive(Debug, Args, Serialize)]
pub struct IndexFlags {
    /// Group statistic: mean or median.
    #[arg(long, default_value = "mean", value_parser = parse_statistic)]
    pub statistic: Statistic,
    /// Weighting policy: per-snapshot or frozen.
    #[arg(long, default_value = "per-snapshot", value_parser = parse_weighting)]
    pub weighting: WeightingPolicy,
    /// Maximum tolerated share of rejected rows per snapshot.
    #[arg(long, default_value_t = 0.05)]
    pub max_reject: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Generator configuration JSON; defaults are used when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario JSON applied to the latent market state.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Listings per snapshot; overrides the configuration.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value = "2015-01-05")]
    pub start: NaiveDate,
    #[arg(long, default_value_t = 1)]
    pub snapshots: usize,
    #[arg(long, default_value_t = 7)]
    pub interval_days: i64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindArg {
    Linear,
    Forest,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Baseline snapshot CSV.
    #[arg(long)]
    pub baseline: PathBuf,
    /// Snapshot date when the file name carries none.
    #[arg(long)]
    pub date: Option<NaiveDate>,
    #[arg(long, value_enum, default_value = "linear")]
    pub kind: ModelKindArg,
    /// Forest hyperparameters JSON.
    #[arg(long)]
    pub forest_config: Option<PathBuf>,
    /// Required for the forest.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub max_reject: f64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IndexArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Snapshot CSVs named `*_YYYY-MM-DD.csv`.
    #[arg(required = true)]
    pub snapshots: Vec<PathBuf>,
    /// Date for a single snapshot whose file name carries none.
    #[arg(long)]
    pub date: Option<NaiveDate>,
    #[command(flatten)]
    pub flags: IndexFlags,
    /// Smoothing: none, ewma(<lambda>) or ewma:<lambda>.
    #[arg(long, default_value = "none", value_parser = parse_smoothing)]
    pub smoothing: Smoothing,
    /// Index CSV to write; metadata goes to the matching `.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write JSON lines.
    #[arg(long)]
    pub jsonl: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SubindexArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(required = true)]
    pub snapshots: Vec<PathBuf>,
    #[arg(long)]
    pub date: Option<NaiveDate>,
    /// Grouping scheme: carat, shape or colour.
    #[arg(long, default_value = "carat", value_parser = parse_scheme)]
    pub scheme: GroupingScheme,
    #[arg(long, default_value = "mean", value_parser = parse_statistic)]
    pub statistic: Statistic,
    #[arg(long, default_value_t = 0.05)]
    pub max_reject: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CiArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub snapshot: PathBuf,
    #[arg(long)]
    pub date: Option<NaiveDate>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = hci_core::inference::DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "per-snapshot", value_parser = parse_weighting)]
    pub weighting: WeightingPolicy,
    #[arg(long, default_value_t = 0.05)]
    pub max_reject: f64,
    /// JSON file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMethodArg {
    Holt,
    Ar,
}

#[derive(Debug, Args, Serialize)]
pub struct ForecastArgs {
    /// Index CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "holt")]
    pub method: ForecastMethodArg,
    #[arg(long, default_value_t = 4)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0.8)]
    pub level: f64,
    /// AR order on the differenced series.
    #[arg(long, default_value_t = 1)]
    pub ar_order: usize,
    /// Differencing order.
    #[arg(long, default_value_t = 1)]
    pub ar_diff: usize,
    /// Choose the AR order and differencing by AICc.
    #[arg(long)]
    pub ar_select: bool,
    /// Spacing of forecast dates; inferred from the last two dates when absent.
    #[arg(long)]
    pub interval_days: Option<i64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScenarioArgs {
    /// Experiment configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SpliceArgs {
    #[arg(long)]
    pub old: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    /// Changeover date present in both series.
    #[arg(long)]
    pub link: NaiveDate,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    /// Index CSV.
    #[arg(long)]
    pub index: PathBuf,
    /// External `date,value` CSV.
    #[arg(long)]
    pub external: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}
