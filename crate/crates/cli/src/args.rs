//! Command-line argument definitions.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "rhospan",
    version,
    about = "Penalized B-spline smoothing with an automatic search interval for the log smoothing parameter"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the automatic rho search interval for a dataset.
    Interval(SmoothArgs),
    /// Fit the spline at the criterion-optimal rho found by grid search.
    Fit(SmoothArgs),
    /// Emit the edf/GCV/REML curves over the automatic interval as CSV.
    Curves(SmoothArgs),
    /// Run the coverage simulation scenarios.
    Simulate(SimulateArgs),
    /// Benchmark interval computation against grid-search PLS solving.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PenaltyChoice {
    /// General difference penalty (any knots).
    Gps,
    /// Standard difference penalty (equidistant knots).
    Sps,
    /// Exact derivative penalty.
    Os,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeChoice {
    Exact,
    Wide,
    Heuristic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriterionChoice {
    Gcv,
    Reml,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatChoice {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct SmoothArgs {
    /// Input CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,

    /// Column holding x values (numeric or ISO-8601 dates).
    #[arg(long, default_value = "x")]
    pub x_col: String,

    /// Column holding y values.
    #[arg(long, default_value = "y")]
    pub y_col: String,

    /// Optional column holding nonnegative weights.
    #[arg(long)]
    pub w_col: Option<String>,

    /// B-spline order d (4 = cubic).
    #[arg(long = "degree", short = 'd', default_value_t = 4)]
    pub degree: usize,

    /// Penalty type.
    #[arg(long, value_enum, default_value_t = PenaltyChoice::Gps)]
    pub penalty: PenaltyChoice,

    /// Penalty order m (1 <= m <= d-1).
    #[arg(long = "order", short = 'm', default_value_t = 2)]
    pub order: usize,

    /// Place exactly this many quantile knots (overrides --knot-frac).
    #[arg(long)]
    pub knots: Option<usize>,

    /// Knots as a fraction of the number of observations.
    #[arg(long, default_value_t = 0.25)]
    pub knot_frac: f64,

    /// Coverage parameter kappa in (0, 0.5).
    #[arg(long, default_value_t = 0.01)]
    pub kappa: f64,

    /// Interval mode.
    #[arg(long, value_enum, default_value_t = ModeChoice::Heuristic)]
    pub mode: ModeChoice,

    /// Number of rho grid points.
    #[arg(long = "grid", default_value_t = 100)]
    pub grid: usize,

    /// Smoothness selection criterion.
    #[arg(long, value_enum, default_value_t = CriterionChoice::Gcv)]
    pub criterion: CriterionChoice,

    /// Seed for the iteration start vectors.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Output path (stdout when absent). `fit` writes the CSV here and the
    /// JSON summary to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Stdout format where both make sense.
    #[arg(long, value_enum, default_value_t = FormatChoice::Json)]
    pub format: FormatChoice,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    /// Scenario id 1..=8, or omit for all eight.
    #[arg(long)]
    pub scenario: Option<u8>,

    /// Number of basis functions.
    #[arg(long, default_value_t = 50)]
    pub p: usize,

    /// B-spline order d.
    #[arg(long = "degree", short = 'd', default_value_t = 4)]
    pub degree: usize,

    /// Penalty order m.
    #[arg(long = "order", short = 'm', default_value_t = 2)]
    pub order: usize,

    /// Replications per scenario.
    #[arg(long, default_value_t = 200)]
    pub reps: usize,

    /// Master seed; replication r uses seed + r.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output base path: writes <output>.json and <output>.csv.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Stdout format when no output path is given.
    #[arg(long, value_enum, default_value_t = FormatChoice::Json)]
    pub format: FormatChoice,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    /// Comma-separated list of p values.
    #[arg(long = "p-list", value_delimiter = ',', default_value = "250,500,1000,2000")]
    pub p_list: Vec<usize>,

    /// Repetitions per p (medians reported).
    #[arg(long, default_value_t = 5)]
    pub reps: usize,

    /// Grid size for the PLS sweep column.
    #[arg(long = "grid", default_value_t = 20)]
    pub grid: usize,

    /// Output CSV path (text table always goes to stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}
