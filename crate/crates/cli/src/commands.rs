//! Command implementations, kept separate from I/O dispatch so integration
//! tests can call them in-process.

use crate::args::{
    BenchArgs, CriterionChoice, ModeChoice, PenaltyChoice, SimulateArgs, SmoothArgs,
};
use crate::input::{read_dataset, Dataset};
use crate::CliError;
use rhospan_core::basis::{design_matrix, eval_row, quantile_knots, KnotVector};
use rhospan_core::experiments::{bench_intervals, run_scenario, BenchTable, CoverageReport, Scenario};
use rhospan_core::gridsearch::{
    boundary_warning, evaluate, make_grid, select_optimum, BoundaryWarning, Criterion,
    CriterionCurve,
};
use rhospan_core::interval::{auto_interval_report, IntervalKind, IntervalMode, IntervalReport};
use rhospan_core::penalty::{derivative_factor, general_diff, standard_diff};
use rhospan_core::pls::PlsProblem;
use serde::Serialize;

/// Schema version stamped into every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

fn validate(args: &SmoothArgs) -> Result<(), CliError> {
    if args.degree < 2 {
        return Err(CliError::Usage(format!(
            "--degree must be at least 2, got {}",
            args.degree
        )));
    }
    if args.order < 1 || args.order > args.degree - 1 {
        return Err(CliError::Usage(format!(
            "--order must satisfy 1 <= m <= d-1 = {}, got {}",
            args.degree - 1,
            args.order
        )));
    }
    if !(args.kappa > 0.0 && args.kappa < 0.5) {
        return Err(CliError::Usage(format!(
            "--kappa must lie in (0, 0.5), got {}",
            args.kappa
        )));
    }
    if args.grid < 2 {
        return Err(CliError::Usage(format!(
            "--grid needs at least 2 points, got {}",
            args.grid
        )));
    }
    if args.knots.is_none() && !(args.knot_frac > 0.0 && args.knot_frac <= 1.0) {
        return Err(CliError::Usage(format!(
            "--knot-frac must lie in (0, 1], got {}",
            args.knot_frac
        )));
    }
    Ok(())
}

pub struct Prepared {
    pub problem: PlsProblem,
    pub knots: KnotVector,
    pub data: Dataset,
}

/// Reads the data, places quantile knots and assembles the penalized
/// problem per the command-line configuration.
pub fn prepare(args: &SmoothArgs) -> Result<Prepared, CliError> {
    validate(args)?;
    let data = read_dataset(
        &args.input,
        &args.x_col,
        &args.y_col,
        args.w_col.as_deref(),
    )?;
    let n = data.xs.len();
    let k = match args.knots {
        Some(k) => k,
        None => ((n as f64 * args.knot_frac).round() as usize).max(2),
    };
    let knots = quantile_knots(&data.xs, k, args.degree)?;
    let p = knots.p();
    if p >= n {
        return Err(CliError::Data(format!(
            "{k} knots give p = {p} basis functions for only n = {n} observations; \
             reduce --knots or --knot-frac"
        )));
    }
    let penalty = match args.penalty {
        PenaltyChoice::Gps => general_diff(&knots, args.order)?,
        PenaltyChoice::Sps => standard_diff(p, args.order)?,
        PenaltyChoice::Os => derivative_factor(&knots, args.order)?,
    };
    let dm = design_matrix(&knots, &data.xs)?;
    let problem = PlsProblem::new(&dm, &data.ys, data.weights.as_deref(), penalty)?;
    Ok(Prepared {
        problem,
        knots,
        data,
    })
}

#[derive(Serialize, Debug, Clone)]
pub struct IntervalJson {
    pub schema: u32,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub kind: IntervalKind,
    pub kappa: f64,
    pub q: usize,
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub lambda_mean: f64,
    pub singular: bool,
    pub rho_star_max: f64,
    pub rho_hat_max: Option<f64>,
    pub rho_hat_min: Option<f64>,
    pub n: usize,
    pub p: usize,
}

fn interval_json(report: &IntervalReport, n: usize, p: usize) -> IntervalJson {
    IntervalJson {
        schema: SCHEMA_VERSION,
        rho_lo: report.interval.rho_lo,
        rho_hi: report.interval.rho_hi,
        kind: report.interval.kind,
        kappa: report.interval.kappa,
        q: report.interval.q,
        lambda_max: report.summary.lambda_max,
        lambda_min: report.summary.lambda_min,
        lambda_mean: report.summary.lambda_mean,
        singular: report.summary.singular,
        rho_star_max: report.rho_star_max,
        rho_hat_max: report.rho_hat_max,
        rho_hat_min: report.rho_hat_min,
        n,
        p,
    }
}

fn mode_of(choice: ModeChoice) -> IntervalMode {
    match choice {
        ModeChoice::Exact => IntervalMode::Exact,
        ModeChoice::Wide => IntervalMode::Wide,
        ModeChoice::Heuristic => IntervalMode::HeuristicPreferred,
    }
}

/// The `interval` command: the automatic search interval as JSON.
pub fn cmd_interval(args: &SmoothArgs) -> Result<IntervalJson, CliError> {
    let prep = prepare(args)?;
    let report = auto_interval_report(
        &prep.problem,
        args.kappa,
        mode_of(args.mode),
        args.seed,
    )?;
    Ok(interval_json(&report, prep.problem.n(), prep.problem.p()))
}

#[derive(Serialize, Debug, Clone)]
pub struct SelectionJson {
    pub criterion: Criterion,
    pub rho: f64,
    pub index: usize,
    pub value: f64,
    pub edf: f64,
    pub sigma2: f64,
    pub boundary_warning: Option<BoundaryWarning>,
}

#[derive(Serialize, Debug, Clone)]
pub struct FitSummary {
    pub schema: u32,
    pub interval: IntervalJson,
    pub grid_size: usize,
    pub failures: Vec<usize>,
    pub selections: Vec<SelectionJson>,
}

pub struct FitOutput {
    pub summary: FitSummary,
    pub table_csv: String,
}

fn criteria_of(choice: CriterionChoice) -> Vec<Criterion> {
    match choice {
        CriterionChoice::Gcv => vec![Criterion::Gcv],
        CriterionChoice::Reml => vec![Criterion::Reml],
        CriterionChoice::Both => vec![Criterion::Gcv, Criterion::Reml],
    }
}

fn float(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// The `fit` command: grid search over the automatic interval, one fitted
/// curve per requested criterion, plus a dense evaluation grid for plotting.
pub fn cmd_fit(args: &SmoothArgs) -> Result<FitOutput, CliError> {
    let prep = prepare(args)?;
    let report = auto_interval_report(
        &prep.problem,
        args.kappa,
        mode_of(args.mode),
        args.seed,
    )?;
    let grid = make_grid(&report.interval, args.grid);
    let curve = evaluate(&prep.problem, &grid)?;

    let criteria = criteria_of(args.criterion);
    let mut selections = Vec::new();
    let mut fits = Vec::new();
    for &criterion in &criteria {
        let sel = select_optimum(&curve, criterion)?;
        let fit = prep.problem.solve_at(sel.rho)?;
        selections.push(SelectionJson {
            criterion,
            rho: sel.rho,
            index: sel.index,
            value: sel.value,
            edf: fit.edf,
            sigma2: fit.sigma2_hat,
            boundary_warning: boundary_warning(&curve, &sel),
        });
        fits.push(fit);
    }

    // Fitted values at the data x's (unweighted design) and on a dense grid.
    let design = design_matrix(&prep.knots, &prep.data.xs)?;
    let (lo, hi) = prep.knots.domain();
    let grid_n = 200usize;
    let eval_xs: Vec<f64> = (0..grid_n)
        .map(|i| lo + (hi - lo) * i as f64 / (grid_n - 1) as f64)
        .collect();

    let mut header = String::from("x,y,source");
    for c in &criteria {
        match c {
            Criterion::Gcv => header.push_str(",fit_gcv"),
            Criterion::Reml => header.push_str(",fit_reml"),
        }
    }
    let mut table = header;
    table.push('\n');
    let data_fits: Vec<Vec<f64>> = fits
        .iter()
        .map(|f| design.matvec(&f.beta_hat))
        .collect();
    for (i, (x, y)) in prep.data.xs.iter().zip(&prep.data.ys).enumerate() {
        let mut row = format!("{x},{y},data");
        for vals in &data_fits {
            row.push(',');
            row.push_str(&float(vals[i]));
        }
        table.push_str(&row);
        table.push('\n');
    }
    for &x in &eval_xs {
        let (first, vals) = eval_row(&prep.knots, x)?;
        let mut row = format!("{x},,grid");
        for fit in &fits {
            let yv: f64 = vals
                .iter()
                .enumerate()
                .map(|(t, v)| v * fit.beta_hat[first + t])
                .sum();
            row.push(',');
            row.push_str(&float(yv));
        }
        table.push_str(&row);
        table.push('\n');
    }

    Ok(FitOutput {
        summary: FitSummary {
            schema: SCHEMA_VERSION,
            interval: interval_json(&report, prep.problem.n(), prep.problem.p()),
            grid_size: args.grid,
            failures: curve.failures.clone(),
            selections,
        },
        table_csv: table,
    })
}

pub struct CurvesOutput {
    pub interval: IntervalJson,
    pub curve: CriterionCurve,
}

impl CurvesOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,edf,gcv,reml\n");
        let c = &self.curve;
        for i in 0..c.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                c.rhos[i],
                float(c.edf[i]),
                float(c.gcv[i]),
                float(c.reml[i])
            ));
        }
        out
    }
}

/// The `curves` command: criterion values over the automatic interval.
pub fn cmd_curves(args: &SmoothArgs) -> Result<CurvesOutput, CliError> {
    let prep = prepare(args)?;
    let report = auto_interval_report(
        &prep.problem,
        args.kappa,
        mode_of(args.mode),
        args.seed,
    )?;
    let grid = make_grid(&report.interval, args.grid);
    let curve = evaluate(&prep.problem, &grid)?;
    Ok(CurvesOutput {
        interval: interval_json(&report, prep.problem.n(), prep.problem.p()),
        curve,
    })
}

/// The `simulate` command: one coverage report per requested scenario.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<CoverageReport>, CliError> {
    if args.degree < 2 || args.order < 1 || args.order > args.degree - 1 {
        return Err(CliError::Usage(format!(
            "need d >= 2 and 1 <= m <= d-1, got d = {}, m = {}",
            args.degree, args.order
        )));
    }
    if args.p < args.degree {
        return Err(CliError::Usage(format!(
            "need p >= d, got p = {}, d = {}",
            args.p, args.degree
        )));
    }
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let scenarios = match args.scenario {
        Some(id) => vec![Scenario::from_id(id)?],
        None => Scenario::all(),
    };
    Ok(scenarios
        .into_iter()
        .map(|sc| run_scenario(sc, args.p, args.degree, args.order, args.reps, args.seed))
        .collect())
}

/// The `bench` command.
pub fn cmd_bench(args: &BenchArgs) -> Result<BenchTable, CliError> {
    if args.p_list.is_empty() {
        return Err(CliError::Usage("--p-list must not be empty".into()));
    }
    if args.reps == 0 || args.grid < 2 {
        return Err(CliError::Usage(
            "--reps must be positive and --grid at least 2".into(),
        ));
    }
    Ok(bench_intervals(&args.p_list, args.reps, args.grid))
}
