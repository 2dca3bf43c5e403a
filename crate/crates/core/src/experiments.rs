//! Simulation scenarios for the heuristic upper bound and runtime benchmarks
//! of the interval computations.

use crate::basis::{
    design_matrix, equidistant_knots, random_knots_with, xs_between_knots_with, DesignMatrix,
    KnotVector,
};
use crate::eigen;
use crate::gridsearch::make_grid;
use crate::interval::{
    self, approx_spectrum, exact_interval, heuristic_bounds, redf, wide_interval, IntervalMode,
};
use crate::linalg::{btb, cholesky_band, LowerBandMatrix, UNIT_ROUNDOFF};
use crate::penalty::{derivative_factor, general_diff, PenaltyFactor};
use crate::pls::PlsProblem;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("scenario id must lie in 1..=8, got {0}")]
    InvalidScenario(u8),

    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("setup construction failed: {0}")]
    Construction(String),
}

/// One row of the simulation design: which of the three switches are on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Scenario {
    pub id: u8,
    pub derivative_penalty: bool,
    pub equidistant_knots: bool,
    pub weighted_data: bool,
}

impl Scenario {
    /// Scenario 1 has all switches off; the derivative-penalty switch
    /// toggles fastest and the weighting switch slowest, so 8 has all on.
    pub fn from_id(id: u8) -> Result<Self, ExperimentError> {
        if !(1..=8).contains(&id) {
            return Err(ExperimentError::InvalidScenario(id));
        }
        let bits = id - 1;
        Ok(Scenario {
            id,
            derivative_penalty: bits & 1 != 0,
            equidistant_knots: bits & 2 != 0,
            weighted_data: bits & 4 != 0,
        })
    }

    pub fn all() -> Vec<Scenario> {
        (1..=8).map(|id| Scenario::from_id(id).expect("valid id")).collect()
    }
}

/// One simulated smoothing setup: knots, design, weights, penalty and the
/// design Cholesky factor. The response plays no role in interval studies.
pub struct ScenarioSetup {
    pub knots: KnotVector,
    pub design: DesignMatrix,
    pub weights: Option<Vec<f64>>,
    pub penalty: PenaltyFactor,
    pub l: LowerBandMatrix,
}

/// Builds a random setup for one scenario: equidistant or Gaussian-perturbed
/// knots, ten uniform x draws per knot span, Beta(3, 3) weights when the
/// scenario is weighted, and a general-difference or derivative penalty.
///
/// Pathological knot draws can make the simulated design numerically rank
/// deficient; that surfaces as an error so callers can count it instead of
/// aborting a replication sweep.
pub fn build_setup(
    scenario: Scenario,
    p: usize,
    d: usize,
    m: usize,
    seed: u64,
) -> Result<ScenarioSetup, ExperimentError> {
    let fail = |e: String| ExperimentError::Construction(e);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let knots = if scenario.equidistant_knots {
        equidistant_knots(p, d).map_err(|e| fail(e.to_string()))?
    } else {
        random_knots_with(p, d, &mut rng).map_err(|e| fail(e.to_string()))?
    };
    let xs = xs_between_knots_with(&knots, 10, &mut rng);
    let design = design_matrix(&knots, &xs).map_err(|e| fail(e.to_string()))?;
    let weights = scenario.weighted_data.then(|| {
        let beta = Beta::new(3.0, 3.0).expect("valid parameters");
        (0..xs.len()).map(|_| beta.sample(&mut rng)).collect::<Vec<f64>>()
    });
    let penalty = if scenario.derivative_penalty {
        derivative_factor(&knots, m).map_err(|e| fail(e.to_string()))?
    } else {
        general_diff(&knots, m).map_err(|e| fail(e.to_string()))?
    };
    let l = cholesky_band(&btb(design.bands(), weights.as_deref()))
        .map_err(|e| fail(e.to_string()))?;
    Ok(ScenarioSetup {
        knots,
        design,
        weights,
        penalty,
        l,
    })
}

/// Coverage statistics of the heuristic and wide upper bounds over many
/// replications of one scenario: P(rho) = 1 - redf(rho)/q, evaluated on the
/// true spectrum. Vectors are aligned per replication; `None` marks a
/// replication where that bound was not available.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub scenario: Scenario,
    pub p: usize,
    pub d: usize,
    pub m: usize,
    pub replications: usize,
    pub p_hat: Vec<Option<f64>>,
    pub p_star: Vec<Option<f64>>,
    pub heuristic_failures: usize,
    pub construction_failures: usize,
}

impl CoverageReport {
    pub fn p_hat_samples(&self) -> Vec<f64> {
        self.p_hat.iter().flatten().copied().collect()
    }

    pub fn p_star_samples(&self) -> Vec<f64> {
        self.p_star.iter().flatten().copied().collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn csv_header() -> &'static str {
        "scenario,p,d,m,replication,p_hat,p_star\n"
    }

    /// One CSV row per replication with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::csv_header());
        out.push_str(&self.to_csv_body());
        out
    }

    /// The data rows alone, for concatenating several reports.
    pub fn to_csv_body(&self) -> String {
        let fmt = |v: &Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        let mut out = String::new();
        for i in 0..self.replications {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.scenario.id,
                self.p,
                self.d,
                self.m,
                i,
                fmt(&self.p_hat[i]),
                fmt(&self.p_star[i])
            ));
        }
        out
    }
}

/// Runs one scenario `reps` times with per-replication seeds derived as
/// `seed + replication index`. Replications run in parallel; results are
/// deterministic regardless of scheduling.
pub fn run_scenario(
    scenario: Scenario,
    p: usize,
    d: usize,
    m: usize,
    reps: usize,
    seed: u64,
) -> CoverageReport {
    let kappa = 0.01;
    #[derive(Default, Clone)]
    struct RepOutcome {
        p_hat: Option<f64>,
        p_star: Option<f64>,
        heuristic_failed: bool,
        construction_failed: bool,
    }

    let outcomes: Vec<RepOutcome> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = seed.wrapping_add(rep as u64);
            let mut out = RepOutcome::default();
            let setup = match build_setup(scenario, p, d, m, rep_seed) {
                Ok(s) => s,
                Err(_) => {
                    out.construction_failed = true;
                    return out;
                }
            };
            let eig = eigen::summarize(&setup.l, &setup.penalty, rep_seed ^ 0x51D3);
            let (summary, tf) = match eig {
                Ok(v) => v,
                Err(_) => {
                    out.construction_failed = true;
                    return out;
                }
            };
            let truth = match eigen::all_eigenvalues(&tf) {
                Ok(mut lam) => {
                    let floor = lam[0] * UNIT_ROUNDOFF;
                    for l in lam.iter_mut() {
                        if *l < floor {
                            *l = floor;
                        }
                    }
                    lam
                }
                Err(_) => {
                    out.construction_failed = true;
                    return out;
                }
            };
            let q = truth.len() as f64;
            let wide = wide_interval(&summary, kappa);
            out.p_star = Some(1.0 - redf(wide.rho_hi, &truth) / q);
            match approx_spectrum(
                summary.q,
                summary.lambda_max,
                summary.lambda_min,
                summary.lambda_mean,
            ) {
                Ok(spec) => match heuristic_bounds(&spec, kappa) {
                    Ok((_, hat_hi)) => {
                        out.p_hat = Some(1.0 - redf(hat_hi, &truth) / q);
                    }
                    Err(_) => out.heuristic_failed = true,
                },
                Err(_) => out.heuristic_failed = true,
            }
            out
        })
        .collect();

    let mut report = CoverageReport {
        scenario,
        p,
        d,
        m,
        replications: reps,
        p_hat: Vec::with_capacity(reps),
        p_star: Vec::with_capacity(reps),
        heuristic_failures: 0,
        construction_failures: 0,
    };
    for o in outcomes {
        report.p_star.push(o.p_star);
        report.p_hat.push(o.p_hat);
        if o.construction_failed {
            report.construction_failures += 1;
        } else if o.heuristic_failed {
            report.heuristic_failures += 1;
        }
    }
    report
}

/// Median wall times (seconds) of the three computational tasks at one p.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub p: usize,
    pub wide_heuristic_s: f64,
    pub exact_s: f64,
    pub pls_grid_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub grid_size: usize,
    pub reps: usize,
}

impl BenchTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("p,wide_heuristic_s,exact_s,pls_grid_s\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.p, r.wide_heuristic_s, r.exact_s, r.pls_grid_s
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:>6}  {:>18}  {:>14}  {:>16}\n",
            "p", "wide+heuristic (s)", "exact (s)", "pls grid (s)"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>6}  {:>18.6}  {:>14.6}  {:>16.6}\n",
                r.p, r.wide_heuristic_s, r.exact_s, r.pls_grid_s
            ));
        }
        out
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Wall-times the three tasks at each p: (a) the wide + heuristic interval,
/// (b) the exact interval through the full eigendecomposition, and (c) a
/// PLS grid of `grid_size` solves. Setup (knots, design, factor L) is shared
/// and excluded from the timings; medians over `reps` runs.
pub fn bench_intervals(p_list: &[usize], reps: usize, grid_size: usize) -> BenchTable {
    let kappa = 0.01;
    let scenario = Scenario::from_id(1).expect("valid id");
    let mut rows = Vec::with_capacity(p_list.len());
    for (idx, &p) in p_list.iter().enumerate() {
        let setup = build_setup(scenario, p, 4, 2, 7_000 + idx as u64)
            .expect("benchmark setup is well posed");
        let mut rng = ChaCha8Rng::seed_from_u64(9_000 + idx as u64);
        let y: Vec<f64> = setup
            .design
            .xs()
            .iter()
            .map(|x| (x / 7.0).sin() + 0.3 * rng.gen_range(-1.0..1.0))
            .collect();
        let prob = PlsProblem::new(
            &setup.design,
            &y,
            setup.weights.as_deref(),
            setup.penalty.clone(),
        )
        .expect("simulated problem is well posed");

        let mut wide_t = Vec::with_capacity(reps);
        let mut exact_t = Vec::with_capacity(reps);
        let mut grid_t = Vec::with_capacity(reps);
        for rep in 0..reps {
            let seed = 11_000 + rep as u64;

            let t0 = Instant::now();
            let (summary, tf) =
                eigen::summarize(&setup.l, &setup.penalty, seed).expect("summary");
            let report = interval::interval_report_from_parts(
                &summary,
                &tf,
                kappa,
                IntervalMode::HeuristicPreferred,
            )
            .expect("interval");
            wide_t.push(t0.elapsed().as_secs_f64());

            let t0 = Instant::now();
            let tf2 = eigen::build_e(&setup.l, &setup.penalty).expect("factor");
            let lam = eigen::all_eigenvalues(&tf2).expect("spectrum");
            let floor = lam[0] * UNIT_ROUNDOFF;
            let lam: Vec<f64> = lam.into_iter().map(|l| l.max(floor)).collect();
            let ex = exact_interval(&lam, kappa).expect("exact interval");
            exact_t.push(t0.elapsed().as_secs_f64());

            // Serial loop: the timing comparison wants one core per task.
            let t0 = Instant::now();
            let grid = make_grid(&report.interval, grid_size);
            let mut acc = 0.0;
            for rho in &grid {
                acc += prob.solve_at(*rho).expect("solvable inside interval").edf;
            }
            grid_t.push(t0.elapsed().as_secs_f64());

            std::hint::black_box((&ex, acc));
        }
        rows.push(BenchRow {
            p,
            wide_heuristic_s: median(wide_t),
            exact_s: median(exact_t),
            pls_grid_s: median(grid_t),
        });
    }
    BenchTable {
        rows,
        grid_size,
        reps,
    }
}

/// Least-squares slope of log(t) against log(p).
pub fn loglog_slope(ps: &[usize], ts: &[f64]) -> f64 {
    assert_eq!(ps.len(), ts.len());
    let n = ps.len() as f64;
    let xs: Vec<f64> = ps.iter().map(|p| (*p as f64).ln()).collect();
    let ys: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Histogram summary of P(rho_hat_max) samples on 50 fixed bins over
/// [0.9, 1.0], with the two reference lines.
#[derive(Debug, Clone, Serialize)]
pub struct DensitySummary {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
    pub reference_floor: f64,
    pub reference_mean_p_star: f64,
}

pub fn coverage_density(report: &CoverageReport) -> Result<DensitySummary, ExperimentError> {
    let samples = report.p_hat_samples();
    if samples.len() < 2 {
        return Err(ExperimentError::TooFewSamples(samples.len()));
    }
    let bins = 50usize;
    let (lo, hi) = (0.9, 1.0);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for s in &samples {
        let idx = (((s - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let total = samples.len() as f64;
    let density: Vec<f64> = counts.iter().map(|c| *c as f64 / (total * width)).collect();
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let stars = report.p_star_samples();
    let mean_star = stars.iter().sum::<f64>() / stars.len().max(1) as f64;
    Ok(DensitySummary {
        bin_edges,
        counts,
        density,
        reference_floor: 0.99,
        reference_mean_p_star: mean_star,
    })
}
