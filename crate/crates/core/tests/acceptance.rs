//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured quantities (visible with `--nocapture`).
//!
//! The tests serialize on a global lock so the timing-sensitive criterion
//! is not perturbed by concurrent numerical work.

use rhospan_core::basis::{
    design_matrix, equidistant_knots, quantile_knots, random_knots, xs_between_knots, KnotVector,
};
use rhospan_core::eigen::{all_eigenvalues, build_e, max_eigen, min_eigen};
use rhospan_core::experiments::{bench_intervals, build_setup, loglog_slope, run_scenario, Scenario};
use rhospan_core::gridsearch::{evaluate, make_grid, select_optimum, Criterion};
use rhospan_core::interval::{
    approx_spectrum, exact_interval, heuristic_bounds, redf, wide_interval, IntervalMode,
};
use rhospan_core::linalg::{btb, cholesky_band, frobenius_sq, UNIT_ROUNDOFF};
use rhospan_core::penalty::{derivative_factor, derivative_gram, general_diff, standard_diff};
use rhospan_core::pls::PlsProblem;
use rhospan_core::{interval, EigenSummary};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::sync::{Mutex, MutexGuard, OnceLock};

fn lock() -> MutexGuard<'static, ()> {
    static LOCK: OnceLock<Mutex<()>> = OnceLock::new();
    LOCK.get_or_init(|| Mutex::new(()))
        .lock()
        .unwrap_or_else(|e| e.into_inner())
}

fn appendix_uneven_knots() -> KnotVector {
    KnotVector::new(
        vec![0.0, 0.0, 0.0, 0.0, 1.0 / 3.0, 0.5, 1.0, 1.0, 1.0, 1.0],
        4,
    )
    .unwrap()
}

fn appendix_unit_interval_knots() -> KnotVector {
    let knots: Vec<f64> = (0..10).map(|k| k as f64 / 9.0).collect();
    KnotVector::new(knots, 4).unwrap()
}

/// Criterion 1: the published second-order penalty matrices are reproduced.
#[test]
fn criterion_1_appendix_golden_matrices() {
    let _guard = lock();
    let t0 = std::time::Instant::now();

    // General differences on unit-spaced knots equal the banded (1,-2,1).
    let kv = equidistant_knots(6, 4).unwrap();
    let gps = general_diff(&kv, 2).unwrap();
    let std2 = standard_diff(6, 2).unwrap();
    assert_eq!(gps.to_dense(), std2.to_dense());
    for i in 0..4 {
        let (first, vals) = gps.row(i);
        assert_eq!((first, vals), (i, vec![1.0, -2.0, 1.0]));
    }

    // General differences on the uneven published knots.
    let kvu = appendix_uneven_knots();
    let gps_u = general_diff(&kvu, 2).unwrap().to_dense();
    let printed_gps = [
        vec![54.0, -90.0, 36.0, 0.0, 0.0, 0.0],
        vec![0.0, 24.0, -36.0, 12.0, 0.0, 0.0],
        vec![0.0, 0.0, 9.0, -22.5, 13.5, 0.0],
        vec![0.0, 0.0, 0.0, 18.0, -42.0, 24.0],
    ];
    for (i, row) in printed_gps.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!(
                (gps_u[(i, j)] - v).abs() <= 0.005,
                "gps uneven ({i},{j}): {} vs {v}",
                gps_u[(i, j)]
            );
        }
    }

    // Derivative factor on equidistant knots over [0, 1]. The published
    // matrix carries the spacing-normalized convention, a single global
    // scale h^m = (1/9)^2 away from the raw-Gram factor; a global scale on
    // the factor is a pure shift of rho.
    let kv01 = appendix_unit_interval_knots();
    let os_eq = derivative_factor(&kv01, 2).unwrap().to_dense();
    let printed_os_eq = [
        vec![0.19, -0.29, 0.00, 0.10, 0.0, 0.0],
        vec![0.0, 0.25, -0.44, 0.11, 0.07, 0.0],
        vec![0.0, 0.0, 0.26, -0.45, 0.12, 0.07],
        vec![0.0, 0.0, 0.0, 0.18, -0.36, 0.18],
    ];
    let scale = 1.0 / 81.0;
    // Confirm the least-squares alignment really is h^m before using it.
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, row) in printed_os_eq.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            num += os_eq[(i, j)] * v;
            den += os_eq[(i, j)] * os_eq[(i, j)];
        }
    }
    let fitted = num / den;
    assert!(
        (fitted / scale - 1.0).abs() < 5e-3,
        "alignment scale {fitted} is not h^m = {scale}"
    );
    for (i, row) in printed_os_eq.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!(
                (scale * os_eq[(i, j)] - v).abs() <= 0.005,
                "os equidistant ({i},{j}): {} vs {v}",
                scale * os_eq[(i, j)]
            );
        }
    }
    // The printed matrix times itself reproduces the quadrature Gram in the
    // same display units: printed'printed vs h^(2m) S, elementwise.
    let s01 = derivative_gram(&kv01, 2).unwrap().to_dense();
    let mut printed = ndarray::Array2::zeros((4, 6));
    for (i, row) in printed_os_eq.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            printed[(i, j)] = *v;
        }
    }
    let rebuilt = printed.t().dot(&printed);
    for i in 0..6 {
        for j in 0..6 {
            let rhs = s01[(i, j)] * scale * scale;
            assert!(
                (rebuilt[(i, j)] - rhs).abs() <= 5e-3,
                "gram mismatch at ({i},{j}): {} vs {rhs}",
                rebuilt[(i, j)]
            );
        }
    }

    // Derivative factor on the uneven published knots: direct match, and
    // D'D equals the quadrature Gram tightly.
    let os_u = derivative_factor(&kvu, 2).unwrap().to_dense();
    let printed_os_u = [
        vec![18.0, -26.00, 6.00, 2.00, 0.0, 0.0],
        vec![0.0, 8.94, -12.75, 2.80, 1.01, 0.0],
        vec![0.0, 0.0, 4.19, -7.25, -1.24, 4.30],
        vec![0.0, 0.0, 0.0, 6.60, -15.41, 8.81],
    ];
    for (i, row) in printed_os_u.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert!(
                (os_u[(i, j)] - v).abs() <= 0.005,
                "os uneven ({i},{j}): {} vs {v}",
                os_u[(i, j)]
            );
        }
    }
    let su = derivative_gram(&kvu, 2).unwrap().to_dense();
    let rebuilt = os_u.t().dot(&os_u);
    let resid = frobenius_sq(&(&rebuilt - &su)).sqrt();
    let scale_s = frobenius_sq(&su).sqrt();
    assert!(resid <= 1e-10 * scale_s, "D'D deviates: {}", resid / scale_s);

    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 1.0, "criterion 1 took {dt:.2}s, budget 1s");
    println!("PASS criterion 1: appendix golden matrices reproduced ({dt:.3}s)");
}

/// Fifty deterministic setups covering all 8 scenarios, d in {3,4},
/// legal m, p up to 100.
fn fifty_setups() -> Vec<(Scenario, usize, usize, usize, u64)> {
    let mut out = Vec::with_capacity(50);
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE97);
    for i in 0..50u64 {
        let scenario = Scenario::from_id((i % 8 + 1) as u8).unwrap();
        let d = if i % 2 == 0 { 4 } else { 3 };
        let m = 1 + (i as usize % (d - 1));
        let p = rng.gen_range(20..=100);
        out.push((scenario, p, d, m, 5000 + i));
    }
    out
}

/// Criterion 2: iterative extremal eigenvalues match the dense oracle.
#[test]
fn criterion_2_extremal_eigenvalue_oracle() {
    let _guard = lock();
    let t0 = std::time::Instant::now();
    let mut checked_min = 0;
    for (scenario, p, d, m, seed) in fifty_setups() {
        let setup = build_setup(scenario, p, d, m, seed).unwrap();
        let tf = build_e(&setup.l, &setup.penalty).unwrap();
        let spectrum = all_eigenvalues(&tf).unwrap();
        let lam1 = max_eigen(&setup.l, &setup.penalty, seed ^ 0xE1).unwrap();
        assert!(
            (lam1 - spectrum[0]).abs() <= 1e-6 * spectrum[0],
            "p={p} d={d} m={m} sc={}: max {lam1} vs {}",
            scenario.id,
            spectrum[0]
        );
        let (lamq, singular) = min_eigen(&tf, lam1, seed ^ 0xE2).unwrap();
        let smallest = *spectrum.last().unwrap();
        if !singular && smallest / spectrum[0] > 1e-10 {
            checked_min += 1;
            assert!(
                (lamq - smallest).abs() <= 1e-6 * smallest,
                "p={p} d={d} m={m} sc={}: min {lamq} vs {smallest}",
                scenario.id
            );
        }
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 30.0, "criterion 2 took {dt:.2}s, budget 30s");
    println!(
        "PASS criterion 2: extremal eigenvalues match the dense oracle on 50 setups \
         ({checked_min} minimum-eigenvalue checks; {dt:.2}s)"
    );
}

/// Criterion 3: interval containment with kappa = 0.01 on the same setups.
#[test]
fn criterion_3_interval_containment() {
    let _guard = lock();
    let t0 = std::time::Instant::now();
    let kappa = 0.01;
    for (scenario, p, d, m, seed) in fifty_setups() {
        let setup = build_setup(scenario, p, d, m, seed).unwrap();
        let tf = build_e(&setup.l, &setup.penalty).unwrap();
        let mut spectrum = all_eigenvalues(&tf).unwrap();
        let floor = spectrum[0] * UNIT_ROUNDOFF;
        for v in spectrum.iter_mut() {
            *v = v.max(floor);
        }
        let q = spectrum.len() as f64;

        let lam1 = max_eigen(&setup.l, &setup.penalty, seed ^ 0xE1).unwrap();
        let (lamq, singular) = min_eigen(&tf, lam1, seed ^ 0xE2).unwrap();
        let summary = EigenSummary {
            lambda_max: lam1,
            lambda_min: lamq,
            lambda_mean: frobenius_sq(tf.matrix()) / q,
            q: spectrum.len(),
            singular,
        };
        let wide = wide_interval(&summary, kappa);
        assert!(
            redf(wide.rho_lo, &spectrum) >= 0.99 * q - 1e-9 * q,
            "lower containment breached"
        );
        assert!(
            redf(wide.rho_hi, &spectrum) <= 0.01 * q + 1e-9 * q,
            "upper containment breached"
        );

        let exact = exact_interval(&spectrum, kappa).unwrap();
        assert!(
            (redf(exact.rho_lo, &spectrum) - 0.99 * q).abs() <= 1e-6 * q,
            "exact lower endpoint off target"
        );
        assert!(
            (redf(exact.rho_hi, &spectrum) - 0.01 * q).abs() <= 1e-6 * q,
            "exact upper endpoint off target"
        );
        assert!(
            wide.rho_lo <= exact.rho_lo && exact.rho_hi <= wide.rho_hi,
            "exact interval escapes the wide one"
        );
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 60.0, "criterion 3 took {dt:.2}s, budget 60s");
    println!("PASS criterion 3: wide/exact containment holds on 50 setups ({dt:.2}s)");
}

/// Criterion 4: heuristic bound quality across the simulation sweep.
///
/// In-band fractions are taken over the replications that produced a
/// heuristic bound; replications where the spectrum approximation found no
/// acceptable fit are budgeted separately by the failure-rate clause (the
/// caller falls back to the wide bound there).
#[test]
fn criterion_4_heuristic_bound_quality() {
    let _guard = lock();
    let t0 = std::time::Instant::now();
    let mut total_reps = 0usize;
    let mut total_failures = 0usize;
    let mut total_construction = 0usize;
    for &(d, m) in &[(4usize, 2usize), (3, 1)] {
        for &p in &[50usize, 100] {
            for sc_id in 1..=8u8 {
                let scenario = Scenario::from_id(sc_id).unwrap();
                let report = run_scenario(scenario, p, d, m, 200, 40_000 + sc_id as u64);
                total_reps += report.replications;
                total_failures += report.heuristic_failures;
                total_construction += report.construction_failures;
                let pairs: Vec<(f64, f64)> = report
                    .p_hat
                    .iter()
                    .zip(&report.p_star)
                    .filter_map(|(h, s)| h.zip(*s))
                    .collect();
                match sc_id {
                    1 | 5 => {
                        for (ph, _) in &pairs {
                            assert!(
                                *ph >= 0.95,
                                "d={d} m={m} p={p} sc={sc_id}: P(hat) = {ph} below 0.95"
                            );
                        }
                    }
                    _ => {
                        let in_band = pairs
                            .iter()
                            .filter(|(ph, ps)| *ph >= 0.99 && *ph <= *ps + 1e-12)
                            .count();
                        let frac = in_band as f64 / pairs.len().max(1) as f64;
                        assert!(
                            frac >= 0.90,
                            "d={d} m={m} p={p} sc={sc_id}: only {frac:.3} in band"
                        );
                    }
                }
            }
        }
    }
    let failure_rate = total_failures as f64 / total_reps as f64;
    assert!(
        failure_rate <= 0.05,
        "heuristic failure rate {failure_rate:.4} exceeds 5% over the sweep"
    );
    // Rank-deficient knot draws are tolerated but must stay rare.
    assert!(
        (total_construction as f64) <= 0.01 * total_reps as f64,
        "{total_construction} construction failures over {total_reps} replications"
    );
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 300.0, "criterion 4 took {dt:.2}s, budget 300s");
    println!(
        "PASS criterion 4: heuristic bound quality over 6400 replications \
         (heuristic failure rate {:.2}%, {total_construction} construction failures; {dt:.2}s)",
        100.0 * failure_rate
    );
}

/// Criterion 5: the PLS edf equals m plus the spectral restricted edf.
#[test]
fn criterion_5_edf_identity() {
    let _guard = lock();
    let t0 = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xEDF);
    for i in 0..20u64 {
        // Equidistant-knot scenarios keep lambda_1 moderate so both routes
        // agree at the stated absolute tolerance.
        let sc_id = [3u8, 4, 7, 8][(i % 4) as usize];
        let scenario = Scenario::from_id(sc_id).unwrap();
        let d = if i % 2 == 0 { 4 } else { 3 };
        let m = 1 + (i as usize % (d - 1));
        let p = rng.gen_range(20..=50);
        let setup = build_setup(scenario, p, d, m, 60_000 + i).unwrap();
        let rho = rng.gen_range(-5.0..5.0);

        let y: Vec<f64> = setup.design.xs().iter().map(|x| (x / 3.0).sin()).collect();
        let prob = PlsProblem::new(
            &setup.design,
            &y,
            setup.weights.as_deref(),
            setup.penalty.clone(),
        )
        .unwrap();
        let fit = prob.solve_at(rho).unwrap();

        let tf = build_e(&setup.l, &setup.penalty).unwrap();
        let spectrum = all_eigenvalues(&tf).unwrap();
        let expected = m as f64 + redf(rho, &spectrum);
        assert!(
            (fit.edf - expected).abs() <= 1e-8,
            "i={i}: edf {} vs m + redf {expected}",
            fit.edf
        );
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 10.0, "criterion 5 took {dt:.2}s, budget 10s");
    println!("PASS criterion 5: edf identity holds on 20 (setup, rho) pairs ({dt:.2}s)");
}

/// Criterion 6: REML equals the closed-form Gaussian integral evaluated with
/// dense determinants; adjudicates the rho-coefficient question toward
/// q/2 = (p - m)/2.
#[test]
fn criterion_6_reml_matches_gaussian_integral() {
    let _guard = lock();
    let t0 = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6EA1);
    for i in 0..10u64 {
        let d = if i % 2 == 0 { 3usize } else { 4 };
        let p = d + (i as usize % 3); // p in d..=d+2, at most 6
        let m = 1 + (i as usize % (d - 1).min(p - 1));
        let n = 12 + (i as usize % 9); // up to 20

        let kv = equidistant_knots(p, d).unwrap();
        let (lo, hi) = kv.domain();
        let xs: Vec<f64> = (0..n)
            .map(|t| lo + (hi - lo) * (t as f64 + 0.5) / n as f64)
            .collect();
        let dm = design_matrix(&kv, &xs).unwrap();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| (1.3 * x).sin() + 0.3 * rng.gen_range(-1.0..1.0))
            .collect();
        let penalty = general_diff(&kv, m).unwrap();
        let prob = PlsProblem::new(&dm, &y, None, penalty.clone()).unwrap();
        let rho = rng.gen_range(-2.0..2.0);
        let fit = prob.solve_at(rho).unwrap();

        // Dense oracle: log integral of Pr(y|b) Pr(b) db at sigma^2 equal to
        // the Pearson estimate, every determinant and solve done densely.
        let bd = dm.bands().to_dense();
        let dd = penalty.to_dense();
        let q = p - m;
        let nb = nalgebra::DMatrix::from_fn(n, p, |r, c| bd[(r, c)]);
        let ndm = nalgebra::DMatrix::from_fn(q, p, |r, c| dd[(r, c)]);
        let ny = nalgebra::DVector::from_column_slice(&y);
        let c = nb.transpose() * &nb + (&ndm.transpose() * &ndm) * rho.exp();
        let beta = c.clone().lu().solve(&(nb.transpose() * &ny)).unwrap();
        let resid = &ny - &nb * &beta;
        let pls_val =
            resid.norm_squared() + rho.exp() * (&ndm * &beta).norm_squared();
        let sigma2 = fit.sigma2_hat;
        let two_pi_s = 2.0 * std::f64::consts::PI * sigma2;
        let ddt = &ndm * ndm.transpose();
        let log_c1 = -0.5 * n as f64 * two_pi_s.ln();
        let log_c2 = -0.5 * q as f64 * two_pi_s.ln()
            + 0.5 * q as f64 * rho
            + 0.5 * ddt.determinant().ln();
        let log_c3 = 0.5 * p as f64 * two_pi_s.ln() - 0.5 * c.determinant().ln();
        let oracle = log_c1 + log_c2 + log_c3 - pls_val / (2.0 * sigma2);

        assert!(
            (fit.reml - oracle).abs() <= 1e-6,
            "i={i}: reml {} vs dense Gaussian integral {oracle}",
            fit.reml
        );
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 5.0, "criterion 6 took {dt:.2}s, budget 5s");
    println!("PASS criterion 6: REML matches the dense Gaussian integral on 10 instances ({dt:.2}s)");
}

/// Criterion 7: complexity scaling. The wide + heuristic path stays at most
/// quadratic-ish, the exact path is at least cubic-ish, and the interval is
/// cheaper than a 20-point PLS sweep at every p.
#[test]
fn criterion_7_complexity_scaling() {
    let _guard = lock();
    let t0 = std::time::Instant::now();
    let ps = [250usize, 500, 1000, 2000];
    let table = bench_intervals(&ps, 5, 20);
    let wide: Vec<f64> = table.rows.iter().map(|r| r.wide_heuristic_s).collect();
    let exact: Vec<f64> = table.rows.iter().map(|r| r.exact_s).collect();
    let slope_wide = loglog_slope(&ps, &wide);
    let slope_exact = loglog_slope(&ps, &exact);
    assert!(
        slope_wide <= 2.5,
        "wide+heuristic slope {slope_wide:.2} exceeds 2.5"
    );
    assert!(
        slope_exact >= 2.5,
        "exact slope {slope_exact:.2} below 2.5"
    );
    for r in &table.rows {
        assert!(
            r.wide_heuristic_s < r.pls_grid_s,
            "p={}: interval {}s not faster than grid {}s",
            r.p,
            r.wide_heuristic_s,
            r.pls_grid_s
        );
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 300.0, "criterion 7 took {dt:.2}s, budget 300s");
    println!(
        "PASS criterion 7: slopes wide {slope_wide:.2} <= 2.5 <= exact {slope_exact:.2}, \
         interval faster than the grid at every p ({dt:.2}s)\n{}",
        table.to_text()
    );
}

/// Criterion 8: a synthetic dataset whose GCV curve over the automatic
/// interval has two local minima, with the global one selected.
#[test]
fn criterion_8_multiple_minima_global_selection() {
    let _guard = lock();
    let t0 = std::time::Instant::now();

    // Two smooth bumps plus a fast small oscillation and mild noise: the
    // wiggle carves a second GCV basin at small rho.
    let n = 420usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0xB1D0);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| {
            let nf = n as f64;
            60.0 * (-((x - 0.62 * nf) / (0.16 * nf)).powi(2)).exp()
                + 25.0 * (-((x - 0.25 * nf) / (0.10 * nf)).powi(2)).exp()
                + 6.0 * (2.0 * std::f64::consts::PI * x / 10.0).sin()
                + noise.sample(&mut rng)
        })
        .collect();

    let kv = quantile_knots(&xs, n / 4, 4).unwrap();
    let dmx = design_matrix(&kv, &xs).unwrap();
    let penalty = general_diff(&kv, 2).unwrap();
    let prob = PlsProblem::new(&dmx, &ys, None, penalty).unwrap();
    let si = interval::auto_interval(&prob, 0.01, IntervalMode::HeuristicPreferred).unwrap();

    let n_grid = 100usize;
    let grid = make_grid(&si, n_grid);
    let curve = evaluate(&prob, &grid).unwrap();
    assert!(curve.failures.is_empty(), "grid points failed inside the interval");

    let count_minima = |v: &[f64]| -> usize {
        (1..v.len() - 1)
            .filter(|&i| v[i] < v[i - 1] && v[i] <= v[i + 1])
            .count()
    };
    let minima = count_minima(&curve.gcv);
    assert!(minima >= 2, "GCV curve has {minima} local minima, expected >= 2");

    let sel = select_optimum(&curve, Criterion::Gcv).unwrap();

    // 10x finer grid oracle: the selected coarse optimum must sit in the
    // global basin, within one coarse spacing of the fine argmin.
    let fine = make_grid(&si, 10 * n_grid);
    let fine_curve = evaluate(&prob, &fine).unwrap();
    assert!(count_minima(&fine_curve.gcv) >= 2);
    let fine_sel = select_optimum(&fine_curve, Criterion::Gcv).unwrap();
    let coarse_step = grid[1] - grid[0];
    assert!(
        (sel.rho - fine_sel.rho).abs() <= coarse_step + 1e-12,
        "coarse argmin {} is not in the fine-grid global basin {}",
        sel.rho,
        fine_sel.rho
    );
    // The coarser grid can never beat the finer superset-free minimum by
    // more than discretization allows.
    assert!(fine_sel.value <= sel.value * (1.0 + 1e-12) + 1e-12);

    let dt = t0.elapsed().as_secs_f64();
    println!(
        "PASS criterion 8: {minima} GCV minima over [{:.2}, {:.2}], global at rho {:.3} \
         matches the fine-grid oracle ({dt:.2}s)",
        si.rho_lo, si.rho_hi, sel.rho
    );
}
