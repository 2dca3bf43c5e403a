//! Penalized least squares at a given log smoothing parameter rho:
//! coefficients, fitted values, effective degrees of freedom, GCV and REML.
//!
//! The problem minimizes `||y - B b||^2 + exp(rho) ||D b||^2`. Weighted data
//! are absorbed up front (`B <- W^(1/2) B`, `y <- W^(1/2) y`), so every
//! criterion below is computed in the absorbed scale.

use crate::basis::DesignMatrix;
use crate::linalg::{btb, cholesky_band, BandMatrix, LinalgError, LowerBandMatrix};
use crate::penalty::PenaltyFactor;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlsError {
    #[error("design matrix is rank deficient: {0}")]
    RankDeficientDesign(LinalgError),

    #[error("penalized system is numerically unsolvable at rho = {rho}: {source}")]
    NumericallyUnsolvable { rho: f64, source: LinalgError },

    #[error("degenerate effective degrees of freedom: edf = {edf} with n = {n}")]
    DegenerateEdf { edf: f64, n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Immutable penalized least squares problem; the design Cholesky factor L
/// and everything else that does not depend on rho is cached at construction.
#[derive(Debug, Clone)]
pub struct PlsProblem {
    design: DesignMatrix,
    y: Vec<f64>,
    penalty: PenaltyFactor,
    btb: BandMatrix,
    l: LowerBandMatrix,
    s_band: BandMatrix,
    bty: Vec<f64>,
    log_det_ddt: f64,
    c_bandwidth: usize,
}

/// Solution summary at one rho value.
#[derive(Debug, Clone)]
pub struct PlsFit {
    pub rho: f64,
    pub beta_hat: Vec<f64>,
    pub y_hat: Vec<f64>,
    pub edf: f64,
    pub gcv: f64,
    pub reml: f64,
    pub sigma2_hat: f64,
}

impl PlsProblem {
    /// Builds the problem, absorbing optional nonnegative weights and
    /// computing the design Cholesky factor once.
    pub fn new(
        design: &DesignMatrix,
        y: &[f64],
        weights: Option<&[f64]>,
        penalty: PenaltyFactor,
    ) -> Result<Self, PlsError> {
        let n = design.n();
        let p = design.p();
        if y.len() != n {
            return Err(PlsError::DimensionMismatch(format!(
                "y has length {}, design has {} rows",
                y.len(),
                n
            )));
        }
        if penalty.p() != p {
            return Err(PlsError::DimensionMismatch(format!(
                "penalty acts on {} coefficients, design has {}",
                penalty.p(),
                p
            )));
        }
        if let Some(w) = weights {
            if w.len() != n {
                return Err(PlsError::DimensionMismatch(format!(
                    "{} weights for {} rows",
                    w.len(),
                    n
                )));
            }
            if w.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(PlsError::DimensionMismatch(
                    "weights must be finite and nonnegative".into(),
                ));
            }
        }

        // Absorb weights into the design and response.
        let (design, y) = match weights {
            None => (design.clone(), y.to_vec()),
            Some(w) => {
                let mut rows = Vec::with_capacity(n);
                for i in 0..n {
                    let (f, vals) = design.bands().row(i);
                    let s = w[i].sqrt();
                    rows.push((f, vals.iter().map(|v| v * s).collect::<Vec<f64>>()));
                }
                let bands =
                    crate::linalg::RowBanded::from_rows(p, design.bands().width(), rows);
                let dm = DesignMatrix::from_parts(bands, design.xs().to_vec());
                let wy = y
                    .iter()
                    .zip(w)
                    .map(|(v, wi)| v * wi.sqrt())
                    .collect::<Vec<f64>>();
                (dm, wy)
            }
        };

        let btb_mat = btb(design.bands(), None);
        let l = cholesky_band(&btb_mat).map_err(PlsError::RankDeficientDesign)?;
        let s_band = penalty.gram_band();
        let bty = design.bands().matvec_transpose(&y);
        let ddt = penalty.ddt_band();
        let ddt_chol = cholesky_band(&ddt).map_err(PlsError::RankDeficientDesign)?;
        let log_det_ddt = 2.0 * ddt_chol.diagonal().map(f64::ln).sum::<f64>();
        let c_bandwidth = btb_mat
            .lower_bandwidth()
            .max(s_band.lower_bandwidth());

        Ok(PlsProblem {
            design,
            y,
            penalty,
            btb: btb_mat,
            l,
            s_band,
            bty,
            log_det_ddt,
            c_bandwidth,
        })
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.design.p()
    }

    /// Penalty order m.
    pub fn m(&self) -> usize {
        self.penalty.order()
    }

    /// q = p - m.
    pub fn q(&self) -> usize {
        self.penalty.q()
    }

    pub fn penalty(&self) -> &PenaltyFactor {
        &self.penalty
    }

    /// Cholesky factor L of B'B (weights absorbed).
    pub fn design_cholesky(&self) -> &LowerBandMatrix {
        &self.l
    }

    /// The absorbed design matrix.
    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    /// The absorbed response.
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn log_det_ddt(&self) -> f64 {
        self.log_det_ddt
    }

    /// C = B'B + exp(rho) D'D as a symmetric band matrix.
    fn penalized_matrix(&self, rho: f64) -> BandMatrix {
        let p = self.p();
        let bw = self.c_bandwidth;
        let w = rho.exp();
        let mut c = BandMatrix::zeros(p, p, bw, bw);
        for i in 0..p {
            for j in i.saturating_sub(bw)..(i + bw + 1).min(p) {
                c.set(i, j, self.btb.get(i, j) + w * self.s_band.get(i, j));
            }
        }
        c
    }

    /// ||K^-1 L||_F^2, the effective degrees of freedom.
    fn edf_from_factor(&self, k: &LowerBandMatrix) -> f64 {
        let p = self.p();
        let bw_k = k.bandwidth();
        let bw_l = self.l.bandwidth();
        let mut total = 0.0;
        let mut x = vec![0.0; p];
        for j in 0..p {
            let hi_l = (j + bw_l + 1).min(p);
            for (i, xi) in x.iter_mut().enumerate().take(p).skip(j) {
                *xi = if i < hi_l { self.l.get(i, j) } else { 0.0 };
            }
            // Forward substitution restricted to rows >= j.
            for i in j..p {
                let lo = i.saturating_sub(bw_k).max(j);
                let mut s = x[i];
                for t in lo..i {
                    s -= k.get(i, t) * x[t];
                }
                let v = s / k.get(i, i);
                x[i] = v;
                total += v * v;
            }
        }
        total
    }

    /// Solves the penalized problem at rho and evaluates every criterion.
    pub fn solve_at(&self, rho: f64) -> Result<PlsFit, PlsError> {
        let n = self.n();
        let c = self.penalized_matrix(rho);
        let k = cholesky_band(&c)
            .map_err(|e| PlsError::NumericallyUnsolvable { rho, source: e })?;

        let mut beta = self.bty.clone();
        k.solve_in_place_from(&mut beta, 0);
        k.solve_transpose_in_place(&mut beta);

        let y_hat = self.design.matvec(&beta);
        let rss: f64 = self
            .y
            .iter()
            .zip(&y_hat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let edf = self.edf_from_factor(&k);
        if edf >= n as f64 {
            return Err(PlsError::DegenerateEdf { edf, n });
        }
        let sigma2_hat = rss / (n as f64 - edf);
        let gcv = gcv_from_parts(n, rss, edf)?;

        let log_det_c = 2.0 * k.diagonal().map(f64::ln).sum::<f64>();
        let pen = self.penalty.apply(&beta).iter().map(|v| v * v).sum::<f64>();
        let reml = self.reml_from_parts(rho, edf, sigma2_hat, pen, log_det_c);

        Ok(PlsFit {
            rho,
            beta_hat: beta,
            y_hat,
            edf,
            gcv,
            reml,
            sigma2_hat,
        })
    }

    fn reml_from_parts(
        &self,
        rho: f64,
        edf: f64,
        sigma2: f64,
        penalty_norm_sq: f64,
        log_det_c: f64,
    ) -> f64 {
        let n = self.n() as f64;
        let m = self.m() as f64;
        let q = self.q() as f64;
        0.5 * self.log_det_ddt + 0.5 * q * rho - 0.5 * log_det_c
            - 0.5 * (n - m) * (2.0 * std::f64::consts::PI * sigma2).ln()
            - 0.5 * (n - edf)
            - rho.exp() * penalty_norm_sq / (2.0 * sigma2)
    }

    /// The PLS objective `||y - B b||^2 + exp(rho) ||D b||^2` at arbitrary
    /// coefficients.
    pub fn objective(&self, beta: &[f64], rho: f64) -> f64 {
        let y_hat = self.design.matvec(beta);
        let rss: f64 = self
            .y
            .iter()
            .zip(&y_hat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let pen: f64 = self.penalty.apply(beta).iter().map(|v| v * v).sum();
        rss + rho.exp() * pen
    }
}

/// GCV error from its parts: n rss / (n - edf)^2.
pub fn gcv_from_parts(n: usize, rss: f64, edf: f64) -> Result<f64, PlsError> {
    if edf >= n as f64 {
        return Err(PlsError::DegenerateEdf { edf, n });
    }
    let denom = n as f64 - edf;
    Ok(n as f64 * rss / (denom * denom))
}

/// GCV recomputed from a finished fit.
pub fn gcv_of(fit: &PlsFit, n: usize) -> Result<f64, PlsError> {
    let rss = fit.sigma2_hat * (n as f64 - fit.edf);
    gcv_from_parts(n, rss, fit.edf)
}

/// REML recomputed from a finished fit (re-factors C at the fit's rho).
pub fn reml_of(prob: &PlsProblem, fit: &PlsFit) -> Result<f64, PlsError> {
    if fit.edf >= prob.n() as f64 {
        return Err(PlsError::DegenerateEdf {
            edf: fit.edf,
            n: prob.n(),
        });
    }
    let c = prob.penalized_matrix(fit.rho);
    let k = cholesky_band(&c).map_err(|e| PlsError::NumericallyUnsolvable {
        rho: fit.rho,
        source: e,
    })?;
    let log_det_c = 2.0 * k.diagonal().map(f64::ln).sum::<f64>();
    let pen = prob
        .penalty
        .apply(&fit.beta_hat)
        .iter()
        .map(|v| v * v)
        .sum::<f64>();
    Ok(prob.reml_from_parts(fit.rho, fit.edf, fit.sigma2_hat, pen, log_det_c))
}

/// The PLS objective as a free function.
pub fn pls_objective(prob: &PlsProblem, beta: &[f64], rho: f64) -> f64 {
    prob.objective(beta, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{design_matrix, random_knots, xs_between_knots, DesignMatrix};
    use crate::linalg::RowBanded;
    use crate::penalty::{general_diff, standard_diff};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn toy_problem(p: usize, m: usize, seed: u64) -> (PlsProblem, usize) {
        let kv = random_knots(p, 4, seed).unwrap();
        let xs = xs_between_knots(&kv, 10, seed + 1);
        let dm = design_matrix(&kv, &xs).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 2);
        let y: Vec<f64> = xs
            .iter()
            .map(|x| (x / 3.0).sin() + 0.1 * rng.gen_range(-1.0..1.0))
            .collect();
        let pen = general_diff(&kv, m).unwrap();
        let n = xs.len();
        (PlsProblem::new(&dm, &y, None, pen).unwrap(), n)
    }

    #[test]
    fn unit_weights_match_unweighted() {
        let kv = random_knots(8, 4, 1).unwrap();
        let xs = xs_between_knots(&kv, 5, 2);
        let dm = design_matrix(&kv, &xs).unwrap();
        let y: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let pen = general_diff(&kv, 2).unwrap();
        let a = PlsProblem::new(&dm, &y, None, pen.clone()).unwrap();
        let w = vec![1.0; xs.len()];
        let b = PlsProblem::new(&dm, &y, Some(&w), pen).unwrap();
        let fa = a.solve_at(0.5).unwrap();
        let fb = b.solve_at(0.5).unwrap();
        assert_eq!(fa.edf, fb.edf);
        assert_eq!(fa.gcv, fb.gcv);
        assert_eq!(fa.beta_hat, fb.beta_hat);
    }

    #[test]
    fn identity_design_succeeds_with_p_equal_n() {
        let rows: Vec<(usize, Vec<f64>)> = (0..5).map(|i| (i, vec![1.0])).collect();
        let bands = RowBanded::from_rows(5, 1, rows);
        let dm = DesignMatrix::from_parts(bands, (0..5).map(|v| v as f64).collect());
        let y = vec![1.0, 2.0, 0.0, -1.0, 3.0];
        let pen = standard_diff(5, 2).unwrap();
        let prob = PlsProblem::new(&dm, &y, None, pen).unwrap();
        for j in 0..5 {
            assert_eq!(prob.design_cholesky().get(j, j), 1.0);
        }
    }

    #[test]
    fn unsupported_basis_function_is_rank_deficient() {
        // All x mass in the left half leaves the last spline unsupported.
        let kv = crate::basis::equidistant_knots(8, 4).unwrap();
        let xs: Vec<f64> = (0..40).map(|i| 4.0 + 2.0 * (i as f64) / 40.0).collect();
        let dm = design_matrix(&kv, &xs).unwrap();
        let y = vec![0.0; xs.len()];
        let pen = general_diff(&kv, 2).unwrap();
        match PlsProblem::new(&dm, &y, None, pen) {
            Err(PlsError::RankDeficientDesign(_)) => {}
            other => panic!("expected RankDeficientDesign, got {other:?}"),
        }
    }

    #[test]
    fn edf_limits_at_extreme_rho() {
        let (prob, _) = toy_problem(15, 2, 10);
        let lo = prob.solve_at(-30.0).unwrap();
        assert!((lo.edf - prob.p() as f64).abs() < 0.01, "edf {}", lo.edf);

        // Large rho within the safe range: edf -> m and D beta -> 0.
        let hi = prob.solve_at(18.0).unwrap();
        assert!((hi.edf - prob.m() as f64).abs() < 0.01, "edf {}", hi.edf);
        let pen_norm: f64 = prob
            .penalty()
            .apply(&hi.beta_hat)
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!(pen_norm < 1e-4, "|D beta| = {pen_norm}");
    }

    #[test]
    fn edf_matches_dense_hat_trace() {
        let (prob, _) = toy_problem(15, 2, 33);
        let fit = prob.solve_at(0.0).unwrap();
        //

        let bd = prob.design().bands().to_dense();
        let btb_dense = bd.t().dot(&bd);
        let sd = prob.penalty().gram_band().to_dense();
        let c = &btb_dense + &sd;
        let nc = nalgebra::DMatrix::from_fn(prob.p(), prob.p(), |i, j| c[(i, j)]);
        let nb = nalgebra::DMatrix::from_fn(prob.p(), prob.p(), |i, j| btb_dense[(i, j)]);
        let trace = (nc.lu().solve(&nb).unwrap()).trace();
        assert_relative_eq!(fit.edf, trace, epsilon = 1e-8);
    }

    #[test]
    fn edf_is_independent_of_y() {
        let kv = random_knots(12, 4, 3).unwrap();
        let xs = xs_between_knots(&kv, 10, 4);
        let dm = design_matrix(&kv, &xs).unwrap();
        let y1: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let y2: Vec<f64> = y1.iter().map(|v| 10.0 * v).collect();
        let pen = general_diff(&kv, 2).unwrap();
        let p1 = PlsProblem::new(&dm, &y1, None, pen.clone()).unwrap();
        let p2 = PlsProblem::new(&dm, &y2, None, pen).unwrap();
        for rho in [-5.0, 0.0, 5.0] {
            let f1 = p1.solve_at(rho).unwrap();
            let f2 = p2.solve_at(rho).unwrap();
            assert_eq!(f1.edf.to_bits(), f2.edf.to_bits());
        }
    }

    #[test]
    fn normal_equations_residual_is_small() {
        let (prob, _) = toy_problem(20, 2, 55);
        let fit = prob.solve_at(1.3).unwrap();
        let c = prob.penalized_matrix(1.3);
        let cb = c.matvec(&fit.beta_hat);
        let norm = prob.bty.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        for (lhs, rhs) in cb.iter().zip(&prob.bty) {
            assert!((lhs - rhs).abs() <= 1e-8 * norm);
        }
    }

    #[test]
    fn gcv_hand_values() {
        assert_relative_eq!(gcv_from_parts(4, 2.0, 2.0).unwrap(), 2.0);
        match gcv_from_parts(4, 2.0, 4.0) {
            Err(PlsError::DegenerateEdf { .. }) => {}
            other => panic!("expected DegenerateEdf, got {other:?}"),
        }
    }

    #[test]
    fn gcv_zero_at_interpolation_limit() {
        // Zero residual means zero GCV regardless of edf.
        assert_eq!(gcv_from_parts(10, 0.0, 5.0).unwrap(), 0.0);

        // A design that can reproduce y exactly (p < n via one duplicated
        // row) drives the criterion to zero as the penalty vanishes.
        let mut rows: Vec<(usize, Vec<f64>)> = (0..6).map(|i| (i, vec![1.0])).collect();
        rows.push((5, vec![1.0]));
        let bands = RowBanded::from_rows(6, 1, rows);
        let dm = DesignMatrix::from_parts(bands, (0..7).map(|v| v as f64).collect());
        let y = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0, 1.0];
        let pen = standard_diff(6, 2).unwrap();
        let prob = PlsProblem::new(&dm, &y, None, pen).unwrap();
        let fit = prob.solve_at(-40.0).unwrap();
        assert!(fit.gcv < 1e-18, "gcv {}", fit.gcv);
        for (a, b) in fit.y_hat.iter().zip(&y) {
            assert_relative_eq!(*a, *b, epsilon = 1e-8);
        }
    }

    #[test]
    fn gcv_of_matches_solve_at() {
        let (prob, n) = toy_problem(12, 2, 70);
        let fit = prob.solve_at(0.7).unwrap();
        assert_relative_eq!(gcv_of(&fit, n).unwrap(), fit.gcv, max_relative = 1e-12);
        assert_relative_eq!(reml_of(&prob, &fit).unwrap(), fit.reml, max_relative = 1e-12);
    }

    #[test]
    fn reml_constant_term_cancels_in_differences() {
        // The log|DD'| term is rho-independent; differences depend only on
        // the varying terms.
        let (prob, _) = toy_problem(10, 2, 90);
        let f1 = prob.solve_at(0.0).unwrap();
        let f2 = prob.solve_at(1.0).unwrap();
        let d = f2.reml - f1.reml;
        let without_const = {
            let part = |fit: &PlsFit, log_det_c: f64, pen: f64| {
                let n = prob.n() as f64;
                let m = prob.m() as f64;
                let q = prob.q() as f64;
                0.5 * q * fit.rho - 0.5 * log_det_c
                    - 0.5 * (n - m) * (2.0 * std::f64::consts::PI * fit.sigma2_hat).ln()
                    - 0.5 * (n - fit.edf)
                    - fit.rho.exp() * pen / (2.0 * fit.sigma2_hat)
            };
            let ldc = |rho: f64| {
                let k = cholesky_band(&prob.penalized_matrix(rho)).unwrap();
                2.0 * k.diagonal().map(f64::ln).sum::<f64>()
            };
            let pen = |fit: &PlsFit| {
                prob.penalty()
                    .apply(&fit.beta_hat)
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
            };
            part(&f2, ldc(1.0), pen(&f2)) - part(&f1, ldc(0.0), pen(&f1))
        };
        assert_relative_eq!(d, without_const, max_relative = 1e-10);
    }

    #[test]
    fn objective_minimum_and_quadratic_identity() {
        let (prob, _) = toy_problem(10, 2, 100);
        let rho = 0.4;
        let fit = prob.solve_at(rho).unwrap();
        let base = prob.objective(&fit.beta_hat, rho);
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let c = prob.penalized_matrix(rho);
        for _ in 0..100 {
            let delta: Vec<f64> = (0..prob.p()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let beta: Vec<f64> = fit
                .beta_hat
                .iter()
                .zip(&delta)
                .map(|(a, b)| a + b)
                .collect();
            let val = prob.objective(&beta, rho);
            assert!(val >= base - 1e-9 * base.abs().max(1.0));
            // objective(beta) - objective(beta_hat) = delta' C delta
            let cd = c.matvec(&delta);
            let quad: f64 = delta.iter().zip(&cd).map(|(a, b)| a * b).sum();
            assert_relative_eq!(val - base, quad, max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    #[test]
    fn objective_reduces_to_rss_without_penalty() {
        let (prob, _) = toy_problem(10, 2, 110);
        let beta: Vec<f64> = (0..prob.p()).map(|i| (i as f64 * 0.3).sin()).collect();
        let with_tiny = prob.objective(&beta, -700.0);
        let y_hat = prob.design().matvec(&beta);
        let rss: f64 = prob
            .y()
            .iter()
            .zip(&y_hat)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert_relative_eq!(with_tiny, rss, max_relative = 1e-12);
    }

    #[test]
    fn edf_monotone_decreasing_in_rho() {
        let (prob, _) = toy_problem(20, 2, 120);
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let rho = -20.0 + i as f64 * (40.0 / 49.0);
            let fit = prob.solve_at(rho).unwrap();
            assert!(fit.edf < last, "edf not decreasing at rho {rho}");
            last = fit.edf;
        }
    }
}
