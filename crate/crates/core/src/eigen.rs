//! Demmler-Reinsch eigenvalues of E'E with E = L^-1 D': the extremal values
//! by power and inverse iteration, the mean from the Frobenius norm, and the
//! full spectrum through the dense symmetric solver.
//!
//! E is trapezoidal: its top q x q block E1 is lower triangular and the
//! bottom m x q block E2 is dense. Inverse iteration exploits that shape via
//! the Woodbury identity, so each step costs O(q^2) triangular solves instead
//! of a dense inversion.

use crate::linalg::{
    dense_sym_eigenvalues, frobenius_sq, LinalgError, LowerBandMatrix, UNIT_ROUNDOFF,
};
use crate::penalty::PenaltyFactor;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("triangular factor is singular: {0}")]
    SingularFactor(LinalgError),

    #[error("eigenvalue iteration did not converge within {iterations} steps")]
    ConvergenceFailure { iterations: usize },
}

/// Dense p x q matrix E = L^-1 D' with its trapezoidal split.
#[derive(Debug, Clone)]
pub struct TrapezoidFactor {
    e: Array2<f64>,
}

impl TrapezoidFactor {
    pub fn p(&self) -> usize {
        self.e.nrows()
    }

    pub fn q(&self) -> usize {
        self.e.ncols()
    }

    pub fn m(&self) -> usize {
        self.p() - self.q()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.e
    }

    /// The lower-triangular q x q top block.
    pub fn e1(&self) -> ndarray::ArrayView2<'_, f64> {
        self.e.slice(ndarray::s![..self.q(), ..])
    }

    /// The m x q bottom block.
    pub fn e2(&self) -> ndarray::ArrayView2<'_, f64> {
        self.e.slice(ndarray::s![self.q().., ..])
    }
}

/// Extremal and mean eigenvalues with the numerical-singularity flag.
#[derive(Debug, Clone, Serialize)]
pub struct EigenSummary {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub lambda_mean: f64,
    pub q: usize,
    pub singular: bool,
}

/// Forms E = L^-1 D' column by column with band forward solves; column j of
/// D' starts at row j, so the top block comes out lower triangular.
pub fn build_e(
    l: &LowerBandMatrix,
    penalty: &PenaltyFactor,
) -> Result<TrapezoidFactor, EigenError> {
    let p = penalty.p();
    let q = penalty.q();
    assert_eq!(l.dim(), p, "factor dimension must match the penalty");
    for (j, d) in l.diagonal().enumerate() {
        if d == 0.0 {
            return Err(EigenError::SingularFactor(LinalgError::SingularFactor {
                index: j,
            }));
        }
    }
    let mut e = Array2::zeros((p, q));
    let mut col = vec![0.0; p];
    for j in 0..q {
        col.iter_mut().for_each(|v| *v = 0.0);
        let (first, vals) = penalty.row(j);
        for (t, v) in vals.iter().enumerate() {
            col[first + t] = *v;
        }
        l.solve_in_place_from(&mut col, j);
        for i in j..p {
            e[(i, j)] = col[i];
        }
    }
    Ok(TrapezoidFactor { e })
}

fn seeded_unit_vector(q: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..q).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative accuracy target of the extremal-eigenvalue iterations.
const EIGEN_TOL: f64 = 1e-6;

/// Stopping rule for Rayleigh-quotient iterations: the plain per-step change
/// `|tilde - lambda| < lambda * tol` underestimates the remaining error when
/// the leading eigengap is small (the change shrinks by the gap factor while
/// the error does not). Estimate the geometric ratio from two consecutive
/// changes and extrapolate the error before comparing with the target.
fn rayleigh_converged(tilde: f64, change: f64, prev_change: f64) -> bool {
    if change == 0.0 {
        return true;
    }
    // The per-step test keeps the transient from stopping the iteration...
    if change >= tilde.abs() * EIGEN_TOL {
        return false;
    }
    // ...and the extrapolated error handles a stalled gap once it is small.
    let est_err = if prev_change.is_finite() && prev_change > 0.0 {
        let ratio = (change / prev_change).clamp(0.0, 0.999_999);
        change * ratio / (1.0 - ratio)
    } else {
        change
    };
    est_err < tilde.abs() * EIGEN_TOL * 0.25
}

/// Maximum eigenvalue of E'E by power iteration on
/// v -> D (L^-T (L^-1 (D' v))), exploiting the band sparsity of L and D.
/// Converges when the extrapolated Rayleigh error drops below 1e-6 relative.
pub fn max_eigen(
    l: &LowerBandMatrix,
    penalty: &PenaltyFactor,
    seed: u64,
) -> Result<f64, EigenError> {
    max_eigen_counted(l, penalty, seed).map(|(lam, _)| lam)
}

/// As [`max_eigen`], also reporting the number of iterations used.
pub fn max_eigen_counted(
    l: &LowerBandMatrix,
    penalty: &PenaltyFactor,
    seed: u64,
) -> Result<(f64, usize), EigenError> {
    let q = penalty.q();
    let cap = (50 * q).max(100);
    let mut attempt_seed = seed;
    for _attempt in 0..2 {
        let mut u = seeded_unit_vector(q, attempt_seed);
        let mut lambda = 0.0_f64;
        let mut prev_change = f64::INFINITY;
        let mut stagnated = false;
        for iter in 1..=cap {
            let nu = norm(&u);
            if nu == 0.0 {
                stagnated = true;
                break; // start vector killed by the map; restart
            }
            let v: Vec<f64> = u.iter().map(|x| x / nu).collect();
            let mut b = penalty.apply_transpose(&v);
            l.solve_in_place_from(&mut b, 0);
            l.solve_transpose_in_place(&mut b);
            u = penalty.apply(&b);
            let tilde: f64 = v.iter().zip(&u).map(|(a, b)| a * b).sum();
            let change = (tilde - lambda).abs();
            if iter > 1 && rayleigh_converged(tilde, change, prev_change) {
                return Ok((tilde, iter));
            }
            prev_change = change;
            lambda = tilde;
        }
        if !stagnated {
            return Err(EigenError::ConvergenceFailure { iterations: cap });
        }
        // Stagnation at zero: restart once with a fresh start vector.
        attempt_seed = attempt_seed.wrapping_add(1);
    }
    Err(EigenError::ConvergenceFailure { iterations: cap })
}

/// Solves E1 x = b in place (dense lower-triangular forward substitution).
fn solve_e1(e1: &ndarray::ArrayView2<'_, f64>, b: &mut [f64]) {
    let q = b.len();
    for i in 0..q {
        let mut s = b[i];
        for t in 0..i {
            s -= e1[(i, t)] * b[t];
        }
        b[i] = s / e1[(i, i)];
    }
}

/// Solves E1' x = b in place (backward substitution).
fn solve_e1_transpose(e1: &ndarray::ArrayView2<'_, f64>, b: &mut [f64]) {
    let q = b.len();
    for i in (0..q).rev() {
        let mut s = b[i];
        for t in (i + 1)..q {
            s -= e1[(t, i)] * b[t];
        }
        b[i] = s / e1[(i, i)];
    }
}

/// Minimum eigenvalue of E'E by inverse iteration, applying
/// `A^-1 = (E1'E1)^-1 - F (G G')^-1 F'` from the Woodbury identity.
///
/// Returns the eigenvalue and a singularity flag: a negative Rayleigh
/// estimate mid-iteration, or a final value below `lambda1 * eps`, means the
/// matrix is numerically singular and the value is clamped to
/// `lambda1 * eps`.
pub fn min_eigen(
    tf: &TrapezoidFactor,
    lambda1: f64,
    seed: u64,
) -> Result<(f64, bool), EigenError> {
    min_eigen_counted(tf, lambda1, seed).map(|(lam, singular, _)| (lam, singular))
}

/// As [`min_eigen`], also reporting the number of iterations used.
pub fn min_eigen_counted(
    tf: &TrapezoidFactor,
    lambda1: f64,
    seed: u64,
) -> Result<(f64, bool, usize), EigenError> {
    let q = tf.q();
    let m = tf.m();
    let e1 = tf.e1();
    let e2 = tf.e2();
    let floor = lambda1 * UNIT_ROUNDOFF;

    for (j, d) in (0..q).map(|j| (j, e1[(j, j)])) {
        if d == 0.0 {
            return Err(EigenError::SingularFactor(LinalgError::SingularFactor {
                index: j,
            }));
        }
    }

    // R solves E1' R = E2'; F solves E1 F = R; both q x m.
    let mut r = Array2::zeros((q, m));
    let mut f = Array2::zeros((q, m));
    let mut col = vec![0.0; q];
    for c in 0..m {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = e2[(c, i)];
        }
        solve_e1_transpose(&e1, &mut col);
        for i in 0..q {
            r[(i, c)] = col[i];
        }
        solve_e1(&e1, &mut col);
        for i in 0..q {
            f[(i, c)] = col[i];
        }
    }
    // G G' = I + R'R (m x m, dense Cholesky).
    let mut h = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..=a {
            let mut s = if a == b { 1.0 } else { 0.0 };
            for i in 0..q {
                s += r[(i, a)] * r[(i, b)];
            }
            h[a][b] = s;
        }
    }
    let mut g = vec![vec![0.0; m]; m];
    for a in 0..m {
        let mut s = h[a][a];
        for t in 0..a {
            s -= g[a][t] * g[a][t];
        }
        if s <= 0.0 {
            return Err(EigenError::SingularFactor(
                LinalgError::NotPositiveDefinite { pivot: a },
            ));
        }
        g[a][a] = s.sqrt();
        for b in (a + 1)..m {
            let mut s = h[b][a];
            for t in 0..a {
                s -= g[b][t] * g[a][t];
            }
            g[b][a] = s / g[a][a];
        }
    }

    let cap = (50 * q).max(100);
    let mut u = seeded_unit_vector(q, seed);
    let mut lambda = 0.0_f64;
    let mut prev_change = f64::INFINITY;
    let mut c1 = vec![0.0; m];
    let mut converged = 0usize;
    for iter in 1..=cap {
        let nu = norm(&u);
        if nu == 0.0 {
            return Err(EigenError::ConvergenceFailure { iterations: cap });
        }
        let v: Vec<f64> = u.iter().map(|x| x / nu).collect();
        // a2 = (E1'E1)^-1 v
        let mut a = v.clone();
        solve_e1_transpose(&e1, &mut a);
        solve_e1(&e1, &mut a);
        // c2 = F (G G')^-1 F' v
        for (t, slot) in c1.iter_mut().enumerate() {
            *slot = (0..q).map(|i| f[(i, t)] * v[i]).sum();
        }
        for i in 0..m {
            let mut s = c1[i];
            for t in 0..i {
                s -= g[i][t] * c1[t];
            }
            c1[i] = s / g[i][i];
        }
        for i in (0..m).rev() {
            let mut s = c1[i];
            for t in (i + 1)..m {
                s -= g[t][i] * c1[t];
            }
            c1[i] = s / g[i][i];
        }
        u = (0..q)
            .map(|i| a[i] - (0..m).map(|t| f[(i, t)] * c1[t]).sum::<f64>())
            .collect();
        let tilde: f64 = v.iter().zip(&u).map(|(x, y)| x * y).sum();
        if tilde < 0.0 {
            // Negative Rayleigh estimate of 1/lambda_q: numerically singular.
            return Ok((floor, true, iter));
        }
        let change = (tilde - lambda).abs();
        if iter > 1 && rayleigh_converged(tilde, change, prev_change) {
            lambda = tilde;
            converged = iter;
            break;
        }
        prev_change = change;
        lambda = tilde;
    }
    if converged == 0 || lambda == 0.0 {
        return Err(EigenError::ConvergenceFailure { iterations: cap });
    }
    let lambda_q = 1.0 / lambda;
    if lambda_q < floor {
        Ok((floor, true, converged))
    } else {
        Ok((lambda_q, false, converged))
    }
}

/// Mean eigenvalue: trace of E'E over q, read off the Frobenius norm of E.
pub fn mean_eigen(tf: &TrapezoidFactor) -> f64 {
    frobenius_sq(tf.matrix()) / tf.q() as f64
}

/// Full spectrum of the q x q matrix E'E, descending.
pub fn all_eigenvalues(tf: &TrapezoidFactor) -> Result<Vec<f64>, EigenError> {
    let ata = tf.matrix().t().dot(tf.matrix());
    dense_sym_eigenvalues(&ata).map_err(|e| match e {
        LinalgError::ConvergenceFailure { iterations } => {
            EigenError::ConvergenceFailure { iterations }
        }
        other => EigenError::SingularFactor(other),
    })
}

/// Extremal and mean eigenvalues in one call.
pub fn summarize(
    l: &LowerBandMatrix,
    penalty: &PenaltyFactor,
    seed: u64,
) -> Result<(EigenSummary, TrapezoidFactor), EigenError> {
    let tf = build_e(l, penalty)?;
    let lambda_max = max_eigen(l, penalty, seed)?;
    let (lambda_min, singular) = min_eigen(&tf, lambda_max, seed.wrapping_add(0x9E37))?;
    let lambda_mean = mean_eigen(&tf);
    Ok((
        EigenSummary {
            lambda_max,
            lambda_min,
            lambda_mean,
            q: tf.q(),
            singular,
        },
        tf,
    ))
}
