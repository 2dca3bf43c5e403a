//! Penalty factors D with S = D'D: standard differences, general (knot-aware)
//! differences, and the exact derivative penalty.
//!
//! All factors are (p - m) x p row-banded matrices whose row i starts at
//! column i, so D' is lower trapezoidal; the eigenvalue routines rely on that
//! orientation. Rows carry a positive leading coefficient, matching the usual
//! printed convention for difference matrices.

use crate::basis::{eval_row, KnotVector};
use crate::linalg::BandMatrix;
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PenaltyError {
    #[error("invalid penalty order m = {m}: need 1 <= m <= {max} here")]
    InvalidOrder { m: usize, max: usize },

    #[error("degenerate knots: zero span between knots {lo} and {hi} at difference level {level}")]
    DegenerateKnots { lo: usize, hi: usize, level: usize },

    #[error("derivative penalty factorization failed: numerical rank below {expected} (pivot {pivot})")]
    FactorizationFailure { expected: usize, pivot: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyKind {
    StandardDiff,
    GeneralDiff,
    Derivative,
}

/// The (p - m) x p penalty factor D with S = D'D.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyFactor {
    mat: BandMatrix,
    order: usize,
    kind: PenaltyKind,
}

impl PenaltyFactor {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    /// Number of rows q = p - m.
    pub fn q(&self) -> usize {
        self.mat.rows()
    }

    /// Number of coefficients p.
    pub fn p(&self) -> usize {
        self.mat.cols()
    }

    /// Width of the nonzero block in each row.
    pub fn width(&self) -> usize {
        self.mat.upper_bandwidth() + 1
    }

    pub fn matrix(&self) -> &BandMatrix {
        &self.mat
    }

    /// D beta.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        self.mat.matvec(beta)
    }

    /// D' v.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        self.mat.matvec_transpose(v)
    }

    /// Row i as (first column, values).
    pub fn row(&self, i: usize) -> (usize, Vec<f64>) {
        let range = self.mat.row_range(i);
        let first = range.start;
        (first, range.map(|j| self.mat.get(i, j)).collect())
    }

    /// S = D'D as a symmetric band matrix (bandwidth `width - 1`).
    pub fn gram_band(&self) -> BandMatrix {
        let p = self.p();
        let bw = self.width() - 1;
        let mut s = BandMatrix::zeros(p, p, bw, bw);
        for i in 0..self.q() {
            let (f, vals) = self.row(i);
            for (a, va) in vals.iter().enumerate() {
                for (b, vb) in vals.iter().enumerate() {
                    s.add_to(f + a, f + b, va * vb);
                }
            }
        }
        s
    }

    /// D D' as a symmetric band matrix (q x q, bandwidth `width - 1`).
    pub fn ddt_band(&self) -> BandMatrix {
        let q = self.q();
        let bw = (self.width() - 1).min(q.saturating_sub(1));
        let mut s = BandMatrix::zeros(q, q, bw, bw);
        for i in 0..q {
            let (fi, vi) = self.row(i);
            let jhi = (i + self.width()).min(q);
            for j in i..jhi {
                let (fj, vj) = self.row(j);
                let lo = fi.max(fj);
                let hi = (fi + vi.len()).min(fj + vj.len());
                if hi <= lo {
                    continue;
                }
                let mut dot = 0.0;
                for c in lo..hi {
                    dot += vi[c - fi] * vj[c - fj];
                }
                s.set(i, j, dot);
                if i != j {
                    s.set(j, i, dot);
                }
            }
        }
        s
    }

    pub fn to_dense(&self) -> Array2<f64> {
        self.mat.to_dense()
    }

    #[cfg(test)]
    pub(crate) fn from_parts_for_tests(mat: BandMatrix, order: usize) -> Self {
        PenaltyFactor {
            mat,
            order,
            kind: PenaltyKind::GeneralDiff,
        }
    }
}

/// The m-th order standard difference matrix: row i carries the binomial
/// pattern, e.g. (1, -2, 1) for m = 2.
pub fn standard_diff(p: usize, m: usize) -> Result<PenaltyFactor, PenaltyError> {
    if m < 1 || m >= p {
        return Err(PenaltyError::InvalidOrder {
            m,
            max: p.saturating_sub(1),
        });
    }
    // Signed binomial row with positive leading coefficient.
    let mut coeffs = vec![1.0_f64];
    for _ in 0..m {
        let mut next = vec![0.0; coeffs.len() + 1];
        for (t, c) in coeffs.iter().enumerate() {
            next[t] += c;
            next[t + 1] -= c;
        }
        coeffs = next;
    }
    if coeffs[0] < 0.0 {
        for c in coeffs.iter_mut() {
            *c = -*c;
        }
    }
    let q = p - m;
    let mut mat = BandMatrix::zeros(q, p, 0, m);
    for i in 0..q {
        for (t, c) in coeffs.iter().enumerate() {
            mat.set(i, i + t, *c);
        }
    }
    Ok(PenaltyFactor {
        mat,
        order: m,
        kind: PenaltyKind::StandardDiff,
    })
}

/// Raw m-th derivative coefficient map for order-d B-splines on the given
/// knots: rows are aligned so row r starts at column r. The sign is left as
/// the recursion produces it (leading coefficient negative for odd m).
fn derivative_coefficient_rows(
    kv: &KnotVector,
    m: usize,
) -> Result<Vec<Vec<f64>>, PenaltyError> {
    let d = kv.order();
    let p = kv.p();
    let knots = kv.knots();
    // rows[r] holds the row starting at column r, width grows by one per level.
    let mut rows: Vec<Vec<f64>> = (0..p).map(|_| vec![1.0]).collect();
    for level in 1..=m {
        let nr = p - level;
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(nr);
        for r in 0..nr {
            // New row r couples old rows r and r + 1; spline index j = r + level.
            let j = r + level;
            let span = knots[j + d - level] - knots[j];
            if span == 0.0 {
                return Err(PenaltyError::DegenerateKnots {
                    lo: j,
                    hi: j + d - level,
                    level,
                });
            }
            let f = (d - level) as f64 / span;
            let old_lo = &rows[r];
            let old_hi = &rows[r + 1];
            let mut row = vec![0.0; level + 1];
            // old row r starts at column r, old row r+1 at column r+1.
            for (t, c) in old_lo.iter().enumerate() {
                row[t] -= f * c;
            }
            for (t, c) in old_hi.iter().enumerate() {
                row[t + 1] += f * c;
            }
            next.push(row);
        }
        rows = next;
    }
    Ok(rows)
}

/// The general difference matrix for B-splines on arbitrary knots: the
/// recursion mapping spline coefficients to the coefficients of the m-th
/// derivative in the order-(d - m) basis. On equidistant unit-spaced knots it
/// reduces exactly to `standard_diff`.
pub fn general_diff(kv: &KnotVector, m: usize) -> Result<PenaltyFactor, PenaltyError> {
    let d = kv.order();
    if m < 1 || m > d - 1 {
        return Err(PenaltyError::InvalidOrder { m, max: d - 1 });
    }
    let mut rows = derivative_coefficient_rows(kv, m)?;
    // Positive leading coefficient (the raw recursion leads with (-1)^m).
    if m % 2 == 1 {
        for row in rows.iter_mut() {
            for c in row.iter_mut() {
                *c = -*c;
            }
        }
    }
    let p = kv.p();
    let q = p - m;
    let mut mat = BandMatrix::zeros(q, p, 0, m);
    for (r, row) in rows.iter().enumerate() {
        for (t, c) in row.iter().enumerate() {
            mat.set(r, r + t, *c);
        }
    }
    Ok(PenaltyFactor {
        mat,
        order: m,
        kind: PenaltyKind::GeneralDiff,
    })
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-style initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre polynomial and derivative at x by recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gram matrix of the order-(d - m) B-splines spanning the m-th derivatives,
/// integrated over the spline domain. Exact per-interval Gauss-Legendre
/// quadrature; the integrand is piecewise polynomial of degree
/// 2(d - m - 1).
fn reduced_basis_gram(kv: &KnotVector, m: usize) -> Result<BandMatrix, PenaltyError> {
    let d = kv.order();
    let p = kv.p();
    let q = p - m;
    let dr = d - m; // order of the derivative basis
    let knots = kv.knots();
    let bw = (dr - 1).min(q.saturating_sub(1));
    let mut g = BandMatrix::zeros(q, q, bw, bw);

    if dr == 1 {
        // Piecewise-constant basis: the Gram is diagonal with span lengths.
        for a in 0..q {
            let j = a + m;
            g.set(a, a, knots[j + 1] - knots[j]);
        }
        return Ok(g);
    }

    // The derivative-basis functions use the same knots shifted by m; their
    // domain coincides with the original spline domain.
    let sub = KnotVector::new(knots[m..p + d - m].to_vec(), dr)
        .expect("derivative basis inherits a valid knot vector");
    let n_nodes = dr; // exact for degree 2(dr - 1)
    let (nodes, weights) = gauss_legendre(n_nodes);
    for k in (d - 1)..p {
        let (a, b) = (knots[k], knots[k + 1]);
        if b <= a {
            continue;
        }
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (t, w) in nodes.iter().zip(&weights) {
            let x = mid + half * t;
            let (first, vals) = eval_row(&sub, x).expect("node inside the domain");
            let scale = w * half;
            for (s, vs) in vals.iter().enumerate() {
                for (u, vu) in vals.iter().enumerate() {
                    g.add_to(first + s, first + u, scale * vs * vu);
                }
            }
        }
    }
    Ok(g)
}

/// The exact derivative-penalty Gram matrix S with
/// `S[j][k] = integral of B_j^(m) B_k^(m)` over the spline domain,
/// as a symmetric band matrix of bandwidth d - 1.
pub fn derivative_gram(kv: &KnotVector, m: usize) -> Result<BandMatrix, PenaltyError> {
    let d = kv.order();
    if m < 1 || m > d - 1 {
        return Err(PenaltyError::InvalidOrder { m, max: d - 1 });
    }
    let delta = derivative_coefficient_rows(kv, m)?;
    let g = reduced_basis_gram(kv, m)?;
    let p = kv.p();
    let q = p - m;
    let bw = (d - 1).min(p - 1);
    let mut s = BandMatrix::zeros(p, p, bw, bw);
    // S = Delta' G Delta accumulated over the band of G.
    for a in 0..q {
        for b in g.row_range(a) {
            let gv = g.get(a, b);
            if gv == 0.0 {
                continue;
            }
            for (ta, ca) in delta[a].iter().enumerate() {
                for (tb, cb) in delta[b].iter().enumerate() {
                    s.add_to(a + ta, b + tb, gv * ca * cb);
                }
            }
        }
    }
    Ok(s)
}

/// A (p - m) x p factor D with D'D equal to the derivative Gram matrix,
/// oriented so that row i starts at column i (the trapezoidal shape the
/// eigenvalue routines need). Band Cholesky elimination of the first
/// q = p - m columns; the trailing m pivots span the null space and are
/// dropped.
pub fn derivative_factor(kv: &KnotVector, m: usize) -> Result<PenaltyFactor, PenaltyError> {
    let s = derivative_gram(kv, m)?;
    let p = kv.p();
    let q = p - m;
    let d = kv.order();
    let bw = s.lower_bandwidth();
    let max_diag = (0..p).fold(0.0_f64, |acc, j| acc.max(s.get(j, j).abs()));
    let threshold = p as f64 * f64::EPSILON * max_diag;

    let mut work = s;
    let mut mat = BandMatrix::zeros(q, p, 0, d - 1);
    for j in 0..q {
        let pivot = work.get(j, j);
        if pivot <= threshold {
            return Err(PenaltyError::FactorizationFailure {
                expected: q,
                pivot: j,
            });
        }
        let dj = pivot.sqrt();
        let hi = (j + bw + 1).min(p);
        mat.set(j, j, dj);
        for c in (j + 1)..hi {
            mat.set(j, c, work.get(c, j) / dj);
        }
        for r in (j + 1)..hi {
            let dr = mat.get(j, r);
            if dr == 0.0 {
                continue;
            }
            for c in r..hi {
                let v = work.get(c, r) - dr * mat.get(j, c);
                work.set(c, r, v);
                if c != r {
                    work.set(r, c, v);
                }
            }
        }
    }
    Ok(PenaltyFactor {
        mat,
        order: m,
        kind: PenaltyKind::Derivative,
    })
}
