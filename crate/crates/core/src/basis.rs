//! Knot-vector construction and B-spline design-matrix evaluation.
//!
//! A basis of `p` B-splines of order `d` (cubic = 4) lives on `p + d`
//! non-decreasing knots; the spline domain is the interval between knot `d`
//! and knot `p + 1` (1-based), where the basis sums to one.

use crate::linalg::RowBanded;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("invalid dimensions: need p >= d >= 2, got p = {p}, d = {d}")]
    InvalidDimensions { p: usize, d: usize },

    #[error("x = {x} lies outside the spline domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },

    #[error("need at least 2 distinct x values to place quantile knots")]
    DegenerateData,

    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
}

/// Non-decreasing knot sequence of length `p + d` for `p` B-splines of
/// order `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    order: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, order: usize) -> Result<Self, BasisError> {
        if order < 2 || knots.len() < 2 * order {
            return Err(BasisError::InvalidDimensions {
                p: knots.len().saturating_sub(order),
                d: order,
            });
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(BasisError::InvalidKnots("knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[0] > w[1]) {
            return Err(BasisError::InvalidKnots(
                "knots must be non-decreasing".into(),
            ));
        }
        let p = knots.len() - order;
        if knots[order - 1] >= knots[p] {
            return Err(BasisError::InvalidKnots(
                "empty spline domain: knot d must be below knot p + 1".into(),
            ));
        }
        Ok(KnotVector { knots, order })
    }

    /// Number of basis functions.
    pub fn p(&self) -> usize {
        self.knots.len() - self.order
    }

    /// Spline order `d` (polynomial degree plus one).
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Interval on which the basis is complete (partition of unity).
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.order - 1], self.knots[self.p()])
    }

    /// Index `mu` of the knot span containing `x`: `knot[mu] <= x < knot[mu+1]`,
    /// clamped to the last nonempty span at the right end of the domain.
    fn find_span(&self, x: f64) -> Result<usize, BasisError> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(BasisError::OutOfDomain { x, lo, hi });
        }
        let p = self.p();
        if x >= hi {
            // Step down over any repeated right-boundary knots.
            let mut mu = p - 1;
            while self.knots[mu] >= hi {
                mu -= 1;
            }
            return Ok(mu);
        }
        // First knot strictly above x, then one back; ties collapse naturally.
        let upper = self.knots.partition_point(|k| *k <= x);
        Ok(upper - 1)
    }
}

/// Design matrix of basis evaluations: row i holds the at most `d` nonzero
/// B-spline values at `x[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    bands: RowBanded,
    xs: Vec<f64>,
}

impl DesignMatrix {
    /// Assembles a design matrix from already-evaluated rows.
    pub fn from_parts(bands: RowBanded, xs: Vec<f64>) -> Self {
        assert_eq!(bands.rows(), xs.len(), "one x value per design row");
        DesignMatrix { bands, xs }
    }

    pub fn n(&self) -> usize {
        self.bands.rows()
    }

    pub fn p(&self) -> usize {
        self.bands.cols()
    }

    pub fn bands(&self) -> &RowBanded {
        &self.bands
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    /// Fitted values B beta.
    pub fn matvec(&self, beta: &[f64]) -> Vec<f64> {
        self.bands.matvec(beta)
    }
}

/// Equidistant knots 1, 2, ..., p + d.
pub fn equidistant_knots(p: usize, d: usize) -> Result<KnotVector, BasisError> {
    if d < 2 || p < d {
        return Err(BasisError::InvalidDimensions { p, d });
    }
    let knots: Vec<f64> = (1..=p + d).map(|k| k as f64).collect();
    KnotVector::new(knots, d)
}

/// Unevenly spaced knots: draw knot k from N(k, ((p+d)/10)^2) and sort.
pub fn random_knots(p: usize, d: usize, seed: u64) -> Result<KnotVector, BasisError> {
    if d < 2 || p < d {
        return Err(BasisError::InvalidDimensions { p, d });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_knots_with(p, d, &mut rng)
}

pub(crate) fn random_knots_with(
    p: usize,
    d: usize,
    rng: &mut impl Rng,
) -> Result<KnotVector, BasisError> {
    let sd = (p + d) as f64 / 10.0;
    let normal = Normal::new(0.0, sd).expect("positive standard deviation");
    let mut knots: Vec<f64> = (1..=p + d)
        .map(|k| k as f64 + normal.sample(rng))
        .collect();
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    KnotVector::new(knots, d)
}

/// Equally spaced sample quantiles (linear interpolation between order
/// statistics, the common "type 7" rule).
pub fn equal_quantiles(x: &[f64], count: usize) -> Result<Vec<f64>, BasisError> {
    let mut sorted: Vec<f64> = x.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    if sorted.len() < 2 || sorted.first() == sorted.last() || count < 2 {
        return Err(BasisError::DegenerateData);
    }
    let n = sorted.len();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let prob = i as f64 / (count - 1) as f64;
        let h = prob * (n - 1) as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        let v = if lo + 1 < n {
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[n - 1]
        };
        out.push(v);
    }
    Ok(out)
}

/// Knots at `k_total` equally spaced quantiles of the data, with the first
/// and last knots replicated `d` times (clamped basis spanning exactly the
/// data range). Yields p = k_total + d - 2 basis functions.
pub fn quantile_knots(x: &[f64], k_total: usize, d: usize) -> Result<KnotVector, BasisError> {
    if d < 2 {
        return Err(BasisError::InvalidDimensions { p: 0, d });
    }
    let qs = equal_quantiles(x, k_total)?;
    let mut knots = Vec::with_capacity(qs.len() + 2 * (d - 1));
    knots.extend(std::iter::repeat(qs[0]).take(d - 1));
    knots.extend(qs.iter().copied());
    knots.extend(std::iter::repeat(*qs.last().expect("nonempty")).take(d - 1));
    KnotVector::new(knots, d)
}

/// The nonzero B-spline values at `x`: returns the index of the first
/// nonzero basis function and the `d` local values (nonnegative, summing
/// to one inside the domain). Cox-de Boor recursion over one knot span.
pub fn eval_row(kv: &KnotVector, x: f64) -> Result<(usize, Vec<f64>), BasisError> {
    let mu = kv.find_span(x)?;
    let d = kv.order();
    let knots = kv.knots();
    let mut vals = vec![0.0; d];
    vals[0] = 1.0;
    let mut left = vec![0.0; d];
    let mut right = vec![0.0; d];
    for j in 1..d {
        left[j] = x - knots[mu + 1 - j];
        right[j] = knots[mu + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = vals[r] / (right[r + 1] + left[j - r]);
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }
    Ok((mu + 1 - d, vals))
}

/// Evaluates the basis at every x, producing the row-banded design matrix.
pub fn design_matrix(kv: &KnotVector, xs: &[f64]) -> Result<DesignMatrix, BasisError> {
    let d = kv.order();
    let mut rows = Vec::with_capacity(xs.len());
    for &x in xs {
        rows.push(eval_row(kv, x)?);
    }
    Ok(DesignMatrix {
        bands: RowBanded::from_rows(kv.p(), d, rows),
        xs: xs.to_vec(),
    })
}

/// Uniform x draws between every two adjacent distinct knots inside the
/// spline domain, concatenated and sorted. Zero-length spans contribute
/// nothing.
pub fn xs_between_knots(kv: &KnotVector, count_per_interval: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    xs_between_knots_with(kv, count_per_interval, &mut rng)
}

pub(crate) fn xs_between_knots_with(
    kv: &KnotVector,
    count_per_interval: usize,
    rng: &mut impl Rng,
) -> Vec<f64> {
    assert!(count_per_interval >= 1, "need at least one draw per span");
    let d = kv.order();
    let p = kv.p();
    let knots = kv.knots();
    let mut xs = Vec::new();
    for k in (d - 1)..p {
        let (a, b) = (knots[k], knots[k + 1]);
        if b > a {
            let u = Uniform::new(a, b);
            xs.extend((0..count_per_interval).map(|_| u.sample(rng)));
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    xs
}
