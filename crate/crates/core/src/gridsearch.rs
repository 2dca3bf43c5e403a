//! Criterion evaluation over a rho grid and global-extremum selection.

use crate::interval::SearchInterval;
use crate::pls::{PlsFit, PlsProblem};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("every grid point failed to solve")]
    AllPointsFailed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gcv,
    Reml,
}

/// Criterion values over an ascending rho grid. Failed grid points carry NaN
/// in the value columns and are listed in `failures`.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionCurve {
    pub rhos: Vec<f64>,
    pub edf: Vec<f64>,
    pub gcv: Vec<f64>,
    pub reml: Vec<f64>,
    pub failures: Vec<usize>,
}

impl CriterionCurve {
    pub fn len(&self) -> usize {
        self.rhos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhos.is_empty()
    }

    pub fn is_success(&self, index: usize) -> bool {
        !self.failures.contains(&index)
    }

    fn values(&self, criterion: Criterion) -> &[f64] {
        match criterion {
            Criterion::Gcv => &self.gcv,
            Criterion::Reml => &self.reml,
        }
    }
}

/// The selected optimum of one criterion.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Selection {
    pub rho: f64,
    pub index: usize,
    pub value: f64,
}

/// N equally spaced rho values from `rho_lo` to `rho_hi` inclusive.
pub fn make_grid(interval: &SearchInterval, n: usize) -> Vec<f64> {
    assert!(n >= 2, "a grid needs at least two points");
    let (lo, hi) = (interval.rho_lo, interval.rho_hi);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + i as f64 * step })
        .collect()
}

/// Solves the problem at every grid point. Individual numerical failures are
/// recorded, not fatal; only a fully failed grid is an error. Grid points
/// are independent and evaluated in parallel, with output order fixed by the
/// grid order.
pub fn evaluate(prob: &PlsProblem, grid: &[f64]) -> Result<CriterionCurve, GridError> {
    assert!(!grid.is_empty(), "empty grid");
    let fits: Vec<Option<PlsFit>> = grid
        .par_iter()
        .map(|rho| prob.solve_at(*rho).ok())
        .collect();

    let n = grid.len();
    let mut edf = vec![f64::NAN; n];
    let mut gcv = vec![f64::NAN; n];
    let mut reml = vec![f64::NAN; n];
    let mut failures = Vec::new();
    for (i, fit) in fits.iter().enumerate() {
        match fit {
            Some(f) => {
                edf[i] = f.edf;
                gcv[i] = f.gcv;
                reml[i] = f.reml;
            }
            None => failures.push(i),
        }
    }
    if failures.len() == n {
        return Err(GridError::AllPointsFailed);
    }
    Ok(CriterionCurve {
        rhos: grid.to_vec(),
        edf,
        gcv,
        reml,
        failures,
    })
}

/// Global optimum over the successful grid points: the minimum for GCV, the
/// maximum for REML. Ties break toward larger rho (the smoother fit).
pub fn select_optimum(
    curve: &CriterionCurve,
    criterion: Criterion,
) -> Result<Selection, GridError> {
    let values = curve.values(criterion);
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        let better = match (criterion, best) {
            (_, None) => true,
            (Criterion::Gcv, Some((_, b))) => *v <= b,
            (Criterion::Reml, Some((_, b))) => *v >= b,
        };
        if better {
            best = Some((i, *v));
        }
    }
    match best {
        Some((index, value)) => Ok(Selection {
            rho: curve.rhos[index],
            index,
            value,
        }),
        None => Err(GridError::AllPointsFailed),
    }
}

/// Which end of the grid a boundary optimum sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryWarning {
    LowerEdge,
    UpperEdge,
}

/// Warns when the optimum lands on the first or last grid index, meaning the
/// interval may be truncating the extremum.
pub fn boundary_warning(curve: &CriterionCurve, selection: &Selection) -> Option<BoundaryWarning> {
    if selection.index == 0 {
        Some(BoundaryWarning::LowerEdge)
    } else if selection.index + 1 == curve.len() {
        Some(BoundaryWarning::UpperEdge)
    } else {
        None
    }
}
