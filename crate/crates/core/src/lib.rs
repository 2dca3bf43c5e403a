//! Penalized B-spline smoothing with automatic, criterion-independent search
//! intervals for the log smoothing parameter.
//!
//! The crate solves the penalized least squares problem
//! `||y - B b||^2 + exp(rho) ||D b||^2` for B-spline design matrices `B` and
//! difference or derivative penalty factors `D`, and computes a numerically
//! safe interval of `rho` values on which criteria such as GCV and REML can
//! be explored by grid search. Three interval flavors are provided: an exact
//! one from the full Demmler-Reinsch spectrum, a cheap wide one from the
//! extremal and mean eigenvalues, and a heuristic sharpening of the wide
//! upper bound built from an approximated spectrum.

pub mod basis;
pub mod eigen;
pub mod experiments;
pub mod gridsearch;
pub mod interval;
pub mod linalg;
pub mod penalty;
pub mod pls;

pub use basis::{DesignMatrix, KnotVector};
pub use eigen::{EigenSummary, TrapezoidFactor};
pub use experiments::{BenchTable, CoverageReport, Scenario};
pub use gridsearch::{Criterion, CriterionCurve, Selection};
pub use interval::{ApproxSpectrum, IntervalKind, IntervalMode, IntervalReport, SearchInterval};
pub use linalg::{BandMatrix, LowerBandMatrix, RowBanded};
pub use penalty::{PenaltyFactor, PenaltyKind};
pub use pls::{PlsFit, PlsProblem};
