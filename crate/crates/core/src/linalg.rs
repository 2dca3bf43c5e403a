//! Banded and dense linear-algebra kernels.
//!
//! Band matrices are stored column by column: each column keeps a fixed
//! window of `lower + upper + 1` entries covering the diagonals of the band,
//! so factorization and triangular solves share one layout and never convert.
//! Entries outside the band are not stored and read back as exact zeros.

use ndarray::Array2;
use thiserror::Error;

/// Unit roundoff of f64 (the paper-style machine precision, about 1.11e-16).
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite: nonpositive pivot at index {pivot}")]
    NotPositiveDefinite { pivot: usize },

    #[error("triangular factor is singular: zero diagonal at index {index}")]
    SingularFactor { index: usize },

    #[error("eigenvalue iteration failed to converge within {iterations} sweeps")]
    ConvergenceFailure { iterations: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// General band matrix with `lower` subdiagonals and `upper` superdiagonals.
///
/// Values are packed per column: column `j` stores rows
/// `j - upper ..= j + lower` (clipped to the matrix) in a fixed window of
/// height `lower + upper + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    rows: usize,
    cols: usize,
    lower: usize,
    upper: usize,
    values: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(rows: usize, cols: usize, lower: usize, upper: usize) -> Self {
        assert!(rows > 0 && cols > 0, "band matrix must be nonempty");
        assert!(lower < rows && upper < cols, "band wider than the matrix");
        BandMatrix {
            rows,
            cols,
            lower,
            upper,
            values: vec![0.0; cols * (lower + upper + 1)],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.lower
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.upper
    }

    #[inline]
    fn window(&self) -> usize {
        self.lower + self.upper + 1
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.rows && j < self.cols && i + self.upper >= j && j + self.lower >= i
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        j * self.window() + (i + self.upper - j)
    }

    /// Reads entry (i, j); positions outside the band are exact zeros.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.values[self.index(i, j)]
        } else {
            0.0
        }
    }

    /// Writes entry (i, j). Panics outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) is outside the band");
        let idx = self.index(i, j);
        self.values[idx] = value;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) is outside the band");
        let idx = self.index(i, j);
        self.values[idx] += value;
    }

    /// Column range with possibly nonzero entries in row `i`.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        let lo = i.saturating_sub(self.lower);
        let hi = (i + self.upper + 1).min(self.cols);
        lo..hi
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            for j in self.row_range(i) {
                a[(i, j)] = self.get(i, j);
            }
        }
        a
    }

    /// y = A x for a general band matrix.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in self.row_range(i) {
                s += self.values[self.index(i, j)] * x[j];
            }
            *yi = s;
        }
        y
    }

    /// y = A' x for a general band matrix.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec dimension mismatch");
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in self.row_range(i) {
                y[j] += self.values[self.index(i, j)] * xi;
            }
        }
        y
    }
}

/// Lower-triangular band matrix (Cholesky factors live here).
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBandMatrix {
    dim: usize,
    bandwidth: usize,
    values: Vec<f64>,
}

impl LowerBandMatrix {
    pub fn zeros(dim: usize, bandwidth: usize) -> Self {
        assert!(dim > 0, "matrix must be nonempty");
        assert!(bandwidth < dim, "band wider than the matrix");
        LowerBandMatrix {
            dim,
            bandwidth,
            values: vec![0.0; dim * (bandwidth + 1)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut l = LowerBandMatrix::zeros(dim, 0);
        for j in 0..dim {
            l.set(j, j, 1.0);
        }
        l
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.dim && j <= i && i - j <= self.bandwidth
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        j * (self.bandwidth + 1) + (i - j)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.values[self.index(i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) is outside the lower band");
        let idx = self.index(i, j);
        self.values[idx] = value;
    }

    pub fn diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim).map(|j| self.values[self.index(j, j)])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.dim, self.dim));
        for j in 0..self.dim {
            for i in j..(j + self.bandwidth + 1).min(self.dim) {
                a[(i, j)] = self.get(i, j);
            }
        }
        a
    }

    fn check_diagonal(&self) -> Result<(), LinalgError> {
        for (j, d) in self.diagonal().enumerate() {
            if d == 0.0 {
                return Err(LinalgError::SingularFactor { index: j });
            }
        }
        Ok(())
    }

    /// Solves G x = rhs in place (forward substitution).
    ///
    /// `first_nonzero` lets callers skip leading zero rows of the right-hand
    /// side; entries before it must be zero and stay zero.
    pub fn solve_in_place_from(&self, rhs: &mut [f64], first_nonzero: usize) {
        let bw = self.bandwidth;
        for i in first_nonzero..self.dim {
            let lo = i.saturating_sub(bw).max(first_nonzero);
            let mut s = rhs[i];
            for t in lo..i {
                s -= self.get(i, t) * rhs[t];
            }
            rhs[i] = s / self.get(i, i);
        }
    }

    /// Solves G' x = rhs in place (backward substitution on the transpose).
    pub fn solve_transpose_in_place(&self, rhs: &mut [f64]) {
        let bw = self.bandwidth;
        for i in (0..self.dim).rev() {
            let hi = (i + bw + 1).min(self.dim);
            let mut s = rhs[i];
            for t in (i + 1)..hi {
                s -= self.get(t, i) * rhs[t];
            }
            rhs[i] = s / self.get(i, i);
        }
    }
}

/// Banded Cholesky factorization A = G G' of a symmetric positive-definite
/// band matrix. Only the lower triangle of `a` is read; the factor inherits
/// the lower bandwidth.
///
/// A pivot at or below `dim * eps * max_diag` reports
/// [`LinalgError::NotPositiveDefinite`]; on the smoothing path this signals a
/// smoothing weight so extreme that the penalized system lost rank.
pub fn cholesky_band(a: &BandMatrix) -> Result<LowerBandMatrix, LinalgError> {
    if a.rows() != a.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let bw = a.lower_bandwidth();
    let mut g = LowerBandMatrix::zeros(n, bw);

    let max_diag = (0..n).fold(0.0_f64, |m, j| m.max(a.get(j, j).abs()));
    let threshold = n as f64 * f64::EPSILON * max_diag;

    for j in 0..n {
        let lo = j.saturating_sub(bw);
        let mut s = a.get(j, j);
        for t in lo..j {
            let v = g.get(j, t);
            s -= v * v;
        }
        if s <= threshold {
            return Err(LinalgError::NotPositiveDefinite { pivot: j });
        }
        let d = s.sqrt();
        g.set(j, j, d);
        let hi = (j + bw + 1).min(n);
        for i in (j + 1)..hi {
            let lo_i = i.saturating_sub(bw);
            let mut s = a.get(i, j);
            for t in lo_i.max(lo)..j {
                s -= g.get(i, t) * g.get(j, t);
            }
            g.set(i, j, s / d);
        }
    }
    Ok(g)
}

/// Solves G X = rhs for a lower-triangular band factor, one vector.
pub fn solve_lower_band(g: &LowerBandMatrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != g.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs length {} does not match dimension {}",
            rhs.len(),
            g.dim()
        )));
    }
    g.check_diagonal()?;
    let mut x = rhs.to_vec();
    g.solve_in_place_from(&mut x, 0);
    Ok(x)
}

/// Solves G' X = rhs (the transposed system), one vector.
pub fn solve_upper_band(g: &LowerBandMatrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != g.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs length {} does not match dimension {}",
            rhs.len(),
            g.dim()
        )));
    }
    g.check_diagonal()?;
    let mut x = rhs.to_vec();
    g.solve_transpose_in_place(&mut x);
    Ok(x)
}

/// Solves G X = rhs column by column for a dense right-hand side.
pub fn solve_lower_band_mat(
    g: &LowerBandMatrix,
    rhs: &Array2<f64>,
) -> Result<Array2<f64>, LinalgError> {
    if rhs.nrows() != g.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "rhs has {} rows, factor dimension is {}",
            rhs.nrows(),
            g.dim()
        )));
    }
    g.check_diagonal()?;
    let mut out = rhs.clone();
    let mut col = vec![0.0; g.dim()];
    for j in 0..rhs.ncols() {
        for i in 0..g.dim() {
            col[i] = out[(i, j)];
        }
        g.solve_in_place_from(&mut col, 0);
        for i in 0..g.dim() {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

/// Sum of squared entries (squared Frobenius norm).
pub fn frobenius_sq(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Row-banded rectangular matrix: every row holds at most `width` consecutive
/// nonzeros starting at a per-row column. This is the natural storage for
/// spline design matrices and difference factors applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct RowBanded {
    rows: usize,
    cols: usize,
    width: usize,
    first: Vec<usize>,
    values: Vec<f64>,
}

impl RowBanded {
    pub fn from_rows(cols: usize, width: usize, rows: Vec<(usize, Vec<f64>)>) -> Self {
        let n = rows.len();
        assert!(n > 0 && cols > 0 && width > 0, "empty row-banded matrix");
        let mut first = Vec::with_capacity(n);
        let mut values = vec![0.0; n * width];
        for (i, (f, vals)) in rows.into_iter().enumerate() {
            assert!(vals.len() <= width, "row wider than declared width");
            assert!(f + vals.len() <= cols, "row extends past the last column");
            first.push(f);
            values[i * width..i * width + vals.len()].copy_from_slice(&vals);
        }
        RowBanded {
            rows: n,
            cols,
            width,
            first,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// (first column, values) of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (usize, &[f64]) {
        let w = self.width.min(self.cols - self.first[i]);
        (self.first[i], &self.values[i * self.width..i * self.width + w])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (f, vals) = self.row(i);
        if j >= f && j < f + vals.len() {
            vals[j - f]
        } else {
            0.0
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let (f, vals) = self.row(i);
            y[i] = vals.iter().zip(&x[f..]).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// y = A' x.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "matvec dimension mismatch");
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let (f, vals) = self.row(i);
            for (t, v) in vals.iter().enumerate() {
                y[f + t] += v * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.rows, self.cols));
        for i in 0..self.rows {
            let (f, vals) = self.row(i);
            for (t, v) in vals.iter().enumerate() {
                a[(i, f + t)] = *v;
            }
        }
        a
    }
}

/// B' W B for a row-banded design matrix, returned as a symmetric band matrix
/// of bandwidth `width - 1`. `W` is the identity when `weights` is absent.
pub fn btb(design: &RowBanded, weights: Option<&[f64]>) -> BandMatrix {
    if let Some(w) = weights {
        assert_eq!(w.len(), design.rows(), "one weight per design row");
    }
    let bw = design.width() - 1;
    let p = design.cols();
    let mut a = BandMatrix::zeros(p, p, bw, bw);
    for i in 0..design.rows() {
        let wi = weights.map_or(1.0, |w| w[i]);
        if wi == 0.0 {
            continue;
        }
        let (f, vals) = design.row(i);
        for (s, vs) in vals.iter().enumerate() {
            for (t, vt) in vals.iter().enumerate() {
                a.add_to(f + s, f + t, wi * vs * vt);
            }
        }
    }
    a
}

/// All eigenvalues of a symmetric dense matrix, sorted in descending order.
///
/// Householder tridiagonalization followed by implicit-shift QL; only the
/// lower triangle of `a` is read. Used on the exact-interval path and as the
/// dense oracle in tests.
pub fn dense_sym_eigenvalues(a: &Array2<f64>) -> Result<Vec<f64>, LinalgError> {
    if a.nrows() != a.ncols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "symmetric eigenvalues need a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut d, mut e) = tridiagonalize(a);
    tridiagonal_eigenvalues(&mut d, &mut e)?;
    d.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalues are finite"));
    Ok(d)
}

/// Reduces a symmetric matrix to tridiagonal form (diagonal, subdiagonal)
/// by Householder reflections, updating the lower triangle only.
fn tridiagonalize(a: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    // w[i][j] for j <= i holds the working lower triangle.
    let mut w: Vec<Vec<f64>> = (0..n).map(|i| (0..=i).map(|j| a[(i, j)]).collect()).collect();
    let mut sub = vec![0.0; n.saturating_sub(1)];

    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1; // size of the trailing block
        // Householder vector for column k below the diagonal.
        let mut scale = 0.0;
        for i in 0..m {
            scale += w[k + 1 + i][k].abs();
        }
        if scale == 0.0 {
            sub[k] = w[k + 1][k];
            continue;
        }
        let mut norm_sq = 0.0;
        for i in 0..m {
            v[i] = w[k + 1 + i][k] / scale;
            norm_sq += v[i] * v[i];
        }
        let x0 = v[0];
        let norm = norm_sq.sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        sub[k] = scale * alpha;
        v[0] = x0 - alpha;
        // v'v = |x|^2 - 2 alpha x0 + alpha^2 and alpha^2 = |x|^2; both terms
        // have the same sign, so no cancellation.
        let vtv = 2.0 * (norm_sq - alpha * x0);
        let beta = 2.0 / vtv;

        // p = beta * A v on the trailing block (symmetric matvec, lower stored).
        for i in 0..m {
            p[i] = 0.0;
        }
        for i in 0..m {
            let row = k + 1 + i;
            let mut s = w[row][row] * v[i];
            for j in 0..i {
                s += w[row][k + 1 + j] * v[j];
                p[j] += w[row][k + 1 + j] * v[i];
            }
            p[i] += s;
        }
        for pi in p.iter_mut().take(m) {
            *pi *= beta;
        }
        // w = p - (beta/2)(p'v) v, then rank-2 update A -= v w' + w v'.
        let pv: f64 = (0..m).map(|i| p[i] * v[i]).sum();
        let half = 0.5 * beta * pv;
        for i in 0..m {
            p[i] -= half * v[i];
        }
        for i in 0..m {
            let row = k + 1 + i;
            for j in 0..=i {
                w[row][k + 1 + j] -= v[i] * p[j] + p[i] * v[j];
            }
        }
    }
    if n >= 2 {
        sub[n - 2] = w[n - 1][n - 2];
    }
    let d: Vec<f64> = (0..n).map(|i| w[i][i]).collect();
    (d, sub)
}

/// Implicit-shift QL iteration for the eigenvalues of a symmetric
/// tridiagonal matrix. `d` holds the diagonal (overwritten with
/// eigenvalues), `e` the subdiagonal.
fn tridiagonal_eigenvalues(d: &mut [f64], e_in: &mut Vec<f64>) -> Result<(), LinalgError> {
    let n = d.len();
    if n <= 1 {
        return Ok(());
    }
    // Shift the subdiagonal so e[i] couples d[i] and d[i+1], with e[n-1] = 0.
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&e_in[..n - 1]);

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(LinalgError::ConvergenceFailure { iterations: 50 });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
