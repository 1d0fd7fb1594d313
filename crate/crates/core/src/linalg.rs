//! Dense matrices and the minimum-norm least-squares solve.
//!
//! [`Matrix`] is a small row-major container whose entries are checked to be
//! finite at construction. Factorisations are delegated to `faer`, run
//! sequentially so results are bit-reproducible: tall systems are first
//! reduced with a Householder QR so that the SVD only runs on the square `R`
//! factor, which is what keeps 10^4 x 300 regressors cheap.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::householder;
use faer::{Conj, Mat, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        Matrix::new(r.rows, r.cols, r.data)
    }
}

impl From<Matrix> for MatrixRepr {
    fn from(m: Matrix) -> Self {
        MatrixRepr {
            rows: m.rows,
            cols: m.cols,
            data: m.data,
        }
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Input(format!(
            "non-finite matrix entry {} at flat index {i}",
            data[i]
        ))),
        None => Ok(()),
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::contract(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from equally long rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (j, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::contract(format!(
                    "row {j} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix::new(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of bounds");
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Entries in row-major order.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.data[r * self.cols + c]);
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for r in 0..self.rows {
            let out_row = &mut out[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Matrix::new(self.rows, other.cols, out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(Error::contract(format!(
                "cannot subtract {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn frobenius_sq(&self) -> f64 {
        frobenius_sq(self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_sq(self).sqrt()
    }

    fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |r, c| self.data[r * self.cols + c])
    }

    fn from_faer(m: MatRef<'_, f64>) -> Result<Matrix> {
        Matrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

/// Sum of squared entries.
pub fn frobenius_sq(a: &Matrix) -> f64 {
    a.data.iter().map(|v| v * v).sum()
}

/// Default relative truncation threshold: `max(rows, cols) * machine epsilon`.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Spectral diagnostics of a truncated solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    /// Number of singular values kept.
    pub rank: usize,
    /// Largest singular value of the coefficient matrix (0 for the zero matrix).
    pub sigma_max: f64,
    /// Smallest singular value that survived truncation (0 when rank is 0).
    pub sigma_min_retained: f64,
    /// Absolute threshold actually applied (`rank_tol * sigma_max`).
    pub threshold: f64,
}

/// Thin SVD of `a`, with the left factor already applied to `rhs`.
struct Reduced {
    singular: Vec<f64>,
    /// V, cols x k; empty unless requested
    v: Mat<f64>,
    /// U^T rhs, k x rhs_cols
    ut_rhs: Option<Mat<f64>>,
}

fn no_convergence<E>(_: E) -> Error {
    Error::Numerical("SVD did not converge".into())
}

fn factor(a: MatRef<'_, f64>, rhs: Option<Mat<f64>>, want_v: bool) -> Result<Reduced> {
    if rhs.is_none() && !want_v {
        return Ok(Reduced {
            singular: a.singular_values().map_err(no_convergence)?,
            v: Mat::zeros(0, 0),
            ut_rhs: None,
        });
    }
    let svd = a.thin_svd().map_err(no_convergence)?;
    Ok(Reduced {
        singular: svd.S().column_vector().iter().copied().collect(),
        v: svd.V().to_owned(),
        ut_rhs: rhs.map(|t| svd.U().transpose() * t),
    })
}

/// faer's SIMD kernels can return with the upper vector register halves
/// dirty; every later SSE instruction (libm `exp` among them) then pays a
/// state-transition penalty, slowing model evaluation about 20x.
fn clear_upper_vector_state() {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx") {
        // SAFETY: AVX support was checked at runtime.
        unsafe { std::arch::x86_64::_mm256_zeroupper() }
    }
}

fn reduce(a: &Matrix, rhs: Option<&Matrix>, want_v: bool) -> Result<Reduced> {
    let out = reduce_dirty(a, rhs, want_v);
    clear_upper_vector_state();
    out
}

fn reduce_dirty(a: &Matrix, rhs: Option<&Matrix>, want_v: bool) -> Result<Reduced> {
    let dense = a.to_faer();
    let rhs = rhs.map(Matrix::to_faer);
    if a.rows() > a.cols() {
        // A = QR with Q orthonormal columns, so A^+ = R^+ Q^T and sing(A) = sing(R).
        let qr = dense.qr();
        let rhs = rhs.map(|mut t| {
            let (basis, coeff) = (qr.Q_basis(), qr.Q_coeff());
            let mut mem = MemBuffer::new(
                householder::apply_block_householder_sequence_transpose_on_the_left_in_place_scratch::<f64>(
                    a.rows(),
                    coeff.nrows(),
                    t.ncols(),
                ),
            );
            householder::apply_block_householder_sequence_transpose_on_the_left_in_place_with_conj(
                basis,
                coeff,
                Conj::No,
                t.as_mut(),
                Par::Seq,
                MemStack::new(&mut mem),
            );
            t.subrows(0, a.cols()).to_owned()
        });
        factor(qr.thin_R(), rhs, want_v)
    } else {
        factor(dense.as_ref(), rhs, want_v)
    }
}

fn validate_tol(rank_tol: f64) -> Result<()> {
    if !(rank_tol >= 0.0 && rank_tol.is_finite()) {
        return Err(Error::contract(format!(
            "rank tolerance must be a finite non-negative number, got {rank_tol}"
        )));
    }
    Ok(())
}

fn retained(singular: &[f64], rank_tol: f64) -> (f64, f64, Vec<bool>) {
    let sigma_max = singular.iter().copied().fold(0.0, f64::max);
    let threshold = rank_tol * sigma_max;
    let keep = singular
        .iter()
        .map(|&s| sigma_max > 0.0 && s > threshold)
        .collect();
    (sigma_max, threshold, keep)
}

/// How `a^+ t` is formed from the SVD `a = U S V^T`.
///
/// Both give the minimum-norm least-squares solution in exact arithmetic.
/// They differ in rounding: on regressors with condition numbers near
/// `1/eps` the factored form reaches residuals many orders of magnitude
/// below the explicit one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    /// Materialise `a^+ = V S^+ U^T`, then multiply by `t`.
    #[default]
    ExplicitPinv,
    /// Apply `U^T` to `t` and scale; `a^+` is never formed.
    Factored,
}

/// Minimum-norm least-squares solution `X = a^+ t`, formed as
/// [`SolveMethod::ExplicitPinv`].
///
/// Singular values at or below `rank_tol * sigma_max` are treated as zero.
pub fn pseudoinverse_solve(a: &Matrix, t: &Matrix, rank_tol: f64) -> Result<Matrix> {
    pseudoinverse_solve_with_info(a, t, rank_tol).map(|(x, _)| x)
}

/// Same as [`pseudoinverse_solve`], also returning rank and spectral diagnostics.
pub fn pseudoinverse_solve_with_info(
    a: &Matrix,
    t: &Matrix,
    rank_tol: f64,
) -> Result<(Matrix, SolveInfo)> {
    pseudoinverse_solve_by(a, t, rank_tol, SolveMethod::default())
}

/// `a^+` itself, `cols x rows`.
pub fn pseudoinverse(a: &Matrix, rank_tol: f64) -> Result<Matrix> {
    validate_tol(rank_tol)?;
    check_finite(a.as_slice())?;
    if a.is_empty() {
        return Ok(Matrix::zeros(a.cols(), a.rows()));
    }
    let (pinv, _) = explicit_pinv(a, rank_tol)?;
    Matrix::from_faer(pinv.as_ref())
        .map_err(|_| Error::Numerical("pseudoinverse has non-finite entries".into()))
}

fn explicit_pinv(a: &Matrix, rank_tol: f64) -> Result<(Mat<f64>, SolveInfo)> {
    let out = explicit_pinv_dirty(a, rank_tol);
    clear_upper_vector_state();
    out
}

fn explicit_pinv_dirty(a: &Matrix, rank_tol: f64) -> Result<(Mat<f64>, SolveInfo)> {
    let dense = a.to_faer();
    let (singular, u, v) = if a.rows() > a.cols() {
        let qr = dense.qr();
        let svd = qr.thin_R().thin_svd().map_err(no_convergence)?;
        let u = qr.compute_thin_Q() * svd.U();
        (svd.S().column_vector().iter().copied().collect::<Vec<_>>(), u, svd.V().to_owned())
    } else {
        let svd = dense.thin_svd().map_err(no_convergence)?;
        (svd.S().column_vector().iter().copied().collect(), svd.U().to_owned(), svd.V().to_owned())
    };
    let (sigma_max, threshold, keep) = retained(&singular, rank_tol);
    let mut scaled = Mat::<f64>::zeros(v.nrows(), v.ncols());
    for (k, (&s, &kept)) in singular.iter().zip(&keep).enumerate() {
        if kept {
            for r in 0..v.nrows() {
                scaled[(r, k)] = v[(r, k)] / s;
            }
        }
    }
    let info = summarize(&singular, &keep, sigma_max, threshold);
    Ok((scaled * u.transpose(), info))
}

fn summarize(singular: &[f64], keep: &[bool], sigma_max: f64, threshold: f64) -> SolveInfo {
    let kept = || singular.iter().zip(keep).filter(|(_, &k)| k).map(|(&s, _)| s);
    SolveInfo {
        rank: kept().count(),
        sigma_max,
        sigma_min_retained: kept().reduce(f64::min).unwrap_or(0.0),
        threshold,
    }
}

/// Minimum-norm least-squares solution by the chosen `method`.
pub fn pseudoinverse_solve_by(
    a: &Matrix,
    t: &Matrix,
    rank_tol: f64,
    method: SolveMethod,
) -> Result<(Matrix, SolveInfo)> {
    if a.rows() != t.rows() {
        return Err(Error::contract(format!(
            "coefficient matrix has {} rows but right-hand side has {}",
            a.rows(),
            t.rows()
        )));
    }
    validate_tol(rank_tol)?;
    check_finite(a.as_slice())?;
    check_finite(t.as_slice())?;

    let (p, m) = (a.cols(), t.cols());
    if a.is_empty() || m == 0 {
        let info = SolveInfo {
            rank: 0,
            sigma_max: 0.0,
            sigma_min_retained: 0.0,
            threshold: 0.0,
        };
        return Ok((Matrix::zeros(p, m), info));
    }

    if method == SolveMethod::ExplicitPinv {
        let (pinv, info) = explicit_pinv(a, rank_tol)?;
        let x = pinv * t.to_faer();
        clear_upper_vector_state();
        let x = Matrix::from_faer(x.as_ref()).map_err(|_| {
            Error::Numerical("pseudoinverse solve produced non-finite coefficients".into())
        })?;
        return Ok((x, info));
    }

    let red = reduce(a, Some(t), true)?;
    let (sigma_max, threshold, keep) = retained(&red.singular, rank_tol);
    let ut_rhs = red.ut_rhs.expect("left factor requested");

    let mut x = Mat::<f64>::zeros(p, m);
    for (k, (&s, &kept)) in red.singular.iter().zip(&keep).enumerate() {
        if !kept {
            continue;
        }
        let v = red.v.col(k);
        for c in 0..m {
            let coeff = ut_rhs[(k, c)] / s;
            for r in 0..p {
                x[(r, c)] += v[r] * coeff;
            }
        }
    }
    let x = Matrix::from_faer(x.as_ref()).map_err(|_| {
        Error::Numerical("pseudoinverse solve produced non-finite coefficients".into())
    })?;
    Ok((x, summarize(&red.singular, &keep, sigma_max, threshold)))
}

/// Singular values in descending order.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    check_finite(a.as_slice())?;
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let mut s = reduce(a, None, false)?.singular;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Number of singular values strictly above `rank_tol * sigma_max`; 0 for the zero matrix.
pub fn numerical_rank(a: &Matrix, rank_tol: f64) -> Result<usize> {
    validate_tol(rank_tol)?;
    let s = singular_values(a)?;
    let (_, _, keep) = retained(&s, rank_tol);
    Ok(keep.into_iter().filter(|&k| k).count())
}

/// 2-norm condition number `sigma_max / sigma_min` over all `min(rows, cols)`
/// singular values. Infinite when the matrix is rank deficient in exact zeros.
pub fn condition_number(a: &Matrix) -> Result<f64> {
    let s = singular_values(a)?;
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => Ok(hi / lo),
        (Some(_), Some(_)) => Ok(f64::INFINITY),
        _ => Ok(1.0),
    }
}
