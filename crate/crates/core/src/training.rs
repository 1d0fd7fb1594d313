//! Closed-form fitting of SLM and ELM models.
//!
//! Both fits are a single minimum-norm least-squares solve. The ELM regressor
//! is the N x h activation matrix `H`; the SLM regressor `K` is N x (n+1)h with
//! row `j` equal to `[g_1(x_j) z_jᵀ, ..., g_h(x_j) z_jᵀ]`.

use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, default_rank_tol, Matrix, SolveInfo, SolveMethod};
use crate::models::{AugmentedInput, ElmParams, Model, SlmParams};
use crate::rbf::RbfBank;

/// N input/target pairs, stored as N x n and N x m matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    targets: Matrix,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() == 0 {
            return Err(Error::data("a dataset needs at least one sample"));
        }
        if inputs.rows() != targets.rows() {
            return Err(Error::contract(format!(
                "{} inputs but {} targets",
                inputs.rows(),
                targets.rows()
            )));
        }
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim_in(&self) -> usize {
        self.inputs.cols()
    }

    pub fn dim_out(&self) -> usize {
        self.targets.cols()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn targets(&self) -> &Matrix {
        &self.targets
    }

    pub fn input(&self, j: usize) -> &[f64] {
        self.inputs.row(j)
    }

    pub fn target(&self, j: usize) -> &[f64] {
        self.targets.row(j)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.inputs.row_iter().zip(self.targets.row_iter())
    }
}

/// Relative singular-value cut-off for the solve.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum RankTolerance {
    /// `max(rows, cols) * machine epsilon`.
    #[default]
    Auto,
    Relative(f64),
}

impl RankTolerance {
    pub fn resolve(self, rows: usize, cols: usize) -> f64 {
        match self {
            RankTolerance::Auto => default_rank_tol(rows, cols),
            RankTolerance::Relative(t) => t,
        }
    }
}

impl Serialize for RankTolerance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RankTolerance::Auto => s.serialize_str("auto"),
            RankTolerance::Relative(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for RankTolerance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Value(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Name(s) if s == "auto" => Ok(RankTolerance::Auto),
            Repr::Name(s) => Err(serde::de::Error::custom(format!(
                "rank_tol must be \"auto\" or a non-negative number, got {s:?}"
            ))),
            Repr::Value(t) if t >= 0.0 && t.is_finite() => Ok(RankTolerance::Relative(t)),
            Repr::Value(t) => Err(serde::de::Error::custom(format!(
                "rank_tol must be non-negative, got {t}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct FitOptions {
    pub rank_tol: RankTolerance,
    pub method: SolveMethod,
    /// Ridge penalty `lambda |X|_F^2`. Not part of the plain SLM/ELM fits;
    /// `None` (the default) solves the unregularised problem.
    pub ridge: Option<f64>,
}

/// Outcome of one closed-form fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// `E / N` with `E = sum_j |model(x_j) - t_j|^2`.
    pub train_mse: f64,
    /// The raw sum of squared errors `E`.
    pub train_sse: f64,
    /// Time spent assembling `K` (SLM) or `H` (ELM).
    pub k_build_seconds: f64,
    pub solve_seconds: f64,
    pub rank_of_regressor: usize,
    pub sigma_max: f64,
    pub sigma_min_retained: f64,
    pub n: usize,
    pub m: usize,
    pub h: usize,
    pub samples: usize,
}

impl FitReport {
    /// Ratio of the extreme retained singular values.
    pub fn retained_condition(&self) -> f64 {
        if self.sigma_min_retained > 0.0 {
            self.sigma_max / self.sigma_min_retained
        } else {
            f64::INFINITY
        }
    }
}

pub fn build_z(x: &[f64]) -> AugmentedInput {
    AugmentedInput::new(x)
}

fn check_dims(bank: &RbfBank, inputs: &Matrix) -> Result<()> {
    if inputs.cols() != bank.dim_in() {
        return Err(Error::contract(format!(
            "inputs have dimension {}, bank expects {}",
            inputs.cols(),
            bank.dim_in()
        )));
    }
    Ok(())
}

/// N x h activation matrix, entry `(j, i) = g_i(x_j)`.
pub fn build_h_matrix(bank: &RbfBank, data: &Dataset) -> Result<Matrix> {
    h_matrix_from_inputs(bank, data.inputs())
}

pub fn h_matrix_from_inputs(bank: &RbfBank, inputs: &Matrix) -> Result<Matrix> {
    check_dims(bank, inputs)?;
    let h = bank.count_models();
    let mut data = vec![0.0; inputs.rows() * h];
    for (x, row) in inputs.row_iter().zip(data.chunks_exact_mut(h.max(1))) {
        bank.activations_into(x, row);
    }
    Matrix::new(inputs.rows(), h, data)
}

/// SLM regressor `K`, assembled block-wise: `z_j` is formed once per row and
/// each of the `h` blocks is `z_j` scaled by a single activation.
pub fn build_k_matrix(bank: &RbfBank, data: &Dataset) -> Result<Matrix> {
    k_matrix_from_inputs(bank, data.inputs())
}

pub fn k_matrix_from_inputs(bank: &RbfBank, inputs: &Matrix) -> Result<Matrix> {
    check_dims(bank, inputs)?;
    let (h, w) = (bank.count_models(), bank.dim_in() + 1);
    let cols = h * w;
    let mut data = vec![0.0; inputs.rows() * cols];
    let mut g = vec![0.0; h];
    for (x, row) in inputs.row_iter().zip(data.chunks_exact_mut(cols)) {
        let z = AugmentedInput::new(x);
        bank.activations_into(x, &mut g);
        for (block, &gi) in row.chunks_exact_mut(w).zip(&g) {
            for (dst, &zk) in block.iter_mut().zip(z.as_slice()) {
                *dst = gi * zk;
            }
        }
    }
    Matrix::new(inputs.rows(), cols, data)
}

/// Entry-by-entry assembly of `K`, recomputing the activation for every entry.
/// This is the straightforward triple loop the block-wise builder is measured against.
pub fn build_k_matrix_naive(bank: &RbfBank, data: &Dataset) -> Result<Matrix> {
    check_dims(bank, data.inputs())?;
    let (h, w) = (bank.count_models(), bank.dim_in() + 1);
    let n_rows = data.len();
    let mut out = vec![0.0; n_rows * h * w];
    for j in 0..n_rows {
        let x = data.input(j);
        for i in 0..h {
            for k in 0..w {
                let zk = if k + 1 == w { 1.0 } else { x[k] };
                out[j * h * w + i * w + k] = bank.activation_unchecked(i, x) * zk;
            }
        }
    }
    Matrix::new(n_rows, h * w, out)
}

fn solve(a: &Matrix, t: &Matrix, opts: &FitOptions) -> Result<(Matrix, SolveInfo)> {
    let tol = opts.rank_tol.resolve(a.rows(), a.cols());
    match opts.ridge {
        None => linalg::pseudoinverse_solve_by(a, t, tol, opts.method),
        Some(lambda) if lambda >= 0.0 && lambda.is_finite() => {
            // [A; sqrt(l) I] X ~ [T; 0]
            let p = a.cols();
            let s = lambda.sqrt();
            let mut rows = a.as_slice().to_vec();
            for r in 0..p {
                rows.extend((0..p).map(|c| if r == c { s } else { 0.0 }));
            }
            let mut rhs = t.as_slice().to_vec();
            rhs.extend(std::iter::repeat_n(0.0, p * t.cols()));
            let aa = Matrix::new(a.rows() + p, p, rows)?;
            let tt = Matrix::new(t.rows() + p, t.cols(), rhs)?;
            linalg::pseudoinverse_solve_by(&aa, &tt, tol, opts.method)
        }
        Some(lambda) => Err(Error::config(format!(
            "ridge penalty must be non-negative, got {lambda}"
        ))),
    }
}

/// `E = sum_j |model(x_j) - t_j|^2` over a dataset.
pub fn sum_squared_error(model: &impl Model, data: &Dataset) -> f64 {
    let mut out = vec![0.0; data.dim_out()];
    data.iter()
        .map(|(x, t)| {
            model.predict_into(x, &mut out);
            out.iter().zip(t).map(|(y, t)| (y - t) * (y - t)).sum::<f64>()
        })
        .sum()
}

fn check_targets(bank: &RbfBank, data: &Dataset) -> Result<()> {
    check_dims(bank, data.inputs())?;
    if data.dim_out() == 0 {
        return Err(Error::contract("targets must have at least one column"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn report(
    model: &impl Model,
    data: &Dataset,
    info: SolveInfo,
    build: f64,
    solve: f64,
    h: usize,
) -> FitReport {
    let sse = sum_squared_error(model, data);
    FitReport {
        train_mse: sse / data.len() as f64,
        train_sse: sse,
        k_build_seconds: build,
        solve_seconds: solve,
        rank_of_regressor: info.rank,
        sigma_max: info.sigma_max,
        sigma_min_retained: info.sigma_min_retained,
        n: data.dim_in(),
        m: data.dim_out(),
        h,
        samples: data.len(),
    }
}

/// Fits `Γ = K^+ T`.
pub fn fit_slm(bank: &RbfBank, data: &Dataset, opts: &FitOptions) -> Result<(SlmParams, FitReport)> {
    check_targets(bank, data)?;
    let start = Instant::now();
    let k = build_k_matrix(bank, data)?;
    let build = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let (gamma, info) = solve(&k, data.targets(), opts)?;
    let solve_secs = start.elapsed().as_secs_f64();

    let params = SlmParams::new(bank.clone(), gamma)?;
    let rep = report(&params, data, info, build, solve_secs, bank.count_models());
    Ok((params, rep))
}

/// Fits `B = H^+ T`.
pub fn fit_elm(bank: &RbfBank, data: &Dataset, opts: &FitOptions) -> Result<(ElmParams, FitReport)> {
    check_targets(bank, data)?;
    let start = Instant::now();
    let h = build_h_matrix(bank, data)?;
    let build = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let (b, info) = solve(&h, data.targets(), opts)?;
    let solve_secs = start.elapsed().as_secs_f64();

    let params = ElmParams::new(bank.clone(), b)?;
    let rep = report(&params, data, info, build, solve_secs, bank.count_models());
    Ok((params, rep))
}

/// Numerical rank of `K`; compare against `min(N, (n+1)h)`.
pub fn check_k_rank(bank: &RbfBank, data: &Dataset, rank_tol: RankTolerance) -> Result<usize> {
    let k = build_k_matrix(bank, data)?;
    linalg::numerical_rank(&k, rank_tol.resolve(k.rows(), k.cols()))
}
