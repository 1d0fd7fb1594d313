//! Evaluators for linear, shuffled-linear, ELM and Takagi-Sugeno models.
//!
//! The SLM coefficient matrix `Γ` stacks one `(n+1) x m` block per local model;
//! block `i` occupies rows `i(n+1) .. i(n+1)+n`, the first `n` rows being
//! `alpha_iᵀ` and the last one `beta_iᵀ`, matching `z = [x; 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rbf::RbfBank;

/// Anything that maps `R^n -> R^m` with a fixed number of free parameters.
pub trait Model {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn param_count(&self) -> usize;

    /// Writes the prediction for `x` into `out`. Dimensions are not checked.
    fn predict_into(&self, x: &[f64], out: &mut [f64]);

    fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out()];
        self.predict_into(x, &mut out);
        out
    }
}

/// Free-parameter count: `h m (n+1)` for an SLM, `h m` for an ELM.
pub fn param_count(model: &impl Model) -> usize {
    model.param_count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Slm,
    Elm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Slm => "slm",
            ModelKind::Elm => "elm",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Slm => "SLM",
            ModelKind::Elm => "ELM",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `LM(x) = alpha x + beta` with `alpha` of shape m x n.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModelParams {
    alpha: Matrix,
    beta: Vec<f64>,
}

impl LinearModelParams {
    pub fn new(alpha: Matrix, beta: Vec<f64>) -> Result<Self> {
        if alpha.rows() != beta.len() {
            return Err(Error::contract(format!(
                "alpha has {} rows but beta has {} entries",
                alpha.rows(),
                beta.len()
            )));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("beta contains non-finite values".into()));
        }
        Ok(LinearModelParams { alpha, beta })
    }

    pub fn alpha(&self) -> &Matrix {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }
}

pub fn eval_lm(lm: &LinearModelParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != lm.alpha.cols() {
        return Err(Error::contract(format!(
            "input has dimension {}, linear model expects {}",
            x.len(),
            lm.alpha.cols()
        )));
    }
    Ok(lm
        .alpha
        .row_iter()
        .zip(&lm.beta)
        .map(|(row, b)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
        .collect())
}

/// `z = [x; 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedInput(Vec<f64>);

impl AugmentedInput {
    pub fn new(x: &[f64]) -> Self {
        let mut z = Vec::with_capacity(x.len() + 1);
        z.extend_from_slice(x);
        z.push(1.0);
        AugmentedInput(z)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A fitted shuffled linear model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlmParams {
    bank: RbfBank,
    gamma: Matrix,
}

impl SlmParams {
    pub fn new(bank: RbfBank, gamma: Matrix) -> Result<Self> {
        let expected = (bank.dim_in() + 1) * bank.count_models();
        if gamma.rows() != expected {
            return Err(Error::contract(format!(
                "gamma needs (n+1)h = {expected} rows, got {}",
                gamma.rows()
            )));
        }
        Ok(SlmParams { bank, gamma })
    }

    /// Stacks `[alpha_i beta_i]ᵀ` blocks; every local model must be m x n.
    pub fn from_local_models(bank: RbfBank, local: &[LinearModelParams]) -> Result<Self> {
        if local.len() != bank.count_models() {
            return Err(Error::contract(format!(
                "{} local models for a bank of {}",
                local.len(),
                bank.count_models()
            )));
        }
        let n = bank.dim_in();
        let m = local.first().map_or(0, |lm| lm.beta.len());
        let mut data = Vec::with_capacity((n + 1) * local.len() * m);
        for lm in local {
            if lm.alpha.shape() != (m, n) {
                return Err(Error::contract(format!(
                    "local model alpha is {}x{}, expected {m}x{n}",
                    lm.alpha.rows(),
                    lm.alpha.cols()
                )));
            }
            for k in 0..n {
                data.extend((0..m).map(|c| lm.alpha.get(c, k)));
            }
            data.extend_from_slice(&lm.beta);
        }
        let gamma = Matrix::new((n + 1) * local.len(), m, data)?;
        SlmParams::new(bank, gamma)
    }

    pub fn bank(&self) -> &RbfBank {
        &self.bank
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn count_models(&self) -> usize {
        self.bank.count_models()
    }

    /// The `i`-th local linear model `alpha_i x + beta_i`.
    pub fn local_model(&self, i: usize) -> Result<LinearModelParams> {
        if i >= self.count_models() {
            return Err(Error::contract(format!("local model {i} out of range")));
        }
        let (n, m) = (self.bank.dim_in(), self.gamma.cols());
        let base = i * (n + 1);
        let alpha = Matrix::from_fn(m, n, |c, k| self.gamma.get(base + k, c))?;
        let beta = self.gamma.row(base + n).to_vec();
        LinearModelParams::new(alpha, beta)
    }

    /// Copy with every `alpha_i` set to zero, leaving only the offsets.
    pub fn with_zeroed_slopes(&self) -> SlmParams {
        let n = self.bank.dim_in();
        let gamma = Matrix::from_fn(self.gamma.rows(), self.gamma.cols(), |r, c| {
            if r % (n + 1) == n {
                self.gamma.get(r, c)
            } else {
                0.0
            }
        })
        .expect("zeroing keeps entries finite");
        SlmParams {
            bank: self.bank.clone(),
            gamma,
        }
    }

    /// The offsets `beta_iᵀ` stacked as an h x m matrix.
    pub fn offsets(&self) -> Matrix {
        let n = self.bank.dim_in();
        Matrix::from_fn(self.count_models(), self.gamma.cols(), |i, c| {
            self.gamma.get(i * (n + 1) + n, c)
        })
        .expect("offsets are finite")
    }
}

impl Model for SlmParams {
    fn dim_in(&self) -> usize {
        self.bank.dim_in()
    }

    fn dim_out(&self) -> usize {
        self.gamma.cols()
    }

    fn param_count(&self) -> usize {
        self.gamma.rows() * self.gamma.cols()
    }

    /// `Γᵀ [g_1(x) z; ...; g_h(x) z]`.
    fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.bank.dim_in();
        out.fill(0.0);
        for i in 0..self.bank.count_models() {
            let g = self.bank.activation_unchecked(i, x);
            let base = i * (n + 1);
            for (k, &xk) in x.iter().enumerate() {
                let w = g * xk;
                for (o, &c) in out.iter_mut().zip(self.gamma.row(base + k)) {
                    *o += w * c;
                }
            }
            for (o, &c) in out.iter_mut().zip(self.gamma.row(base + n)) {
                *o += g * c;
            }
        }
    }
}

/// An ELM with Gaussian RBF nodes and output weights `B` (h x m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElmParams {
    bank: RbfBank,
    output_weights: Matrix,
}

impl ElmParams {
    pub fn new(bank: RbfBank, output_weights: Matrix) -> Result<Self> {
        if output_weights.rows() != bank.count_models() {
            return Err(Error::contract(format!(
                "output weights need h = {} rows, got {}",
                bank.count_models(),
                output_weights.rows()
            )));
        }
        Ok(ElmParams {
            bank,
            output_weights,
        })
    }

    pub fn bank(&self) -> &RbfBank {
        &self.bank
    }

    pub fn output_weights(&self) -> &Matrix {
        &self.output_weights
    }
}

impl Model for ElmParams {
    fn dim_in(&self) -> usize {
        self.bank.dim_in()
    }

    fn dim_out(&self) -> usize {
        self.output_weights.cols()
    }

    fn param_count(&self) -> usize {
        self.output_weights.rows() * self.output_weights.cols()
    }

    fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.bank.count_models() {
            let g = self.bank.activation_unchecked(i, x);
            for (o, &b) in out.iter_mut().zip(self.output_weights.row(i)) {
                *o += g * b;
            }
        }
    }
}

fn checked_predict(model: &impl Model, bank: &RbfBank, x: &[f64]) -> Result<Vec<f64>> {
    bank.check_input(x)?;
    Ok(model.predict(x))
}

/// SLM output via the stacked `Γᵀ` form.
pub fn eval_slm(p: &SlmParams, x: &[f64]) -> Result<Vec<f64>> {
    checked_predict(p, &p.bank, x)
}

/// SLM output as the weighted sum of local linear models,
/// `sum_i g_i(x) (alpha_i x + beta_i)`. Slower than [`eval_slm`]; kept as a
/// cross-check of the stacked layout.
pub fn eval_slm_local_sum(p: &SlmParams, x: &[f64]) -> Result<Vec<f64>> {
    p.bank.check_input(x)?;
    let mut out = vec![0.0; p.dim_out()];
    for i in 0..p.count_models() {
        let g = p.bank.activation_unchecked(i, x);
        let lm = eval_lm(&p.local_model(i)?, x)?;
        for (o, v) in out.iter_mut().zip(lm) {
            *o += g * v;
        }
    }
    Ok(out)
}

pub fn eval_elm(p: &ElmParams, x: &[f64]) -> Result<Vec<f64>> {
    checked_predict(p, &p.bank, x)
}

/// Takagi-Sugeno reading of an SLM: rule `i` fires with the product of
/// per-coordinate Gaussian memberships `exp(-b_i (x_k - a_ik)^2)`, sharing
/// one width per rule.
pub fn eval_tsm_product(p: &SlmParams, x: &[f64]) -> Result<Vec<f64>> {
    p.bank.check_input(x)?;
    let bank = &p.bank;
    let n = bank.dim_in();
    let mut out = vec![0.0; p.dim_out()];
    let z = AugmentedInput::new(x);
    for i in 0..bank.count_models() {
        let b = bank.widths()[i];
        let firing: f64 = bank
            .center(i)
            .iter()
            .zip(x)
            .map(|(a, v)| (-b * (v - a) * (v - a)).exp())
            .product();
        let base = i * (n + 1);
        for (c, o) in out.iter_mut().enumerate() {
            let consequent: f64 = z
                .as_slice()
                .iter()
                .enumerate()
                .map(|(k, zk)| zk * p.gamma.get(base + k, c))
                .sum();
            *o += firing * consequent;
        }
    }
    Ok(out)
}

/// Either trained model family, as stored in model files.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Slm(SlmParams),
    Elm(ElmParams),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Slm(_) => ModelKind::Slm,
            TrainedModel::Elm(_) => ModelKind::Elm,
        }
    }

    pub fn bank(&self) -> &RbfBank {
        match self {
            TrainedModel::Slm(p) => p.bank(),
            TrainedModel::Elm(p) => p.bank(),
        }
    }
}

impl Model for TrainedModel {
    fn dim_in(&self) -> usize {
        self.bank().dim_in()
    }

    fn dim_out(&self) -> usize {
        match self {
            TrainedModel::Slm(p) => p.dim_out(),
            TrainedModel::Elm(p) => p.dim_out(),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            TrainedModel::Slm(p) => p.param_count(),
            TrainedModel::Elm(p) => p.param_count(),
        }
    }

    fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            TrainedModel::Slm(p) => p.predict_into(x, out),
            TrainedModel::Elm(p) => p.predict_into(x, out),
        }
    }
}

impl From<SlmParams> for TrainedModel {
    fn from(p: SlmParams) -> Self {
        TrainedModel::Slm(p)
    }
}

impl From<ElmParams> for TrainedModel {
    fn from(p: ElmParams) -> Self {
        TrainedModel::Elm(p)
    }
}
