//! Seeded Monte-Carlo property suites.
//!
//! Each suite draws its instances from a fixed generator keyed by the case
//! seed, so a failing case can be replayed from its seed alone.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, condition_number, default_rank_tol, Matrix};
use crate::models::{eval_elm, eval_slm, eval_tsm_product, ElmParams, SlmParams};
use crate::rbf::{check_distinct_norms, generate_bank, seeded_rng, RandomSpec, RbfBank};
use crate::training::{build_k_matrix, fit_slm, Dataset, FitOptions};

/// Substream for instance inputs, targets and coefficients.
const INSTANCE_STREAM: u64 = 64;
/// Seed of the fixed point set used by the distinct-norms suite.
const DISTINCT_POINTS_SEED: u64 = 2024;

/// Inputs of generated instances are uniform on `[-INPUT_RANGE, INPUT_RANGE]^n`.
pub const INPUT_RANGE: f64 = 2.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Rank,
    Interpolation,
    Equivalence,
    ElmReduction,
    DistinctNorms,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Rank,
        Suite::Interpolation,
        Suite::Equivalence,
        Suite::ElmReduction,
        Suite::DistinctNorms,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Rank => "rank",
            Suite::Interpolation => "interpolation",
            Suite::Equivalence => "equivalence",
            Suite::ElmReduction => "elm-reduction",
            Suite::DistinctNorms => "distinct-norms",
        }
    }

    pub fn default_seeds(self) -> usize {
        match self {
            Suite::Rank => 100,
            Suite::Interpolation => 50,
            Suite::Equivalence => 1000,
            Suite::ElmReduction => 20,
            Suite::DistinctNorms => 1000,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown check suite {s:?}")))
    }
}

/// Knobs shared by all suites; `None` picks the suite default.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckOptions {
    pub seeds: Option<usize>,
    pub first_seed: u64,
    /// Sample counts `N` (interpolation) or the largest `N` (rank).
    pub samples: Option<Vec<usize>>,
    /// Input dimensions `n`.
    pub dims: Option<Vec<usize>>,
    pub spec: RandomSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub seed: u64,
    pub passed: bool,
    /// The suite's headline quantity (rank gap, relative residual, deviation).
    pub metric: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub cases: Vec<CaseResult>,
    pub required: usize,
    /// Largest headline metric over all cases.
    pub worst: f64,
}

impl SuiteReport {
    fn new(suite: Suite, cases: Vec<CaseResult>, required: usize) -> Self {
        let worst = cases.iter().map(|c| c.metric).fold(0.0, f64::max);
        SuiteReport {
            suite,
            cases,
            required,
            worst,
        }
    }

    pub fn passed_count(&self) -> usize {
        self.cases.iter().filter(|c| c.passed).count()
    }

    pub fn passed(&self) -> bool {
        self.passed_count() >= self.required
    }

    pub fn summary(&self) -> String {
        format!(
            "{}: {}/{} passed (need {}), worst metric {:.3e}",
            self.suite,
            self.passed_count(),
            self.cases.len(),
            self.required,
            self.worst
        )
    }
}

pub fn run_suite(suite: Suite, opts: &CheckOptions) -> Result<SuiteReport> {
    opts.spec.validate()?;
    match suite {
        Suite::Rank => rank_suite(opts),
        Suite::Interpolation => interpolation_suite(opts),
        Suite::Equivalence => equivalence_suite(opts),
        Suite::ElmReduction => elm_reduction_suite(opts),
        Suite::DistinctNorms => distinct_norms_suite(opts),
    }
}

fn seeds(suite: Suite, opts: &CheckOptions) -> impl Iterator<Item = u64> {
    let count = opts.seeds.unwrap_or(suite.default_seeds()) as u64;
    opts.first_seed..opts.first_seed + count
}

fn uniform_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-INPUT_RANGE..INPUT_RANGE)).expect("finite")
}

fn normal_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)).expect("finite")
}

fn pick<T: Copy>(rng: &mut ChaCha20Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

/// Random instance for the rank suite: `n`, `h` and `N` drawn so that `N <= max_rows`
/// and `(n+1)h <= max_rows`, with `h <= 10`.
pub fn rank_instance(spec: &RandomSpec, seed: u64, dims: &[usize], max_rows: usize) -> Result<(RbfBank, Dataset)> {
    let mut rng = seeded_rng(seed, INSTANCE_STREAM);
    let n = pick(&mut rng, dims);
    let h_max = 10.min(max_rows / (n + 1));
    if h_max == 0 {
        return Err(Error::config(format!("no model fits (n+1)h <= {max_rows} with n = {n}")));
    }
    let h = rng.random_range(1..=h_max);
    let rows = rng.random_range(2..=max_rows);
    let inputs = uniform_matrix(&mut rng, rows, n);
    let targets = normal_matrix(&mut rng, rows, 2);
    let bank = generate_bank(&spec.with_seed(seed), n, h)?;
    Ok((bank, Dataset::new(inputs, targets)?))
}

fn rank_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let dims = opts.dims.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let max_rows = opts.samples.as_ref().and_then(|s| s.iter().copied().max()).unwrap_or(30);
    if max_rows < 2 || dims.is_empty() || dims.contains(&0) {
        return Err(Error::config("rank suite needs N >= 2 and n >= 1"));
    }
    let mut cases = Vec::new();
    for seed in seeds(Suite::Rank, opts) {
        let (bank, data) = rank_instance(&opts.spec, seed, &dims, max_rows)?;
        let k = build_k_matrix(&bank, &data)?;
        let expected = k.rows().min(k.cols());
        let rank = linalg::numerical_rank(&k, default_rank_tol(k.rows(), k.cols()))?;
        cases.push(CaseResult {
            seed,
            passed: rank == expected,
            metric: (expected - rank) as f64,
            detail: format!(
                "N={} n={} h={} rank={rank}/{expected} cond={:.3e}",
                data.len(),
                data.dim_in(),
                bank.count_models(),
                condition_number(&k)?
            ),
        });
    }
    let required = cases.len();
    Ok(SuiteReport::new(Suite::Rank, cases, required))
}

/// Square interpolation instance: `h = N/(n+1)` so that `K` is `N x N`.
pub fn interpolation_instance(spec: &RandomSpec, seed: u64, rows: usize, n: usize) -> Result<(RbfBank, Dataset)> {
    if n == 0 || !rows.is_multiple_of(n + 1) {
        return Err(Error::config(format!("N = {rows} is not a multiple of n+1 = {}", n + 1)));
    }
    let mut rng = seeded_rng(seed, INSTANCE_STREAM);
    let inputs = uniform_matrix(&mut rng, rows, n);
    let targets = normal_matrix(&mut rng, rows, 2);
    let bank = generate_bank(&spec.with_seed(seed), n, rows / (n + 1))?;
    Ok((bank, Dataset::new(inputs, targets)?))
}

fn distinct_rows(m: &Matrix) -> bool {
    (0..m.rows()).all(|i| (i + 1..m.rows()).all(|j| m.row(i) != m.row(j)))
}

/// Fraction of interpolation cases that must pass.
pub const INTERPOLATION_MIN_PASS: f64 = 0.96;
/// Relative residual bound `|K G - T|_F^2 <= tol |T|_F^2`.
pub const INTERPOLATION_TOL: f64 = 1e-12;

fn interpolation_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let sizes = opts.samples.clone().unwrap_or_else(|| vec![6, 12, 30]);
    let dims = opts.dims.clone().unwrap_or_else(|| vec![1, 2]);
    let combos: Vec<(usize, usize)> = sizes.iter().flat_map(|&s| dims.iter().map(move |&n| (s, n))).collect();
    if combos.is_empty() {
        return Err(Error::config("interpolation suite needs at least one (N, n) pair"));
    }
    let mut cases = Vec::new();
    for seed in seeds(Suite::Interpolation, opts) {
        let (rows, n) = combos[(seed % combos.len() as u64) as usize];
        let (bank, data) = interpolation_instance(&opts.spec, seed, rows, n)?;
        let z = Matrix::from_fn(rows, n + 1, |j, k| if k < n { data.input(j)[k] } else { 1.0 })?;
        let z_full = linalg::numerical_rank(&z, default_rank_tol(rows, n + 1))? == n + 1;
        let distinct = distinct_rows(data.inputs());
        let k = build_k_matrix(&bank, &data)?;
        let (params, fit) = fit_slm(&bank, &data, &FitOptions::default())?;
        let resid = k.matmul(params.gamma())?.sub(data.targets())?.frobenius_sq();
        let rel = resid / data.targets().frobenius_sq();
        cases.push(CaseResult {
            seed,
            passed: z_full && distinct && rel <= INTERPOLATION_TOL,
            metric: rel,
            detail: format!(
                "N={rows} n={n} h={} rel_residual={rel:.3e} rank={}/{rows} cond={:.3e}{}",
                bank.count_models(),
                fit.rank_of_regressor,
                condition_number(&k)?,
                if z_full && distinct { "" } else { " precondition-violated" }
            ),
        });
    }
    let required = (INTERPOLATION_MIN_PASS * cases.len() as f64).ceil() as usize;
    Ok(SuiteReport::new(Suite::Interpolation, cases, required))
}

/// Random SLM with standard-normal coefficients on the given bank spec.
pub fn random_slm(spec: &RandomSpec, seed: u64, n: usize, m: usize, h: usize) -> Result<SlmParams> {
    let bank = generate_bank(&spec.with_seed(seed), n, h)?;
    let mut rng = seeded_rng(seed, INSTANCE_STREAM + 1);
    SlmParams::new(bank, normal_matrix(&mut rng, (n + 1) * h, m))
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Relative bound for the equivalence and reduction suites.
pub const EQUIVALENCE_TOL: f64 = 1e-12;

fn equivalence_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let dims = opts.dims.clone().unwrap_or_else(|| vec![1, 2, 3, 4]);
    let mut cases = Vec::new();
    for seed in seeds(Suite::Equivalence, opts) {
        let mut rng = seeded_rng(seed, INSTANCE_STREAM + 2);
        let n = pick(&mut rng, &dims);
        let m = rng.random_range(1..=3);
        let h = rng.random_range(1..=10);
        let p = random_slm(&opts.spec, seed, n, m, h)?;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-INPUT_RANGE..INPUT_RANGE)).collect();
        let a = eval_tsm_product(&p, &x)?;
        let b = eval_slm(&p, &x)?;
        let dev = a.iter().zip(&b).map(|(a, b)| relative_deviation(*a, *b)).fold(0.0, f64::max);
        cases.push(CaseResult {
            seed,
            passed: dev <= EQUIVALENCE_TOL,
            metric: dev,
            detail: format!("n={n} m={m} h={h} max_rel_dev={dev:.3e}"),
        });
    }
    let required = cases.len();
    Ok(SuiteReport::new(Suite::Equivalence, cases, required))
}

fn elm_reduction_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let n = opts.dims.as_ref().and_then(|d| d.first().copied()).unwrap_or(2);
    let mut cases = Vec::new();
    for seed in seeds(Suite::ElmReduction, opts) {
        let slm = random_slm(&opts.spec, seed, n, 2, 10)?.with_zeroed_slopes();
        let elm = ElmParams::new(slm.bank().clone(), slm.offsets())?;
        let mut rng = seeded_rng(seed, INSTANCE_STREAM + 3);
        let mut dev = 0.0f64;
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-INPUT_RANGE..INPUT_RANGE)).collect();
            let a = eval_slm(&slm, &x)?;
            let b = eval_elm(&elm, &x)?;
            for (a, b) in a.iter().zip(&b) {
                dev = dev.max(relative_deviation(*a, *b));
            }
        }
        cases.push(CaseResult {
            seed,
            passed: dev <= EQUIVALENCE_TOL,
            metric: dev,
            detail: format!("n={n} h=10 points=100 max_rel_dev={dev:.3e}"),
        });
    }
    let required = cases.len();
    Ok(SuiteReport::new(Suite::ElmReduction, cases, required))
}

/// The fixed distinct point set of the distinct-norms suite.
pub fn distinct_point_set(n: usize, count: usize) -> Matrix {
    let mut rng = seeded_rng(DISTINCT_POINTS_SEED, INSTANCE_STREAM + 4);
    uniform_matrix(&mut rng, count, n)
}

fn distinct_norms_suite(opts: &CheckOptions) -> Result<SuiteReport> {
    let n = opts.dims.as_ref().and_then(|d| d.first().copied()).unwrap_or(2);
    let count = opts.samples.as_ref().and_then(|s| s.first().copied()).unwrap_or(20);
    let points = distinct_point_set(n, count);
    if !distinct_rows(&points) {
        return Err(Error::Numerical("fixed point set has duplicate rows".into()));
    }
    let mut cases = Vec::new();
    for seed in seeds(Suite::DistinctNorms, opts) {
        let bank = generate_bank(&opts.spec.with_seed(seed), n, 1)?;
        let ok = check_distinct_norms(&points, bank.center(0));
        cases.push(CaseResult {
            seed,
            passed: ok,
            metric: if ok { 0.0 } else { 1.0 },
            detail: format!("center={:?}", bank.center(0)),
        });
    }
    let required = cases.len();
    Ok(SuiteReport::new(Suite::DistinctNorms, cases, required))
}
