//! Repeated learning / generalisation / simulation runs for SLM and ELM.
//!
//! Repetition `r` derives every random draw from `base_seed + r`: the phase
//! data from the Van der Pol substreams, and each model's bank from its own
//! substream, so the two models see identical data but independent banks.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SolveMethod;
use crate::models::{Model, ModelKind, TrainedModel};
use crate::rbf::{generate_bank_on_stream, RandomSpec, RbfBank, DEFAULT_BANK_STREAM, RNG_ALGORITHM};
use crate::training::{fit_elm, fit_slm, sum_squared_error, Dataset, FitOptions, FitReport, RankTolerance};
use crate::vanderpol::{generate_phase_data, rollout, PhaseSet, VdpConfig};

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Bank substream of the ELM; the SLM uses [`DEFAULT_BANK_STREAM`].
pub const ELM_BANK_STREAM: u64 = 1;

pub fn bank_stream(kind: ModelKind) -> u64 {
    match kind {
        ModelKind::Slm => DEFAULT_BANK_STREAM,
        ModelKind::Elm => ELM_BANK_STREAM,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelSelection {
    Slm,
    Elm,
    #[default]
    Both,
}

impl ModelSelection {
    pub fn kinds(self) -> &'static [ModelKind] {
        match self {
            ModelSelection::Slm => &[ModelKind::Slm],
            ModelSelection::Elm => &[ModelKind::Elm],
            ModelSelection::Both => &[ModelKind::Slm, ModelKind::Elm],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model_kind: ModelSelection,
    pub h_slm: usize,
    pub h_elm: usize,
    pub repetitions: usize,
    pub rank_tol: RankTolerance,
    /// `explicit-pinv` forms `K^+` and multiplies; `factored` never forms it.
    pub solve: SolveMethod,
    /// Ridge penalty; 0 solves the plain least-squares problem.
    pub ridge: f64,
    pub base_seed: u64,
    /// Center and width distributions. Its `seed` is replaced per repetition.
    pub random: RandomSpec,
    /// Plant and data settings. Its `seed` is replaced per repetition.
    pub vdp: VdpConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model_kind: ModelSelection::Both,
            h_slm: 100,
            h_elm: 300,
            repetitions: 100,
            rank_tol: RankTolerance::Auto,
            solve: SolveMethod::ExplicitPinv,
            ridge: 0.0,
            base_seed: 0,
            random: RandomSpec::default(),
            vdp: VdpConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        for (name, h) in [("h_slm", self.h_slm), ("h_elm", self.h_elm)] {
            if h == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::config(format!("ridge must be non-negative, got {}", self.ridge)));
        }
        if let RankTolerance::Relative(t) = self.rank_tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config(format!("rank_tol must be non-negative, got {t}")));
            }
        }
        self.random.validate()?;
        self.vdp.validate()
    }

    pub fn h(&self, kind: ModelKind) -> usize {
        match kind {
            ModelKind::Slm => self.h_slm,
            ModelKind::Elm => self.h_elm,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            rank_tol: self.rank_tol,
            method: self.solve,
            ridge: (self.ridge > 0.0).then_some(self.ridge),
        }
    }

    pub fn repetition_seed(&self, r: usize) -> u64 {
        self.base_seed.wrapping_add(r as u64)
    }
}

/// Bank for `kind` with `h` models on an `n`-dimensional input, on that kind's substream.
pub fn bank_for(kind: ModelKind, spec: &RandomSpec, seed: u64, n: usize, h: usize) -> Result<RbfBank> {
    generate_bank_on_stream(&spec.with_seed(seed), n, h, bank_stream(kind))
}

pub fn fit_kind(kind: ModelKind, bank: &RbfBank, data: &Dataset, opts: &FitOptions) -> Result<(TrainedModel, FitReport)> {
    match kind {
        ModelKind::Slm => fit_slm(bank, data, opts).map(|(p, r)| (p.into(), r)),
        ModelKind::Elm => fit_elm(bank, data, opts).map(|(p, r)| (p.into(), r)),
    }
}

fn check_model_dims(model: &impl Model, n: usize, m: usize) -> Result<()> {
    if model.dim_in() != n || model.dim_out() != m {
        return Err(Error::contract(format!(
            "model maps R^{} -> R^{}, data is R^{n} -> R^{m}",
            model.dim_in(),
            model.dim_out()
        )));
    }
    Ok(())
}

/// One-step prediction error `mean_j |model(x_j) - t_j|^2`.
pub fn run_phase_eval(model: &impl Model, data: &Dataset) -> Result<f64> {
    check_model_dims(model, data.dim_in(), data.dim_out())?;
    Ok(sum_squared_error(model, data) / data.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationEval {
    /// Pooled over every predicted state of every trajectory.
    pub mse: f64,
    pub predicted_states: usize,
    /// Number of trajectories whose rollout stopped on a non-finite state.
    pub truncated: usize,
}

/// Free-runs the model from each trajectory's initial condition and compares
/// the `steps - 1` predicted states against the ground truth.
pub fn run_simulation_eval(model: &impl Model, set: &PhaseSet) -> Result<SimulationEval> {
    check_model_dims(model, 2, 2)?;
    let mut sse = 0.0;
    let mut count = 0usize;
    let mut truncated = 0usize;
    let mut out = [0.0; 2];
    for traj in &set.trajectories {
        let r = rollout(
            |s| {
                model.predict_into(&s, &mut out);
                out
            },
            traj.initial(),
            traj.states.len(),
        );
        truncated += usize::from(r.truncated_at.is_some());
        for (p, t) in r.states.iter().zip(&traj.states).skip(1) {
            sse += (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Numerical("every rollout diverged on its first step".into()));
    }
    Ok(SimulationEval {
        mse: sse / count as f64,
        predicted_states: count,
        truncated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRecord {
    pub repetition: usize,
    pub seed: u64,
    pub kind: ModelKind,
    /// Assembly, solve and both evaluation phases.
    pub total_seconds: f64,
    /// The least-squares solve alone.
    pub pinv_seconds: f64,
    pub assembly_seconds: f64,
    pub mse_train: Option<f64>,
    pub mse_gen: Option<f64>,
    pub mse_sim: Option<f64>,
    pub regressor_rank: Option<usize>,
    pub sim_truncated: usize,
    pub failure: Option<String>,
}

/// Mean and unbiased sample variance (0 for a single value).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Aggregate {
    pub fn from_values(values: &[f64]) -> Aggregate {
        let count = values.len();
        if count == 0 {
            return Aggregate {
                count,
                mean: f64::NAN,
                variance: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let variance = if count > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
        } else {
            0.0
        };
        Aggregate { count, mean, variance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kind: ModelKind,
    pub h: usize,
    pub param_count: usize,
    pub failures: usize,
    pub total_seconds: Aggregate,
    pub pinv_seconds: Aggregate,
    pub mse_train: Aggregate,
    pub mse_gen: Aggregate,
    pub mse_sim: Aggregate,
}

impl ModelSummary {
    pub fn from_records(kind: ModelKind, h: usize, param_count: usize, records: &[RepetitionRecord]) -> ModelSummary {
        let mine: Vec<&RepetitionRecord> = records.iter().filter(|r| r.kind == kind).collect();
        let collect = |f: &dyn Fn(&RepetitionRecord) -> Option<f64>| {
            Aggregate::from_values(&mine.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
        };
        ModelSummary {
            kind,
            h,
            param_count,
            failures: mine.iter().filter(|r| r.failure.is_some()).count(),
            total_seconds: collect(&|r| Some(r.total_seconds)),
            pinv_seconds: collect(&|r| Some(r.pinv_seconds)),
            mse_train: collect(&|r| r.mse_train),
            mse_gen: collect(&|r| r.mse_gen),
            mse_sim: collect(&|r| r.mse_sim),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub rng: String,
    pub config: ExperimentConfig,
    pub records: Vec<RepetitionRecord>,
    pub summaries: Vec<ModelSummary>,
}

impl ExperimentReport {
    pub fn summary(&self, kind: ModelKind) -> Option<&ModelSummary> {
        self.summaries.iter().find(|s| s.kind == kind)
    }
}

fn free_parameters(kind: ModelKind, n: usize, m: usize, h: usize) -> usize {
    match kind {
        ModelKind::Slm => h * m * (n + 1),
        ModelKind::Elm => h * m,
    }
}

fn run_one(
    cfg: &ExperimentConfig,
    kind: ModelKind,
    repetition: usize,
    seed: u64,
    learning: &Dataset,
    generalisation: &Dataset,
    simulation: &PhaseSet,
) -> RepetitionRecord {
    let mut rec = RepetitionRecord {
        repetition,
        seed,
        kind,
        total_seconds: 0.0,
        pinv_seconds: 0.0,
        assembly_seconds: 0.0,
        mse_train: None,
        mse_gen: None,
        mse_sim: None,
        regressor_rank: None,
        sim_truncated: 0,
        failure: None,
    };
    let start = Instant::now();
    let result = (|| -> Result<()> {
        let bank = bank_for(kind, &cfg.random, seed, learning.dim_in(), cfg.h(kind))?;
        let (model, fit) = fit_kind(kind, &bank, learning, &cfg.fit_options())?;
        rec.pinv_seconds = fit.solve_seconds;
        rec.assembly_seconds = fit.k_build_seconds;
        rec.regressor_rank = Some(fit.rank_of_regressor);
        if !fit.train_mse.is_finite() {
            return Err(Error::Numerical("training error is not finite".into()));
        }
        rec.mse_train = Some(fit.train_mse);
        rec.mse_gen = Some(run_phase_eval(&model, generalisation)?);
        let sim = run_simulation_eval(&model, simulation)?;
        rec.sim_truncated = sim.truncated;
        rec.mse_sim = Some(sim.mse);
        Ok(())
    })();
    rec.total_seconds = start.elapsed().as_secs_f64();
    if let Err(e) = result {
        rec.failure = Some(e.to_string());
    }
    rec
}

/// Runs every repetition for every selected model kind.
///
/// Fit or evaluation failures are recorded per repetition; only invalid
/// configuration or data generation aborts the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_progress(cfg, |_| {})
}

/// [`run_experiment`], calling `progress` after each record.
pub fn run_experiment_with_progress(
    cfg: &ExperimentConfig,
    mut progress: impl FnMut(&RepetitionRecord),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.repetitions * cfg.model_kind.kinds().len());
    for r in 0..cfg.repetitions {
        let seed = cfg.repetition_seed(r);
        let data = generate_phase_data(&VdpConfig { seed, ..cfg.vdp })?;
        for &kind in cfg.model_kind.kinds() {
            let rec = run_one(cfg, kind, r, seed, data.learning(), data.generalisation(), data.simulation());
            progress(&rec);
            records.push(rec);
        }
    }
    let summaries = cfg
        .model_kind
        .kinds()
        .iter()
        .map(|&k| ModelSummary::from_records(k, cfg.h(k), free_parameters(k, 2, 2, cfg.h(k)), &records))
        .collect();
    Ok(ExperimentReport {
        format_version: REPORT_FORMAT_VERSION,
        rng: RNG_ALGORITHM.to_string(),
        config: cfg.clone(),
        records,
        summaries,
    })
}

type MetricOf = fn(&ModelSummary) -> &Aggregate;

/// Table with one row per metric and one column per model, showing means.
pub fn render_table(report: &ExperimentReport) -> String {
    let rows: [(&str, MetricOf); 5] = [
        ("Total computation time [s]", |s| &s.total_seconds),
        ("Pseudoinverse time [s]", |s| &s.pinv_seconds),
        ("MSE during training", |s| &s.mse_train),
        ("MSE during generalisation", |s| &s.mse_gen),
        ("MSE during simulation", |s| &s.mse_sim),
    ];
    let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
    let col_w = 14;
    let mut out = String::new();
    let _ = write!(out, "{:label_w$}", "");
    for s in &report.summaries {
        let head = format!("{} (h={})", s.kind.label(), s.h);
        let _ = write!(out, "  {head:>col_w$}");
    }
    out.push('\n');
    for (label, get) in rows {
        let _ = write!(out, "{label:label_w$}");
        for s in &report.summaries {
            let _ = write!(out, "  {:>col_w$}", format!("{:.4e}", get(s).mean));
        }
        out.push('\n');
    }
    let reps = report.config.repetitions;
    let _ = writeln!(out, "means over {reps} repetition(s); free parameters:{}", {
        let mut p = String::new();
        for s in &report.summaries {
            let _ = write!(p, " {}={}", s.kind.label(), s.param_count);
        }
        p
    });
    let failures: usize = report.summaries.iter().map(|s| s.failures).sum();
    if failures > 0 {
        let _ = writeln!(out, "failed repetitions: {failures}");
    }
    out
}
