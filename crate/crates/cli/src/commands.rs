use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;
use slm_core::checks::{run_suite, CheckOptions, Suite, SuiteReport};
use slm_core::experiment::{bank_for, fit_kind, render_table, run_experiment_with_progress, run_phase_eval, run_simulation_eval};
use slm_core::io::{read_phase_csv, write_phase_csv, write_plot_csv, write_records_csv, ModelFile, PhaseFile};
use slm_core::models::Model;
use slm_core::vanderpol::{generate_phase_data, rollout, Phase};
use slm_core::{Error, ExperimentConfig, ModelKind};

use crate::config::{self, to_toml};
use crate::{CheckArgs, EvalArgs, EvalMode, GlobalOpts, KindArg, PhaseArg, PlotArgs, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(Error),
    Io(String),
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) | CliError::Core(Error::Config(_)) => 2,
            CliError::Core(Error::Data(_) | Error::Input(_) | Error::Contract(_)) => 3,
            CliError::Core(Error::Numerical(_)) => 4,
            CliError::CheckFailed(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::CheckFailed(m) => write!(f, "property check failed: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn out_path(g: &GlobalOpts, default: &str) -> PathBuf {
    g.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn header(cfg: &ExperimentConfig, extra: &str) -> String {
    format!("{extra}resolved config:\n{}", to_toml(cfg))
}

fn kind_of(k: KindArg) -> ModelKind {
    match k {
        KindArg::Slm => ModelKind::Slm,
        KindArg::Elm => ModelKind::Elm,
    }
}

fn phase_of(p: PhaseArg) -> Phase {
    match p {
        PhaseArg::Learning => Phase::Learning,
        PhaseArg::Generalisation => Phase::Generalisation,
        PhaseArg::Simulation => Phase::Simulation,
    }
}

fn load_phases(cfg: &ExperimentConfig, data: Option<&Path>) -> Result<PhaseFile> {
    match data {
        Some(path) => {
            let f = File::open(path).map_err(|e| CliError::Core(Error::Data(format!("{}: {e}", path.display()))))?;
            Ok(read_phase_csv(BufReader::new(f))?)
        }
        None => Ok(PhaseFile {
            sets: generate_phase_data(&cfg.vdp)?.sets.to_vec(),
        }),
    }
}

fn load_model(path: &Path) -> Result<(ModelFile, slm_core::TrainedModel)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Core(Error::Data(format!("{}: {e}", path.display()))))?;
    let file = ModelFile::from_json(&text)?;
    let model = file.model()?;
    Ok((file, model))
}

pub fn gen_data(g: &GlobalOpts) -> Result<()> {
    let cfg = config::resolve(g)?;
    let data = generate_phase_data(&cfg.vdp)?;
    let path = out_path(g, "phase_data.csv");
    let mut w = create(&path)?;
    write_phase_csv(&mut w, &data, &header(&cfg, ""))?;
    for set in &data.sets {
        println!(
            "{}: {} trajectories, {} pairs",
            set.phase,
            set.trajectories.len(),
            set.pairs.len()
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

pub fn train(g: &GlobalOpts, a: &TrainArgs) -> Result<()> {
    let cfg = config::resolve(g)?;
    let kind = kind_of(a.kind);
    let h = a.h.unwrap_or(cfg.h(kind));
    if h == 0 {
        return Err(CliError::Config("h must be at least 1".into()));
    }
    let phases = load_phases(&cfg, a.data.as_deref())?;
    let learning = &phases.require(Phase::Learning)?.pairs;
    let bank = bank_for(kind, &cfg.random, cfg.random.seed, learning.dim_in(), h)?;
    let (model, report) = fit_kind(kind, &bank, learning, &cfg.fit_options())?;

    let echo = json!({
        "experiment": cfg,
        "train": {
            "kind": kind,
            "h": h,
            "data": a.data.as_ref().map(|p| p.display().to_string()),
        },
    });
    let file = ModelFile::new(&model, cfg.random, echo);
    let path = out_path(g, "model.json");
    write_text(&path, &(file.to_json()? + "\n"))?;
    let report_path = path.with_extension("fit.json");
    let report_json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write_text(&report_path, &(report_json + "\n"))?;

    println!(
        "{} h={h} params={} samples={} rank={}",
        kind.label(),
        model.param_count(),
        report.samples,
        report.rank_of_regressor
    );
    println!("train_mse = {:e}", report.train_mse);
    println!(
        "assembly {:.3} s, solve {:.3} s",
        report.k_build_seconds, report.solve_seconds
    );
    println!("wrote {} and {}", path.display(), report_path.display());
    Ok(())
}

pub fn eval(g: &GlobalOpts, a: &EvalArgs) -> Result<()> {
    let cfg = config::resolve(g)?;
    let (file, model) = load_model(&a.model)?;
    let phases = load_phases(&cfg, a.data.as_deref())?;
    let phase = a.phase.map(phase_of).unwrap_or(match a.mode {
        EvalMode::Onestep => Phase::Generalisation,
        EvalMode::Rollout => Phase::Simulation,
    });
    let set = phases.require(phase)?;
    let metrics = match a.mode {
        EvalMode::Onestep => {
            let mse = run_phase_eval(&model, &set.pairs)?;
            println!("onestep {phase}: mse = {mse:e} over {} pairs", set.pairs.len());
            json!({ "mode": "onestep", "mse": mse, "pairs": set.pairs.len() })
        }
        EvalMode::Rollout => {
            let sim = run_simulation_eval(&model, set)?;
            println!(
                "rollout {phase}: mse = {:e} over {} predicted states, {} truncated",
                sim.mse, sim.predicted_states, sim.truncated
            );
            json!({
                "mode": "rollout",
                "mse": sim.mse,
                "predicted_states": sim.predicted_states,
                "truncated": sim.truncated,
            })
        }
    };
    let doc = json!({
        "model": a.model.display().to_string(),
        "model_kind": file.kind,
        "data": a.data.as_ref().map(|p| p.display().to_string()),
        "phase": phase,
        "metrics": metrics,
        "config": cfg,
    });
    let path = out_path(g, "eval.json");
    write_text(&path, &(serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))? + "\n"))?;
    Ok(())
}

fn print_suite(r: &SuiteReport, verbose: bool) {
    for c in &r.cases {
        if verbose || !c.passed {
            println!(
                "  [{}] seed {}: {}",
                if c.passed { "ok" } else { "FAIL" },
                c.seed,
                c.detail
            );
        }
    }
    println!("{} {}", if r.passed() { "PASS" } else { "FAIL" }, r.summary());
}

pub fn check(g: &GlobalOpts, a: &CheckArgs) -> Result<()> {
    let cfg = config::resolve(g)?;
    let suites: Vec<Suite> = if a.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![a.suite.parse()?]
    };
    let opts = CheckOptions {
        seeds: a.seeds,
        first_seed: g.seed.unwrap_or(0),
        samples: a.samples.clone(),
        dims: a.dims.clone(),
        spec: cfg.random,
    };
    let mut reports = Vec::new();
    for suite in suites {
        let r = run_suite(suite, &opts)?;
        print_suite(&r, a.verbose);
        reports.push(r);
    }
    if let Some(path) = &g.out {
        let doc = json!({ "suites": reports, "config": cfg });
        write_text(path, &(serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))? + "\n"))?;
    }
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed()).map(|r| r.suite.to_string()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed.join(", ")))
    }
}

pub fn bench(g: &GlobalOpts) -> Result<()> {
    let cfg = config::resolve(g)?;
    let dir = out_path(g, "bench-out");
    let report = run_experiment_with_progress(&cfg, |r| {
        eprintln!(
            "rep {:>3} {} total {:.3} s{}",
            r.repetition,
            r.kind.label(),
            r.total_seconds,
            r.failure.as_deref().map(|f| format!(" FAILED: {f}")).unwrap_or_default()
        );
    })?;
    let table = render_table(&report);
    print!("{table}");

    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write_text(&dir.join("report.json"), &(json + "\n"))?;
    let mut table_file = table.clone();
    for line in header(&cfg, "").lines() {
        table_file.push_str(&format!("# {line}\n"));
    }
    write_text(&dir.join("table.txt"), &table_file)?;
    let mut w = create(&dir.join("records.csv"))?;
    write_records_csv(&mut w, &report, &header(&cfg, ""))?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn plot_data(g: &GlobalOpts, a: &PlotArgs) -> Result<()> {
    let cfg = config::resolve(g)?;
    let (_, model) = load_model(&a.model)?;
    let phases = load_phases(&cfg, a.data.as_deref())?;
    let set = phases.require(Phase::Simulation)?;
    if model.dim_in() != 2 || model.dim_out() != 2 {
        return Err(Error::Contract("plot data needs a model mapping R^2 -> R^2".into()).into());
    }
    let mut out = [0.0; 2];
    let rows: Vec<_> = set
        .trajectories
        .iter()
        .map(|t| {
            let r = rollout(
                |s| {
                    model.predict_into(&s, &mut out);
                    out
                },
                t.initial(),
                t.states.len(),
            );
            (t.clone(), r)
        })
        .collect();
    let path = out_path(g, "plot.csv");
    let mut w = create(&path)?;
    let extra = format!("model: {}\n", a.model.display());
    write_plot_csv(&mut w, model.bank(), &rows, &header(&cfg, &extra))?;
    println!(
        "{} centers, {} rollouts; wrote {}",
        model.bank().count_models(),
        rows.len(),
        path.display()
    );
    Ok(())
}

pub fn print_defaults() -> Result<()> {
    print!("{}", to_toml(&ExperimentConfig::default()));
    Ok(())
}
