//! Model files and CSV interchange.
//!
//! Floats are written in Rust's shortest round-trip form and parsed back
//! exactly, so every file format here round-trips bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::ExperimentReport;
use crate::linalg::Matrix;
use crate::models::{ElmParams, Model, ModelKind, SlmParams, TrainedModel};
use crate::rbf::{RandomSpec, RbfBank, RNG_ALGORITHM};
use crate::training::Dataset;
use crate::vanderpol::{pairs_from_trajectories, Phase, PhaseData, PhaseSet, Rollout, Trajectory};

pub const MODEL_FORMAT_VERSION: u32 = 1;

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Data(format!("i/o: {e}")),
        _ => Error::Data(e.to_string()),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Data(format!("i/o: {e}"))
}

/// Self-describing model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub kind: ModelKind,
    pub n: usize,
    pub m: usize,
    pub h: usize,
    pub rng: String,
    pub spec: RandomSpec,
    /// Resolved configuration of the run that produced the model.
    pub config: serde_json::Value,
    pub bank: RbfBank,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_weights: Option<Matrix>,
}

impl ModelFile {
    pub fn new(model: &TrainedModel, spec: RandomSpec, config: serde_json::Value) -> ModelFile {
        let (gamma, output_weights) = match model {
            TrainedModel::Slm(p) => (Some(p.gamma().clone()), None),
            TrainedModel::Elm(p) => (None, Some(p.output_weights().clone())),
        };
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            kind: model.kind(),
            n: model.dim_in(),
            m: model.dim_out(),
            h: model.bank().count_models(),
            rng: RNG_ALGORITHM.to_string(),
            spec,
            config,
            bank: model.bank().clone(),
            gamma,
            output_weights,
        }
    }

    /// Rebuilds the model, checking that the header agrees with the matrices.
    pub fn model(&self) -> Result<TrainedModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let bad = |e: Error| Error::Data(format!("inconsistent model file: {e}"));
        let model: TrainedModel = match (self.kind, &self.gamma, &self.output_weights) {
            (ModelKind::Slm, Some(g), None) => SlmParams::new(self.bank.clone(), g.clone()).map_err(bad)?.into(),
            (ModelKind::Elm, None, Some(b)) => ElmParams::new(self.bank.clone(), b.clone()).map_err(bad)?.into(),
            (kind, _, _) => {
                return Err(Error::data(format!(
                    "a {kind} model file needs exactly the {} matrix",
                    if kind == ModelKind::Slm { "gamma" } else { "output_weights" }
                )))
            }
        };
        if (model.dim_in(), model.dim_out(), model.bank().count_models()) != (self.n, self.m, self.h) {
            return Err(Error::data("model header dimensions disagree with its matrices"));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Data(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<ModelFile> {
        serde_json::from_str(s).map_err(|e| Error::Data(format!("model file: {e}")))
    }
}

/// Writes `text` as `#`-prefixed comment lines.
pub fn write_comment_block(w: &mut impl Write, text: &str) -> Result<()> {
    for line in text.lines() {
        writeln!(w, "# {line}").map_err(io_err)?;
    }
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

pub const PHASE_CSV_HEADER: [&str; 7] = ["phase", "trajectory", "t", "x1", "x2", "x1_next", "x2_next"];

/// One row per one-step pair, phases in order, trajectories in order.
pub fn write_phase_csv(w: &mut impl Write, data: &PhaseData, header_comment: &str) -> Result<()> {
    write_phase_sets_csv(w, &data.sets, header_comment)
}

pub fn write_phase_sets_csv(mut w: &mut impl Write, sets: &[PhaseSet], header_comment: &str) -> Result<()> {
    write_comment_block(&mut w, header_comment)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PHASE_CSV_HEADER).map_err(csv_err)?;
    for set in sets {
        for (k, traj) in set.trajectories.iter().enumerate() {
            for (t, pair) in traj.states.windows(2).enumerate() {
                out.write_record([
                    set.phase.as_str().to_string(),
                    k.to_string(),
                    t.to_string(),
                    pair[0][0].to_string(),
                    pair[0][1].to_string(),
                    pair[1][0].to_string(),
                    pair[1][1].to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    out.flush().map_err(io_err)
}

#[derive(Deserialize)]
struct PhaseRow {
    phase: String,
    trajectory: usize,
    t: usize,
    x1: f64,
    x2: f64,
    x1_next: f64,
    x2_next: f64,
}

/// Phases present in a phase-data CSV, with their trajectories rebuilt.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFile {
    pub sets: Vec<PhaseSet>,
}

impl PhaseFile {
    pub fn phase(&self, p: Phase) -> Option<&PhaseSet> {
        self.sets.iter().find(|s| s.phase == p)
    }

    pub fn require(&self, p: Phase) -> Result<&PhaseSet> {
        self.phase(p).ok_or_else(|| Error::data(format!("data file has no {p} rows")))
    }
}

/// Reads a phase-data CSV. Rows of one trajectory must be consecutive with
/// `t = 0, 1, ...` and each row must start where the previous one ended.
pub fn read_phase_csv(r: impl Read) -> Result<PhaseFile> {
    let mut rdr = reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != PHASE_CSV_HEADER {
        return Err(Error::data(format!(
            "expected columns {}, found {}",
            PHASE_CSV_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut groups: Vec<(Phase, Vec<Trajectory>)> = Vec::new();
    let mut current: Option<(Phase, usize)> = None;
    for (line, row) in rdr.deserialize::<PhaseRow>().enumerate() {
        let row = row.map_err(csv_err)?;
        let phase: Phase = row.phase.parse()?;
        let x = [row.x1, row.x2];
        let next = [row.x1_next, row.x2_next];
        if !x.iter().chain(&next).all(|v| v.is_finite()) {
            return Err(Error::data(format!("row {}: non-finite state", line + 1)));
        }
        if current == Some((phase, row.trajectory)) {
            let traj = groups.last_mut().and_then(|g| g.1.last_mut()).expect("open trajectory");
            if row.t + 1 != traj.states.len() || traj.states.last() != Some(&x) {
                return Err(Error::data(format!(
                    "row {}: {phase} trajectory {} is not contiguous at t={}",
                    line + 1,
                    row.trajectory,
                    row.t
                )));
            }
            traj.states.push(next);
        } else {
            if row.t != 0 {
                return Err(Error::data(format!("row {}: trajectory must start at t=0", line + 1)));
            }
            if groups.last().map(|g| g.0) != Some(phase) {
                if groups.iter().any(|g| g.0 == phase) {
                    return Err(Error::data(format!("rows of phase {phase} are not contiguous")));
                }
                groups.push((phase, Vec::new()));
            }
            groups.last_mut().expect("group").1.push(Trajectory { states: vec![x, next] });
            current = Some((phase, row.trajectory));
        }
    }
    if groups.is_empty() {
        return Err(Error::data("data file has no rows"));
    }
    let sets = groups
        .into_iter()
        .map(|(phase, trajectories)| {
            let pairs = pairs_from_trajectories(&trajectories, None)?;
            Ok(PhaseSet {
                phase,
                trajectories,
                pairs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseFile { sets })
}

pub const RECORDS_CSV_HEADER: [&str; 12] = [
    "kind",
    "repetition",
    "seed",
    "total_seconds",
    "pinv_seconds",
    "assembly_seconds",
    "mse_train",
    "mse_gen",
    "mse_sim",
    "regressor_rank",
    "sim_truncated",
    "failure",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per repetition and model kind.
pub fn write_records_csv(mut w: &mut impl Write, report: &ExperimentReport, header_comment: &str) -> Result<()> {
    write_comment_block(&mut w, header_comment)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORDS_CSV_HEADER).map_err(csv_err)?;
    for r in &report.records {
        out.write_record([
            r.kind.as_str().to_string(),
            r.repetition.to_string(),
            r.seed.to_string(),
            r.total_seconds.to_string(),
            r.pinv_seconds.to_string(),
            r.assembly_seconds.to_string(),
            opt(r.mse_train),
            opt(r.mse_gen),
            opt(r.mse_sim),
            opt(r.regressor_rank),
            r.sim_truncated.to_string(),
            r.failure.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(io_err)
}

pub const PLOT_CSV_HEADER: [&str; 8] = ["section", "id", "t", "x1", "x2", "width", "pred_x1", "pred_x2"];

/// Centers with widths, then one block per trajectory with ground truth and
/// the model's free-running prediction (blank once the rollout is truncated).
pub fn write_plot_csv(
    mut w: &mut impl Write,
    bank: &RbfBank,
    trajectories: &[(Trajectory, Rollout)],
    header_comment: &str,
) -> Result<()> {
    if bank.dim_in() != 2 {
        return Err(Error::contract(format!(
            "plot data needs a two-dimensional input, model has {}",
            bank.dim_in()
        )));
    }
    write_comment_block(&mut w, header_comment)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PLOT_CSV_HEADER).map_err(csv_err)?;
    for i in 0..bank.count_models() {
        let a = bank.center(i);
        out.write_record([
            "center".to_string(),
            i.to_string(),
            String::new(),
            a[0].to_string(),
            a[1].to_string(),
            bank.widths()[i].to_string(),
            String::new(),
            String::new(),
        ])
        .map_err(csv_err)?;
    }
    for (k, (truth, pred)) in trajectories.iter().enumerate() {
        for (t, s) in truth.states.iter().enumerate() {
            let (p1, p2) = match pred.states.get(t) {
                Some(p) => (p[0].to_string(), p[1].to_string()),
                None => (String::new(), String::new()),
            };
            out.write_record([
                "rollout".to_string(),
                k.to_string(),
                t.to_string(),
                s[0].to_string(),
                s[1].to_string(),
                String::new(),
                p1,
                p2,
            ])
            .map_err(csv_err)?;
        }
    }
    out.flush().map_err(io_err)
}

/// Reads a plain `x..., t...` table whose first `n` columns are inputs.
pub fn read_dataset_csv(r: impl Read, n: usize) -> Result<Dataset> {
    let mut rdr = reader(r);
    let width = rdr.headers().map_err(csv_err)?.len();
    if n == 0 || width <= n {
        return Err(Error::data(format!("need more than {n} columns, found {width}")));
    }
    let (mut xs, mut ts) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::data(format!("row {}: {field:?} is not a number", line + 1)))?;
            if c < n { xs.push(v) } else { ts.push(v) }
        }
    }
    let rows = xs.len() / n;
    let inputs = Matrix::new(rows, n, xs).map_err(|e| Error::Data(e.to_string()))?;
    let targets = Matrix::new(rows, width - n, ts).map_err(|e| Error::Data(e.to_string()))?;
    Dataset::new(inputs, targets)
}
