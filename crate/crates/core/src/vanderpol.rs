//! Euler-forward Van der Pol trajectories packaged as one-step datasets.
//!
//! The integrated system is the standard oscillator with an attracting limit
//! cycle:
//!
//! ```text
//! dx1/dt = x2
//! dx2/dt = lambda (1 - x1^2) x2 - x1
//! ```

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rbf::{seeded_rng, CoordinateDist};
use crate::training::Dataset;

/// Substream base for initial-condition draws; phase `p` uses `DATA_STREAM + p`.
pub const DATA_STREAM: u64 = 16;
/// Substream base for the optional input jitter.
pub const JITTER_STREAM: u64 = 32;

pub type State = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VdpConfig {
    pub lambda: f64,
    pub dt: f64,
    /// States per trajectory, so each trajectory yields `steps - 1` pairs.
    pub steps: usize,
    /// Trajectories per phase.
    pub n_trajectories: usize,
    /// Per-coordinate distribution of the initial conditions.
    pub init: CoordinateDist,
    pub seed: u64,
    /// Standard deviation of Gaussian noise added to the regression inputs.
    /// Zero disables it; any other value breaks exact one-step consistency.
    pub jitter: f64,
}

impl Default for VdpConfig {
    fn default() -> Self {
        VdpConfig {
            lambda: 1.0,
            dt: 0.01,
            steps: 1000,
            n_trajectories: 10,
            init: CoordinateDist::Uniform { lo: -2.5, hi: 2.5 },
            seed: 0,
            jitter: 0.0,
        }
    }
}

impl VdpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.lambda.is_finite() {
            return Err(Error::config("lambda must be finite"));
        }
        if self.steps < 2 {
            return Err(Error::config(format!("steps must be at least 2, got {}", self.steps)));
        }
        if self.n_trajectories == 0 {
            return Err(Error::config("n_trajectories must be at least 1"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::config(format!("jitter must be non-negative, got {}", self.jitter)));
        }
        self.init.sampler().map(|_| ())
    }

    pub fn pairs_per_phase(&self) -> usize {
        self.n_trajectories * (self.steps - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Learning,
    Generalisation,
    Simulation,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Learning, Phase::Generalisation, Phase::Simulation];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Learning => "learning",
            Phase::Generalisation => "generalisation",
            Phase::Simulation => "simulation",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::data(format!("unknown phase {s:?}")))
    }
}

/// One integration step. The origin is a fixed point for every `lambda` and `dt`.
pub fn vdp_step(state: State, lambda: f64, dt: f64) -> State {
    let [x1, x2] = state;
    [x1 + dt * x2, x2 + dt * (lambda * (1.0 - x1 * x1) * x2 - x1)]
}

/// `steps` states starting at `initial`.
pub fn simulate(initial: State, lambda: f64, dt: f64, steps: usize) -> Vec<State> {
    let mut out = Vec::with_capacity(steps);
    let mut s = initial;
    for _ in 0..steps {
        out.push(s);
        s = vdp_step(s, lambda, dt);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn initial(&self) -> State {
        self.states[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSet {
    pub phase: Phase,
    pub trajectories: Vec<Trajectory>,
    /// `state_t -> state_{t+1}` pairs in trajectory order, never spanning two trajectories.
    pub pairs: Dataset,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseData {
    pub config: VdpConfig,
    pub sets: [PhaseSet; 3],
}

impl PhaseData {
    pub fn phase(&self, p: Phase) -> &PhaseSet {
        &self.sets[p.index()]
    }

    pub fn learning(&self) -> &Dataset {
        &self.sets[0].pairs
    }

    pub fn generalisation(&self) -> &Dataset {
        &self.sets[1].pairs
    }

    pub fn simulation(&self) -> &PhaseSet {
        &self.sets[2]
    }
}

/// Assembles one-step pairs from trajectories, optionally jittering the inputs.
pub fn pairs_from_trajectories(trajectories: &[Trajectory], jitter: Option<(f64, u64, u64)>) -> Result<Dataset> {
    let count: usize = trajectories.iter().map(|t| t.states.len().saturating_sub(1)).sum();
    if count == 0 {
        return Err(Error::data("trajectories hold no one-step pairs"));
    }
    let mut inputs = Vec::with_capacity(2 * count);
    let mut targets = Vec::with_capacity(2 * count);
    for t in trajectories {
        for w in t.states.windows(2) {
            inputs.extend_from_slice(&w[0]);
            targets.extend_from_slice(&w[1]);
        }
    }
    if let Some((sd, seed, stream)) = jitter {
        let mut rng = seeded_rng(seed, stream);
        for v in &mut inputs {
            *v += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Dataset::new(Matrix::new(count, 2, inputs)?, Matrix::new(count, 2, targets)?)
}

/// Draws independent initial conditions per phase and integrates each trajectory.
pub fn generate_phase_data(cfg: &VdpConfig) -> Result<PhaseData> {
    cfg.validate()?;
    let sampler = cfg.init.sampler()?;
    let sets = Phase::ALL.map(|phase| {
        let mut rng = seeded_rng(cfg.seed, DATA_STREAM + phase.index() as u64);
        let trajectories: Vec<Trajectory> = (0..cfg.n_trajectories)
            .map(|_| {
                let init = [sampler.sample(&mut rng), sampler.sample(&mut rng)];
                Trajectory {
                    states: simulate(init, cfg.lambda, cfg.dt, cfg.steps),
                }
            })
            .collect();
        let jitter = (cfg.jitter > 0.0).then_some((cfg.jitter, cfg.seed, JITTER_STREAM + phase.index() as u64));
        let pairs = pairs_from_trajectories(&trajectories, jitter);
        pairs.map(|pairs| PhaseSet {
            phase,
            trajectories,
            pairs,
        })
    });
    let [a, b, c] = sets;
    Ok(PhaseData {
        config: *cfg,
        sets: [a?, b?, c?],
    })
}

/// Free-running trajectory of a one-step map.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    /// Finite states produced, starting with the initial condition.
    pub states: Vec<State>,
    /// Step at which the map first returned a non-finite state.
    pub truncated_at: Option<usize>,
}

/// Iterates `f` from `initial` until `steps` states exist or the output stops being finite.
pub fn rollout(mut f: impl FnMut(State) -> State, initial: State, steps: usize) -> Rollout {
    let mut states = Vec::with_capacity(steps);
    if steps == 0 {
        return Rollout { states, truncated_at: None };
    }
    states.push(initial);
    for t in 1..steps {
        let next = f(states[t - 1]);
        if !next.iter().all(|v| v.is_finite()) {
            return Rollout {
                states,
                truncated_at: Some(t),
            };
        }
        states.push(next);
    }
    Rollout { states, truncated_at: None }
}
