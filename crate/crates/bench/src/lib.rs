//! Fixtures shared by the criterion benches.

use slm_core::experiment::bank_for;
use slm_core::vanderpol::generate_phase_data;
use slm_core::{Dataset, ExperimentConfig, ModelKind, RbfBank, Result};

/// Learning-phase data and both default-size banks for one configuration.
pub struct Fixture {
    pub config: ExperimentConfig,
    pub learning: Dataset,
    pub slm_bank: RbfBank,
    pub elm_bank: RbfBank,
}

/// Default experiment with `steps` states per trajectory; 1000 gives 9990 samples.
pub fn fixture(steps: usize) -> Result<Fixture> {
    let mut config = ExperimentConfig::default();
    config.vdp.steps = steps;
    let learning = generate_phase_data(&config.vdp)?.learning().clone();
    let bank = |kind| bank_for(kind, &config.random, config.base_seed, learning.dim_in(), config.h(kind));
    Ok(Fixture {
        slm_bank: bank(ModelKind::Slm)?,
        elm_bank: bank(ModelKind::Elm)?,
        learning,
        config,
    })
}
