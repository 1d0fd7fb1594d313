//! Resolution order: defaults, then the TOML file, then `--quick`, then `--seed`.

use std::fs;

use slm_core::ExperimentConfig;

use crate::commands::CliError;
use crate::GlobalOpts;

pub const QUICK_REPETITIONS: usize = 3;
pub const QUICK_STEPS: usize = 200;

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn resolve(g: &GlobalOpts) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &g.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if g.quick {
        cfg.repetitions = QUICK_REPETITIONS;
        cfg.vdp.steps = QUICK_STEPS;
    }
    if let Some(seed) = g.seed {
        cfg.base_seed = seed;
        cfg.vdp.seed = seed;
        cfg.random.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string_pretty(cfg).expect("config is representable as TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        assert_eq!(parse(&to_toml(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = parse("h_slm = 7\n[vdp]\ndt = 0.02\n[random.width]\nkind = \"exponential\"\nrate = 2.0\n").unwrap();
        assert_eq!(cfg.h_slm, 7);
        assert_eq!(cfg.vdp.dt, 0.02);
        assert_eq!(cfg.vdp.steps, 1000);
        assert_eq!(cfg.random.width, slm_core::rbf::WidthDist::Exponential { rate: 2.0 });
        assert_eq!(cfg.solve, slm_core::SolveMethod::ExplicitPinv);
        assert_eq!(parse("solve = \"factored\"").unwrap().solve, slm_core::SolveMethod::Factored);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["hidden = 3", "[vdp]\nmu = 1.0", "[random]\nwidths = 1", "model_kind = \"tsm\"", "solve = \"qr\""] {
            assert!(matches!(parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn overrides_apply_in_order() {
        let g = GlobalOpts {
            seed: Some(9),
            quick: true,
            ..GlobalOpts::default()
        };
        let cfg = resolve(&g).unwrap();
        assert_eq!((cfg.repetitions, cfg.vdp.steps), (QUICK_REPETITIONS, QUICK_STEPS));
        assert_eq!((cfg.base_seed, cfg.vdp.seed, cfg.random.seed), (9, 9, 9));
    }
}
