//! Shuffled linear models (SLM).
//!
//! An SLM is a local linear model whose Gaussian validity functions are
//! placed at random:
//!
//! ```text
//! SLM(x) = sum_i exp(-b_i |x - a_i|^2) (alpha_i x + beta_i)
//! ```
//!
//! Centers `a_i` and widths `b_i` are drawn once and frozen; every
//! `[alpha_i beta_i]` block is then fit jointly by a single minimum-norm
//! least-squares solve. With all `alpha_i = 0` the model reduces to an
//! extreme learning machine (ELM) with RBF nodes, which is provided as the
//! baseline.
//!
//! # Modules
//!
//! - [`linalg`] - dense matrix type, truncated-SVD pseudoinverse solve, numerical rank
//! - [`rbf`] - Gaussian activation and seeded random center/width banks
//! - [`models`] - SLM, ELM and Takagi-Sugeno product-form evaluators
//! - [`training`] - regressor assembly and closed-form fitting
//! - [`vanderpol`] - Euler-forward Van der Pol data and model rollouts
//! - [`experiment`] - the repeated learning / generalisation / simulation harness
//! - [`checks`] - Monte-Carlo property suites (rank, interpolation, equivalence, distinct norms)
//! - [`io`] - model files and CSV interchange
//!
//! # Example
//!
//! ```
//! use slm_core::rbf::{generate_bank, RandomSpec};
//! use slm_core::training::{fit_slm, Dataset, FitOptions};
//! use slm_core::linalg::Matrix;
//! use slm_core::models::Model;
//!
//! let xs: Vec<f64> = (0..40).map(|j| -2.0 + 0.1 * j as f64).collect();
//! let inputs = Matrix::from_fn(40, 1, |j, _| xs[j])?;
//! let targets = Matrix::from_fn(40, 1, |j, _| xs[j].sin())?;
//! let data = Dataset::new(inputs, targets)?;
//!
//! let bank = generate_bank(&RandomSpec::default(), 1, 8)?;
//! let (model, report) = fit_slm(&bank, &data, &FitOptions::default())?;
//! assert!(report.train_mse < 1e-4);
//! assert_eq!(model.param_count(), 8 * 2);
//! # Ok::<(), slm_core::Error>(())
//! ```

pub mod checks;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod models;
pub mod rbf;
pub mod training;
pub mod vanderpol;

pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentReport, ModelSelection};
pub use linalg::{Matrix, SolveMethod};
pub use models::{ElmParams, Model, ModelKind, SlmParams, TrainedModel};
pub use rbf::{RandomSpec, RbfBank};
pub use training::{Dataset, FitOptions, FitReport, RankTolerance};
pub use vanderpol::{PhaseData, VdpConfig};
