//! Lasso Monte Carlo (LMC) and related multifidelity estimators for
//! uncertainty quantification of expensive black-box functions.
//!
//! The crate is organised bottom-up:
//!
//! - [`sampling`]: seeded input distributions and centering.
//! - [`lasso`]: coordinate-descent Lasso, lambda selection, feature transforms.
//! - [`estimators`]: simple MC, two-level estimators, their MSEs and the
//!   static / adaptive / biased MFMC baselines.
//! - [`lmc`]: the S-fold Lasso Monte Carlo estimator.
//! - [`problems`]: linear, Sobol and FPUT benchmark functions plus the
//!   Dormand-Prince integrator used by FPUT.
//! - [`pce`]: polynomial chaos expansion fitted with Lasso.
//! - [`harness`]: convergence studies, relative errors, CSV/JSON output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod harness;
pub mod lasso;
pub mod lmc;
pub mod pce;
pub mod problems;
pub mod sampling;
pub mod surrogate;

pub use error::{Error, Result};
pub use estimators::{EstimateResult, MomentStats};
pub use lasso::{FeatureTransform, LambdaStrategy, LassoModel, TrainConfig};
pub use lmc::{LmcConfig, LmcResult};
pub use problems::{Problem, ReferenceMoments};
pub use sampling::{InputDistribution, SampleSet};
pub use surrogate::{LassoTrainer, Surrogate, SurrogateTrainer};
