//! Bayesian variable selection for count and proportion outcomes with the
//! unit-level latent Gaussian model (ULLGM).
//!
//! Outcomes `y_i ~ F(h(z_i))` share a latent Gaussian layer
//! `z = alpha + X_k beta_k + eps`, `eps ~ N(0, sigma^2)`. Given `z`, the
//! Gaussian layer is conjugate under a g-prior, so model search runs on the
//! closed-form marginal likelihood and the latent values are refreshed with
//! gradient-informed (Barker) Metropolis-Hastings steps.

pub mod chain;
pub mod cli;
pub mod data;
pub mod error;
pub mod g_prior;
pub mod latent;
pub mod likelihood;
pub mod linear_gaussian;
pub mod model;
pub mod model_space;
pub mod predictive;
pub mod rng;
pub mod simulation;
pub mod special;

pub use chain::{run_chain, run_chains, ChainConfig, ChainOutput, PriorConfig};
pub use data::{center_design, CenteredDesign, Dataset, Family, Standardize};
pub use error::{ChainError, ConfigError, DataError, GaussianError};
pub use g_prior::GPrior;
pub use model::ModelIndicator;
pub use model_space::ModelPrior;
