use thiserror::Error;

/// Problems with an input dataset.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    /// Shape mismatch, non-finite covariate, count outside its support.
    #[error("structural error: {0}")]
    Structural(String),
    /// The data cannot support a proper posterior under the flat (alpha, sigma^2) prior.
    #[error("posterior impropriety risk: {0}")]
    PosteriorImproprietyRisk(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GaussianError {
    #[error("latent vector has (numerically) zero variation")]
    DegenerateZ,
    #[error("(1 : X_k) does not have full column rank")]
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid prior: {0}")]
    Prior(String),
    #[error("invalid chain configuration: {0}")]
    Chain(String),
    #[error("invalid simulation configuration: {0}")]
    Simulation(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { iteration: usize, what: &'static str },
    #[error("gaussian layer failed at iteration {iteration}: {source}")]
    Gaussian {
        iteration: usize,
        #[source]
        source: GaussianError,
    },
}
