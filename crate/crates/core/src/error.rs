use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid walk parameters: {0}")]
    InvalidParams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("population {population} exceeds ceiling {ceiling} at generation {generation}")]
    PopulationOverflow {
        population: u64,
        ceiling: u64,
        generation: u64,
    },

    #[error("only {survivors} of {replicates} replicates survived ({required} required): {context}")]
    InsufficientSurvivors {
        survivors: usize,
        replicates: u64,
        required: usize,
        context: String,
    },

    #[error("quadrature did not converge after {levels} dyadic refinements (last change {last_change:e})")]
    QuadratureNonConvergence { levels: u32, last_change: f64 },

    #[error("fast tail path needs m >= n (got m = {m}, n = {n})")]
    OutsideFastPathRegime { m: u64, n: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
