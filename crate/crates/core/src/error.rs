use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidSpec(String),

    #[error("site index {index} out of range 1..={n_sites}")]
    SiteOutOfRange { index: usize, n_sites: usize },

    #[error(
        "collective decay rate {0} is not supported by this engine; \
         superradiant runs require the exact oracle"
    )]
    CollectiveDecayUnsupported(f64),

    #[error("eigenbasis is ill-conditioned (condition estimate {0:.3e}); near an exceptional point")]
    IllConditioned(f64),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid integrator settings: {0}")]
    InvalidIntegrator(String),

    #[error("integration became unstable at t = {time}: {detail}; retry with a smaller dt")]
    Unstable { time: f64, detail: String },

    #[error("{n_sites} sites exceeds the exact-oracle cap of {cap}")]
    OracleCap { n_sites: usize, cap: usize },

    #[error("unsupported observable `{name}` for the {engine} engine")]
    UnsupportedObservable { name: String, engine: String },

    #[error("invalid trajectory: {0}")]
    Trajectory(String),

    #[error("time grids differ: {0}")]
    GridMismatch(String),

    #[error("no interior turnover in range (maximum at t = {0})")]
    NoInteriorTurnover(f64),

    #[error("analysis failed: {0}")]
    Analysis(String),
}
