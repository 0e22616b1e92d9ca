//! Simulation of a three-node entangled clock network in a static
//! gravitational field.

pub mod acceptance;
pub mod analytic;
pub mod config;
pub mod foundations;
pub mod protocol;
pub mod qsim;
pub mod sampling;
pub mod spacetime;
pub mod spectra;

use thiserror::Error;

/// Any failure surfaced by the crate's front ends.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Spacetime(#[from] spacetime::SpacetimeError),
    #[error(transparent)]
    Analytic(#[from] analytic::AnalyticError),
    #[error(transparent)]
    Qsim(#[from] qsim::QsimError),
    #[error(transparent)]
    Protocol(#[from] protocol::ProtocolError),
    #[error(transparent)]
    Sampling(#[from] sampling::SamplingError),
    #[error(transparent)]
    Spectra(#[from] spectra::SpectraError),
    #[error(transparent)]
    Foundations(#[from] foundations::FoundationsError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for problems with the user's configuration rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
