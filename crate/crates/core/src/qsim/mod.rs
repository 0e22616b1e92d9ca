//! Pure-state simulator for registers of mixed qubit/qutrit sites.
//!
//! Gates act on a named two-level *sector* of a site and leave the third
//! level untouched, mirroring how the clock and nuclear-spin transitions of
//! one atom are driven independently.

mod level;
mod measure;
mod register;

pub use level::{Level, Sector, SectorUnitary, SiteSpec};
pub use measure::{
    sample_index, Basis, Draw, Forced, MeasurementRecord, OutcomeSource, ProjectorSet, Target,
};
pub use register::{Control, Register, MAX_AMPLITUDES};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QsimError {
    #[error("invalid site: {0}")]
    BadSite(String),
    #[error("site index {0} out of range")]
    SiteOutOfRange(usize),
    #[error("site {site} has no level {level}")]
    LevelAbsent { site: usize, level: Level },
    #[error("sector {0} needs two distinct levels")]
    BadSector(Sector),
    #[error("control and target must be different sites (site {0})")]
    SameSite(usize),
    #[error("matrix is not unitary")]
    NotUnitary,
    #[error("basis vectors are not orthonormal")]
    NotOrthonormal,
    #[error("projectors are not mutually orthogonal")]
    NotOrthogonal,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state has zero norm")]
    ZeroState,
    #[error("register would exceed {0} amplitudes")]
    TooLarge(usize),
    #[error("site {site} is not in a definite level (max population {max_population})")]
    NotDefinite { site: usize, max_population: f64 },
    #[error("forced outcome {index} has Born weight {weight}")]
    ImpossibleOutcome { index: usize, weight: f64 },
    #[error("forced outcome list exhausted")]
    ForcedExhausted,
}
