//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("ambient spaces differ: {0} vs {1}")]
    AmbientMismatch(usize, usize),

    #[error("not a frame: {0}")]
    NotAFrame(String),

    #[error("invalid filtration: {0}")]
    InvalidFiltration(String),

    #[error("invalid valuation: {0}")]
    InvalidValuation(String),

    #[error("invalid cone: {0}")]
    InvalidCone(String),

    #[error("invalid fan: {0}")]
    InvalidFan(String),

    #[error("fan is not complete; this operation is only defined on complete fans")]
    NotComplete,

    #[error("cone is not a wall (codimension-1 face of exactly two maximal cones)")]
    NotAWall,

    #[error("fan supports differ")]
    SupportMismatch,

    #[error("not a refinement of the base fan")]
    NotARefinement,

    #[error("invalid piecewise linear function: {0}")]
    InvalidPlFunction(String),

    #[error("polytope is empty")]
    EmptyPolytope,

    #[error("polytope is unbounded")]
    UnboundedPolytope,

    #[error(
        "incompatible filtrations on cone {cone}: no frame of E splits every ray filtration \
         of this cone into lines with integral characters; subdividing the cone \
         (subdivide_by_hyperplanes) may repair the data"
    )]
    IncompatibleFiltrations { cone: String },

    #[error("not a tropical point: at x = ({witness}) the relation {relation} attains its minimum only once")]
    NotATropicalPoint { witness: String, relation: String },

    #[error("not in the real tropical variety: {0}")]
    NotInTropicalVariety(String),

    #[error("column values do not interpolate to a piecewise linear function: {0}")]
    InconsistentInterpolation(String),

    #[error("genericity verification failed after {0} retries; reseed")]
    GenericityFailure(u32),

    #[error("non-integral data: {0}")]
    NonIntegral(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code classification used by the command-line tool: domain
    /// errors (bad mathematical input) exit with 2, everything else 1.
    pub fn is_domain_error(&self) -> bool {
        matches!(
            self,
            Error::IncompatibleFiltrations { .. }
                | Error::NotATropicalPoint { .. }
                | Error::NotInTropicalVariety(_)
                | Error::InconsistentInterpolation(_)
        )
    }
}
