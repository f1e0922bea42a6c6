use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("node set is not unisolvent for degree {degree}: rank {rank} < {required}")]
    Unisolvent {
        degree: usize,
        rank: usize,
        required: usize,
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: duplicate node ({x}, {y}, {z}) first seen on line {first}")]
    DuplicateNode {
        line: u64,
        first: u64,
        x: f64,
        y: f64,
        z: f64,
    },

    #[error("octree depth exceeded level {0}; nodes are coincident or nearly so")]
    LevelCap(usize),

    #[error("logic error: {0}")]
    Logic(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("operator is not definite: {0}")]
    Indefinite(String),

    #[error("inner solve on level {level} did not converge in {iterations} iterations (residual {residual:.3e})")]
    Preconditioner {
        level: i32,
        iterations: usize,
        residual: f64,
    },

    #[error("regression model error: {0}")]
    Model(String),

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
