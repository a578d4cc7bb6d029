use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("grid function has shape {found_t}x{found_x}, expected {expected_t}x{expected_x}")]
    ShapeMismatch {
        expected_t: usize,
        expected_x: usize,
        found_t: usize,
        found_x: usize,
    },

    #[error("control value {value} at (time index {time_index}, node {node}) is outside [{lo}, {hi}]")]
    ControlOutOfBounds {
        time_index: usize,
        node: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("singular tridiagonal system at time index {time_index} (pivot row {row})")]
    SingularSystem { time_index: usize, row: usize },

    #[error("non-finite Hamiltonian at t = {t}, y = {y}")]
    NonFiniteHamiltonian { t: f64, y: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
