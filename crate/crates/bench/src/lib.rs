//! Sweep harness for the measurement-count experiment: for each `k` in a
//! grid, take the first `k` rows of a fixed sensing matrix, solve with the
//! manifold method and the l2,1 baseline, and record the relative error.

pub mod cli;
pub mod config;
pub mod plot;
pub mod records;
pub mod summary;
pub mod sweep;

pub use config::{Method, SweepConfig};
pub use records::{SummaryRow, SweepRecord};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] jointspar::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl BenchError {
    /// Process exit code: 1 for bad input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Core(jointspar::Error::NumericFailure(_))
            | BenchError::Core(jointspar::Error::RankDeficient { .. })
            | BenchError::Core(jointspar::Error::DegenerateRank(_)) => 2,
            _ => 1,
        }
    }
}
