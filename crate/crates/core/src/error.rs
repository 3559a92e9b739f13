use thiserror::Error;

use crate::solver::SolveStatus;

#[derive(Debug, Error)]
pub enum Error {
    /// Model data breaks a structural invariant (probabilities, action sets, indices).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// One or more validation failures, all reported together.
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("goal state {0} is not absorbing")]
    NonAbsorbingGoal(usize),

    #[error("cost condition c(s,a) >= beta*log|A(s)| violated at {violations} transient state(s) (worst margin {worst_margin:.6})")]
    CostCondition { violations: usize, worst_margin: f64 },

    #[error("{stage}: program is infeasible")]
    Infeasible { stage: String },

    #[error("{stage}: solver finished with status {status:?}")]
    Solver { stage: String, status: SolveStatus },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::InvalidModel(_)
            | Error::InvalidArgument(_)
            | Error::NonAbsorbingGoal(_)
            | Error::CostCondition { .. }
            | Error::Json(_) => 2,
            Error::Infeasible { .. } => 3,
            Error::Solver { .. } | Error::Numerical(_) => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
