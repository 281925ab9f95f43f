//! Scenario runner for the jamming follow-the-leader robot model: scenario
//! files, run orchestration, CSV/SVG reports, comparisons and the
//! reproduction suite.

pub mod compare;
pub mod report;
pub mod run;
pub mod scenario;
pub mod suite;

use jamsnake_core::Error as ModelError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o: {0}")]
    Io(String),
    #[error("acceptance check failed: {0}")]
    Acceptance(String),
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

impl SimError {
    /// Process exit code: 1 invalid input, 2 solver or controller failure,
    /// 3 failed acceptance check.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Validation(_) | SimError::Io(_) => 1,
            SimError::Model(
                ModelError::InvalidConfig(_) | ModelError::InvalidTrajectory(_) | ModelError::TrajectoryTooShort { .. },
            ) => 1,
            SimError::Model(_) => 2,
            SimError::Acceptance(_) => 3,
        }
    }
}
