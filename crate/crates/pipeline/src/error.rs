use std::path::{Path, PathBuf};

use panelcap_core::cluster::ClusterError;
use panelcap_core::diagnostics::DiagnosticError;
use panelcap_core::estimators::EstimationError;
use panelcap_core::factor::FactorError;
use panelcap_core::panel::PanelError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("data: {0}")]
    Panel(#[from] PanelError),
    #[error("factor analysis: {0}")]
    Factor(#[from] FactorError),
    #[error("estimation: {0}")]
    Estimation(#[from] EstimationError),
    #[error("diagnostics: {0}")]
    Diagnostic(#[from] DiagnosticError),
    #[error("clustering: {0}")]
    Cluster(#[from] ClusterError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 for bad input or configuration, 3 when the data
    /// are well-formed but a computation breaks down, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        use EstimationError as E;
        use FactorError as F;
        match self {
            Self::Config(_) => EXIT_VALIDATION,
            Self::Io { .. } => EXIT_IO,
            Self::Panel(PanelError::Io(_)) => EXIT_IO,
            Self::Panel(_) => EXIT_VALIDATION,
            Self::Factor(F::Panel(_) | F::EmptyGroup(_) | F::OverlappingGroups(_) | F::MissingVariable(_)) => {
                EXIT_VALIDATION
            }
            Self::Factor(_) => EXIT_NUMERICAL,
            Self::Estimation(
                E::Panel(_) | E::DuplicateRegressor(_) | E::OutcomeAsRegressor(_) | E::TooFewYears | E::TooFewClusters(_),
            ) => EXIT_VALIDATION,
            Self::Estimation(_) => EXIT_NUMERICAL,
            Self::Diagnostic(DiagnosticError::SingleYear(_) | DiagnosticError::ShapeMismatch { .. }) => EXIT_VALIDATION,
            Self::Diagnostic(_) => EXIT_NUMERICAL,
            Self::Cluster(ClusterError::DegenerateInput { .. }) => EXIT_NUMERICAL,
            Self::Cluster(_) => EXIT_VALIDATION,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_separate_validation_from_numerics() {
        let missing = PipelineError::from(PanelError::MissingColumn("x".into()));
        assert_eq!(missing.exit_code(), EXIT_VALIDATION);
        let rank = PipelineError::from(EstimationError::RankDeficient(vec!["x".into()]));
        assert_eq!(rank.exit_code(), EXIT_NUMERICAL);
        let singular = PipelineError::from(FactorError::SingularCorrelation(0.0));
        assert_eq!(singular.exit_code(), EXIT_NUMERICAL);
        assert_eq!(PipelineError::Config("x".into()).exit_code(), EXIT_VALIDATION);
    }
}
