use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

/// Failure of a subcommand, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("engine failure: {0}")]
    Engine(String),

    #[error("comparison failed: {0}")]
    Comparison(String),
}

impl CliError {
    /// Process exit code: 2 parse, 3 validation, 4 engine, 5 comparison.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Engine(_) => 4,
            CliError::Comparison(_) => 5,
        }
    }
}

impl From<qbattery::Error> for CliError {
    fn from(err: qbattery::Error) -> Self {
        use qbattery::Error as E;
        let msg = err.to_string();
        match err {
            E::InvalidSpec(_)
            | E::SiteOutOfRange { .. }
            | E::CollectiveDecayUnsupported(_)
            | E::InvalidState(_)
            | E::InvalidIntegrator(_)
            | E::OracleCap { .. }
            | E::UnsupportedObservable { .. } => CliError::Validation(msg),
            E::GridMismatch(_) => CliError::Comparison(msg),
            E::IllConditioned(_)
            | E::Eigen(_)
            | E::Unstable { .. }
            | E::Trajectory(_)
            | E::NoInteriorTurnover(_)
            | E::Analysis(_) => CliError::Engine(msg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_stable_codes() {
        let cap = CliError::from(qbattery::Error::OracleCap { n_sites: 14, cap: 12 });
        assert_eq!(cap.exit_code(), 3);
        let grid = CliError::from(qbattery::Error::GridMismatch("x".into()));
        assert_eq!(grid.exit_code(), 5);
        let unstable = CliError::from(qbattery::Error::Unstable { time: 1.0, detail: "x".into() });
        assert_eq!(unstable.exit_code(), 4);
    }
}
