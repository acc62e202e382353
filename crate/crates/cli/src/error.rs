use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical nonconvergence: {0}")]
    NonConvergence(String),

    #[error("interrupted after {done} of {total} points; rerun with --resume to continue")]
    Interrupted { done: usize, total: usize },

    #[error(transparent)]
    Core(#[from] mtp_amp::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// nonconvergence, 4 for a resumable interruption, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use mtp_amp::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Interrupted { .. } => 4,
            CliError::Core(e) => match e {
                E::InvalidDimension(_)
                | E::InvalidProfile(_)
                | E::CouplingValidation(_)
                | E::Domain(_)
                | E::Parse(_)
                | E::Json(_) => 2,
                E::Precision(_) | E::NonConvergence(_) | E::Divergence { .. } | E::Conditioning(_) => 3,
                _ => 1,
            },
            CliError::Io(_) | CliError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
