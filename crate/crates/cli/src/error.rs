use hte_mediation_core::ErrorKind;

/// Failure of a command, classified for the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    /// `error[input]: ...`, `error[numerical]: ...` or `error[internal]: ...`,
    /// always on one line.
    pub fn line(&self) -> String {
        let class = match self {
            CliError::Input(_) => "input",
            CliError::Numerical(_) => "numerical",
            CliError::Internal(_) => "internal",
        };
        format!("error[{class}]: {}", self.to_string().replace('\n', " "))
    }
}

impl From<hte_mediation_core::Error> for CliError {
    fn from(e: hte_mediation_core::Error) -> Self {
        match e.kind() {
            ErrorKind::Input => CliError::Input(e.to_string()),
            ErrorKind::Numerical => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<crate::io::IoError> for CliError {
    fn from(e: crate::io::IoError) -> Self {
        match e {
            crate::io::IoError::Dataset(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
