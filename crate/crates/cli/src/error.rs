use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ernm::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Exists(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> CliError {
        CliError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// Diagnostic category and process exit code.
    pub fn category(&self) -> (&'static str, i32) {
        use ernm::Error as E;
        match self {
            CliError::Usage(_) | CliError::Core(E::InvalidArgument(_)) => ("usage", 2),
            CliError::Io(_) | CliError::Exists(_) | CliError::Core(E::Io(_) | E::Permission(_)) => ("io", 3),
            CliError::Core(E::Csv(e)) if matches!(e.kind(), csv::ErrorKind::Io(_)) => ("io", 3),
            CliError::Core(E::Parse { .. } | E::Csv(_)) => ("parse", 4),
            CliError::NotConverged(_) => ("convergence", 5),
            CliError::Core(E::Model(_)) => ("model", 6),
            CliError::Core(E::Numerical(_)) => ("numerical", 6),
            CliError::Core(E::StateSpace(_)) => ("state-space", 6),
            CliError::Other(_) => ("internal", 6),
        }
    }

    /// Longer, human-oriented explanation printed after the diagnostic line.
    pub fn detail(&self) -> &'static str {
        match self.category().0 {
            "usage" => "check the command-line flags and model settings (see --help)",
            "io" => "an input could not be read or an output could not be written",
            "parse" => "an input file is malformed; the position is given above",
            "convergence" => "estimation did not converge; artifacts were written but the estimates are unreliable",
            "state-space" => "the network is too large to enumerate; use the MCMC commands instead",
            _ => "the run was aborted",
        }
    }
}

/// Flattens a message to one line so the diagnostic stays machine-parsable.
pub fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}
