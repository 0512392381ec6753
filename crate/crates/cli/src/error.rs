use std::path::PathBuf;

use ionaddr_core::Error as CoreError;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    /// File could not be read or written.
    pub const IO: u8 = 1;
    /// Bad command line, including unknown presets.
    pub const USAGE: u8 = 2;
    /// Scenario is not valid JSON or does not match the format.
    pub const PARSE: u8 = 3;
    /// A value violates a physical or geometric invariant.
    pub const INVARIANT: u8 = 4;
    /// Design targets cannot be met.
    pub const INFEASIBLE: u8 = 5;
    /// A solver or focus search failed to converge.
    pub const CONVERGENCE: u8 = 6;
    /// The simulation grid is too small or too coarse for the beam.
    pub const PROPAGATION_WINDOW: u8 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: CoreError,
    },
}

impl CliError {
    pub fn stage(stage: &'static str) -> impl FnOnce(CoreError) -> Self {
        move |source| CliError::Stage { stage, source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => exit::IO,
            CliError::Usage(_) => exit::USAGE,
            CliError::Parse { .. } => exit::PARSE,
            CliError::Stage { source, .. } => match source.root() {
                CoreError::Infeasible { .. } => exit::INFEASIBLE,
                CoreError::Convergence { .. } | CoreError::FocusNotBracketed { .. } | CoreError::Singular(_) => {
                    exit::CONVERGENCE
                }
                CoreError::PropagationWindow { .. } | CoreError::Sampling { .. } => exit::PROPAGATION_WINDOW,
                _ => exit::INVARIANT,
            },
        }
    }
}
