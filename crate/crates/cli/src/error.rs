use std::fmt;

use geom_deeponet::Error;

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configs or inputs. Exit code 2.
    Usage(String),
    /// Anything that went wrong while running. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Usage(_) | Error::Config(_) | Error::Parse { .. } | Error::Load(_) | Error::Resume(_) | Error::Mesh(_) => {
                CliError::Usage(msg)
            }
            Error::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => CliError::Usage(msg),
            _ => CliError::Runtime(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
