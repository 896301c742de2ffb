use std::fmt;
use std::io;
use std::path::Path;

/// Process exit codes. Stable: scripts match on them.
pub mod exit {
    pub const INTERNAL: i32 = 1;
    pub const INVALID_INPUT: i32 = 2;
    pub const SHAPE_MISMATCH: i32 = 3;
    pub const UNWRITABLE_OUTPUT: i32 = 4;
    pub const MISSING_INPUT: i32 = 5;
    pub const USAGE: i32 = 64;
}

/// A failure reported as a single `CODE: message` line on stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub exit: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, exit: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            exit,
            message: message.into(),
        }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        Self::new("MISSING_INPUT", exit::MISSING_INPUT, message)
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("USAGE", exit::USAGE, message)
    }

    pub fn read(path: &Path, err: io::Error) -> Self {
        if err.kind() == io::ErrorKind::NotFound {
            Self::missing(format!("{} does not exist", path.display()))
        } else {
            Self::new("IO_ERROR", exit::INTERNAL, format!("reading {}: {err}", path.display()))
        }
    }

    pub fn write(path: &Path, err: io::Error) -> Self {
        Self::new(
            "UNWRITABLE_OUTPUT",
            exit::UNWRITABLE_OUTPUT,
            format!("writing {}: {err}", path.display()),
        )
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one line, whatever the message contains
        let message = self.message.replace(['\n', '\r'], " ");
        write!(f, "{}: {}", self.code, message)
    }
}

impl From<dep_core::Error> for CliError {
    fn from(err: dep_core::Error) -> Self {
        use dep_core::Error as E;
        let exit = match &err {
            E::ShapeMismatch(_)
            | E::RemapInconsistent(_)
            | E::VocabSizeMismatch { .. }
            | E::InconsistentInputs { .. } => exit::SHAPE_MISMATCH,
            E::Io(_) => exit::INTERNAL,
            _ => exit::INVALID_INPUT,
        };
        CliError::new(err.code(), exit, err.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
