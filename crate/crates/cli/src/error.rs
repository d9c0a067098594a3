use std::path::PathBuf;

use polemos_core::Error;
use serde::Serialize;

/// Exit code for missing input files.
pub const EXIT_MISSING_INPUT: i32 = 2;
/// Exit code for inputs or settings that fail validation.
pub const EXIT_VALIDATION: i32 = 3;
/// Exit code for every other failure.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug)]
pub enum CliError {
    MissingInput(PathBuf),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::MissingInput(p) => write!(f, "input not found: {}", p.display()),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::MissingInput(_) => "missing_input",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput(_) => EXIT_MISSING_INPUT,
            CliError::Core(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => {
                EXIT_MISSING_INPUT
            }
            CliError::Core(Error::NotFound(_)) => EXIT_MISSING_INPUT,
            CliError::Core(
                Error::Validation(_) | Error::Parse { .. } | Error::Config(_) | Error::Json(_) | Error::Format(_),
            ) => EXIT_VALIDATION,
            CliError::Core(_) => EXIT_FAILURE,
        }
    }

    /// One-line machine-readable description for stderr.
    pub fn json_line(&self) -> String {
        #[derive(Serialize)]
        struct Line<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Line {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .expect("error line serializes")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Fails with [`CliError::MissingInput`] unless `path` exists.
pub fn require(path: &std::path::Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::MissingInput("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Validation("v".into())).exit_code(), 3);
        assert_eq!(CliError::Core(Error::NotFound("model".into())).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Client("down".into())).exit_code(), 1);
        let line = CliError::MissingInput("a b.txt".into()).json_line();
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["error"], "missing_input");
        assert_eq!(v["exit_code"], 2);
    }
}
