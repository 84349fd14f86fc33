use std::fmt;

/// Input errors (bad files, flags, dimension mismatches) exit with 2,
/// failures while running exit with 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Runtime,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn input(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: ErrorKind::Input,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: ErrorKind::Runtime,
            error: error.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Runtime => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait ResultExt<T> {
    fn input(self, context: impl fmt::Display) -> CliResult<T>;
    fn runtime(self, context: impl fmt::Display) -> CliResult<T>;
}

impl<T, E> ResultExt<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn input(self, context: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::input(e.into().context(context.to_string())))
    }

    fn runtime(self, context: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError::runtime(e.into().context(context.to_string())))
    }
}
