use std::path::Path;
use std::process::ExitCode;
use std::str::FromStr;

use cgrd::io::KeyValueConfig;
use clap::ValueEnum;
use serde_json::json;

/// Keys every subcommand accepts in a config file.
const COMMON_KEYS: [&str; 6] = ["seed", "out", "threads", "tol", "max-iter", "alpha0"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Numerical,
    Io,
}

impl ErrorKind {
    fn code(self) -> u8 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Numerical => "numerical",
            ErrorKind::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Numerical,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Io,
            message: message.into(),
        }
    }

    /// Prints the error as one JSON object on stderr and returns the exit code.
    pub fn report(&self) -> ExitCode {
        let body = json!({
            "error": self.kind.name(),
            "code": self.kind.code(),
            "message": self.message,
        });
        eprintln!("{body}");
        ExitCode::from(self.kind.code())
    }
}

impl From<cgrd::Error> for CliError {
    fn from(e: cgrd::Error) -> Self {
        let kind = match &e {
            cgrd::Error::Numerical(_) | cgrd::Error::Domain(_) => ErrorKind::Numerical,
            cgrd::Error::Io { .. } | cgrd::Error::Parse { .. } | cgrd::Error::Dimension(_) => ErrorKind::Io,
            cgrd::Error::Input(_) => ErrorKind::Usage,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

/// Values from the optional config file, consulted when a flag is absent.
pub struct Settings {
    file: Option<KeyValueConfig>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            None => None,
            Some(path) => Some(KeyValueConfig::load(path).map_err(|e| match e {
                cgrd::Error::Io { .. } => CliError::from(e),
                other => CliError::usage(other.to_string()),
            })?),
        };
        Ok(Self { file })
    }

    pub fn allow(&self, keys: &[&str]) -> Result<(), CliError> {
        let Some(file) = &self.file else { return Ok(()) };
        let allowed: Vec<&str> = COMMON_KEYS.iter().chain(keys).copied().collect();
        file.reject_unknown(&allowed)
            .map_err(|e| CliError::usage(e.to_string()))
    }

    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match &self.file {
            None => Ok(None),
            Some(file) => file.get(key).map_err(|e| CliError::usage(e.to_string())),
        }
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.pick(flag, key)?
            .ok_or_else(|| CliError::usage(format!("missing required value `{key}` (flag --{key} or config key)")))
    }

    pub fn pick_enum<T: ValueEnum>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        let Some(raw) = self.file.as_ref().and_then(|f| f.raw(key)) else {
            return Ok(None);
        };
        T::from_str(raw, true)
            .map(Some)
            .map_err(|_| CliError::usage(format!("invalid value `{raw}` for config key `{key}`")))
    }

    pub fn require_enum<T: ValueEnum>(&self, flag: Option<T>, key: &str) -> Result<T, CliError> {
        self.pick_enum(flag, key)?
            .ok_or_else(|| CliError::usage(format!("missing required value `{key}` (flag --{key} or config key)")))
    }
}
