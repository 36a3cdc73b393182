//! Process-level error classification: every failure maps to an exit code.

use std::fmt;

/// Config and I/O problems exit with 1, numerical failures with 2. The
/// distinction lets batch scripts tell a bad input file from a run that hit
/// a stability bound or a failed inversion.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gldp_core::Error> for CliError {
    fn from(e: gldp_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub fn io_err(context: &str, e: std::io::Error) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_config_from_numerics() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Io("x".into()).exit_code(), 1);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 2);
    }

    #[test]
    fn core_errors_classify_by_kind() {
        let num: CliError = gldp_core::Error::BlowUp {
            step: 3,
            value: 1e9,
        }
        .into();
        assert_eq!(num.exit_code(), 2);
        let cfg: CliError = gldp_core::Error::InvalidInput("bad".into()).into();
        assert_eq!(cfg.exit_code(), 1);
    }
}
