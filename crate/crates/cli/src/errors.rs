//! Error-to-exit-code mapping.
//!
//! Every failure is printed to standard error as `ERROR:<category>:<message>`.
//! Validation and I/O problems exit with 1, numerical failures (singularity
//! beyond the escalation policies, degenerate weights) with 2.

use nested_krig::Error as CoreError;

#[derive(Debug)]
pub struct CliError {
    pub category: &'static str,
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: String) -> Self {
        CliError {
            category: "validation",
            exit_code: 1,
            message,
        }
    }

    pub fn io(message: String) -> Self {
        CliError {
            category: "io",
            exit_code: 1,
            message,
        }
    }

    pub fn numeric(message: String) -> Self {
        CliError {
            category: "numeric",
            exit_code: 2,
            message,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        if err.is_numerical() {
            CliError::numeric(err.to_string())
        } else {
            CliError::validation(err.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::io(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::io(err.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ERROR:{}:{}", self.category, self.message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_exit_codes() {
        let validation: CliError = CoreError::InvalidArgument("bad".into()).into();
        assert_eq!(validation.exit_code, 1);
        assert_eq!(validation.category, "validation");

        let numeric: CliError = CoreError::DegenerateWeights("zero denominator".into()).into();
        assert_eq!(numeric.exit_code, 2);
        assert_eq!(numeric.category, "numeric");

        let singular: CliError = CoreError::SingularMatrix {
            detail: "dup rows".into(),
        }
        .into();
        assert_eq!(singular.exit_code, 2);
        assert!(singular.to_string().starts_with("ERROR:numeric:"));
    }
}
