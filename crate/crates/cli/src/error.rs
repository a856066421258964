use thiserror::Error;

/// Process exit classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExitClass {
    Success,
    Config,
    /// `check-weights` found a violated condition.
    Condition,
    /// A property the experiment asserts did not hold.
    Property,
    /// Quadrature, window or resource failure.
    Numerical,
}

impl ExitClass {
    pub fn code(self) -> i32 {
        match self {
            Self::Success => 0,
            Self::Config => 1,
            Self::Condition => 2,
            Self::Numerical => 3,
            Self::Property => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Success => "ok",
            Self::Config => "config_error",
            Self::Condition => "condition_failure",
            Self::Numerical => "numerical_failure",
            Self::Property => "property_failure",
        }
    }

    /// The more severe of two outcomes; numerical failures dominate.
    pub fn worst(self, other: Self) -> Self {
        self.max(other)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config syntax error: {0}")]
    ConfigSyntax(String),

    /// A config value violates the invariant of the module named.
    #[error("invalid config ({module}): {message}")]
    ConfigInvalid { module: &'static str, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("could not encode report: {0}")]
    Encode(String),
}

impl CliError {
    pub fn invalid(module: &'static str, message: impl ToString) -> Self {
        Self::ConfigInvalid { module, message: message.to_string() }
    }

    pub fn exit_class(&self) -> ExitClass {
        match self {
            Self::ConfigSyntax(_) | Self::ConfigInvalid { .. } => ExitClass::Config,
            Self::Io { .. } | Self::Encode(_) => ExitClass::Numerical,
        }
    }
}
