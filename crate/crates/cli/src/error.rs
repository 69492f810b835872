use std::path::PathBuf;

use onoma_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{origin}:{line}: {message}")]
    Format { origin: String, line: usize, message: String },
    #[error("{origin}: {message}")]
    Input { origin: String, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Format { .. } | CliError::Input { .. } | CliError::Io { .. } => 2,
            CliError::Config(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }

    pub fn format(origin: &str, line: usize, message: impl ToString) -> Self {
        CliError::Format { origin: origin.to_string(), line, message: message.to_string() }
    }

    pub fn input(origin: &str, message: impl ToString) -> Self {
        CliError::Input { origin: origin.to_string(), message: message.to_string() }
    }

    /// Classifies a library error raised while processing `origin`.
    pub fn core(origin: &str, e: CoreError) -> Self {
        match e {
            CoreError::InvalidNGramConfig(_)
            | CoreError::InvalidClusterCount { .. }
            | CoreError::InvalidTrainFraction(_)
            | CoreError::InvalidAlpha(_)
            | CoreError::InvalidSynthSpec(_)
            | CoreError::CollisionLimit(_) => CliError::Config(e.to_string()),
            CoreError::NonFinite { .. } => CliError::Invariant(e.to_string()),
            CoreError::InvalidSurname(..)
            | CoreError::UnknownCountry(_)
            | CoreError::InvalidCountryCode(_)
            | CoreError::NonPositiveCount
            | CoreError::EmptyCountry(_)
            | CoreError::UnknownSurname(_)
            | CoreError::InvalidShares(_)
            | CoreError::EmptyVocabulary
            | CoreError::TooFewCountries { .. }
            | CoreError::OverrideUnknownCountry(_)
            | CoreError::OverrideUnknownRegion(_)
            | CoreError::OverrideEmptiesRegion(_)
            | CoreError::UncoveredCountries(_)
            | CoreError::RegionTooSmall { .. }
            | CoreError::EmptyTrainingSet
            | CoreError::EmptyRegion(_)
            | CoreError::UnknownLabel(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::NegativeCount
            | CoreError::ZeroColumn(_)
            | CoreError::ZeroRow(_)
            | CoreError::NotStochastic(_)
            | CoreError::InvalidPriors(_)
            | CoreError::NegativeGuess
            | CoreError::EmptyPopulation
            | CoreError::RegionMismatch
            | CoreError::NegativeEntry => CliError::input(origin, e),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Attaches an origin to library results.
pub trait Context<T> {
    fn context(self, origin: &str) -> Result<T>;
}

impl<T> Context<T> for onoma_core::Result<T> {
    fn context(self, origin: &str) -> Result<T> {
        self.map_err(|e| CliError::core(origin, e))
    }
}
