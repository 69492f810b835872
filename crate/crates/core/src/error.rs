use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid surname {0:?}: {1}")]
    InvalidSurname(String, &'static str),
    #[error("unknown country code {0:?}")]
    UnknownCountry(String),
    #[error("invalid country code {0:?}")]
    InvalidCountryCode(String),
    #[error("count must be a positive integer")]
    NonPositiveCount,
    #[error("country {0} has no occurrences")]
    EmptyCountry(String),
    #[error("surname {0:?} has no occurrences")]
    UnknownSurname(String),
    #[error("shares must be nonnegative and sum to 1 (sum = {0})")]
    InvalidShares(f64),
    #[error("invalid n-gram configuration: {0}")]
    InvalidNGramConfig(&'static str),
    #[error("vocabulary is empty: no trainable features")]
    EmptyVocabulary,
    #[error("need at least {needed} eligible countries, found {found}")]
    TooFewCountries { needed: usize, found: usize },
    #[error("non-finite value in feature matrix at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("k must be between 1 and {leaves}, got {k}")]
    InvalidClusterCount { k: usize, leaves: usize },
    #[error("override refers to unknown country {0:?}")]
    OverrideUnknownCountry(String),
    #[error("override refers to unknown region {0:?}")]
    OverrideUnknownRegion(String),
    #[error("overrides leave region {0:?} without countries")]
    OverrideEmptiesRegion(String),
    #[error("countries not covered by the typology: {}", .0.join(", "))]
    UncoveredCountries(Vec<String>),
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidTrainFraction(f64),
    #[error("region {region:?} has {count} names, needs at least {needed}")]
    RegionTooSmall { region: String, count: usize, needed: usize },
    #[error("smoothing parameter must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("region {0:?} has no training names")]
    EmptyRegion(String),
    #[error("label {0:?} is not a model region")]
    UnknownLabel(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("confusion counts must be finite and nonnegative")]
    NegativeCount,
    #[error("column {0:?} of the confusion matrix sums to zero")]
    ZeroColumn(String),
    #[error("row {0:?} of the confusion matrix sums to zero")]
    ZeroRow(String),
    #[error("row {0:?} is not a probability vector")]
    NotStochastic(String),
    #[error("priors must be positive and sum to 1 (sum = {0})")]
    InvalidPriors(f64),
    #[error("guessed counts must be finite and nonnegative")]
    NegativeGuess,
    #[error("population is empty")]
    EmptyPopulation,
    #[error("region sets differ between distributions")]
    RegionMismatch,
    #[error("canberra distance needs nonnegative entries")]
    NegativeEntry,
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),
    #[error("could not generate a unique surname after {0} attempts")]
    CollisionLimit(usize),
}
