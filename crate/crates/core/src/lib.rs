//! Surname-origin inference.
//!
//! The pipeline turns raw `(surname, country, count)` observations into
//! origin estimates for arbitrary populations of surnames:
//!
//! 1. [`corpus`] keeps only surnames whose normalized frequency is
//!    concentrated in a single country (Herfindahl–Hirschman filter) and
//!    assigns each of them to that country.
//! 2. [`typology`] clusters countries by the character n-gram profile of their
//!    core names (Ward linkage) and cuts the dendrogram into world regions.
//! 3. [`classifier`] trains a multinomial naive Bayes model over the
//!    [`features`] of region-labeled surnames.
//! 4. [`correction`] turns the evaluation confusion matrix into a
//!    row-stochastic operator mapping guessed counts to actual counts.
//! 5. [`diversity`] compares corrected origin distributions of populations
//!    against a reference and groups the resulting profiles.
//!
//! [`synth`] generates Markov-chain corpora with known ground truth for
//! end-to-end validation.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled; all file formats and the command line live in the `onoma` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod classifier;
pub mod cluster;
pub mod corpus;
pub mod correction;
pub mod diversity;
mod error;
pub mod features;
pub(crate) mod math;
pub mod synth;
pub mod text;
pub mod typology;

pub use error::{Error, Result};
