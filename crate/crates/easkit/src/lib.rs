//! Toolkit for measuring how machine translation shifts the emotional
//! attitude of ambiguous words across identity settings, and for the
//! surrounding pipeline: corpus expansion from slotted templates, seed word
//! selection, translation backends, word alignment, and report aggregation.

pub mod agreement;
pub mod align;
pub mod cache;
pub mod config;
pub mod corpus;
pub mod error;
pub mod grammar;
pub mod identity;
pub mod metrics;
pub mod parallel;
pub mod pipeline;
pub mod report;
pub mod scorer;
pub mod scoring;
pub mod seedselect;
pub mod templates;
#[cfg(test)]
pub(crate) mod testhttp;
pub mod translate;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
