//! Polarity lexicon transfer across languages through linearly aligned
//! word embeddings, with the tweet classification pipeline used to check
//! the transferred lexicons.
//!
//! The flow is: load two embedding tables ([`embeddings`]), fit a linear
//! map on a bilingual dictionary ([`alignment`]), push a source lexicon
//! through it ([`lexicon`]), and measure the result as classifier features
//! ([`features`], [`evaluation`]). [`experiments`] wires the steps into
//! commands and sweeps.

pub mod alignment;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod experiments;
pub mod features;
pub mod lexicon;
pub mod numfmt;

pub use error::{Error, Result};
pub use exec::Exec;
