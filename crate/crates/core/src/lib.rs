//! Health-aware recipe recommendation.
//!
//! The pipeline has three stages: ingredient-based recipe retrieval over an
//! inverted index ([`retrieval`]), a word-class-interaction recurrent
//! convolutional network that profiles users' health tags from their posts
//! ([`profiler`]), and a category-aware hierarchical memory network that
//! ranks the retrieved recipes ([`recommender`]). [`corpus`] generates a
//! seeded synthetic dataset with the same structure as the real one, and
//! [`eval`] holds the ranking and multi-label metrics.

pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod numerics;
pub mod profiler;
pub mod recommender;
pub mod retrieval;
pub mod serving;

pub use error::{Error, Result};
