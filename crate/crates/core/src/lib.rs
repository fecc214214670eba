//! Tools for building a labeled hate-speech corpus and training classifiers on it.
//!
//! - [`annotation`]: dual annotation with a score threshold and third-reviewer
//!   dispute resolution, an append-only event log and an HTTP API.
//! - [`corpus`], [`features`], [`classifiers`], [`eval`]: normalization,
//!   count / TF-IDF / hashing / pretrained-embedding vectorizers, five classical
//!   models and a model-by-embedding evaluation grid.
//! - [`microformer`]: a small transformer encoder classifier with hand-written
//!   backpropagation and low-rank adapters.
//! - [`synthetic`]: the generator behind the bundled fixtures.
//! - [`cli`]: the `hatelab` command line.
//!
//! The `examples/` directory has one runnable program per capability:
//!
//! ```text
//! cargo run --example annotation_workflow
//! cargo run --example annotation_service
//! cargo run --example vectorizers
//! cargo run --release --example classical_grid
//! cargo run --release --example lora_finetune
//! cargo run --example generate_fixtures
//! ```

pub mod annotation;
pub mod classifiers;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod microformer;
pub mod synthetic;

pub use error::{Error, Result};
