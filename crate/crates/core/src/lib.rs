//! From-scratch toolkit for rapid classification of crisis-related short
//! texts: a convolutional classifier over fine-tuned word embeddings (with an
//! optional fixed TF-IDF channel), two domain-adaptation methods for
//! out-of-event data, linear baselines, and the evaluation protocol around
//! them.
//!
//! Modules follow the pipeline: [`textprep`] normalizes and tokenizes raw
//! tweets, [`corpus`] loads and splits labeled datasets and builds the
//! vocabulary, [`embeddings`] holds the shared look-up table, [`cnn`] is the
//! model with exact analytic gradients, [`train`] runs ADADELTA with dropout
//! and early stopping, [`features`] and [`baselines`] cover the TF-IDF /
//! linear-model track, and [`eval`] computes the reported metrics.

pub mod baselines;
pub mod cnn;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod numerics;
pub mod textprep;
pub mod train;

pub use error::{Error, Result};
