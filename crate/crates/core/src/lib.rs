//! A from-scratch neural sequence-labeling toolkit for named entity
//! recognition.
//!
//! The model scores each word of a sentence with a two-layer network over a
//! context window of joint word-level and character-level embeddings, where
//! the character-level part is a convolution with max pooling over the
//! word's characters. Sentence-level structure comes from learned tag
//! transition scores: training maximizes the sentence-level conditional
//! log-likelihood (normalized by dynamic programming), and tagging uses
//! exact Viterbi decoding. Backpropagation is hand-written and covered by
//! finite-difference checks.
//!
//! Three variants are wired in: the joint model (`charwnn`), a word-only
//! model with optional capitalization/suffix features (`wnn`), and a
//! character-only model (`charnn`).
//!
//! The numeric core is generic over the scalar type via [`num::Scalar`];
//! the aliases below fix the two supported precisions. Training and model
//! files use `f64`.

pub mod char_conv;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod inference;
pub mod model;
pub mod num;
pub mod persist;
pub mod scorer;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use num::Scalar;

/// Double-precision model (the default for training and persistence).
pub type Model64 = model::ModelParams<f64>;
/// Single-precision model.
pub type Model32 = model::ModelParams<f32>;
/// Double-precision embedding table.
pub type EmbeddingTable64 = features::EmbeddingTable<f64>;
/// Single-precision embedding table.
pub type EmbeddingTable32 = features::EmbeddingTable<f32>;
/// Double-precision emission lattice.
pub type ScoreLattice64 = inference::ScoreLattice<f64>;
/// Single-precision emission lattice.
pub type ScoreLattice32 = inference::ScoreLattice<f32>;
