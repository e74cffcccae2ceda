//! Topological analysis of transformer attention maps.
//!
//! The pipeline turns one attention head's `n × n` matrix into a weighted
//! graph ([`graph`]), builds a filtered simplicial complex on it
//! ([`filtration`]), computes persistence diagrams ([`homology`]) and
//! rasterizes them into persistence images ([`image`]). Stacks of images,
//! one group of channels per head, feed a small convolutional classifier
//! ([`classifier`]) whose input gradients score the heads ([`heads`]).
//! [`distance`] compares diagrams with the p-Wasserstein distance and
//! [`eval`] holds metrics and the paired-input robustness harness.
//!
//! All datasets cross process boundaries through [`tensor_io`]: a JSON
//! manifest next to raw little-endian `f32` files.

pub mod classifier;
pub mod distance;
pub mod error;
pub mod eval;
pub mod filtration;
pub mod graph;
pub mod heads;
pub mod homology;
pub mod image;
pub mod synthetic;
pub mod tensor_io;

pub use error::{Error, Result};
