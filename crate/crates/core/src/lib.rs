//! Laboratory library for training small single-hidden-layer MLPs on Boolean
//! formula tasks and statically interpreting the learned weights through
//! sign-based combinatorics: witness partitions, feature channel codes,
//! pattern censuses, and embedding disentanglement.
//!
//! The crate is organized around the stages of an experiment:
//!
//! - [`formula`]: represent, generate, evaluate, and transform DNF/CNF/OR
//!   Boolean formulas used as hidden target functions.
//! - [`sampler`]: labeled input generation for each training distribution,
//!   with every label validated against the formula oracle.
//! - [`trainer`]: from-scratch MLP (optional fixed embedding), Adam on BCE,
//!   snapshotting, execution traces.
//! - [`patterns`]: sign-pattern census of trained weights, matched random
//!   baselines, bias statistics, packing limit.
//! - [`codes`]: feature channel code extraction, overlap statistics, formula
//!   reconstruction by column correlation, and the sliding-window decoder.
//! - [`disentangle`]: identity / Hadamard / random-symmetric embeddings,
//!   left-inversion, and recovery of the coding matrix `C1 = W1 * C0`.
//! - [`construct`]: hand-planted feature-channel networks with exact Boolean
//!   behavior, the ground truth for code extraction.
//!
//! Everything is deterministic given a seed; see [`rng::mix`] for how seeds
//! are derived for parallel streams.

pub mod codes;
pub mod construct;
pub mod disentangle;
mod error;
pub mod formula;
pub mod matrix;
pub mod patterns;
pub mod rng;
pub mod sampler;
pub mod trainer;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
