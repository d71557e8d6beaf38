//! Rotation-sensitivity testing and Varimax concept decomposition for
//! embedding matrices.
//!
//! The crate is organised bottom-up:
//!
//! * [`embedding_io`] loads, validates, scales and persists matrices and models.
//! * [`spectra`] holds the truncated SVD, Haar rotations and the row-wise
//!   rotation-invariant resampler.
//! * [`varimax`] evaluates and maximizes the Varimax objective.
//! * [`hypotest`] builds the kurtosis and Varimax statistics into a
//!   Monte-Carlo test for rotation-sensitive structure.
//! * [`concepts`] decomposes embeddings into a sparse loading matrix and an
//!   orthonormal concept dictionary, and interprets, combines and removes
//!   concepts.
//! * [`eval`] contains downstream metrics, synthetic generators and the
//!   numerical checks for the identifiability and fixed-dictionary results.
//! * [`cli`] wires everything into the `rotsense` batch tool.

pub mod concepts;
pub mod embedding_io;
mod error;
pub mod eval;
pub mod hypotest;
pub mod linalg;
pub mod rng;
pub mod spectra;
pub mod varimax;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};

pub use concepts::{ConceptInterpretation, ConceptModel, SpuriousReport};
pub use embedding_io::{EmbeddingMatrix, NormMode, ScalingRecord, TextCorpus};
pub use hypotest::{PConvention, TestParams, TestReport};
pub use spectra::{RotationMatrix, TruncatedSvd};
pub use varimax::{VarimaxParams, VarimaxResult};

/// Version string embedded in every persisted artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
