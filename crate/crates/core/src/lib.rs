//! Finite-dimensional quantum channel calculus.
//!
//! Channels are stored in the Schrödinger picture through their Choi matrix
//! on `H_in ⊗ H_out` (input factor first, unnormalized, `tr J = d_in`), so
//! complete positivity is `J ⪰ 0` and trace preservation is `Tr_out J = I`.
//! On top of the representation layer the crate provides the concatenation
//! preorder, conjugate channels, and compatibility of pairs and n-tuples of
//! channels, each decided as a certified semidefinite feasibility problem.

pub mod channel;
pub mod compat;
pub mod error;
pub mod linalg;
pub mod sdp;

pub use channel::{Channel, Instrument, KrausForm, Observable, StinespringForm, StochasticMatrix};
pub use error::Error;
pub use linalg::{CMatrix, DimTuple};
pub use sdp::{SdpProblem, SdpStatus, SdpVerdict};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
