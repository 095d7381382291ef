//! Executable generic chaining for φ-sub-Gaussian processes.
//!
//! The crate is organised bottom-up:
//!
//! - [`orlicz`]: Orlicz N-functions, Young–Fenchel conjugates, inverses and
//!   the Q / Δ2 condition audits.
//! - [`metric`]: finite metric spaces, covering and entropy numbers, greedy
//!   nets and admissible sequences.
//! - [`functionals`]: the chaining functionals γ_{φ,p}, γ̃_{φ,p}, the Dudley
//!   integral and the finite-cardinality bound.
//! - [`scheme`]: (a,r)-separation, growth-condition audits and the
//!   partition-building construction driven by a set functional.
//! - [`subgaussian`]: drivers, empirical τ_φ, increment tail audits and the
//!   moment/tail conversion helpers.
//! - [`sim`]: Monte Carlo audits of sup-process moment and tail bounds and of
//!   order-2 Gaussian chaos.
//! - [`apps`]: Johnson–Lindenstrauss distortion experiments, descent cones,
//!   conic singular values, small-ball bounds and ℓ1 recovery.

pub mod apps;
pub mod error;
pub mod functionals;
pub mod linalg;
pub mod metric;
pub mod orlicz;
pub mod rng;
pub mod scheme;
pub mod sim;
pub mod stats;
pub mod subgaussian;

pub use error::{Error, Result};
