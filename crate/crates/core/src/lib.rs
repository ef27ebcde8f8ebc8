//! Critical branching random walks on the nonnegative integers with drift
//! `2 beta / sqrt(n)` toward a reflecting origin.
//!
//! The crate is organised bottom-up:
//!
//! * [`walk`]: single walkers, their kernel and the pathwise couplings.
//! * [`exact`]: exact m-step transition probabilities (DP and the spectral
//!   formula) and tail sums.
//! * [`offspring`], [`gw`]: critical offspring laws and Galton-Watson
//!   processes.
//! * [`brw`]: the aggregated branching random walk engine.
//! * [`feller`]: the exponential profile and Feller diffusion samplers.
//! * [`experiments`]: Monte Carlo reproductions with reports.

pub mod brw;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod feller;
pub mod gw;
pub mod offspring;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod validate;
pub mod walk;

pub use error::{Error, Result};
pub use offspring::{LawName, OffspringLaw};
pub use walk::WalkParams;
