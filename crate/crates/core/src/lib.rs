//! Distributed computation of entropy-regularized Wasserstein barycenters.
//!
//! Agents on a connected graph each hold one discrete distribution. They run an
//! accelerated gradient method on the dual of the barycenter problem and talk
//! only to their neighbors. Every agent ends up with the same barycenter.

pub mod baselines;
pub mod cli;
pub mod dfgm;
pub mod distributions;
pub mod error;
pub mod network;
pub mod ot;
pub mod simulator;

pub use distributions::{CostMatrix, DiscreteDistribution, SupportGrid};
pub use error::{Error, Result};
pub use network::{GraphKind, NetworkGraph};
pub use ot::CostKernel;
