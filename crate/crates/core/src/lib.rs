//! Minimax causal filtering toolkit.
//!
//! Computes capacity-achieving input priors for unit-variance AWGN and
//! Poisson observation channels, builds the corresponding Bayesian
//! (minimax) causal filters, simulates continuous-time estimation, and
//! numerically checks the information-estimation identities relating
//! estimation regret to channel capacity and output relative entropy.

pub mod capacity;
pub mod distributions;
pub mod experiments;
pub mod gaussian;
pub mod info;
pub mod poisson;
pub mod sim;

pub use distributions::{DiscreteDistribution, DistributionError, JointPmf};
