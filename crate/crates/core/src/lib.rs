//! Multi-agent actor-critic learning with hypergraph-convolution critics.
//!
//! Decentralized actors pick discrete actions from local observations. A
//! centralized critic embeds every agent's observation and action, groups
//! agents into soft neighborhoods (hyperedges) generated per step by an MLP
//! or by query/key attention, and mixes agent features by hypergraph
//! convolution before estimating each agent's action value.
//!
//! All numeric code is generic over [`Scalar`]. The aliases at the crate root
//! pin it to `f64` (used by the gradient checks) or `f32` (the harness's
//! default training precision).

pub mod agents;
pub mod approximator;
pub mod envs;
pub mod error;
pub mod hypergraph;
pub mod learner;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ParamStore64 = approximator::ParamStore<f64>;
pub type Tape64 = approximator::Tape<f64>;
pub type IncidenceMatrix64 = hypergraph::IncidenceMatrix<f64>;
pub type HyperedgeWeights64 = hypergraph::HyperedgeWeights<f64>;
pub type PolicyDistribution64 = agents::PolicyDistribution<f64>;
pub type CriticOutput64 = agents::CriticOutput<f64>;
pub type Transition64 = learner::Transition<f64>;
pub type ReplayBuffer64 = learner::ReplayBuffer<f64>;
pub type Learner64 = learner::Learner<f64>;
pub type ParamStore32 = approximator::ParamStore<f32>;

