//! Fair resource allocation in weakly coupled Markov decision processes.
//!
//! The crate provides, end to end:
//!
//! - exact models: sub-MDPs, weakly coupled specs, and the expanded joint
//!   model for small instance counts ([`model`]);
//! - the generalized Gini welfare function and its weight vectors
//!   ([`fairness`]);
//! - count aggregation of symmetric instances ([`count`]);
//! - a dense two-phase simplex plus the Gini-weighted occupancy LP and the
//!   count-space dual LP ([`lp`]);
//! - a machine-replacement benchmark generator ([`instances`]);
//! - Whittle-index and random baselines ([`baselines`]);
//! - priority-score count-action sampling ([`sampler`]);
//! - count-space simulation and Monte Carlo policy evaluation ([`simulate`]);
//! - a count-proportion policy network trained by clipped policy gradient
//!   ([`cpdrl`]);
//! - experiment runners emitting CSV artifacts ([`experiments`]).
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix `f64`, which the documented tolerances
//! assume.

pub mod baselines;
pub mod count;
pub mod cpdrl;
pub mod error;
pub mod experiments;
pub mod fairness;
pub mod fileio;
pub mod instances;
pub mod lp;
pub mod model;
pub mod perm;
pub mod sampler;
pub mod scalar;
pub mod simulate;

pub use error::{Error, Result};
pub use perm::Permutation;
pub use scalar::Scalar;

/// `f64` aliases for the generic core types.
pub type SubMdp = model::SubMdp<f64>;
pub type WcmdpSpec = model::WcmdpSpec<f64>;
pub type JointModel = model::JointModel<f64>;
pub type GgfWeights = fairness::GgfWeights<f64>;
pub type SymmetricSpec = count::SymmetricSpec<f64>;
pub type CountModel = count::CountModel<f64>;
pub type CountState = count::CountState;
pub type CountAction = count::CountAction;
pub type LinearProgram = lp::LinearProgram<f64>;
pub type OccupancySolution = lp::OccupancySolution<f64>;
pub type WhittleTable = baselines::WhittleTable<f64>;
pub type PolicyOutput = sampler::PolicyOutput<f64>;
pub type SampleTrace = sampler::SampleTrace<f64>;
pub type EvalConfig = simulate::EvalConfig<f64>;
pub type EvalReport = simulate::EvalReport<f64>;
pub type PolicyNet = cpdrl::PolicyNet<f64>;
pub type CriticNet = cpdrl::CriticNet<f64>;
pub type TrainConfig = cpdrl::TrainConfig<f64>;
