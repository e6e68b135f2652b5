//! Causal stochastic neural networks.
//!
//! A StoNet rewrites a feed-forward network as a chain of noisy regressions
//! whose hidden values are latent variables. The causal variant places the
//! observed binary treatment as a visible unit inside a hidden layer, so one
//! network jointly models the propensity score (the treatment unit's inputs)
//! and the outcome (everything downstream). Training alternates SGHMC
//! imputation of the latents with stochastic-approximation parameter updates
//! under a spike-and-slab prior; the pruned network then feeds a doubly
//! robust AIPW estimate of the average treatment effect.

pub mod data;
pub mod error;
pub mod estimate;
pub mod matrix;
pub mod net;
pub mod presets;
pub mod prior;
pub mod scalar;
pub mod simlab;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision aliases for the common case.
pub type Config = net::NetworkConfig<f64>;
pub type Params = net::NetworkParameters<f64>;
pub type Hyper = prior::PriorHyperparameters<f64>;
pub type Schedule = trainer::TrainingSchedule<f64>;
pub type Data = data::Dataset<f64>;
pub type Model = trainer::FittedModel<f64>;
pub type Estimate = estimate::AteEstimate<f64>;
