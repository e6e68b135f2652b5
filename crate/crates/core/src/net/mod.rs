//! Causal-StoNet topology, deterministic forward pass, per-layer
//! conditional densities, and the analytic gradients used for training.

mod config;
mod params;
mod stonet;

pub use config::{Activation, NetworkConfig, OutputKind, TreatmentSlot};
pub use params::{LatentState, LayerMask, LayerParams, NetworkParameters, SparsityMask};
pub use stonet::{bernoulli_log_mass, Forward, LatentGradient, Sample, StoNet};

use crate::error::Result;
use crate::scalar::Scalar;

/// Zero-noise forward pass of the masked network with treatment clamped to `a`.
pub fn dnn_forward<T: Scalar>(
    config: &NetworkConfig<T>,
    params: &NetworkParameters<T>,
    mask: Option<&SparsityMask>,
    x: &[T],
    a: T,
) -> Result<Forward<T>> {
    StoNet::new(config, params, mask)?.forward(x, a)
}
