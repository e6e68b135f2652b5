//! Published network and training recipes for the two simulation designs.

use crate::error::Result;
use crate::net::{Activation, NetworkConfig, OutputKind, TreatmentSlot};
use crate::prior::PriorHyperparameters;
use crate::trainer::{ScheduleForm, TrainingSchedule};

/// Network, prior and schedule bundled for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub config: NetworkConfig<f64>,
    pub hyper: PriorHyperparameters<f64>,
    pub schedule: TrainingSchedule<f64>,
}

const NOISE: [f64; 4] = [1e-3, 1e-5, 1e-7, 1e-9];

/// Weight on the treatment unit's likelihood. Untempered, the single
/// Bernoulli term is swamped by the outcome term at these noise variances and
/// the propensity row never leaves the spike.
const TREATMENT_WEIGHT: f64 = 300.0;

fn three_layer(p: usize, hidden: [usize; 3]) -> Result<NetworkConfig<f64>> {
    let mut config = NetworkConfig::new(
        vec![p, hidden[0], hidden[1], hidden[2], 1],
        Some(TreatmentSlot { layer: 2, position: 1 }),
        NOISE.to_vec(),
        Activation::Tanh,
        OutputKind::Continuous,
    )?;
    config.treatment_weight = TREATMENT_WEIGHT;
    Ok(config)
}

/// Per-sample step sizes turned into steps on a summed mini-batch gradient.
fn per_batch(rates: &[f64], batch_size: usize) -> Vec<f64> {
    rates.iter().map(|g| g / batch_size as f64).collect()
}

/// 8-6-5-1 tanh network for the AR(2) design.
pub fn ar2_recipe(p: usize, batch_size: usize) -> Result<Recipe> {
    let config = three_layer(p, [8, 6, 5])?;
    let hyper = PriorHyperparameters::new(1e-6, 3e-3, 0.3)?;
    let schedule = TrainingSchedule {
        epochs_pretrain: 100,
        epochs_train: 1500,
        epochs_refine: 200,
        batch_size,
        t_mc: 1,
        eta: 0.1,
        impute_lr: vec![3e-3, 3e-4, 1e-6],
        impute_lr_missing: 3e-4,
        impute_decay: 1.2,
        param_lr: per_batch(&[1e-3, 3e-6, 1e-7, 1e-12], batch_size),
        param_lr_refine: per_batch(&[1e-4, 3e-7, 1e-8, 1e-13], batch_size),
        param_decay: 1.2,
        form: ScheduleForm::Decay,
        seed: 0,
        num_runs: 1,
        prune_epochs: Vec::new(),
        clip_norm: None,
        tail_length: 30,
        store_latents: false,
    };
    schedule.validate(&config)?;
    Ok(Recipe { config, hyper, schedule })
}

/// 32-16-8-1 tanh network for the correlated high-dimensional design.
pub fn varying_size_recipe(p: usize, batch_size: usize) -> Result<Recipe> {
    let config = three_layer(p, [32, 16, 8])?;
    let hyper = PriorHyperparameters::new(1e-6, 1e-5, 1e-2)?;
    let schedule = TrainingSchedule {
        epochs_pretrain: 50,
        epochs_train: 200,
        epochs_refine: 200,
        batch_size,
        t_mc: 1,
        eta: 0.1,
        impute_lr: vec![3e-3, 3e-4, 5e-7],
        impute_lr_missing: 3e-4,
        impute_decay: 1.2,
        param_lr: per_batch(&[1e-3, 1e-6, 1e-8, 5e-13], batch_size),
        param_lr_refine: per_batch(&[1e-4, 1e-7, 1e-9, 5e-14], batch_size),
        param_decay: 1.4,
        form: ScheduleForm::Decay,
        seed: 0,
        num_runs: 1,
        prune_epochs: Vec::new(),
        clip_norm: None,
        tail_length: 30,
        store_latents: false,
    };
    schedule.validate(&config)?;
    Ok(Recipe { config, hyper, schedule })
}
