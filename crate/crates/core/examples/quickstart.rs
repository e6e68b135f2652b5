//! Fit a small causal StoNet to linear-Gaussian data and print the AIPW estimate.

use stonet_core::estimate::{aipw_ate, selected_covariates, DEFAULT_KAPPA};
use stonet_core::net::{Activation, NetworkConfig, OutputKind, TreatmentSlot};
use stonet_core::prior::PriorHyperparameters;
use stonet_core::simlab::gen_linear_gaussian;
use stonet_core::trainer::{train, TrainingSchedule};

fn main() -> stonet_core::Result<()> {
    let data = gen_linear_gaussian(500, 10, 7)?;
    let mut config = NetworkConfig::new(
        vec![10, 4, 3, 1],
        Some(TreatmentSlot { layer: 2, position: 0 }),
        vec![1e-2, 1e-3, 1e-4],
        Activation::Tanh,
        OutputKind::Continuous,
    )?;
    config.treatment_weight = 30.0;
    let hyper = PriorHyperparameters::new(0.9, 1e-4, 1.0)?;
    let mut schedule = TrainingSchedule::for_network(&config);
    schedule.epochs_pretrain = 0;
    schedule.epochs_train = 400;
    schedule.epochs_refine = 100;
    for g in schedule.param_lr.iter_mut().chain(schedule.param_lr_refine.iter_mut()) {
        *g *= 8.0;
    }

    let fitted = train(&data, &config, &hyper, &schedule, None)?;
    let est = aipw_ate(&fitted, &data, DEFAULT_KAPPA, 0.05)?;
    let sel = selected_covariates(&fitted);
    println!("ATE {:.3}  95% CI [{:.3}, {:.3}]  (true 1.0)", est.tau_hat, est.ci.0, est.ci.1);
    println!("treatment model uses {:?}", sel.treatment_model_covariates);
    println!("outcome model uses   {:?}", sel.outcome_model_covariates);
    Ok(())
}
