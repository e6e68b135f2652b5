use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use stonet_core::data::Dataset;
use stonet_core::estimate::selected_covariates;
use stonet_core::net::{Activation, NetworkConfig, OutputKind, TreatmentSlot};
use stonet_core::prior::PriorHyperparameters;
use stonet_core::trainer::{train, TrainingSchedule};

fn pure_noise(n: usize, p: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cov: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let a: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Dataset::new(p, cov, None, a, y).unwrap()
}

#[test]
fn pure_noise_outcome_selects_nothing() {
    let cfg = NetworkConfig::new(
        vec![10, 6, 4, 1],
        Some(TreatmentSlot { layer: 2, position: 0 }),
        vec![1e-2, 1e-3, 1e-4],
        Activation::Tanh,
        OutputKind::Continuous,
    )
    .unwrap();
    let hyper = PriorHyperparameters::new(1e-6, 3e-3, 0.3).unwrap();
    let mut schedule = TrainingSchedule::for_network(&cfg);
    schedule.epochs_pretrain = 20;
    schedule.epochs_train = 150;
    schedule.epochs_refine = 20;
    let mut empty = 0;
    for seed in 0..10 {
        let ds = pure_noise(400, 10, 500 + seed);
        schedule.seed = seed;
        let fitted = train(&ds, &cfg, &hyper, &schedule, None).unwrap();
        if selected_covariates(&fitted).outcome_model_covariates.is_empty() {
            empty += 1;
        }
    }
    assert!(empty >= 9, "outcome set empty in only {empty}/10 runs");
}
