//! Imputation-regularized training: backward SGHMC imputation of the latent
//! layers (and missing covariates) alternating with stochastic-approximation
//! parameter updates, followed by pruning and a masked refine stage.

mod checkpoint;
mod covariate;
mod fit;
mod rng;
mod sampler;
mod schedule;
mod update;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use covariate::{chain_neighborhood, CovariateModel};
pub use fit::{
    bic_score, dnn_log_likelihood, posterior_average, train, EpochRecord, FittedModel, Stage,
    TrajectoryPoint,
};
pub(crate) use fit::completed_row;
pub use sampler::{backward_impute, sghmc_sweep, ImputeRates, Imputed};
pub use schedule::{lr_schedule, ScheduleForm, TrainingSchedule};
pub use update::sa_update;
