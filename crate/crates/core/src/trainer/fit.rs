use std::borrow::Cow;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::covariate::CovariateModel;
use super::rng::{stream, SLOT_INIT, SLOT_SHUFFLE};
use super::sampler::{backward_impute, ImputeRates, Imputed};
use super::schedule::TrainingSchedule;
use super::update::sa_update;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{bernoulli_log_mass, NetworkConfig, NetworkParameters, OutputKind, Sample, SparsityMask, StoNet};
use crate::prior::PriorHyperparameters;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Pretrain,
    Train,
    Refine,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Train => "train",
            Stage::Refine => "refine",
        }
    }
}

/// Per-epoch training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord<T> {
    pub stage: Stage,
    /// 1-based within the stage.
    pub epoch: usize,
    /// Summed imputed complete-data log-likelihood plus the log-prior at epoch end.
    pub log_posterior: T,
    /// Mean SGHMC kinetic energy after imputation.
    pub kinetic_energy: T,
    pub active: usize,
}

/// One stored iterate for trajectory averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint<T> {
    pub params: NetworkParameters<T>,
    /// Imputed missing covariates per training sample (empty rows when complete).
    pub x_mis: Vec<Vec<T>>,
    /// Hidden latents per training sample, if requested.
    pub latents: Option<Vec<Vec<Vec<T>>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel<T> {
    pub config: NetworkConfig<T>,
    /// Final parameters; masked entries are zero.
    pub params: NetworkParameters<T>,
    pub mask: SparsityMask,
    pub hyper: PriorHyperparameters<T>,
    /// Index of the selected run.
    pub run: usize,
    /// Final imputed missing covariates per training sample.
    pub imputations: Vec<Vec<T>>,
    pub epochs: Vec<EpochRecord<T>>,
    pub tail: Vec<TrajectoryPoint<T>>,
    pub bic: T,
    /// BIC of every run, in run order.
    pub run_bics: Vec<T>,
}

impl<T: Scalar> FittedModel<T> {
    pub fn net(&self) -> Result<StoNet<'_, T>> {
        StoNet::new(&self.config, &self.params, Some(&self.mask))
    }
}

fn check_inputs<T: Scalar>(
    ds: &Dataset<T>,
    config: &NetworkConfig<T>,
    hyper: &PriorHyperparameters<T>,
    schedule: &TrainingSchedule<T>,
    cov: Option<&CovariateModel<T>>,
) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Input("empty dataset".into()));
    }
    config.validate()?;
    hyper.validate()?;
    schedule.validate(config)?;
    if ds.num_covariates() != config.input_dim() {
        return Err(Error::Input(format!(
            "dataset has {} covariates, network expects {}",
            ds.num_covariates(),
            config.input_dim()
        )));
    }
    if config.output_dim() != 1 {
        return Err(Error::Structure("the outcome layer must have width 1".into()));
    }
    if config.output_kind == OutputKind::Binary
        && ds.outcome.iter().any(|&y| y != T::zero() && y != T::one())
    {
        return Err(Error::Input("binary outcome must be 0 or 1".into()));
    }
    if ds.has_missing() {
        match cov {
            None => return Err(Error::Input("missing covariates require a covariate model".into())),
            Some(c) if c.dim() != ds.num_covariates() => {
                return Err(Error::Input("covariate model dimension differs from the data".into()))
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// Fit `num_runs` independent runs and keep the one with the smallest BIC.
pub fn train<T: Scalar>(
    ds: &Dataset<T>,
    config: &NetworkConfig<T>,
    hyper: &PriorHyperparameters<T>,
    schedule: &TrainingSchedule<T>,
    cov: Option<&CovariateModel<T>>,
) -> Result<FittedModel<T>> {
    check_inputs(ds, config, hyper, schedule, cov)?;
    let mut best: Option<FittedModel<T>> = None;
    let mut bics = Vec::with_capacity(schedule.num_runs);
    for run in 0..schedule.num_runs {
        let fitted = train_run(ds, config, hyper, schedule, cov, run)?;
        log::info!("run {run}: bic {}", fitted.bic);
        bics.push(fitted.bic);
        if best.as_ref().is_none_or(|b| fitted.bic < b.bic) {
            best = Some(fitted);
        }
    }
    let mut best = best.expect("at least one run");
    best.run_bics = bics;
    Ok(best)
}

fn initial_imputations<T: Scalar>(ds: &Dataset<T>, cov: Option<&CovariateModel<T>>) -> Result<Vec<Vec<T>>> {
    (0..ds.len())
        .map(|i| match cov {
            Some(c) if !ds.missing(i).is_empty() => c.conditional_mean(ds.row(i), ds.missing(i)),
            _ => Ok(Vec::new()),
        })
        .collect()
}

fn train_run<T: Scalar>(
    ds: &Dataset<T>,
    config: &NetworkConfig<T>,
    hyper: &PriorHyperparameters<T>,
    schedule: &TrainingSchedule<T>,
    cov: Option<&CovariateModel<T>>,
    run: usize,
) -> Result<FittedModel<T>> {
    let n = ds.len();
    let seed = schedule.seed;
    let run_id = run as u64;
    let mut params = NetworkParameters::random(config, &mut stream(seed, run_id, SLOT_INIT, 0));
    let mut mask = SparsityMask::full(config);
    let mut masked = false;
    let mut imputations = initial_imputations(ds, cov)?;
    let stages = [
        (Stage::Pretrain, schedule.epochs_pretrain),
        (Stage::Train, schedule.epochs_train),
        (Stage::Refine, schedule.epochs_refine),
    ];
    let total: usize = stages.iter().map(|s| s.1).sum();
    let last_prune = schedule.epochs_pretrain + schedule.epochs_train;
    let tail_start = total.saturating_sub(schedule.tail_length).max(if schedule.epochs_refine > 0 {
        last_prune
    } else {
        0
    });
    let y: Vec<[T; 1]> = ds.outcome.iter().map(|&v| [v]).collect();
    let mut epochs = Vec::with_capacity(total);
    let mut tail = Vec::new();
    let mut global = 0usize;
    for (stage, count) in stages {
        for k in 1..=count {
            global += 1;
            let decaying = stage != Stage::Pretrain;
            let (gamma_base, impute_base) = match stage {
                Stage::Refine => (&schedule.param_lr_refine, &schedule.impute_lr),
                _ => (&schedule.param_lr, &schedule.impute_lr),
            };
            let gamma = gamma_base
                .iter()
                .map(|&b| schedule.rate(b, k, schedule.param_decay, decaying))
                .collect::<Result<Vec<T>>>()?;
            let rates = ImputeRates {
                hidden: impute_base
                    .iter()
                    .map(|&b| schedule.rate(b, k, schedule.impute_decay, decaying))
                    .collect::<Result<Vec<T>>>()?,
                missing: schedule.rate(schedule.impute_lr_missing, k, schedule.impute_decay, decaying)?,
                eta: schedule.eta,
            };
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut stream(seed, run_id, SLOT_SHUFFLE, global as u64));
            let keep_latents = schedule.store_latents && global > tail_start;
            let mut epoch_latents = if keep_latents { vec![Vec::new(); n] } else { Vec::new() };
            let mut log_lik = T::zero();
            let mut kinetic = T::zero();
            for batch in order.chunks(schedule.batch_size) {
                let net = StoNet::new(config, &params, masked.then_some(&mask))?;
                let imputed: Vec<Imputed<T>> = batch
                    .par_iter()
                    .map(|&i| {
                        let sample = Sample {
                            x: ds.row(i),
                            treatment: ds.treatment[i],
                            y: &y[i],
                            missing: ds.missing(i),
                        };
                        let mut rng = stream(seed, run_id, i as u64, global as u64);
                        backward_impute(&net, &sample, imputations[i].clone(), &rates, schedule.t_mc, cov, &mut rng)
                            .map_err(|e| match e {
                                Error::Numeric { context } => Error::Numeric {
                                    context: format!("sample {i}, {stage:?} epoch {k}: {context}"),
                                },
                                other => other,
                            })
                    })
                    .collect::<Result<_>>()?;
                drop(net);
                for (&i, s) in batch.iter().zip(&imputed) {
                    imputations[i].clone_from(&s.latents.x_mis);
                    log_lik = log_lik + s.log_likelihood;
                    kinetic = kinetic + s.kinetic_energy;
                    if keep_latents {
                        epoch_latents[i] = s.latents.hidden.clone();
                    }
                }
                sa_update(
                    &mut params,
                    hyper,
                    &imputed,
                    &gamma,
                    n,
                    masked.then_some(&mask),
                    schedule.clip_norm,
                )
                .map_err(|e| match e {
                    Error::Numeric { context } => Error::Numeric {
                        context: format!("{stage:?} epoch {k}: {context}"),
                    },
                    other => other,
                })?;
            }
            if stage == Stage::Train && (k == count || schedule.prune_epochs.contains(&k)) {
                let pruned = hyper.build_mask(&params)?;
                if masked {
                    mask.intersect(&pruned);
                } else {
                    mask = pruned;
                }
                masked = true;
                mask.apply(&mut params);
                log::debug!("prune after train epoch {k}: {} active", mask.count_active());
            }
            let log_posterior = log_lik + hyper.log_prior(&params)?;
            epochs.push(EpochRecord {
                stage,
                epoch: k,
                log_posterior,
                kinetic_energy: kinetic / T::of(n as f64),
                active: if masked { mask.count_active() } else { params.num_params() },
            });
            if global > tail_start {
                tail.push(TrajectoryPoint {
                    params: params.clone(),
                    x_mis: if ds.has_missing() { imputations.clone() } else { Vec::new() },
                    latents: keep_latents.then_some(epoch_latents),
                });
            }
        }
    }
    let mut fitted = FittedModel {
        config: config.clone(),
        params,
        mask,
        hyper: *hyper,
        run,
        imputations,
        epochs,
        tail,
        bic: T::zero(),
        run_bics: Vec::new(),
    };
    fitted.bic = bic_score(&fitted, ds)?;
    Ok(fitted)
}

/// Covariate row with missing entries filled from `imputations` when given.
pub(crate) fn completed_row<'d, T: Scalar>(
    ds: &'d Dataset<T>,
    i: usize,
    imputations: Option<&[Vec<T>]>,
) -> Result<Cow<'d, [T]>> {
    let miss = ds.missing(i);
    if miss.is_empty() {
        return Ok(Cow::Borrowed(ds.row(i)));
    }
    let fill = imputations
        .and_then(|imp| imp.get(i))
        .filter(|v| v.len() == miss.len())
        .ok_or_else(|| Error::Input(format!("row {i} has missing covariates and no imputation")))?;
    let mut row = ds.row(i).to_vec();
    for (&j, &v) in miss.iter().zip(fill) {
        row[j] = v;
    }
    Ok(Cow::Owned(row))
}

/// `Σ_i log π_DNN(y_i | x_i, a_i)` of the masked deterministic network.
///
/// For a continuous outcome the noise variance is profiled out
/// (`σ̂² = RSS / n`, floored at the configured output variance).
pub fn dnn_log_likelihood<T: Scalar>(fitted: &FittedModel<T>, ds: &Dataset<T>) -> Result<T> {
    let net = fitted.net()?;
    let imputations = (fitted.imputations.len() == ds.len()).then_some(fitted.imputations.as_slice());
    let h1 = fitted.config.num_layers();
    let var_out = fitted.config.noise_variance(h1);
    let mut rss = T::zero();
    let mut binary = T::zero();
    for i in 0..ds.len() {
        let x = completed_row(ds, i, imputations)?;
        let fwd = net.forward(&x, ds.treatment[i])?;
        let mu = fwd.preactivations[h1 - 1][0];
        let y = ds.outcome[i];
        match fitted.config.output_kind {
            OutputKind::Continuous => rss = rss + (y - mu) * (y - mu),
            OutputKind::Binary => binary = binary + bernoulli_log_mass(y, mu / var_out),
        }
    }
    let n = T::of(ds.len() as f64);
    let value = match fitted.config.output_kind {
        OutputKind::Continuous => {
            let s2 = (rss / n).max(var_out);
            -T::half() * n * ((T::two() * T::PI() * s2).ln() + T::one())
        }
        OutputKind::Binary => binary,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numeric("non-finite network log-likelihood"))
    }
}

/// `−2 Σ log π_DNN(y | x) + |γ̂| log n`, with `|γ̂|` the number of active parameters.
pub fn bic_score<T: Scalar>(fitted: &FittedModel<T>, ds: &Dataset<T>) -> Result<T> {
    let ll = dnn_log_likelihood(fitted, ds)?;
    let k = T::of(fitted.mask.count_active() as f64);
    Ok(-T::two() * ll + k * T::of(ds.len() as f64).ln())
}

/// Mean of `phi` over the stored trajectory tail.
pub fn posterior_average<T: Scalar>(
    fitted: &FittedModel<T>,
    mut phi: impl FnMut(&TrajectoryPoint<T>) -> Result<T>,
) -> Result<T> {
    if fitted.tail.is_empty() {
        return Err(Error::Input("model stores no trajectory tail".into()));
    }
    let mut total = T::zero();
    for point in &fitted.tail {
        total = total + phi(point)?;
    }
    Ok(total / T::of(fitted.tail.len() as f64))
}
