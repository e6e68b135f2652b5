//! Flat key/value run configuration.
//!
//! Every key is optional at parse time; each command asks for the keys it
//! needs and fails with the key name when one is absent. A `preset` key
//! fills network, prior and schedule values from a published recipe, and
//! any explicit key overrides the preset.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use stonet_core::net::{Activation, NetworkConfig, OutputKind, TreatmentSlot};
use stonet_core::presets::{ar2_recipe, varying_size_recipe, Recipe};
use stonet_core::prior::PriorHyperparameters;
use stonet_core::simlab::Scenario;
use stonet_core::trainer::{chain_neighborhood, CovariateModel, ScheduleForm, TrainingSchedule};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,

    pub generator: Option<String>,
    pub scenario: Option<String>,
    pub n_train: Option<usize>,
    pub n_val: Option<usize>,
    pub n_test: Option<usize>,
    pub num_covariates: Option<usize>,

    pub train_data: Option<PathBuf>,
    pub eval_data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub estimate_report: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub truth: Option<PathBuf>,

    pub preset: Option<String>,
    pub layer_widths: Option<Vec<usize>>,
    pub treatment_layer: Option<usize>,
    pub treatment_position: Option<usize>,
    pub noise_variances: Option<Vec<f64>>,
    pub activation: Option<String>,
    pub output_kind: Option<String>,
    pub treatment_temperature: Option<f64>,
    pub treatment_weight: Option<f64>,

    pub lambda: Option<f64>,
    pub sigma0_sq: Option<f64>,
    pub sigma1_sq: Option<f64>,
    pub penalize_bias: Option<bool>,

    pub epochs_pretrain: Option<usize>,
    pub epochs_train: Option<usize>,
    pub epochs_refine: Option<usize>,
    pub batch_size: Option<usize>,
    pub t_mc: Option<usize>,
    pub eta: Option<f64>,
    pub impute_lr: Option<Vec<f64>>,
    pub impute_lr_missing: Option<f64>,
    pub impute_decay: Option<f64>,
    pub param_lr: Option<Vec<f64>>,
    pub param_lr_refine: Option<Vec<f64>>,
    pub param_decay: Option<f64>,
    pub schedule_form: Option<String>,
    pub schedule_offset: Option<f64>,
    pub num_runs: Option<usize>,
    pub prune_epochs: Option<Vec<usize>>,
    pub clip_norm: Option<f64>,
    pub tail_length: Option<usize>,
    pub store_latents: Option<bool>,

    pub covariate_model: Option<String>,
    pub neighborhood_order: Option<usize>,

    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub metrics: Option<Vec<String>>,
}

/// `(key, type, meaning)` for every accepted key, in documentation order.
pub const SCHEMA: &[(&str, &str, &str)] = &[
    ("seed", "integer", "master seed; all randomness derives from it"),
    ("out_dir", "path", "directory receiving every output file"),
    ("generator", "string", "simulate: varying_size | ar2 | linear_gaussian"),
    ("scenario", "string", "simulate (ar2): complete | mar | mnar"),
    ("n_train", "integer", "simulate: training rows"),
    ("n_val", "integer", "simulate: validation rows (ignored by linear_gaussian)"),
    ("n_test", "integer", "simulate: test rows (ignored by linear_gaussian)"),
    ("num_covariates", "integer", "simulate (linear_gaussian): covariate count"),
    ("train_data", "path", "train: CSV with columns x1..xp, A, Y"),
    ("eval_data", "path", "estimate: CSV to estimate the effect on"),
    ("checkpoint", "path", "estimate: checkpoint written by train (default <out_dir>/model.ckpt)"),
    ("estimate_report", "path", "evaluate: report written by estimate"),
    ("predictions", "path", "evaluate: per-row predictions written by estimate (optional)"),
    ("truth", "path", "evaluate: truth sidecar written by simulate"),
    ("preset", "string", "ar2 | varying_size; fills network, prior and schedule keys"),
    ("layer_widths", "integer list", "[p, d_1, .., d_h, d_out]"),
    ("treatment_layer", "integer", "1-based hidden layer of the treatment unit; 0 for none"),
    ("treatment_position", "integer", "0-based neuron index of the treatment unit"),
    ("noise_variances", "real list", "per-layer noise variances, layers 1..h+1"),
    ("activation", "string", "tanh | sigmoid | relu | identity"),
    ("output_kind", "string", "continuous | binary"),
    ("treatment_temperature", "real", "temperature of the treatment unit (default 1)"),
    ("treatment_weight", "real", "exponent on the treatment likelihood (default 1)"),
    ("lambda", "real", "slab mixing proportion"),
    ("sigma0_sq", "real", "spike variance"),
    ("sigma1_sq", "real", "slab variance"),
    ("penalize_bias", "bool", "apply the prior and pruning to biases (default true)"),
    ("epochs_pretrain", "integer", "epochs before training, constant step sizes"),
    ("epochs_train", "integer", "training epochs; pruning follows the last one"),
    ("epochs_refine", "integer", "masked epochs after pruning"),
    ("batch_size", "integer", "mini-batch size"),
    ("t_mc", "integer", "SGHMC sweeps per imputation"),
    ("eta", "real", "SGHMC friction"),
    ("impute_lr", "real list", "SGHMC step sizes, hidden layers 1..h"),
    ("impute_lr_missing", "real", "SGHMC step size for missing covariates"),
    ("impute_decay", "real", "decay exponent of the imputation step sizes"),
    ("param_lr", "real list", "parameter step sizes, layers 1..h+1"),
    ("param_lr_refine", "real list", "parameter step sizes after pruning"),
    ("param_decay", "real", "decay exponent of the parameter step sizes"),
    ("schedule_form", "string", "decay (base / (1 + base k^β)) | polynomial (base / (offset + k^α))"),
    ("schedule_offset", "real", "offset of the polynomial form (default 1)"),
    ("num_runs", "integer", "independent runs; the lowest BIC wins"),
    ("prune_epochs", "integer list", "extra training epochs (1-based) that prune"),
    ("clip_norm", "real", "per-layer gradient norm cap (default off)"),
    ("tail_length", "integer", "trailing epochs kept for trajectory averaging"),
    ("store_latents", "bool", "keep imputed latents in the trajectory tail"),
    ("covariate_model", "string", "missing covariates: diagonal | chain"),
    ("neighborhood_order", "integer", "band order of the chain covariate model (default 2)"),
    ("kappa", "real", "propensity clip (default 0.01)"),
    ("alpha", "real", "confidence interval level 1 - alpha (default 0.05)"),
    ("metrics", "string list", "evaluate: subset of mae_ate, pehe, fsr_nsr, ci_coverage"),
];

pub fn schema_text() -> String {
    let width = SCHEMA.iter().map(|(k, _, _)| k.len()).max().unwrap_or(0);
    SCHEMA
        .iter()
        .map(|(k, t, d)| format!("{k:<width$}  {t:<12}  {d}\n"))
        .collect()
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing config key `{key}`"))
}

fn need<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
    value.clone().ok_or_else(|| missing(key))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        need(&self.seed, "seed")
    }

    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        need(&self.out_dir, "out_dir")
    }

    pub fn path(&self, value: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        need(value, key)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        match &self.scenario {
            None => Ok(Scenario::Complete),
            Some(s) => s.parse().map_err(|e: stonet_core::Error| CliError::Config(e.to_string())),
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa.unwrap_or(stonet_core::estimate::DEFAULT_KAPPA)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.05)
    }

    fn preset(&self, p: usize, batch: usize) -> Result<Option<Recipe>, CliError> {
        let recipe = match self.preset.as_deref() {
            None => return Ok(None),
            Some("ar2") => ar2_recipe(p, batch),
            Some("varying_size") => varying_size_recipe(p, batch),
            Some(other) => return Err(CliError::Config(format!("unknown preset `{other}`"))),
        };
        recipe.map(Some).map_err(CliError::from_config)
    }

    /// Network, prior and schedule for `p` input covariates.
    pub fn recipe(&self, p: usize) -> Result<Recipe, CliError> {
        let batch = need(&self.batch_size, "batch_size")?;
        let base = self.preset(p, batch)?;
        let pick = |v: &Option<Vec<f64>>, key: &str, from: Option<&Vec<f64>>| -> Result<Vec<f64>, CliError> {
            v.clone().or_else(|| from.cloned()).ok_or_else(|| missing(key))
        };

        let widths = match (&self.layer_widths, &base) {
            (Some(w), _) => w.clone(),
            (None, Some(r)) => r.config.layer_widths.clone(),
            (None, None) => return Err(missing("layer_widths")),
        };
        if widths.first() != Some(&p) {
            return Err(CliError::Input(format!(
                "layer_widths starts with {:?} but the data has {p} covariates",
                widths.first()
            )));
        }
        let treatment = match (self.treatment_layer, &base) {
            (Some(0), _) => None,
            (Some(layer), _) => Some(TreatmentSlot {
                layer,
                position: need(&self.treatment_position, "treatment_position")?,
            }),
            (None, Some(r)) => r.config.treatment,
            (None, None) => return Err(missing("treatment_layer")),
        };
        let noise = pick(&self.noise_variances, "noise_variances", base.as_ref().map(|r| &r.config.noise_variances))?;
        let activation: Activation = match (&self.activation, &base) {
            (Some(a), _) => a.parse().map_err(CliError::from_config)?,
            (None, Some(r)) => r.config.activation,
            (None, None) => return Err(missing("activation")),
        };
        let output_kind: OutputKind = match (&self.output_kind, &base) {
            (Some(o), _) => o.parse().map_err(CliError::from_config)?,
            (None, Some(r)) => r.config.output_kind,
            (None, None) => OutputKind::Continuous,
        };
        let mut config = NetworkConfig::new(widths, treatment, noise, activation, output_kind)
            .map_err(CliError::from_config)?;
        if let Some(r) = &base {
            config.treatment_temperature = r.config.treatment_temperature;
            config.treatment_weight = r.config.treatment_weight;
        }
        if let Some(t) = self.treatment_temperature {
            config.treatment_temperature = t;
        }
        if let Some(w) = self.treatment_weight {
            config.treatment_weight = w;
        }
        config.validate().map_err(CliError::from_config)?;

        let hb = base.as_ref().map(|r| r.hyper);
        let prior_value = |v: Option<f64>, key: &str, from: Option<f64>| v.or(from).ok_or_else(|| missing(key));
        let mut hyper = PriorHyperparameters::new(
            prior_value(self.lambda, "lambda", hb.map(|h| h.lambda))?,
            prior_value(self.sigma0_sq, "sigma0_sq", hb.map(|h| h.sigma0_sq))?,
            prior_value(self.sigma1_sq, "sigma1_sq", hb.map(|h| h.sigma1_sq))?,
        )
        .map_err(CliError::from_config)?;
        hyper.penalize_bias = self.penalize_bias.or(hb.map(|h| h.penalize_bias)).unwrap_or(true);

        let sb = base.as_ref().map(|r| &r.schedule);
        let count = |v: Option<usize>, key: &str, from: Option<usize>| v.or(from).ok_or_else(|| missing(key));
        let real = |v: Option<f64>, key: &str, from: Option<f64>| v.or(from).ok_or_else(|| missing(key));
        let form = match self.schedule_form.as_deref() {
            None => sb.map_or(ScheduleForm::Decay, |s| s.form),
            Some("decay") => ScheduleForm::Decay,
            Some("polynomial") => ScheduleForm::Polynomial {
                offset: self.schedule_offset.unwrap_or(1.0),
            },
            Some(other) => return Err(CliError::Config(format!("unknown schedule_form `{other}`"))),
        };
        let schedule = TrainingSchedule {
            epochs_pretrain: count(self.epochs_pretrain, "epochs_pretrain", sb.map(|s| s.epochs_pretrain))?,
            epochs_train: count(self.epochs_train, "epochs_train", sb.map(|s| s.epochs_train))?,
            epochs_refine: count(self.epochs_refine, "epochs_refine", sb.map(|s| s.epochs_refine))?,
            batch_size: batch,
            t_mc: count(self.t_mc, "t_mc", sb.map(|s| s.t_mc))?,
            eta: real(self.eta, "eta", sb.map(|s| s.eta))?,
            impute_lr: pick(&self.impute_lr, "impute_lr", sb.map(|s| &s.impute_lr))?,
            impute_lr_missing: real(self.impute_lr_missing, "impute_lr_missing", sb.map(|s| s.impute_lr_missing))
                .or_else(|_| self.impute_lr.as_ref().and_then(|v| v.first()).map(|e| e * 0.1).ok_or_else(|| missing("impute_lr_missing")))?,
            impute_decay: real(self.impute_decay, "impute_decay", sb.map(|s| s.impute_decay))?,
            param_lr: pick(&self.param_lr, "param_lr", sb.map(|s| &s.param_lr))?,
            param_lr_refine: pick(&self.param_lr_refine, "param_lr_refine", sb.map(|s| &s.param_lr_refine))?,
            param_decay: real(self.param_decay, "param_decay", sb.map(|s| s.param_decay))?,
            form,
            seed: self.seed()?,
            num_runs: self.num_runs.or(sb.map(|s| s.num_runs)).unwrap_or(1),
            prune_epochs: self.prune_epochs.clone().or(sb.map(|s| s.prune_epochs.clone())).unwrap_or_default(),
            clip_norm: self.clip_norm.or(sb.and_then(|s| s.clip_norm)),
            tail_length: self.tail_length.or(sb.map(|s| s.tail_length)).unwrap_or(30),
            store_latents: self.store_latents.unwrap_or(false),
        };
        schedule.validate(&config).map_err(CliError::from_config)?;
        Ok(Recipe { config, hyper, schedule })
    }

    /// Covariate model for data with missing cells, fitted on the complete rows.
    pub fn covariate_model(&self, ds: &stonet_core::Data) -> Result<Option<CovariateModel<f64>>, CliError> {
        if !ds.has_missing() {
            return Ok(None);
        }
        let p = ds.num_covariates();
        let model = match self.covariate_model.as_deref() {
            None => return Err(missing("covariate_model")),
            Some("diagonal") => CovariateModel::diagonal(ds),
            Some("chain") => {
                let order = self.neighborhood_order.unwrap_or(2);
                CovariateModel::with_neighborhood(ds, &chain_neighborhood(p, order))
            }
            Some(other) => return Err(CliError::Config(format!("unknown covariate_model `{other}`"))),
        };
        model.map(Some).map_err(CliError::from)
    }
}
