use crate::error::{Error, Result};
use crate::net::NetworkConfig;
use crate::scalar::Scalar;

/// Decay family for step sizes indexed by epoch `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleForm {
    /// `C / (c + k^α)` with `C` the base and `c` the offset.
    Polynomial { offset: f64 },
    /// `base / (1 + base · k^β)`.
    Decay,
}

impl ScheduleForm {
    pub fn name(self) -> &'static str {
        match self {
            ScheduleForm::Polynomial { .. } => "polynomial",
            ScheduleForm::Decay => "decay",
        }
    }
}

/// Step size at epoch `k`.
pub fn lr_schedule<T: Scalar>(k: usize, base: T, form: ScheduleForm, exponent: T) -> Result<T> {
    if !(base > T::zero()) || !base.is_finite() {
        return Err(Error::Parameter(format!("step-size base must be positive, got {base}")));
    }
    if !(exponent > T::zero()) {
        return Err(Error::Parameter(format!("decay exponent must be positive, got {exponent}")));
    }
    let kp = T::of(k as f64).powf(exponent);
    let value = match form {
        ScheduleForm::Polynomial { offset } => {
            let denom = T::of(offset) + kp;
            if !(denom > T::zero()) {
                return Err(Error::Parameter(
                    "polynomial schedule needs offset > 0 when evaluated at k = 0".into(),
                ));
            }
            base / denom
        }
        ScheduleForm::Decay => base / (T::one() + base * kp),
    };
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSchedule<T> {
    pub epochs_pretrain: usize,
    pub epochs_train: usize,
    pub epochs_refine: usize,
    pub batch_size: usize,
    pub t_mc: usize,
    /// SGHMC friction.
    pub eta: T,
    /// Imputation step bases per hidden layer.
    pub impute_lr: Vec<T>,
    /// Step base for the missing-covariate block.
    pub impute_lr_missing: T,
    pub impute_decay: T,
    /// Parameter step bases per layer during pretrain and train.
    pub param_lr: Vec<T>,
    /// Parameter step bases per layer during refine.
    pub param_lr_refine: Vec<T>,
    pub param_decay: T,
    pub form: ScheduleForm,
    pub seed: u64,
    pub num_runs: usize,
    /// Training-stage epochs (1-based) after which a mask is built.
    /// The end of the training stage always prunes.
    pub prune_epochs: Vec<usize>,
    /// Rescale each layer's update direction to at most this norm.
    pub clip_norm: Option<T>,
    /// Number of final epochs kept for trajectory averaging.
    pub tail_length: usize,
    /// Keep hidden latents in the tail, not only parameters and imputed covariates.
    pub store_latents: bool,
}

impl<T: Scalar> TrainingSchedule<T> {
    /// Step sizes scaled to the network's noise variances.
    ///
    /// A single SGHMC step moves latent `Y_i` by `ε_i²` times its gradient, so
    /// `ε_i² = 0.9 σ²_{i+1}` (and `rate · σ²_{h+1}` for the top hidden layer)
    /// hands a `rate`-sized correction down the chain. `γ_i = σ²_i / B` turns
    /// the batch-averaged residual into a parameter step of the same size, and
    /// `γ_{h+1} = rate · σ²_{h+1} / B`.
    pub fn for_network(config: &NetworkConfig<T>) -> Self {
        let h = config.num_hidden();
        let rate = T::of(1e-3);
        let batch_size = 32;
        let var = |layer: usize| config.noise_variance(layer);
        let impute_lr: Vec<T> = (1..=h)
            .map(|i| {
                let c = if i == h { rate } else { T::of(0.9) };
                (c * var(i + 1)).sqrt()
            })
            .collect();
        let param_lr: Vec<T> = (1..=h + 1)
            .map(|i| (if i == h + 1 { rate * var(i) } else { var(i) }) / T::of(batch_size as f64))
            .collect();
        let eta = T::of(0.1);
        let impute_lr_missing = impute_lr.first().map_or(T::of(1e-3), |&e| e * T::of(0.1));
        Self {
            epochs_pretrain: 100,
            epochs_train: 500,
            epochs_refine: 200,
            batch_size,
            t_mc: 1,
            eta,
            param_lr_refine: param_lr.iter().map(|&g| g * T::of(0.1)).collect(),
            param_lr,
            impute_lr: impute_lr.into_iter().map(|e| e.min(T::of(0.5) / eta)).collect(),
            impute_lr_missing,
            impute_decay: T::of(1.2),
            param_decay: T::of(1.2),
            form: ScheduleForm::Decay,
            seed: 0,
            num_runs: 1,
            prune_epochs: Vec::new(),
            clip_norm: None,
            tail_length: 30,
            store_latents: false,
        }
    }

    pub fn validate(&self, config: &NetworkConfig<T>) -> Result<()> {
        let h = config.num_hidden();
        if self.impute_lr.len() != h {
            return Err(Error::Parameter(format!(
                "{} imputation step sizes for {h} hidden layers",
                self.impute_lr.len()
            )));
        }
        if self.param_lr.len() != h + 1 || self.param_lr_refine.len() != h + 1 {
            return Err(Error::Parameter(format!(
                "parameter step sizes need {} entries per stage",
                h + 1
            )));
        }
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be positive, got {v}")))
            }
        };
        for &v in self.impute_lr.iter().chain(&self.param_lr).chain(&self.param_lr_refine) {
            positive("step size", v)?;
        }
        positive("missing-covariate step size", self.impute_lr_missing)?;
        positive("friction", self.eta)?;
        for (name, d) in [("imputation decay", self.impute_decay), ("parameter decay", self.param_decay)] {
            if !(d > T::zero() && d <= T::two()) {
                return Err(Error::Parameter(format!("{name} must lie in (0, 2], got {d}")));
            }
        }
        if let ScheduleForm::Polynomial { offset } = self.form {
            if !(offset >= 0.0) || !offset.is_finite() {
                return Err(Error::Parameter(format!("schedule offset must be >= 0, got {offset}")));
            }
        }
        if self.t_mc == 0 {
            return Err(Error::Parameter("t_mc must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        if self.num_runs == 0 {
            return Err(Error::Parameter("num_runs must be at least 1".into()));
        }
        if let Some(c) = self.clip_norm {
            positive("clip norm", c)?;
        }
        if let Some(&e) = self.prune_epochs.iter().find(|&&e| e == 0 || e > self.epochs_train) {
            return Err(Error::Parameter(format!(
                "prune epoch {e} outside the training stage 1..={}",
                self.epochs_train
            )));
        }
        for (i, &eps) in self.impute_lr.iter().enumerate() {
            if eps * self.eta >= T::one() {
                return Err(Error::Parameter(format!(
                    "imputation step {eps} times friction {} must be below 1 (layer {})",
                    self.eta,
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// Epoch `k` within a stage; pretrain holds the bases constant.
    pub(crate) fn rate(&self, base: T, k: usize, decay: T, decaying: bool) -> Result<T> {
        if decaying {
            lr_schedule(k, base, self.form, decay)
        } else {
            Ok(base)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let lemma = ScheduleForm::Polynomial { offset: 0.0 };
        assert_eq!(lr_schedule(4, 1.0, lemma, 0.5).unwrap(), 0.5);
        assert_eq!(lr_schedule(0, 3e-3, ScheduleForm::Decay, 1.2).unwrap(), 3e-3);
        let direct = 3e-3 / (1.0 + 3e-3 * 100f64.powf(1.2));
        let got = lr_schedule(100, 3e-3, ScheduleForm::Decay, 1.2).unwrap();
        assert!((got - direct).abs() <= 1e-18);
        assert!(lr_schedule(0, 1.0, lemma, 0.5).is_err());
        assert!(lr_schedule(3, 0.0, ScheduleForm::Decay, 1.2).is_err());
    }

    #[test]
    fn polynomial_sum_diverges() {
        let form = ScheduleForm::Polynomial { offset: 1.0 };
        let partial = |n: usize| -> f64 {
            (1..=n).map(|k| lr_schedule(k, 1.0, form, 0.7).unwrap()).sum()
        };
        let (s1, s2, s3) = (partial(1_000), partial(10_000), partial(100_000));
        // k^{-0.7} partial sums grow like n^{0.3}
        assert!(s2 - s1 > 5.0 && s3 - s2 > 10.0, "{s1} {s2} {s3}");
    }

    #[test]
    fn validation() {
        let cfg = NetworkConfig::<f64>::new(
            vec![2, 3, 1],
            None,
            vec![1e-2, 1e-3],
            crate::net::Activation::Tanh,
            crate::net::OutputKind::Continuous,
        )
        .unwrap();
        let s = TrainingSchedule::for_network(&cfg);
        s.validate(&cfg).unwrap();
        let mut bad = s.clone();
        bad.t_mc = 0;
        assert!(bad.validate(&cfg).is_err());
        let mut bad = s.clone();
        bad.param_decay = 2.5;
        assert!(bad.validate(&cfg).is_err());
        let mut bad = s.clone();
        bad.impute_lr = vec![1e-3, 1e-3];
        assert!(bad.validate(&cfg).is_err());
        let mut bad = s.clone();
        bad.prune_epochs = vec![s.epochs_train + 1];
        assert!(bad.validate(&cfg).is_err());
    }

    #[test]
    fn network_scaled_rates() {
        let cfg = NetworkConfig::<f64>::new(
            vec![3, 4, 4, 4, 1],
            None,
            vec![1e-3, 1e-5, 1e-7, 1e-9],
            crate::net::Activation::Tanh,
            crate::net::OutputKind::Continuous,
        )
        .unwrap();
        let s = TrainingSchedule::for_network(&cfg);
        for (e, want) in s.impute_lr.iter().zip([3e-3, 3e-4, 1e-6]) {
            assert!((e / want - 1.0).abs() < 1e-9, "{e} vs {want}");
        }
        let b = s.batch_size as f64;
        for (g, want) in s.param_lr.iter().zip([1e-3, 1e-5, 1e-7, 1e-12]) {
            assert!((g * b / want - 1.0).abs() < 1e-9, "{g} vs {want}");
        }
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn strictly_decreasing(base in 1e-8f64..1.0, exp in 0.05f64..2.0, k in 0usize..100_000, offset in 0.01f64..10.0) {
                for form in [ScheduleForm::Decay, ScheduleForm::Polynomial { offset }] {
                    let a = lr_schedule(k, base, form, exp).unwrap();
                    let b = lr_schedule(k + 1, base, form, exp).unwrap();
                    prop_assert!(b < a && b > 0.0);
                }
            }
        }
    }
}
