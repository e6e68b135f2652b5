//! Causal quantities from a fitted network: propensity scores, potential
//! outcomes, the AIPW average treatment effect with its variance estimate and
//! normal-theory interval, conditional effects, and the covariates each
//! sub-model uses.

use std::collections::BTreeSet;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::net::{NetworkParameters, StoNet};
use crate::scalar::Scalar;
use crate::trainer::{completed_row, FittedModel};

/// Default propensity clipping constant.
pub const DEFAULT_KAPPA: f64 = 0.01;

/// Per-sample model predictions feeding the AIPW estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions<T> {
    /// Clipped `p̂(x_i)`.
    pub propensity: Vec<T>,
    pub mu0: Vec<T>,
    pub mu1: Vec<T>,
}

impl<T: Scalar> Predictions<T> {
    pub fn len(&self) -> usize {
        self.propensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.propensity.is_empty()
    }

    pub fn cate(&self) -> Vec<T> {
        self.mu1.iter().zip(&self.mu0).map(|(&a, &b)| a - b).collect()
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.mu0.len() != self.propensity.len() || self.mu1.len() != self.propensity.len() {
            return Err(Error::Input("prediction vectors differ in length".into()));
        }
        if self.propensity.len() != n {
            return Err(Error::Input(format!(
                "{} predictions for {n} samples",
                self.propensity.len()
            )));
        }
        if n == 0 {
            return Err(Error::Input("empty dataset".into()));
        }
        if let Some(p) = self.propensity.iter().find(|&&p| !(p > T::zero() && p < T::one())) {
            return Err(Error::Input(format!("propensity {p} outside (0, 1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AteEstimate<T> {
    pub tau_hat: T,
    pub v_hat: T,
    pub n: usize,
    pub alpha: T,
    pub ci: (T, T),
    /// `φ_i`, with `τ̂ = mean(φ_i)`.
    pub influence: Vec<T>,
}

/// Components of the variance estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate<T> {
    pub v_hat: T,
    /// Augmented potential-outcome means `(μ̂_0, μ̂_1)`.
    pub mu_hat: (T, T),
    /// Sample treatment fractions `(p̂_0, p̂_1)`; diagnostic only.
    pub p_hat: (T, T),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionReport {
    /// 0-based covariates with an unmasked path into the treatment unit.
    pub treatment_model_covariates: BTreeSet<usize>,
    /// 0-based covariates with an unmasked path to the output.
    pub outcome_model_covariates: BTreeSet<usize>,
    /// Whether the treatment unit has an unmasked path to the output.
    pub treatment_reaches_output: bool,
}

pub fn clip<T: Scalar>(p: T, kappa: T) -> T {
    p.max(kappa).min(T::one() - kappa)
}

fn check_kappa<T: Scalar>(kappa: T) -> Result<()> {
    if kappa >= T::zero() && kappa < T::half() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("clipping constant must lie in [0, 0.5), got {kappa}")))
    }
}

/// Clipped propensity score `p̂(x)`.
pub fn propensity<T: Scalar>(fitted: &FittedModel<T>, x: &[T], kappa: T) -> Result<T> {
    check_kappa(kappa)?;
    propensity_with(&fitted.net()?, x, kappa)
}

fn propensity_with<T: Scalar>(net: &StoNet<'_, T>, x: &[T], kappa: T) -> Result<T> {
    let p = net
        .propensity(x)?
        .ok_or_else(|| Error::Structure("network has no treatment unit".into()))?;
    Ok(clip(p, kappa))
}

/// `μ̂(x, a)`: regression mean, or class-1 probability for a binary outcome.
pub fn outcome<T: Scalar>(fitted: &FittedModel<T>, x: &[T], a: T) -> Result<T> {
    Ok(fitted.net()?.forward(x, a)?.output[0])
}

/// `μ̂(x, 1) − μ̂(x, 0)`.
pub fn cate<T: Scalar>(fitted: &FittedModel<T>, x: &[T]) -> Result<T> {
    let net = fitted.net()?;
    Ok(net.forward(x, T::one())?.output[0] - net.forward(x, T::zero())?.output[0])
}

fn predict_with<T: Scalar>(
    net: &StoNet<'_, T>,
    ds: &Dataset<T>,
    imputations: Option<&[Vec<T>]>,
    kappa: T,
) -> Result<Predictions<T>> {
    let n = ds.len();
    let mut preds = Predictions {
        propensity: Vec::with_capacity(n),
        mu0: Vec::with_capacity(n),
        mu1: Vec::with_capacity(n),
    };
    for i in 0..n {
        let x = completed_row(ds, i, imputations)?;
        let f0 = net.forward(&x, T::zero())?;
        let logit = f0
            .propensity_logit
            .ok_or_else(|| Error::Structure("network has no treatment unit".into()))?;
        let p = crate::scalar::sigmoid(logit / net.config().treatment_temperature);
        preds.propensity.push(clip(p, kappa));
        preds.mu0.push(f0.output[0]);
        preds.mu1.push(net.forward(&x, T::one())?.output[0]);
    }
    Ok(preds)
}

/// Predictions of the final model; rows with missing covariates use the
/// model's final imputations, which must belong to this dataset.
pub fn predict<T: Scalar>(fitted: &FittedModel<T>, ds: &Dataset<T>, kappa: T) -> Result<Predictions<T>> {
    check_kappa(kappa)?;
    let imputations = (fitted.imputations.len() == ds.len()).then_some(fitted.imputations.as_slice());
    predict_with(&fitted.net()?, ds, imputations, kappa)
}

/// Influence terms `φ_i = μ̂_1 − μ̂_0 + A(y − μ̂_1)/p̂ − (1 − A)(y − μ̂_0)/(1 − p̂)`.
pub fn influence<T: Scalar>(treatment: &[T], outcome: &[T], preds: &Predictions<T>) -> Result<Vec<T>> {
    preds.check(treatment.len())?;
    if outcome.len() != treatment.len() {
        return Err(Error::Input("treatment and outcome lengths differ".into()));
    }
    Ok((0..treatment.len())
        .map(|i| {
            let (a, y, p) = (treatment[i], outcome[i], preds.propensity[i]);
            let (m0, m1) = (preds.mu0[i], preds.mu1[i]);
            m1 - m0 + a * (y - m1) / p - (T::one() - a) * (y - m0) / (T::one() - p)
        })
        .collect())
}

/// Variance estimate of the AIPW estimator:
/// `E_n[A r_1²/p̂² + (1 − A) r_0²/(1 − p̂)²] + E_n[((μ̂_1(x) − μ̂_1) − (μ̂_0(x) − μ̂_0))²]`
/// with `μ̂_a = E_n[1(A = a)(y − μ̂_a(x))/p̂_a(x) + μ̂_a(x)]`.
pub fn variance_estimate<T: Scalar>(
    treatment: &[T],
    outcome: &[T],
    preds: &Predictions<T>,
) -> Result<VarianceEstimate<T>> {
    let n = treatment.len();
    preds.check(n)?;
    if outcome.len() != n {
        return Err(Error::Input("treatment and outcome lengths differ".into()));
    }
    let nf = T::of(n as f64);
    let mut mean1 = T::zero();
    let mut mean0 = T::zero();
    let mut resid = T::zero();
    for i in 0..n {
        let (a, y, p) = (treatment[i], outcome[i], preds.propensity[i]);
        let q = T::one() - p;
        let (r0, r1) = (y - preds.mu0[i], y - preds.mu1[i]);
        mean1 = mean1 + a * r1 / p + preds.mu1[i];
        mean0 = mean0 + (T::one() - a) * r0 / q + preds.mu0[i];
        resid = resid + a * r1 * r1 / (p * p) + (T::one() - a) * r0 * r0 / (q * q);
    }
    let (mean0, mean1) = (mean0 / nf, mean1 / nf);
    let spread = (0..n)
        .map(|i| {
            let d = (preds.mu1[i] - mean1) - (preds.mu0[i] - mean0);
            d * d
        })
        .sum::<T>();
    let treated = treatment.iter().copied().sum::<T>() / nf;
    Ok(VarianceEstimate {
        v_hat: resid / nf + spread / nf,
        mu_hat: (mean0, mean1),
        p_hat: (T::one() - treated, treated),
    })
}

/// `τ̂ ± z_{1−α/2} √(V̂ / n)`.
pub fn confidence_interval<T: Scalar>(tau_hat: T, v_hat: T, n: usize, alpha: T) -> Result<(T, T)> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(v_hat >= T::zero()) || n == 0 {
        return Err(Error::Parameter("interval needs v_hat >= 0 and n > 0".into()));
    }
    let z = Normal::standard().inverse_cdf(1.0 - alpha.f64() / 2.0);
    let half = T::of(z) * (v_hat / T::of(n as f64)).sqrt();
    Ok((tau_hat - half, tau_hat + half))
}

/// AIPW estimate from precomputed predictions.
pub fn aipw_from_predictions<T: Scalar>(
    treatment: &[T],
    outcome: &[T],
    preds: &Predictions<T>,
    alpha: T,
) -> Result<AteEstimate<T>> {
    let influence = influence(treatment, outcome, preds)?;
    let n = influence.len();
    let tau_hat = influence.iter().copied().sum::<T>() / T::of(n as f64);
    let v_hat = variance_estimate(treatment, outcome, preds)?.v_hat;
    Ok(AteEstimate {
        tau_hat,
        v_hat,
        n,
        alpha,
        ci: confidence_interval(tau_hat, v_hat, n, alpha)?,
        influence,
    })
}

/// AIPW average treatment effect of `ds` under the fitted model.
///
/// With missing covariates (the training data) the estimator, its influence
/// terms and its variance are averaged over the stored trajectory tail, each
/// iterate using its own parameters and imputations.
pub fn aipw_ate<T: Scalar>(fitted: &FittedModel<T>, ds: &Dataset<T>, kappa: T, alpha: T) -> Result<AteEstimate<T>> {
    check_kappa(kappa)?;
    if ds.is_empty() {
        return Err(Error::Input("empty dataset".into()));
    }
    if !ds.has_missing() {
        let preds = predict(fitted, ds, kappa)?;
        return aipw_from_predictions(&ds.treatment, &ds.outcome, &preds, alpha);
    }
    if fitted.tail.is_empty() || fitted.tail.iter().any(|pt| pt.x_mis.len() != ds.len()) {
        return Err(Error::Input(
            "dataset has missing covariates but the model stores no matching imputation trajectory".into(),
        ));
    }
    let k = T::of(fitted.tail.len() as f64);
    let mut influence_sum = vec![T::zero(); ds.len()];
    let mut v_sum = T::zero();
    for point in &fitted.tail {
        let params: &NetworkParameters<T> = &point.params;
        let net = StoNet::new(&fitted.config, params, Some(&fitted.mask))?;
        let preds = predict_with(&net, ds, Some(&point.x_mis), kappa)?;
        for (s, v) in influence_sum.iter_mut().zip(influence(&ds.treatment, &ds.outcome, &preds)?) {
            *s = *s + v;
        }
        v_sum = v_sum + variance_estimate(&ds.treatment, &ds.outcome, &preds)?.v_hat;
    }
    let influence: Vec<T> = influence_sum.into_iter().map(|v| v / k).collect();
    let n = influence.len();
    let tau_hat = influence.iter().copied().sum::<T>() / T::of(n as f64);
    let v_hat = v_sum / k;
    Ok(AteEstimate {
        tau_hat,
        v_hat,
        n,
        alpha,
        ci: confidence_interval(tau_hat, v_hat, n, alpha)?,
        influence,
    })
}

/// Covariates reaching the treatment unit and the output through unmasked weights.
///
/// Paths into the output may pass the clamped treatment unit only through its
/// outgoing weights; covariates reaching the output that way are exactly the
/// treatment-model covariates.
pub fn selected_covariates<T: Scalar>(fitted: &FittedModel<T>) -> SelectionReport {
    let config = &fitted.config;
    let widths = &config.layer_widths;
    let layers = config.num_layers();
    let treatment_model_covariates = match config.treatment {
        Some(slot) => {
            let mut start = vec![false; widths[slot.layer]];
            start[slot.position] = true;
            reachable_inputs(fitted, slot.layer, start).0
        }
        None => BTreeSet::new(),
    };
    let (mut outcome, reaches) = reachable_inputs(fitted, layers, vec![true; widths[layers]]);
    if reaches {
        outcome.extend(&treatment_model_covariates);
    }
    SelectionReport {
        treatment_model_covariates,
        outcome_model_covariates: outcome,
        treatment_reaches_output: reaches,
    }
}

/// Inputs reached backwards from the marked units of `start_layer`. The
/// treatment unit is a dead end below the start layer; the flag reports
/// whether it was hit.
fn reachable_inputs<T: Scalar>(
    fitted: &FittedModel<T>,
    start_layer: usize,
    mut frontier: Vec<bool>,
) -> (BTreeSet<usize>, bool) {
    let config = &fitted.config;
    let mut hit_slot = false;
    for layer in (1..=start_layer).rev() {
        let cols = config.layer_widths[layer - 1];
        let mut below = vec![false; cols];
        for r in (0..frontier.len()).filter(|&r| frontier[r]) {
            if layer != start_layer && Some(r) == config.treatment_in(layer) {
                hit_slot = true;
                continue;
            }
            for (c, b) in below.iter_mut().enumerate() {
                *b = *b || fitted.mask.weight(layer, r, c, cols);
            }
        }
        frontier = below;
    }
    let inputs = (0..frontier.len()).filter(|&j| frontier[j]).collect();
    (inputs, hit_slot)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::net::{Activation, NetworkConfig, OutputKind, SparsityMask, TreatmentSlot};
    use crate::prior::PriorHyperparameters;

    fn fitted(config: NetworkConfig<f64>, params: NetworkParameters<f64>, mask: SparsityMask) -> FittedModel<f64> {
        FittedModel {
            config,
            params,
            mask,
            hyper: PriorHyperparameters::new(1e-6, 1e-5, 1e-2).unwrap(),
            run: 0,
            imputations: vec![],
            epochs: vec![],
            tail: vec![],
            bic: 0.0,
            run_bics: vec![],
        }
    }

    fn config(widths: Vec<usize>, layer: usize, position: usize, act: Activation) -> NetworkConfig<f64> {
        let h = widths.len() - 1;
        NetworkConfig::new(widths, Some(TreatmentSlot { layer, position }), vec![1e-2; h], act, OutputKind::Continuous)
            .unwrap()
    }

    fn seeded(cfg: &NetworkConfig<f64>, seed: u64) -> FittedModel<f64> {
        let params = NetworkParameters::random(cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        fitted(cfg.clone(), params, SparsityMask::full(cfg))
    }

    /// Straight-line forward pass written independently of the network code.
    fn oracle_forward(m: &FittedModel<f64>, x: &[f64], a: f64) -> (f64, f64) {
        let slot = m.config.treatment.unwrap();
        let mut prev = x.to_vec();
        let mut logit = f64::NAN;
        let h = m.config.num_hidden();
        for (i, l) in m.params.layers.iter().enumerate() {
            let mut next = vec![0.0; l.bias.len()];
            for r in 0..next.len() {
                let mut s = l.bias[r];
                for c in 0..prev.len() {
                    s += l.weights.get(r, c) * prev[c];
                }
                next[r] = s;
            }
            if i < h {
                for v in next.iter_mut() {
                    *v = m.config.activation.apply(*v);
                }
                if i + 1 == slot.layer {
                    logit = l.bias[slot.position]
                        + (0..prev.len()).map(|c| l.weights.get(slot.position, c) * prev[c]).sum::<f64>();
                    next[slot.position] = a;
                }
            }
            prev = next;
        }
        (prev[0], 1.0 / (1.0 + (-logit).exp()))
    }

    #[test]
    fn zero_parameters() {
        let cfg = config(vec![2, 3, 1], 1, 0, Activation::Tanh);
        let m = fitted(cfg.clone(), NetworkParameters::zeros(&cfg), SparsityMask::full(&cfg));
        assert_eq!(propensity(&m, &[0.3, -1.0], 0.01).unwrap(), 0.5);
        assert_eq!(outcome(&m, &[0.3, -1.0], 0.0).unwrap(), 0.0);
        assert_eq!(outcome(&m, &[0.3, -1.0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn propensity_monotone_in_incoming_weight() {
        let cfg = config(vec![1, 2, 1], 1, 1, Activation::Tanh);
        let mut last = 0.0;
        for step in 0..41 {
            let w = -4.0 + 0.2 * step as f64;
            let mut params = NetworkParameters::zeros(&cfg);
            params.layers[0].weights.set(1, 0, w);
            let m = fitted(cfg.clone(), params, SparsityMask::full(&cfg));
            let p = propensity(&m, &[0.7], 0.0).unwrap();
            assert!(p > last);
            last = p;
        }
        let m = seeded(&cfg, 1);
        for x in [-50.0, 50.0] {
            let p = propensity(&m, &[x], 0.05).unwrap();
            assert!((0.05..=0.95).contains(&p));
        }
    }

    #[test]
    fn outcome_and_cate_match_oracle() {
        let cfg = config(vec![3, 4, 3, 1], 2, 1, Activation::Tanh);
        for seed in 0..5 {
            let m = seeded(&cfg, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (o0, p) = oracle_forward(&m, &x, 0.0);
            let (o1, _) = oracle_forward(&m, &x, 1.0);
            assert!((outcome(&m, &x, 0.0).unwrap() - o0).abs() < 1e-12);
            assert!((outcome(&m, &x, 1.0).unwrap() - o1).abs() < 1e-12);
            assert!((cate(&m, &x).unwrap() - (o1 - o0)).abs() < 1e-12);
            assert!((propensity(&m, &x, 0.0).unwrap() - p).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_treatment_has_no_effect_and_linear_probe_is_exact() {
        let cfg = config(vec![2, 3, 2, 1], 1, 2, Activation::Identity);
        let mut m = seeded(&cfg, 3);
        for c in 0..2 {
            m.mask.layers[1].weights[c * 3 + 2] = false;
        }
        assert_eq!(cate(&m, &[0.4, 1.1]).unwrap(), 0.0);
        assert!(!selected_covariates(&m).treatment_reaches_output);
        let m = seeded(&cfg, 4);
        let w2 = &m.params.layers[1].weights;
        let w3 = &m.params.layers[2].weights;
        let c = w3.get(0, 0) * w2.get(0, 2) + w3.get(0, 1) * w2.get(1, 2);
        for x in [[0.0, 0.0], [1.0, -3.0], [5.0, 2.0]] {
            assert!((cate(&m, &x).unwrap() - c).abs() < 1e-12);
        }
    }

    fn flat(n: usize, p: f64) -> Predictions<f64> {
        Predictions { propensity: vec![p; n], mu0: vec![0.0; n], mu1: vec![0.0; n] }
    }

    #[test]
    fn aipw_arithmetic() {
        let est = aipw_from_predictions(&[1.0], &[1.0], &flat(1, 0.5), 0.05).unwrap();
        assert_eq!(est.tau_hat, 2.0);
        assert!(aipw_from_predictions(&[], &[], &flat(0, 0.5), 0.05).is_err());
        assert!(aipw_from_predictions(&[1.0], &[1.0], &flat(1, 1.0), 0.05).is_err());
    }

    #[test]
    fn aipw_matches_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 50;
        let a: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.4))).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let preds = Predictions {
            propensity: (0..n).map(|_| rng.random_range(0.05..0.95)).collect(),
            mu0: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            mu1: (0..n).map(|_| rng.random_range(-1.0..2.0)).collect(),
        };
        let mut oracle = 0.0;
        for i in 0..n {
            let (p, m0, m1) = (preds.propensity[i], preds.mu0[i], preds.mu1[i]);
            oracle += (m1 + a[i] * (y[i] - m1) / p) - (m0 + (1.0 - a[i]) * (y[i] - m0) / (1.0 - p));
        }
        oracle /= n as f64;
        let est = aipw_from_predictions(&a, &y, &preds, 0.05).unwrap();
        assert!((est.tau_hat - oracle).abs() < 1e-12);
        assert!(est.ci.0 <= est.tau_hat && est.tau_hat <= est.ci.1);
    }

    #[test]
    fn variance_examples() {
        let v = variance_estimate(&[1.0, 0.0], &[1.0, 1.0], &flat(2, 0.5)).unwrap();
        // first term mean(1/0.25, 1/0.25); μ̂_1 = μ̂_0 = 1 so the second term is 0
        assert_eq!(v.v_hat, 4.0);
        assert_eq!(v.mu_hat, (1.0, 1.0));
        assert_eq!(v.p_hat, (0.5, 0.5));
        let preds = Predictions::<f64> { propensity: vec![0.3, 0.6, 0.8], mu0: vec![1.0, 2.0, 3.0], mu1: vec![1.5, 2.5, 3.5] };
        let a = [1.0, 0.0, 1.0];
        let y = [1.5, 2.0, 3.5];
        assert!(variance_estimate(&a, &y, &preds).unwrap().v_hat.abs() < 1e-15);
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 20;
            let a: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.5))).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let preds = Predictions {
                propensity: (0..n).map(|_| rng.random_range(0.01..0.99)).collect(),
                mu0: (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
                mu1: (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
            };
            assert!(variance_estimate(&a, &y, &preds).unwrap().v_hat >= 0.0);
        }
    }

    #[test]
    fn interval_quantile() {
        // z_{0.975} located by bisection on a Simpson-integrated normal CDF
        let cdf = |z: f64| {
            let steps = 20_000;
            let h = z / steps as f64;
            let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mut s = pdf(0.0) + pdf(z);
            for k in 1..steps {
                s += pdf(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            0.5 + s * h / 3.0
        };
        let (mut lo, mut hi) = (1.0, 3.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.975 { lo = mid } else { hi = mid }
        }
        let (l, u) = confidence_interval(0.0f64, 1.0, 100, 0.05).unwrap();
        assert!((u - 0.1959964).abs() < 1e-7 && (l + u).abs() < 1e-15);
        assert!((u - lo / 10.0).abs() < 1e-10);
        assert_eq!(confidence_interval(0.3, 2.0, 50, 1.0).unwrap(), (0.3, 0.3));
        let w1 = confidence_interval(0.0f64, 2.0, 40, 0.1).unwrap();
        let w4 = confidence_interval(0.0f64, 2.0, 160, 0.1).unwrap();
        assert!(((w1.1 - w1.0) / (w4.1 - w4.0) - 2.0).abs() < 1e-12);
        assert!(confidence_interval(0.0, 1.0, 10, 0.0).is_err());
    }

    #[test]
    fn selection_examples() {
        let cfg = config(vec![4, 3, 2, 1], 2, 1, Activation::Tanh);
        let dense = seeded(&cfg, 5);
        let all: BTreeSet<usize> = (0..4).collect();
        let rep = selected_covariates(&dense);
        assert_eq!(rep.treatment_model_covariates, all);
        assert_eq!(rep.outcome_model_covariates, all);
        // only x_3 -> hidden unit 0 -> treatment unit -> output
        let mut chain = dense.clone();
        chain.mask = SparsityMask::filled(&cfg, false);
        chain.mask.layers[0].weights[2] = true;
        chain.mask.layers[1].weights[3] = true;
        chain.mask.layers[2].weights[1] = true;
        let rep = selected_covariates(&chain);
        assert_eq!(rep.treatment_model_covariates, BTreeSet::from([2]));
        assert_eq!(rep.outcome_model_covariates, BTreeSet::from([2]));
        assert!(rep.treatment_reaches_output);
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

        proptest! {
            #[test]
            fn zero_residual_identity(
                rows in proptest::collection::vec((0.001f64..0.999, -5.0f64..5.0, -5.0f64..5.0, any::<bool>()), 1..40)
            ) {
                let preds = Predictions {
                    propensity: rows.iter().map(|r| r.0).collect(),
                    mu0: rows.iter().map(|r| r.1).collect(),
                    mu1: rows.iter().map(|r| r.2).collect(),
                };
                let a: Vec<f64> = rows.iter().map(|r| f64::from(r.3)).collect();
                let y: Vec<f64> = rows.iter().map(|r| if r.3 { r.2 } else { r.1 }).collect();
                let est = aipw_from_predictions(&a, &y, &preds, 0.05).unwrap();
                let plug = preds.cate().iter().sum::<f64>() / rows.len() as f64;
                prop_assert!((est.tau_hat - plug).abs() < 1e-12);
            }

            #[test]
            fn selection_subset_and_effect_presence(seed in 0u64..1000, density in 0.2f64..0.9) {
                let cfg = config(vec![5, 4, 3, 1], 1, 2, Activation::Tanh);
                let mut m = seeded(&cfg, seed);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
                for keep in m.mask.entries_mut() {
                    *keep = rng.random_bool(density);
                }
                let rep = selected_covariates(&m);
                if rep.treatment_reaches_output {
                    prop_assert!(rep.treatment_model_covariates.is_subset(&rep.outcome_model_covariates));
                }
                let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
                let effect = cate(&m, &x).unwrap();
                prop_assert_eq!(effect != 0.0, rep.treatment_reaches_output);
                for p in [0.0, 0.2] {
                    let q = propensity(&m, &x, p).unwrap();
                    prop_assert!(q >= p && q <= 1.0 - p);
                }
            }
        }
    }
}
