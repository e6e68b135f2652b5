use rand::Rng;
use rand_distr::StandardNormal;

use super::covariate::CovariateModel;
use crate::error::{Error, Result};
use crate::net::{LatentState, Sample, StoNet};
use crate::scalar::Scalar;

/// Step sizes for one imputation call.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputeRates<T> {
    /// Per hidden layer.
    pub hidden: Vec<T>,
    /// Missing-covariate block.
    pub missing: T,
    /// Friction.
    pub eta: T,
}

/// Result of imputing one sample, with everything the parameter update needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Imputed<T> {
    pub latents: LatentState<T>,
    /// Activated input of each layer `1..=h+1` (the completed covariates for layer 1).
    pub inputs: Vec<Vec<T>>,
    /// `∂ log π(Y_i | Y_{i-1}) / ∂μ_i` for each layer.
    pub deltas: Vec<Vec<T>>,
    /// Complete-data log-likelihood at the final latents.
    pub log_likelihood: T,
    /// `½ Σ v²` over every momentum after the last sweep.
    pub kinetic_energy: T,
}

/// Per-sample chain with preactivations cached until their inputs move.
struct Chain<'a, T: Scalar> {
    net: &'a StoNet<'a, T>,
    sample: Sample<'a, T>,
    latents: LatentState<T>,
    x: Vec<T>,
    /// `act[i]`: activated state of layer `i`, `0..=h`.
    act: Vec<Vec<T>>,
    act_fresh: Vec<bool>,
    /// `mu[i - 1]`: preactivation of layer `i`, `1..=h+1`.
    mu: Vec<Vec<T>>,
    mu_fresh: Vec<bool>,
}

impl<'a, T: Scalar> Chain<'a, T> {
    fn new(net: &'a StoNet<'a, T>, sample: Sample<'a, T>, latents: LatentState<T>) -> Self {
        let config = net.config();
        let x = net.complete_x(&sample, &latents).into_owned();
        let layers = config.num_layers();
        Self {
            act: (0..layers).map(|i| vec![T::zero(); config.width(i)]).collect(),
            act_fresh: vec![false; layers],
            mu: (1..=layers).map(|i| vec![T::zero(); config.width(i)]).collect(),
            mu_fresh: vec![false; layers],
            net,
            sample,
            latents,
            x,
        }
    }

    fn state(&self, layer: usize) -> &[T] {
        if layer == 0 {
            &self.x
        } else if layer <= self.latents.hidden.len() {
            &self.latents.hidden[layer - 1]
        } else {
            self.sample.y
        }
    }

    fn ensure_act(&mut self, layer: usize) {
        if !self.act_fresh[layer] {
            let mut out = std::mem::take(&mut self.act[layer]);
            self.net.activate_into(layer, self.state(layer), &mut out);
            self.act[layer] = out;
            self.act_fresh[layer] = true;
        }
    }

    fn ensure_mu(&mut self, layer: usize) -> Result<()> {
        if !self.mu_fresh[layer - 1] {
            self.ensure_act(layer - 1);
            let out = &mut self.mu[layer - 1];
            self.net.preactivation_into(layer, &self.act[layer - 1], out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("non-finite preactivation in layer {layer}")));
            }
            self.mu_fresh[layer - 1] = true;
        }
        Ok(())
    }

    fn delta(&mut self, layer: usize) -> Result<Vec<T>> {
        self.ensure_mu(layer)?;
        let mut d = vec![T::zero(); self.mu[layer - 1].len()];
        self.net.delta_into(layer, &self.mu[layer - 1], self.state(layer), &mut d);
        Ok(d)
    }

    /// `W_layer^T δ_layer`.
    fn backprop(&mut self, layer: usize) -> Result<Vec<T>> {
        let delta = self.delta(layer)?;
        let mut back = vec![T::zero(); self.net.config().width(layer - 1)];
        self.net.params().layers[layer - 1].weights.transpose_mul_add(&delta, &mut back);
        Ok(back)
    }

    fn moved(&mut self, layer: usize) {
        self.act_fresh[layer] = false;
        self.mu_fresh[layer] = false;
    }

    fn sweep<R: Rng + ?Sized>(
        &mut self,
        rates: &ImputeRates<T>,
        cov: Option<&CovariateModel<T>>,
        rng: &mut R,
    ) -> Result<()> {
        let config = self.net.config();
        let eta = rates.eta;
        let act = config.activation;
        for layer in (1..=config.num_hidden()).rev() {
            let eps = rates.hidden[layer - 1];
            let var = config.noise_variance(layer);
            let slot = config.treatment_in(layer);
            let noise_scale = (T::two() * eps * eta).sqrt();
            self.ensure_mu(layer)?;
            let back = self.backprop(layer + 1)?;
            let mu = &self.mu[layer - 1];
            let y = &mut self.latents.hidden[layer - 1];
            let v = &mut self.latents.momenta[layer - 1];
            for k in 0..y.len() {
                if Some(k) == slot {
                    continue;
                }
                let g = -(y[k] - mu[k]) / var + act.derivative(y[k]) * back[k];
                let e: f64 = rng.sample(StandardNormal);
                v[k] = (T::one() - eps * eta) * v[k] + eps * g + noise_scale * T::of(e);
                y[k] = y[k] + eps * v[k];
                if !y[k].is_finite() {
                    return Err(Error::numeric(format!("non-finite latent in layer {layer}, unit {k}")));
                }
            }
            self.moved(layer);
        }
        if !self.sample.missing.is_empty() {
            let eps = rates.missing;
            let noise_scale = (T::two() * eps * eta).sqrt();
            let mut g = self.backprop(1)?;
            let prior = match cov {
                Some(c) => c.grad_log_density(&self.x, self.sample.missing),
                None => vec![T::zero(); self.sample.missing.len()],
            };
            for (m, &j) in self.sample.missing.iter().enumerate() {
                let grad = g[j] + prior[m];
                let e: f64 = rng.sample(StandardNormal);
                let v = &mut self.latents.x_momentum[m];
                *v = (T::one() - eps * eta) * *v + eps * grad + noise_scale * T::of(e);
                self.latents.x_mis[m] = self.latents.x_mis[m] + eps * *v;
                if !self.latents.x_mis[m].is_finite() {
                    return Err(Error::numeric(format!("non-finite imputed covariate x{}", j + 1)));
                }
                self.x[j] = self.latents.x_mis[m];
                g[j] = T::zero();
            }
            self.moved(0);
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Imputed<T>> {
        let config = self.net.config();
        let layers = config.num_layers();
        let mut deltas = Vec::with_capacity(layers);
        let mut log_likelihood = T::zero();
        for layer in 1..=layers {
            deltas.push(self.delta(layer)?);
            log_likelihood = log_likelihood
                + self.net.log_density_from_mu(
                    layer,
                    &self.mu[layer - 1],
                    self.state(layer),
                    config.noise_variance(layer),
                );
        }
        if !log_likelihood.is_finite() {
            return Err(Error::numeric("non-finite complete-data log-likelihood"));
        }
        let kinetic_energy = T::half()
            * self
                .latents
                .momenta
                .iter()
                .flatten()
                .chain(&self.latents.x_momentum)
                .map(|&v| v * v)
                .sum::<T>();
        Ok(Imputed {
            latents: self.latents,
            inputs: self.act,
            deltas,
            log_likelihood,
            kinetic_energy,
        })
    }
}

/// One SGHMC sweep in place: hidden layers `h, .., 1`, then the missing covariates.
pub fn sghmc_sweep<T: Scalar, R: Rng + ?Sized>(
    net: &StoNet<'_, T>,
    sample: &Sample<'_, T>,
    latents: &mut LatentState<T>,
    rates: &ImputeRates<T>,
    cov: Option<&CovariateModel<T>>,
    rng: &mut R,
) -> Result<()> {
    check_rates(net, rates)?;
    let mut chain = Chain::new(net, *sample, std::mem::replace(latents, LatentState::zeros(net.config(), 0)));
    let result = chain.sweep(rates, cov, rng);
    *latents = chain.latents;
    result
}

fn check_rates<T: Scalar>(net: &StoNet<'_, T>, rates: &ImputeRates<T>) -> Result<()> {
    if rates.hidden.len() != net.config().num_hidden() {
        return Err(Error::Parameter("one imputation step size per hidden layer required".into()));
    }
    Ok(())
}

/// Initialize latents at the forward values, zero the momenta, and run `t_mc` sweeps.
pub fn backward_impute<T: Scalar, R: Rng + ?Sized>(
    net: &StoNet<'_, T>,
    sample: &Sample<'_, T>,
    x_mis: Vec<T>,
    rates: &ImputeRates<T>,
    t_mc: usize,
    cov: Option<&CovariateModel<T>>,
    rng: &mut R,
) -> Result<Imputed<T>> {
    check_rates(net, rates)?;
    let latents = net.init_latents(sample, x_mis)?;
    let mut chain = Chain::new(net, *sample, latents);
    for _ in 0..t_mc {
        chain.sweep(rates, cov, rng)?;
    }
    chain.finish()
}
