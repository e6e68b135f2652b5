use std::borrow::Cow;

use super::config::{NetworkConfig, OutputKind};
use super::params::{LatentState, NetworkParameters, SparsityMask};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, softplus, Scalar};

/// One observation as seen by the network.
///
/// `x` has full length `p`; entries listed in `missing` are placeholders and
/// are replaced by the latent state's `x_mis` wherever latents are involved.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T> {
    pub x: &'a [T],
    pub treatment: T,
    pub y: &'a [T],
    pub missing: &'a [usize],
}

impl<'a, T> Sample<'a, T> {
    pub fn complete(x: &'a [T], treatment: T, y: &'a [T]) -> Self {
        Self {
            x,
            treatment,
            y,
            missing: &[],
        }
    }
}

/// Zero-noise forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward<T> {
    /// `Ỹ_1 .. Ỹ_{h+1}`; the treatment slot keeps the propensity logit.
    pub preactivations: Vec<Vec<T>>,
    pub propensity_logit: Option<T>,
    /// Regression mean, or class-1 probability for binary outcomes.
    pub output: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentGradient<T> {
    pub hidden: Vec<Vec<T>>,
    /// Gradient with respect to the missing covariates, same order as `Sample::missing`.
    pub x_mis: Vec<T>,
}

/// Evaluator over a configuration, parameters and an optional mask.
///
/// Masked parameters are zeroed once at construction, so every evaluation
/// is identical to one with those entries physically set to zero.
#[derive(Debug, Clone)]
pub struct StoNet<'a, T: Scalar> {
    config: &'a NetworkConfig<T>,
    params: Cow<'a, NetworkParameters<T>>,
    mask: Option<&'a SparsityMask>,
}

impl<'a, T: Scalar> StoNet<'a, T> {
    pub fn new(
        config: &'a NetworkConfig<T>,
        params: &'a NetworkParameters<T>,
        mask: Option<&'a SparsityMask>,
    ) -> Result<Self> {
        config.validate()?;
        params.check_shapes(config)?;
        params.check_finite()?;
        let params = match mask {
            Some(m) => {
                m.check_shapes(params)?;
                if m.is_full() {
                    Cow::Borrowed(params)
                } else {
                    let mut owned = params.clone();
                    m.apply(&mut owned);
                    Cow::Owned(owned)
                }
            }
            None => Cow::Borrowed(params),
        };
        Ok(Self {
            config,
            params,
            mask: mask.filter(|m| !m.is_full()),
        })
    }

    pub fn config(&self) -> &NetworkConfig<T> {
        self.config
    }

    /// Parameters with masked entries zeroed.
    pub fn params(&self) -> &NetworkParameters<T> {
        &self.params
    }

    pub fn mask(&self) -> Option<&SparsityMask> {
        self.mask
    }

    /// Values layer `layer` feeds forward: the raw input for layer 0,
    /// `ψ(Y)` for hidden layers with the treatment slot passed through as is.
    pub fn activate_into(&self, layer: usize, state: &[T], out: &mut [T]) {
        if layer == 0 {
            out.copy_from_slice(state);
            return;
        }
        let act = self.config.activation;
        for (o, &s) in out.iter_mut().zip(state) {
            *o = act.apply(s);
        }
        if let Some(j) = self.config.treatment_in(layer) {
            out[j] = state[j];
        }
    }

    pub fn activated(&self, layer: usize, state: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); state.len()];
        self.activate_into(layer, state, &mut out);
        out
    }

    /// `μ_i = b_i + w_i · prev` for layer `i` in `1..=h+1`.
    #[inline]
    pub fn preactivation_into(&self, layer: usize, activated_prev: &[T], out: &mut [T]) {
        let p = &self.params.layers[layer - 1];
        p.weights.affine_into(activated_prev, &p.bias, out);
    }

    /// `∂ log π(cur | μ) / ∂μ` entry-wise for layer `layer`.
    pub fn delta_into(&self, layer: usize, mu: &[T], cur: &[T], out: &mut [T]) {
        let h = self.config.num_hidden();
        if layer == h + 1 && self.config.output_kind == OutputKind::Binary {
            let temp = self.config.noise_variance(layer);
            for ((o, &m), &c) in out.iter_mut().zip(mu).zip(cur) {
                *o = (c - sigmoid(m / temp)) / temp;
            }
            return;
        }
        let var = self.config.noise_variance(layer);
        for ((o, &m), &c) in out.iter_mut().zip(mu).zip(cur) {
            *o = (c - m) / var;
        }
        if let Some(j) = self.config.treatment_in(layer) {
            let temp = self.config.treatment_temperature;
            out[j] = self.config.treatment_weight * (cur[j] - sigmoid(mu[j] / temp)) / temp;
        }
    }

    /// Map the output layer's preactivation to the reported prediction.
    pub fn output_value(&self, mu_out: &[T]) -> Vec<T> {
        match self.config.output_kind {
            OutputKind::Continuous => mu_out.to_vec(),
            OutputKind::Binary => {
                let temp = *self.config.noise_variances.last().expect("validated");
                mu_out.iter().map(|&m| sigmoid(m / temp)).collect()
            }
        }
    }

    /// Deterministic forward pass with the treatment unit clamped to `a`.
    pub fn forward(&self, x: &[T], a: T) -> Result<Forward<T>> {
        if x.len() != self.config.input_dim() {
            return Err(Error::Structure(format!(
                "covariate vector has length {}, network expects {}",
                x.len(),
                self.config.input_dim()
            )));
        }
        let n_layers = self.config.num_layers();
        let mut preactivations = Vec::with_capacity(n_layers);
        let mut propensity_logit = None;
        let mut activated = x.to_vec();
        for layer in 1..=n_layers {
            let mut mu = vec![T::zero(); self.config.width(layer)];
            self.preactivation_into(layer, &activated, &mut mu);
            if mu.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("non-finite preactivation in layer {layer}")));
            }
            if layer <= self.config.num_hidden() {
                let mut state = mu.clone();
                if let Some(j) = self.config.treatment_in(layer) {
                    propensity_logit = Some(mu[j]);
                    state[j] = a;
                }
                activated = self.activated(layer, &state);
            }
            preactivations.push(mu);
        }
        let output = self.output_value(preactivations.last().expect("at least one layer"));
        Ok(Forward {
            preactivations,
            propensity_logit,
            output,
        })
    }

    /// Propensity `P(A = 1 | x)`; `None` without a treatment unit.
    pub fn propensity(&self, x: &[T]) -> Result<Option<T>> {
        let fwd = self.forward(x, T::zero())?;
        let temp = self.config.treatment_temperature;
        Ok(fwd.propensity_logit.map(|z| sigmoid(z / temp)))
    }

    /// `x` with the missing entries replaced by the latent imputations.
    pub fn complete_x<'s>(&self, sample: &Sample<'s, T>, latents: &LatentState<T>) -> Cow<'s, [T]> {
        if sample.missing.is_empty() {
            Cow::Borrowed(sample.x)
        } else {
            let mut x = sample.x.to_vec();
            for (&j, &v) in sample.missing.iter().zip(&latents.x_mis) {
                x[j] = v;
            }
            Cow::Owned(x)
        }
    }

    /// Latents at the deterministic forward values `Ỹ_i` with momenta zero.
    pub fn init_latents(&self, sample: &Sample<'_, T>, x_mis: Vec<T>) -> Result<LatentState<T>> {
        if x_mis.len() != sample.missing.len() {
            return Err(Error::Structure("x_mis length differs from missing list".into()));
        }
        let mut latents = LatentState::zeros(self.config, x_mis.len());
        latents.x_mis = x_mis;
        let x = self.complete_x(sample, &latents).into_owned();
        let fwd = self.forward(&x, sample.treatment)?;
        for (layer, y) in latents.hidden.iter_mut().enumerate() {
            y.copy_from_slice(&fwd.preactivations[layer]);
        }
        if let Some(slot) = self.config.treatment {
            latents.hidden[slot.layer - 1][slot.position] = sample.treatment;
        }
        Ok(latents)
    }

    /// `log π(Y_i | Y_{i-1}, θ_i)` with the configured noise variance.
    ///
    /// `y_prev` is the raw state of layer `i - 1` (the covariates for `i = 1`),
    /// `y_cur` the state of layer `i` (the observed outcome for `i = h + 1`).
    pub fn layer_log_density(&self, layer: usize, y_prev: &[T], y_cur: &[T]) -> Result<T> {
        if layer == 0 || layer > self.config.num_layers() {
            return Err(Error::Structure(format!("no layer {layer}")));
        }
        self.layer_log_density_with_variance(
            layer,
            y_prev,
            y_cur,
            self.config.noise_variance(layer),
        )
    }

    /// Same as [`Self::layer_log_density`] with an explicit variance (or
    /// logistic temperature for a binary output layer).
    pub fn layer_log_density_with_variance(
        &self,
        layer: usize,
        y_prev: &[T],
        y_cur: &[T],
        variance: T,
    ) -> Result<T> {
        if !(variance > T::zero()) {
            return Err(Error::Parameter(format!(
                "noise variance must be positive, got {variance}"
            )));
        }
        if layer == 0 || layer > self.config.num_layers() {
            return Err(Error::Structure(format!("no layer {layer}")));
        }
        if y_prev.len() != self.config.width(layer - 1) || y_cur.len() != self.config.width(layer) {
            return Err(Error::Structure(format!("state widths do not match layer {layer}")));
        }
        let prev = self.activated(layer - 1, y_prev);
        let mut mu = vec![T::zero(); y_cur.len()];
        self.preactivation_into(layer, &prev, &mut mu);
        let value = self.log_density_from_mu(layer, &mu, y_cur, variance);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::numeric(format!("non-finite log-density in layer {layer}")))
        }
    }

    pub(crate) fn log_density_from_mu(&self, layer: usize, mu: &[T], cur: &[T], variance: T) -> T {
        let binary_output = layer == self.config.num_layers()
            && self.config.output_kind == OutputKind::Binary;
        if binary_output {
            return mu
                .iter()
                .zip(cur)
                .map(|(&m, &c)| bernoulli_log_mass(c, m / variance))
                .sum();
        }
        let slot = self.config.treatment_in(layer);
        let log_norm = -T::half() * (T::two() * T::PI() * variance).ln();
        let mut total = T::zero();
        for (j, (&m, &c)) in mu.iter().zip(cur).enumerate() {
            if Some(j) == slot {
                let temp = self.config.treatment_temperature;
                total = total + self.config.treatment_weight * bernoulli_log_mass(c, m / temp);
            } else {
                let r = c - m;
                total = total + log_norm - r * r / (T::two() * variance);
            }
        }
        total
    }

    fn check_sample(&self, sample: &Sample<'_, T>, latents: &LatentState<T>) -> Result<()> {
        if sample.x.len() != self.config.input_dim() {
            return Err(Error::Structure("covariate length mismatch".into()));
        }
        if sample.y.len() != self.config.output_dim() {
            return Err(Error::Structure("outcome length mismatch".into()));
        }
        latents.check_shapes(self.config, sample.missing.len())
    }

    /// State entering each layer: `[x, Y_1, .., Y_h, y]`.
    fn states<'s>(&self, x: &'s [T], sample: &Sample<'s, T>, latents: &'s LatentState<T>) -> Vec<&'s [T]> {
        let mut states: Vec<&[T]> = Vec::with_capacity(self.config.num_layers() + 1);
        states.push(x);
        states.extend(latents.hidden.iter().map(|v| v.as_slice()));
        states.push(sample.y);
        states
    }

    /// `Σ_i log π(Y_i | Y_{i-1}, θ_i)` over all layers, Gaussian normalizers included.
    pub fn complete_data_log_likelihood(
        &self,
        sample: &Sample<'_, T>,
        latents: &LatentState<T>,
    ) -> Result<T> {
        self.check_sample(sample, latents)?;
        let x = self.complete_x(sample, latents);
        let states = self.states(&x, sample, latents);
        let mut total = T::zero();
        for layer in 1..=self.config.num_layers() {
            total = total + self.layer_log_density(layer, states[layer - 1], states[layer])?;
        }
        Ok(total)
    }

    /// Per-layer `(activated input, μ, δ)` at the given latents.
    fn layer_terms(
        &self,
        x: &[T],
        sample: &Sample<'_, T>,
        latents: &LatentState<T>,
    ) -> Vec<(Vec<T>, Vec<T>, Vec<T>)> {
        let states = self.states(x, sample, latents);
        (1..=self.config.num_layers())
            .map(|layer| {
                let prev = self.activated(layer - 1, states[layer - 1]);
                let width = self.config.width(layer);
                let mut mu = vec![T::zero(); width];
                self.preactivation_into(layer, &prev, &mut mu);
                let mut delta = vec![T::zero(); width];
                self.delta_into(layer, &mu, states[layer], &mut delta);
                (prev, mu, delta)
            })
            .collect()
    }

    /// Gradient of the complete-data log-likelihood with respect to each
    /// hidden layer and the missing covariates. The treatment slot's entry is 0.
    pub fn grad_latents(
        &self,
        sample: &Sample<'_, T>,
        latents: &LatentState<T>,
    ) -> Result<LatentGradient<T>> {
        self.check_sample(sample, latents)?;
        let x = self.complete_x(sample, latents);
        let terms = self.layer_terms(&x, sample, latents);
        let act = self.config.activation;
        let mut hidden = Vec::with_capacity(self.config.num_hidden());
        for layer in 1..=self.config.num_hidden() {
            let y = &latents.hidden[layer - 1];
            let (_, mu, _) = &terms[layer - 1];
            let var = self.config.noise_variance(layer);
            let mut g: Vec<T> = y.iter().zip(mu).map(|(&yi, &m)| -(yi - m) / var).collect();
            let mut back = vec![T::zero(); y.len()];
            self.params.layers[layer]
                .weights
                .transpose_mul_add(&terms[layer].2, &mut back);
            for ((gi, &bi), &yi) in g.iter_mut().zip(&back).zip(y) {
                *gi = *gi + act.derivative(yi) * bi;
            }
            if let Some(j) = self.config.treatment_in(layer) {
                g[j] = T::zero();
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::numeric(format!("non-finite latent gradient in layer {layer}")));
            }
            hidden.push(g);
        }
        let x_mis = if sample.missing.is_empty() {
            Vec::new()
        } else {
            let mut back = vec![T::zero(); self.config.input_dim()];
            self.params.layers[0]
                .weights
                .transpose_mul_add(&terms[0].2, &mut back);
            sample.missing.iter().map(|&j| back[j]).collect()
        };
        if x_mis.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("non-finite gradient for missing covariates"));
        }
        Ok(LatentGradient { hidden, x_mis })
    }

    /// Gradient of the complete-data log-likelihood with respect to every
    /// `(w_i, b_i)`; layer `i` only reads `(Y_{i-1}, Y_i)`. Masked entries are 0.
    pub fn grad_params(
        &self,
        sample: &Sample<'_, T>,
        latents: &LatentState<T>,
    ) -> Result<NetworkParameters<T>> {
        self.check_sample(sample, latents)?;
        let x = self.complete_x(sample, latents);
        let terms = self.layer_terms(&x, sample, latents);
        let mut grad = NetworkParameters::zeros(self.config);
        for (layer, (prev, _, delta)) in terms.iter().enumerate() {
            let g = &mut grad.layers[layer];
            for (r, &d) in delta.iter().enumerate() {
                for (w, &a) in g.weights.row_mut(r).iter_mut().zip(prev) {
                    *w = d * a;
                }
                g.bias[r] = d;
            }
        }
        if let Some(mask) = self.mask {
            mask.apply(&mut grad);
        }
        grad.check_finite()?;
        Ok(grad)
    }
}

/// `log P(c | logit z)` for `c ∈ {0, 1}`.
#[inline]
pub fn bernoulli_log_mass<T: Scalar>(c: T, z: T) -> T {
    c * z - softplus(z)
}
