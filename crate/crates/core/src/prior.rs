//! Spike-and-slab mixture Gaussian prior on every network parameter:
//! `θ ~ λ N(0, σ1²) + (1 − λ) N(0, σ0²)`.
//!
//! All responsibility math happens in log space; with `λ = 1e-6` and a tiny
//! spike variance the raw densities under- or overflow.

use crate::error::{Error, Result};
use crate::net::{NetworkParameters, SparsityMask};
use crate::scalar::{log_add_exp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorHyperparameters<T> {
    /// Slab weight `λ ∈ (0, 1)`.
    pub lambda: T,
    /// Spike variance `σ0²`.
    pub sigma0_sq: T,
    /// Slab variance `σ1²`, strictly larger than the spike variance.
    pub sigma1_sq: T,
    /// Whether biases carry the prior (and can be pruned) like weights.
    pub penalize_bias: bool,
}

impl<T: Scalar> PriorHyperparameters<T> {
    pub fn new(lambda: T, sigma0_sq: T, sigma1_sq: T) -> Result<Self> {
        let hyper = Self {
            lambda,
            sigma0_sq,
            sigma1_sq,
            penalize_bias: true,
        };
        hyper.validate()?;
        Ok(hyper)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > T::zero() && self.lambda < T::one()) {
            return Err(Error::Parameter(format!(
                "mixture proportion must lie in (0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.sigma0_sq > T::zero()) || !self.sigma1_sq.is_finite() {
            return Err(Error::Parameter("prior variances must be positive and finite".into()));
        }
        if !(self.sigma0_sq < self.sigma1_sq) {
            return Err(Error::Parameter(format!(
                "spike variance {} must be below slab variance {}",
                self.sigma0_sq, self.sigma1_sq
            )));
        }
        Ok(())
    }

    /// Log-weighted component densities `(slab, spike)` at `θ`.
    #[inline]
    fn log_components(&self, theta: T) -> (T, T) {
        let log_2pi = (T::two() * T::PI()).ln();
        let comp = |log_w: T, var: T| {
            log_w - T::half() * (log_2pi + var.ln()) - theta * theta / (T::two() * var)
        };
        (
            comp(self.lambda.ln(), self.sigma1_sq),
            comp((T::one() - self.lambda).ln(), self.sigma0_sq),
        )
    }

    /// Mixture log-density of a single scalar.
    pub fn log_density(&self, theta: T) -> T {
        let (slab, spike) = self.log_components(theta);
        log_add_exp(slab, spike)
    }

    /// Posterior probability that `θ` came from the slab.
    pub fn slab_responsibility(&self, theta: T) -> T {
        let (slab, spike) = self.log_components(theta);
        (slab - log_add_exp(slab, spike)).exp()
    }

    /// `d/dθ` of the mixture log-density.
    pub fn grad_density(&self, theta: T) -> T {
        let r = self.slab_responsibility(theta);
        -theta * (r / self.sigma1_sq + (T::one() - r) / self.sigma0_sq)
    }

    /// `|θ|` at which the spike and slab components have equal weighted density.
    pub fn sparsify_threshold(&self) -> Result<T> {
        self.validate()?;
        let s0 = self.sigma0_sq.sqrt();
        let s1 = self.sigma1_sq.sqrt();
        if !((T::one() - self.lambda) * s1 > self.lambda * s0) {
            return Err(Error::Parameter(
                "threshold undefined: (1 - λ)σ1 must exceed λσ0".into(),
            ));
        }
        let log_term = ((T::one() - self.lambda) / self.lambda * s1 / s0).ln();
        Ok(T::two().sqrt() * s0 * s1 / (self.sigma1_sq - self.sigma0_sq).sqrt() * log_term.sqrt())
    }

    fn covers(&self, is_bias: bool) -> bool {
        self.penalize_bias || !is_bias
    }

    /// Sum of the mixture log-density over every penalized parameter.
    pub fn log_prior(&self, params: &NetworkParameters<T>) -> Result<T> {
        self.validate()?;
        Ok(params
            .entries()
            .filter(|(b, _)| self.covers(*b))
            .map(|(_, v)| self.log_density(v))
            .sum())
    }

    /// Gradient of [`Self::log_prior`], shaped like the parameters.
    pub fn grad_log_prior(&self, params: &NetworkParameters<T>) -> Result<NetworkParameters<T>> {
        self.validate()?;
        let mut grad = params.clone();
        for (is_bias, v) in grad.entries_mut() {
            *v = if self.covers(is_bias) {
                self.grad_density(*v)
            } else {
                T::zero()
            };
        }
        Ok(grad)
    }

    /// Keep exactly the parameters with `|θ|` strictly above the threshold.
    /// Unpenalized biases are always kept.
    pub fn build_mask(&self, params: &NetworkParameters<T>) -> Result<SparsityMask> {
        let threshold = self.sparsify_threshold()?;
        let layers = params
            .layers
            .iter()
            .map(|l| crate::net::LayerMask {
                weights: l.weights.as_slice().iter().map(|w| w.abs() > threshold).collect(),
                bias: l
                    .bias
                    .iter()
                    .map(|b| !self.penalize_bias || b.abs() > threshold)
                    .collect(),
            })
            .collect();
        Ok(SparsityMask { layers })
    }
}
