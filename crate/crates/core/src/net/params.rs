use rand::Rng;

use super::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    /// `d_i x d_{i-1}`.
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

/// Weights and biases of every layer; index 0 is layer 1.
///
/// The row of the treatment layer at the treatment position parameterizes the
/// propensity logit; the matching column of the following layer carries the
/// treatment's effect forward.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParameters<T> {
    pub layers: Vec<LayerParams<T>>,
}

impl<T: Scalar> NetworkParameters<T> {
    pub fn zeros(config: &NetworkConfig<T>) -> Self {
        let layers = config
            .layer_widths
            .windows(2)
            .map(|w| LayerParams {
                weights: Matrix::zeros(w[1], w[0]),
                bias: vec![T::zero(); w[1]],
            })
            .collect();
        Self { layers }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
    pub fn random<R: Rng + ?Sized>(config: &NetworkConfig<T>, rng: &mut R) -> Self {
        let mut params = Self::zeros(config);
        for layer in &mut params.layers {
            let bound = 1.0 / (layer.weights.cols() as f64).sqrt();
            for w in layer.weights.as_mut_slice() {
                *w = T::of(rng.random_range(-bound..bound));
            }
            for b in &mut layer.bias {
                *b = T::of(rng.random_range(-bound..bound));
            }
        }
        params
    }

    pub fn check_shapes(&self, config: &NetworkConfig<T>) -> Result<()> {
        if self.layers.len() != config.num_layers() {
            return Err(Error::Structure(format!(
                "parameters have {} layers, config has {}",
                self.layers.len(),
                config.num_layers()
            )));
        }
        for (i, (layer, w)) in self.layers.iter().zip(config.layer_widths.windows(2)).enumerate() {
            if layer.weights.rows() != w[1] || layer.weights.cols() != w[0] || layer.bias.len() != w[1]
            {
                return Err(Error::Structure(format!(
                    "layer {} parameters are {}x{} (+{}), expected {}x{}",
                    i + 1,
                    layer.weights.rows(),
                    layer.weights.cols(),
                    layer.bias.len(),
                    w[1],
                    w[0]
                )));
            }
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            if layer
                .weights
                .as_slice()
                .iter()
                .chain(&layer.bias)
                .any(|v| !v.is_finite())
            {
                return Err(Error::numeric(format!("non-finite parameter in layer {}", i + 1)));
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.as_slice().len() + l.bias.len())
            .sum()
    }

    /// Every scalar with a flag telling whether it is a bias.
    pub fn entries(&self) -> impl Iterator<Item = (bool, T)> + '_ {
        self.layers.iter().flat_map(|l| {
            l.weights
                .as_slice()
                .iter()
                .map(|&w| (false, w))
                .chain(l.bias.iter().map(|&b| (true, b)))
        })
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = (bool, &mut T)> + '_ {
        self.layers.iter_mut().flat_map(|l| {
            l.weights
                .as_mut_slice()
                .iter_mut()
                .map(|w| (false, w))
                .chain(l.bias.iter_mut().map(|b| (true, b)))
        })
    }

    /// Layer-wise `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, b) in self.entries_mut().zip(other.entries()) {
            *a.1 = *a.1 + scale * b.1;
        }
    }

    pub fn fill_zero(&mut self) {
        for (_, v) in self.entries_mut() {
            *v = T::zero();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerMask {
    pub weights: Vec<bool>,
    pub bias: Vec<bool>,
}

/// Connection indicators; `false` forces the matching parameter to zero in
/// every masked evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityMask {
    pub layers: Vec<LayerMask>,
}

impl SparsityMask {
    pub fn full<T: Scalar>(config: &NetworkConfig<T>) -> Self {
        Self::filled(config, true)
    }

    pub fn filled<T: Scalar>(config: &NetworkConfig<T>, value: bool) -> Self {
        let layers = config
            .layer_widths
            .windows(2)
            .map(|w| LayerMask {
                weights: vec![value; w[0] * w[1]],
                bias: vec![value; w[1]],
            })
            .collect();
        Self { layers }
    }

    pub fn check_shapes<T: Scalar>(&self, params: &NetworkParameters<T>) -> Result<()> {
        let ok = self.layers.len() == params.layers.len()
            && self.layers.iter().zip(&params.layers).all(|(m, p)| {
                m.weights.len() == p.weights.as_slice().len() && m.bias.len() == p.bias.len()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Structure("mask shape does not match parameters".into()))
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = bool> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut bool> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn count_active(&self) -> usize {
        self.entries().filter(|&m| m).count()
    }

    pub fn is_full(&self) -> bool {
        self.entries().all(|m| m)
    }

    /// Zero every masked-out parameter in place.
    pub fn apply<T: Scalar>(&self, params: &mut NetworkParameters<T>) {
        for ((_, p), m) in params.entries_mut().zip(self.entries()) {
            if !m {
                *p = T::zero();
            }
        }
    }

    /// Entry-wise AND with `other`.
    pub fn intersect(&mut self, other: &SparsityMask) {
        for (a, b) in self.entries_mut().zip(other.entries()) {
            *a = *a && b;
        }
    }

    #[inline]
    pub fn weight(&self, layer: usize, row: usize, col: usize, cols: usize) -> bool {
        self.layers[layer - 1].weights[row * cols + col]
    }
}

/// Imputed state of one sample: hidden values `Y_1..Y_h`, imputed missing
/// covariates, and SGHMC momenta.
///
/// The treatment slot of the treatment layer holds the observed treatment.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<T> {
    pub hidden: Vec<Vec<T>>,
    /// Values of the sample's missing covariates, in the order of its
    /// missing-index list.
    pub x_mis: Vec<T>,
    pub momenta: Vec<Vec<T>>,
    pub x_momentum: Vec<T>,
}

impl<T: Scalar> LatentState<T> {
    pub fn zeros(config: &NetworkConfig<T>, n_missing: usize) -> Self {
        let hidden: Vec<Vec<T>> = config.layer_widths[1..=config.num_hidden()]
            .iter()
            .map(|&w| vec![T::zero(); w])
            .collect();
        Self {
            momenta: hidden.clone(),
            hidden,
            x_mis: vec![T::zero(); n_missing],
            x_momentum: vec![T::zero(); n_missing],
        }
    }

    pub fn reset_momenta(&mut self) {
        for v in self.momenta.iter_mut().flatten() {
            *v = T::zero();
        }
        for v in &mut self.x_momentum {
            *v = T::zero();
        }
    }

    /// Whether the treatment slot equals the observed treatment `a`.
    pub fn is_clamped(&self, config: &NetworkConfig<T>, a: T) -> bool {
        match config.treatment {
            Some(slot) => self.hidden[slot.layer - 1][slot.position] == a,
            None => true,
        }
    }

    pub fn check_shapes(&self, config: &NetworkConfig<T>, n_missing: usize) -> Result<()> {
        let widths = &config.layer_widths[1..=config.num_hidden()];
        let ok = self.hidden.len() == widths.len()
            && self.hidden.iter().zip(widths).all(|(y, &w)| y.len() == w)
            && self.x_mis.len() == n_missing;
        if ok {
            Ok(())
        } else {
            Err(Error::Structure("latent state does not match the network".into()))
        }
    }
}
