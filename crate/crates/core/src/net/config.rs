use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    /// Linear units; used for closed-form calibration networks.
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => crate::scalar::sigmoid(x),
            Activation::Relu => x.max(T::zero()),
            Activation::Identity => x,
        }
    }

    /// Derivative; the ReLU subgradient at 0 is 0.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::Sigmoid => {
                let s = crate::scalar::sigmoid(x);
                s * (T::one() - s)
            }
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Identity => T::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::Parameter(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    /// Gaussian outcome with variance equal to the last noise variance.
    Continuous,
    /// Binary outcome; the last noise variance acts as a logistic temperature.
    Binary,
}

impl OutputKind {
    pub fn name(self) -> &'static str {
        match self {
            OutputKind::Continuous => "continuous",
            OutputKind::Binary => "binary",
        }
    }
}

impl std::str::FromStr for OutputKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(OutputKind::Continuous),
            "binary" => Ok(OutputKind::Binary),
            other => Err(Error::Parameter(format!("unknown output kind `{other}`"))),
        }
    }
}

/// Location of the visible treatment unit. `layer` is 1-based over hidden
/// layers, `position` indexes a neuron inside that layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreatmentSlot {
    pub layer: usize,
    pub position: usize,
}

/// Topology and noise model of a (Causal-)StoNet.
///
/// `layer_widths = [p, d_1, .., d_h, d_out]`. Layer `i` (1-based, up to
/// `h + 1`) maps width `layer_widths[i - 1]` to `layer_widths[i]` and carries
/// noise variance `noise_variances[i - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig<T> {
    pub layer_widths: Vec<usize>,
    pub treatment: Option<TreatmentSlot>,
    pub noise_variances: Vec<T>,
    pub activation: Activation,
    pub output_kind: OutputKind,
    /// Temperature of the treatment unit's Bernoulli term.
    pub treatment_temperature: T,
    /// Exponent on the treatment unit's Bernoulli likelihood (1 = untempered).
    pub treatment_weight: T,
}

impl<T: Scalar> NetworkConfig<T> {
    pub fn new(
        layer_widths: Vec<usize>,
        treatment: Option<TreatmentSlot>,
        noise_variances: Vec<T>,
        activation: Activation,
        output_kind: OutputKind,
    ) -> Result<Self> {
        let config = Self {
            layer_widths,
            treatment,
            noise_variances,
            activation,
            output_kind,
            treatment_temperature: T::one(),
            treatment_weight: T::one(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(Error::Structure(
                "layer_widths needs at least an input and an output width".into(),
            ));
        }
        if let Some(i) = self.layer_widths.iter().position(|&w| w == 0) {
            return Err(Error::Structure(format!("layer width {i} is zero")));
        }
        let h = self.num_hidden();
        if self.noise_variances.len() != h + 1 {
            return Err(Error::Structure(format!(
                "expected {} noise variances, got {}",
                h + 1,
                self.noise_variances.len()
            )));
        }
        if let Some(v) = self
            .noise_variances
            .iter()
            .find(|v| !(**v > T::zero()) || !v.is_finite())
        {
            return Err(Error::Parameter(format!(
                "noise variances must be positive and finite, got {v}"
            )));
        }
        if !(self.treatment_temperature > T::zero()) {
            return Err(Error::Parameter(
                "treatment temperature must be positive".into(),
            ));
        }
        if !(self.treatment_weight > T::zero()) || !self.treatment_weight.is_finite() {
            return Err(Error::Parameter("treatment weight must be positive and finite".into()));
        }
        if let Some(slot) = self.treatment {
            if slot.layer == 0 || slot.layer > h {
                return Err(Error::Structure(format!(
                    "treatment layer {} is not a hidden layer (1..={h})",
                    slot.layer
                )));
            }
            if slot.position >= self.layer_widths[slot.layer] {
                return Err(Error::Structure(format!(
                    "treatment position {} exceeds width {} of layer {}",
                    slot.position, self.layer_widths[slot.layer], slot.layer
                )));
            }
        }
        Ok(())
    }

    /// Soft checks: conditions the theory wants but training tolerates.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, pair) in self.noise_variances.windows(2).enumerate() {
            if pair[1] < pair[0] {
                out.push(format!(
                    "noise variance of layer {} ({}) is below that of layer {} ({})",
                    i + 2,
                    pair[1],
                    i + 1,
                    pair[0]
                ));
            }
        }
        out
    }

    #[inline]
    pub fn num_hidden(&self) -> usize {
        self.layer_widths.len() - 2
    }

    /// Number of parameterized layers, `h + 1`.
    #[inline]
    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().expect("validated")
    }

    #[inline]
    pub fn width(&self, layer: usize) -> usize {
        self.layer_widths[layer]
    }

    #[inline]
    pub fn noise_variance(&self, layer: usize) -> T {
        self.noise_variances[layer - 1]
    }

    /// Treatment position if `layer` hosts the treatment unit.
    #[inline]
    pub fn treatment_in(&self, layer: usize) -> Option<usize> {
        match self.treatment {
            Some(slot) if slot.layer == layer => Some(slot.position),
            _ => None,
        }
    }
}
