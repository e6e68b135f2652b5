use super::sampler::Imputed;
use crate::error::{Error, Result};
use crate::net::{NetworkParameters, SparsityMask};
use crate::prior::PriorHyperparameters;
use crate::scalar::Scalar;

/// Stochastic-approximation step
/// `θ_i ← θ_i + γ_i (Σ_s ∇_{θ_i} log π(Y_i | Y_{i-1}) + (|S| / n) ∇_{θ_i} log π(θ))`.
///
/// Layer `i` reads only `inputs[i-1]` (the activated `Y_{i-1}`) and
/// `deltas[i-1]` of each imputed sample. With a mask the masked entries are
/// projected back to exactly zero.
pub fn sa_update<T: Scalar>(
    params: &mut NetworkParameters<T>,
    hyper: &PriorHyperparameters<T>,
    batch: &[Imputed<T>],
    gamma: &[T],
    n: usize,
    mask: Option<&SparsityMask>,
    clip_norm: Option<T>,
) -> Result<()> {
    if gamma.len() != params.layers.len() {
        return Err(Error::Parameter("one parameter step size per layer required".into()));
    }
    if n == 0 || batch.len() > n {
        return Err(Error::Parameter(format!("batch of {} from {n} samples", batch.len())));
    }
    let prior = hyper.grad_log_prior(params)?;
    let prior_scale = T::of(batch.len() as f64) / T::of(n as f64);
    for (idx, layer) in params.layers.iter_mut().enumerate() {
        let cols = layer.weights.cols();
        let mut dw = prior.layers[idx].weights.as_slice().iter().map(|&g| g * prior_scale).collect::<Vec<T>>();
        let mut db = prior.layers[idx].bias.iter().map(|&g| g * prior_scale).collect::<Vec<T>>();
        for s in batch {
            let input = &s.inputs[idx];
            for (r, &d) in s.deltas[idx].iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                for (w, &a) in dw[r * cols..(r + 1) * cols].iter_mut().zip(input) {
                    *w = *w + d * a;
                }
                db[r] = db[r] + d;
            }
        }
        if let Some(m) = mask {
            let lm = &m.layers[idx];
            for (g, &keep) in dw.iter_mut().zip(&lm.weights) {
                if !keep {
                    *g = T::zero();
                }
            }
            for (g, &keep) in db.iter_mut().zip(&lm.bias) {
                if !keep {
                    *g = T::zero();
                }
            }
        }
        let mut step = gamma[idx];
        if let Some(c) = clip_norm {
            let norm = dw.iter().chain(&db).map(|&g| g * g).sum::<T>().sqrt();
            if norm > c {
                step = step * c / norm;
            }
        }
        for (w, g) in layer.weights.as_mut_slice().iter_mut().zip(dw) {
            *w = *w + step * g;
        }
        for (b, g) in layer.bias.iter_mut().zip(db) {
            *b = *b + step * g;
        }
    }
    if let Some(m) = mask {
        m.apply(params);
    }
    params
        .check_finite()
        .map_err(|_| Error::numeric("non-finite parameter after stochastic-approximation update"))
}
