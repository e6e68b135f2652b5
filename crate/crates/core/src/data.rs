//! Observational dataset: covariates with a missingness mask, binary
//! treatment, scalar outcome, and optional ground truth from a simulator.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ground truth a simulator knows about its own draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth<T> {
    /// Population average treatment effect.
    pub ate: T,
    /// `τ(x_i)` per sample.
    pub cate: Vec<T>,
    /// `P(A = 1 | x_i)` per sample under the generating mechanism.
    pub propensity: Vec<T>,
    /// 0-based covariates the treatment depends on.
    pub treatment_covariates: BTreeSet<usize>,
    /// 0-based covariates the outcome depends on.
    pub outcome_covariates: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    n: usize,
    p: usize,
    /// Row-major `n x p`; missing cells hold NaN.
    covariates: Vec<T>,
    /// Per-row indices of missing covariates.
    missing: Vec<Vec<usize>>,
    pub treatment: Vec<T>,
    pub outcome: Vec<T>,
    pub truth: Option<Truth<T>>,
}

impl<T: Scalar> Dataset<T> {
    /// `observed[i * p + j] == false` marks a missing cell; its covariate value is ignored.
    pub fn new(
        p: usize,
        mut covariates: Vec<T>,
        observed: Option<&[bool]>,
        treatment: Vec<T>,
        outcome: Vec<T>,
    ) -> Result<Self> {
        let n = treatment.len();
        if outcome.len() != n {
            return Err(Error::Input(format!(
                "{} treatments but {} outcomes",
                n,
                outcome.len()
            )));
        }
        if p == 0 || covariates.len() != n * p {
            return Err(Error::Input(format!(
                "covariate matrix has {} cells, expected {n} x {p}",
                covariates.len()
            )));
        }
        if let Some(a) = treatment.iter().find(|&&a| a != T::zero() && a != T::one()) {
            return Err(Error::Input(format!("treatment must be 0 or 1, got {a}")));
        }
        let mut missing = vec![Vec::new(); n];
        if let Some(mask) = observed {
            if mask.len() != n * p {
                return Err(Error::Input("observation mask shape differs from covariates".into()));
            }
            for (idx, &obs) in mask.iter().enumerate() {
                if !obs {
                    missing[idx / p].push(idx % p);
                    covariates[idx] = T::nan();
                }
            }
        }
        for (idx, v) in covariates.iter().enumerate() {
            if !v.is_finite() && !missing[idx / p].contains(&(idx % p)) {
                return Err(Error::Input(format!(
                    "non-finite covariate at row {}, column {}",
                    idx / p,
                    idx % p
                )));
            }
        }
        if outcome.iter().any(|y| !y.is_finite()) {
            return Err(Error::Input("non-finite outcome".into()));
        }
        Ok(Self {
            n,
            p,
            covariates,
            missing,
            treatment,
            outcome,
            truth: None,
        })
    }

    pub fn with_truth(mut self, truth: Truth<T>) -> Result<Self> {
        if truth.cate.len() != self.n || truth.propensity.len() != self.n {
            return Err(Error::Input("truth vectors do not match the sample size".into()));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn num_covariates(&self) -> usize {
        self.p
    }

    /// Covariate row; missing entries are NaN.
    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.covariates[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn missing(&self, i: usize) -> &[usize] {
        &self.missing[i]
    }

    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        !self.missing[i].contains(&j)
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|m| !m.is_empty())
    }

    pub fn num_missing(&self) -> usize {
        self.missing.iter().map(Vec::len).sum()
    }

    pub fn covariates(&self) -> &[T] {
        &self.covariates
    }

    /// Row-major observation mask (`true` = observed).
    pub fn observed_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.n * self.p];
        for (i, m) in self.missing.iter().enumerate() {
            for &j in m {
                mask[i * self.p + j] = false;
            }
        }
        mask
    }

    /// Copy with missing cells replaced row by row through `fill`.
    pub fn completed(&self, mut fill: impl FnMut(usize, &[usize], &mut [T])) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            if self.missing[i].is_empty() {
                continue;
            }
            let row = &mut out.covariates[i * self.p..(i + 1) * self.p];
            fill(i, &self.missing[i], row);
            out.missing[i].clear();
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        let conv = |v: &[T]| v.iter().map(|&x| U::of(x.f64())).collect::<Vec<U>>();
        Dataset {
            n: self.n,
            p: self.p,
            covariates: conv(&self.covariates),
            missing: self.missing.clone(),
            treatment: conv(&self.treatment),
            outcome: conv(&self.outcome),
            truth: self.truth.as_ref().map(|t| Truth {
                ate: U::of(t.ate.f64()),
                cate: conv(&t.cate),
                propensity: conv(&t.propensity),
                treatment_covariates: t.treatment_covariates.clone(),
                outcome_covariates: t.outcome_covariates.clone(),
            }),
        }
    }

    pub fn num_treated(&self) -> usize {
        self.treatment.iter().filter(|&&a| a == T::one()).count()
    }
}
