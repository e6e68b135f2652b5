//! Synthetic benchmark generators with known ground truth, and the metrics
//! used to score estimates against it.

use std::collections::BTreeSet;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Beta, ContinuousCDF, Normal};

use crate::data::{Dataset, Truth};
use crate::error::{Error, Result};
use crate::matrix::{solve_upper_transposed, Matrix};
use crate::scalar::sigmoid;

/// `E[f(x_1) f(x_2)]` for the varying-size generator, `f(x) = 2 / (1 + e^{-x + 0.5})`,
/// from 1e7 Monte Carlo draws.
pub const VARYING_SIZE_CENTERING: f64 = 0.7133987588484538;
/// Monte Carlo standard error of [`VARYING_SIZE_CENTERING`].
pub const VARYING_SIZE_CENTERING_SE: f64 = 1.917873854884054e-4;
/// Average treatment effect of the varying-size generator.
pub const VARYING_SIZE_ATE: f64 = 3.0;
/// Average of `τ(x)` under the AR(2) generator, from 1e6 Monte Carlo draws.
pub const AR2_ATE: f64 = 3.1570639597452397;
/// Monte Carlo standard error of [`AR2_ATE`].
pub const AR2_ATE_SE: f64 = 2.4808444664773956e-3;

pub const VARYING_SIZE_P: usize = 1000;
pub const AR2_P: usize = 100;

/// Train, validation and test draws of one generator call.
#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset<f64>,
    pub val: Dataset<f64>,
    pub test: Dataset<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Complete,
    Mar,
    Mnar,
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Scenario::Complete),
            "mar" => Ok(Scenario::Mar),
            "mnar" => Ok(Scenario::Mnar),
            _ => Err(Error::Input(format!("unknown scenario `{s}` (complete, mar, mnar)"))),
        }
    }
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Complete => "complete",
            Scenario::Mar => "mar",
            Scenario::Mnar => "mnar",
        }
    }
}

/// One generated unit before the outcome is drawn.
struct Candidate {
    x: Vec<f64>,
    propensity: f64,
    a: bool,
}

/// Draw candidates until `n / 2` (rounded down) are treated and the rest control.
fn balanced<R: Rng>(n: usize, rng: &mut R, mut draw: impl FnMut(&mut R) -> (Vec<f64>, f64)) -> Vec<Candidate> {
    let want_treated = n / 2;
    let want_control = n - want_treated;
    let (mut treated, mut control) = (0, 0);
    let mut out = Vec::with_capacity(n);
    while treated < want_treated || control < want_control {
        let (x, propensity) = draw(rng);
        let a = rng.random::<f64>() < propensity;
        if a && treated < want_treated {
            treated += 1;
        } else if !a && control < want_control {
            control += 1;
        } else {
            continue;
        }
        out.push(Candidate { x, propensity, a });
    }
    out
}

fn check_sizes(sizes: [usize; 3]) -> Result<()> {
    if sizes.iter().any(|&n| n < 2) {
        return Err(Error::Input(format!("every split needs at least 2 samples, got {sizes:?}")));
    }
    Ok(())
}

fn assemble(
    p: usize,
    units: Vec<Candidate>,
    outcome: Vec<f64>,
    cate: Vec<f64>,
    observed: Option<&[bool]>,
    truth: (f64, &BTreeSet<usize>, &BTreeSet<usize>),
) -> Result<Dataset<f64>> {
    let n = units.len();
    let mut cov = Vec::with_capacity(n * p);
    let mut a = Vec::with_capacity(n);
    let mut prop = Vec::with_capacity(n);
    for u in units {
        cov.extend(u.x);
        a.push(if u.a { 1.0 } else { 0.0 });
        prop.push(u.propensity);
    }
    Dataset::new(p, cov, observed, a, outcome)?.with_truth(Truth {
        ate: truth.0,
        cate,
        propensity: prop,
        treatment_covariates: truth.1.clone(),
        outcome_covariates: truth.2.clone(),
    })
}

fn truncated_normal<R: Rng>(rng: &mut R, bound: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= bound {
            return z;
        }
    }
}

fn f_shift(x: f64) -> f64 {
    2.0 / (1.0 + (-x + 0.5).exp())
}

/// Highly correlated covariates `x_i = (e + z_i)/√2` (p = 1000), propensity in
/// `[0.25, 0.5]` driven by `x_1, x_3, x_5`, outcome
/// `5x_3/(1 + x_4²) + 2x_5 + (3 + η(x))A + 0.25 z` with
/// `η(x) = f(x_1) f(x_2) − E[f(x_1) f(x_2)]`.
pub fn gen_varying_size(n_train: usize, n_val: usize, n_test: usize, seed: u64) -> Result<Splits> {
    check_sizes([n_train, n_val, n_test])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = Normal::standard();
    let beta = Beta::new(2.0, 4.0).expect("valid shape");
    let s_a = BTreeSet::from([0, 2, 4]);
    let s_y = BTreeSet::from([0, 1, 2, 3, 4]);
    let split = |n: usize, rng: &mut ChaCha8Rng| -> Result<Dataset<f64>> {
        let units = balanced(n, rng, |rng| {
            let e = truncated_normal(rng, 10.0);
            let x: Vec<f64> = (0..VARYING_SIZE_P)
                .map(|_| (e + truncated_normal(rng, 10.0)) / std::f64::consts::SQRT_2)
                .collect();
            let prop = varying_size_propensity(&x, &phi, &beta);
            (x, prop)
        });
        let mut y = Vec::with_capacity(n);
        let mut cate = Vec::with_capacity(n);
        for u in &units {
            let x = &u.x;
            let tau = VARYING_SIZE_ATE + f_shift(x[0]) * f_shift(x[1]) - VARYING_SIZE_CENTERING;
            let base = 5.0 * x[2] / (1.0 + x[3] * x[3]) + 2.0 * x[4];
            let z: f64 = rng.sample(StandardNormal);
            y.push(base + if u.a { tau } else { 0.0 } + 0.25 * z);
            cate.push(tau);
        }
        assemble(VARYING_SIZE_P, units, y, cate, None, (VARYING_SIZE_ATE, &s_a, &s_y))
    };
    Ok(Splits {
        train: split(n_train, &mut rng)?,
        val: split(n_val, &mut rng)?,
        test: split(n_test, &mut rng)?,
    })
}

fn varying_size_propensity(x: &[f64], phi: &Normal, beta: &Beta) -> f64 {
    let s = (phi.cdf(x[0]) + phi.cdf(x[2]) + phi.cdf(x[4])) / 3.0;
    0.25 * (1.0 + beta.cdf(s))
}

/// Band precision matrix with 1 on the diagonal, 0.5 and 0.25 on the first two off-diagonals.
pub fn ar2_precision(p: usize) -> Matrix<f64> {
    Matrix::from_fn(p, p, |i, j| match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.5,
        2 => 0.25,
        _ => 0.0,
    })
}

fn ar2_parts(x: &[f64]) -> (f64, f64) {
    let t = f64::tanh;
    let u = t(-2.0 * t(2.0 * x[0] + x[3]) + t(2.0 * x[1] - 2.0 * x[2]));
    let w = t(t(2.0 * x[1] - 2.0 * x[2]) - 2.0 * t(-2.0 * x[3] + x[4]));
    (u, w)
}

/// Noise-free outcome of the AR(2) generator under treatment `a`.
pub fn ar2_mean_outcome(x: &[f64], a: f64) -> f64 {
    let (u, w) = ar2_parts(x);
    -4.0 * (u - 2.0 * a).tanh() + 2.0 * (-a + 2.0 * w).tanh()
}

/// 100 Gaussian covariates with AR(2) band precision, propensity driven by
/// `x_1, x_2, x_3, x_5`, nonlinear outcome in `x_1..x_5` with N(0, 1) noise.
/// Missingness (training split only) follows `scenario`.
pub fn gen_ar2_missing(n_train: usize, n_val: usize, n_test: usize, seed: u64, scenario: Scenario) -> Result<Splits> {
    check_sizes([n_train, n_val, n_test])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chol = ar2_precision(AR2_P).cholesky()?;
    let s_a = BTreeSet::from([0, 1, 2, 4]);
    let s_y = BTreeSet::from([0, 1, 2, 3, 4]);
    let split = |n: usize, rng: &mut ChaCha8Rng, missing: Option<Scenario>| -> Result<Dataset<f64>> {
        let units = balanced(n, rng, |rng| {
            let z: Vec<f64> = (0..AR2_P).map(|_| rng.sample(StandardNormal)).collect();
            let x = solve_upper_transposed(&chol, &z);
            let s = (-x[0] - 2.0 * x[4]).tanh() - (2.0 * x[1] - 2.0 * x[2]).tanh();
            (x, sigmoid(s))
        });
        let mut y = Vec::with_capacity(n);
        let mut cate = Vec::with_capacity(n);
        for u in &units {
            let (m0, m1) = (ar2_mean_outcome(&u.x, 0.0), ar2_mean_outcome(&u.x, 1.0));
            let e: f64 = rng.sample(StandardNormal);
            y.push(if u.a { m1 } else { m0 } + e);
            cate.push(m1 - m0);
        }
        let mut observed = vec![true; n * AR2_P];
        match missing {
            None | Some(Scenario::Complete) => {}
            Some(Scenario::Mar) => {
                for col in [0, 3] {
                    for i in sample_indices(rng, n, n / 10) {
                        observed[i * AR2_P + col] = false;
                    }
                }
            }
            Some(Scenario::Mnar) => {
                for (i, u) in units.iter().enumerate() {
                    let a = if u.a { 1.0 } else { 0.0 };
                    let (s1, s4) = mnar_logits(&u.x, a);
                    for (col, s) in [(0, s1), (3, s4)] {
                        if rng.random::<f64>() >= sigmoid(s) {
                            observed[i * AR2_P + col] = false;
                        }
                    }
                }
            }
        }
        assemble(AR2_P, units, y, cate, Some(&observed), (AR2_ATE, &s_a, &s_y))
    };
    Ok(Splits {
        train: split(n_train, &mut rng, Some(scenario))?,
        val: split(n_val, &mut rng, None)?,
        test: split(n_test, &mut rng, None)?,
    })
}

/// Observation logits `(s_1, s_4)`: `4 − 2A + Σ_j (−0.1)^{j−1} x_{2j−1}` and
/// `4 − 2A + Σ_j (−0.1)^j x_{2j}` over `j = 1..50`.
pub fn mnar_logits(x: &[f64], a: f64) -> (f64, f64) {
    let mut s1 = 4.0 - 2.0 * a;
    let mut s4 = 4.0 - 2.0 * a;
    let mut w = 1.0;
    for j in 0..AR2_P / 2 {
        s1 += w * x[2 * j];
        s4 += -0.1 * w * x[2 * j + 1];
        w *= -0.1;
    }
    (s1, s4)
}

/// Linear-Gaussian calibration design: `x ~ N(0, I)`, `logit P(A=1|x) = x·β_A`,
/// `y = x·β_Y + τ A + N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussian {
    pub beta_a: Vec<f64>,
    pub beta_y: Vec<f64>,
    pub tau: f64,
}

impl LinearGaussian {
    /// Sparse default coefficients on the first four covariates, `τ = 1`.
    pub fn new(p: usize) -> Self {
        let pad = |head: &[f64]| {
            let mut v = vec![0.0; p];
            for (d, s) in v.iter_mut().zip(head) {
                *d = *s;
            }
            v
        };
        Self {
            beta_a: pad(&[0.6, -0.4, 0.3]),
            beta_y: pad(&[1.0, 0.0, 0.5, -0.5]),
            tau: 1.0,
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset<f64>> {
        let p = self.beta_a.len();
        if p == 0 || self.beta_y.len() != p {
            return Err(Error::Input("coefficient vectors must share a positive length".into()));
        }
        if n == 0 {
            return Err(Error::Input("sample size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cov = Vec::with_capacity(n * p);
        let (mut a, mut y, mut prop) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            let x: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let e = sigmoid(crate::matrix::dot(&x, &self.beta_a));
            let t = rng.random::<f64>() < e;
            let noise: f64 = rng.sample(StandardNormal);
            y.push(crate::matrix::dot(&x, &self.beta_y) + if t { self.tau } else { 0.0 } + noise);
            a.push(if t { 1.0 } else { 0.0 });
            prop.push(e);
            cov.extend(x);
        }
        let support = |b: &[f64]| b.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, _)| j).collect();
        Dataset::new(p, cov, None, a, y)?.with_truth(Truth {
            ate: self.tau,
            cate: vec![self.tau; n],
            propensity: prop,
            treatment_covariates: support(&self.beta_a),
            outcome_covariates: support(&self.beta_y),
        })
    }
}

pub fn gen_linear_gaussian(n: usize, p: usize, seed: u64) -> Result<Dataset<f64>> {
    LinearGaussian::new(p).generate(n, seed)
}

/// Optional summary metrics of an evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsReport {
    pub mae_ate: Option<f64>,
    pub pehe: Option<f64>,
    pub fsr: Option<f64>,
    pub nsr: Option<f64>,
    pub ci_coverage: Option<f64>,
}

/// `mean |τ̂_j − τ*|`.
pub fn mae_ate(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Input("no estimates".into()));
    }
    Ok(estimates.iter().map(|e| (e - truth).abs()).sum::<f64>() / estimates.len() as f64)
}

/// `√ mean (τ̂(x_i) − τ(x_i))²`.
pub fn pehe(estimated: &[f64], truth: &[f64]) -> Result<f64> {
    if estimated.len() != truth.len() || truth.is_empty() {
        return Err(Error::Input(format!(
            "{} effect estimates for {} true effects",
            estimated.len(),
            truth.len()
        )));
    }
    let mse = estimated.iter().zip(truth).map(|(e, t)| (e - t) * (e - t)).sum::<f64>() / truth.len() as f64;
    Ok(mse.sqrt())
}

/// Pooled false and negative selection rates
/// `Σ|Ŝ_i ∖ S| / Σ|Ŝ_i|` and `Σ|S ∖ Ŝ_i| / (m |S|)`; FSR is 0 when nothing is selected.
pub fn fsr_nsr(selected: &[BTreeSet<usize>], truth: &BTreeSet<usize>) -> Result<(f64, f64)> {
    if selected.is_empty() {
        return Err(Error::Input("no selections".into()));
    }
    let chosen: usize = selected.iter().map(BTreeSet::len).sum();
    let false_sel: usize = selected.iter().map(|s| s.difference(truth).count()).sum();
    let missed: usize = selected.iter().map(|s| truth.difference(s).count()).sum();
    let fsr = if chosen == 0 { 0.0 } else { false_sel as f64 / chosen as f64 };
    let true_total = truth.len() * selected.len();
    let nsr = if true_total == 0 { 0.0 } else { missed as f64 / true_total as f64 };
    Ok((fsr, nsr))
}

/// Fraction of intervals containing `truth`.
pub fn ci_coverage(intervals: &[(f64, f64)], truth: f64) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::Input("no intervals".into()));
    }
    let hits = intervals.iter().filter(|(l, u)| *l <= truth && truth <= *u).count();
    Ok(hits as f64 / intervals.len() as f64)
}
