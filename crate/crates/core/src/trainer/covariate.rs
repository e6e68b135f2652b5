use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::{cholesky_solve, dot, Matrix};
use crate::scalar::Scalar;

/// Gaussian model of the covariates used to impute missing entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateModel<T> {
    pub mean: Vec<T>,
    pub precision: Matrix<T>,
}

/// Neighbours within `order` positions on a chain of `p` variables.
pub fn chain_neighborhood(p: usize, order: usize) -> Vec<Vec<usize>> {
    (0..p)
        .map(|j| {
            (j.saturating_sub(order)..(j + order + 1).min(p))
                .filter(|&k| k != j)
                .collect()
        })
        .collect()
}

fn observed_column<T: Scalar>(ds: &Dataset<T>, j: usize) -> impl Iterator<Item = T> + '_ {
    (0..ds.len()).filter(move |&i| ds.is_observed(i, j)).map(move |i| ds.row(i)[j])
}

fn column_means<T: Scalar>(ds: &Dataset<T>) -> Result<Vec<T>> {
    (0..ds.num_covariates())
        .map(|j| {
            let (sum, count) = observed_column(ds, j).fold((T::zero(), 0usize), |(s, c), v| (s + v, c + 1));
            if count < 2 {
                Err(Error::Input(format!("covariate x{} has fewer than two observed values", j + 1)))
            } else {
                Ok(sum / T::of(count as f64))
            }
        })
        .collect()
}

impl<T: Scalar> CovariateModel<T> {
    pub fn new(mean: Vec<T>, precision: Matrix<T>) -> Result<Self> {
        let model = Self { mean, precision };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.mean.len();
        if self.precision.rows() != p || self.precision.cols() != p {
            return Err(Error::Parameter("precision matrix does not match the mean".into()));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Parameter("non-finite covariate mean".into()));
        }
        self.precision
            .cholesky()
            .map(|_| ())
            .map_err(|_| Error::Parameter("precision matrix is not symmetric positive definite".into()))
    }

    /// Independent Gaussians fitted on the observed entries of each column.
    pub fn diagonal(ds: &Dataset<T>) -> Result<Self> {
        let mean = column_means(ds)?;
        let p = mean.len();
        let mut precision = Matrix::zeros(p, p);
        for (j, &m) in mean.iter().enumerate() {
            let (ss, count) =
                observed_column(ds, j).fold((T::zero(), 0usize), |(s, c), v| (s + (v - m) * (v - m), c + 1));
            let var = ss / T::of((count - 1) as f64);
            if !(var > T::zero()) {
                return Err(Error::Input(format!("covariate x{} is constant", j + 1)));
            }
            precision.set(j, j, T::one() / var);
        }
        Self::new(mean, precision)
    }

    /// Gaussian graphical model with a known neighbourhood, fitted by
    /// nodewise least squares on rows where a node and its neighbours are observed.
    pub fn with_neighborhood(ds: &Dataset<T>, neighbors: &[Vec<usize>]) -> Result<Self> {
        let p = ds.num_covariates();
        if neighbors.len() != p {
            return Err(Error::Input(format!("neighbourhood lists {} nodes, data has {p}", neighbors.len())));
        }
        let mean = column_means(ds)?;
        let mut q = Matrix::zeros(p, p);
        for (j, nb) in neighbors.iter().enumerate() {
            if nb.iter().any(|&k| k >= p || k == j) {
                return Err(Error::Input(format!("invalid neighbour list for x{}", j + 1)));
            }
            let d = nb.len();
            let mut gram = Matrix::zeros(d, d);
            let mut rhs = vec![T::zero(); d];
            let mut rows = 0usize;
            let mut z = vec![T::zero(); d];
            let mut used = Vec::new();
            for i in 0..ds.len() {
                if !ds.is_observed(i, j) || nb.iter().any(|&k| !ds.is_observed(i, k)) {
                    continue;
                }
                let row = ds.row(i);
                for (zk, &k) in z.iter_mut().zip(nb) {
                    *zk = row[k] - mean[k];
                }
                let target = row[j] - mean[j];
                for a in 0..d {
                    rhs[a] = rhs[a] + z[a] * target;
                    for b in 0..d {
                        let g = gram.get(a, b) + z[a] * z[b];
                        gram.set(a, b, g);
                    }
                }
                used.push(i);
                rows += 1;
            }
            if rows <= d + 1 {
                return Err(Error::Input(format!("too few complete rows to fit x{}", j + 1)));
            }
            let beta = if d == 0 {
                Vec::new()
            } else {
                let l = gram.cholesky().map_err(|_| {
                    Error::Input(format!("neighbours of x{} are collinear", j + 1))
                })?;
                cholesky_solve(&l, &rhs)
            };
            let mut rss = T::zero();
            for &i in &used {
                let row = ds.row(i);
                let fit: T = nb.iter().zip(&beta).map(|(&k, &b)| b * (row[k] - mean[k])).sum();
                let r = row[j] - mean[j] - fit;
                rss = rss + r * r;
            }
            let tau2 = rss / T::of((rows - d) as f64);
            if !(tau2 > T::zero()) {
                return Err(Error::Input(format!("x{} is a deterministic function of its neighbours", j + 1)));
            }
            q.set(j, j, T::one() / tau2);
            for (&k, &b) in nb.iter().zip(&beta) {
                q.set(j, k, -b / tau2);
            }
        }
        let sym = Matrix::from_fn(p, p, |a, b| (q.get(a, b) + q.get(b, a)) * T::half());
        Self::new(mean, sym)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `∂/∂x_mis log N(x; mean, Q⁻¹) = −[Q(x − mean)]_mis`.
    pub fn grad_log_density(&self, x: &[T], missing: &[usize]) -> Vec<T> {
        let centered: Vec<T> = x.iter().zip(&self.mean).map(|(&v, &m)| v - m).collect();
        missing
            .iter()
            .map(|&j| -dot(self.precision.row(j), &centered))
            .collect()
    }

    /// `E[x_mis | x_obs]`; the observed entries of `x` are read, the missing ones ignored.
    pub fn conditional_mean(&self, x: &[T], missing: &[usize]) -> Result<Vec<T>> {
        if missing.is_empty() {
            return Ok(Vec::new());
        }
        let m = missing.len();
        let is_missing = |k: usize| missing.contains(&k);
        // Q_mm (x_m - μ_m) = -Q_mo (x_o - μ_o)
        let q_mm = Matrix::from_fn(m, m, |a, b| self.precision.get(missing[a], missing[b]));
        let rhs: Vec<T> = missing
            .iter()
            .map(|&j| {
                -(0..self.dim())
                    .filter(|&k| !is_missing(k))
                    .map(|k| self.precision.get(j, k) * (x[k] - self.mean[k]))
                    .sum::<T>()
            })
            .collect();
        let l = q_mm.cholesky()?;
        let shift = cholesky_solve(&l, &rhs);
        Ok(missing.iter().zip(shift).map(|(&j, s)| self.mean[j] + s).collect())
    }
}
