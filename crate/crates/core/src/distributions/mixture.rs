use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::linalg::{cholesky, forward_substitute, Matrix};
use crate::rng::Rng;
use crate::{check_dim, Error, Result};

/// One weighted Gaussian component with its cached factorization.
#[derive(Debug, Clone)]
pub struct Component {
    weight: f64,
    mean: Vec<f64>,
    covariance: Matrix,
    chol: Matrix,
    log_normalizer: f64,
}

impl Component {
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    /// Square root of the largest covariance eigenvalue.
    pub fn max_std(&self) -> f64 {
        crate::linalg::symmetric_eigenvalues(&self.covariance)
            .last()
            .copied()
            .unwrap_or(0.0)
            .max(0.0)
            .sqrt()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let y = forward_substitute(&self.chol, &diff);
        self.log_normalizer - 0.5 * crate::linalg::dot(&y, &y)
    }
}

/// Weighted mixture of Gaussians in `ℝⁿ`. Immutable once built.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<Component>,
    cumulative: Vec<f64>,
}

impl GaussianMixture {
    /// Validates and builds a mixture from `(weight, mean, covariance)`.
    ///
    /// Weights must be positive and sum to 1 within `1e-12`; covariances must
    /// be symmetric and admit a Cholesky factorization.
    pub fn new(components: Vec<(f64, Vec<f64>, Matrix)>) -> Result<Self> {
        let dim = match components.first() {
            Some((_, m, _)) => m.len(),
            None => return Err(Error::InvalidMixture("no components".into())),
        };
        if dim == 0 {
            return Err(Error::InvalidMixture("zero-dimensional mean".into()));
        }
        let total: f64 = components.iter().map(|(w, _, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let mut built = Vec::with_capacity(components.len());
        for (idx, (weight, mean, covariance)) in components.into_iter().enumerate() {
            if !(weight > 0.0) {
                return Err(Error::InvalidMixture(format!(
                    "component {idx} has non-positive weight {weight}"
                )));
            }
            check_dim("component mean", dim, mean.len())?;
            if !mean.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidMixture(format!("component {idx} mean not finite")));
            }
            if covariance.nrows() != dim || covariance.ncols() != dim {
                return Err(Error::InvalidMixture(format!(
                    "component {idx} covariance is {}x{}, expected {dim}x{dim}",
                    covariance.nrows(),
                    covariance.ncols()
                )));
            }
            if !covariance.is_symmetric(1e-12) {
                return Err(Error::InvalidMixture(format!(
                    "component {idx} covariance not symmetric"
                )));
            }
            let chol = cholesky(&covariance).ok_or_else(|| {
                Error::InvalidMixture(format!("component {idx} covariance not positive definite"))
            })?;
            let log_det: f64 = (0..dim).map(|i| chol.get(i, i).ln()).sum::<f64>() * 2.0;
            let log_normalizer = -0.5 * (dim as f64 * (2.0 * PI).ln() + log_det);
            built.push(Component {
                weight,
                mean,
                covariance,
                chol,
                log_normalizer,
            });
        }
        let mut acc = 0.0;
        let cumulative = built
            .iter()
            .map(|c| {
                acc += c.weight;
                acc
            })
            .collect();
        Ok(Self {
            dim,
            components: built,
            cumulative,
        })
    }

    /// Equal-weight mixture with covariance `variance · I` on every component.
    pub fn isotropic(means: &[Vec<f64>], variance: f64) -> Result<Self> {
        let count = means.len();
        if count == 0 {
            return Err(Error::InvalidMixture("no components".into()));
        }
        let dim = means[0].len();
        Self::new(
            means
                .iter()
                .map(|m| {
                    (
                        1.0 / count as f64,
                        m.clone(),
                        Matrix::scaled_identity(dim, variance),
                    )
                })
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Analytic mixture mean `Σ w_m μ_m`.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in &self.components {
            for (acc, v) in m.iter_mut().zip(&c.mean) {
                *acc += c.weight * v;
            }
        }
        m
    }

    /// Analytic per-coordinate variance of the mixture.
    pub fn coordinate_variance(&self) -> Vec<f64> {
        let mu = self.mean();
        (0..self.dim)
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c.weight * (c.covariance.get(i, i) + (c.mean[i] - mu[i]).powi(2)))
                    .sum()
            })
            .collect()
    }

    /// Largest component standard deviation over all components.
    pub fn largest_std(&self) -> f64 {
        self.components
            .iter()
            .map(Component::max_std)
            .fold(0.0, f64::max)
    }

    /// Draws `count` rows: a component per its weight, then a Gaussian draw.
    pub fn sample(&self, count: usize, rng: &mut Rng) -> Result<Matrix> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be positive".into()));
        }
        let mut out = Matrix::zeros(count, self.dim);
        let mut xi = vec![0.0; self.dim];
        for r in 0..count {
            let c = &self.components[self.pick(rng.random::<f64>())];
            for v in xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let row = out.row_mut(r);
            for i in 0..self.dim {
                let mut s = c.mean[i];
                for k in 0..=i {
                    s += c.chol.get(i, k) * xi[k];
                }
                row[i] = s;
            }
        }
        Ok(out)
    }

    fn pick(&self, u: f64) -> usize {
        let last = self.cumulative.len() - 1;
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(last)
    }

    /// Mixture density `Σ w_m N(x; μ_m, Σ_m)`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        check_dim("mixture density point", self.dim, x.len())?;
        Ok(self
            .components
            .iter()
            .map(|c| c.weight * c.log_density(x).exp())
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn single(mean: Vec<f64>, var: f64) -> GaussianMixture {
        let d = mean.len();
        GaussianMixture::new(vec![(1.0, mean, Matrix::scaled_identity(d, var))]).unwrap()
    }

    #[test]
    fn rejects_bad_weights_and_covariances() {
        let eye = Matrix::identity(2);
        let bad_sum = GaussianMixture::new(vec![
            (0.5, vec![0.0, 0.0], eye.clone()),
            (0.4, vec![1.0, 0.0], eye.clone()),
        ]);
        assert!(matches!(bad_sum, Err(Error::InvalidMixture(_))));
        let neg = GaussianMixture::new(vec![
            (1.5, vec![0.0, 0.0], eye.clone()),
            (-0.5, vec![1.0, 0.0], eye.clone()),
        ]);
        assert!(matches!(neg, Err(Error::InvalidMixture(_))));
        let indef = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(GaussianMixture::new(vec![(1.0, vec![0.0, 0.0], indef)]).is_err());
        let asym = Matrix::from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0]]).unwrap();
        assert!(GaussianMixture::new(vec![(1.0, vec![0.0, 0.0], asym)]).is_err());
        assert!(GaussianMixture::new(vec![(1.0, vec![0.0, 0.0], Matrix::zeros(2, 2))]).is_err());
    }

    #[test]
    fn near_degenerate_component_samples_at_mean() {
        let g = single(vec![5.0, 5.0], 1e-12);
        let s = g.sample(4, &mut SeedStream::new(1).derive("t")).unwrap();
        for row in s.rows_iter() {
            assert!((row[0] - 5.0).abs() < 1e-5 && (row[1] - 5.0).abs() < 1e-5);
        }
    }

    #[test]
    fn standard_normalizer() {
        let g = single(vec![0.0, 0.0], 1.0);
        let d = g.density(&[0.0, 0.0]).unwrap();
        assert!((d - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((d - 0.1591549).abs() < 1e-7);
        assert!(g.density(&[0.0]).is_err());
    }

    #[test]
    fn tails_vanish() {
        let g = single(vec![0.0, 0.0], 1.0);
        assert!(g.density(&[40.0, -40.0]).unwrap() < 1e-300);
    }

    #[test]
    fn symmetric_pair_at_origin() {
        let eye = Matrix::identity(2);
        let g = GaussianMixture::new(vec![
            (0.5, vec![0.0, 2.0], eye.clone()),
            (0.5, vec![0.0, -2.0], eye),
        ])
        .unwrap();
        let one = single(vec![0.0, 2.0], 1.0).density(&[0.0, 0.0]).unwrap();
        let v = g.density(&[0.0, 0.0]).unwrap();
        assert!((v - 2.0 * one * 0.5).abs() < 1e-16);
    }

    #[test]
    fn anisotropic_density_matches_closed_form() {
        let cov = Matrix::from_rows(&[vec![2.0, 0.6], vec![0.6, 1.0]]).unwrap();
        let g = GaussianMixture::new(vec![(1.0, vec![1.0, -1.0], cov)]).unwrap();
        let x = [0.5, 0.2];
        let det: f64 = 2.0 * 1.0 - 0.36;
        let (dx, dy) = (x[0] - 1.0, x[1] + 1.0);
        let q = (1.0 * dx * dx - 2.0 * 0.6 * dx * dy + 2.0 * dy * dy) / det;
        let expect = (-0.5 * q).exp() / (2.0 * PI * det.sqrt());
        assert!((g.density(&x).unwrap() - expect).abs() < 1e-15);
    }
}
