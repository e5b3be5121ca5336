use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::{Error, Result};

/// Standard Gaussian latent variable on `ℝᵏ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatentSpec {
    dim: usize,
}

impl LatentSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("latent dimension must be positive".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `count × k` matrix of IID standard normal entries.
    pub fn sample(&self, count: usize, rng: &mut Rng) -> Result<Matrix> {
        if count == 0 {
            return Err(Error::InvalidArgument("sample count must be positive".into()));
        }
        let data = (0..count * self.dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Matrix::from_vec(count, self.dim, data)
    }

    pub fn density(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        self.density_at_zero() * (-0.5 * r2).exp()
    }

    /// `q_Z(0) = (2π)^{-k/2}`.
    pub fn density_at_zero(&self) -> f64 {
        (2.0 * PI).powf(-(self.dim as f64) / 2.0)
    }

    /// Lipschitz constant of the density: `sup ‖∇q‖ = (2π)^{-k/2} e^{-1/2}`,
    /// attained on the unit sphere.
    pub fn lipschitz_constant(&self) -> f64 {
        self.density_at_zero() * (-0.5f64).exp()
    }
}
