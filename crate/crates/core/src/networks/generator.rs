use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::Activation;
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::{check_dim, Error, Result};

/// How the frozen generator features are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorScheme {
    /// `κ_w`, `κ_b` entries IID `N(0, weight_std²)`. The first
    /// `constant_features` features are replaced by `κ_w = 0`, `κ_b = e_i`.
    Gaussian {
        weight_std: f64,
        constant_features: usize,
    },
    /// `κ_w = s·W` with `W` IID standard normal and a per-feature scalar
    /// `s ~ N(0, 1)`; `κ_b` IID `N(0, bias_std²)`. No constant features.
    ScaledIsotropic { bias_std: f64 },
}

impl GeneratorScheme {
    pub fn constant_features(&self) -> usize {
        match *self {
            GeneratorScheme::Gaussian {
                constant_features, ..
            } => constant_features,
            GeneratorScheme::ScaledIsotropic { .. } => 0,
        }
    }
}

/// Frozen generator hidden layer: `N_g` features `φ_i(z) = σ_g(κ_w z + κ_b)`
/// mapping `ℝᵏ → ℝⁿ`.
///
/// Parameters are stored feature-major: feature `i` owns the `n×k` block
/// `weights[i·n·k ..]` (row-major) and `biases[i·n ..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorFeatureBank {
    latent_dim: usize,
    out_dim: usize,
    count: usize,
    activation: Activation,
    constant_features: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl GeneratorFeatureBank {
    /// Builds a bank from explicit parameters.
    pub fn from_parts(
        latent_dim: usize,
        out_dim: usize,
        activation: Activation,
        constant_features: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if latent_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidArgument("generator dimensions must be positive".into()));
        }
        if biases.is_empty() || biases.len() % out_dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "generator bias array of length {} is not a positive multiple of n={out_dim}",
                biases.len()
            )));
        }
        let count = biases.len() / out_dim;
        check_dim("generator weights", count * out_dim * latent_dim, weights.len())?;
        if !weights.iter().chain(&biases).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("generator parameters must be finite".into()));
        }
        if constant_features > out_dim || constant_features > count {
            return Err(Error::InvalidArgument(format!(
                "constant feature count {constant_features} exceeds n={out_dim} or N_g={count}"
            )));
        }
        Ok(Self {
            latent_dim,
            out_dim,
            count,
            activation,
            constant_features,
            weights,
            biases,
        })
    }

    /// Draws a bank of `count` features under `scheme`.
    pub fn sample(
        latent_dim: usize,
        out_dim: usize,
        count: usize,
        activation: Activation,
        scheme: &GeneratorScheme,
        rng: &mut Rng,
    ) -> Result<Self> {
        let (k, n) = (latent_dim, out_dim);
        let constants = scheme.constant_features();
        if count == 0 {
            return Err(Error::InvalidArgument("N_g must be positive".into()));
        }
        if constants > n {
            return Err(Error::InvalidArgument(format!(
                "at most n={n} constant features, got {constants}"
            )));
        }
        if count < constants {
            return Err(Error::InvalidArgument(format!(
                "N_g={count} is smaller than the {constants} reserved constant features"
            )));
        }
        let mut weights = vec![0.0; count * n * k];
        let mut biases = vec![0.0; count * n];
        match *scheme {
            GeneratorScheme::Gaussian { weight_std, .. } => {
                let normal = normal(0.0, weight_std)?;
                for i in constants..count {
                    for w in &mut weights[i * n * k..(i + 1) * n * k] {
                        *w = normal.sample(rng);
                    }
                    for b in &mut biases[i * n..(i + 1) * n] {
                        *b = normal.sample(rng);
                    }
                }
            }
            GeneratorScheme::ScaledIsotropic { bias_std } => {
                let normal = normal(0.0, bias_std)?;
                for i in 0..count {
                    let s: f64 = rng.sample(StandardNormal);
                    for w in &mut weights[i * n * k..(i + 1) * n * k] {
                        *w = s * rng.sample::<f64, _>(StandardNormal);
                    }
                    for b in &mut biases[i * n..(i + 1) * n] {
                        *b = normal.sample(rng);
                    }
                }
            }
        }
        for i in 0..constants {
            biases[i * n + i] = 1.0;
        }
        Self::from_parts(k, n, activation, constants, weights, biases)
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `N_g`.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn constant_features(&self) -> usize {
        self.constant_features
    }

    /// `κ_w` of feature `i` as a row-major `n×k` slice.
    pub fn weight(&self, i: usize) -> &[f64] {
        let nk = self.out_dim * self.latent_dim;
        &self.weights[i * nk..(i + 1) * nk]
    }

    pub fn bias(&self, i: usize) -> &[f64] {
        &self.biases[i * self.out_dim..(i + 1) * self.out_dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Writes `Φ(z)` feature-major into `out` (length `N_g·n`): entry
    /// `out[i·n + r]` is component `r` of `φ_i(z)`.
    #[inline]
    pub fn phi_into(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.latent_dim);
        debug_assert_eq!(out.len(), self.count * self.out_dim);
        let act = self.activation;
        let k = self.latent_dim;
        for ((o, b), w) in out
            .iter_mut()
            .zip(&self.biases)
            .zip(self.weights.chunks_exact(k))
        {
            let mut pre = *b;
            for (wc, zc) in w.iter().zip(z) {
                pre += wc * zc;
            }
            *o = act.value(pre);
        }
    }

    /// `Φ(z)` as an `n×N_g` matrix; column `i` is `φ_i(z)`.
    pub fn phi_matrix(&self, z: &[f64]) -> Result<Matrix> {
        check_dim("latent point", self.latent_dim, z.len())?;
        let mut fm = vec![0.0; self.count * self.out_dim];
        self.phi_into(z, &mut fm);
        let n = self.out_dim;
        let mut m = Matrix::zeros(n, self.count);
        for i in 0..self.count {
            for r in 0..n {
                m.set(r, i, fm[i * n + r]);
            }
        }
        Ok(m)
    }

    /// `g_θ(z) = Φ(z)·θ`.
    pub fn forward(&self, theta: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        check_dim("theta", self.count, theta.len())?;
        check_dim("latent point", self.latent_dim, z.len())?;
        let mut fm = vec![0.0; self.count * self.out_dim];
        self.phi_into(z, &mut fm);
        let mut out = vec![0.0; self.out_dim];
        phi_apply(&fm, self.out_dim, theta, &mut out);
        Ok(out)
    }

    /// `g_θ` applied to every row of `zs`.
    pub fn forward_batch(&self, theta: &[f64], zs: &Matrix) -> Result<Matrix> {
        check_dim("theta", self.count, theta.len())?;
        check_dim("latent columns", self.latent_dim, zs.ncols())?;
        let mut fm = vec![0.0; self.count * self.out_dim];
        let mut out = Matrix::zeros(zs.nrows(), self.out_dim);
        for (r, z) in zs.rows_iter().enumerate() {
            self.phi_into(z, &mut fm);
            phi_apply(&fm, self.out_dim, theta, out.row_mut(r));
        }
        Ok(out)
    }
}

fn normal(mean: f64, std: f64) -> Result<Normal<f64>> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::InvalidArgument(format!("standard deviation {std} must be finite and nonnegative")));
    }
    Normal::new(mean, std).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// `out = Φ θ` for a feature-major `Φ`.
#[inline]
pub(crate) fn phi_apply(phi: &[f64], n: usize, theta: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if n == 2 {
        let (mut a, mut b) = (0.0, 0.0);
        for (p, t) in phi.chunks_exact(2).zip(theta) {
            a += p[0] * t;
            b += p[1] * t;
        }
        out[0] = a;
        out[1] = b;
        return;
    }
    for (p, t) in phi.chunks_exact(n).zip(theta) {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v * t;
        }
    }
}

/// `acc += scale · Φᵀ v` for a feature-major `Φ`.
#[inline]
pub(crate) fn phi_transpose_add(phi: &[f64], n: usize, v: &[f64], scale: f64, acc: &mut [f64]) {
    if n == 2 {
        let (v0, v1) = (scale * v[0], scale * v[1]);
        for (p, a) in phi.chunks_exact(2).zip(acc.iter_mut()) {
            *a += p[0] * v0 + p[1] * v1;
        }
        return;
    }
    for (p, a) in phi.chunks_exact(n).zip(acc.iter_mut()) {
        *a += scale * crate::linalg::dot(p, v);
    }
}

/// Convenience for the common setting: tanh features with all `n` constant
/// features reserved.
pub fn sample_generator_bank(
    latent_dim: usize,
    out_dim: usize,
    count: usize,
    weight_std: f64,
    rng: &mut Rng,
) -> Result<GeneratorFeatureBank> {
    GeneratorFeatureBank::sample(
        latent_dim,
        out_dim,
        count,
        Activation::Tanh,
        &GeneratorScheme::Gaussian {
            weight_std,
            constant_features: out_dim,
        },
        rng,
    )
}
