//! Monte-Carlo estimators of the residual `r(θ)`, the reduced objective
//! `J(θ) = ½‖r(θ)‖²`, the regularized loss `L(θ, η)` and `∇J`.
//!
//! With `Φ(z)` the `n×N_g` feature matrix and `DΨ(x)ᵀ` the `n×N_d`
//! discriminator Jacobian,
//!
//! ```text
//! ∇J(θ) = −E_z[ Φ(z)ᵀ DΨ(g_θ(z))ᵀ ] r(θ)
//! ```
//!
//! which is the descent direction used by training. The per-sample product is
//! accumulated right to left, so `DΨ ∘ Φ` is never formed.

use rayon::prelude::*;

use crate::distributions::{GaussianMixture, LatentSpec};
use crate::linalg::Matrix;
use crate::networks::{phi_apply, phi_transpose_add, DiscriminatorFeatureBank, GeneratorFeatureBank};
use crate::parallel::{sum_items, CHUNK};
use crate::rng::Rng;
use crate::{check_dim, Error, Result};

/// Frozen data and latent samples. Immutable once built, so every estimator
/// evaluated on it is a deterministic function of the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSet {
    x: Matrix,
    z: Matrix,
}

impl QuadratureSet {
    pub fn new(x: Matrix, z: Matrix) -> Result<Self> {
        if x.nrows() == 0 || z.nrows() == 0 {
            return Err(Error::InvalidArgument("quadrature sets must be nonempty".into()));
        }
        Ok(Self { x, z })
    }

    /// Draws `x_count` points from `gmm` and `z_count` latent points, each
    /// from its own stream.
    pub fn sample(
        gmm: &GaussianMixture,
        latent: &LatentSpec,
        x_count: usize,
        z_count: usize,
        x_rng: &mut Rng,
        z_rng: &mut Rng,
    ) -> Result<Self> {
        Self::new(gmm.sample(x_count, x_rng)?, latent.sample(z_count, z_rng)?)
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    /// Always true: there is no way to mutate a built set.
    pub fn is_frozen(&self) -> bool {
        true
    }

    fn check(&self, d: &DiscriminatorFeatureBank, g: &GeneratorFeatureBank) -> Result<()> {
        check_dim("x sample dimension", d.in_dim(), self.x.ncols())?;
        check_dim("generator output dimension", d.in_dim(), g.out_dim())?;
        check_dim("z sample dimension", g.latent_dim(), self.z.ncols())
    }
}

/// Moment gap `r̂ = mean_x Ψ(x) − mean_z Ψ(g_θ(z))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub values: Vec<f64>,
    pub x_count: usize,
    pub z_count: usize,
}

impl Residual {
    pub fn j(&self) -> f64 {
        j_value(self)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `½‖r‖²`.
pub fn j_value(r: &Residual) -> f64 {
    0.5 * r.values.iter().map(|v| v * v).sum::<f64>()
}

/// `mean_i Ψ(points_i)`.
pub fn mean_psi(d: &DiscriminatorFeatureBank, points: &Matrix) -> Result<Vec<f64>> {
    check_dim("discriminator input", d.in_dim(), points.ncols())?;
    if points.nrows() == 0 {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    let count = points.nrows();
    let mut s = sum_items(count, d.len(), || (), |_, i, acc| d.psi_add(points.row(i), acc));
    let inv = 1.0 / count as f64;
    s.iter_mut().for_each(|v| *v *= inv);
    Ok(s)
}

/// `g_θ` on every latent row, in parallel over row chunks.
pub(crate) fn generate(g: &GeneratorFeatureBank, theta: &[f64], zs: &Matrix) -> Matrix {
    let n = g.out_dim();
    let mut out = vec![0.0; zs.nrows() * n];
    out.par_chunks_mut(CHUNK * n)
        .enumerate()
        .for_each(|(c, block)| {
            let mut phi = vec![0.0; g.len() * n];
            for (r, o) in block.chunks_exact_mut(n).enumerate() {
                g.phi_into(zs.row(c * CHUNK + r), &mut phi);
                phi_apply(&phi, n, theta, o);
            }
        });
    Matrix::from_vec(zs.nrows(), n, out).expect("shape is consistent by construction")
}

/// `mean_z Ψ(g_θ(z))` over the rows of `zs`.
pub(crate) fn generated_mean_psi(
    d: &DiscriminatorFeatureBank,
    g: &GeneratorFeatureBank,
    theta: &[f64],
    zs: &Matrix,
) -> Vec<f64> {
    let n = g.out_dim();
    let count = zs.nrows();
    let mut s = sum_items(
        count,
        d.len(),
        || (vec![0.0; g.len() * n], vec![0.0; n]),
        |(phi, out), i, acc| {
            g.phi_into(zs.row(i), phi);
            phi_apply(phi, n, theta, out);
            d.psi_add(out, acc);
        },
    );
    let inv = 1.0 / count as f64;
    s.iter_mut().for_each(|v| *v *= inv);
    s
}

/// `−mean_z Φ(z)ᵀ DΨ(g_θ(z))ᵀ v` over the rows of `zs`. With `v = r̂` this is
/// `∇Ĵ`.
pub(crate) fn descent_direction(
    d: &DiscriminatorFeatureBank,
    g: &GeneratorFeatureBank,
    theta: &[f64],
    zs: &Matrix,
    v: &[f64],
) -> Vec<f64> {
    let n = g.out_dim();
    let count = zs.nrows();
    let mut s = sum_items(
        count,
        g.len(),
        || (vec![0.0; g.len() * n], vec![0.0; n], vec![0.0; n]),
        |(phi, out, jv), i, acc| {
            g.phi_into(zs.row(i), phi);
            phi_apply(phi, n, theta, out);
            d.jacobian_apply(out, v, jv);
            phi_transpose_add(phi, n, jv, 1.0, acc);
        },
    );
    let scale = -1.0 / count as f64;
    s.iter_mut().for_each(|v| *v *= scale);
    s
}

pub fn residual_mc(
    d: &DiscriminatorFeatureBank,
    g: &GeneratorFeatureBank,
    theta: &[f64],
    q: &QuadratureSet,
) -> Result<Residual> {
    q.check(d, g)?;
    check_dim("theta", g.len(), theta.len())?;
    let mx = mean_psi(d, &q.x)?;
    let mz = generated_mean_psi(d, g, theta, &q.z);
    Ok(Residual {
        values: mx.iter().zip(&mz).map(|(a, b)| a - b).collect(),
        x_count: q.x.nrows(),
        z_count: q.z.nrows(),
    })
}

/// `mean_x ηᵀΨ(x) − mean_z ηᵀΨ(g_θ(z)) − ½‖η‖²`, which equals `ηᵀr̂ − ½‖η‖²`.
pub fn l_value(
    d: &DiscriminatorFeatureBank,
    g: &GeneratorFeatureBank,
    theta: &[f64],
    eta: &[f64],
    q: &QuadratureSet,
) -> Result<f64> {
    check_dim("eta", d.len(), eta.len())?;
    let r = residual_mc(d, g, theta, q)?;
    Ok(l_from_residual(&r.values, eta))
}

pub(crate) fn l_from_residual(r: &[f64], eta: &[f64]) -> f64 {
    r.iter()
        .zip(eta)
        .map(|(rj, ej)| ej * rj - 0.5 * ej * ej)
        .sum()
}

/// Descent gradient of `Ĵ` on `q`.
pub fn grad_j(
    d: &DiscriminatorFeatureBank,
    g: &GeneratorFeatureBank,
    theta: &[f64],
    q: &QuadratureSet,
) -> Result<Vec<f64>> {
    let r = residual_mc(d, g, theta, q)?;
    Ok(descent_direction(d, g, theta, &q.z, &r.values))
}

/// Largest `z_count · N_g · n` for which [`FrozenObjective`] caches `Φ`.
pub const PHI_CACHE_LIMIT: usize = 1 << 24;

/// Banks plus a frozen quadrature, with `mean_x Ψ` and (size permitting)
/// `Φ(z)` for every latent point precomputed. Evaluations are independent of
/// thread count.
#[derive(Debug, Clone)]
pub struct FrozenObjective {
    g: GeneratorFeatureBank,
    d: DiscriminatorFeatureBank,
    z: Matrix,
    x_count: usize,
    data_mean: Vec<f64>,
    phi: Option<Vec<f64>>,
}

impl FrozenObjective {
    pub fn new(
        g: &GeneratorFeatureBank,
        d: &DiscriminatorFeatureBank,
        q: &QuadratureSet,
    ) -> Result<Self> {
        q.check(d, g)?;
        let data_mean = mean_psi(d, &q.x)?;
        let block = g.len() * g.out_dim();
        let phi = (q.z.nrows() * block <= PHI_CACHE_LIMIT).then(|| {
            let mut all = vec![0.0; q.z.nrows() * block];
            all.par_chunks_mut(block)
                .enumerate()
                .for_each(|(i, p)| g.phi_into(q.z.row(i), p));
            all
        });
        Ok(Self {
            g: g.clone(),
            d: d.clone(),
            z: q.z.clone(),
            x_count: q.x.nrows(),
            data_mean,
            phi,
        })
    }

    pub fn generator(&self) -> &GeneratorFeatureBank {
        &self.g
    }

    pub fn discriminator(&self) -> &DiscriminatorFeatureBank {
        &self.d
    }

    pub fn z_count(&self) -> usize {
        self.z.nrows()
    }

    pub fn data_mean(&self) -> &[f64] {
        &self.data_mean
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_dim("theta", self.g.len(), theta.len())
    }

    /// Generated outputs `g_θ(z)` for every latent point.
    pub fn outputs(&self, theta: &[f64]) -> Result<Matrix> {
        self.check_theta(theta)?;
        let Some(phi) = &self.phi else {
            return Ok(generate(&self.g, theta, &self.z));
        };
        let n = self.g.out_dim();
        let block = self.g.len() * n;
        let mut out = vec![0.0; self.z.nrows() * n];
        out.par_chunks_mut(n)
            .zip(phi.par_chunks(block))
            .for_each(|(o, p)| phi_apply(p, n, theta, o));
        Matrix::from_vec(self.z.nrows(), n, out)
    }

    pub fn residual(&self, theta: &[f64]) -> Result<Residual> {
        let outputs = self.outputs(theta)?;
        Ok(self.residual_from_outputs(&outputs, None))
    }

    /// Residual from generated outputs. When `slopes` is given it receives
    /// `σ'(a_jᵀg(z) + b_j)` row by row for reuse in the gradient pass.
    fn residual_from_outputs(&self, outputs: &Matrix, slopes: Option<&mut [f64]>) -> Residual {
        let count = outputs.nrows();
        let nd = self.d.len();
        let mz = match slopes {
            None => sum_items(count, nd, || (), |_, i, acc| self.d.psi_add(outputs.row(i), acc)),
            Some(slopes) => {
                let partials: Vec<Vec<f64>> = slopes
                    .par_chunks_mut(CHUNK * nd)
                    .enumerate()
                    .map(|(c, block)| {
                        let mut acc = vec![0.0; nd];
                        for (r, row) in block.chunks_exact_mut(nd).enumerate() {
                            self.d.psi_add_with_slopes(outputs.row(c * CHUNK + r), &mut acc, row);
                        }
                        acc
                    })
                    .collect();
                let mut total = vec![0.0; nd];
                for p in partials {
                    total.iter_mut().zip(p).for_each(|(t, v)| *t += v);
                }
                total
            }
        };
        let inv = 1.0 / count as f64;
        Residual {
            values: self
                .data_mean
                .iter()
                .zip(&mz)
                .map(|(a, b)| a - b * inv)
                .collect(),
            x_count: self.x_count,
            z_count: count,
        }
    }

    pub fn j(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.residual(theta)?.j())
    }

    pub fn l(&self, theta: &[f64], eta: &[f64]) -> Result<f64> {
        check_dim("eta", self.d.len(), eta.len())?;
        Ok(l_from_residual(&self.residual(theta)?.values, eta))
    }

    pub fn grad(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.residual_and_grad(theta)?.1)
    }

    /// `(r̂, ∇Ĵ)` sharing one forward pass.
    pub fn residual_and_grad(&self, theta: &[f64]) -> Result<(Residual, Vec<f64>)> {
        let outputs = self.outputs(theta)?;
        let Some(phi) = &self.phi else {
            let r = self.residual_from_outputs(&outputs, None);
            let grad = descent_direction(&self.d, &self.g, theta, &self.z, &r.values);
            return Ok((r, grad));
        };
        let count = outputs.nrows();
        let nd = self.d.len();
        let mut slopes = vec![0.0; count * nd];
        let r = self.residual_from_outputs(&outputs, Some(&mut slopes));
        let n = self.g.out_dim();
        let block = self.g.len() * n;
        let a = self.d.a();
        let mut grad = sum_items(
            count,
            self.g.len(),
            || vec![0.0; n],
            |jv, i, acc| {
                jv.iter_mut().for_each(|v| *v = 0.0);
                for (j, (s, rj)) in slopes[i * nd..(i + 1) * nd].iter().zip(&r.values).enumerate() {
                    let w = s * rj;
                    for (o, aj) in jv.iter_mut().zip(a.row(j)) {
                        *o += aj * w;
                    }
                }
                phi_transpose_add(&phi[i * block..(i + 1) * block], n, jv, 1.0, acc);
            },
        );
        let scale = -1.0 / count as f64;
        grad.iter_mut().for_each(|v| *v *= scale);
        Ok((r, grad))
    }
}
