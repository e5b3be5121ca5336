//! Numerical checks of the rank conditions, stationarity, and the shape of
//! the loss landscape.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::distributions::{GaussianMixture, LatentSpec};
use crate::linalg::{dot, norm, singular_values, symmetric_eigenvalues, Matrix};
use crate::loss::{FrozenObjective, QuadratureSet};
use crate::networks::{DiscriminatorFeatureBank, GeneratorFeatureBank};
use crate::rng::Rng;
use crate::{check_dim, Error, Result};

/// Result of scanning `σ_min(DΨ(x)ᵀ)` over a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularScan {
    /// Per point, the `min(n, N_d)`-th singular value.
    pub values: Vec<f64>,
    pub min: f64,
    pub argmin: usize,
    pub argmin_point: Vec<f64>,
    /// `false` when `N_d > n`: the kernel of `DΨ(x)ᵀ` is then nontrivial at
    /// every point, and `values` report the `n`-th singular value instead.
    pub point_condition_applicable: bool,
}

pub fn min_singular_scan(d: &DiscriminatorFeatureBank, points: &Matrix) -> Result<SingularScan> {
    if points.nrows() == 0 {
        return Err(Error::InvalidArgument("singular scan needs at least one point".into()));
    }
    check_dim("scan point dimension", d.in_dim(), points.ncols())?;
    let values: Vec<f64> = (0..points.nrows())
        .into_par_iter()
        .map(|i| {
            let jac = d.psi_jacobian(points.row(i)).expect("dimension checked above");
            singular_values(&jac)[0]
        })
        .collect();
    let (argmin, min) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    Ok(SingularScan {
        min,
        argmin,
        argmin_point: points.row(argmin).to_vec(),
        values,
        point_condition_applicable: d.len() <= d.in_dim(),
    })
}

/// `res × res` grid on `[lo, hi]²`, endpoints included, as rows `(x0, x1)`
/// with `x0` varying fastest.
pub fn square_grid(lo: f64, hi: f64, res: usize) -> Matrix {
    let axis = axis(lo, hi, res);
    let mut m = Matrix::zeros(res * res, 2);
    for (j, &y) in axis.iter().enumerate() {
        for (i, &x) in axis.iter().enumerate() {
            m.row_mut(j * res + i).copy_from_slice(&[x, y]);
        }
    }
    m
}

fn axis(lo: f64, hi: f64, res: usize) -> Vec<f64> {
    if res == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..res)
        .map(|i| lo + (hi - lo) * i as f64 / (res - 1) as f64)
        .collect()
}

/// Sampled stand-in for the ball condition: the Jacobians at `samples`
/// uniform points of the ball, stacked, must have full column rank `N_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSurrogate {
    /// Smallest eigenvalue of `Σ_i DΨ(x_i) DΨ(x_i)ᵀ` (an `N_d×N_d` matrix).
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub full_rank: bool,
}

pub fn ball_condition_surrogate(
    d: &DiscriminatorFeatureBank,
    center: &[f64],
    radius: f64,
    samples: usize,
    rng: &mut Rng,
) -> Result<BallSurrogate> {
    check_dim("ball center", d.in_dim(), center.len())?;
    if !(radius > 0.0) || samples == 0 {
        return Err(Error::InvalidArgument("ball needs a positive radius and samples".into()));
    }
    let n = d.in_dim();
    let mut gram = vec![0.0; d.len() * d.len()];
    for _ in 0..samples {
        // Uniform in the ball: Gaussian direction, radius ∝ U^{1/n}.
        let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let scale = radius * rng.random::<f64>().powf(1.0 / n as f64) / norm(&dir).max(1e-300);
        let x: Vec<f64> = center.iter().zip(&dir).map(|(c, v)| c + scale * v).collect();
        let jac = d.psi_jacobian(&x)?;
        for (acc, v) in gram.iter_mut().zip(jac.gram().as_slice()) {
            *acc += v;
        }
    }
    let eig = symmetric_eigenvalues(&Matrix::from_vec(d.len(), d.len(), gram)?);
    let min_eigenvalue = eig[0];
    let max_eigenvalue = *eig.last().expect("N_d ≥ 1");
    Ok(BallSurrogate {
        min_eigenvalue,
        max_eigenvalue,
        full_rank: min_eigenvalue > 1e-10 * max_eigenvalue.max(f64::MIN_POSITIVE),
    })
}

/// Analytic vs central-difference gradient of `Ĵ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `max_i |a_i − n_i| / max(|a_i|, |n_i|, floor)` with
    /// `floor = 1e-8 · max(1, ‖a‖_∞)`.
    pub max_rel_error: f64,
}

pub fn grad_check(obj: &FrozenObjective, theta: &[f64], step: f64) -> Result<GradCheck> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let analytic = obj.grad(theta)?;
    let numeric: Vec<f64> = (0..theta.len())
        .map(|i| {
            let mut t = theta.to_vec();
            t[i] = theta[i] + step;
            let up = obj.j(&t)?;
            t[i] = theta[i] - step;
            let down = obj.j(&t)?;
            Ok((up - down) / (2.0 * step))
        })
        .collect::<Result<_>>()?;
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-8 * scale.max(1.0);
    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max);
    Ok(GradCheck {
        analytic,
        numeric,
        max_rel_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    NearGlobal,
    SpuriousSuspect,
    NonStationary,
}

impl Classification {
    pub fn from_values(j_hat: f64, grad_norm: f64, tol_j: f64, tol_g: f64) -> Self {
        if j_hat < tol_j {
            Classification::NearGlobal
        } else if grad_norm < tol_g {
            Classification::SpuriousSuspect
        } else {
            Classification::NonStationary
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::NearGlobal => "near_global",
            Classification::SpuriousSuspect => "spurious_suspect",
            Classification::NonStationary => "non_stationary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityTolerances {
    pub tol_j: f64,
    pub tol_g: f64,
    pub x_count: usize,
    pub z_count: usize,
}

impl Default for StationarityTolerances {
    fn default() -> Self {
        Self {
            tol_j: 1e-2,
            tol_g: 1e-3,
            x_count: 16384,
            z_count: 16384,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub j_hat: f64,
    pub grad_norm: f64,
    /// Spread of `Ĵ` across 8 disjoint sub-quadratures, divided by `√8`.
    pub j_std: f64,
    pub classification: Classification,
    pub tolerances: StationarityTolerances,
}

impl StationarityReport {
    /// `key=value` lines for machine consumption.
    pub fn key_values(&self) -> String {
        format!(
            "j_hat={:.16e}\ngrad_norm={:.16e}\nj_std={:.16e}\nclassification={}\ntol_j={:.16e}\ntol_g={:.16e}\nx_count={}\nz_count={}\n",
            self.j_hat,
            self.grad_norm,
            self.j_std,
            self.classification.as_str(),
            self.tolerances.tol_j,
            self.tolerances.tol_g,
            self.tolerances.x_count,
            self.tolerances.z_count
        )
    }
}

const SUBSETS: usize = 8;

/// Estimates `Ĵ` and `‖∇̂J‖` on fresh quadratures of the requested sizes and
/// classifies `θ`.
#[allow(clippy::too_many_arguments)]
pub fn classify_stationarity(
    g: &GeneratorFeatureBank,
    d: &DiscriminatorFeatureBank,
    gmm: &GaussianMixture,
    latent: &LatentSpec,
    theta: &[f64],
    tol: StationarityTolerances,
    x_rng: &mut Rng,
    z_rng: &mut Rng,
) -> Result<StationarityReport> {
    if !(tol.tol_j > 0.0 && tol.tol_g > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let q = QuadratureSet::sample(gmm, latent, tol.x_count, tol.z_count, x_rng, z_rng)?;
    let obj = FrozenObjective::new(g, d, &q)?;
    let (r, grad) = obj.residual_and_grad(theta)?;
    let j_hat = r.j();
    let grad_norm = norm(&grad);
    let j_std = if tol.x_count >= SUBSETS && tol.z_count >= SUBSETS {
        let parts: Vec<f64> = (0..SUBSETS)
            .map(|s| {
                let xs: Vec<usize> = (s..tol.x_count).step_by(SUBSETS).collect();
                let zs: Vec<usize> = (s..tol.z_count).step_by(SUBSETS).collect();
                let sub = QuadratureSet::new(q.x().select_rows(&xs), q.z().select_rows(&zs))?;
                crate::loss::residual_mc(d, g, theta, &sub).map(|r| r.j())
            })
            .collect::<Result<_>>()?;
        let mean = parts.iter().sum::<f64>() / SUBSETS as f64;
        let var = parts.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (SUBSETS - 1) as f64;
        (var / SUBSETS as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(StationarityReport {
        j_hat,
        grad_norm,
        j_std,
        classification: Classification::from_values(j_hat, grad_norm, tol.tol_j, tol.tol_g),
        tolerances: tol,
    })
}

/// `Ĵ` over a 2-D slice of parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeGrid {
    pub s_axis: Vec<f64>,
    pub t_axis: Vec<f64>,
    /// `values.get(it, is)` is `Ĵ` at `(s_axis[is], t_axis[it])`.
    pub values: Matrix,
    pub center: Vec<f64>,
    /// Plane directions; `None` for direct grids over `(θ₁, θ₂)`.
    pub directions: Option<(Vec<f64>, Vec<f64>)>,
}

impl LandscapeGrid {
    pub fn resolution(&self) -> usize {
        self.s_axis.len()
    }

    /// Rows `s,t,J` in `t`-major order.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.t_axis.iter().enumerate().flat_map(move |(it, &t)| {
            self.s_axis
                .iter()
                .enumerate()
                .map(move |(is, &s)| (s, t, self.values.get(it, is)))
        })
    }

    pub fn argmin(&self) -> (usize, usize) {
        let res = self.resolution();
        let idx = self
            .values
            .as_slice()
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b })
            .0;
        (idx % res, idx / res)
    }
}

fn evaluate_grid(
    obj: &FrozenObjective,
    range: (f64, f64),
    res: usize,
    point: impl Fn(f64, f64) -> Vec<f64> + Sync,
) -> Result<(Vec<f64>, Matrix)> {
    if res < 2 || !(range.1 > range.0) {
        return Err(Error::InvalidArgument("landscape needs resolution ≥ 2 and an increasing range".into()));
    }
    let ax = axis(range.0, range.1, res);
    let values: Vec<f64> = (0..res * res)
        .into_par_iter()
        .map(|c| obj.j(&point(ax[c % res], ax[c / res])))
        .collect::<Result<_>>()?;
    Ok((ax, Matrix::from_vec(res, res, values)?))
}

/// `Ĵ(θ₁, θ₂)` on a `res × res` grid over `range²`; requires `N_g = 2`.
pub fn landscape_direct_2d(obj: &FrozenObjective, range: (f64, f64), res: usize) -> Result<LandscapeGrid> {
    if obj.generator().len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "direct mode requires N_g=2, got N_g={}",
            obj.generator().len()
        )));
    }
    let (ax, values) = evaluate_grid(obj, range, res, |s, t| vec![s, t])?;
    Ok(LandscapeGrid {
        s_axis: ax.clone(),
        t_axis: ax,
        values,
        center: vec![0.0, 0.0],
        directions: None,
    })
}

/// Two IID standard-Gaussian directions, Gram–Schmidt orthonormalized.
/// Nearly collinear draws are discarded and redrawn.
pub fn random_plane(dim: usize, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    orthonormal_plane(dim, |_| gaussian_vec(dim, rng))
}

/// As [`random_plane`], with each direction drawn from its own stream so
/// the two can be reproduced from separately recorded seeds.
pub fn random_plane_split(dim: usize, s_rng: &mut Rng, t_rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    orthonormal_plane(dim, |which| gaussian_vec(dim, if which == 0 { &mut *s_rng } else { &mut *t_rng }))
}

fn gaussian_vec(dim: usize, rng: &mut Rng) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn orthonormal_plane(dim: usize, mut draw: impl FnMut(usize) -> Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    if dim < 2 {
        return Err(Error::InvalidArgument("a random plane needs N_g ≥ 2".into()));
    }
    loop {
        let u = draw(0);
        let v = draw(1);
        let nu = norm(&u);
        if nu < 1e-8 {
            continue;
        }
        let d1: Vec<f64> = u.iter().map(|x| x / nu).collect();
        // Two passes of projection keep orthogonality at machine precision.
        let mut w = v.clone();
        for _ in 0..2 {
            let p = dot(&w, &d1);
            w.iter_mut().zip(&d1).for_each(|(a, b)| *a -= p * b);
        }
        let nw = norm(&w);
        if nw < 1e-8 * norm(&v) {
            continue;
        }
        let d2 = w.iter().map(|x| x / nw).collect();
        return Ok((d1, d2));
    }
}

/// `Ĵ(θ₀ + s·d₁ + t·d₂)` with a random orthonormal pair `(d₁, d₂)`.
pub fn landscape_random_plane(
    obj: &FrozenObjective,
    center: &[f64],
    rng: &mut Rng,
    range: (f64, f64),
    res: usize,
) -> Result<LandscapeGrid> {
    check_dim("landscape center", obj.generator().len(), center.len())?;
    let directions = random_plane(center.len(), rng)?;
    landscape_plane(obj, center, directions, range, res)
}

/// `Ĵ(θ₀ + s·d₁ + t·d₂)` for given directions.
pub fn landscape_plane(
    obj: &FrozenObjective,
    center: &[f64],
    (d1, d2): (Vec<f64>, Vec<f64>),
    range: (f64, f64),
    res: usize,
) -> Result<LandscapeGrid> {
    let ng = obj.generator().len();
    check_dim("landscape center", ng, center.len())?;
    check_dim("landscape direction", ng, d1.len())?;
    check_dim("landscape direction", ng, d2.len())?;
    let (ax, values) = evaluate_grid(obj, range, res, |s, t| {
        center
            .iter()
            .zip(d1.iter().zip(&d2))
            .map(|(c, (a, b))| c + s * a + t * b)
            .collect()
    })?;
    Ok(LandscapeGrid {
        s_axis: ax.clone(),
        t_axis: ax,
        values,
        center: center.to_vec(),
        directions: Some((d1, d2)),
    })
}

fn neighbors(grid: &LandscapeGrid, is: usize, it: usize) -> impl Iterator<Item = f64> + '_ {
    (-1i64..=1)
        .flat_map(|dt| (-1i64..=1).map(move |ds| (ds, dt)))
        .filter(|&(ds, dt)| ds != 0 || dt != 0)
        .map(move |(ds, dt)| {
            grid.values
                .get((it as i64 + dt) as usize, (is as i64 + ds) as usize)
        })
}

fn interior(grid: &LandscapeGrid) -> impl Iterator<Item = (usize, usize)> {
    let rows = grid.values.nrows();
    let cols = grid.values.ncols();
    (1..rows.saturating_sub(1)).flat_map(move |it| (1..cols.saturating_sub(1)).map(move |is| (is, it)))
}

/// Interior cells `(is, it)` strictly below all eight neighbors.
pub fn local_minima(grid: &LandscapeGrid) -> Vec<(usize, usize)> {
    interior(grid)
        .filter(|&(is, it)| {
            let v = grid.values.get(it, is);
            neighbors(grid, is, it).all(|n| v < n)
        })
        .collect()
}

/// Interior cells that are `≤` all neighbors and tie at least one: plateau
/// points that strict detection ignores.
pub fn flat_cells(grid: &LandscapeGrid) -> Vec<(usize, usize)> {
    interior(grid)
        .filter(|&(is, it)| {
            let v = grid.values.get(it, is);
            neighbors(grid, is, it).all(|n| v <= n) && neighbors(grid, is, it).any(|n| v == n)
        })
        .collect()
}

/// Fraction of `samples` within `multiplier · (largest component std)` of
/// each component mean. Balls may overlap, so fractions can sum past 1.
pub fn mode_coverage(samples: &Matrix, gmm: &GaussianMixture, multiplier: f64) -> Result<Vec<f64>> {
    if !(multiplier > 0.0) {
        return Err(Error::InvalidArgument("radius multiplier must be positive".into()));
    }
    check_dim("sample dimension", gmm.dim(), samples.ncols())?;
    if samples.nrows() == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let r2 = (multiplier * gmm.largest_std()).powi(2);
    let count = samples.nrows() as f64;
    Ok(gmm
        .components()
        .iter()
        .map(|c| {
            let hits = samples
                .rows_iter()
                .filter(|x| {
                    x.iter()
                        .zip(c.mean())
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        <= r2
                })
                .count();
            hits as f64 / count
        })
        .collect())
}

/// Smallest eigenvalue of the sample covariance of generated outputs. A value
/// near 0 means the outputs concentrate on a lower-dimensional set.
pub fn nondegeneracy_proxy(outputs: &Matrix) -> Result<f64> {
    let (m, n) = (outputs.nrows(), outputs.ncols());
    if m < 2 || n == 0 {
        return Err(Error::InvalidArgument("need at least 2 outputs".into()));
    }
    let mean: Vec<f64> = (0..n)
        .map(|c| outputs.rows_iter().map(|r| r[c]).sum::<f64>() / m as f64)
        .collect();
    let mut cov = Matrix::zeros(n, n);
    for r in outputs.rows_iter() {
        for i in 0..n {
            for j in 0..n {
                cov.set(i, j, cov.get(i, j) + (r[i] - mean[i]) * (r[j] - mean[j]));
            }
        }
    }
    let scale = 1.0 / (m - 1) as f64;
    let cov = Matrix::from_vec(n, n, cov.as_slice().iter().map(|v| v * scale).collect())?;
    Ok(symmetric_eigenvalues(&cov)[0])
}
