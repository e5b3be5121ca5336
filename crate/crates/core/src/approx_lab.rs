//! Random-feature approximation of a Gaussian mollifier for scalar outputs
//! (`n = 1`).
//!
//! The mollifier `δ̃^ε(z) = π^{−k/2} ε^{−k} e^{−‖z/ε‖²}` has Fourier transform
//! `e^{−π²ε²‖ω‖²}`. Writing `δ̃^ε(z) − δ̃^ε(0)` as a cosine integral, turning
//! the cosine into an integral of step functions and smoothing the steps with
//! `σ_g(·/τ)` gives
//!
//! ```text
//! δ̃^ε(z) ≈ θ₁ σ_g(b₁) + ∫ σ_g(ωᵀz + b) m_τ(ω, b) dω db
//! m_τ(ω, b) = 4πτ^{k+1}/(u_g − ℓ_g) · e^{−π²ε²τ²‖ω‖²} · sin(2πτb) · 1{−R‖ω‖ ≤ b ≤ 0}
//! ```
//!
//! and importance sampling the integral with features `κ_i ~ p` yields the
//! finite weights `θ_i = m_{τ,K}(κ_i) / ((N_g − 1) p(κ_i))`.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::networks::Activation;
use crate::quadrature::CompositeRule;
use crate::rng::{Rng, SeedStream};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub eps: f64,
    pub dim: usize,
}

impl MollifierSpec {
    pub fn new(eps: f64, dim: usize) -> Result<Self> {
        if !(eps > 0.0) || dim == 0 {
            return Err(Error::InvalidArgument("mollifier needs ε > 0 and k ≥ 1".into()));
        }
        Ok(Self { eps, dim })
    }

    /// `π^{−k/2} ε^{−k}`, the peak value.
    pub fn normalizer(&self) -> f64 {
        PI.powf(-0.5 * self.dim as f64) * self.eps.powi(-(self.dim as i32))
    }

    /// Std of the frequency profile `e^{−π²ε²ω²}` per axis.
    pub fn frequency_std(&self) -> f64 {
        1.0 / (std::f64::consts::SQRT_2 * PI * self.eps)
    }
}

pub fn mollifier_value(spec: &MollifierSpec, z: &[f64]) -> f64 {
    let r2: f64 = z.iter().map(|v| v * v).sum::<f64>() / (spec.eps * spec.eps);
    spec.normalizer() * (-r2).exp()
}

pub fn mollifier_fourier(spec: &MollifierSpec, omega: &[f64]) -> f64 {
    let w2: f64 = omega.iter().map(|v| v * v).sum();
    (-PI * PI * spec.eps * spec.eps * w2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceSpec {
    pub tau: f64,
    pub eps: f64,
    /// Tail-truncation radius `R`.
    pub r: f64,
    /// Parameter-ball radius `K`.
    pub k_radius: f64,
    pub activation: Activation,
}

impl ImportanceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidArgument(format!("τ={} must lie in (0, 1)", self.tau)));
        }
        if !(self.eps > 0.0 && self.r > 0.0 && self.k_radius > 0.0) {
            return Err(Error::InvalidArgument("ε, R and K must be positive".into()));
        }
        let (u, l) = self.activation.limits();
        if !(u > l) {
            return Err(Error::InvalidArgument("activation limits must satisfy u > ℓ".into()));
        }
        Ok(())
    }

    pub fn gap(&self) -> f64 {
        let (u, l) = self.activation.limits();
        u - l
    }

    pub fn mollifier(&self, dim: usize) -> MollifierSpec {
        MollifierSpec { eps: self.eps, dim }
    }
}

/// `m_τ(ω, b)`; zero outside `−R‖ω‖ ≤ b ≤ 0`.
pub fn m_tau(spec: &ImportanceSpec, omega: &[f64], b: f64) -> f64 {
    let k = omega.len() as i32;
    let w = omega.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b > 0.0 || b < -spec.r * w {
        return 0.0;
    }
    let e = spec.eps * spec.tau;
    4.0 * PI * spec.tau.powi(k + 1) / spec.gap()
        * (-PI * PI * e * e * w * w).exp()
        * (2.0 * PI * spec.tau * b).sin()
}

/// `m_τ` restricted to the ball `‖(ω, b)‖ ≤ K`.
pub fn m_tau_k(spec: &ImportanceSpec, omega: &[f64], b: f64) -> f64 {
    let n2 = omega.iter().map(|v| v * v).sum::<f64>() + b * b;
    if n2 > spec.k_radius * spec.k_radius {
        0.0
    } else {
        m_tau(spec, omega, b)
    }
}

/// Upper bound `(4πR/(u−ℓ)) ∫_ℝ |ω| e^{−π²ε²ω²} dω = 4R/((u−ℓ)πε²)` on
/// `∫|m_τ|`, for `k = 1`. It holds for every `τ`.
pub fn m_tau_l1_bound(spec: &ImportanceSpec) -> f64 {
    4.0 * spec.r / (spec.gap() * PI * spec.eps * spec.eps)
}

/// `∫∫ |m_τ(ω, b)| db dω` for `k = 1` by nested quadrature over the support.
pub fn m_tau_l1(spec: &ImportanceSpec) -> f64 {
    let w_max = 8.0 * spec.mollifier(1).frequency_std() / spec.tau;
    let outer = CompositeRule::new(64, 16);
    2.0 * outer.integrate(0.0, w_max, |w| {
        let depth = spec.r * w;
        // Enough panels to resolve every half-period of sin(2πτb).
        let panels = ((2.0 * spec.tau * depth).ceil() as usize * 2).max(1);
        CompositeRule::new(panels, 8).integrate(-depth, 0.0, |b| m_tau(spec, &[w], b).abs())
    })
}

/// Scalar features `κ = (ω, b)` with `φ(z; κ) = σ_g(ωz + b)`; index 0 is the
/// constant feature `(0, b₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaFeatures {
    pub omega: Vec<f64>,
    pub b: Vec<f64>,
}

impl DeltaFeatures {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// `(0, b₁)` followed by `count − 1` IID `(ω, b) ~ N(0, std²·I)`.
    pub fn sample(count: usize, b1: f64, std: f64, rng: &mut Rng) -> Result<Self> {
        if count < 2 {
            return Err(Error::InvalidArgument("need N_g ≥ 2 (one constant feature)".into()));
        }
        if !(std > 0.0) {
            return Err(Error::InvalidArgument("feature std must be positive".into()));
        }
        let mut omega = vec![0.0];
        let mut b = vec![b1];
        for _ in 1..count {
            let w: f64 = StandardNormal.sample(rng);
            let c: f64 = StandardNormal.sample(rng);
            omega.push(std * w);
            b.push(std * c);
        }
        Ok(Self { omega, b })
    }

    /// `Σ θ_i σ_g(ω_i z + b_i)`.
    pub fn evaluate(&self, act: Activation, theta: &[f64], z: f64) -> f64 {
        self.omega
            .iter()
            .zip(&self.b)
            .zip(theta)
            .map(|((w, b), t)| t * act.value(w * z + b))
            .sum()
    }
}

/// Isotropic Gaussian density `N(0, std²·I)` over `(ω, b)`.
pub fn gaussian_feature_density(omega: f64, b: f64, std: f64) -> f64 {
    let v = std * std;
    (-(omega * omega + b * b) / (2.0 * v)).exp() / (2.0 * PI * v)
}

/// Weight of the constant feature `σ_g(b₁)`:
///
/// ```text
/// θ₁ = (δ̃(0) + ∫∫_0^{R|ω|} 2πℓ/(u−ℓ) sin(2πb) F(ω) db dω
///             − ∫∫_{−R|ω|}^0 2πℓ/(u−ℓ) sin(2πb) F(ω) db dω) / σ_g(b₁)
/// ```
///
/// by nested Gauss–Legendre quadrature, `F` the mollifier's transform.
pub fn constant_weight(spec: &ImportanceSpec, b1: f64) -> Result<f64> {
    let s1 = spec.activation.value(b1);
    if s1.abs() < 1e-12 {
        return Err(Error::InvalidArgument(format!("σ_g(b₁) vanishes at b₁={b1}")));
    }
    let (_, l) = spec.activation.limits();
    let moll = spec.mollifier(1);
    let c = 2.0 * PI * l / spec.gap();
    let w_max = 8.0 * moll.frequency_std();
    let outer = CompositeRule::new(32, 16);
    let inner_sum = outer.integrate(-w_max, w_max, |w| {
        let depth = spec.r * w.abs();
        if depth == 0.0 {
            return 0.0;
        }
        let panels = (4.0 * depth).ceil() as usize + 1;
        let inner = CompositeRule::new(panels, 8);
        let f = mollifier_fourier(&moll, &[w]);
        let pos = inner.integrate(0.0, depth, |b| (2.0 * PI * b).sin());
        let neg = inner.integrate(-depth, 0.0, |b| (2.0 * PI * b).sin());
        c * (pos - neg) * f
    });
    Ok((moll.normalizer() + inner_sum) / s1)
}

/// Closed form of [`constant_weight`]:
/// `(δ̃(0) + 2ℓ/(u−ℓ) ∫(1 − cos 2πR|ω|) F(ω) dω) / σ_g(b₁)`.
pub fn constant_weight_reduced(spec: &ImportanceSpec, b1: f64) -> f64 {
    let moll = spec.mollifier(1);
    let (_, l) = spec.activation.limits();
    // ∫ F = 1/(√π ε); ∫ cos(2πRω) F = e^{−R²/ε²}/(√π ε).
    let total = 1.0 / (PI.sqrt() * spec.eps);
    let cosine = total * (-(spec.r * spec.r) / (spec.eps * spec.eps)).exp();
    (moll.normalizer() + 2.0 * l / spec.gap() * (total - cosine)) / spec.activation.value(b1)
}

/// `[θ₁, m_{τ,K}(κ_i)/((N_g−1) p(κ_i)) for i ≥ 2]`.
pub fn delta_weights(
    features: &DeltaFeatures,
    density: impl Fn(f64, f64) -> f64,
    spec: &ImportanceSpec,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let ng = features.len();
    if ng < 2 {
        return Err(Error::InvalidArgument("need N_g ≥ 2 (one constant feature)".into()));
    }
    let mut theta = Vec::with_capacity(ng);
    theta.push(constant_weight(spec, features.b[0])?);
    for i in 1..ng {
        let (w, b) = (features.omega[i], features.b[i]);
        let p = density(w, b);
        if !(p >= 1e-300) {
            return Err(Error::InvalidArgument(format!(
                "sampling density {p:e} at feature {i} is too small for an importance ratio"
            )));
        }
        theta.push(m_tau_k(spec, &[w], b) / ((ng - 1) as f64 * p));
    }
    Ok(theta)
}

/// Smooth test functions with bounded value and derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestFunction {
    /// `e^{−z²}`
    Gaussian,
    /// `cos(z) e^{−z²/4}`
    CosGaussian,
    /// `1/(1+z²)`
    Cauchy,
}

impl TestFunction {
    pub const ALL: [TestFunction; 3] = [TestFunction::Gaussian, TestFunction::CosGaussian, TestFunction::Cauchy];

    pub fn value(self, z: f64) -> f64 {
        match self {
            TestFunction::Gaussian => (-z * z).exp(),
            TestFunction::CosGaussian => z.cos() * (-z * z / 4.0).exp(),
            TestFunction::Cauchy => 1.0 / (1.0 + z * z),
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            TestFunction::Gaussian => -2.0 * z * (-z * z).exp(),
            TestFunction::CosGaussian => -(z.sin() + 0.5 * z * z.cos()) * (-z * z / 4.0).exp(),
            TestFunction::Cauchy => -2.0 * z / (1.0 + z * z).powi(2),
        }
    }

    /// `sup_z (|f(z)| + |f'(z)|)`, from a fine grid on `[−10, 10]` (all three
    /// attain it well inside).
    pub fn sup_value_plus_slope(self) -> f64 {
        (0..=200_000)
            .map(|i| -10.0 + 1e-4 * i as f64)
            .map(|z| self.value(z).abs() + self.derivative(z).abs())
            .fold(0.0, f64::max)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TestFunction::Gaussian => "gaussian",
            TestFunction::CosGaussian => "cos_gaussian",
            TestFunction::Cauchy => "cauchy",
        }
    }
}

/// Nodes and weights for integrals against the latent density over `ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentQuadrature {
    /// `(z, w · q_Z(z))`.
    pub nodes: Vec<(f64, f64)>,
}

impl LatentQuadrature {
    /// Standard-Gaussian latent on `[−half_width, half_width]`.
    pub fn standard(half_width: f64, panels: usize, order: usize) -> Self {
        let q = |z: f64| (-z * z / 2.0).exp() / (2.0 * PI).sqrt();
        Self {
            nodes: CompositeRule::new(panels, order)
                .nodes(-half_width, half_width)
                .into_iter()
                .map(|(z, w)| (z, w * q(z)))
                .collect(),
        }
    }
}

impl Default for LatentQuadrature {
    fn default() -> Self {
        Self::standard(8.0, 128, 16)
    }
}

/// The two parts of the weak error against a test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakError {
    /// `|E_Z[(Σθ_iφ_i(Z) − δ̃^ε(Z)) f(Z)]|`
    pub approximation: f64,
    /// `|f(0)q_Z(0) − E_Z[δ̃^ε(Z) f(Z)]|`
    pub mollifier: f64,
}

impl WeakError {
    pub fn total(&self) -> f64 {
        self.approximation + self.mollifier
    }
}

pub fn weak_error(
    theta: &[f64],
    features: &DeltaFeatures,
    activation: Activation,
    spec: &MollifierSpec,
    f: impl Fn(f64) -> f64,
    quadrature: &LatentQuadrature,
    q0: f64,
) -> WeakError {
    let mut approx = 0.0;
    let mut moll = 0.0;
    for &(z, w) in &quadrature.nodes {
        let fz = f(z);
        let d = mollifier_value(spec, &[z]);
        approx += w * (features.evaluate(activation, theta, z) - d) * fz;
        moll += w * d * fz;
    }
    WeakError {
        approximation: approx.abs(),
        mollifier: (f(0.0) * q0 - moll).abs(),
    }
}

/// Surface area of the unit sphere in `ℝᵏ`.
pub fn unit_sphere_area(k: usize) -> f64 {
    assert!(k >= 1);
    // S_0 = 2, S_1 = 2π, S_d = 2π/(d−1) S_{d−2}, indexed by d = k − 1.
    let d = k - 1;
    let mut s = if d % 2 == 0 { 2.0 } else { 2.0 * PI };
    let mut i = if d % 2 == 0 { 2 } else { 3 };
    while i <= d {
        s *= 2.0 * PI / (i as f64 - 1.0);
        i += 2;
    }
    s
}

/// `∫_{ℝᵏ} ‖z‖ e^{−‖z‖²} dz` by radial quadrature.
pub fn radial_moment(k: usize) -> f64 {
    let radial = CompositeRule::new(32, 16).integrate(0.0, 12.0, |r| r.powi(k as i32) * (-r * r).exp());
    unit_sphere_area(k) * radial
}

/// `C_δ = 2 max{L_Z, q0} π^{−k/2} ∫‖z‖e^{−‖z‖²}dz`.
pub fn c_delta(k: usize, lipschitz: f64, q0: f64) -> Result<f64> {
    if !(lipschitz > 0.0 && q0 > 0.0) || k == 0 {
        return Err(Error::InvalidArgument("C_δ needs L_Z, q0 > 0 and k ≥ 1".into()));
    }
    Ok(2.0 * lipschitz.max(q0) * PI.powf(-0.5 * k as f64) * radial_moment(k))
}

/// Parameters of a convergence ladder over `N_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    pub spec: ImportanceSpec,
    pub b1: f64,
    pub ladder: Vec<usize>,
    pub seeds: usize,
    pub test_function: TestFunction,
    /// Std of the isotropic Gaussian sampling density over `(ω, b)`.
    pub feature_std: f64,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            spec: ImportanceSpec {
                tau: 0.1,
                eps: 0.5,
                r: 4.0,
                k_radius: 20.0,
                activation: Activation::Tanh,
            },
            b1: 1.0,
            ladder: vec![64, 256, 1024, 4096],
            seeds: 5,
            test_function: TestFunction::Gaussian,
            feature_std: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabRow {
    pub ng: usize,
    pub seed: u64,
    pub weak_error: WeakError,
}

/// One row per `(seed, N_g)`. Within a seed the feature draws are nested:
/// the `N_g = 256` bank extends the `N_g = 64` one.
pub fn run_lab(cfg: &LabConfig, master: u64) -> Result<Vec<LabRow>> {
    cfg.spec.validate()?;
    if cfg.ladder.iter().any(|&n| n < 2) || cfg.seeds == 0 {
        return Err(Error::InvalidArgument("ladder entries must be ≥ 2 and seeds ≥ 1".into()));
    }
    let moll = cfg.spec.mollifier(1);
    let quad = LatentQuadrature::default();
    let q0 = 1.0 / (2.0 * PI).sqrt();
    let theta1 = constant_weight(&cfg.spec, cfg.b1)?;
    let max_ng = *cfg.ladder.iter().max().expect("nonempty ladder");
    let mut rows = Vec::with_capacity(cfg.ladder.len() * cfg.seeds);
    let stream = SeedStream::new(master);
    for seed in 0..cfg.seeds as u64 {
        let all = DeltaFeatures::sample(max_ng, cfg.b1, cfg.feature_std, &mut stream.derive_indexed("lab.features", seed))?;
        for &ng in &cfg.ladder {
            let features = DeltaFeatures {
                omega: all.omega[..ng].to_vec(),
                b: all.b[..ng].to_vec(),
            };
            let mut theta = Vec::with_capacity(ng);
            theta.push(theta1);
            for i in 1..ng {
                let p = gaussian_feature_density(features.omega[i], features.b[i], cfg.feature_std);
                theta.push(m_tau_k(&cfg.spec, &[features.omega[i]], features.b[i]) / ((ng - 1) as f64 * p));
            }
            let test = cfg.test_function;
            let err = weak_error(&theta, &features, cfg.spec.activation, &moll, |z| test.value(z), &quad, q0);
            rows.push(LabRow {
                ng,
                seed,
                weak_error: err,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert_eq!(unit_sphere_area(1), 2.0);
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn nested_constant_weight_matches_closed_form() {
        let base = LabConfig::default().spec;
        // For tanh with R = 4, ε = 0.5 the weight is e^{−64}-small, so the
        // comparison is made on the scale of δ̃(0).
        let cases = [
            base,
            ImportanceSpec { r: 0.3, ..base },
            ImportanceSpec { activation: Activation::Sigmoid, ..base },
            ImportanceSpec { r: 0.6, eps: 1.0, ..base },
        ];
        for spec in cases {
            let nested = constant_weight(&spec, 1.0).unwrap();
            let closed = constant_weight_reduced(&spec, 1.0);
            let scale = closed.abs().max(spec.mollifier(1).normalizer());
            assert!((nested - closed).abs() <= 1e-4 * scale, "{nested} vs {closed}");
        }
    }

    #[test]
    fn m_tau_hand_value() {
        let spec = ImportanceSpec {
            tau: 0.1,
            eps: 1.0,
            r: 2.0,
            k_radius: 20.0,
            activation: Activation::Tanh,
        };
        let v = m_tau(&spec, &[1.0], -0.5);
        let expect = 4.0 * PI * 0.01 / 2.0 * (-PI * PI * 0.01).exp() * (-0.1 * PI).sin();
        assert!((v - expect).abs() < 1e-15);
        assert!((v + 0.01757).abs() < 1e-4);
        assert_eq!(m_tau(&spec, &[1.0], 0.1), 0.0);
        assert_eq!(m_tau(&spec, &[1.0], 0.0), 0.0);
        assert_eq!(m_tau(&spec, &[1.0], -2.5), 0.0);
    }
}
