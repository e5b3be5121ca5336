//! Random-feature Wasserstein GANs trained by stochastic gradient ascent-descent.
//!
//! Both networks are two-layer random-feature models: the hidden layers are
//! sampled once and frozen, only the output weights train. The generator is
//! `g_θ(z) = Σ θ_i φ_i(z)` with `φ_i(z) = σ_g(κ_w z + κ_b)`, the discriminator
//! is `f_η(x) = η·Ψ(x)` with `ψ_j(x) = σ(a_j·x + b_j)`.
//!
//! The crate is organized by concern:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`distributions`] | Gaussian mixtures, the standard-Gaussian latent, fixtures, KDE |
//! | [`networks`] | Frozen feature banks, forward maps, discriminator input-Jacobian |
//! | [`loss`] | Residual `r(θ)`, `J(θ) = ½‖r‖²`, regularized loss `L(θ, η)`, gradients |
//! | [`training`] | SGAD step, the η-eliminated SGD-on-J step, the training loop |
//! | [`diagnostics`] | Jacobian rank scans, stationarity classification, landscapes |
//! | [`approx_lab`] | Mollifier, importance density and random-feature delta weights (n = 1) |
//!
//! Every Monte-Carlo quantity is computed on an explicit [`loss::QuadratureSet`],
//! so losses and gradients are deterministic functions of the parameters.

pub mod approx_lab;
pub mod diagnostics;
pub mod distributions;
pub mod linalg;
pub mod loss;
pub mod networks;
pub mod quadrature;
pub mod rng;
pub mod training;

mod parallel;

pub use distributions::{FixtureName, GaussianMixture, KdeConfig, KdeGrid, LatentSpec};
pub use linalg::Matrix;
pub use loss::{FrozenObjective, QuadratureSet, Residual};
pub use networks::{
    Activation, DiscriminatorFeatureBank, DiscriminatorScheme, GeneratorFeatureBank,
    GeneratorScheme,
};
pub use rng::SeedStream;
pub use training::{TrainConfig, TrainHistory, TrainRecord, TrainState};

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("non-finite value encountered at iteration {iter}: {what}")]
    NonFinite { iter: usize, what: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
