//! Frozen random-feature hidden layers and their forward maps.

mod activation;
mod discriminator;
mod generator;

pub use activation::Activation;
pub use discriminator::{
    intercept_feature, DiscriminatorFeatureBank, DiscriminatorScheme, INTERCEPT_REJECT,
};
pub use generator::{sample_generator_bank, GeneratorFeatureBank, GeneratorScheme};

pub(crate) use generator::{phi_apply, phi_transpose_add};

/// Convenience wrapper over [`DiscriminatorFeatureBank::sample`] with tanh
/// features.
pub fn sample_discriminator_bank(
    in_dim: usize,
    count: usize,
    scheme: &DiscriminatorScheme,
    rng: &mut crate::rng::Rng,
) -> crate::Result<DiscriminatorFeatureBank> {
    DiscriminatorFeatureBank::sample(in_dim, count, Activation::Tanh, scheme, rng)
}
