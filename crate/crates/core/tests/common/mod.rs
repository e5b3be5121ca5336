// Shared small setups for the integration tests.
#![allow(dead_code)]

use rfwgan_core::networks::sample_generator_bank;
use rfwgan_core::rng::Rng;
use rfwgan_core::{
    Activation, DiscriminatorFeatureBank, DiscriminatorScheme, FixtureName, GaussianMixture,
    GeneratorFeatureBank, LatentSpec, QuadratureSet, SeedStream,
};

pub struct Small {
    pub gmm: GaussianMixture,
    pub latent: LatentSpec,
    pub g: GeneratorFeatureBank,
    pub d: DiscriminatorFeatureBank,
    pub q: QuadratureSet,
}

pub fn small(seed: u64, ng: usize, nd: usize) -> Small {
    let s = SeedStream::new(seed);
    let gmm = FixtureName::EightRing.build();
    let latent = LatentSpec::new(2).unwrap();
    let g = sample_generator_bank(2, 2, ng, 3.0, &mut s.derive("g")).unwrap();
    let d = DiscriminatorFeatureBank::sample(2, nd, Activation::Tanh, &DiscriminatorScheme::default_intercept(), &mut s.derive("d")).unwrap();
    let q = QuadratureSet::sample(&gmm, &latent, 300, 200, &mut s.derive("x"), &mut s.derive("z")).unwrap();
    Small { gmm, latent, g, d, q }
}

pub fn gaussian_vec(n: usize, std: f64, rng: &mut Rng) -> Vec<f64> {
    use rand::Rng as _;
    (0..n).map(|_| std * rng.sample::<f64, _>(rand_distr::StandardNormal)).collect()
}
