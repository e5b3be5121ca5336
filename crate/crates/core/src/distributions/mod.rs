//! Target and latent distributions, bundled fixtures, and kernel density
//! estimation of 2-D samples.

mod fixtures;
mod kde;
mod latent;
mod mixture;

pub use fixtures::{make_fixture, FixtureName};
pub use kde::{kde_density, Bandwidth, KdeConfig, KdeGrid};
pub use latent::LatentSpec;
pub use mixture::{Component, GaussianMixture};
