use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use super::GaussianMixture;
use crate::{Error, Result};

/// Stable identifiers of the bundled target mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FixtureName {
    /// Eight modes on the circle of radius √2, std 0.1.
    EightRing,
    /// 3×3 grid on {−1, 0, 1}², std 0.1.
    NineGrid,
    /// Twenty modes along a spiral, std 0.1.
    SpiralTwenty,
    /// Two modes at (0, ±2), variance 0.25 per axis.
    TwoVertical,
}

impl FixtureName {
    pub const ALL: [FixtureName; 4] = [
        FixtureName::EightRing,
        FixtureName::NineGrid,
        FixtureName::SpiralTwenty,
        FixtureName::TwoVertical,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FixtureName::EightRing => "eight_ring",
            FixtureName::NineGrid => "nine_grid",
            FixtureName::SpiralTwenty => "spiral_twenty",
            FixtureName::TwoVertical => "two_vertical",
        }
    }

    pub fn build(&self) -> GaussianMixture {
        make_fixture(*self)
    }
}

impl fmt::Display for FixtureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FixtureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FixtureName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::UnknownFixture(s.to_string()))
    }
}

const RING_VARIANCE: f64 = 0.1 * 0.1;
// Read as a 0.5 standard deviation per axis, matching the "0.1²" pattern of
// the other fixtures.
const TWO_VERTICAL_VARIANCE: f64 = 0.5 * 0.5;

pub fn make_fixture(name: FixtureName) -> GaussianMixture {
    let means: Vec<Vec<f64>> = match name {
        FixtureName::EightRing => (0..8)
            .map(|m| {
                let a = m as f64 * FRAC_PI_4;
                vec![SQRT_2 * a.cos(), SQRT_2 * a.sin()]
            })
            .collect(),
        FixtureName::NineGrid => (-1..=1)
            .flat_map(|a| (-1..=1).map(move |b| vec![a as f64, b as f64]))
            .collect(),
        FixtureName::SpiralTwenty => (0..20)
            .map(|m| {
                let r = m as f64 / 20.0;
                let a = 2.0 * m as f64 * PI / 20.0;
                vec![r * a.cos(), r * a.sin()]
            })
            .collect(),
        FixtureName::TwoVertical => vec![vec![0.0, 2.0], vec![0.0, -2.0]],
    };
    let variance = match name {
        FixtureName::TwoVertical => TWO_VERTICAL_VARIANCE,
        _ => RING_VARIANCE,
    };
    GaussianMixture::isotropic(&means, variance).expect("fixtures are valid mixtures")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in FixtureName::ALL {
            assert_eq!(f.as_str().parse::<FixtureName>().unwrap(), f);
        }
        assert!(matches!(
            "ten_ring".parse::<FixtureName>(),
            Err(Error::UnknownFixture(_))
        ));
    }

    #[test]
    fn eight_ring_first_mean() {
        let g = make_fixture(FixtureName::EightRing);
        assert_eq!(g.len(), 8);
        let m = g.components()[0].mean();
        assert!((m[0] - 1.41421356).abs() < 1e-8 && m[1] == 0.0);
        assert!((g.components()[0].covariance().get(0, 0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn nine_grid_weights() {
        let g = make_fixture(FixtureName::NineGrid);
        assert_eq!(g.len(), 9);
        for c in g.components() {
            assert!((c.weight() - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn spiral_starts_at_origin() {
        let g = make_fixture(FixtureName::SpiralTwenty);
        assert_eq!(g.len(), 20);
        assert_eq!(g.components()[0].mean(), &[0.0, 0.0]);
        let m5 = g.components()[5].mean();
        let expect = (0.25 * (0.5 * PI).cos(), 0.25 * (0.5 * PI).sin());
        assert!((m5[0] - expect.0).abs() < 1e-15 && (m5[1] - expect.1).abs() < 1e-15);
    }

    #[test]
    fn two_vertical_variance() {
        let g = make_fixture(FixtureName::TwoVertical);
        assert_eq!(g.components()[1].mean(), &[0.0, -2.0]);
        assert_eq!(g.components()[0].covariance().get(1, 1), 0.25);
        assert!((g.largest_std() - 0.5).abs() < 1e-15);
    }
}
