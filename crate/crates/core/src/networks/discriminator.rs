use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::Activation;
use crate::linalg::Matrix;
use crate::rng::Rng;
use crate::{check_dim, Error, Result};

/// Smallest admissible `|ã|`, `|b̃|` for the intercept scheme.
pub const INTERCEPT_REJECT: f64 = 1e-6;

/// How the frozen discriminator features are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscriminatorScheme {
    /// `a_j`, `b_j` entries IID `N(0, std²)`.
    Gaussian { std: f64 },
    /// Lines through `(ã, 0)` and `(0, b̃)` with `ã, b̃ ~ U(range)` and a
    /// steepness `c ~ U(c_range)`: `a = (c/ã, c/b̃)`, `b = −c`. Only `n = 2`.
    Intercept {
        range: (f64, f64),
        c_range: (f64, f64),
    },
}

impl DiscriminatorScheme {
    pub fn default_intercept() -> Self {
        DiscriminatorScheme::Intercept {
            range: (-4.0, 4.0),
            c_range: (1.0, 10.0),
        }
    }
}

/// `(a, b)` of the feature whose zero line crosses both axes at the given
/// intercepts.
pub fn intercept_feature(x_intercept: f64, y_intercept: f64, c: f64) -> ([f64; 2], f64) {
    ([c / x_intercept, c / y_intercept], -c)
}

/// Frozen discriminator hidden layer: `ψ_j(x) = σ(a_jᵀ x + b_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorFeatureBank {
    in_dim: usize,
    activation: Activation,
    /// Row `j` is `a_j`.
    a: Matrix,
    b: Vec<f64>,
}

impl DiscriminatorFeatureBank {
    /// `a` is `N_d×n` with row `j` holding `a_j`.
    pub fn from_parts(activation: Activation, a: Matrix, b: Vec<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidArgument("discriminator needs N_d ≥ 1 and n ≥ 1".into()));
        }
        check_dim("discriminator biases", a.nrows(), b.len())?;
        if !a.as_slice().iter().chain(&b).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("discriminator parameters must be finite".into()));
        }
        Ok(Self {
            in_dim: a.ncols(),
            activation,
            a,
            b,
        })
    }

    pub fn sample(
        in_dim: usize,
        count: usize,
        activation: Activation,
        scheme: &DiscriminatorScheme,
        rng: &mut Rng,
    ) -> Result<Self> {
        if count == 0 || in_dim == 0 {
            return Err(Error::InvalidArgument("discriminator needs N_d ≥ 1 and n ≥ 1".into()));
        }
        let mut a = Matrix::zeros(count, in_dim);
        let mut b = vec![0.0; count];
        match *scheme {
            DiscriminatorScheme::Gaussian { std } => {
                if !(std >= 0.0) || !std.is_finite() {
                    return Err(Error::InvalidArgument(format!("discriminator std {std} invalid")));
                }
                let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                for j in 0..count {
                    for v in a.row_mut(j) {
                        *v = normal.sample(rng);
                    }
                    b[j] = normal.sample(rng);
                }
            }
            DiscriminatorScheme::Intercept { range, c_range } => {
                if in_dim != 2 {
                    return Err(Error::InvalidArgument(format!(
                        "intercept scheme requires n=2, got n={in_dim}"
                    )));
                }
                if !(range.1 > range.0) || !(c_range.1 > c_range.0) {
                    return Err(Error::InvalidArgument("intercept ranges must be increasing".into()));
                }
                // If the range is nowhere far from zero, rejection never ends.
                if range.0.abs().max(range.1.abs()) <= INTERCEPT_REJECT {
                    return Err(Error::InvalidArgument("intercept range collapses onto 0".into()));
                }
                for j in 0..count {
                    let (xi, yi) = loop {
                        let xi = rng.random_range(range.0..range.1);
                        let yi = rng.random_range(range.0..range.1);
                        if xi.abs() >= INTERCEPT_REJECT && yi.abs() >= INTERCEPT_REJECT {
                            break (xi, yi);
                        }
                    };
                    let c = rng.random_range(c_range.0..c_range.1);
                    let (aj, bj) = intercept_feature(xi, yi, c);
                    a.row_mut(j).copy_from_slice(&aj);
                    b[j] = bj;
                }
            }
        }
        Self::from_parts(activation, a, b)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    /// `N_d`.
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    #[inline]
    fn pre(&self, j: usize, x: &[f64]) -> f64 {
        let mut s = self.b[j];
        for (w, v) in self.a.row(j).iter().zip(x) {
            s += w * v;
        }
        s
    }

    /// `Ψ(x)` into `out` without dimension checks.
    #[inline]
    pub fn psi_into(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.activation.value(self.pre(j, x));
        }
    }

    /// `acc += Ψ(x)`.
    #[inline]
    pub(crate) fn psi_add(&self, x: &[f64], acc: &mut [f64]) {
        for (j, o) in acc.iter_mut().enumerate() {
            *o += self.activation.value(self.pre(j, x));
        }
    }

    /// `acc += Ψ(x)`, and `slopes_j = σ'(a_jᵀx + b_j)`.
    #[inline]
    pub(crate) fn psi_add_with_slopes(&self, x: &[f64], acc: &mut [f64], slopes: &mut [f64]) {
        for (j, (o, s)) in acc.iter_mut().zip(slopes.iter_mut()).enumerate() {
            let (v, d) = self.activation.value_and_derivative(self.pre(j, x));
            *o += v;
            *s = d;
        }
    }

    pub fn psi_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("discriminator input", self.in_dim, x.len())?;
        let mut out = vec![0.0; self.len()];
        self.psi_into(x, &mut out);
        Ok(out)
    }

    /// `DΨ(x)ᵀ` as an `n×N_d` matrix with column `j = a_j σ'(a_jᵀx + b_j)`.
    pub fn psi_jacobian(&self, x: &[f64]) -> Result<Matrix> {
        check_dim("discriminator input", self.in_dim, x.len())?;
        let mut m = Matrix::zeros(self.in_dim, self.len());
        for j in 0..self.len() {
            let d = self.activation.derivative(self.pre(j, x));
            for (r, w) in self.a.row(j).iter().enumerate() {
                m.set(r, j, w * d);
            }
        }
        Ok(m)
    }

    /// `out = DΨ(x)ᵀ v = Σ_j a_j σ'(a_jᵀx + b_j) v_j` without forming the
    /// Jacobian.
    #[inline]
    pub fn jacobian_apply(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, vj) in v.iter().enumerate() {
            let s = self.activation.derivative(self.pre(j, x)) * vj;
            for (o, w) in out.iter_mut().zip(self.a.row(j)) {
                *o += w * s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    #[test]
    fn intercept_formula() {
        let (a, b) = intercept_feature(2.0, 4.0, 8.0);
        assert_eq!(a, [4.0, 2.0]);
        assert_eq!(b, -8.0);
    }

    #[test]
    fn intercept_requires_planar_inputs() {
        let mut rng = SeedStream::new(0).derive("d");
        let s = DiscriminatorScheme::default_intercept();
        assert!(DiscriminatorFeatureBank::sample(3, 4, Activation::Tanh, &s, &mut rng).is_err());
        let bank = DiscriminatorFeatureBank::sample(2, 64, Activation::Tanh, &s, &mut rng).unwrap();
        for j in 0..bank.len() {
            let c = -bank.b()[j];
            assert!((1.0..10.0).contains(&c));
        }
    }

    #[test]
    fn jacobian_apply_matches_matrix() {
        let mut rng = SeedStream::new(5).derive("d");
        let s = DiscriminatorScheme::Gaussian { std: 1.0 };
        let bank = DiscriminatorFeatureBank::sample(3, 6, Activation::Sigmoid, &s, &mut rng).unwrap();
        let x = [0.3, -0.1, 2.0];
        let v = [1.0, -2.0, 0.5, 0.0, 3.0, -1.0];
        let mut out = [0.0; 3];
        bank.jacobian_apply(&x, &v, &mut out);
        let reference = bank.psi_jacobian(&x).unwrap().mul_vec(&v);
        for (p, q) in out.iter().zip(&reference) {
            assert!((p - q).abs() < 1e-15);
        }
    }
}
