use proptest::prelude::*;
use rfwgan_core::networks::{intercept_feature, sample_generator_bank};
use rfwgan_core::{Activation, DiscriminatorFeatureBank, DiscriminatorScheme, GeneratorFeatureBank, GeneratorScheme, SeedStream};

fn bank(seed: u64, nd: usize, act: Activation) -> DiscriminatorFeatureBank {
    DiscriminatorFeatureBank::sample(2, nd, act, &DiscriminatorScheme::Gaussian { std: 1.0 }, &mut SeedStream::new(seed).derive("d")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn jacobian_matches_finite_differences(seed in 0u64..1000, x0 in -3.0f64..3.0, x1 in -3.0f64..3.0, sig in any::<bool>()) {
        let act = if sig { Activation::Sigmoid } else { Activation::Tanh };
        let d = bank(seed, 6, act);
        let x = [x0, x1];
        let jac = d.psi_jacobian(&x).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut up = x;
            let mut dn = x;
            up[i] += h;
            dn[i] -= h;
            let (pu, pd) = (d.psi_vector(&up).unwrap(), d.psi_vector(&dn).unwrap());
            for j in 0..d.len() {
                let fd = (pu[j] - pd[j]) / (2.0 * h);
                let an = jac.get(i, j);
                let scale = an.abs().max(fd.abs()).max(1e-3);
                prop_assert!((an - fd).abs() / scale <= 1e-6, "{} vs {}", an, fd);
            }
        }
    }

    #[test]
    fn generator_is_linear_in_theta(seed in 0u64..1000, z0 in -3.0f64..3.0, z1 in -3.0f64..3.0, a in -2.0f64..2.0) {
        let g = sample_generator_bank(2, 2, 12, 3.0, &mut SeedStream::new(seed).derive("g")).unwrap();
        let mut rng = SeedStream::new(seed).derive("theta");
        let t1: Vec<f64> = (0..12).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let t2: Vec<f64> = (0..12).map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0)).collect();
        let mix: Vec<f64> = t1.iter().zip(&t2).map(|(x, y)| a * x + y).collect();
        let z = [z0, z1];
        let (f1, f2, fm) = (g.forward(&t1, &z).unwrap(), g.forward(&t2, &z).unwrap(), g.forward(&mix, &z).unwrap());
        for i in 0..2 {
            prop_assert!((fm[i] - (a * f1[i] + f2[i])).abs() <= 1e-12 * (1.0 + fm[i].abs()));
        }
        prop_assert!(g.forward(&vec![0.0; 12], &z).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn intercept_lines_pass_through_both_intercepts(xi in 0.1f64..4.0, yi in -4.0f64..-0.1, c in 1.0f64..10.0) {
        let (a, b) = intercept_feature(xi, yi, c);
        prop_assert!((a[0] * xi + b).abs() < 1e-12);
        prop_assert!((a[1] * yi + b).abs() < 1e-12);
    }
}

#[test]
fn activations_on_a_dense_grid() {
    for act in [Activation::Tanh, Activation::Sigmoid] {
        for i in 0..10_000 {
            let x = -20.0 + 40.0 * i as f64 / 9_999.0;
            let (v, d) = act.value_and_derivative(x);
            assert!(d > 0.0 || x.abs() > 18.0, "{act} {x}");
            assert!(d >= 0.0 && v.abs() <= 1.0 && d <= 1.0 && act.second_derivative(x).abs() <= 1.0);
        }
    }
    // Past |x| ≈ 18.4 tanh rounds to ±1 and the f64 derivative to 0.
    assert!(Activation::Tanh.derivative(18.0) > 0.0);
}

#[test]
fn banks_are_deterministic_in_seed() {
    let scheme = GeneratorScheme::Gaussian { weight_std: 10.0, constant_features: 2 };
    let a = GeneratorFeatureBank::sample(2, 2, 50, Activation::Tanh, &scheme, &mut SeedStream::new(1).derive("g")).unwrap();
    let b = GeneratorFeatureBank::sample(2, 2, 50, Activation::Tanh, &scheme, &mut SeedStream::new(1).derive("g")).unwrap();
    assert_eq!(a, b);
    let d1 = DiscriminatorFeatureBank::sample(2, 30, Activation::Tanh, &DiscriminatorScheme::default_intercept(), &mut SeedStream::new(2).derive("d")).unwrap();
    let d2 = DiscriminatorFeatureBank::sample(2, 30, Activation::Tanh, &DiscriminatorScheme::default_intercept(), &mut SeedStream::new(2).derive("d")).unwrap();
    assert_eq!(d1, d2);
}

#[test]
fn sampled_weight_spread() {
    let g = sample_generator_bank(2, 2, 10_000, 10.0, &mut SeedStream::new(8).derive("g")).unwrap();
    let w = &g.weights()[2 * 4..];
    let std = (w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt();
    assert!((std - 10.0).abs() < 0.2, "{std}");
    assert_eq!(g.bias(0), &[1.0, 0.0]);
    assert_eq!(g.bias(1), &[0.0, 1.0]);
    let d = bank(4, 1000, Activation::Tanh);
    let all: Vec<f64> = d.a().as_slice().iter().chain(d.b()).copied().collect();
    let s = (all.iter().map(|v| v * v).sum::<f64>() / all.len() as f64).sqrt();
    assert!((s - 1.0).abs() < 0.05, "{s}");
}
