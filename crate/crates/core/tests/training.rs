mod common;

use proptest::prelude::*;
use rfwgan_core::training::{sgad_step, sgd_j_step, stepsize, train, Silent};
use rfwgan_core::{FrozenObjective, SeedStream, TrainConfig, TrainState};

use common::{gaussian_vec, small};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // With a unit ascent step the η update lands on the batch residual, so
    // SGAD reduces to SGD on Ĵ whatever η was.
    #[test]
    fn sgad_equals_sgd_on_j(seed in 0u64..1000, alpha in 1e-4f64..1e-1) {
        let s = small(seed, 10, 7);
        let st = SeedStream::new(seed);
        let x = s.gmm.sample(64, &mut st.derive("bx")).unwrap();
        let z1 = s.latent.sample(48, &mut st.derive("bz1")).unwrap();
        let z2 = s.latent.sample(32, &mut st.derive("bz2")).unwrap();
        let theta = gaussian_vec(10, 0.2, &mut st.derive("theta"));
        let eta_a = gaussian_vec(7, 1.0, &mut st.derive("eta.a"));
        let eta_b = gaussian_vec(7, 50.0, &mut st.derive("eta.b"));
        let sgd = sgd_j_step(&theta, &s.d, &s.g, &x, &z1, &z2, alpha).unwrap();
        for eta in [eta_a, eta_b] {
            let next = sgad_step(&TrainState::new(theta.clone(), eta, alpha), &s.d, &s.g, &x, &z1, &z2).unwrap();
            prop_assert_eq!(&next.theta, &sgd);
            prop_assert_eq!(next.iter, 1);
        }
    }
}

#[test]
fn full_batch_step_descends_j() {
    let s = small(3, 20, 15);
    let obj = FrozenObjective::new(&s.g, &s.d, &s.q).unwrap();
    let theta = gaussian_vec(20, 0.3, &mut SeedStream::new(3).derive("t"));
    let j0 = obj.j(&theta).unwrap();
    let g = obj.grad(&theta).unwrap();
    let g2: f64 = g.iter().map(|v| v * v).sum();
    // Same quadrature for every batch: one SGD step is one gradient step.
    let alpha = 1e-4 / g2.sqrt().max(1.0);
    let next = sgd_j_step(&theta, &s.d, &s.g, s.q.x(), s.q.z(), s.q.z(), alpha).unwrap();
    let j1 = obj.j(&next).unwrap();
    assert!(j1 < j0);
    let predicted = alpha * g2;
    assert!(((j0 - j1) - predicted).abs() <= 1e-2 * predicted, "{} vs {predicted}", j0 - j1);
}

#[test]
fn stepsize_schedule() {
    let cfg = TrainConfig { alpha0: 0.5, decay: 0.8, ..TrainConfig::default() };
    assert_eq!(stepsize(&cfg, 0), 0.5);
    assert!((stepsize(&cfg, 3) - 0.5 * 0.8f64.powi(3)).abs() < 1e-16);
}

fn tiny_config(seed: u64) -> TrainConfig {
    TrainConfig {
        alpha0: 1e-3,
        decay: 0.9,
        epochs: 3,
        iters_per_epoch: 10,
        batch_x: 128,
        batch_z1: 128,
        batch_z2: 128,
        theta_init_std: 0.05,
        eta_init_std: 1.0,
        seed,
    }
}

#[test]
fn training_is_deterministic_and_logs_every_iteration() {
    let s = small(5, 30, 20);
    let cfg = tiny_config(5);
    let run = || train(&cfg, &s.g, &s.d, &s.gmm, &s.latent, &s.q, &mut Silent).unwrap();
    let (a, ha) = run();
    let (b, hb) = run();
    assert_eq!(a, b);
    assert_eq!(ha.records.len(), 30);
    let strip = |h: &rfwgan_core::TrainHistory| {
        let mut v = Vec::new();
        h.write_csv(&mut v, false).unwrap();
        v
    };
    assert_eq!(strip(&ha), strip(&hb));
    assert_eq!(ha.records.last().unwrap().epoch, 2);
    assert!((ha.records[25].alpha - 1e-3 * 0.81).abs() < 1e-18);
    assert!(ha.final_j() < ha.initial_j);
}

#[test]
fn zero_epochs_is_an_empty_run() {
    let s = small(2, 6, 4);
    let cfg = TrainConfig { epochs: 0, ..tiny_config(2) };
    let (state, hist) = train(&cfg, &s.g, &s.d, &s.gmm, &s.latent, &s.q, &mut Silent).unwrap();
    assert!(hist.records.is_empty());
    assert_eq!(state.iter, 0);
    let mut out = Vec::new();
    hist.write_csv(&mut out, true).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), "iter,epoch,alpha,L,J,gradnorm,ms\n");
}
