use std::path::Path;
use std::process::Command;

use proptest::prelude::*;
use rfwgan_cli::checkpoint::{Checkpoint, MAGIC};
use rfwgan_cli::commands::{self, Overrides, POINT_CONDITION_WARNING};
use rfwgan_cli::config::{format_float, GeneratorKind, LandscapeMode};
use rfwgan_cli::{bundled_config, CliError, ExperimentConfig, BUNDLED_CONFIGS};
use rfwgan_core::{Activation, DiscriminatorFeatureBank, DiscriminatorScheme, FixtureName, Matrix};

fn tiny(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.out_dir = out.to_path_buf();
    cfg.generator.width = 16;
    cfg.discriminator.width = 8;
    cfg.train.alpha0 = 1e-3;
    cfg.train.epochs = 2;
    cfg.train.iters_per_epoch = 5;
    cfg.train.batch_x = 64;
    cfg.train.batch_z1 = 64;
    cfg.train.batch_z2 = 64;
    cfg.eval.x_count = 128;
    cfg.eval.z_count = 128;
    cfg.output.samples = 200;
    cfg.output.kde_resolution = 16;
    cfg.diagnose.tolerances.x_count = 256;
    cfg.diagnose.tolerances.z_count = 256;
    cfg.diagnose.scan_resolution = 12;
    cfg.diagnose.grad_check_z_count = 32;
    cfg
}

fn rfwgan(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rfwgan")).args(args).output().unwrap()
}

#[test]
fn bundled_configs_are_canonical() {
    for (name, text) in BUNDLED_CONFIGS {
        let cfg = ExperimentConfig::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap();
        assert_eq!(cfg.to_text(), text, "{name} is not in canonical form");
    }
}

#[test]
fn bundled_experiment_sizes() {
    let get = |n: &str| ExperimentConfig::parse(bundled_config(n).unwrap()).unwrap();
    let full = get("eight_ring_full");
    assert_eq!(full, ExperimentConfig::default());
    assert_eq!((full.generator.width, full.discriminator.width), (5000, 1000));
    assert_eq!((full.train.epochs, full.train.iters_per_epoch, full.train.batch_x), (25, 100, 5000));
    assert_eq!((full.train.alpha0, full.train.theta_init_variance), (1e-5, 5e-3));
    let grid = get("nine_grid_full");
    assert_eq!((grid.fixture, grid.generator.width, grid.train.alpha0), (FixtureName::NineGrid, 10000, 5e-6));
    let spiral = get("spiral_twenty_full");
    assert_eq!((spiral.fixture, spiral.train.alpha0, spiral.train.theta_init_variance), (FixtureName::SpiralTwenty, 1e-6, 3e-3));
    let desk = get("eight_ring_desk");
    assert_eq!((desk.generator.width, desk.discriminator.width, desk.train.batch_z2), (500, 100, 512));
    assert_eq!(desk.train.epochs * desk.train.iters_per_epoch, 2000);
    for (ng, mode) in [(2, LandscapeMode::Direct), (3, LandscapeMode::Plane), (100, LandscapeMode::Plane)] {
        let l = get(&format!("landscape_ng{ng}"));
        assert_eq!((l.generator.width, l.landscape.mode, l.fixture), (ng, mode, FixtureName::TwoVertical));
        assert!(matches!(l.generator.kind, GeneratorKind::ScaledIsotropic { .. }));
        assert_eq!((l.landscape.resolution, l.landscape.range), (81, (-3.0, 3.0)));
    }
}

#[test]
fn config_errors_name_the_line() {
    let base = ExperimentConfig::default().to_text();
    let err = ExperimentConfig::parse(&format!("{base}train.bogus = 1\n")).unwrap_err();
    assert!(matches!(err, CliError::Config(_)));
    assert!(err.to_string().contains("train.bogus"), "{err}");
    let err = ExperimentConfig::parse(&base.replace("train.alpha0 = 1e-5", "train.alpha0 = fast")).unwrap_err();
    assert!(err.to_string().contains("train.alpha0"), "{err}");
}

proptest! {
    #[test]
    fn floats_round_trip_through_config_text(v in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn configs_round_trip(alpha in 1e-9f64..1.0, decay in 0.01f64..1.0, seed in any::<u64>(), width in 1usize..10_000) {
        let mut cfg = ExperimentConfig::default();
        cfg.train.alpha0 = alpha;
        cfg.train.decay = decay;
        cfg.seed = seed;
        cfg.generator.width = width;
        prop_assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}

#[test]
fn train_writes_artifacts_and_checkpoints_resave_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(tmp.path());
    let out = commands::train(&cfg, &mut Vec::new()).unwrap();
    for f in ["config.txt", "history.csv", "samples.csv", "kde.csv", "kde.svg", "summary.txt", "checkpoints/epoch_001.ckpt", "checkpoints/epoch_002.ckpt"] {
        assert!(out.dir.join(f).is_file(), "{f}");
    }
    let history = std::fs::read_to_string(out.dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 11);
    let bytes = std::fs::read(&out.checkpoint).unwrap();
    let ckpt = Checkpoint::load(&out.checkpoint).unwrap();
    assert_eq!(ckpt.state.iter, 10);
    assert_eq!(ckpt.config, cfg);
    let copy = tmp.path().join("copy.ckpt");
    ckpt.save(&copy).unwrap();
    assert_eq!(std::fs::read(&copy).unwrap(), bytes);
}

#[test]
fn future_checkpoint_versions_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let out = commands::train(&tiny(tmp.path()), &mut Vec::new()).unwrap();
    let text = std::fs::read_to_string(&out.checkpoint).unwrap();
    let bumped = text.replacen(&format!("{MAGIC} 1"), &format!("{MAGIC} 2"), 1);
    assert!(matches!(Checkpoint::parse(&bumped), Err(CliError::UnsupportedVersion { .. })));
    let truncated = &text[..text.len() / 2];
    assert!(Checkpoint::parse(truncated).is_err());
}

#[test]
fn zero_epochs_writes_a_header_only_history() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(tmp.path());
    cfg.train.epochs = 0;
    let out = commands::train(&cfg, &mut Vec::new()).unwrap();
    assert_eq!(std::fs::read_to_string(out.dir.join("history.csv")).unwrap(), "iter,epoch,alpha,L,J,gradnorm,ms\n");
    assert!(out.history.records.is_empty());
}

#[test]
fn missing_config_exits_nonzero_naming_the_path() {
    let out = rfwgan(&["train", "--config", "/nonexistent/desk.conf"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/desk.conf"), "{err}");
}

#[test]
fn direct_mode_needs_two_features() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("ng3.conf");
    std::fs::write(&conf, bundled_config("landscape_ng3").unwrap()).unwrap();
    let out = rfwgan(&["landscape", "--config", conf.to_str().unwrap(), "--mode", "direct", "--out", tmp.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("direct mode requires N_g=2, got N_g=3"), "{err}");
}

#[test]
fn binary_trains_and_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("tiny.conf");
    std::fs::write(&conf, tiny(tmp.path()).to_text()).unwrap();
    let c = conf.to_str().unwrap();
    let out = rfwgan(&["train", "--config", c, "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ckpt = tmp.path().join("train_eight_ring_3/checkpoint.ckpt");
    assert!(ckpt.is_file());
    let out = rfwgan(&["sample", "--config", c, "--checkpoint", ckpt.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("sample_eight_ring_0");
    for f in ["target.csv", "generated.csv", "generated_kde.svg", "coverage.txt"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let out = rfwgan(&["diagnose", "--checkpoint", ckpt.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(tmp.path().join("diagnose_eight_ring_3/report.txt")).unwrap();
    assert!(report.contains("grad_norm="));
}

#[test]
fn duplicated_discriminator_features_trigger_the_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(tmp.path());
    cfg.discriminator.width = 2;
    cfg.train.epochs = 1;
    let out = commands::train(&cfg, &mut Vec::new()).unwrap();
    let mut ckpt = Checkpoint::load(&out.checkpoint).unwrap();
    let a = Matrix::from_rows(&[vec![0.7, -1.2], vec![0.7, -1.2]]).unwrap();
    ckpt.discriminator = DiscriminatorFeatureBank::from_parts(Activation::Tanh, a, vec![0.1, 0.1]).unwrap();
    let path = tmp.path().join("dup.ckpt");
    ckpt.save(&path).unwrap();
    let mut log = Vec::new();
    let d = commands::diagnose(&path, &Overrides::default(), &mut log).unwrap();
    assert!(d.point_condition_violated);
    assert!(String::from_utf8(log).unwrap().contains(POINT_CONDITION_WARNING));

    // A Gaussian bank of the same size passes.
    ckpt.discriminator = DiscriminatorFeatureBank::sample(2, 2, Activation::Tanh, &DiscriminatorScheme::Gaussian { std: 1.0 }, &mut rfwgan_core::SeedStream::new(0).derive("d")).unwrap();
    ckpt.save(&path).unwrap();
    let d = commands::diagnose(&path, &Overrides::default(), &mut Vec::new()).unwrap();
    assert!(!d.point_condition_violated);
    assert!(d.grad_check.is_some());
}

#[test]
fn approx_lab_writes_the_ladder() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::parse(bundled_config("approx_lab").unwrap()).unwrap();
    cfg.out_dir = tmp.path().to_path_buf();
    let out = commands::approx_lab(&cfg, &mut Vec::new()).unwrap();
    assert_eq!(out.rows.len(), 20);
    let csv = std::fs::read_to_string(out.dir.join("ladder.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("ng,seed,weak_error,approximation,mollifier"));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(tmp.path());
    cfg.output.record_time = false;
    let conf = tmp.path().join("tiny.conf");
    std::fs::write(&conf, cfg.to_text()).unwrap();
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = tmp.path().join(threads);
        let out = Command::new(env!("CARGO_BIN_EXE_rfwgan"))
            .args(["train", "--config", conf.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
            .env("RFWGAN_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let dir = out_dir.join("train_eight_ring_0");
        // The checkpoint embeds the config and with it the output path.
        let ckpt = rfwgan_cli::Checkpoint::load(&dir.join("checkpoint.ckpt")).unwrap();
        runs.push((["history.csv", "samples.csv", "kde.csv"].map(|f| std::fs::read(dir.join(f)).unwrap()), ckpt.state));
    }
    assert!(runs[0] == runs[1]);
    let bad = Command::new(env!("CARGO_BIN_EXE_rfwgan")).args(["train", "--config", conf.to_str().unwrap()]).env("RFWGAN_THREADS", "zero").output().unwrap();
    assert!(!bad.status.success());
}
