//! The five commands. Each writes its artifacts under
//! `<out>/<command>_<fixture>_<seed>/` and returns a summary for callers
//! that want to inspect results without reparsing files.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::RngCore as _;
use rfwgan_core::approx_lab::{run_lab, LabRow};
use rfwgan_core::diagnostics::{
    classify_stationarity, flat_cells, grad_check, landscape_direct_2d, landscape_plane, local_minima,
    min_singular_scan, mode_coverage, nondegeneracy_proxy, random_plane_split, square_grid, GradCheck,
    LandscapeGrid, SingularScan, StationarityReport,
};
use rfwgan_core::distributions::{kde_density, KdeConfig};
use rfwgan_core::training::{train as run_training, ProgressSink, TrainAbort};
use rfwgan_core::{
    DiscriminatorFeatureBank, FrozenObjective, GaussianMixture, GeneratorFeatureBank, LatentSpec, Matrix,
    QuadratureSet, SeedStream, TrainHistory, TrainRecord, TrainState,
};

use crate::checkpoint::Checkpoint;
use crate::config::{ExperimentConfig, LandscapeCenter, LandscapeMode};
use crate::output::{self, num, Field};
use crate::CliError;

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let text = output::read_file(path)?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    overrides.apply(&mut cfg);
    Ok(cfg)
}

/// Target, latent and both frozen banks of an experiment.
pub struct Setup {
    pub gmm: GaussianMixture,
    pub latent: LatentSpec,
    pub generator: GeneratorFeatureBank,
    pub discriminator: DiscriminatorFeatureBank,
}

impl Setup {
    pub fn sample(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let gmm = cfg.fixture.build();
        let latent = LatentSpec::new(cfg.latent_dim)?;
        let seeds = SeedStream::new(cfg.seed);
        let generator = GeneratorFeatureBank::sample(
            cfg.latent_dim,
            gmm.dim(),
            cfg.generator.width,
            cfg.generator.activation,
            &cfg.generator.scheme(),
            &mut seeds.derive("bank.generator"),
        )?;
        let discriminator = DiscriminatorFeatureBank::sample(
            gmm.dim(),
            cfg.discriminator.width,
            cfg.discriminator.activation,
            &cfg.discriminator.scheme,
            &mut seeds.derive("bank.discriminator"),
        )?;
        Ok(Self {
            gmm,
            latent,
            generator,
            discriminator,
        })
    }

    /// Reuses the banks stored in a checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, CliError> {
        Ok(Self {
            gmm: ckpt.config.fixture.build(),
            latent: LatentSpec::new(ckpt.config.latent_dim)?,
            generator: ckpt.generator.clone(),
            discriminator: ckpt.discriminator.clone(),
        })
    }

    fn quadrature(&self, seed: u64, prefix: &str, x_count: usize, z_count: usize) -> Result<QuadratureSet, CliError> {
        let seeds = SeedStream::new(seed);
        Ok(QuadratureSet::sample(
            &self.gmm,
            &self.latent,
            x_count,
            z_count,
            &mut seeds.derive(&format!("{prefix}.x")),
            &mut seeds.derive(&format!("{prefix}.z")),
        )?)
    }

    fn generated(&self, theta: &[f64], count: usize, seed: u64) -> Result<Matrix, CliError> {
        let z = self.latent.sample(count, &mut SeedStream::new(seed).derive("sample.z"))?;
        Ok(self.generator.forward_batch(theta, &z)?)
    }
}

fn write_kde(dir: &Path, stem: &str, samples: &Matrix, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let o = &cfg.output;
    let kde = kde_density(samples, &KdeConfig::square(o.kde_half_width, o.kde_resolution, o.kde_bandwidth))?;
    let field = Field {
        xs: &kde.xs,
        ys: &kde.ys,
        values: &kde.values,
    };
    output::write_file(&dir.join(format!("{stem}.csv")), field.csv("x,y,density").as_bytes())?;
    let title = format!("{stem} ({}, bandwidth {:.4}, {:.4})", cfg.fixture, kde.bandwidth.0, kde.bandwidth.1);
    output::write_file(&dir.join(format!("{stem}.svg")), field.svg(&title, false).as_bytes())
}

fn coverage_lines(coverage: &[f64]) -> String {
    coverage
        .iter()
        .enumerate()
        .map(|(m, c)| format!("coverage.{m}={}\n", num(*c)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub dir: PathBuf,
    pub checkpoint: PathBuf,
    pub history: TrainHistory,
    pub coverage: Vec<f64>,
}

struct EpochCheckpoints<'a, W: Write> {
    cfg: &'a ExperimentConfig,
    setup: &'a Setup,
    dir: &'a Path,
    log: &'a mut W,
    error: Option<CliError>,
}

impl<W: Write> ProgressSink for EpochCheckpoints<'_, W> {
    fn on_iteration(&mut self, _state: &TrainState, _record: &TrainRecord) {}

    fn on_epoch_end(&mut self, state: &TrainState, history: &TrainHistory) {
        let ckpt = Checkpoint {
            config: self.cfg.clone(),
            generator: self.setup.generator.clone(),
            discriminator: self.setup.discriminator.clone(),
            state: state.clone(),
        };
        let path = self.dir.join("checkpoints").join(format!("epoch_{:03}.ckpt", state.epoch + 1));
        if let Err(e) = ckpt.save(&path) {
            self.error.get_or_insert(e);
        }
        if let Some(r) = history.records.last() {
            let _ = writeln!(
                self.log,
                "epoch {}/{}  iter {}  alpha {:.3e}  J {:.4e}  |grad J| {:.3e}",
                state.epoch + 1,
                self.cfg.train.epochs,
                r.iter,
                r.alpha,
                r.j,
                r.grad_norm
            );
        }
    }
}

/// Trains and writes `history.csv`, per-epoch and final checkpoints,
/// `samples.csv`, `kde.csv`/`kde.svg` and `summary.txt`.
pub fn train<W: Write>(cfg: &ExperimentConfig, log: &mut W) -> Result<TrainOutcome, CliError> {
    cfg.validate()?;
    let dir = output::run_dir(&cfg.out_dir, "train", cfg.fixture.as_str(), cfg.seed);
    output::create_dir(&dir)?;
    output::write_file(&dir.join("config.txt"), cfg.to_text().as_bytes())?;
    let setup = Setup::sample(cfg)?;
    let eval = setup.quadrature(cfg.seed, "eval", cfg.eval.x_count, cfg.eval.z_count)?;
    let mut sink = EpochCheckpoints {
        cfg,
        setup: &setup,
        dir: &dir,
        log,
        error: None,
    };
    let result = run_training(
        &cfg.train_config(),
        &setup.generator,
        &setup.discriminator,
        &setup.gmm,
        &setup.latent,
        &eval,
        &mut sink,
    );
    if let Some(e) = sink.error {
        return Err(e);
    }
    let write_history = |h: &TrainHistory| {
        let mut buf = Vec::new();
        h.write_csv(&mut buf, cfg.output.record_time).expect("writing to memory");
        output::write_file(&dir.join("history.csv"), &buf)
    };
    let (state, history) = match result {
        Ok(v) => v,
        Err(TrainAbort { source, state, history }) => {
            write_history(&history)?;
            if let Some(state) = state {
                let ckpt = Checkpoint {
                    config: cfg.clone(),
                    generator: setup.generator.clone(),
                    discriminator: setup.discriminator.clone(),
                    state,
                };
                ckpt.save(&dir.join("checkpoint_aborted.ckpt"))?;
            }
            return Err(CliError::Core(source));
        }
    };
    write_history(&history)?;
    let checkpoint = dir.join("checkpoint.ckpt");
    let theta = state.theta.clone();
    Checkpoint {
        config: cfg.clone(),
        generator: setup.generator.clone(),
        discriminator: setup.discriminator.clone(),
        state,
    }
    .save(&checkpoint)?;
    let samples = setup.generated(&theta, cfg.output.samples, cfg.seed)?;
    output::write_file(&dir.join("samples.csv"), output::points_csv(&samples).as_bytes())?;
    write_kde(&dir, "kde", &samples, cfg)?;
    let coverage = mode_coverage(&samples, &setup.gmm, cfg.output.coverage_multiplier)?;
    let summary = format!(
        "initial_j={}\nfinal_j={}\nratio={}\niterations={}\n{}",
        num(history.initial_j),
        num(history.final_j()),
        num(history.final_j() / history.initial_j),
        history.records.len(),
        coverage_lines(&coverage)
    );
    output::write_file(&dir.join("summary.txt"), summary.as_bytes())?;
    writeln!(
        sink.log,
        "J: {:.4e} -> {:.4e}; artifacts in {}",
        history.initial_j,
        history.final_j(),
        dir.display()
    )
    .ok();
    Ok(TrainOutcome {
        dir,
        checkpoint,
        history,
        coverage,
    })
}

#[derive(Debug, Clone)]
pub struct LandscapeOutcome {
    pub dir: PathBuf,
    pub grid: LandscapeGrid,
    /// Strict grid-local minima as `(s, t, Ĵ)`.
    pub minima: Vec<(f64, f64, f64)>,
    pub flat_cells: usize,
    pub direction_seeds: Option<(u64, u64)>,
}

/// Evaluates `Ĵ` on a grid and writes `landscape.csv`, `landscape.svg`
/// and `summary.txt`.
pub fn landscape<W: Write>(
    cfg: &ExperimentConfig,
    mode: Option<LandscapeMode>,
    center: Option<LandscapeCenter>,
    log: &mut W,
) -> Result<LandscapeOutcome, CliError> {
    cfg.validate()?;
    let l = &cfg.landscape;
    let mode = mode.unwrap_or(l.mode);
    let center = center.unwrap_or_else(|| l.center.clone());
    let (setup, theta0) = match &center {
        LandscapeCenter::Zero => {
            let s = Setup::sample(cfg)?;
            let zero = vec![0.0; s.generator.len()];
            (s, zero)
        }
        LandscapeCenter::Checkpoint(path) => {
            let ckpt = Checkpoint::load(path)?;
            (Setup::from_checkpoint(&ckpt)?, ckpt.state.theta)
        }
    };
    let ng = setup.generator.len();
    if mode == LandscapeMode::Direct && ng != 2 {
        return Err(CliError::Usage(format!("direct mode requires N_g=2, got N_g={ng}")));
    }
    let dir = output::run_dir(&cfg.out_dir, &format!("landscape_ng{ng}_{}", mode.as_str()), cfg.fixture.as_str(), cfg.seed);
    let q = setup.quadrature(cfg.seed, "eval", l.x_count, l.z_count)?;
    let obj = FrozenObjective::new(&setup.generator, &setup.discriminator, &q)?;
    let (grid, direction_seeds) = match mode {
        LandscapeMode::Direct => {
            let mut g = landscape_direct_2d(&obj, l.range, l.resolution)?;
            if theta0.iter().any(|&v| v != 0.0) {
                g.center = theta0.clone();
            }
            (g, None)
        }
        LandscapeMode::Plane => {
            let mut stream = SeedStream::new(cfg.seed).derive("landscape.directions");
            let seeds = (stream.next_u64(), stream.next_u64());
            let dirs = random_plane_split(
                ng,
                &mut SeedStream::new(seeds.0).derive("landscape.direction"),
                &mut SeedStream::new(seeds.1).derive("landscape.direction"),
            )?;
            (landscape_plane(&obj, &theta0, dirs, l.range, l.resolution)?, Some(seeds))
        }
    };
    let minima: Vec<(f64, f64, f64)> = local_minima(&grid)
        .into_iter()
        .map(|(is, it)| (grid.s_axis[is], grid.t_axis[it], grid.values.get(it, is)))
        .collect();
    let flats = flat_cells(&grid).len();
    let field = Field {
        xs: &grid.s_axis,
        ys: &grid.t_axis,
        values: &grid.values,
    };
    output::write_file(&dir.join("landscape.csv"), field.csv("s,t,J").as_bytes())?;
    let title = format!("log10 J, {} mode, N_g={ng}, {}", mode.as_str(), cfg.fixture);
    output::write_file(&dir.join("landscape.svg"), field.svg(&title, true).as_bytes())?;
    let (ia, ib) = grid.argmin();
    let mut summary = format!(
        "mode={}\nn_g={ng}\nresolution={}\nrange={}, {}\ncenter={}\nlocal_minima={}\nflat_cells={flats}\ngrid_min={}\ngrid_min_at={}, {}\n",
        mode.as_str(),
        grid.resolution(),
        num(l.range.0),
        num(l.range.1),
        match &center {
            LandscapeCenter::Zero => "zero".to_string(),
            LandscapeCenter::Checkpoint(p) => p.display().to_string(),
        },
        minima.len(),
        num(grid.values.get(ib, ia)),
        num(grid.s_axis[ia]),
        num(grid.t_axis[ib]),
    );
    if let Some((a, b)) = direction_seeds {
        summary.push_str(&format!("direction_seed_s={a}\ndirection_seed_t={b}\n"));
    }
    for (s, t, j) in &minima {
        summary.push_str(&format!("minimum={}, {}, {}\n", num(*s), num(*t), num(*j)));
    }
    output::write_file(&dir.join("summary.txt"), summary.as_bytes())?;
    writeln!(log, "local minima: {} ({} flat cells); artifacts in {}", minima.len(), flats, dir.display()).ok();
    Ok(LandscapeOutcome {
        dir,
        grid,
        minima,
        flat_cells: flats,
        direction_seeds,
    })
}

pub const POINT_CONDITION_WARNING: &str = "point condition violated";

#[derive(Debug, Clone)]
pub struct DiagnoseOutcome {
    pub dir: PathBuf,
    pub report: StationarityReport,
    pub scan: SingularScan,
    pub point_condition_violated: bool,
    pub grad_check: Option<GradCheck>,
    pub nondegeneracy: f64,
}

/// Classifies the checkpoint's `θ` and scans the discriminator Jacobian;
/// writes `report.txt`, `scan.csv` and (for `N_g ≤ 32`) `grad_check.csv`.
pub fn diagnose<W: Write>(checkpoint: &Path, overrides: &Overrides, log: &mut W) -> Result<DiagnoseOutcome, CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut cfg = ckpt.config.clone();
    overrides.apply(&mut cfg);
    let setup = Setup::from_checkpoint(&ckpt)?;
    let theta = &ckpt.state.theta;
    let dg = &cfg.diagnose;
    let seeds = SeedStream::new(cfg.seed);
    let report = classify_stationarity(
        &setup.generator,
        &setup.discriminator,
        &setup.gmm,
        &setup.latent,
        theta,
        dg.tolerances,
        &mut seeds.derive("diag.x"),
        &mut seeds.derive("diag.z"),
    )?;
    let n = setup.gmm.dim();
    let points = if n == 2 {
        square_grid(dg.scan_range.0, dg.scan_range.1, dg.scan_resolution)
    } else {
        setup.gmm.sample(dg.scan_resolution * dg.scan_resolution, &mut seeds.derive("diag.scan"))?
    };
    let scan = min_singular_scan(&setup.discriminator, &points)?;
    let scale = scan.values.iter().copied().fold(0.0, f64::max);
    let point_condition_violated = scan.point_condition_applicable && scan.min <= f64::EPSILON * scale;
    let grad_check = if setup.generator.len() <= 32 {
        let q = setup.quadrature(cfg.seed, "diag.check", dg.grad_check_z_count, dg.grad_check_z_count)?;
        let obj = FrozenObjective::new(&setup.generator, &setup.discriminator, &q)?;
        Some(grad_check(&obj, theta, dg.grad_check_step)?)
    } else {
        None
    };
    let outputs = setup.generated(theta, cfg.output.samples, cfg.seed)?;
    let nondegeneracy = nondegeneracy_proxy(&outputs)?;

    let dir = output::run_dir(&cfg.out_dir, "diagnose", cfg.fixture.as_str(), cfg.seed);
    let mut text = format!(
        "checkpoint: {}\nclassification: {}\nJ estimate: {:.6e} (± {:.2e})\ngradient norm: {:.6e}\n",
        checkpoint.display(),
        report.classification.as_str(),
        report.j_hat,
        report.j_std,
        report.grad_norm
    );
    let (nd, scan_line) = (setup.discriminator.len(), format!("min singular value over scan: {:.6e}", scan.min));
    text.push_str(&scan_line);
    text.push('\n');
    if !scan.point_condition_applicable {
        text.push_str(&format!("point condition not applicable: N_d={nd} > n={n}\n"));
    }
    if point_condition_violated {
        text.push_str(&format!("warning: {POINT_CONDITION_WARNING} at x = {:?}\n", scan.argmin_point));
    }
    if let Some(gc) = &grad_check {
        text.push_str(&format!("gradient check max relative error: {:.3e}\n", gc.max_rel_error));
    }
    text.push_str(&format!("nondegeneracy proxy: {:.6e}\n\n", nondegeneracy));
    text.push_str(&report.key_values());
    text.push_str(&format!(
        "scan_min={}\npoint_condition_applicable={}\npoint_condition_violated={point_condition_violated}\nnondegeneracy={}\n",
        num(scan.min),
        scan.point_condition_applicable,
        num(nondegeneracy)
    ));
    if let Some(gc) = &grad_check {
        text.push_str(&format!("grad_check_max_rel_error={}\n", num(gc.max_rel_error)));
        let mut csv = String::from("i,analytic,numeric\n");
        for (i, (a, b)) in gc.analytic.iter().zip(&gc.numeric).enumerate() {
            csv.push_str(&format!("{i},{},{}\n", num(*a), num(*b)));
        }
        output::write_file(&dir.join("grad_check.csv"), csv.as_bytes())?;
    }
    output::write_file(&dir.join("report.txt"), text.as_bytes())?;
    let mut csv = String::new();
    let header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    csv.push_str(&format!("{},sigma_min\n", header.join(",")));
    for (row, v) in points.rows_iter().zip(&scan.values) {
        let cells: Vec<String> = row.iter().map(|&x| num(x)).collect();
        csv.push_str(&format!("{},{}\n", cells.join(","), num(*v)));
    }
    output::write_file(&dir.join("scan.csv"), csv.as_bytes())?;
    write!(log, "{text}").ok();
    if point_condition_violated {
        eprintln!("warning: {POINT_CONDITION_WARNING}");
    }
    Ok(DiagnoseOutcome {
        dir,
        report,
        scan,
        point_condition_violated,
        grad_check,
        nondegeneracy,
    })
}

#[derive(Debug, Clone)]
pub struct LabOutcome {
    pub dir: PathBuf,
    pub rows: Vec<LabRow>,
    /// Seeds whose error at the largest width is below the smallest width's.
    pub decreasing_seeds: usize,
}

/// Runs the convergence ladder and writes `ladder.csv` and `summary.txt`.
pub fn approx_lab<W: Write>(cfg: &ExperimentConfig, log: &mut W) -> Result<LabOutcome, CliError> {
    cfg.validate()?;
    let rows = run_lab(&cfg.lab, cfg.seed)?;
    let dir = output::run_dir(&cfg.out_dir, "approx-lab", cfg.fixture.as_str(), cfg.seed);
    let mut csv = String::from("ng,seed,weak_error,approximation,mollifier\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.ng,
            r.seed,
            num(r.weak_error.total()),
            num(r.weak_error.approximation),
            num(r.weak_error.mollifier)
        ));
    }
    output::write_file(&dir.join("ladder.csv"), csv.as_bytes())?;
    let lo = cfg.lab.ladder.iter().copied().min().unwrap_or(0);
    let hi = cfg.lab.ladder.iter().copied().max().unwrap_or(0);
    let error_at = |seed: u64, ng: usize| {
        rows.iter()
            .find(|r| r.seed == seed && r.ng == ng)
            .map(|r| r.weak_error.total())
    };
    let mut summary = String::new();
    let mut decreasing_seeds = 0;
    for seed in 0..cfg.lab.seeds as u64 {
        let (a, b) = (error_at(seed, lo).unwrap_or(f64::NAN), error_at(seed, hi).unwrap_or(f64::NAN));
        if b < a {
            decreasing_seeds += 1;
        }
        summary.push_str(&format!("seed.{seed}=ng {lo}: {}, ng {hi}: {}\n", num(a), num(b)));
    }
    summary.push_str(&format!("decreasing_seeds={decreasing_seeds}\nseeds={}\n", cfg.lab.seeds));
    output::write_file(&dir.join("summary.txt"), summary.as_bytes())?;
    writeln!(
        log,
        "{} cells; error decreased from N_g={lo} to N_g={hi} for {decreasing_seeds} of {} seeds; artifacts in {}",
        rows.len(),
        cfg.lab.seeds,
        dir.display()
    )
    .ok();
    Ok(LabOutcome {
        dir,
        rows,
        decreasing_seeds,
    })
}

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub dir: PathBuf,
    pub target: Matrix,
    pub generated: Option<Matrix>,
}

/// Writes target samples and their KDE; with a checkpoint also the
/// generated samples, their KDE and the mode coverage.
pub fn sample<W: Write>(cfg: &ExperimentConfig, checkpoint: Option<&Path>, log: &mut W) -> Result<SampleOutcome, CliError> {
    cfg.validate()?;
    let gmm = cfg.fixture.build();
    let dir = output::run_dir(&cfg.out_dir, "sample", cfg.fixture.as_str(), cfg.seed);
    let target = gmm.sample(cfg.output.samples, &mut SeedStream::new(cfg.seed).derive("sample.x"))?;
    output::write_file(&dir.join("target.csv"), output::points_csv(&target).as_bytes())?;
    write_kde(&dir, "target_kde", &target, cfg)?;
    let generated = match checkpoint {
        None => None,
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let setup = Setup::from_checkpoint(&ckpt)?;
            let out = setup.generated(&ckpt.state.theta, cfg.output.samples, cfg.seed)?;
            output::write_file(&dir.join("generated.csv"), output::points_csv(&out).as_bytes())?;
            write_kde(&dir, "generated_kde", &out, cfg)?;
            let coverage = mode_coverage(&out, &setup.gmm, cfg.output.coverage_multiplier)?;
            output::write_file(&dir.join("coverage.txt"), coverage_lines(&coverage).as_bytes())?;
            Some(out)
        }
    };
    writeln!(log, "samples in {}", dir.display()).ok();
    Ok(SampleOutcome { dir, target, generated })
}
