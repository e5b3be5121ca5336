//! Experiment configuration as flat `section.key = value` text.
//!
//! Every key has a default, so a file only needs what differs. The
//! canonical writer emits every applicable key; parsing its output gives
//! back the same configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rfwgan_core::approx_lab::{ImportanceSpec, LabConfig, TestFunction};
use rfwgan_core::diagnostics::StationarityTolerances;
use rfwgan_core::distributions::Bandwidth;
use rfwgan_core::{Activation, DiscriminatorScheme, FixtureName, GeneratorScheme, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorKind {
    /// `κ` entries IID `N(0, weight_std²)` with `constant_features` constants.
    Gaussian { weight_std: f64, constant_features: usize },
    /// Isotropic weights times a standard-normal scalar, biases
    /// `N(0, bias_variance)`.
    ScaledIsotropic { bias_variance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSection {
    pub width: usize,
    pub activation: Activation,
    pub kind: GeneratorKind,
}

impl GeneratorSection {
    pub fn scheme(&self) -> GeneratorScheme {
        match self.kind {
            GeneratorKind::Gaussian {
                weight_std,
                constant_features,
            } => GeneratorScheme::Gaussian {
                weight_std,
                constant_features,
            },
            GeneratorKind::ScaledIsotropic { bias_variance } => GeneratorScheme::ScaledIsotropic {
                bias_std: bias_variance.sqrt(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorSection {
    pub width: usize,
    pub activation: Activation,
    pub scheme: DiscriminatorScheme,
}

/// Training hyperparameters as written in experiment recipes; the θ
/// initialization is given as a variance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSection {
    pub alpha0: f64,
    pub decay: f64,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub batch_x: usize,
    pub batch_z1: usize,
    pub batch_z2: usize,
    pub theta_init_variance: f64,
    pub eta_init_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    /// Frozen quadrature on which the history `Ĵ` is evaluated.
    pub x_count: usize,
    pub z_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSection {
    /// Include the wall-clock `ms` column in the history CSV.
    pub record_time: bool,
    pub samples: usize,
    pub coverage_multiplier: f64,
    pub kde_bandwidth: Bandwidth,
    pub kde_half_width: f64,
    pub kde_resolution: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseSection {
    pub tolerances: StationarityTolerances,
    pub scan_range: (f64, f64),
    pub scan_resolution: usize,
    pub grad_check_step: f64,
    pub grad_check_z_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandscapeMode {
    Direct,
    Plane,
}

impl LandscapeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LandscapeMode::Direct => "direct",
            LandscapeMode::Plane => "plane",
        }
    }
}

impl FromStr for LandscapeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(LandscapeMode::Direct),
            "plane" => Ok(LandscapeMode::Plane),
            _ => Err(format!("unknown landscape mode `{s}` (expected direct or plane)")),
        }
    }
}

/// Where the landscape is centered: the origin or a saved `θ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LandscapeCenter {
    Zero,
    Checkpoint(PathBuf),
}

impl LandscapeCenter {
    fn render(&self) -> String {
        match self {
            LandscapeCenter::Zero => "zero".into(),
            LandscapeCenter::Checkpoint(p) => p.display().to_string(),
        }
    }
}

impl FromStr for LandscapeCenter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "" => Err("empty landscape center".into()),
            "zero" => Ok(LandscapeCenter::Zero),
            path => Ok(LandscapeCenter::Checkpoint(PathBuf::from(path))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSection {
    pub mode: LandscapeMode,
    pub center: LandscapeCenter,
    pub range: (f64, f64),
    pub resolution: usize,
    pub x_count: usize,
    pub z_count: usize,
}

/// Everything a command needs, including the master seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub fixture: FixtureName,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub latent_dim: usize,
    pub generator: GeneratorSection,
    pub discriminator: DiscriminatorSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub output: OutputSection,
    pub diagnose: DiagnoseSection,
    pub landscape: LandscapeSection,
    pub lab: LabConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            fixture: FixtureName::EightRing,
            seed: 0,
            out_dir: PathBuf::from("runs"),
            latent_dim: 2,
            generator: GeneratorSection {
                width: 5000,
                activation: Activation::Tanh,
                kind: GeneratorKind::Gaussian {
                    weight_std: 10.0,
                    constant_features: 2,
                },
            },
            discriminator: DiscriminatorSection {
                width: 1000,
                activation: Activation::Tanh,
                scheme: DiscriminatorScheme::default_intercept(),
            },
            train: TrainSection {
                alpha0: t.alpha0,
                decay: t.decay,
                epochs: t.epochs,
                iters_per_epoch: t.iters_per_epoch,
                batch_x: t.batch_x,
                batch_z1: t.batch_z1,
                batch_z2: t.batch_z2,
                theta_init_variance: 5e-3,
                eta_init_std: t.eta_init_std,
            },
            eval: EvalSection {
                x_count: 4096,
                z_count: 4096,
            },
            output: OutputSection {
                record_time: true,
                samples: 10_000,
                coverage_multiplier: 3.0,
                kde_bandwidth: Bandwidth::Auto,
                kde_half_width: 2.5,
                kde_resolution: 128,
            },
            diagnose: DiagnoseSection {
                tolerances: StationarityTolerances::default(),
                scan_range: (-3.0, 3.0),
                scan_resolution: 100,
                grad_check_step: 1e-5,
                grad_check_z_count: 256,
            },
            landscape: LandscapeSection {
                mode: LandscapeMode::Plane,
                center: LandscapeCenter::Zero,
                range: (-3.0, 3.0),
                resolution: 81,
                x_count: 4096,
                z_count: 4096,
            },
            lab: LabConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// The core training configuration, seeded by the master seed.
    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            alpha0: t.alpha0,
            decay: t.decay,
            epochs: t.epochs,
            iters_per_epoch: t.iters_per_epoch,
            batch_x: t.batch_x,
            batch_z1: t.batch_z1,
            batch_z2: t.batch_z2,
            theta_init_std: t.theta_init_variance.sqrt(),
            eta_init_std: t.eta_init_std,
            seed: self.seed,
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut fields = Fields::read(text)?;
        let cfg = Self::from_fields(&mut fields)?;
        fields.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_fields(f: &mut Fields) -> Result<Self, CliError> {
        let d = Self::default();
        let fixture = f.get("experiment.fixture", d.fixture, |s| s.parse::<FixtureName>().map_err(|e| e.to_string()))?;
        let seed = f.num("experiment.seed", d.seed)?;
        let out_dir = f.get("experiment.out_dir", d.out_dir.clone(), |s| Ok(PathBuf::from(s)))?;
        let latent_dim = f.num("latent.dim", d.latent_dim)?;

        let g_width = f.num("generator.width", d.generator.width)?;
        let g_act = f.get("generator.activation", d.generator.activation, parse_activation)?;
        let g_default = match d.generator.kind {
            GeneratorKind::Gaussian {
                weight_std,
                constant_features,
            } => (weight_std, constant_features),
            GeneratorKind::ScaledIsotropic { .. } => unreachable!("default generator is gaussian"),
        };
        let g_kind = match f.get("generator.scheme", "gaussian".to_string(), |s| Ok(s.to_string()))?.as_str() {
            "gaussian" => GeneratorKind::Gaussian {
                weight_std: f.num("generator.weight_std", g_default.0)?,
                constant_features: f.num("generator.constant_features", g_default.1)?,
            },
            "scaled_isotropic" => GeneratorKind::ScaledIsotropic {
                bias_variance: f.num("generator.bias_variance", 0.3)?,
            },
            other => return Err(f.invalid("generator.scheme", format!("unknown scheme `{other}`"))),
        };

        let d_width = f.num("discriminator.width", d.discriminator.width)?;
        let d_act = f.get("discriminator.activation", d.discriminator.activation, parse_activation)?;
        let d_scheme = match f.get("discriminator.scheme", "intercept".to_string(), |s| Ok(s.to_string()))?.as_str() {
            "intercept" => {
                let DiscriminatorScheme::Intercept { range, c_range } = DiscriminatorScheme::default_intercept() else {
                    unreachable!("default_intercept is an intercept scheme")
                };
                DiscriminatorScheme::Intercept {
                    range: f.pair("discriminator.intercept_range", range)?,
                    c_range: f.pair("discriminator.c_range", c_range)?,
                }
            }
            "gaussian" => DiscriminatorScheme::Gaussian {
                std: f.num("discriminator.std", 1.0)?,
            },
            other => return Err(f.invalid("discriminator.scheme", format!("unknown scheme `{other}`"))),
        };

        let t = &d.train;
        let train = TrainSection {
            alpha0: f.num("train.alpha0", t.alpha0)?,
            decay: f.num("train.decay", t.decay)?,
            epochs: f.num("train.epochs", t.epochs)?,
            iters_per_epoch: f.num("train.iters_per_epoch", t.iters_per_epoch)?,
            batch_x: f.num("train.batch_x", t.batch_x)?,
            batch_z1: f.num("train.batch_z1", t.batch_z1)?,
            batch_z2: f.num("train.batch_z2", t.batch_z2)?,
            theta_init_variance: f.num("train.theta_init_variance", t.theta_init_variance)?,
            eta_init_std: f.num("train.eta_init_std", t.eta_init_std)?,
        };
        let eval = EvalSection {
            x_count: f.num("eval.x_count", d.eval.x_count)?,
            z_count: f.num("eval.z_count", d.eval.z_count)?,
        };
        let o = &d.output;
        let output = OutputSection {
            record_time: f.get("output.record_time", o.record_time, parse_bool)?,
            samples: f.num("output.samples", o.samples)?,
            coverage_multiplier: f.num("output.coverage_multiplier", o.coverage_multiplier)?,
            kde_bandwidth: f.get("output.kde_bandwidth", o.kde_bandwidth, parse_bandwidth)?,
            kde_half_width: f.num("output.kde_half_width", o.kde_half_width)?,
            kde_resolution: f.num("output.kde_resolution", o.kde_resolution)?,
        };
        let dg = &d.diagnose;
        let diagnose = DiagnoseSection {
            tolerances: StationarityTolerances {
                tol_j: f.num("diagnose.tol_j", dg.tolerances.tol_j)?,
                tol_g: f.num("diagnose.tol_g", dg.tolerances.tol_g)?,
                x_count: f.num("diagnose.x_count", dg.tolerances.x_count)?,
                z_count: f.num("diagnose.z_count", dg.tolerances.z_count)?,
            },
            scan_range: f.pair("diagnose.scan_range", dg.scan_range)?,
            scan_resolution: f.num("diagnose.scan_resolution", dg.scan_resolution)?,
            grad_check_step: f.num("diagnose.grad_check_step", dg.grad_check_step)?,
            grad_check_z_count: f.num("diagnose.grad_check_z_count", dg.grad_check_z_count)?,
        };
        let l = &d.landscape;
        let landscape = LandscapeSection {
            mode: f.get("landscape.mode", l.mode, |s| s.parse())?,
            center: f.get("landscape.center", l.center.clone(), |s| s.parse())?,
            range: f.pair("landscape.range", l.range)?,
            resolution: f.num("landscape.resolution", l.resolution)?,
            x_count: f.num("landscape.x_count", l.x_count)?,
            z_count: f.num("landscape.z_count", l.z_count)?,
        };
        let lb = &d.lab;
        let lab = LabConfig {
            spec: ImportanceSpec {
                tau: f.num("lab.tau", lb.spec.tau)?,
                eps: f.num("lab.eps", lb.spec.eps)?,
                r: f.num("lab.r", lb.spec.r)?,
                k_radius: f.num("lab.k", lb.spec.k_radius)?,
                activation: f.get("lab.activation", lb.spec.activation, parse_activation)?,
            },
            b1: f.num("lab.b1", lb.b1)?,
            ladder: f.get("lab.ladder", lb.ladder.clone(), parse_list)?,
            seeds: f.num("lab.seeds", lb.seeds)?,
            test_function: f.get("lab.test_function", lb.test_function, parse_test_function)?,
            feature_std: f.num("lab.feature_std", lb.feature_std)?,
        };
        Ok(Self {
            fixture,
            seed,
            out_dir,
            latent_dim,
            generator: GeneratorSection {
                width: g_width,
                activation: g_act,
                kind: g_kind,
            },
            discriminator: DiscriminatorSection {
                width: d_width,
                activation: d_act,
                scheme: d_scheme,
            },
            train,
            eval,
            output,
            diagnose,
            landscape,
            lab,
        })
    }

    /// Structural checks that do not need the core library.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, msg: &str| Err(CliError::Config(format!("{key}: {msg}")));
        if self.latent_dim == 0 {
            return bad("latent.dim", "must be positive");
        }
        if self.generator.width == 0 || self.discriminator.width == 0 {
            return bad("generator.width/discriminator.width", "must be positive");
        }
        if !(self.train.theta_init_variance >= 0.0) {
            return bad("train.theta_init_variance", "must be nonnegative");
        }
        if let GeneratorKind::ScaledIsotropic { bias_variance } = self.generator.kind {
            if !(bias_variance >= 0.0) {
                return bad("generator.bias_variance", "must be nonnegative");
            }
        }
        if self.eval.x_count == 0 || self.eval.z_count == 0 {
            return bad("eval", "quadrature sizes must be positive");
        }
        if self.output.samples < 2 {
            return bad("output.samples", "need at least 2 samples");
        }
        if self.landscape.resolution < 3 || self.diagnose.scan_resolution < 2 {
            return bad("landscape.resolution/diagnose.scan_resolution", "grid too small");
        }
        if !(self.landscape.range.1 > self.landscape.range.0) || !(self.diagnose.scan_range.1 > self.diagnose.scan_range.0) {
            return bad("landscape.range/diagnose.scan_range", "ranges must be increasing");
        }
        self.train_config().validate()?;
        self.lab.spec.validate()?;
        Ok(())
    }

    /// Canonical text: every applicable key, fixed order, one blank line
    /// between sections.
    pub fn to_text(&self) -> String {
        let mut w = Writer::default();
        w.kv("experiment.fixture", self.fixture.as_str());
        w.kv("experiment.seed", self.seed);
        w.kv("experiment.out_dir", self.out_dir.display());
        w.kv("latent.dim", self.latent_dim);
        w.gap();
        let g = &self.generator;
        w.kv("generator.width", g.width);
        w.kv("generator.activation", g.activation);
        match g.kind {
            GeneratorKind::Gaussian {
                weight_std,
                constant_features,
            } => {
                w.kv("generator.scheme", "gaussian");
                w.f("generator.weight_std", weight_std);
                w.kv("generator.constant_features", constant_features);
            }
            GeneratorKind::ScaledIsotropic { bias_variance } => {
                w.kv("generator.scheme", "scaled_isotropic");
                w.f("generator.bias_variance", bias_variance);
            }
        }
        w.gap();
        let d = &self.discriminator;
        w.kv("discriminator.width", d.width);
        w.kv("discriminator.activation", d.activation);
        match d.scheme {
            DiscriminatorScheme::Intercept { range, c_range } => {
                w.kv("discriminator.scheme", "intercept");
                w.pair("discriminator.intercept_range", range);
                w.pair("discriminator.c_range", c_range);
            }
            DiscriminatorScheme::Gaussian { std } => {
                w.kv("discriminator.scheme", "gaussian");
                w.f("discriminator.std", std);
            }
        }
        w.gap();
        let t = &self.train;
        w.f("train.alpha0", t.alpha0);
        w.f("train.decay", t.decay);
        w.kv("train.epochs", t.epochs);
        w.kv("train.iters_per_epoch", t.iters_per_epoch);
        w.kv("train.batch_x", t.batch_x);
        w.kv("train.batch_z1", t.batch_z1);
        w.kv("train.batch_z2", t.batch_z2);
        w.f("train.theta_init_variance", t.theta_init_variance);
        w.f("train.eta_init_std", t.eta_init_std);
        w.gap();
        w.kv("eval.x_count", self.eval.x_count);
        w.kv("eval.z_count", self.eval.z_count);
        w.gap();
        let o = &self.output;
        w.kv("output.record_time", o.record_time);
        w.kv("output.samples", o.samples);
        w.f("output.coverage_multiplier", o.coverage_multiplier);
        match o.kde_bandwidth {
            Bandwidth::Auto => w.kv("output.kde_bandwidth", "auto"),
            Bandwidth::Fixed(h) => w.f("output.kde_bandwidth", h),
        }
        w.f("output.kde_half_width", o.kde_half_width);
        w.kv("output.kde_resolution", o.kde_resolution);
        w.gap();
        let dg = &self.diagnose;
        w.f("diagnose.tol_j", dg.tolerances.tol_j);
        w.f("diagnose.tol_g", dg.tolerances.tol_g);
        w.kv("diagnose.x_count", dg.tolerances.x_count);
        w.kv("diagnose.z_count", dg.tolerances.z_count);
        w.pair("diagnose.scan_range", dg.scan_range);
        w.kv("diagnose.scan_resolution", dg.scan_resolution);
        w.f("diagnose.grad_check_step", dg.grad_check_step);
        w.kv("diagnose.grad_check_z_count", dg.grad_check_z_count);
        w.gap();
        let l = &self.landscape;
        w.kv("landscape.mode", l.mode.as_str());
        w.kv("landscape.center", l.center.render());
        w.pair("landscape.range", l.range);
        w.kv("landscape.resolution", l.resolution);
        w.kv("landscape.x_count", l.x_count);
        w.kv("landscape.z_count", l.z_count);
        w.gap();
        let lb = &self.lab;
        w.f("lab.tau", lb.spec.tau);
        w.f("lab.eps", lb.spec.eps);
        w.f("lab.r", lb.spec.r);
        w.f("lab.k", lb.spec.k_radius);
        w.kv("lab.activation", lb.spec.activation);
        w.f("lab.b1", lb.b1);
        let ladder: Vec<String> = lb.ladder.iter().map(usize::to_string).collect();
        w.kv("lab.ladder", ladder.join(", "));
        w.kv("lab.seeds", lb.seeds);
        w.kv("lab.test_function", lb.test_function.as_str());
        w.f("lab.feature_std", lb.feature_std);
        w.out
    }
}

/// Shortest text that parses back to exactly `v`; scientific notation
/// whenever it is shorter (`1e-5`, not `0.00001`).
pub fn format_float(v: f64) -> String {
    let plain = format!("{v}");
    let sci = format!("{v:e}");
    if sci.len() < plain.len() {
        sci
    } else {
        plain
    }
}

#[derive(Default)]
struct Writer {
    out: String,
}

impl Writer {
    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{key} = {value}");
    }

    fn f(&mut self, key: &str, v: f64) {
        self.kv(key, format_float(v));
    }

    fn pair(&mut self, key: &str, (a, b): (f64, f64)) {
        self.kv(key, format!("{}, {}", format_float(a), format_float(b)));
    }

    fn gap(&mut self) {
        self.out.push('\n');
    }
}

/// Raw `key → (value, line)` entries, consumed as they are interpreted.
struct Fields {
    entries: BTreeMap<String, (String, usize)>,
}

impl Fields {
    fn read(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {line_no}: expected `key = value`, got `{line}`")));
            };
            let key = key.trim();
            if key.is_empty() || !key.contains('.') {
                return Err(CliError::Config(format!("line {line_no}: key `{key}` must be `section.name`")));
            }
            if entries.insert(key.to_string(), (value.trim().to_string(), line_no)).is_some() {
                return Err(CliError::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    fn get<T>(&mut self, key: &str, default: T, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<T, CliError> {
        match self.entries.remove(key) {
            None => Ok(default),
            Some((v, line)) => parse(&v).map_err(|e| CliError::Config(format!("line {line}: {key}: {e}"))),
        }
    }

    fn num<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key, default, |s| s.parse::<T>().map_err(|e| format!("cannot parse `{s}`: {e}")))
    }

    fn pair(&mut self, key: &str, default: (f64, f64)) -> Result<(f64, f64), CliError> {
        self.get(key, default, |s| {
            let v: Vec<f64> = parse_list(s)?;
            match v[..] {
                [a, b] => Ok((a, b)),
                _ => Err(format!("expected two comma-separated numbers, got `{s}`")),
            }
        })
    }

    fn invalid(&self, key: &str, msg: String) -> CliError {
        CliError::Config(format!("{key}: {msg}"))
    }

    /// Anything left over is unknown (or does not apply to the chosen scheme).
    fn finish(self) -> Result<(), CliError> {
        match self.entries.iter().min_by_key(|(_, (_, line))| *line) {
            None => Ok(()),
            Some((key, (_, line))) => Err(CliError::Config(format!(
                "line {line}: unknown key `{key}` (or not applicable to the selected scheme)"
            ))),
        }
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if items.iter().any(|i| i.is_empty()) {
        return Err(format!("malformed list `{s}`"));
    }
    items
        .into_iter()
        .map(|i| i.parse::<T>().map_err(|e| format!("cannot parse `{i}`: {e}")))
        .collect()
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    s.parse::<Activation>().map_err(|e| e.to_string())
}

fn parse_bool(s: &str) -> Result<bool, String> {
    s.parse::<bool>().map_err(|_| format!("expected true or false, got `{s}`"))
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    if s == "auto" {
        return Ok(Bandwidth::Auto);
    }
    s.parse::<f64>()
        .map(Bandwidth::Fixed)
        .map_err(|_| format!("expected `auto` or a positive number, got `{s}`"))
}

fn parse_test_function(s: &str) -> Result<TestFunction, String> {
    TestFunction::ALL
        .into_iter()
        .find(|t| t.as_str() == s)
        .ok_or_else(|| format!("unknown test function `{s}`"))
}
