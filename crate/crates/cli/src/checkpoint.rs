//! Versioned text checkpoints.
//!
//! ```text
//! rfwgan-checkpoint 1
//! config <line count>
//! <canonical config text>
//! state.epoch = 3
//! state.iter = 400
//! state.alpha = 7.29e-4
//! array theta 500 <base64 of little-endian f64>
//! ...
//! end
//! ```
//!
//! The header stays readable; arrays are exact bit patterns, so loading and
//! saving again reproduces the file byte for byte.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use rfwgan_core::{DiscriminatorFeatureBank, GeneratorFeatureBank, Matrix, TrainState};

use crate::config::{format_float, ExperimentConfig};
use crate::CliError;

pub const MAGIC: &str = "rfwgan-checkpoint";
pub const VERSION: u32 = 1;

const ARRAYS: [&str; 6] = [
    "generator.weights",
    "generator.biases",
    "discriminator.a",
    "discriminator.b",
    "theta",
    "eta",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub generator: GeneratorFeatureBank,
    pub discriminator: DiscriminatorFeatureBank,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let config = self.config.to_text();
        let mut out = format!("{MAGIC} {VERSION}\nconfig {}\n{config}", config.lines().count());
        out.push_str(&format!("state.epoch = {}\n", self.state.epoch));
        out.push_str(&format!("state.iter = {}\n", self.state.iter));
        out.push_str(&format!("state.alpha = {}\n", format_float(self.state.alpha)));
        let arrays: [&[f64]; 6] = [
            self.generator.weights(),
            self.generator.biases(),
            self.discriminator.a().as_slice(),
            self.discriminator.b(),
            &self.state.theta,
            &self.state.eta,
        ];
        for (name, values) in ARRAYS.iter().zip(arrays) {
            out.push_str(&format!("array {name} {} {}\n", values.len(), encode(values)));
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let version = match header.split_once(' ') {
            Some((MAGIC, v)) => v,
            _ => return Err(corrupt("missing `rfwgan-checkpoint <version>` header")),
        };
        if version != VERSION.to_string() {
            return Err(CliError::UnsupportedVersion {
                found: version.to_string(),
                expected: VERSION,
            });
        }
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("config "))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| corrupt("missing `config <lines>` marker"))?;
        let mut config_text = String::new();
        for _ in 0..count {
            let l = lines.next().ok_or_else(|| corrupt("config section truncated"))?;
            config_text.push_str(l);
            config_text.push('\n');
        }
        let config = ExperimentConfig::parse(&config_text)?;
        let epoch = state_value(lines.next(), "state.epoch")?;
        let iter = state_value(lines.next(), "state.iter")?;
        let alpha = state_value(lines.next(), "state.alpha")?;
        let mut arrays = Vec::with_capacity(ARRAYS.len());
        for name in ARRAYS {
            arrays.push(read_array(lines.next(), name)?);
        }
        if lines.next() != Some("end") || lines.next().is_some() {
            return Err(corrupt("expected `end` as the last line"));
        }
        let [gw, gb, da, db, theta, eta]: [Vec<f64>; 6] = arrays.try_into().expect("six arrays");
        let n = config.fixture.build().dim();
        let constant = config.generator.scheme().constant_features();
        let generator = GeneratorFeatureBank::from_parts(config.latent_dim, n, config.generator.activation, constant, gw, gb)?;
        if da.len() != db.len() * n {
            return Err(corrupt("discriminator arrays disagree on N_d"));
        }
        let discriminator =
            DiscriminatorFeatureBank::from_parts(config.discriminator.activation, Matrix::from_vec(db.len(), n, da)?, db)?;
        if generator.len() != config.generator.width || discriminator.len() != config.discriminator.width {
            return Err(corrupt("bank sizes disagree with the stored config"));
        }
        if theta.len() != generator.len() || eta.len() != discriminator.len() {
            return Err(corrupt("θ or η length disagrees with the banks"));
        }
        let mut state = TrainState::new(theta, eta, alpha);
        state.epoch = epoch;
        state.iter = iter;
        Ok(Self {
            config,
            generator,
            discriminator,
            state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        crate::output::write_file(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = crate::output::read_file(path)?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Checkpoint(msg) => CliError::Checkpoint(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

fn corrupt(msg: &str) -> CliError {
    CliError::Checkpoint(format!("corrupted checkpoint: {msg}"))
}

fn state_value<T: std::str::FromStr>(line: Option<&str>, key: &str) -> Result<T, CliError> {
    line.and_then(|l| l.strip_prefix(key))
        .and_then(|rest| rest.trim_start().strip_prefix('='))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| corrupt(&format!("missing or malformed `{key}`")))
}

fn read_array(line: Option<&str>, name: &str) -> Result<Vec<f64>, CliError> {
    let bad = || corrupt(&format!("missing or malformed array `{name}`"));
    let mut parts = line.ok_or_else(bad)?.split(' ');
    if parts.next() != Some("array") || parts.next() != Some(name) {
        return Err(bad());
    }
    let len: usize = parts.next().and_then(|l| l.parse().ok()).ok_or_else(bad)?;
    let payload = parts.next().unwrap_or_default();
    if parts.next().is_some() {
        return Err(bad());
    }
    let values = decode(payload).ok_or_else(bad)?;
    if values.len() != len {
        return Err(corrupt(&format!("array `{name}` holds {} values, header says {len}", values.len())));
    }
    Ok(values)
}

pub fn encode(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode(payload: &str) -> Option<Vec<f64>> {
    let bytes = STANDARD.decode(payload).ok()?;
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    )
}
