//! Experiment runner for random-feature WGANs: configuration files,
//! checkpoints, and the `train`, `landscape`, `diagnose`, `approx-lab` and
//! `sample` commands.

use std::path::PathBuf;

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod output;

pub use checkpoint::Checkpoint;
pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}")]
    Checkpoint(String),

    #[error("unsupported checkpoint version {found} (this build reads version {expected})")]
    UnsupportedVersion { found: String, expected: u32 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] rfwgan_core::Error),
}

/// Configurations shipped with the binary, by name.
pub const BUNDLED_CONFIGS: [(&str, &str); 10] = [
    ("eight_ring_full", include_str!("../configs/eight_ring_full.conf")),
    ("eight_ring_desk", include_str!("../configs/eight_ring_desk.conf")),
    ("nine_grid_full", include_str!("../configs/nine_grid_full.conf")),
    ("spiral_twenty_full", include_str!("../configs/spiral_twenty_full.conf")),
    ("landscape_ng2", include_str!("../configs/landscape_ng2.conf")),
    ("landscape_ng3", include_str!("../configs/landscape_ng3.conf")),
    ("landscape_ng5", include_str!("../configs/landscape_ng5.conf")),
    ("landscape_ng10", include_str!("../configs/landscape_ng10.conf")),
    ("landscape_ng100", include_str!("../configs/landscape_ng100.conf")),
    ("approx_lab", include_str!("../configs/approx_lab.conf")),
];

/// The text of a bundled configuration.
pub fn bundled_config(name: &str) -> Option<&'static str> {
    BUNDLED_CONFIGS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
