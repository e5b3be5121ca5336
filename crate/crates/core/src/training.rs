//! Stochastic gradient ascent-descent on `L(θ, η)` and the equivalent
//! η-eliminated SGD on `J`.
//!
//! One SGAD iteration with discriminator stepsize 1 is
//!
//! ```text
//! η ← η + (mean_x Ψ − mean_{z₁} Ψ(g_θ) − η)        (= batch residual r̂)
//! θ ← θ − α · (−mean_{z₂} Φᵀ DΨ(g_θ)ᵀ η)
//! ```
//!
//! so `η` after the step no longer depends on its previous value, and
//! substituting it into the `θ` update gives [`sgd_j_step`].

use std::io::{self, Write};
use std::time::Instant;

use rand_distr::{Distribution, Normal};
use thiserror::Error as ThisError;

use crate::distributions::{GaussianMixture, LatentSpec};
use crate::linalg::{norm, Matrix};
use crate::loss::{descent_direction, generated_mean_psi, mean_psi, FrozenObjective, QuadratureSet};
use crate::networks::{DiscriminatorFeatureBank, GeneratorFeatureBank};
use crate::rng::{Rng, SeedStream};
use crate::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha0: f64,
    pub decay: f64,
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub batch_x: usize,
    pub batch_z1: usize,
    pub batch_z2: usize,
    pub theta_init_std: f64,
    pub eta_init_std: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha0: 1e-5,
            decay: 0.9,
            epochs: 25,
            iters_per_epoch: 100,
            batch_x: 5000,
            batch_z1: 5000,
            batch_z2: 5000,
            theta_init_std: 5e-3f64.sqrt(),
            eta_init_std: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// `epochs = 0` is allowed and yields an empty run.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.alpha0 > 0.0) || !self.alpha0.is_finite() {
            return bad("alpha0 must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if self.iters_per_epoch == 0 || self.batch_x == 0 || self.batch_z1 == 0 || self.batch_z2 == 0 {
            return bad("iteration and batch counts must be at least 1");
        }
        if !(self.theta_init_std >= 0.0) || !(self.eta_init_std >= 0.0) {
            return bad("initialization standard deviations must be nonnegative");
        }
        Ok(())
    }

    pub fn total_iters(&self) -> usize {
        self.epochs * self.iters_per_epoch
    }
}

/// `alpha0 · decay^epoch`.
pub fn stepsize(cfg: &TrainConfig, epoch: usize) -> f64 {
    cfg.alpha0 * cfg.decay.powi(epoch as i32)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub epoch: usize,
    pub iter: usize,
    pub alpha: f64,
}

impl TrainState {
    pub fn new(theta: Vec<f64>, eta: Vec<f64>, alpha: f64) -> Self {
        Self {
            theta,
            eta,
            epoch: 0,
            iter: 0,
            alpha,
        }
    }

    /// `θ ~ N(0, θ_std²)`, `η ~ N(0, η_std²)` from the named init streams.
    pub fn initialize(cfg: &TrainConfig, ng: usize, nd: usize) -> Result<Self> {
        let seeds = SeedStream::new(cfg.seed);
        let theta = normal_vec(ng, cfg.theta_init_std, &mut seeds.derive("train.init.theta"))?;
        let eta = normal_vec(nd, cfg.eta_init_std, &mut seeds.derive("train.init.eta"))?;
        Ok(Self::new(theta, eta, stepsize(cfg, 0)))
    }

    fn check_finite(&self) -> Result<()> {
        let what = if !self.theta.iter().all(|v| v.is_finite()) {
            "theta"
        } else if !self.eta.iter().all(|v| v.is_finite()) {
            "eta"
        } else {
            return Ok(());
        };
        Err(Error::NonFinite {
            iter: self.iter,
            what: what.into(),
        })
    }
}

fn normal_vec(len: usize, std: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    let dist = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((0..len).map(|_| dist.sample(rng)).collect())
}

fn check_batches(
    d: &DiscriminatorFeatureBank,
    g: &GeneratorFeatureBank,
    x: &Matrix,
    z1: &Matrix,
    z2: &Matrix,
) -> Result<()> {
    if x.nrows() == 0 || z1.nrows() == 0 || z2.nrows() == 0 {
        return Err(Error::InvalidArgument("batches must be nonempty".into()));
    }
    check_dim("x batch dimension", d.in_dim(), x.ncols())?;
    check_dim("generator output dimension", d.in_dim(), g.out_dim())?;
    check_dim("z1 batch dimension", g.latent_dim(), z1.ncols())?;
    check_dim("z2 batch dimension", g.latent_dim(), z2.ncols())
}

fn batch_residual(
    d: &DiscriminatorFeatureBank,
    g: &GeneratorFeatureBank,
    theta: &[f64],
    x: &Matrix,
    z1: &Matrix,
) -> Result<Vec<f64>> {
    let mx = mean_psi(d, x)?;
    let mz = generated_mean_psi(d, g, theta, z1);
    Ok(mx.iter().zip(&mz).map(|(a, b)| a - b).collect())
}

/// One SGAD iteration. The ascent step has stepsize 1, so the new `η` is the
/// batch residual; it is assigned directly because `η + (r̂ − η)` can differ
/// from `r̂` in the last bit.
pub fn sgad_step(
    state: &TrainState,
    d: &DiscriminatorFeatureBank,
    g: &GeneratorFeatureBank,
    x: &Matrix,
    z1: &Matrix,
    z2: &Matrix,
) -> Result<TrainState> {
    check_batches(d, g, x, z1, z2)?;
    check_dim("theta", g.len(), state.theta.len())?;
    check_dim("eta", d.len(), state.eta.len())?;
    let eta = batch_residual(d, g, &state.theta, x, z1)?;
    let dir = descent_direction(d, g, &state.theta, z2, &eta);
    let theta = state
        .theta
        .iter()
        .zip(&dir)
        .map(|(t, gv)| t - state.alpha * gv)
        .collect();
    let next = TrainState {
        theta,
        eta,
        epoch: state.epoch,
        iter: state.iter + 1,
        alpha: state.alpha,
    };
    next.check_finite()?;
    Ok(next)
}

/// `θ − α·(−mean_{z₂} Φᵀ DΨ(g_θ)ᵀ (mean_x Ψ − mean_{z₁} Ψ(g_θ)))`.
pub fn sgd_j_step(
    theta: &[f64],
    d: &DiscriminatorFeatureBank,
    g: &GeneratorFeatureBank,
    x: &Matrix,
    z1: &Matrix,
    z2: &Matrix,
    alpha: f64,
) -> Result<Vec<f64>> {
    check_batches(d, g, x, z1, z2)?;
    check_dim("theta", g.len(), theta.len())?;
    let r = batch_residual(d, g, theta, x, z1)?;
    let dir = descent_direction(d, g, theta, z2, &r);
    let out: Vec<f64> = theta.iter().zip(&dir).map(|(t, gv)| t - alpha * gv).collect();
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite {
            iter: 0,
            what: "theta".into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub iter: usize,
    pub epoch: usize,
    pub alpha: f64,
    pub l: f64,
    pub j: f64,
    pub grad_norm: f64,
    /// Wall time since the start of the run.
    pub ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// `Ĵ` at the initialization, on the evaluation quadrature.
    pub initial_j: f64,
    pub records: Vec<TrainRecord>,
}

pub const HISTORY_HEADER: &str = "iter,epoch,alpha,L,J,gradnorm,ms";

impl TrainHistory {
    pub fn final_j(&self) -> f64 {
        self.records.last().map_or(self.initial_j, |r| r.j)
    }

    /// CSV with header [`HISTORY_HEADER`]; floats in 17 significant digits.
    /// Without `with_time` the `ms` column is omitted, leaving a
    /// run-to-run reproducible file.
    pub fn write_csv<W: Write>(&self, mut w: W, with_time: bool) -> io::Result<()> {
        if with_time {
            writeln!(w, "{HISTORY_HEADER}")?;
        } else {
            writeln!(w, "iter,epoch,alpha,L,J,gradnorm")?;
        }
        for r in &self.records {
            write!(
                w,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iter, r.epoch, r.alpha, r.l, r.j, r.grad_norm
            )?;
            if with_time {
                write!(w, ",{:.3}", r.ms)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Receives progress from [`train`], always on the training thread.
pub trait ProgressSink {
    fn on_iteration(&mut self, _state: &TrainState, _record: &TrainRecord) {}
    fn on_epoch_end(&mut self, _state: &TrainState, _history: &TrainHistory) {}
}

/// A sink that ignores everything.
pub struct Silent;

impl ProgressSink for Silent {}

/// Training stopped early; carries everything recorded up to the failure.
#[derive(Debug, ThisError)]
#[error("training aborted: {source}")]
pub struct TrainAbort {
    pub source: Error,
    pub state: Option<TrainState>,
    pub history: TrainHistory,
}

impl From<Error> for TrainAbort {
    fn from(source: Error) -> Self {
        Self {
            source,
            state: None,
            history: TrainHistory::default(),
        }
    }
}

/// Runs `epochs × iters_per_epoch` SGAD iterations with fresh batches from
/// the `train.x`, `train.z1`, `train.z2` streams, logging `L̂`, `Ĵ` and
/// `‖∇̂J‖` on the frozen `eval` set after every iteration.
pub fn train(
    cfg: &TrainConfig,
    g: &GeneratorFeatureBank,
    d: &DiscriminatorFeatureBank,
    gmm: &GaussianMixture,
    latent: &LatentSpec,
    eval: &QuadratureSet,
    sink: &mut dyn ProgressSink,
) -> std::result::Result<(TrainState, TrainHistory), TrainAbort> {
    cfg.validate()?;
    check_dim("latent dimension", g.latent_dim(), latent.dim())?;
    check_dim("target dimension", d.in_dim(), gmm.dim())?;
    let objective = FrozenObjective::new(g, d, eval)?;
    let mut state = TrainState::initialize(cfg, g.len(), d.len())?;
    let mut history = TrainHistory {
        initial_j: objective.j(&state.theta)?,
        records: Vec::with_capacity(cfg.total_iters()),
    };
    let seeds = SeedStream::new(cfg.seed);
    let mut x_rng = seeds.derive("train.x");
    let mut z1_rng = seeds.derive("train.z1");
    let mut z2_rng = seeds.derive("train.z2");
    let start = Instant::now();
    for epoch in 0..cfg.epochs {
        state.epoch = epoch;
        state.alpha = stepsize(cfg, epoch);
        for _ in 0..cfg.iters_per_epoch {
            let step = (|| {
                let x = gmm.sample(cfg.batch_x, &mut x_rng)?;
                let z1 = latent.sample(cfg.batch_z1, &mut z1_rng)?;
                let z2 = latent.sample(cfg.batch_z2, &mut z2_rng)?;
                sgad_step(&state, d, g, &x, &z1, &z2)
            })();
            let next = match step {
                Ok(s) => s,
                Err(source) => {
                    return Err(TrainAbort {
                        source,
                        state: Some(state),
                        history,
                    })
                }
            };
            state = next;
            let (r, grad) = objective.residual_and_grad(&state.theta)?;
            let record = TrainRecord {
                iter: state.iter,
                epoch,
                alpha: state.alpha,
                l: crate::loss::l_from_residual(&r.values, &state.eta),
                j: r.j(),
                grad_norm: norm(&grad),
                ms: start.elapsed().as_secs_f64() * 1e3,
            };
            if !(record.j.is_finite() && record.grad_norm.is_finite() && record.l.is_finite()) {
                return Err(TrainAbort {
                    source: Error::NonFinite {
                        iter: state.iter,
                        what: "evaluation loss".into(),
                    },
                    state: Some(state),
                    history,
                });
            }
            history.records.push(record);
            sink.on_iteration(&state, &record);
        }
        sink.on_epoch_end(&state, &history);
    }
    Ok((state, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stepsize_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(stepsize(&cfg, 0), 1e-5);
        assert!((stepsize(&cfg, 2) - 8.1e-6).abs() < 1e-20);
        let flat = TrainConfig {
            decay: 1.0,
            ..cfg
        };
        assert_eq!(stepsize(&flat, 7), flat.alpha0);
    }

    #[test]
    fn validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { decay: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { decay: 1.5, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { alpha0: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { batch_z2: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..ok }.validate().is_ok());
    }
}
