use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use fraclap::estimator::EstimatorConfig;
use fraclap::nn::{Loss, TrainConfig};
use fraclap::sampler::{DirectionMode, FractionalParams};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Isotropic,
    PaperAngles,
}

impl From<Direction> for DirectionMode {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Isotropic => DirectionMode::Isotropic,
            Direction::PaperAngles => DirectionMode::PaperAngles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    #[value(name = "ex1-d2")]
    Ex1D2,
    #[value(name = "ex1-d5")]
    Ex1D5,
    #[value(name = "ex1-d15")]
    Ex1D15,
    #[value(name = "ex2-d2")]
    Ex2D2,
    #[value(name = "ex2-d5")]
    Ex2D5,
    #[value(name = "ex3-d2")]
    Ex3D2,
    #[value(name = "ex4-d2")]
    Ex4D2,
}

struct PresetValues {
    example: u8,
    dim: usize,
    paths: usize,
    points: usize,
    batch: usize,
    gamma: f64,
    radial: bool,
}

impl Preset {
    fn values(self) -> PresetValues {
        let ex1 = |dim, gamma| PresetValues {
            example: 1,
            dim,
            paths: 100,
            points: 2000,
            batch: 400,
            gamma,
            radial: true,
        };
        let ex2 = |dim| PresetValues {
            example: 2,
            dim,
            paths: 500,
            points: 1000,
            batch: 200,
            gamma: 5e-3,
            radial: true,
        };
        match self {
            Preset::Ex1D2 => ex1(2, 5e-3),
            Preset::Ex1D5 => ex1(5, 5e-3),
            Preset::Ex1D15 => ex1(15, 5e-4),
            Preset::Ex2D2 => ex2(2),
            Preset::Ex2D5 => ex2(5),
            Preset::Ex3D2 => PresetValues {
                example: 3,
                dim: 2,
                paths: 300,
                points: 1000,
                batch: 200,
                gamma: 5e-3,
                radial: false,
            },
            Preset::Ex4D2 => PresetValues {
                example: 4,
                ..ex1(2, 5e-3)
            },
        }
    }
}

/// Flags shared by every subcommand. Unset values fall back to the preset,
/// then to the built-in defaults.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Named parameter set for one of the benchmark runs
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Benchmark problem, 1 to 4
    #[arg(long)]
    pub example: Option<u8>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Stability index in (0, 2)
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Monte Carlo paths per training point (M)
    #[arg(long)]
    pub paths: Option<usize>,
    /// Training points (P)
    #[arg(long)]
    pub points: Option<usize>,
    /// Batch size (L)
    #[arg(long)]
    pub batch: Option<usize>,
    /// Training iterations
    #[arg(long)]
    pub iters: Option<usize>,
    /// Adam learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Newton tolerance of the inner radius sampler
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub direction: Option<Direction>,
    /// Train with the loss that penalizes R(x) != R(-x)
    #[arg(long)]
    pub radial_loss: bool,
    /// Draw a single occupation sample per path and reuse it at every step
    #[arg(long)]
    pub strict_paper: bool,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// Fully resolved parameters of one invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub example: u8,
    pub dim: usize,
    pub alpha: f64,
    pub paths: usize,
    pub points: usize,
    pub batch: usize,
    pub n_iter: usize,
    pub gamma: f64,
    pub seed: u64,
    pub direction: Direction,
    pub nr_delta: f64,
    pub radial_loss: bool,
    pub strict_paper: bool,
    /// Subcommand-specific settings.
    pub extra: serde_json::Map<String, serde_json::Value>,
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn resolve(subcommand: &str, a: &CommonArgs) -> Result<Self, CliError> {
        let p = a.preset.map(Preset::values);
        let cfg = Self {
            subcommand: subcommand.into(),
            example: a.example.or(p.as_ref().map(|p| p.example)).unwrap_or(1),
            dim: a.dim.or(p.as_ref().map(|p| p.dim)).unwrap_or(2),
            alpha: a.alpha.unwrap_or(1.0),
            paths: a.paths.or(p.as_ref().map(|p| p.paths)).unwrap_or(100),
            points: a.points.or(p.as_ref().map(|p| p.points)).unwrap_or(2000),
            batch: a.batch.or(p.as_ref().map(|p| p.batch)).unwrap_or(400),
            n_iter: a.iters.unwrap_or(1000),
            gamma: a.lr.or(p.as_ref().map(|p| p.gamma)).unwrap_or(5e-3),
            seed: a.seed.unwrap_or(0),
            direction: a.direction.unwrap_or(Direction::Isotropic),
            nr_delta: a.delta.unwrap_or(fraclap::sampler::DEFAULT_NEWTON_DELTA),
            radial_loss: a.radial_loss || p.as_ref().is_some_and(|p| p.radial),
            strict_paper: a.strict_paper,
            extra: Default::default(),
            out: a.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        if !(1..=4).contains(&self.example) {
            return Err(CliError::Config(format!(
                "--example must be 1 to 4, got {}",
                self.example
            )));
        }
        if self.paths == 0 {
            return Err(CliError::Config("--paths must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(CliError::Config("--batch must be at least 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(CliError::Config(format!("--lr must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.nr_delta > 0.0 && self.nr_delta < 1.0) {
            return Err(CliError::Config(format!(
                "--delta must lie in (0, 1), got {}",
                self.nr_delta
            )));
        }
        Ok(())
    }

    pub fn with_extra(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).expect("plain values serialize");
        self.extra.insert(key.into(), v);
        self
    }

    pub fn params(&self) -> Result<FractionalParams, CliError> {
        FractionalParams::new(self.dim, self.alpha).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            paths: self.paths,
            mode: self.direction.into(),
            nr_delta: self.nr_delta,
            one_v_per_path: self.strict_paper,
            ..EstimatorConfig::default()
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            n_iter: self.n_iter,
            batch: self.batch,
            gamma: self.gamma,
            loss: if self.radial_loss { Loss::Radial } else { Loss::Mse },
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    /// SHA-256 of the configuration, output directory excluded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
