//! Run configuration: a flat TOML document whose keys mirror [`PipelineConfig`].
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `surface` | `"scada"` | attack surface for single-stage commands (`scada` or `stability`) |
//! | `scada_data` | `"synthetic"` | SCADA CSV path, or `synthetic` |
//! | `stability_data` | `"synthetic"` | grid-stability CSV path, or `synthetic` |
//! | `synthetic_rows` | 2000 | rows drawn when a surface is synthetic |
//! | `train_fraction` | 0.7 | real rows used for GAN training (rest held out) |
//! | `latent_dim` | 35 | generator input size |
//! | `hidden_units` | 64 | hidden width of both networks |
//! | `learning_rate` | 0.02 | Adam step for both networks |
//! | `epochs` | 2000 | GAN epochs |
//! | `batch_size` | 64 | GAN minibatch size |
//! | `generated_rows` | 0 | attack vectors to generate; 0 matches the held-out real rows |
//! | `etas` | `[0.9, 0.95, 0.99]` | confidence levels for VaR/CVaR |
//! | `risk_mode` | `"empirical"` | `empirical`, `gaussian_standard` or `gaussian_paper` |
//! | `detector_grid` | false | cross-validate the full forest grid instead of the single config |
//! | `cv_folds` | 5 | folds for the grid search |
//! | `n_estimators` | 100 | forest size |
//! | `max_features` | `"sqrt"` | `all`, `sqrt` or `log2` |
//! | `max_depth` | 6 | tree depth limit |
//! | `criterion` | `"gini"` | `gini` or `entropy` |
//! | `detector_train_fraction` | 0.7 | detector rows used for fitting |
//! | `scenario` | unset | grid scenario TOML for `simulate`; unset uses the built-in two-node case |
//! | `seed` | 0 | master seed; every stage derives its own stream from it |
//! | `out` | `"out"` | output directory |

use std::path::{Path, PathBuf};

use pgsc_core::detector::{Criterion, ForestConfig, MaxFeatures};
use pgsc_core::gan::GanConfig;
use pgsc_core::grid::{DerNode, GridTopology, SimulationConfig, REFERENCE_50HZ};
use pgsc_core::message::Schema;
use pgsc_core::risk::{RiskConfig, RiskMode, DEFAULT_ETAS};
use pgsc_core::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const SYNTHETIC: &str = "synthetic";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub surface: Schema,
    pub scada_data: String,
    pub stability_data: String,
    pub synthetic_rows: usize,
    pub train_fraction: f64,
    pub latent_dim: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub generated_rows: usize,
    pub etas: Vec<f64>,
    pub risk_mode: RiskMode,
    pub detector_grid: bool,
    pub cv_folds: usize,
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub max_depth: usize,
    pub criterion: Criterion,
    pub detector_train_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<PathBuf>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let gan = GanConfig::new(Schema::Scada);
        let forest = ForestConfig::default();
        Self {
            surface: Schema::Scada,
            scada_data: SYNTHETIC.into(),
            stability_data: SYNTHETIC.into(),
            synthetic_rows: 2000,
            train_fraction: 0.7,
            latent_dim: gan.latent_dim,
            hidden_units: gan.hidden_units,
            learning_rate: gan.lr,
            epochs: 2000,
            batch_size: gan.batch_size,
            generated_rows: 0,
            etas: DEFAULT_ETAS.to_vec(),
            risk_mode: RiskMode::Empirical,
            detector_grid: false,
            cv_folds: 5,
            n_estimators: forest.n_estimators,
            max_features: forest.max_features,
            max_depth: forest.max_depth,
            criterion: forest.criterion,
            detector_train_fraction: 0.7,
            scenario: None,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

/// Independent random streams, one per stage.
#[derive(Clone, Copy, Debug)]
pub enum Stream {
    Data = 1,
    Split = 2,
    Gan = 3,
    Generate = 4,
    DetectorSplit = 5,
    Forest = 6,
    CrossValidation = 7,
}

fn surface_index(surface: Schema) -> u64 {
    match surface {
        Schema::Scada => 0,
        Schema::Stability => 1,
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError(msg));
        for (key, value) in [("scada_data", &self.scada_data), ("stability_data", &self.stability_data)] {
            if value != SYNTHETIC && !Path::new(value).is_file() {
                return fail(format!("{key}: dataset {value:?} does not exist"));
            }
        }
        if let Some(path) = &self.scenario {
            if !path.is_file() {
                return fail(format!("scenario: {} does not exist", path.display()));
            }
        }
        for (key, v) in [
            ("train_fraction", self.train_fraction),
            ("detector_train_fraction", self.detector_train_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return fail(format!("{key} must lie in (0, 1), got {v}"));
            }
        }
        if self.synthetic_rows == 0 {
            return fail("synthetic_rows must be positive".into());
        }
        if self.n_estimators == 0 || self.max_depth == 0 {
            return fail("n_estimators and max_depth must be positive".into());
        }
        if self.cv_folds < 2 {
            return fail("cv_folds must be at least 2".into());
        }
        self.gan(self.surface).validate().map_err(|e| ConfigError(e.to_string()))?;
        self.risk().validate().map_err(|e| ConfigError(e.to_string()))?;
        Ok(())
    }

    pub fn data_source(&self, surface: Schema) -> &str {
        match surface {
            Schema::Scada => &self.scada_data,
            Schema::Stability => &self.stability_data,
        }
    }

    /// Seed of one stage on one surface.
    pub fn stream(&self, surface: Schema, stream: Stream) -> u64 {
        derive_seed(derive_seed(self.seed, surface_index(surface)), stream as u64)
    }

    pub fn gan(&self, surface: Schema) -> GanConfig {
        GanConfig {
            latent_dim: self.latent_dim,
            hidden_units: self.hidden_units,
            lr: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.stream(surface, Stream::Gan),
            surface,
        }
    }

    pub fn risk(&self) -> RiskConfig {
        RiskConfig {
            etas: self.etas.clone(),
            mode: self.risk_mode,
        }
    }

    pub fn forest(&self) -> ForestConfig {
        ForestConfig {
            n_estimators: self.n_estimators,
            max_features: self.max_features,
            max_depth: self.max_depth,
            criterion: self.criterion,
        }
    }
}

/// A grid scenario file: integration settings, nodes and a coupling matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dt: f64,
    pub horizon: f64,
    pub window: f64,
    #[serde(default = "default_reference")]
    pub reference_frequency: f64,
    pub nodes: Vec<DerNode>,
    pub coupling: Vec<Vec<f64>>,
}

fn default_reference() -> f64 {
    REFERENCE_50HZ
}

impl Default for Scenario {
    /// Balanced producer/consumer pair that settles to a phase-locked state.
    fn default() -> Self {
        Self {
            dt: 0.01,
            horizon: 100.0,
            window: 1.0,
            reference_frequency: REFERENCE_50HZ,
            nodes: vec![
                DerNode::new(0, 0.8).with_damping(0.5),
                DerNode::new(1, -0.8).with_damping(0.5).with_state(-0.5, 0.0),
            ],
            coupling: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read scenario {}: {e}", path.display())))?;
        let scenario: Self =
            toml::from_str(&text).map_err(|e| ConfigError(format!("scenario {}: {e}", path.display())))?;
        scenario.build(0)?;
        Ok(scenario)
    }

    pub fn build(&self, seed: u64) -> Result<(GridTopology, SimulationConfig), ConfigError> {
        let topology = GridTopology::new(self.nodes.clone(), self.coupling.clone())
            .map_err(|e| ConfigError(format!("scenario: {e}")))?;
        let cfg = SimulationConfig {
            dt: self.dt,
            horizon: self.horizon,
            window: self.window,
            reference_frequency: self.reference_frequency,
            seed,
        };
        cfg.validate().map_err(|e| ConfigError(format!("scenario: {e}")))?;
        Ok((topology, cfg))
    }
}
