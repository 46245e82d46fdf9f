use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::picard::SynthesisConfig;
use crate::systems::{make_benchmark, BenchmarkParams, BENCHMARK_NAMES};

/// Telemetry file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TelemetryFormat {
    #[default]
    Csv,
    Json,
}

/// One experiment, loaded from TOML.
///
/// ```toml
/// system = "hopfield2d_full"
/// seed = 7
///
/// [params]
/// t_final = 1.5
///
/// [synthesis]
/// map_kind = "minimum_energy"
/// max_iterations = 20
/// eps_x = 1e-10
///
/// [synthesis.solver]
/// rtol = 1e-8
/// atol = 1e-10
///
/// [output]
/// dir = "runs/hopfield"
/// samples = 501
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: String,
    /// Master seed; sections without their own seed derive from it.
    pub seed: u64,
    pub params: BenchmarkParams,
    pub synthesis: SynthesisConfig,
    pub output: OutputConfig,
    pub scale: ScaleConfig,
    pub reference: ReferenceConfig,
    pub underactuated: UnderactuatedConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: "unicycle".into(),
            seed: 0,
            params: BenchmarkParams::default(),
            synthesis: SynthesisConfig::default(),
            output: OutputConfig::default(),
            scale: ScaleConfig::default(),
            reference: ReferenceConfig::default(),
            underactuated: UnderactuatedConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Uniform sample count for `control.csv` and `trajectory.csv`.
    pub samples: usize,
    pub format: TelemetryFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("gramsynth-out"), samples: 501, format: TelemetryFormat::Csv }
    }
}

/// Scaling sweep over `mindy_like(d, d)` surrogates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    pub dims: Vec<usize>,
    pub trials: usize,
    /// Targets are drawn from `U[target_low, target_high)^d`.
    pub target_low: f64,
    pub target_high: f64,
    /// Trials run concurrently (each also parallelizes internally).
    pub concurrent_trials: bool,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self { dims: vec![2, 8, 32], trials: 5, target_low: 0.0, target_high: 1.0, concurrent_trials: false }
    }
}

/// Degree-`degree` Chebyshev reference control with `N(0, std^2)` coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    pub degree: usize,
    pub std: f64,
    pub seed: Option<u64>,
    /// Fixed `k x (degree + 1)` coefficients, row per channel; overrides sampling.
    pub coefficients: Option<Vec<Vec<f64>>>,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { degree: 5, std: 0.2, seed: None, coefficients: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnderactuatedConfig {
    pub dim: usize,
    pub inputs: usize,
    pub t_final: f64,
    pub max_iterations: usize,
    /// Seed of `x0 ~ N(0, I)`.
    pub state_seed: Option<u64>,
}

impl Default for UnderactuatedConfig {
    fn default() -> Self {
        Self { dim: 100, inputs: 50, t_final: 4.0, max_iterations: 50, state_seed: None }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Check the catalog entry and every numeric setting before any solve.
    pub fn validate(&self) -> Result<()> {
        if !BENCHMARK_NAMES.contains(&self.system.as_str()) {
            return Err(Error::UnknownSystem(self.system.clone()));
        }
        self.synthesis.validate()?;
        make_benchmark(&self.system, &self.params)?;
        if self.output.samples < 2 {
            return Err(Error::InvalidConfig("output.samples must be >= 2".into()));
        }
        if self.scale.trials < 1 {
            return Err(Error::InvalidConfig("scale.trials must be >= 1".into()));
        }
        if self.scale.dims.windows(2).any(|w| w[0] > w[1]) || self.scale.dims.contains(&0) {
            return Err(Error::InvalidConfig("scale.dims must be positive and sorted ascending".into()));
        }
        if !(self.scale.target_high > self.scale.target_low) {
            return Err(Error::InvalidConfig("scale target range is empty".into()));
        }
        if !(self.reference.std >= 0.0) {
            return Err(Error::InvalidConfig("reference.std must be >= 0".into()));
        }
        let u = &self.underactuated;
        if u.inputs == 0 || u.inputs > u.dim || !(u.t_final > 0.0) {
            return Err(Error::InvalidConfig("underactuated needs 1 <= inputs <= dim and t_final > 0".into()));
        }
        Ok(())
    }
}
