use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{GeneratorInfo, LevelOfDetail, TriangleMesh};
use crate::loss::SemanticMask;
use crate::optim::{EvalRecord, GAConfig, MemeticConfig, QualityTables};
use crate::params::ParameterVector;
use crate::render::{Camera, Rasterizer, SilhouetteMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Memetic,
    Adam,
    #[serde(alias = "tree_ga", alias = "treega")]
    TreeGa,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    /// Square render size in pixels.
    pub resolution: u32,
    pub method: Method,
    /// Loss evaluations for the genetic methods, update steps for Adam.
    pub iterations: usize,
    /// Mesh tier; derived from the stage position when absent.
    #[serde(default)]
    pub lod: Option<u32>,
}

impl StageConfig {
    pub fn new(resolution: u32, method: Method, iterations: usize) -> Self {
        Self {
            resolution,
            method,
            iterations,
            lod: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 64 || !self.resolution.is_power_of_two() {
            return Err(Error::Config(format!(
                "stage resolution {} must be a power of two of at least 64",
                self.resolution
            )));
        }
        if self.iterations == 0 && self.method != Method::Adam {
            return Err(Error::Config("genetic stages need at least one evaluation".into()));
        }
        Ok(())
    }

    /// Tier used at position `index` of the schedule.
    pub fn lod_for(&self, index: usize, info: &GeneratorInfo) -> Result<LevelOfDetail> {
        let tier = match self.lod {
            Some(t) => t,
            None => (index as u32).max(info.base_lod).min(info.max_lod),
        };
        let lod = LevelOfDetail::new(tier);
        info.check_lod(lod)?;
        Ok(lod)
    }
}

/// Memetic search at 128 pixels, then Adam at 256 and 512.
pub fn default_stages() -> Vec<StageConfig> {
    vec![
        StageConfig::new(128, Method::Memetic, 5000),
        StageConfig::new(256, Method::Adam, 250),
        StageConfig::new(512, Method::Adam, 250),
    ]
}

/// One genetic stage at 256 pixels with 50k evaluations.
pub fn default_tree_stages() -> Vec<StageConfig> {
    vec![StageConfig::new(256, Method::TreeGa, 50_000)]
}

#[derive(Clone, Debug)]
pub struct ReconstructionConfig {
    pub stages: Vec<StageConfig>,
    /// Genetic settings; `rng_seed` seeds the whole run.
    pub ga: GAConfig,
    pub memetic: MemeticConfig,
    pub adam_learning_rate: f64,
    /// Starting points; the generator's built-in presets when empty.
    pub presets: Vec<ParameterVector>,
    /// Initial cameras, one per reference view.
    pub cameras: Option<Vec<Camera>>,
    /// Treat the field of view of the initial cameras as known.
    pub fixed_fov: bool,
    pub tables: Option<QualityTables>,
    pub rasterizer: Rasterizer,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            stages: default_stages(),
            ga: GAConfig::default(),
            memetic: MemeticConfig::default(),
            adam_learning_rate: 0.004,
            presets: Vec::new(),
            cameras: None,
            fixed_fov: false,
            tables: None,
            rasterizer: Rasterizer::default(),
        }
    }
}

impl ReconstructionConfig {
    pub fn tree() -> Self {
        Self {
            stages: default_tree_stages(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("at least one stage is required".into()));
        }
        for s in &self.stages {
            s.validate()?;
        }
        self.ga.validate()?;
        if !(self.adam_learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.adam_learning_rate)));
        }
        Ok(())
    }
}

/// Outcome of one stage.
#[derive(Clone, Debug)]
pub struct StageReport {
    pub method: Method,
    pub resolution: u32,
    pub lod: LevelOfDetail,
    pub evaluations: usize,
    /// Loss of the carried-in solution at this stage's resolution, when it
    /// was evaluated.
    pub start: Option<f64>,
    /// Best loss of the stage; fitness for genetic tree stages. A stage
    /// without evaluations repeats the previous value.
    pub best: f64,
    /// Best solution rendered at the stage resolution, one per view.
    pub masks: Vec<SilhouetteMask>,
    pub semantic: Option<SemanticMask>,
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult {
    pub generator: String,
    pub best_params: ParameterVector,
    pub best_cameras: Vec<Camera>,
    /// Stochastic seed of the best model; 0 for deterministic generators.
    pub seed: u64,
    pub stages: Vec<StageReport>,
    /// Every evaluation in order.
    pub history: Vec<EvalRecord>,
    /// History values are fitness (larger is better) rather than loss.
    pub maximize: bool,
    /// Final model at the generator's top tier.
    pub mesh: TriangleMesh,
    pub wall_time: f64,
}
