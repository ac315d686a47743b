//! Pipeline configuration shared by the CLI stages.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::DatagenConfig;
use crate::error::{Error, Result};
use crate::families::{build_fuel_cell_family, build_inventory_family, FuelCellParams, InventoryParams};
use crate::inference::{DEFAULT_EPS, DEFAULT_K};
use crate::io::parse_mps;
use crate::learner::TrainConfig;
use crate::model::{validate_instance, Coordinate, ParameterizedFamily};
use crate::pruning::DEFAULT_EPS as PRUNE_EPS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    FuelCell {
        #[serde(default)]
        params: FuelCellParams,
        radius: f64,
    },
    Inventory {
        #[serde(default)]
        params: InventoryParams,
        radius: f64,
    },
    Mps {
        path: PathBuf,
        varying: Vec<Coordinate>,
        radius: f64,
    },
}

impl FamilySpec {
    /// Relative paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<ParameterizedFamily> {
        match self {
            FamilySpec::FuelCell { params, radius } => build_fuel_cell_family(params, *radius),
            FamilySpec::Inventory { params, radius } => build_inventory_family(params, *radius),
            FamilySpec::Mps { path, varying, radius } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", full.display())))?;
                let inst = parse_mps(&text)?;
                validate_instance(&inst).into_result()?;
                ParameterizedFamily::new(inst, varying.clone(), *radius)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestSplit {
    pub n: usize,
    /// Added to the run seed so test instances never repeat training seeds.
    pub seed_offset: u64,
}

impl Default for TestSplit {
    fn default() -> Self {
        Self { n: 200, seed_offset: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneConfig {
    pub eps_p: f64,
    pub eps_d: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { eps_p: PRUNE_EPS, eps_d: PRUNE_EPS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub k: usize,
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K, eps1: DEFAULT_EPS, eps2: DEFAULT_EPS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub family: FamilySpec,
    pub datagen: DatagenConfig,
    pub test: TestSplit,
    pub pruning: PruneConfig,
    pub train: TrainConfig,
    pub inference: InferenceConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            family: FamilySpec::FuelCell { params: FuelCellParams::default(), radius: 0.25 },
            datagen: DatagenConfig::default(),
            test: TestSplit::default(),
            pruning: PruneConfig::default(),
            train: TrainConfig::default(),
            inference: InferenceConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Sets the run seed and everything derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn train_datagen(&self) -> DatagenConfig {
        DatagenConfig { base_seed: self.seed, ..self.datagen.clone() }
    }

    pub fn test_datagen(&self) -> DatagenConfig {
        DatagenConfig {
            base_seed: self.seed + self.test.seed_offset,
            min_n: self.test.n,
            max_n: self.test.n,
            ..self.datagen.clone()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    /// Range checks; returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.datagen.validate()?;
        if self.test.n == 0 {
            return Err(Error::Config("test.n must be positive".into()));
        }
        for (name, v) in [("eps_p", self.pruning.eps_p), ("eps_d", self.pruning.eps_d), ("eps1", self.inference.eps1), ("eps2", self.inference.eps2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if self.inference.k == 0 {
            return Err(Error::Config("inference.k must be at least 1".into()));
        }
        let radius = match &self.family {
            FamilySpec::FuelCell { radius, .. } | FamilySpec::Inventory { radius, .. } | FamilySpec::Mps { radius, .. } => *radius,
        };
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("radius must be finite and nonnegative, got {radius}")));
        }
        self.train.validate()
    }
}
