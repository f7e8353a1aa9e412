//! JSON bundles holding what a model needs to be refit deterministically.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::FingerprintDataset;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernel::KernelConfig;
use crate::locate::{train_all_floors, FloorModels, TrainConfig};
use crate::matrix::RowMatrix;
use crate::sgp::SgpModel;

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let json = serde_json::to_vec(value)?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpBundle {
    pub inputs: RowMatrix,
    pub targets: Vec<f64>,
    pub kernel: KernelConfig,
}

impl GpBundle {
    pub fn from_model(m: &GpModel) -> Self {
        Self {
            inputs: m.inputs().clone(),
            targets: m.targets().iter().copied().collect(),
            kernel: *m.config(),
        }
    }

    pub fn fit(&self) -> Result<GpModel> {
        GpModel::fit(&self.inputs, &self.targets, &self.kernel)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgpBundle {
    pub inputs: RowMatrix,
    pub targets: Vec<f64>,
    pub inducing: RowMatrix,
    /// Training rows the inducing inputs were drawn from, when known.
    pub inducing_rows: Option<Vec<usize>>,
    pub kernel: KernelConfig,
}

impl SgpBundle {
    /// Takes the inducing inputs as the listed training rows.
    pub fn from_rows(inputs: RowMatrix, targets: Vec<f64>, rows: Vec<usize>, kernel: KernelConfig) -> Self {
        Self {
            inducing: inputs.select_rows(&rows),
            inputs,
            targets,
            inducing_rows: Some(rows),
            kernel,
        }
    }

    pub fn fit(&self) -> Result<SgpModel> {
        SgpModel::fit(&self.inputs, &self.targets, &self.inducing, &self.kernel)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

/// Training data and configuration for a set of per-floor localizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizerBundle {
    pub config: TrainConfig,
    pub training: FingerprintDataset,
}

impl LocalizerBundle {
    pub fn fit(&self) -> Result<FloorModels> {
        train_all_floors(&self.training, &self.config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(self, path.as_ref())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}
