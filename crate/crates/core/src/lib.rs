//! Wi-Fi RSSI fingerprint localization with exact and sparse Gaussian
//! processes, WAP and inducing-point reduction, benchmarking and a
//! retrainable node service.

pub mod baseline;
pub mod bench;
pub mod bundle;
pub mod dataset;
pub mod error;
pub mod gp;
pub mod kernel;
mod linalg;
pub mod locate;
pub mod matrix;
pub mod node;
pub mod oracles;
pub mod reduce;
pub mod sgp;

pub use baseline::{knn_regress, KnnConfig};
pub use dataset::{FingerprintDataset, Label, RssiSample, SplitMode};
pub use error::{Error, Result};
pub use gp::{GpModel, Prediction};
pub use kernel::KernelConfig;
pub use locate::{FloorLocalizer, InducingPlan, LocalizationMetrics, TrainConfig};
pub use matrix::RowMatrix;
pub use reduce::{ColumnSelection, GridSpec, WapFilterConfig};
pub use sgp::SgpModel;
