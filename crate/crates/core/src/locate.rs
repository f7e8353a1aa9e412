//! Floor-level localization, building/floor assignment and error metrics.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{min_max, FingerprintDataset, DEFAULT_FILL};
use crate::error::{Error, Result};
use crate::gp::{GpModel, Prediction};
use crate::kernel::KernelConfig;
use crate::matrix::RowMatrix;
use crate::reduce::{
    drop_dead_columns, select_inducing, sparsity_to_grid, wap_filter, ColumnSelection, GridSpec,
    WapFilterConfig, DEFAULT_CELL_SIZE,
};
use crate::sgp::SgpModel;

/// Penalty added to the 3D error for a wrong building, in meters.
pub const BUILDING_PENALTY: f64 = 50.0;
/// Penalty added to the 3D error for a wrong floor, in meters.
pub const FLOOR_PENALTY: f64 = 4.0;
/// Neighbours consulted by the floor vote.
pub const FLOOR_VOTE_K: usize = 7;
/// Step of the empirical error CDF, in meters.
pub const CDF_RESOLUTION: f64 = 0.1;

/// How inducing inputs are chosen for a floor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InducingPlan {
    /// Fit exact GPs on every training row.
    Exact,
    /// Use the given grid as is.
    Grid(GridSpec),
    /// Size the grid so that roughly `percent` of rows become inducing inputs.
    Sparsity { percent: f64, cell_size: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub kernel: KernelConfig,
    /// Column target for the similarity filter; `None` scans every pair.
    pub target_v: Option<usize>,
    pub filter: WapFilterConfig,
    pub inducing: InducingPlan,
    /// Imputation fill that marks an undetected access point.
    pub fill: f64,
    /// Map RSSI onto `[0, 1]` before fitting.
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            target_v: None,
            filter: WapFilterConfig::default(),
            inducing: InducingPlan::Sparsity {
                percent: 50.0,
                cell_size: DEFAULT_CELL_SIZE,
                seed: 0,
            },
            fill: DEFAULT_FILL,
            normalize: false,
        }
    }
}

impl TrainConfig {
    pub fn exact(kernel: KernelConfig) -> Self {
        Self {
            kernel,
            inducing: InducingPlan::Exact,
            ..Default::default()
        }
    }

    pub fn sparse(kernel: KernelConfig, percent: f64, seed: u64) -> Self {
        Self {
            kernel,
            inducing: InducingPlan::Sparsity {
                percent,
                cell_size: DEFAULT_CELL_SIZE,
                seed,
            },
            ..Default::default()
        }
    }
}

/// One coordinate regressor.
#[derive(Debug, Clone)]
pub enum Regressor {
    Exact(GpModel),
    Sparse(SgpModel),
}

impl Regressor {
    pub fn predict(&self, x: &RowMatrix) -> Result<Prediction> {
        match self {
            Regressor::Exact(m) => m.predict(x),
            Regressor::Sparse(m) => m.predict(x),
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            Regressor::Exact(m) => m.input_width(),
            Regressor::Sparse(m) => m.input_width(),
        }
    }

    pub fn n_inducing(&self) -> usize {
        match self {
            Regressor::Exact(m) => m.n_train(),
            Regressor::Sparse(m) => m.n_inducing(),
        }
    }
}

/// Estimated planar position with per-axis predictive standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub sd_x: f64,
    pub sd_y: f64,
}

/// A pair of coordinate regressors for one floor of one building, together
/// with the column selection that maps raw scans onto model inputs.
///
/// Targets are centred on the training centroid before fitting, so far-off
/// queries revert to the middle of the floor rather than to the coordinate
/// origin.
#[derive(Debug, Clone)]
pub struct FloorLocalizer {
    pub building: u32,
    pub floor: u32,
    pub columns: ColumnSelection,
    /// Training-row indices used as inducing inputs; `None` for exact GPs.
    pub inducing: Option<Vec<usize>>,
    pub model_x: Regressor,
    pub model_y: Regressor,
    pub centroid: (f64, f64),
    /// Unix seconds at the end of training.
    pub trained_at: u64,
    pub train_count: usize,
    /// Wall-clock seconds spent in column/row reduction and both fits.
    pub train_seconds: f64,
    n_waps: usize,
    fill: f64,
    normalize: bool,
}

impl FloorLocalizer {
    /// Runs dead-column removal, the similarity filter and inducing selection,
    /// then fits one regressor per coordinate.
    pub fn train(train: &FingerprintDataset, cfg: &TrainConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let floors = train.floors();
        if floors.len() != 1 {
            return Err(Error::Dataset(format!(
                "floor training data spans {} (building, floor) pairs",
                floors.len()
            )));
        }
        let (building, floor) = floors[0];
        cfg.kernel.validate()?;
        let start = Instant::now();

        let live = drop_dead_columns(train, cfg.fill)?;
        let live_x = train.features().select_columns(&live.kept);
        let target = cfg.target_v.unwrap_or(1);
        let columns = if target < live.achieved {
            live.compose(&wap_filter(&live_x, target, &cfg.filter)?)
        } else {
            live
        };
        let mut inputs = train.features().select_columns(&columns.kept);
        if cfg.normalize {
            for v in inputs.as_mut_slice() {
                *v = min_max(*v, cfg.fill);
            }
        }

        let n = train.len() as f64;
        let centroid = (
            train.labels().iter().map(|l| l.x).sum::<f64>() / n,
            train.labels().iter().map(|l| l.y).sum::<f64>() / n,
        );
        let tx: Vec<f64> = train.xs().iter().map(|v| v - centroid.0).collect();
        let ty: Vec<f64> = train.ys().iter().map(|v| v - centroid.1).collect();

        let grid = match cfg.inducing {
            InducingPlan::Exact => None,
            InducingPlan::Grid(g) => Some(g),
            InducingPlan::Sparsity { percent, cell_size, seed } => {
                Some(sparsity_to_grid(train, percent, cell_size, seed)?)
            }
        };
        let (model_x, model_y, inducing) = match grid {
            None => (
                Regressor::Exact(GpModel::fit(&inputs, &tx, &cfg.kernel)?),
                Regressor::Exact(GpModel::fit(&inputs, &ty, &cfg.kernel)?),
                None,
            ),
            Some(g) => {
                let idx = select_inducing(train, &g)?;
                let z = inputs.select_rows(&idx);
                (
                    Regressor::Sparse(SgpModel::fit(&inputs, &tx, &z, &cfg.kernel)?),
                    Regressor::Sparse(SgpModel::fit(&inputs, &ty, &z, &cfg.kernel)?),
                    Some(idx),
                )
            }
        };
        let train_seconds = start.elapsed().as_secs_f64();
        Ok(Self {
            building,
            floor,
            columns,
            inducing,
            model_x,
            model_y,
            centroid,
            trained_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            train_count: train.len(),
            train_seconds,
            n_waps: train.n_waps(),
            fill: cfg.fill,
            normalize: cfg.normalize,
        })
    }

    /// Width of the raw scans this localizer accepts.
    pub fn n_waps(&self) -> usize {
        self.n_waps
    }

    /// Inducing-set size over training-set size, in percent.
    pub fn sparsity(&self) -> f64 {
        100.0 * self.model_x.n_inducing() as f64 / self.train_count as f64
    }

    fn project(&self, rssi: &RowMatrix) -> RowMatrix {
        let mut x = rssi.select_columns(&self.columns.kept);
        if self.normalize {
            for v in x.as_mut_slice() {
                *v = min_max(*v, self.fill);
            }
        }
        x
    }

    /// Localizes a batch of raw (imputed) scans, one per row.
    pub fn predict_batch(&self, rssi: &RowMatrix) -> Result<Vec<Position>> {
        if rssi.ncols() != self.n_waps {
            return Err(Error::Dimension {
                expected: self.n_waps,
                actual: rssi.ncols(),
                context: "raw RSSI vector length",
            });
        }
        let x = self.project(rssi);
        let px = self.model_x.predict(&x)?;
        let py = self.model_y.predict(&x)?;
        Ok((0..x.nrows())
            .map(|i| Position {
                x: px.mean[i] + self.centroid.0,
                y: py.mean[i] + self.centroid.1,
                sd_x: px.var[i].sqrt(),
                sd_y: py.var[i].sqrt(),
            })
            .collect())
    }

    pub fn predict_position(&self, rssi: &[f64]) -> Result<Position> {
        let row = RowMatrix::new(1, rssi.len(), rssi.to_vec())?;
        Ok(self.predict_batch(&row)?[0])
    }
}

/// Per-floor localizers keyed by `(building, floor)`.
pub type FloorModels = BTreeMap<(u32, u32), FloorLocalizer>;

/// Trains one localizer per `(building, floor)` present in `train`.
pub fn train_all_floors(train: &FingerprintDataset, cfg: &TrainConfig) -> Result<FloorModels> {
    train
        .floors()
        .into_iter()
        .map(|(b, f)| Ok(((b, f), FloorLocalizer::train(&train.subset(b, f), cfg)?)))
        .collect()
}

/// A deployed localization device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployedNode {
    pub id: String,
    pub building: u32,
    pub floor: u32,
    /// Known mounting position.
    pub location: (f64, f64),
    /// Index of the scan column that carries this node's signal.
    pub beacon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub nodes: Vec<DeployedNode>,
}

impl Deployment {
    /// Places one node per `(building, floor)` of `train` at the floor's RP
    /// centroid, and lets it stand in for the access point that is most
    /// specific to that floor: the column maximizing the floor's mean RSSI
    /// minus the strongest mean RSSI of the same column on any other floor.
    /// Columns are not shared between nodes.
    pub fn from_beacons(train: &FingerprintDataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set for deployment"));
        }
        let floors = train.floors();
        let w = train.n_waps();
        let mut means = vec![vec![0.0; w]; floors.len()];
        let mut centroids = vec![(0.0, 0.0); floors.len()];
        for (k, &(b, f)) in floors.iter().enumerate() {
            let sub = train.subset(b, f);
            let n = sub.len() as f64;
            for row in sub.features().rows_iter() {
                for (m, v) in means[k].iter_mut().zip(row) {
                    *m += v / n;
                }
            }
            centroids[k] = (
                sub.labels().iter().map(|l| l.x).sum::<f64>() / n,
                sub.labels().iter().map(|l| l.y).sum::<f64>() / n,
            );
        }
        let mut taken = vec![false; w];
        let mut nodes = Vec::with_capacity(floors.len());
        for (k, &(b, f)) in floors.iter().enumerate() {
            let score = |j: usize| {
                let others = (0..floors.len())
                    .filter(|&o| o != k)
                    .map(|o| means[o][j])
                    .fold(f64::NEG_INFINITY, f64::max);
                means[k][j] - if others.is_finite() { others } else { DEFAULT_FILL }
            };
            let beacon = (0..w)
                .filter(|&j| !taken[j])
                .max_by(|&a, &c| score(a).total_cmp(&score(c)).then(c.cmp(&a)))
                .ok_or_else(|| Error::Dataset("more floors than WAP columns".into()))?;
            taken[beacon] = true;
            nodes.push(DeployedNode {
                id: format!("b{b}f{f}"),
                building: b,
                floor: f,
                location: centroids[k],
                beacon,
            });
        }
        Ok(Self { nodes })
    }

    fn strongest<'a>(&'a self, rssi: &[f64], building: Option<u32>) -> Option<&'a DeployedNode> {
        self.nodes
            .iter()
            .filter(|n| building.is_none_or(|b| n.building == b))
            .fold(None, |best: Option<&DeployedNode>, n| match best {
                Some(b) if rssi[b.beacon] >= rssi[n.beacon] => Some(b),
                _ => Some(n),
            })
    }
}

/// Building is taken from the strongest node, or from ground truth when the
/// building hit rate is assumed to be one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingMode {
    StrongestNode,
    KnownBuilding,
}

/// Building and floor estimation from node signals and a neighbouring-floor
/// k-NN vote over training fingerprints.
#[derive(Debug, Clone)]
pub struct FloorAssigner {
    pub deployment: Deployment,
    train: FingerprintDataset,
    pub k: usize,
}

impl FloorAssigner {
    pub fn new(deployment: Deployment, train: FingerprintDataset) -> Result<Self> {
        if deployment.nodes.is_empty() {
            return Err(Error::Empty("deployment"));
        }
        if let Some(n) = deployment.nodes.iter().find(|n| n.beacon >= train.n_waps()) {
            return Err(Error::Config(format!(
                "node {} beacon column {} out of range",
                n.id, n.beacon
            )));
        }
        Ok(Self {
            deployment,
            train,
            k: FLOOR_VOTE_K,
        })
    }

    /// Building of the strongest node, floor by vote.
    pub fn assign(&self, rssi: &[f64]) -> Result<(u32, u32)> {
        self.assign_in(rssi, None)
    }

    /// Floor by vote with the building fixed.
    pub fn assign_in_building(&self, rssi: &[f64], building: u32) -> Result<(u32, u32)> {
        self.assign_in(rssi, Some(building))
    }

    fn assign_in(&self, rssi: &[f64], building: Option<u32>) -> Result<(u32, u32)> {
        if rssi.len() != self.train.n_waps() {
            return Err(Error::Dimension {
                expected: self.train.n_waps(),
                actual: rssi.len(),
                context: "raw RSSI vector length",
            });
        }
        let node = self
            .deployment
            .strongest(rssi, building)
            .ok_or(Error::Empty("nodes in building"))?;
        let b = node.building;
        let labels = self.train.labels();
        let existing: Vec<u32> = {
            let mut f: Vec<u32> = labels.iter().filter(|l| l.building == b).map(|l| l.floor).collect();
            f.sort_unstable();
            f.dedup();
            f
        };
        // the node's floor and its existing neighbours
        let candidates: Vec<u32> = existing
            .iter()
            .copied()
            .filter(|&f| f.abs_diff(node.floor) <= 1)
            .collect();
        if candidates.len() <= 1 {
            return candidates
                .first()
                .map(|&f| (b, f))
                .ok_or(Error::Empty("training rows for candidate floors"));
        }
        let mut near: Vec<(f64, usize)> = (0..self.train.len())
            .filter(|&i| labels[i].building == b && candidates.contains(&labels[i].floor))
            .map(|i| (crate::kernel::sq_dist(self.train.rssi(i), rssi), i))
            .collect();
        let k = self.k.min(near.len());
        near.select_nth_unstable_by(k - 1, |a, c| a.0.total_cmp(&c.0).then(a.1.cmp(&c.1)));
        let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
        for &(_, i) in &near[..k] {
            *votes.entry(labels[i].floor).or_default() += 1;
        }
        let top = votes.values().copied().max().unwrap_or(0);
        let tied: Vec<u32> = votes.iter().filter(|(_, &c)| c == top).map(|(&f, _)| f).collect();
        let floor = if tied.contains(&node.floor) {
            node.floor
        } else {
            // nearest to the node's floor, lower floor first
            *tied.iter().min_by_key(|f| (f.abs_diff(node.floor), **f)).unwrap()
        };
        Ok((b, floor))
    }
}

/// `(1 - building_hit) * 50 + (1 - floor_hit) * 4 + err2d`.
///
/// With 0/1 indicators this scores one sample; with hit rates and a mean 2D
/// error it scores a whole test set.
pub fn error3d(err2d: f64, building_hit: f64, floor_hit: f64) -> f64 {
    (1.0 - building_hit) * BUILDING_PENALTY + (1.0 - floor_hit) * FLOOR_PENALTY + err2d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationMetrics {
    pub n: usize,
    pub mean_2d: f64,
    pub mean_3d: f64,
    pub building_hit: f64,
    pub floor_hit: f64,
    /// `(error_m, cumulative_probability)` at [`CDF_RESOLUTION`] steps.
    pub cdf: Vec<(f64, f64)>,
    /// Total training seconds of the localizers involved.
    pub train_time: f64,
    /// Total inducing inputs over total training rows, in percent.
    pub sparsity: f64,
}

impl LocalizationMetrics {
    pub fn from_errors(
        err2d: &[f64],
        building_hits: &[bool],
        floor_hits: &[bool],
        train_time: f64,
        sparsity: f64,
    ) -> Result<Self> {
        if err2d.is_empty() {
            return Err(Error::Empty("test set"));
        }
        let n = err2d.len() as f64;
        let rate = |h: &[bool]| h.iter().filter(|&&b| b).count() as f64 / n;
        let mean_3d = err2d
            .iter()
            .zip(building_hits.iter().zip(floor_hits))
            .map(|(&e, (&b, &f))| error3d(e, b as u8 as f64, f as u8 as f64))
            .sum::<f64>()
            / n;
        Ok(Self {
            n: err2d.len(),
            mean_2d: err2d.iter().sum::<f64>() / n,
            mean_3d,
            building_hit: rate(building_hits),
            floor_hit: rate(floor_hits),
            cdf: empirical_cdf(err2d),
            train_time,
            sparsity,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `error_m,cum_prob` rows.
    pub fn write_cdf_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "error_m,cum_prob")?;
        for (e, p) in &self.cdf {
            writeln!(w, "{e:.1},{p}")?;
        }
        Ok(())
    }
}

/// Fraction of errors at or below each multiple of [`CDF_RESOLUTION`], up to
/// the first multiple that covers the largest error.
pub fn empirical_cdf(errors: &[f64]) -> Vec<(f64, f64)> {
    if errors.is_empty() {
        return Vec::new();
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = *sorted.last().unwrap();
    let steps = (max / CDF_RESOLUTION - 1e-9).ceil().max(0.0) as usize;
    let n = sorted.len() as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut idx = 0;
    for s in 0..=steps {
        let e = s as f64 * CDF_RESOLUTION;
        while idx < sorted.len() && sorted[idx] <= e + 1e-9 {
            idx += 1;
        }
        out.push((e, idx as f64 / n));
    }
    if let Some(last) = out.last_mut() {
        last.1 = 1.0;
    }
    out
}

fn planar_error(p: &Position, x: f64, y: f64) -> f64 {
    ((p.x - x).powi(2) + (p.y - y).powi(2)).sqrt()
}

fn totals(models: &[&FloorLocalizer]) -> (f64, f64) {
    let time = models.iter().map(|m| m.train_seconds).sum();
    let inducing: usize = models.iter().map(|m| m.model_x.n_inducing()).sum();
    let rows: usize = models.iter().map(|m| m.train_count).sum();
    (time, 100.0 * inducing as f64 / rows.max(1) as f64)
}

/// Scores one localizer on test rows of its own floor.
pub fn evaluate_floor(loc: &FloorLocalizer, test: &FingerprintDataset) -> Result<LocalizationMetrics> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let preds = loc.predict_batch(test.features())?;
    let errs: Vec<f64> = preds
        .iter()
        .zip(test.labels())
        .map(|(p, l)| planar_error(p, l.x, l.y))
        .collect();
    let hits = vec![true; errs.len()];
    let (time, sparsity) = totals(&[loc]);
    LocalizationMetrics::from_errors(&errs, &hits, &hits, time, sparsity)
}

/// Per-row building/floor assignment, localization by the assigned floor's
/// model, and aggregation. A misassigned row is still localized by the model
/// it was routed to and scored against its true coordinates.
pub fn evaluate(
    localizers: &FloorModels,
    assigner: &FloorAssigner,
    test: &FingerprintDataset,
    mode: BuildingMode,
) -> Result<LocalizationMetrics> {
    let all: Vec<&FloorLocalizer> = localizers.values().collect();
    let (time, sparsity) = totals(&all);
    evaluate_by(assigner, test, mode, time, sparsity, |(b, f), rssi| {
        let loc = localizers
            .get(&(b, f))
            .ok_or(Error::MissingLocalizer { building: b, floor: f })?;
        let p = loc.predict_position(rssi)?;
        Ok((p.x, p.y))
    })
}

/// [`evaluate`] with an arbitrary per-floor position estimator.
pub fn evaluate_by<F>(
    assigner: &FloorAssigner,
    test: &FingerprintDataset,
    mode: BuildingMode,
    train_time: f64,
    sparsity: f64,
    locate: F,
) -> Result<LocalizationMetrics>
where
    F: Fn((u32, u32), &[f64]) -> Result<(f64, f64)> + Sync,
{
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let rows: Vec<(f64, bool, bool)> = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let truth = test.labels()[i];
            let rssi = test.rssi(i);
            let (b, f) = match mode {
                BuildingMode::StrongestNode => assigner.assign(rssi)?,
                BuildingMode::KnownBuilding => assigner.assign_in_building(rssi, truth.building)?,
            };
            let (x, y) = locate((b, f), rssi)?;
            Ok((
                ((x - truth.x).powi(2) + (y - truth.y).powi(2)).sqrt(),
                b == truth.building,
                b == truth.building && f == truth.floor,
            ))
        })
        .collect::<Result<_>>()?;
    let errs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let bh: Vec<bool> = rows.iter().map(|r| r.1).collect();
    let fh: Vec<bool> = rows.iter().map(|r| r.2).collect();
    LocalizationMetrics::from_errors(&errs, &bh, &fh, train_time, sparsity)
}

/// Floor hit rate of the vote alone over `test`, building fixed to truth.
pub fn floor_hit_rate(assigner: &FloorAssigner, test: &FingerprintDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let hits: Vec<bool> = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let t = test.labels()[i];
            Ok(assigner.assign_in_building(test.rssi(i), t.building)?.1 == t.floor)
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}
