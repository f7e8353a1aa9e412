//! Input-size reduction before model fitting.
//!
//! Columns (access points) are reduced by dropping never-detected columns and
//! then merging near-duplicate neighbours in variance order. Rows are reduced
//! by bucketing reference points into a rectangular grid and keeping at most
//! a fixed number per cell as inducing inputs.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FingerprintDataset;
use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

/// Default cell edge for inducing-point selection, in meters.
pub const DEFAULT_CELL_SIZE: f64 = 5.0;

/// Retained columns, as indices into the original feature matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSelection {
    /// Ascending original column indices.
    pub kept: Vec<usize>,
    pub target_v: usize,
    pub achieved: usize,
}

impl ColumnSelection {
    pub fn all(width: usize) -> Self {
        Self {
            kept: (0..width).collect(),
            target_v: width,
            achieved: width,
        }
    }

    /// Re-expresses a selection made on `self.kept` columns in terms of the
    /// original indices.
    pub fn compose(&self, inner: &ColumnSelection) -> ColumnSelection {
        ColumnSelection {
            kept: inner.kept.iter().map(|&k| self.kept[k]).collect(),
            target_v: inner.target_v,
            achieved: inner.achieved,
        }
    }

    /// One index per line.
    pub fn to_csv(&self) -> String {
        indices_to_csv(&self.kept)
    }
}

pub fn indices_to_csv(idx: &[usize]) -> String {
    idx.iter().map(|i| format!("{i}\n")).collect()
}

pub fn indices_from_csv(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(row, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: "index".into(),
                message: format!("not an index: {l:?}"),
            })
        })
        .collect()
}

/// Thresholds of the similarity filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WapFilterConfig {
    /// Two readings within this many dBm count as similar.
    pub delta_dbm: f64,
    /// Fraction of similar rows at which a pair counts as redundant.
    pub similarity_ratio: f64,
}

impl Default for WapFilterConfig {
    fn default() -> Self {
        Self {
            delta_dbm: 3.0,
            similarity_ratio: 0.85,
        }
    }
}

/// Removes columns whose every value equals the imputation fill.
pub fn drop_dead_columns(ds: &FingerprintDataset, fill: f64) -> Result<ColumnSelection> {
    let x = ds.features();
    let kept: Vec<usize> = (0..ds.n_waps())
        .filter(|&j| (0..x.nrows()).any(|i| x.get(i, j) != fill))
        .collect();
    if kept.is_empty() {
        return Err(Error::Dataset("every WAP column is undetected; no usable features".into()));
    }
    Ok(ColumnSelection {
        target_v: kept.len(),
        achieved: kept.len(),
        kept,
    })
}

/// Similarity-based column filter.
///
/// Columns are visited in decreasing-variance order (ties by ascending index).
/// Each column is compared with the survivor of the previous comparison:
/// if every row differs by at most `delta_dbm` the lower-variance column goes;
/// if at least `similarity_ratio` of rows do, the column that is weaker at the
/// row of largest difference goes. The scan stops once `target_v` columns
/// remain.
pub fn wap_filter(x: &RowMatrix, target_v: usize, cfg: &WapFilterConfig) -> Result<ColumnSelection> {
    let (n, w) = (x.nrows(), x.ncols());
    if target_v == 0 || target_v >= w {
        return Err(Error::Config(format!(
            "target column count {target_v} must lie in [1, {w})"
        )));
    }
    if n == 0 {
        return Err(Error::Empty("feature matrix"));
    }
    let variances = x.column_variances();
    let mut order: Vec<usize> = (0..w).collect();
    order.sort_by(|&a, &b| variances[b].total_cmp(&variances[a]).then(a.cmp(&b)));

    let columns: Vec<Vec<f64>> = (0..w).map(|j| x.column(j)).collect();
    let mut removed = vec![false; w];
    let mut remaining = w;
    let mut current = order[0];
    for &next in &order[1..] {
        let (a, b) = (&columns[current], &columns[next]);
        let mut similar = 0usize;
        let mut argmax = 0usize;
        let mut max_delta = f64::NEG_INFINITY;
        for i in 0..n {
            let d = (a[i] - b[i]).abs();
            if d <= cfg.delta_dbm {
                similar += 1;
            }
            if d > max_delta {
                max_delta = d;
                argmax = i;
            }
        }
        let ratio = similar as f64 / n as f64;
        if similar == n {
            removed[next] = true;
            remaining -= 1;
        } else if ratio >= cfg.similarity_ratio {
            if a[argmax] < b[argmax] {
                removed[current] = true;
                current = next;
            } else {
                removed[next] = true;
            }
            remaining -= 1;
        } else {
            current = next;
        }
        if remaining == target_v {
            break;
        }
    }
    let kept: Vec<usize> = (0..w).filter(|&j| !removed[j]).collect();
    Ok(ColumnSelection {
        achieved: kept.len(),
        kept,
        target_v,
    })
}

/// Rectangular grid over the coordinate plane used to cap inducing inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: (f64, f64),
    pub cell_size: f64,
    pub max_per_cell: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(Error::Config(format!("cell size {} must be > 0", self.cell_size)));
        }
        if self.max_per_cell == 0 {
            return Err(Error::Config("max_per_cell must be >= 1".into()));
        }
        Ok(())
    }

    fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin.0) / self.cell_size).floor() as i64,
            ((y - self.origin.1) / self.cell_size).floor() as i64,
        )
    }

    /// Number of cells `L` in the grid spanning the origin and every point of
    /// `ds`.
    pub fn cell_count(&self, ds: &FingerprintDataset) -> usize {
        if ds.is_empty() {
            return 0;
        }
        let (mut hx, mut hy) = (0i64, 0i64);
        let (mut lx, mut ly) = (0i64, 0i64);
        for l in ds.labels() {
            let (cx, cy) = self.cell_of(l.x, l.y);
            hx = hx.max(cx);
            hy = hy.max(cy);
            lx = lx.min(cx);
            ly = ly.min(cy);
        }
        ((hx - lx + 1) * (hy - ly + 1)) as usize
    }

    /// Row indices of `ds` grouped by occupied cell, in cell order.
    fn buckets(&self, ds: &FingerprintDataset) -> BTreeMap<(i64, i64), Vec<usize>> {
        let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for (i, l) in ds.labels().iter().enumerate() {
            cells.entry(self.cell_of(l.x, l.y)).or_default().push(i);
        }
        cells
    }
}

/// Picks inducing rows: every grid cell keeps at most `max_per_cell` of its
/// rows, drawn uniformly at random from a generator seeded with `grid.seed`.
/// Returns ascending row indices.
pub fn select_inducing(ds: &FingerprintDataset, grid: &GridSpec) -> Result<Vec<usize>> {
    grid.validate()?;
    if ds.is_empty() {
        return Err(Error::Empty("dataset for inducing selection"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let mut out = Vec::new();
    for (_, rows) in grid.buckets(ds) {
        if rows.len() > grid.max_per_cell {
            let picks = rand::seq::index::sample(&mut rng, rows.len(), grid.max_per_cell);
            out.extend(picks.iter().map(|p| rows[p]));
        } else {
            out.extend(rows);
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Derives a grid whose per-cell cap aims at `target_sparsity` percent of the
/// rows: `max_per_cell = max(1, round(target / 100 * N / occupied_cells))`.
/// A 100 % target keeps every row.
pub fn sparsity_to_grid(
    ds: &FingerprintDataset,
    target_sparsity: f64,
    cell_size: f64,
    seed: u64,
) -> Result<GridSpec> {
    if !(target_sparsity > 0.0 && target_sparsity <= 100.0) {
        return Err(Error::Config(format!(
            "target sparsity {target_sparsity} must lie in (0, 100]"
        )));
    }
    if ds.is_empty() {
        return Err(Error::Empty("dataset for grid sizing"));
    }
    let origin = ds
        .labels()
        .iter()
        .fold((f64::INFINITY, f64::INFINITY), |(x, y), l| (x.min(l.x), y.min(l.y)));
    let mut grid = GridSpec {
        origin,
        cell_size,
        max_per_cell: 1,
        seed,
    };
    grid.validate()?;
    let n = ds.len();
    grid.max_per_cell = if target_sparsity >= 100.0 {
        n
    } else {
        let occupied = grid.buckets(ds).len();
        ((target_sparsity / 100.0 * n as f64 / occupied as f64).round() as usize).max(1)
    };
    Ok(grid)
}
