//! Accuracy/training-time benchmark and the rolling-retraining scenario.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baseline::{knn_regress, KnnConfig};
use crate::dataset::FingerprintDataset;
use crate::error::{Error, Result};
use crate::locate::{
    evaluate_floor, train_all_floors, FloorLocalizer, FloorModels, InducingPlan, TrainConfig,
};
use crate::oracles::{gen_synthetic, SyntheticSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub mean_2d: f64,
    /// Median wall-clock training seconds.
    pub fit_seconds: f64,
    /// Achieved inducing-set sparsity in percent, `None` for non-GP models.
    pub sparsity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Worker threads available to Gram construction during timing.
    pub threads: usize,
}

impl BenchReport {
    pub fn row(&self, model: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.model == model)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "model,mean_2d_m,fit_seconds,sparsity_pct,threads")?;
        for r in &self.rows {
            let s = r.sparsity.map(|s| format!("{s:.2}")).unwrap_or_default();
            writeln!(w, "{},{:.4},{:.6},{},{}", r.model, r.mean_2d, r.fit_seconds, s, self.threads)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Base configuration; its inducing plan is replaced per row.
    pub train: TrainConfig,
    pub cell_size: f64,
    pub seed: u64,
    pub knn: KnnConfig,
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            cell_size: crate::reduce::DEFAULT_CELL_SIZE,
            seed: 0,
            knn: KnnConfig::default(),
            repeats: 3,
        }
    }
}

pub fn sgp_label(percent: f64) -> String {
    format!("SGP-RI({percent}%)")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn timed_floor(train: &FingerprintDataset, cfg: &TrainConfig, repeats: usize) -> Result<(FloorLocalizer, f64)> {
    let mut times = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let loc = FloorLocalizer::train(train, cfg)?;
        times.push(loc.train_seconds);
        last = Some(loc);
    }
    Ok((last.unwrap(), median(times)))
}

/// Exact GP, SGP-RI at each requested sparsity and k-NN on one floor.
pub fn run_bench(
    train: &FingerprintDataset,
    test: &FingerprintDataset,
    sparsities: &[f64],
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    let mut rows = Vec::new();
    let exact = TrainConfig {
        inducing: InducingPlan::Exact,
        ..cfg.train
    };
    let (loc, secs) = timed_floor(train, &exact, cfg.repeats)?;
    rows.push(BenchRow {
        model: "GP".into(),
        mean_2d: evaluate_floor(&loc, test)?.mean_2d,
        fit_seconds: secs,
        sparsity: Some(100.0),
    });
    for &p in sparsities {
        let sparse = TrainConfig {
            inducing: InducingPlan::Sparsity {
                percent: p,
                cell_size: cfg.cell_size,
                seed: cfg.seed,
            },
            ..cfg.train
        };
        let (loc, secs) = timed_floor(train, &sparse, cfg.repeats)?;
        rows.push(BenchRow {
            model: sgp_label(p),
            mean_2d: evaluate_floor(&loc, test)?.mean_2d,
            fit_seconds: secs,
            sparsity: Some(loc.sparsity()),
        });
    }
    // k-NN "training" is taking ownership of the reference set
    let mut times = Vec::new();
    for _ in 0..cfg.repeats.max(1) {
        let start = Instant::now();
        let reference = std::hint::black_box(train.clone());
        times.push(start.elapsed().as_secs_f64());
        drop(reference);
    }
    rows.push(BenchRow {
        model: "kNN".into(),
        mean_2d: knn_mean_error(train, test, &cfg.knn)?,
        fit_seconds: median(times),
        sparsity: None,
    });
    Ok(BenchReport {
        rows,
        threads: rayon::current_num_threads(),
    })
}

fn knn_mean_error(train: &FingerprintDataset, test: &FingerprintDataset, cfg: &KnnConfig) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut sum = 0.0;
    for i in 0..test.len() {
        let (x, y) = knn_regress(train, cfg, test.rssi(i))?;
        let l = test.labels()[i];
        sum += ((x - l.x).powi(2) + (y - l.y).powi(2)).sqrt();
    }
    Ok(sum / test.len() as f64)
}

/// Model used in the dynamic scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicModel {
    Localizer(TrainConfig),
    Knn(KnnConfig),
}

/// Initial training data followed by test periods in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicScenario {
    pub initial_train: FingerprintDataset,
    pub groups: Vec<FingerprintDataset>,
    /// Move each period into the training set after it has been scored.
    pub retrain: bool,
}

impl DynamicScenario {
    /// Splits `ds` at `boundary` and cuts the remainder into `n_groups`
    /// consecutive windows of `group_seconds`.
    pub fn from_timestamps(
        ds: &FingerprintDataset,
        boundary: i64,
        group_seconds: i64,
        n_groups: usize,
        retrain: bool,
    ) -> Result<Self> {
        if group_seconds <= 0 || n_groups == 0 {
            return Err(Error::Config("need a positive group length and at least one group".into()));
        }
        let idx = |lo: i64, hi: i64| -> Vec<usize> {
            (0..ds.len())
                .filter(|&i| (lo..hi).contains(&ds.labels()[i].timestamp))
                .collect()
        };
        let initial_train = ds.select_rows(&idx(i64::MIN, boundary));
        let groups = (0..n_groups as i64)
            .map(|g| ds.select_rows(&idx(boundary + g * group_seconds, boundary + (g + 1) * group_seconds)))
            .collect();
        let sc = Self {
            initial_train,
            groups,
            retrain,
        };
        sc.validate()?;
        Ok(sc)
    }

    /// Period 0 of a synthetic drift run trains; periods `1..=groups` test.
    pub fn synthetic(spec: &SyntheticSpec, groups: usize, retrain: bool) -> Result<Self> {
        let mut periods = gen_synthetic(spec, groups + 1)?;
        let initial_train = periods.remove(0);
        Ok(Self {
            initial_train,
            groups: periods,
            retrain,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_train.is_empty() {
            return Err(Error::Empty("initial training set"));
        }
        if self.groups.is_empty() {
            return Err(Error::Empty("scenario groups"));
        }
        if self.groups.iter().any(FingerprintDataset::is_empty) {
            return Err(Error::Empty("scenario group"));
        }
        let span = |d: &FingerprintDataset| {
            let ts = d.labels().iter().map(|l| l.timestamp);
            (ts.clone().min().unwrap(), ts.max().unwrap())
        };
        for w in self.groups.windows(2) {
            if span(&w[0]).1 >= span(&w[1]).0 {
                return Err(Error::Dataset("scenario groups overlap in time".into()));
            }
        }
        Ok(())
    }
}

enum Fitted {
    Floors(FloorModels),
    Knn(FingerprintDataset, KnnConfig),
}

impl Fitted {
    fn fit(train: &FingerprintDataset, model: &DynamicModel) -> Result<Self> {
        Ok(match model {
            DynamicModel::Localizer(cfg) => Fitted::Floors(train_all_floors(train, cfg)?),
            DynamicModel::Knn(cfg) => Fitted::Knn(train.clone(), *cfg),
        })
    }

    /// Mean 2D error with each row localized on its own floor.
    fn mean_error(&self, test: &FingerprintDataset) -> Result<f64> {
        let mut sum = 0.0;
        match self {
            Fitted::Floors(models) => {
                let mut by_floor: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
                for (i, l) in test.labels().iter().enumerate() {
                    by_floor.entry((l.building, l.floor)).or_default().push(i);
                }
                for ((b, f), rows) in by_floor {
                    let loc = models
                        .get(&(b, f))
                        .ok_or(Error::MissingLocalizer { building: b, floor: f })?;
                    let part = test.select_rows(&rows);
                    sum += evaluate_floor(loc, &part)?.mean_2d * rows.len() as f64;
                }
            }
            Fitted::Knn(train, cfg) => {
                sum = knn_mean_error(train, test, cfg)? * test.len() as f64;
            }
        }
        Ok(sum / test.len() as f64)
    }
}

/// Scores each period with the current model; with `retrain` set, the
/// period is then appended to the training data and the model refit.
pub fn run_dynamic(sc: &DynamicScenario, model: &DynamicModel) -> Result<Vec<f64>> {
    sc.validate()?;
    let mut train = sc.initial_train.clone();
    let mut fitted = Fitted::fit(&train, model)?;
    let mut errors = Vec::with_capacity(sc.groups.len());
    for (i, group) in sc.groups.iter().enumerate() {
        errors.push(fitted.mean_error(group)?);
        if sc.retrain && i + 1 < sc.groups.len() {
            train = train.concat(group)?;
            fitted = Fitted::fit(&train, model)?;
        }
    }
    Ok(errors)
}

pub fn write_dynamic_csv<W: Write>(w: &mut W, series: &[(String, Vec<f64>)]) -> std::io::Result<()> {
    writeln!(w, "model,period,mean_2d_m")?;
    for (name, errs) in series {
        for (p, e) in errs.iter().enumerate() {
            writeln!(w, "{name},{},{e:.4}", p + 1)?;
        }
    }
    Ok(())
}
