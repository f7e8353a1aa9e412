//! Plain k-nearest-neighbour coordinate regression.

use serde::{Deserialize, Serialize};

use std::collections::BTreeMap;

use crate::dataset::FingerprintDataset;
use crate::error::{Error, Result};
use crate::kernel::sq_dist;
use crate::locate::{evaluate_by, BuildingMode, FloorAssigner, LocalizationMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 20 }
    }
}

/// Unweighted mean coordinates of the `k` training rows closest to `query`
/// in Euclidean RSSI distance; equal distances resolve to the lower row index.
pub fn knn_regress(train: &FingerprintDataset, cfg: &KnnConfig, query: &[f64]) -> Result<(f64, f64)> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if cfg.k == 0 || cfg.k > train.len() {
        return Err(Error::Config(format!(
            "k = {} must lie in [1, {}]",
            cfg.k,
            train.len()
        )));
    }
    if query.len() != train.n_waps() {
        return Err(Error::Dimension {
            expected: train.n_waps(),
            actual: query.len(),
            context: "query length",
        });
    }
    let mut d: Vec<(f64, usize)> = (0..train.len())
        .map(|i| (sq_dist(train.rssi(i), query), i))
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if cfg.k < d.len() {
        d.select_nth_unstable_by(cfg.k - 1, by_dist);
    }
    let labels = train.labels();
    let (sx, sy) = d[..cfg.k]
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(_, i)| (sx + labels[i].x, sy + labels[i].y));
    Ok((sx / cfg.k as f64, sy / cfg.k as f64))
}

/// Multi-floor scoring with k-NN restricted to the assigned floor's rows.
pub fn evaluate_knn(
    train: &FingerprintDataset,
    cfg: &KnnConfig,
    assigner: &FloorAssigner,
    test: &FingerprintDataset,
    mode: BuildingMode,
) -> Result<LocalizationMetrics> {
    let floors: BTreeMap<(u32, u32), FingerprintDataset> =
        train.floors().into_iter().map(|(b, f)| ((b, f), train.subset(b, f))).collect();
    evaluate_by(assigner, test, mode, 0.0, 100.0, |(b, f), rssi| {
        let ds = floors
            .get(&(b, f))
            .ok_or(Error::MissingLocalizer { building: b, floor: f })?;
        let k = KnnConfig { k: cfg.k.min(ds.len()) };
        knn_regress(ds, &k, rssi)
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dataset::Label;
    use crate::matrix::RowMatrix;
    use crate::oracles::knn_oracle;

    fn random_ds(seed: u64, n: usize, w: usize) -> FingerprintDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * w).map(|_| rng.random_range(-100.0..-30.0)).collect();
        let labels = (0..n)
            .map(|_| Label {
                x: rng.random_range(0.0..50.0),
                y: rng.random_range(0.0..20.0),
                floor: 0,
                building: 0,
                timestamp: 0,
            })
            .collect();
        FingerprintDataset::new(
            RowMatrix::new(n, w, data).unwrap(),
            labels,
            (0..w).map(|j| j.to_string()).collect(),
            true,
        )
        .unwrap()
    }

    #[test]
    fn k1_returns_matching_row() {
        let ds = random_ds(1, 30, 5);
        let (x, y) = knn_regress(&ds, &KnnConfig { k: 1 }, ds.rssi(12)).unwrap();
        assert_eq!((x, y), (ds.labels()[12].x, ds.labels()[12].y));
    }

    #[test]
    fn k_n_returns_centroid() {
        let ds = random_ds(2, 25, 4);
        let (x, y) = knn_regress(&ds, &KnnConfig { k: 25 }, ds.rssi(0)).unwrap();
        let cx = ds.xs().iter().sum::<f64>() / 25.0;
        let cy = ds.ys().iter().sum::<f64>() / 25.0;
        assert!((x - cx).abs() < 1e-12 && (y - cy).abs() < 1e-12);
    }

    #[test]
    fn matches_exhaustive_sort() {
        for seed in 0..10 {
            let ds = random_ds(seed, 40, 6);
            let q = random_ds(seed + 100, 1, 6);
            let got = knn_regress(&ds, &KnnConfig { k: 3 }, q.rssi(0)).unwrap();
            let want = knn_oracle(&ds, 3, q.rssi(0));
            assert!((got.0 - want.0).abs() < 1e-12 && (got.1 - want.1).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        let rows = vec![vec![-50.0], vec![-50.0], vec![-50.0]];
        let labels = (0..3)
            .map(|i| Label { x: i as f64, y: 0.0, floor: 0, building: 0, timestamp: 0 })
            .collect();
        let ds = FingerprintDataset::new(RowMatrix::from_rows(&rows).unwrap(), labels, vec!["a".into()], true).unwrap();
        assert_eq!(knn_regress(&ds, &KnnConfig { k: 2 }, &[-50.0]).unwrap(), (0.5, 0.0));
    }

    #[test]
    fn output_inside_bounding_box() {
        let ds = random_ds(5, 50, 4);
        let q = random_ds(6, 10, 4);
        let (lx, hx) = ds.xs().iter().fold((f64::MAX, f64::MIN), |a, &v| (a.0.min(v), a.1.max(v)));
        for i in 0..10 {
            let (x, _) = knn_regress(&ds, &KnnConfig::default(), q.rssi(i)).unwrap();
            assert!(x >= lx && x <= hx);
        }
    }

    #[test]
    fn errors() {
        let ds = random_ds(3, 5, 2);
        assert!(knn_regress(&ds, &KnnConfig { k: 6 }, ds.rssi(0)).is_err());
        assert!(knn_regress(&ds, &KnnConfig { k: 0 }, ds.rssi(0)).is_err());
        assert!(knn_regress(&ds, &KnnConfig { k: 1 }, &[1.0]).is_err());
    }
}
