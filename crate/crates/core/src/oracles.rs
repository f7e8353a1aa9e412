//! Brute-force reference implementations and synthetic data generators.
//!
//! The references here deliberately share no kernel, factorization or
//! selection code with the rest of the crate, so that agreement between the
//! two is evidence that both are right.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{FingerprintDataset, Label, DEFAULT_FILL};
use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::matrix::RowMatrix;

fn rq(a: &[f64], b: &[f64], alpha: f64, l: f64) -> f64 {
    let mut s = 0.0;
    for t in 0..a.len() {
        s += (a[t] - b[t]) * (a[t] - b[t]);
    }
    (1.0 + s / (2.0 * alpha * l * l)).powf(-alpha)
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn dense_inverse(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    let scale = a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .unwrap();
        if m[piv][col].abs() < 1e-14 * scale {
            return Err(Error::Factorization {
                matrix: "dense oracle system",
                jitter: 0.0,
            });
        }
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Ok(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Exact GP predictive mean and latent variance by explicit inversion of
/// `K + (noise_var + jitter) I`.
pub fn dense_gp_oracle(
    x: &RowMatrix,
    y: &[f64],
    xstar: &RowMatrix,
    cfg: &KernelConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.nrows();
    let (alpha, l) = (cfg.alpha, cfg.length_scale);
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    rq(x.row(i), x.row(j), alpha, l)
                        + if i == j { cfg.noise_var + cfg.jitter } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let inv = dense_inverse(&a)?;
    let mut mean = Vec::with_capacity(xstar.nrows());
    let mut var = Vec::with_capacity(xstar.nrows());
    for s in xstar.rows_iter() {
        let k: Vec<f64> = (0..n).map(|i| rq(s, x.row(i), alpha, l)).collect();
        let mut m = 0.0;
        let mut q = 0.0;
        for i in 0..n {
            let mut ainv_k = 0.0;
            let mut ainv_y = 0.0;
            for j in 0..n {
                ainv_k += inv[i][j] * k[j];
                ainv_y += inv[i][j] * y[j];
            }
            m += k[i] * ainv_y;
            q += k[i] * ainv_k;
        }
        mean.push(m);
        var.push(rq(s, s, alpha, l) - q);
    }
    Ok((mean, var))
}

/// k-NN regression by sorting every training row by distance.
pub fn knn_oracle(train: &FingerprintDataset, k: usize, query: &[f64]) -> (f64, f64) {
    let mut d: Vec<(f64, usize)> = (0..train.len())
        .map(|i| {
            let r = train.rssi(i);
            let s: f64 = r.iter().zip(query).map(|(a, b)| (a - b).powi(2)).sum();
            (s, i)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(_, i) in &d[..k] {
        sx += train.labels()[i].x;
        sy += train.labels()[i].y;
    }
    (sx / k as f64, sy / k as f64)
}

/// Line-by-line scan of the WAP similarity filter on a materialized copy of
/// the sorted columns, removing columns from the working list as it goes.
/// Returns kept original column indices in ascending order.
pub fn wap_filter_oracle(x: &RowMatrix, target_v: usize, delta_dbm: f64, ratio: f64) -> Vec<usize> {
    let n = x.nrows();
    let w = x.ncols();
    let mut cols: Vec<(usize, Vec<f64>, f64)> = (0..w)
        .map(|j| {
            let c: Vec<f64> = (0..n).map(|i| x.get(i, j)).collect();
            let mean = c.iter().sum::<f64>() / n as f64;
            let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            (j, c, var)
        })
        .collect();
    // stable sort keeps ascending index among equal variances
    cols.sort_by(|a, b| b.2.total_cmp(&a.2));

    let mut c = w;
    let mut j = 0;
    while j + 1 < cols.len() {
        let delta: Vec<f64> = (0..n).map(|i| (cols[j].1[i] - cols[j + 1].1[i]).abs()).collect();
        let eta = delta.iter().filter(|&&d| d <= delta_dbm).count() as f64 / n as f64;
        if eta == 1.0 {
            cols.remove(j + 1);
            c -= 1;
        } else if eta >= ratio {
            let mut k = 0;
            for i in 1..n {
                if delta[i] > delta[k] {
                    k = i;
                }
            }
            if cols[j].1[k] < cols[j + 1].1[k] {
                cols.remove(j);
            } else {
                cols.remove(j + 1);
            }
            c -= 1;
        } else {
            j += 1;
        }
        if c == target_v {
            break;
        }
    }
    let mut kept: Vec<usize> = cols.into_iter().map(|c| c.0).collect();
    kept.sort_unstable();
    kept
}

/// Single-floor radio map with a log-distance path-loss model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Reference points, laid out on a regular grid over the area.
    pub n_rps: usize,
    pub samples_per_rp: usize,
    /// Width and height of the floor in meters.
    pub area: (f64, f64),
    pub n_waps: usize,
    /// RSSI at 1 m from an access point.
    pub tx_power: f64,
    pub path_loss_exp: f64,
    /// Standard deviation of the static per-(RP, WAP) shadowing term.
    pub shadowing_sd: f64,
    /// Readings below this level are reported as undetected.
    pub detection_floor: f64,
    /// Added to every detected reading once per period.
    pub drift_bias: f64,
    pub noise_sd: f64,
    /// Seconds between the starts of consecutive periods.
    pub period_seconds: i64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_rps: 64,
            samples_per_rp: 4,
            area: (40.0, 30.0),
            n_waps: 24,
            tx_power: -35.0,
            path_loss_exp: 2.8,
            shadowing_sd: 3.0,
            detection_floor: -100.0,
            drift_bias: 0.0,
            noise_sd: 2.0,
            period_seconds: 5 * 86_400,
            seed: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_rps == 0 || self.samples_per_rp == 0 || self.n_waps == 0 {
            return Err(Error::Config("synthetic counts must be >= 1".into()));
        }
        if !(self.noise_sd >= 0.0 && self.shadowing_sd >= 0.0) {
            return Err(Error::Config("synthetic noise levels must be >= 0".into()));
        }
        if !(self.area.0 > 0.0 && self.area.1 > 0.0) {
            return Err(Error::Config("synthetic area must be positive".into()));
        }
        Ok(())
    }

    fn rp_positions(&self) -> Vec<(f64, f64)> {
        let cols = ((self.n_rps as f64 * self.area.0 / self.area.1).sqrt().ceil() as usize).max(1);
        let rows = self.n_rps.div_ceil(cols);
        let dx = self.area.0 / cols as f64;
        let dy = self.area.1 / rows as f64;
        (0..self.n_rps)
            .map(|i| ((i % cols) as f64 * dx + dx / 2.0, (i / cols) as f64 * dy + dy / 2.0))
            .collect()
    }
}

fn path_loss(tx: f64, exp: f64, dist: f64) -> f64 {
    tx - 10.0 * exp * dist.max(1.0).log10()
}

/// Generates `periods` datasets over fixed geometry. Period `p` adds
/// `p * drift_bias` to every detected reading plus fresh measurement noise;
/// its timestamps start at `p * period_seconds`.
pub fn gen_synthetic(spec: &SyntheticSpec, periods: usize) -> Result<Vec<FingerprintDataset>> {
    spec.validate()?;
    let mut geo = ChaCha8Rng::seed_from_u64(spec.seed);
    let waps: Vec<(f64, f64)> = (0..spec.n_waps)
        .map(|_| (geo.random_range(0.0..spec.area.0), geo.random_range(0.0..spec.area.1)))
        .collect();
    let rps = spec.rp_positions();
    let shadow = Normal::new(0.0, spec.shadowing_sd).map_err(|e| Error::Config(e.to_string()))?;
    let shadowing: Vec<Vec<f64>> = rps
        .iter()
        .map(|_| (0..spec.n_waps).map(|_| shadow.sample(&mut geo)).collect())
        .collect();
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let column_ids: Vec<String> = (0..spec.n_waps).map(|i| format!("{i:03}")).collect();

    let mut out = Vec::with_capacity(periods);
    for p in 0..periods {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(p as u64 + 1);
        let mut rows = Vec::with_capacity(rps.len() * spec.samples_per_rp);
        let mut labels = Vec::with_capacity(rows.capacity());
        for (r, &(x, y)) in rps.iter().enumerate() {
            for s in 0..spec.samples_per_rp {
                let row: Vec<f64> = waps
                    .iter()
                    .enumerate()
                    .map(|(w, &(wx, wy))| {
                        let d = ((x - wx).powi(2) + (y - wy).powi(2)).sqrt();
                        let clean = path_loss(spec.tx_power, spec.path_loss_exp, d) + shadowing[r][w];
                        let v = clean + p as f64 * spec.drift_bias + noise.sample(&mut rng);
                        if v < spec.detection_floor {
                            DEFAULT_FILL
                        } else {
                            v.min(0.0)
                        }
                    })
                    .collect();
                rows.push(row);
                labels.push(Label {
                    x,
                    y,
                    floor: 0,
                    building: 0,
                    timestamp: p as i64 * spec.period_seconds + (r * spec.samples_per_rp + s) as i64,
                });
            }
        }
        out.push(FingerprintDataset::new(
            RowMatrix::from_rows(&rows)?,
            labels,
            column_ids.clone(),
            true,
        )?);
    }
    Ok(out)
}

/// Multi-building, multi-floor radio map: each floor has its own access
/// points, signals lose `floor_attenuation` dB per floor crossed and do not
/// reach other buildings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiFloorSpec {
    pub buildings: u32,
    pub floors: u32,
    pub rps_per_floor: usize,
    pub samples_per_rp: usize,
    pub floor_area: (f64, f64),
    pub waps_per_floor: usize,
    pub floor_height: f64,
    pub floor_attenuation: f64,
    /// Offset between building origins along x, in meters.
    pub building_gap: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for MultiFloorSpec {
    fn default() -> Self {
        Self {
            buildings: 2,
            floors: 3,
            rps_per_floor: 30,
            samples_per_rp: 3,
            floor_area: (40.0, 25.0),
            waps_per_floor: 6,
            floor_height: 4.0,
            floor_attenuation: 12.0,
            building_gap: 200.0,
            noise_sd: 2.0,
            seed: 3,
        }
    }
}

pub fn gen_multi_floor(spec: &MultiFloorSpec) -> Result<FingerprintDataset> {
    if spec.buildings == 0 || spec.floors == 0 || spec.rps_per_floor == 0 || spec.waps_per_floor == 0 {
        return Err(Error::Config("multi-floor counts must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::Config(e.to_string()))?;
    let (aw, ah) = spec.floor_area;
    // (building, floor, x, y)
    let mut waps = Vec::new();
    let mut column_ids = Vec::new();
    for b in 0..spec.buildings {
        for f in 0..spec.floors {
            for w in 0..spec.waps_per_floor {
                let x = b as f64 * spec.building_gap + rng.random_range(0.0..aw);
                let y = rng.random_range(0.0..ah);
                waps.push((b, f, x, y));
                column_ids.push(format!("b{b}f{f}w{w}"));
            }
        }
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for b in 0..spec.buildings {
        for f in 0..spec.floors {
            for _ in 0..spec.rps_per_floor {
                let x = b as f64 * spec.building_gap + rng.random_range(0.0..aw);
                let y = rng.random_range(0.0..ah);
                for _ in 0..spec.samples_per_rp {
                    let row: Vec<f64> = waps
                        .iter()
                        .map(|&(wb, wf, wx, wy)| {
                            if wb != b {
                                return DEFAULT_FILL;
                            }
                            let dz = (wf as f64 - f as f64) * spec.floor_height;
                            let d = ((x - wx).powi(2) + (y - wy).powi(2) + dz * dz).sqrt();
                            let v = path_loss(-35.0, 2.8, d)
                                - spec.floor_attenuation * (wf as f64 - f as f64).abs()
                                + noise.sample(&mut rng);
                            if v < -100.0 {
                                DEFAULT_FILL
                            } else {
                                v.min(0.0)
                            }
                        })
                        .collect();
                    rows.push(row);
                    labels.push(Label {
                        x,
                        y,
                        floor: f,
                        building: b,
                        timestamp: 0,
                    });
                }
            }
        }
    }
    FingerprintDataset::new(RowMatrix::from_rows(&rows)?, labels, column_ids, true)
}
