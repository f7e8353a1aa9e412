//! Fingerprint database ingestion, imputation, filtering and splitting.
//!
//! Two on-disk layouts are understood:
//!
//! * the public UJIIndoorLoc CSV (`WAP001..WAP520` followed by `LONGITUDE`,
//!   `LATITUDE`, `FLOOR`, `BUILDINGID`, ..., `TIMESTAMP`), where an undetected
//!   access point is written as `100`;
//! * a generic time-stamped layout, `wap_<id>,...,x,y,floor,building,timestamp`,
//!   where an undetected access point is an empty cell or `100`.
//!
//! Both map undetected readings to [`SENTINEL`] and then replace the sentinel
//! with a configurable fill value ([`DEFAULT_FILL`] unless overridden).

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

/// Marker for an access point that was not heard in a scan.
pub const SENTINEL: f64 = 100.0;

/// Fill value substituted for [`SENTINEL`] on load.
pub const DEFAULT_FILL: f64 = -110.0;

const UJI_REQUIRED: [&str; 4] = ["LONGITUDE", "LATITUDE", "FLOOR", "BUILDINGID"];
const UJI_META: [&str; 9] = [
    "LONGITUDE",
    "LATITUDE",
    "FLOOR",
    "BUILDINGID",
    "SPACEID",
    "RELATIVEPOSITION",
    "USERID",
    "PHONEID",
    "TIMESTAMP",
];
const GENERIC_META: [&str; 5] = ["x", "y", "floor", "building", "timestamp"];

/// Ground truth attached to one fingerprint.
/// Imputes one reading: the sentinel becomes `fill`, weaker readings are
/// raised to `fill`, and positive or non-finite readings yield `None`.
pub fn impute_reading(v: f64, fill: f64) -> Option<f64> {
    if v == SENTINEL {
        Some(fill)
    } else if v > 0.0 || !v.is_finite() {
        None
    } else {
        Some(v.max(fill))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub x: f64,
    pub y: f64,
    pub floor: u32,
    pub building: u32,
    /// Seconds since the epoch, 0 when the source has no timestamps.
    pub timestamp: i64,
}

/// A single labelled scan, the unit of online ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiSample {
    pub rssi: Vec<f64>,
    pub x: f64,
    pub y: f64,
    pub floor: u32,
    pub building: u32,
    #[serde(default)]
    pub timestamp: i64,
}

impl RssiSample {
    pub fn label(&self) -> Label {
        Label {
            x: self.x,
            y: self.y,
            floor: self.floor,
            building: self.building,
            timestamp: self.timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    /// Rows with `timestamp < boundary` train, the rest test.
    Temporal { boundary: i64 },
    /// `floor(N * fraction)` rows drawn at random train, the rest test.
    Random { fraction: f64, seed: u64 },
}

/// An `N x W` RSSI matrix with one [`Label`] per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintDataset {
    features: RowMatrix,
    labels: Vec<Label>,
    column_ids: Vec<String>,
    imputed: bool,
}

impl FingerprintDataset {
    pub fn new(
        features: RowMatrix,
        labels: Vec<Label>,
        column_ids: Vec<String>,
        imputed: bool,
    ) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Dimension {
                expected: labels.len(),
                actual: features.nrows(),
                context: "feature rows vs labels",
            });
        }
        if column_ids.is_empty() {
            return Err(Error::Dataset("no WAP columns".into()));
        }
        if features.nrows() > 0 && features.ncols() != column_ids.len() {
            return Err(Error::Dimension {
                expected: column_ids.len(),
                actual: features.ncols(),
                context: "feature columns vs column ids",
            });
        }
        let mut seen = HashSet::new();
        for id in &column_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Dataset(format!("duplicate column id {id}")));
            }
        }
        if imputed && features.as_slice().iter().any(|&v| v == SENTINEL) {
            return Err(Error::Dataset(
                "dataset flagged as imputed still holds sentinel values".into(),
            ));
        }
        // keep an empty matrix at the declared width so later stacking works
        let features = if features.nrows() == 0 {
            RowMatrix::zeros(0, column_ids.len())
        } else {
            features
        };
        Ok(Self {
            features,
            labels,
            column_ids,
            imputed,
        })
    }

    /// Builds a dataset from labelled samples, imputing sentinels with `fill`.
    pub fn from_samples(samples: &[RssiSample], column_ids: Vec<String>, fill: f64) -> Result<Self> {
        let rows: Vec<&[f64]> = samples.iter().map(|s| s.rssi.as_slice()).collect();
        for s in samples {
            if s.rssi.len() != column_ids.len() {
                return Err(Error::Dimension {
                    expected: column_ids.len(),
                    actual: s.rssi.len(),
                    context: "sample RSSI length",
                });
            }
        }
        let features = if rows.is_empty() {
            RowMatrix::zeros(0, column_ids.len())
        } else {
            RowMatrix::from_rows(&rows)?
        };
        let labels = samples.iter().map(RssiSample::label).collect();
        let mut ds = Self::new(features, labels, column_ids, false)?;
        ds.impute(fill)?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_waps(&self) -> usize {
        self.column_ids.len()
    }

    pub fn features(&self) -> &RowMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn column_ids(&self) -> &[String] {
        &self.column_ids
    }

    pub fn is_imputed(&self) -> bool {
        self.imputed
    }

    pub fn rssi(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn sample(&self, i: usize) -> RssiSample {
        let l = self.labels[i];
        RssiSample {
            rssi: self.rssi(i).to_vec(),
            x: l.x,
            y: l.y,
            floor: l.floor,
            building: l.building,
            timestamp: l.timestamp,
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.y).collect()
    }

    /// Replaces every sentinel with `fill`. Readings weaker than `fill` are
    /// raised to it; readings above 0 dBm are rejected.
    pub fn impute(&mut self, fill: f64) -> Result<()> {
        if !(fill.is_finite() && fill <= 0.0) {
            return Err(Error::Config(format!("imputation fill {fill} must be <= 0 dBm")));
        }
        let cols = self.n_waps();
        for (k, v) in self.features.as_mut_slice().iter_mut().enumerate() {
            *v = impute_reading(*v, fill).ok_or_else(|| Error::Parse {
                row: k / cols,
                column: self.column_ids[k % cols].clone(),
                message: format!("RSSI {v} outside [{fill}, 0] dBm"),
            })?;
        }
        self.imputed = true;
        Ok(())
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            column_ids: self.column_ids.clone(),
            imputed: self.imputed,
        }
    }

    /// Rows recorded on one floor of one building. May be empty.
    pub fn subset(&self, building: u32, floor: u32) -> Self {
        let idx: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.building == building && l.floor == floor)
            .map(|(i, _)| i)
            .collect();
        self.select_rows(&idx)
    }

    /// Rows of one building, all floors.
    pub fn building(&self, building: u32) -> Self {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| self.labels[i].building == building)
            .collect();
        self.select_rows(&idx)
    }

    /// Distinct `(building, floor)` pairs present, in ascending order.
    pub fn floors(&self) -> Vec<(u32, u32)> {
        let set: BTreeSet<(u32, u32)> = self.labels.iter().map(|l| (l.building, l.floor)).collect();
        set.into_iter().collect()
    }

    /// Appends the rows of `other`. Both datasets must share column ids.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.column_ids != other.column_ids {
            return Err(Error::Dataset("cannot concatenate datasets with different WAP columns".into()));
        }
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Self {
            features: self.features.vstack(&other.features)?,
            labels,
            column_ids: self.column_ids.clone(),
            imputed: self.imputed && other.imputed,
        })
    }

    pub fn split(&self, mode: SplitMode) -> Result<(Self, Self)> {
        let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = match mode {
            SplitMode::Temporal { boundary } => {
                (0..self.len()).partition(|&i| self.labels[i].timestamp < boundary)
            }
            SplitMode::Random { fraction, seed } => {
                if !(fraction > 0.0 && fraction < 1.0) {
                    return Err(Error::Config(format!(
                        "random split fraction {fraction} must lie in (0, 1)"
                    )));
                }
                let n_train = (self.len() as f64 * fraction).floor() as usize;
                let mut order: Vec<usize> = (0..self.len()).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
                let mut train = order[..n_train].to_vec();
                let mut test = order[n_train..].to_vec();
                train.sort_unstable();
                test.sort_unstable();
                (train, test)
            }
        };
        if train_idx.is_empty() {
            return Err(Error::Empty("train side of split"));
        }
        if test_idx.is_empty() {
            return Err(Error::Empty("test side of split"));
        }
        Ok((self.select_rows(&train_idx), self.select_rows(&test_idx)))
    }

    /// Maps RSSI from `[fill, 0]` dBm onto `[0, 1]`.
    pub fn min_max_normalized(&self, fill: f64) -> Self {
        let mut out = self.clone();
        for v in out.features.as_mut_slice() {
            *v = min_max(*v, fill);
        }
        out
    }

    /// Writes the generic CSV layout. Floats are written with shortest
    /// round-trip precision so reloading is bit-exact.
    pub fn write_generic(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_generic_to(&mut w).map_err(|e| Error::io(path, e))
    }

    pub fn write_generic_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut header: Vec<String> = self.column_ids.iter().map(|id| format!("wap_{id}")).collect();
        header.extend(GENERIC_META.iter().map(|s| s.to_string()));
        writeln!(w, "{}", header.join(","))?;
        for (i, l) in self.labels.iter().enumerate() {
            let mut line = String::new();
            for v in self.rssi(i) {
                line.push_str(&format!("{v:?},"));
            }
            line.push_str(&format!(
                "{:?},{:?},{},{},{}",
                l.x, l.y, l.floor, l.building, l.timestamp
            ));
            writeln!(w, "{line}")?;
        }
        w.flush()
    }

    /// Writes the UJIIndoorLoc layout, encoding `fill` readings as the
    /// sentinel. Columns the dataset does not track are written as 0.
    pub fn write_uji(&self, path: impl AsRef<Path>, fill: f64) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_uji_to(&mut w, fill).map_err(|e| Error::io(path, e))
    }

    pub fn write_uji_to<W: Write>(&self, w: &mut W, fill: f64) -> std::io::Result<()> {
        let mut header = self.column_ids.clone();
        header.extend(UJI_META.iter().map(|s| s.to_string()));
        writeln!(w, "{}", header.join(","))?;
        for (i, l) in self.labels.iter().enumerate() {
            let mut line = String::new();
            for &v in self.rssi(i) {
                if v == fill {
                    line.push_str("100,");
                } else {
                    line.push_str(&format!("{v:?},"));
                }
            }
            line.push_str(&format!(
                "{:?},{:?},{},{},0,0,0,0,{}",
                l.x, l.y, l.floor, l.building, l.timestamp
            ));
            writeln!(w, "{line}")?;
        }
        w.flush()
    }
}

pub(crate) fn min_max(v: f64, fill: f64) -> f64 {
    ((v - fill) / -fill).clamp(0.0, 1.0)
}

fn parse_cell(row: usize, header: &str, cell: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        column: header.to_string(),
        message: format!("non-numeric value {cell:?}"),
    })
}

fn parse_int<T: std::str::FromStr>(row: usize, header: &str, cell: &str) -> Result<T> {
    let v = parse_cell(row, header, cell)?;
    if v.fract() != 0.0 || v < 0.0 {
        return Err(Error::Parse {
            row,
            column: header.to_string(),
            message: format!("expected a non-negative integer, got {cell:?}"),
        });
    }
    format!("{v:.0}").parse::<T>().map_err(|_| Error::Parse {
        row,
        column: header.to_string(),
        message: format!("integer out of range: {cell:?}"),
    })
}

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn read_header(rdr: &mut csv::Reader<File>) -> Result<Vec<String>> {
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::Parse {
            row: 0,
            column: String::new(),
            message: "missing header row".into(),
        });
    }
    Ok(header)
}

/// Loads a UJIIndoorLoc CSV (training or validation file).
pub fn load_uji(path: impl AsRef<Path>, fill: f64) -> Result<FingerprintDataset> {
    let path = path.as_ref();
    let mut rdr = open_csv(path)?;
    let header = read_header(&mut rdr)?;
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut meta = [0usize; 4];
    for (slot, name) in meta.iter_mut().zip(UJI_REQUIRED) {
        *slot = find(name).ok_or_else(|| Error::Parse {
            row: 0,
            column: name.to_string(),
            message: "required metadata column missing from header".into(),
        })?;
    }
    let ts_col = find("TIMESTAMP");
    let n_waps = meta[0];
    if n_waps == 0 {
        return Err(Error::Dataset("no WAP columns precede LONGITUDE".into()));
    }
    let column_ids = header[..n_waps].to_vec();

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        for (j, cell) in rec.iter().take(n_waps).enumerate() {
            data.push(parse_cell(row, &header[j], cell)?);
        }
        let cell = |c: usize| rec.get(c).unwrap_or("");
        labels.push(Label {
            x: parse_cell(row, &header[meta[0]], cell(meta[0]))?,
            y: parse_cell(row, &header[meta[1]], cell(meta[1]))?,
            floor: parse_int(row, &header[meta[2]], cell(meta[2]))?,
            building: parse_int(row, &header[meta[3]], cell(meta[3]))?,
            timestamp: match ts_col {
                Some(c) => parse_int(row, &header[c], cell(c))?,
                None => 0,
            },
        });
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            row: 1,
            column: String::new(),
            message: "no data rows".into(),
        });
    }
    let features = RowMatrix::new(labels.len(), n_waps, data)?;
    let mut ds = FingerprintDataset::new(features, labels, column_ids, false)?;
    ds.impute(fill)?;
    Ok(ds)
}

/// Loads the generic `wap_<id>,...,x,y,floor,building,timestamp` layout.
pub fn load_generic(path: impl AsRef<Path>, fill: f64) -> Result<FingerprintDataset> {
    let path = path.as_ref();
    let mut rdr = open_csv(path)?;
    let header = read_header(&mut rdr)?;
    let wap_cols: Vec<usize> = (0..header.len())
        .filter(|&j| header[j].starts_with("wap_"))
        .collect();
    if wap_cols.is_empty() {
        return Err(Error::Dataset("no wap_<id> columns in header".into()));
    }
    let mut meta = [usize::MAX; 5];
    for (slot, name) in meta.iter_mut().zip(GENERIC_META) {
        if let Some(c) = header.iter().position(|h| h == name) {
            *slot = c;
        } else if name != "timestamp" {
            return Err(Error::Parse {
                row: 0,
                column: name.to_string(),
                message: "required metadata column missing from header".into(),
            });
        }
    }
    let column_ids: Vec<String> = wap_cols.iter().map(|&j| header[j]["wap_".len()..].to_string()).collect();

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        for &j in &wap_cols {
            let cell = rec.get(j).unwrap_or("").trim();
            data.push(if cell.is_empty() {
                SENTINEL
            } else {
                parse_cell(row, &header[j], cell)?
            });
        }
        let cell = |c: usize| rec.get(c).unwrap_or("");
        labels.push(Label {
            x: parse_cell(row, "x", cell(meta[0]))?,
            y: parse_cell(row, "y", cell(meta[1]))?,
            floor: parse_int(row, "floor", cell(meta[2]))?,
            building: parse_int(row, "building", cell(meta[3]))?,
            timestamp: if meta[4] == usize::MAX || cell(meta[4]).trim().is_empty() {
                0
            } else {
                parse_cell(row, "timestamp", cell(meta[4]))? as i64
            },
        });
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            row: 1,
            column: String::new(),
            message: "no data rows".into(),
        });
    }
    let features = RowMatrix::new(labels.len(), column_ids.len(), data)?;
    let mut ds = FingerprintDataset::new(features, labels, column_ids, false)?;
    ds.impute(fill)?;
    Ok(ds)
}

/// Loads either layout, choosing by header: a `LONGITUDE` column means UJI.
pub fn load_any(path: impl AsRef<Path>, fill: f64) -> Result<FingerprintDataset> {
    let path = path.as_ref();
    let mut rdr = open_csv(path)?;
    let header = read_header(&mut rdr)?;
    if header.iter().any(|h| h.eq_ignore_ascii_case("LONGITUDE")) {
        load_uji(path, fill)
    } else {
        load_generic(path, fill)
    }
}
