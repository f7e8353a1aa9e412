//! Single-floor localization node: serves queries from an immutable model
//! snapshot, buffers labelled samples and retrains on demand.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::dataset::{impute_reading, load_any, FingerprintDataset, RssiSample};
use crate::error::Error;
use crate::locate::{FloorLocalizer, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum NodeError {
    #[error("no model has been trained yet")]
    Unavailable,
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl NodeError {
    pub fn status(&self) -> StatusCode {
        match self {
            NodeError::Unavailable => StatusCode::SERVICE_UNAVAILABLE,
            NodeError::BadRequest(_) => StatusCode::BAD_REQUEST,
            NodeError::Training(_) | NodeError::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for NodeError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

type NodeResult<T> = std::result::Result<T, NodeError>;

/// Where the node sits and which floor it serves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeIdentity {
    pub id: String,
    pub building: u32,
    pub floor: u32,
    pub location: (f64, f64),
}

/// A trained model together with the generation number it was published as.
#[derive(Debug)]
pub struct Snapshot {
    pub generation: u64,
    pub localizer: FloorLocalizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocateResponse {
    pub x: f64,
    pub y: f64,
    pub sd_x: f64,
    pub sd_y: f64,
    pub floor: u32,
    pub building: u32,
    /// Generation of the snapshot that produced this answer.
    pub snapshot: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrainResponse {
    pub train_count: usize,
    pub fit_seconds: f64,
    pub sparsity: f64,
    pub snapshot: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub id: String,
    pub building: u32,
    pub floor: u32,
    pub location: (f64, f64),
    pub n_waps: usize,
    pub trained_at: Option<u64>,
    pub train_count: usize,
    pub sparsity: Option<f64>,
    pub pending: usize,
    pub snapshot: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
struct LocateRequest {
    rssi: Vec<f64>,
}

/// Everything needed to bring a node back with the same answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub identity: NodeIdentity,
    pub train_config: TrainConfig,
    pub training: FingerprintDataset,
    pub pending: Vec<RssiSample>,
    pub generation: Option<u64>,
    pub trained_at: Option<u64>,
}

pub struct NodeService {
    identity: NodeIdentity,
    column_ids: Vec<String>,
    train_config: RwLock<TrainConfig>,
    active: RwLock<Option<Arc<Snapshot>>>,
    pending: Mutex<Vec<RssiSample>>,
    /// Accumulated training data; holding this lock is what makes a retrain exclusive.
    training: Mutex<FingerprintDataset>,
    next_generation: AtomicU64,
    retraining: AtomicBool,
    fit_delay: Option<Duration>,
    retrain_every: Option<usize>,
}

impl NodeService {
    /// An untrained node whose scans have the given column layout.
    pub fn new(identity: NodeIdentity, column_ids: Vec<String>, cfg: TrainConfig) -> Self {
        let training = FingerprintDataset::from_samples(&[], column_ids.clone(), cfg.fill)
            .expect("an empty dataset is always valid");
        Self {
            identity,
            column_ids,
            train_config: RwLock::new(cfg),
            active: RwLock::new(None),
            pending: Mutex::new(Vec::new()),
            training: Mutex::new(training),
            next_generation: AtomicU64::new(1),
            retraining: AtomicBool::new(false),
            fit_delay: None,
            retrain_every: None,
        }
    }

    /// A node trained on `data`, which must cover exactly the node's floor.
    pub fn bootstrap(identity: NodeIdentity, data: FingerprintDataset, cfg: TrainConfig) -> NodeResult<Self> {
        let svc = Self::new(identity, data.column_ids().to_vec(), cfg);
        svc.check_floor(&data)?;
        *svc.training.lock().unwrap() = data;
        svc.retrain()?;
        Ok(svc)
    }

    /// Sleeps for `delay` inside every fit, after the data has been drained.
    pub fn with_fit_delay(mut self, delay: Duration) -> Self {
        self.fit_delay = Some(delay);
        self
    }

    /// Starts a background retrain once `n` samples are pending.
    pub fn with_retrain_every(mut self, n: usize) -> Self {
        self.retrain_every = (n > 0).then_some(n);
        self
    }

    pub fn identity(&self) -> &NodeIdentity {
        &self.identity
    }

    pub fn n_waps(&self) -> usize {
        self.column_ids.len()
    }

    /// Replaces the configuration used by subsequent retrains.
    pub fn set_train_config(&self, cfg: TrainConfig) {
        *self.train_config.write().unwrap() = cfg;
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.active.read().unwrap().clone()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.lock().unwrap().len()
    }

    fn check_floor(&self, data: &FingerprintDataset) -> NodeResult<()> {
        let own = (self.identity.building, self.identity.floor);
        match data.floors().iter().find(|&&bf| bf != own) {
            Some(&(b, f)) => Err(NodeError::BadRequest(format!(
                "sample from building {b} floor {f} sent to node for building {} floor {}",
                own.0, own.1
            ))),
            None => Ok(()),
        }
    }

    fn clean_scan(&self, rssi: &[f64]) -> NodeResult<Vec<f64>> {
        if rssi.len() != self.n_waps() {
            return Err(NodeError::BadRequest(format!(
                "expected {} RSSI values, got {}",
                self.n_waps(),
                rssi.len()
            )));
        }
        let fill = self.train_config.read().unwrap().fill;
        rssi.iter()
            .map(|&v| impute_reading(v, fill).ok_or_else(|| NodeError::BadRequest(format!("invalid RSSI {v}"))))
            .collect()
    }

    pub fn handle_locate(&self, rssi: &[f64]) -> NodeResult<LocateResponse> {
        let snap = self.snapshot().ok_or(NodeError::Unavailable)?;
        let scan = self.clean_scan(rssi)?;
        let p = snap.localizer.predict_position(&scan)?;
        Ok(LocateResponse {
            x: p.x,
            y: p.y,
            sd_x: p.sd_x,
            sd_y: p.sd_y,
            floor: self.identity.floor,
            building: self.identity.building,
            snapshot: snap.generation,
        })
    }

    /// Buffers a labelled sample and returns the number now pending.
    pub fn handle_ingest(&self, sample: RssiSample) -> NodeResult<usize> {
        self.clean_scan(&sample.rssi)?;
        if (sample.building, sample.floor) != (self.identity.building, self.identity.floor) {
            return Err(NodeError::BadRequest(format!(
                "sample from building {} floor {} sent to node for building {} floor {}",
                sample.building, sample.floor, self.identity.building, self.identity.floor
            )));
        }
        if !(sample.x.is_finite() && sample.y.is_finite()) {
            return Err(NodeError::BadRequest("sample coordinates must be finite".into()));
        }
        let mut pending = self.pending.lock().unwrap();
        pending.push(sample);
        Ok(pending.len())
    }

    /// True when enough samples are pending for an automatic retrain.
    pub fn wants_retrain(&self) -> bool {
        self.retrain_every
            .is_some_and(|n| self.pending_len() >= n && !self.retraining.load(Ordering::Acquire))
    }

    /// Fits on prior data plus everything pending at the start of the call,
    /// then publishes the new snapshot. On failure the old snapshot and the
    /// pending buffer are left untouched.
    pub fn retrain(&self) -> NodeResult<RetrainResponse> {
        let mut training = self.training.lock().unwrap();
        self.retraining.store(true, Ordering::Release);
        let result = self.retrain_locked(&mut training);
        self.retraining.store(false, Ordering::Release);
        result
    }

    fn retrain_locked(&self, training: &mut FingerprintDataset) -> NodeResult<RetrainResponse> {
        let cfg = *self.train_config.read().unwrap();
        let drained: Vec<RssiSample> = self.pending.lock().unwrap().clone();
        let fresh = FingerprintDataset::from_samples(&drained, self.column_ids.clone(), cfg.fill)?;
        let data = training.concat(&fresh)?;
        if data.is_empty() {
            return Err(NodeError::Training("no training data".into()));
        }
        if let Some(d) = self.fit_delay {
            std::thread::sleep(d);
        }
        let localizer = FloorLocalizer::train(&data, &cfg).map_err(|e| NodeError::Training(e.to_string()))?;
        let response = self.publish(localizer, None);
        // ingests that arrived during the fit stay pending
        self.pending.lock().unwrap().drain(..drained.len());
        *training = data;
        Ok(response)
    }

    fn publish(&self, localizer: FloorLocalizer, generation: Option<u64>) -> RetrainResponse {
        let generation = generation.unwrap_or_else(|| self.next_generation.fetch_add(1, Ordering::AcqRel));
        self.next_generation.fetch_max(generation + 1, Ordering::AcqRel);
        let response = RetrainResponse {
            train_count: localizer.train_count,
            fit_seconds: localizer.train_seconds,
            sparsity: localizer.sparsity(),
            snapshot: generation,
        };
        let snap = Arc::new(Snapshot { generation, localizer });
        *self.active.write().unwrap() = Some(snap);
        response
    }

    pub fn info(&self) -> NodeInfo {
        let snap = self.snapshot();
        let loc = snap.as_ref().map(|s| &s.localizer);
        NodeInfo {
            id: self.identity.id.clone(),
            building: self.identity.building,
            floor: self.identity.floor,
            location: self.identity.location,
            n_waps: self.n_waps(),
            trained_at: loc.map(|l| l.trained_at),
            train_count: loc.map_or(0, |l| l.train_count),
            sparsity: loc.map(FloorLocalizer::sparsity),
            pending: self.pending_len(),
            snapshot: snap.as_ref().map(|s| s.generation),
        }
    }

    pub fn state(&self) -> NodeState {
        let training = self.training.lock().unwrap();
        let snap = self.snapshot();
        NodeState {
            identity: self.identity.clone(),
            train_config: *self.train_config.read().unwrap(),
            training: training.clone(),
            pending: self.pending.lock().unwrap().clone(),
            generation: snap.as_ref().map(|s| s.generation),
            trained_at: snap.as_ref().map(|s| s.localizer.trained_at),
        }
    }

    /// Rebuilds a node from saved state. Fitting is deterministic, so the
    /// restored snapshot answers exactly as the saved one did.
    pub fn from_state(state: NodeState) -> NodeResult<Self> {
        let svc = Self::new(state.identity, state.training.column_ids().to_vec(), state.train_config);
        *svc.pending.lock().unwrap() = state.pending;
        if let Some(generation) = state.generation {
            let mut loc = FloorLocalizer::train(&state.training, &state.train_config)
                .map_err(|e| NodeError::Training(e.to_string()))?;
            if let Some(t) = state.trained_at {
                loc.trained_at = t;
            }
            svc.publish(loc, Some(generation));
        }
        *svc.training.lock().unwrap() = state.training;
        Ok(svc)
    }

    pub fn save_state(&self, path: impl AsRef<Path>) -> crate::Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_vec(&self.state())?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load_state(path: impl AsRef<Path>) -> NodeResult<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let state: NodeState = serde_json::from_slice(&bytes).map_err(Error::from)?;
        Self::from_state(state)
    }
}

/// JSON configuration for a standalone node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    /// Bootstrap fingerprints (UJI or generic CSV).
    pub dataset: PathBuf,
    pub building: u32,
    pub floor: u32,
    #[serde(default = "default_node_id")]
    pub id: String,
    /// Node position; defaults to the centroid of the bootstrap floor data.
    #[serde(default)]
    pub location: Option<(f64, f64)>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default)]
    pub retrain_every: Option<usize>,
    /// Saved state to resume from, written back after every retrain.
    #[serde(default)]
    pub state_path: Option<PathBuf>,
}

fn default_node_id() -> String {
    "node".into()
}

fn default_host() -> String {
    "127.0.0.1".into()
}

fn default_port() -> u16 {
    8080
}

impl NodeConfig {
    pub fn from_file(path: impl AsRef<Path>) -> crate::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn addr(&self) -> crate::Result<SocketAddr> {
        format!("{}:{}", self.host, self.port)
            .parse()
            .map_err(|e| Error::Config(format!("bad listen address: {e}")))
    }

    /// Resumes from `state_path` when it exists, otherwise trains on the
    /// configured floor of the bootstrap dataset.
    pub fn build(&self) -> NodeResult<NodeService> {
        let svc = match &self.state_path {
            Some(p) if p.exists() => NodeService::load_state(p)?,
            _ => {
                let floor = load_any(&self.dataset, self.train.fill)?.subset(self.building, self.floor);
                if floor.is_empty() {
                    return Err(Error::Empty("bootstrap floor data").into());
                }
                let n = floor.len() as f64;
                let location = self.location.unwrap_or((
                    floor.xs().iter().sum::<f64>() / n,
                    floor.ys().iter().sum::<f64>() / n,
                ));
                let identity = NodeIdentity {
                    id: self.id.clone(),
                    building: self.building,
                    floor: self.floor,
                    location,
                };
                NodeService::bootstrap(identity, floor, self.train)?
            }
        };
        Ok(match self.retrain_every {
            Some(n) => svc.with_retrain_every(n),
            None => svc,
        })
    }
}

#[derive(Clone)]
struct AppState {
    svc: Arc<NodeService>,
    state_path: Option<Arc<PathBuf>>,
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> NodeResult<T> {
    serde_json::from_slice(body).map_err(|e| NodeError::BadRequest(e.to_string()))
}

async fn blocking_retrain(app: AppState) -> NodeResult<RetrainResponse> {
    tokio::task::spawn_blocking(move || {
        let r = app.svc.retrain()?;
        if let Some(p) = &app.state_path {
            if let Err(e) = app.svc.save_state(p.as_path()) {
                log::warn!("could not save node state: {e}");
            }
        }
        Ok(r)
    })
    .await
    .map_err(|e| NodeError::Training(e.to_string()))?
}

async fn locate(State(app): State<AppState>, body: Bytes) -> NodeResult<Json<LocateResponse>> {
    let req: LocateRequest = parse(&body)?;
    Ok(Json(app.svc.handle_locate(&req.rssi)?))
}

async fn ingest(State(app): State<AppState>, body: Bytes) -> NodeResult<Json<serde_json::Value>> {
    let sample: RssiSample = parse(&body)?;
    let pending = app.svc.handle_ingest(sample)?;
    if app.svc.wants_retrain() {
        let bg = app.clone();
        tokio::spawn(async move {
            if let Err(e) = blocking_retrain(bg).await {
                log::warn!("background retrain failed: {e}");
            }
        });
    }
    Ok(Json(serde_json::json!({ "accepted": 1, "pending": pending })))
}

async fn retrain(State(app): State<AppState>) -> NodeResult<Json<RetrainResponse>> {
    Ok(Json(blocking_retrain(app).await?))
}

async fn info(State(app): State<AppState>) -> Json<NodeInfo> {
    Json(app.svc.info())
}

async fn health() -> &'static str {
    "ok"
}

/// HTTP routes for a node; `state_path`, when set, is rewritten after
/// every successful retrain.
pub fn router(svc: Arc<NodeService>, state_path: Option<PathBuf>) -> Router {
    Router::new()
        .route("/locate", post(locate))
        .route("/ingest", post(ingest))
        .route("/retrain", post(retrain))
        .route("/info", get(info))
        .route("/health", get(health))
        .with_state(AppState {
            svc,
            state_path: state_path.map(Arc::new),
        })
}

/// Serves `router` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    router: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelConfig;
    use crate::oracles::{gen_synthetic, SyntheticSpec};

    fn data() -> (FingerprintDataset, FingerprintDataset) {
        let spec = SyntheticSpec {
            n_rps: 25,
            samples_per_rp: 2,
            n_waps: 10,
            ..Default::default()
        };
        let mut p = gen_synthetic(&spec, 2).unwrap();
        let second = p.pop().unwrap();
        (p.pop().unwrap(), second)
    }

    fn identity() -> NodeIdentity {
        NodeIdentity {
            id: "n0".into(),
            building: 0,
            floor: 0,
            location: (20.0, 15.0),
        }
    }

    fn cfg() -> TrainConfig {
        TrainConfig::sparse(KernelConfig::default(), 50.0, 3)
    }

    #[test]
    fn untrained_node_is_unavailable() {
        let (d, _) = data();
        let svc = NodeService::new(identity(), d.column_ids().to_vec(), cfg());
        let e = svc.handle_locate(d.rssi(0)).unwrap_err();
        assert_eq!(e.status(), StatusCode::SERVICE_UNAVAILABLE);
        assert!(svc.retrain().is_err());
        assert!(svc.snapshot().is_none());
    }

    #[test]
    fn locate_is_deterministic_and_finite() {
        let (d, _) = data();
        let svc = NodeService::bootstrap(identity(), d.clone(), cfg()).unwrap();
        let a = svc.handle_locate(d.rssi(3)).unwrap();
        let b = svc.handle_locate(d.rssi(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.x.is_finite() && a.y.is_finite() && a.sd_x > 0.0 && a.sd_y > 0.0);
        let bad = svc.handle_locate(&[-50.0; 3]).unwrap_err();
        assert_eq!(bad.status(), StatusCode::BAD_REQUEST);
        assert_eq!(svc.handle_locate(&vec![5.0; 10]).unwrap_err().status(), StatusCode::BAD_REQUEST);
    }

    #[test]
    fn ingest_then_retrain_grows_training_set() {
        let (d, extra) = data();
        let svc = NodeService::bootstrap(identity(), d.clone(), cfg()).unwrap();
        let r0 = svc.retrain().unwrap();
        assert_eq!(r0.train_count, d.len());
        for i in 0..10 {
            assert_eq!(svc.handle_ingest(extra.sample(i)).unwrap(), i + 1);
        }
        let mut wrong = extra.sample(0);
        wrong.rssi.pop();
        assert!(svc.handle_ingest(wrong).is_err());
        let mut other_floor = extra.sample(0);
        other_floor.floor = 1;
        assert!(svc.handle_ingest(other_floor).is_err());
        assert_eq!(svc.pending_len(), 10);
        let r = svc.retrain().unwrap();
        assert_eq!(r.train_count, d.len() + 10);
        assert!(r.snapshot > r0.snapshot);
        assert_eq!(svc.pending_len(), 0);
    }

    #[test]
    fn failed_retrain_keeps_old_snapshot_and_pending() {
        let (d, extra) = data();
        let svc = NodeService::bootstrap(identity(), d.clone(), cfg()).unwrap();
        let before = svc.handle_locate(d.rssi(0)).unwrap();
        svc.handle_ingest(extra.sample(0)).unwrap();
        let mut broken = cfg();
        broken.kernel.length_scale = -1.0;
        svc.set_train_config(broken);
        let e = svc.retrain().unwrap_err();
        assert!(matches!(e, NodeError::Training(_)));
        assert_eq!(svc.handle_locate(d.rssi(0)).unwrap(), before);
        assert_eq!(svc.pending_len(), 1);
        assert_eq!(svc.info().train_count, d.len());
    }

    #[test]
    fn restored_state_answers_identically() {
        let (d, extra) = data();
        let svc = NodeService::bootstrap(identity(), d.clone(), cfg()).unwrap();
        for i in 0..5 {
            svc.handle_ingest(extra.sample(i)).unwrap();
        }
        svc.retrain().unwrap();
        svc.handle_ingest(extra.sample(7)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        svc.save_state(&path).unwrap();
        let back = NodeService::load_state(&path).unwrap();
        assert_eq!(back.info(), svc.info());
        for i in 10..20 {
            assert_eq!(back.handle_locate(extra.rssi(i)).unwrap(), svc.handle_locate(extra.rssi(i)).unwrap());
        }
    }
}
