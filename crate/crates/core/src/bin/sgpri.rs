use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sgpri::baseline::{evaluate_knn, KnnConfig};
use sgpri::bench::{run_bench, run_dynamic, write_dynamic_csv, BenchConfig, DynamicModel, DynamicScenario};
use sgpri::bundle::LocalizerBundle;
use sgpri::dataset::{load_any, FingerprintDataset, SplitMode, DEFAULT_FILL};
use sgpri::kernel::KernelConfig;
use sgpri::locate::{evaluate, evaluate_floor, BuildingMode, Deployment, FloorAssigner, InducingPlan, TrainConfig};
use sgpri::node::{router, serve, NodeConfig};
use sgpri::oracles::SyntheticSpec;

#[derive(Parser)]
#[command(name = "sgpri", version, about = "Wi-Fi fingerprint localization with sparse GPs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Merge, filter and split raw fingerprint files
    Prep(PrepArgs),
    /// Fit per-floor localizers and save a refit bundle
    Train(TrainArgs),
    /// Score a model on test data
    Eval(EvalArgs),
    /// Error and fit-time table for GP, SGP-RI and k-NN
    Bench(BenchArgs),
    /// Rolling-retraining scenario
    Dynamic(DynamicArgs),
    /// Run a localization node over HTTP
    Serve(ServeArgs),
}

#[derive(Args)]
struct DataArgs {
    /// UJIIndoorLoc or generic CSV
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    building: Option<u32>,
    #[arg(long)]
    floor: Option<u32>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Target inducing-set size in percent; a comma-separated list for bench
    #[arg(long, value_delimiter = ',')]
    sparsity: Option<Vec<f64>>,
    /// Column count the similarity filter stops at
    #[arg(long)]
    target_v: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    cell_size: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long, default_value_t = 10.0)]
    length_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_var: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit exact GPs instead of sparse ones
    #[arg(long)]
    exact: bool,
    #[arg(long, value_enum, default_value_t = ModelKind::Gp)]
    model: ModelKind,
    /// Neighbours for the k-NN model
    #[arg(long, default_value_t = 20)]
    k: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Gp,
    Knn,
}

impl ModelArgs {
    fn kernel(&self) -> KernelConfig {
        KernelConfig {
            alpha: self.alpha,
            length_scale: self.length_scale,
            noise_var: self.noise_var,
            ..Default::default()
        }
    }

    fn single_sparsity(&self) -> anyhow::Result<f64> {
        match self.sparsity.as_deref() {
            None => Ok(50.0),
            Some([p]) => Ok(*p),
            Some(_) => bail!("--sparsity takes a single value here"),
        }
    }

    fn train_config(&self) -> anyhow::Result<TrainConfig> {
        let inducing = if self.exact {
            InducingPlan::Exact
        } else {
            InducingPlan::Sparsity {
                percent: self.single_sparsity()?,
                cell_size: self.cell_size,
                seed: self.seed,
            }
        };
        Ok(TrainConfig {
            kernel: self.kernel(),
            target_v: self.target_v,
            inducing,
            ..Default::default()
        })
    }
}

#[derive(Args)]
struct PrepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Second file merged into the first, e.g. the UJI validation set
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Split by time instead: rows before this timestamp train
    #[arg(long)]
    boundary: Option<i64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for train.csv, test.csv and split.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Bundle path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    KnownBuilding,
    StrongestNode,
}

#[derive(Args)]
struct EvalArgs {
    /// Test data
    #[command(flatten)]
    data: DataArgs,
    /// Bundle written by `train`
    #[arg(long, conflicts_with = "train")]
    model_file: Option<PathBuf>,
    /// Fit from this training file instead of a bundle
    #[arg(long)]
    train: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value_t = Mode::KnownBuilding)]
    mode: Mode,
    /// Output directory for metrics.json and cdf.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Held-out file; without it the data is split 80/20 with --seed
    #[arg(long)]
    test: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Worker threads during timing; defaults to all cores
    #[arg(long)]
    threads: Option<usize>,
    /// Bench CSV path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DynamicArgs {
    /// Time-stamped generic CSV; synthetic drift data when absent
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    building: Option<u32>,
    #[arg(long)]
    floor: Option<u32>,
    /// First test timestamp
    #[arg(long)]
    boundary: Option<i64>,
    #[arg(long, default_value_t = 5.0)]
    group_days: f64,
    #[arg(long, default_value_t = 4)]
    groups: usize,
    /// Synthetic per-period RSSI bias in dBm
    #[arg(long, default_value_t = 3.0)]
    drift: f64,
    #[command(flatten)]
    model: ModelArgs,
    /// CSV of per-period errors
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// JSON node configuration; the flags below are used without it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    building: u32,
    #[arg(long, default_value_t = 0)]
    floor: u32,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long)]
    retrain_every: Option<usize>,
    /// State file to resume from and save after each retrain
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
}

fn load(data: &DataArgs) -> anyhow::Result<FingerprintDataset> {
    let ds = load_any(&data.dataset, DEFAULT_FILL)?;
    let keep: Vec<usize> = (0..ds.len())
        .filter(|&i| {
            let l = ds.labels()[i];
            data.building.is_none_or(|b| l.building == b) && data.floor.is_none_or(|f| l.floor == f)
        })
        .collect();
    let ds = ds.select_rows(&keep);
    if ds.is_empty() {
        bail!("no rows of {} match the building/floor filter", data.dataset.display());
    }
    Ok(ds)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn prep(a: PrepArgs) -> anyhow::Result<()> {
    let mut ds = load(&a.data)?;
    if let Some(v) = &a.validation {
        let other = load(&DataArgs {
            dataset: v.clone(),
            building: a.data.building,
            floor: a.data.floor,
        })?;
        ds = ds.concat(&other)?;
    }
    let mode = match a.boundary {
        Some(boundary) => SplitMode::Temporal { boundary },
        None => SplitMode::Random {
            fraction: a.train_fraction,
            seed: a.seed,
        },
    };
    let (train, test) = ds.split(mode)?;
    std::fs::create_dir_all(&a.out)?;
    train.write_generic(a.out.join("train.csv"))?;
    test.write_generic(a.out.join("test.csv"))?;
    let record = serde_json::json!({
        "sources": [a.data.dataset, a.validation],
        "building": a.data.building,
        "floor": a.data.floor,
        "split": match mode {
            SplitMode::Temporal { boundary } => serde_json::json!({ "temporal": boundary }),
            SplitMode::Random { fraction, seed } => serde_json::json!({ "random": fraction, "seed": seed }),
        },
        "n_train": train.len(),
        "n_test": test.len(),
    });
    std::fs::write(a.out.join("split.json"), serde_json::to_string_pretty(&record)?)?;
    println!("{}", record);
    Ok(())
}

fn train(a: TrainArgs) -> anyhow::Result<()> {
    let bundle = LocalizerBundle {
        config: a.model.train_config()?,
        training: load(&a.data)?,
    };
    let models = bundle.fit()?;
    bundle.save(&a.out)?;
    for ((b, f), m) in &models {
        println!(
            "{}",
            serde_json::json!({
                "building": b,
                "floor": f,
                "train_count": m.train_count,
                "waps_kept": m.columns.kept.len(),
                "sparsity": m.sparsity(),
                "train_seconds": m.train_seconds,
            })
        );
    }
    Ok(())
}

fn eval(a: EvalArgs) -> anyhow::Result<()> {
    let test = load(&a.data)?;
    let bundle = match (&a.model_file, &a.train) {
        (Some(p), _) => LocalizerBundle::load(p)?,
        (None, Some(t)) => LocalizerBundle {
            config: a.model.train_config()?,
            training: load_any(t, DEFAULT_FILL)?,
        },
        (None, None) => bail!("eval needs --model-file or --train"),
    };
    let train = &bundle.training;
    let mode = match a.mode {
        Mode::KnownBuilding => BuildingMode::KnownBuilding,
        Mode::StrongestNode => BuildingMode::StrongestNode,
    };
    let knn = KnnConfig { k: a.model.k };
    let single = train.floors().len() == 1 && test.floors() == train.floors();
    let assigner = || -> anyhow::Result<FloorAssigner> {
        Ok(FloorAssigner::new(Deployment::from_beacons(train)?, train.clone())?)
    };
    let metrics = match (a.model.model, single) {
        (ModelKind::Knn, _) => evaluate_knn(train, &knn, &assigner()?, &test, mode)?,
        (ModelKind::Gp, true) => {
            let models = bundle.fit()?;
            evaluate_floor(models.values().next().unwrap(), &test)?
        }
        (ModelKind::Gp, false) => evaluate(&bundle.fit()?, &assigner()?, &test, mode)?,
    };
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("metrics.json"), metrics.to_json()?)?;
    metrics.write_cdf_csv(&mut create(&a.out.join("cdf.csv"))?)?;
    println!(
        "n={} mean_2d={:.3} mean_3d={:.3} building_hit={:.3} floor_hit={:.3}",
        metrics.n, metrics.mean_2d, metrics.mean_3d, metrics.building_hit, metrics.floor_hit
    );
    Ok(())
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    if let Some(n) = a.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let data = load(&a.data)?;
    let (train, test) = match &a.test {
        Some(t) => (
            data,
            load(&DataArgs {
                dataset: t.clone(),
                building: a.data.building,
                floor: a.data.floor,
            })?,
        ),
        None => data.split(SplitMode::Random {
            fraction: 0.8,
            seed: a.model.seed,
        })?,
    };
    if train.floors().len() != 1 {
        bail!("bench runs on a single floor; pass --building and --floor");
    }
    let sparsities = a.model.sparsity.clone().unwrap_or_else(|| vec![30.0, 40.0, 50.0]);
    let cfg = BenchConfig {
        train: TrainConfig {
            kernel: a.model.kernel(),
            target_v: a.model.target_v,
            ..Default::default()
        },
        cell_size: a.model.cell_size,
        seed: a.model.seed,
        knn: KnnConfig { k: a.model.k },
        repeats: a.repeats,
    };
    let report = run_bench(&train, &test, &sparsities, &cfg)?;
    report.write_csv(&mut create(&a.out)?)?;
    report.write_csv(&mut std::io::stdout())?;
    Ok(())
}

fn dynamic(a: DynamicArgs) -> anyhow::Result<()> {
    let scenario = |retrain| -> anyhow::Result<DynamicScenario> {
        match &a.dataset {
            Some(path) => {
                let ds = load(&DataArgs {
                    dataset: path.clone(),
                    building: a.building,
                    floor: a.floor,
                })?;
                let boundary = a.boundary.context("--boundary is required with --dataset")?;
                let group = (a.group_days * 86_400.0).round() as i64;
                Ok(DynamicScenario::from_timestamps(&ds, boundary, group, a.groups, retrain)?)
            }
            None => {
                let spec = SyntheticSpec {
                    drift_bias: a.drift,
                    seed: a.model.seed,
                    ..Default::default()
                };
                Ok(DynamicScenario::synthetic(&spec, a.groups, retrain)?)
            }
        }
    };
    let gp = DynamicModel::Localizer(a.model.train_config()?);
    let knn = DynamicModel::Knn(KnnConfig { k: a.model.k });
    let series = vec![
        ("SGP-RI static".to_string(), run_dynamic(&scenario(false)?, &gp)?),
        ("SGP-RI retrained".to_string(), run_dynamic(&scenario(true)?, &gp)?),
        ("kNN retrained".to_string(), run_dynamic(&scenario(true)?, &knn)?),
    ];
    write_dynamic_csv(&mut create(&a.out)?, &series)?;
    write_dynamic_csv(&mut std::io::stdout(), &series)?;
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> anyhow::Result<()> {
    let cfg = match &a.config {
        Some(p) => NodeConfig::from_file(p)?,
        None => NodeConfig {
            dataset: a.dataset.clone().context("serve needs --config or --dataset")?,
            building: a.building,
            floor: a.floor,
            id: format!("b{}f{}", a.building, a.floor),
            location: None,
            train: a.model.train_config()?,
            host: "127.0.0.1".into(),
            port: a.port,
            retrain_every: a.retrain_every,
            state_path: a.out.clone(),
        },
    };
    let svc = Arc::new(cfg.build()?);
    let addr = cfg.addr()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("node {} listening on {}", svc.identity().id, listener.local_addr()?);
        let app = router(svc, cfg.state_path.clone());
        serve(listener, app, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        anyhow::Ok(())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match Cli::parse().cmd {
        Cmd::Prep(a) => prep(a),
        Cmd::Train(a) => train(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Bench(a) => bench(a),
        Cmd::Dynamic(a) => dynamic(a),
        Cmd::Serve(a) => serve_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
