//! A localization node over HTTP: bootstrap, query, ingest, retrain, and
//! inspect, then shut down.
//!
//! ```bash
//! cargo run --example node_service
//! ```

use std::sync::Arc;

use sgpri::node::{router, serve, LocateResponse, NodeIdentity, NodeInfo, NodeService};
use sgpri::oracles::{gen_synthetic, SyntheticSpec};
use sgpri::TrainConfig;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let periods = gen_synthetic(&SyntheticSpec { n_waps: 12, ..Default::default() }, 2)?;
    let identity = NodeIdentity { id: "lobby".into(), building: 0, floor: 0, location: (20.0, 15.0) };
    let svc = Arc::new(NodeService::bootstrap(identity, periods[0].clone(), TrainConfig::default())?);

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(serve(listener, router(svc, None), async {
        let _ = stopped.await;
    }));
    println!("serving on {base}");

    let client = reqwest::Client::new();
    let scan = periods[1].rssi(0).to_vec();
    let before: LocateResponse = client
        .post(format!("{base}/locate"))
        .json(&serde_json::json!({ "rssi": scan }))
        .send()
        .await?
        .json()
        .await?;
    println!("locate: {before:?}");

    for i in 1..=10 {
        client.post(format!("{base}/ingest")).json(&periods[1].sample(i)).send().await?;
    }
    let retrain: serde_json::Value = client.post(format!("{base}/retrain")).send().await?.json().await?;
    println!("retrain: {retrain}");

    let info: NodeInfo = client.get(format!("{base}/info")).send().await?.json().await?;
    println!("info: {info:?}");

    let _ = stop.send(());
    server.await??;
    Ok(())
}
