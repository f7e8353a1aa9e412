//! Rolling retraining under drifting signal strengths: a static model
//! against one that absorbs each test period after scoring it.
//!
//! ```bash
//! cargo run --release --example dynamic_retraining
//! ```

use sgpri::bench::{run_dynamic, write_dynamic_csv, DynamicModel, DynamicScenario};
use sgpri::oracles::SyntheticSpec;
use sgpri::{KnnConfig, TrainConfig};

fn main() -> sgpri::Result<()> {
    let spec = SyntheticSpec { drift_bias: 3.0, ..Default::default() };
    let sgp = DynamicModel::Localizer(TrainConfig::default());
    let knn = DynamicModel::Knn(KnnConfig::default());
    let series = vec![
        ("SGP-RI static".to_string(), run_dynamic(&DynamicScenario::synthetic(&spec, 4, false)?, &sgp)?),
        ("SGP-RI retrained".to_string(), run_dynamic(&DynamicScenario::synthetic(&spec, 4, true)?, &sgp)?),
        ("kNN static".to_string(), run_dynamic(&DynamicScenario::synthetic(&spec, 4, false)?, &knn)?),
        ("kNN retrained".to_string(), run_dynamic(&DynamicScenario::synthetic(&spec, 4, true)?, &knn)?),
    ];
    write_dynamic_csv(&mut std::io::stdout(), &series).expect("stdout");
    Ok(())
}
