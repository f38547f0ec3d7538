use std::path::Path;

use koopman_core::baselines::{dmd_fit, dmd_prediction_error_series};
use koopman_core::envs::read_dataset;
use koopman_core::koopman::{evaluate_sequences, load_checkpoint, metrics_csv};

use crate::config::{EvalSource, RunConfig};
use crate::manifest::ManifestBuilder;

/// Prediction quality on held-out sequences: one metrics CSV per horizon
/// with the shared `step,mean_rel_l1,std_rel_l1` schema.
pub fn run(config: &RunConfig, config_bytes: &[u8], out_dir: &Path) -> Result<(), String> {
    let section = config.eval.as_ref().ok_or("config needs an `eval` section")?;
    let mut manifest = ManifestBuilder::start("eval", config.seed, config_bytes);

    let dataset = read_dataset(&section.dataset).map_err(|e| e.to_string())?;
    if dataset.sequences.len() < section.num_sequences {
        return Err(format!(
            "dataset holds {} sequences, eval needs {}",
            dataset.sequences.len(),
            section.num_sequences
        ));
    }
    let sequences = &dataset.sequences[..section.num_sequences];

    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    for &horizon in &section.horizons {
        let series = match &section.source {
            EvalSource::Checkpoint { path } => {
                let (model, _) = load_checkpoint(path).map_err(|e| e.to_string())?;
                evaluate_sequences(&model, sequences, horizon).map_err(|e| e.to_string())?
            }
            EvalSource::Dmd {
                train_dataset,
                fit_window,
            } => {
                let train = read_dataset(train_dataset).map_err(|e| e.to_string())?;
                let model = dmd_fit(&train.sequences).map_err(|e| e.to_string())?;
                sequences
                    .iter()
                    .map(|seq| dmd_prediction_error_series(&model, seq, *fit_window, horizon))
                    .collect::<koopman_core::Result<Vec<_>>>()
                    .map_err(|e| e.to_string())?
            }
        };
        let path = out_dir.join(format!("metrics_h{horizon:03}.csv"));
        std::fs::write(&path, metrics_csv(&series)).map_err(|e| e.to_string())?;
        // Validation: row per step plus header.
        let written = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        if written.lines().count() != horizon + 1 {
            return Err(format!("metrics file {} has the wrong row count", path.display()));
        }
        manifest.record_output(&path);
    }
    manifest.write(out_dir).map_err(|e| e.to_string())?;
    println!(
        "eval: {} sequences, horizons {:?}",
        section.num_sequences, section.horizons
    );
    Ok(())
}
