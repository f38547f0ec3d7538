use std::path::Path;

use koopman_core::baselines::train_single_step_variant;
use koopman_core::envs::read_dataset;
use koopman_core::koopman::{save_checkpoint, train_new, TrainError, TrainObjective, TrainReport};

use crate::config::{Objective, RunConfig};
use crate::manifest::ManifestBuilder;

pub fn run(config: &RunConfig, config_bytes: &[u8], out_dir: &Path) -> Result<(), String> {
    let section = config
        .training
        .as_ref()
        .ok_or("config needs a `training` section")?;
    let mut manifest = ManifestBuilder::start("train", config.seed, config_bytes);

    let dataset = read_dataset(&section.dataset).map_err(|e| e.to_string())?;
    // The master seed governs every stream, including initialization and
    // batch order.
    let mut train_config = section.config.clone();
    train_config.seed = config.seed;

    let outcome = match section.objective {
        Objective::Recursive => train_new(
            &dataset.sequences,
            &train_config,
            TrainObjective::Recursive,
        ),
        Objective::SingleStep => train_single_step_variant(&dataset.sequences, &train_config),
    };

    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let checkpoint_path = out_dir.join("checkpoint.json");
    let history_path = out_dir.join("loss_history.csv");

    let write_outputs = |report: &TrainReport| -> Result<(), String> {
        save_checkpoint(&report.model, Some(&train_config), &checkpoint_path)
            .map_err(|e| e.to_string())?;
        let mut csv = String::from("epoch,loss\n");
        for (epoch, loss) in report.history.iter().enumerate() {
            csv.push_str(&format!("{epoch},{loss}\n"));
        }
        std::fs::write(&history_path, csv).map_err(|e| e.to_string())?;
        koopman_core::koopman::load_checkpoint(&checkpoint_path)
            .map_err(|e| format!("checkpoint validation failed: {e}"))?;
        Ok(())
    };

    match outcome {
        Ok(report) => {
            write_outputs(&report)?;
            manifest.record_output(&checkpoint_path);
            manifest.record_output(&history_path);
            // Debug dump of the dynamics matrix from the last fit.
            if let Some(a) = &report.model.last_fit_a {
                let path = out_dir.join("last_fit_a.csv");
                std::fs::write(&path, a.to_csv()).map_err(|e| e.to_string())?;
                manifest.record_output(&path);
            }
            manifest.write(out_dir).map_err(|e| e.to_string())?;
            println!(
                "train: {} epochs, final loss {:.6e}",
                report.history.len(),
                report.history.last().copied().unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Err(TrainError::NanAbort { epoch, last_good }) => {
            // Preserve the last good parameters, then fail loudly.
            write_outputs(&last_good)?;
            Err(format!(
                "training aborted with non-finite loss at epoch {epoch}; last good checkpoint saved to {}",
                checkpoint_path.display()
            ))
        }
        Err(TrainError::Core(e)) => Err(e.to_string()),
    }
}
