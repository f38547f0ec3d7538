use std::path::Path;

use serde::Serialize;

use koopman_core::control::{run_mpc_loop, run_pcontrol_loop, RunError, RunLog};
use koopman_core::envs::{Environment, Sensor};
use koopman_core::koopman::load_checkpoint;

use crate::config::RunConfig;
use crate::manifest::ManifestBuilder;

#[derive(Serialize)]
struct MpcRunInfo {
    r_value: f64,
    non_converged_steps: usize,
    final_state: Vec<f64>,
}

fn write_log_and_sidecar(
    log: &RunLog,
    log_path: &Path,
    config_bytes: &[u8],
) -> Result<(), String> {
    std::fs::write(log_path, log.to_csv()).map_err(|e| e.to_string())?;
    // Config echoed next to the log.
    let mut sidecar = log_path.as_os_str().to_owned();
    sidecar.push(".config.json");
    std::fs::write(std::path::PathBuf::from(sidecar), config_bytes).map_err(|e| e.to_string())?;
    // Validation: the log must parse back.
    let text = std::fs::read_to_string(log_path).map_err(|e| e.to_string())?;
    RunLog::from_csv(&text).map_err(|e| format!("log validation failed: {e}"))?;
    Ok(())
}

pub fn run_mpc(config: &RunConfig, config_bytes: &[u8], out_dir: &Path) -> Result<(), String> {
    let env = config.env.as_ref().ok_or("config needs an `env` section")?;
    let section = config.mpc.as_ref().ok_or("config needs an `mpc` section")?;
    let mut manifest = ManifestBuilder::start("mpc", config.seed, config_bytes);

    let (model, _) = load_checkpoint(&section.checkpoint).map_err(|e| e.to_string())?;
    let sensor = Sensor {
        phase: section.sensor_phase,
    };
    let x0 = section
        .initial_state
        .clone()
        .unwrap_or_else(|| env.default_initial_state());

    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let log_path = out_dir.join("mpc_log.csv");

    match run_mpc_loop(env, &model, &section.config, &sensor, &x0, section.steps) {
        Ok(run) => {
            write_log_and_sidecar(&run.log, &log_path, config_bytes)?;
            let info = MpcRunInfo {
                r_value: run.r_value,
                non_converged_steps: run.non_converged_steps,
                final_state: run.final_state,
            };
            let info_path = out_dir.join("run_info.json");
            std::fs::write(
                &info_path,
                serde_json::to_string_pretty(&info).expect("serializable"),
            )
            .map_err(|e| e.to_string())?;
            manifest.record_output(&log_path);
            manifest.record_output(&info_path);
            manifest.write(out_dir).map_err(|e| e.to_string())?;
            let last = run.log.rows.last().expect("non-empty run");
            println!(
                "mpc: {} steps, final residual {:.6e}, input penalty {:.3e}",
                run.log.rows.len(),
                last.residual,
                run.r_value
            );
            Ok(())
        }
        Err(RunError::Diverged {
            step,
            message,
            partial,
        }) => {
            write_log_and_sidecar(&partial, &log_path, config_bytes)?;
            Err(format!(
                "mpc run diverged at step {step} ({message}); partial log saved to {}",
                log_path.display()
            ))
        }
        Err(RunError::Core(e)) => Err(e.to_string()),
    }
}

pub fn run_pctl(config: &RunConfig, config_bytes: &[u8], out_dir: &Path) -> Result<(), String> {
    let env = config.env.as_ref().ok_or("config needs an `env` section")?;
    let section = config.pctl.as_ref().ok_or("config needs a `pctl` section")?;
    let mut manifest = ManifestBuilder::start("pctl", config.seed, config_bytes);

    let x0 = section
        .initial_state
        .clone()
        .unwrap_or_else(|| env.default_initial_state());

    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let log_path = out_dir.join("pctl_log.csv");

    match run_pcontrol_loop(env, &section.config, &x0, section.steps) {
        Ok(log) => {
            write_log_and_sidecar(&log, &log_path, config_bytes)?;
            manifest.record_output(&log_path);
            manifest.write(out_dir).map_err(|e| e.to_string())?;
            let last = log.rows.last().expect("non-empty run");
            println!(
                "pctl: {} steps, final residual {:.6e}",
                log.rows.len(),
                last.residual
            );
            Ok(())
        }
        Err(RunError::Diverged {
            step,
            message,
            partial,
        }) => {
            write_log_and_sidecar(&partial, &log_path, config_bytes)?;
            Err(format!(
                "pctl run diverged at step {step} ({message}); partial log saved to {}",
                log_path.display()
            ))
        }
        Err(RunError::Core(e)) => Err(e.to_string()),
    }
}
