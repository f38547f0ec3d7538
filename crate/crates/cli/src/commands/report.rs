use std::path::Path;

use koopman_core::control::{correlation, RunLog};

use crate::config::RunConfig;
use crate::manifest::ManifestBuilder;

struct MetricsFile {
    label: String,
    rows: Vec<(usize, f64, f64)>,
}

fn read_metrics(label: &str, path: &Path) -> Result<MetricsFile, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read metrics {}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != "step,mean_rel_l1,std_rel_l1" {
        return Err(format!(
            "{}: unexpected metrics header '{header}'",
            path.display()
        ));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(format!("{}: bad row {}", path.display(), idx + 2));
        }
        let step = fields[0].trim().parse().map_err(|e| format!("{e}"))?;
        let mean = fields[1].trim().parse().map_err(|e| format!("{e}"))?;
        let std = fields[2].trim().parse().map_err(|e| format!("{e}"))?;
        rows.push((step, mean, std));
    }
    Ok(MetricsFile {
        label: label.to_string(),
        rows,
    })
}

fn read_log(path: &Path) -> Result<RunLog, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read log {}: {e}", path.display()))?;
    RunLog::from_csv(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Steps after the leading run of zero inputs (the warmup) in a run log.
fn controlled_window(log: &RunLog) -> usize {
    log.rows
        .iter()
        .position(|r| r.u != 0.0)
        .unwrap_or(log.rows.len())
}

/// Merge metrics files, residual series, and the input/sensor overlay into
/// plot-ready CSVs plus a key/value summary table.
pub fn run(config: &RunConfig, config_bytes: &[u8], out_dir: &Path) -> Result<(), String> {
    let section = config
        .report
        .as_ref()
        .ok_or("config needs a `report` section")?;
    let mut manifest = ManifestBuilder::start("report", config.seed, config_bytes);
    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let mut summary: Vec<(String, String, f64)> = Vec::new();

    // Error-vs-step table across models.
    if !section.error_metrics.is_empty() {
        let mut out = String::from("model,step,mean_rel_l1,std_rel_l1\n");
        for labeled in &section.error_metrics {
            let metrics = read_metrics(&labeled.label, &labeled.path)?;
            let overall =
                metrics.rows.iter().map(|r| r.1).sum::<f64>() / metrics.rows.len().max(1) as f64;
            summary.push((metrics.label.clone(), "mean_rel_l1".to_string(), overall));
            if let Some(last) = metrics.rows.last() {
                summary.push((metrics.label.clone(), "final_step_rel_l1".to_string(), last.1));
            }
            for (step, mean, std) in &metrics.rows {
                out.push_str(&format!("{},{step},{mean},{std}\n", metrics.label));
            }
        }
        let path = out_dir.join("error_vs_step.csv");
        std::fs::write(&path, out).map_err(|e| e.to_string())?;
        manifest.record_output(&path);
    }

    // Residual-vs-step table from the closed-loop logs.
    let mut residual_out = String::from("label,step,t,residual,latent_cost\n");
    let mut have_residuals = false;
    if let Some(path) = &section.mpc_log {
        let log = read_log(path)?;
        for r in &log.rows {
            residual_out.push_str(&format!(
                "mpc,{},{},{},{}\n",
                r.step, r.t, r.residual, r.latent_cost
            ));
        }
        have_residuals = true;

        let warmup = controlled_window(&log);
        let controlled = &log.rows[warmup..];
        if controlled.len() >= 2 {
            let inputs: Vec<f64> = controlled.iter().map(|r| r.u).collect();
            let scaled_sensor: Vec<f64> = controlled
                .iter()
                .map(|r| -section.overlay_gain * r.sensor)
                .collect();
            let corr = correlation(&inputs, &scaled_sensor).map_err(|e| e.to_string())?;
            summary.push(("mpc".to_string(), "input_sensor_correlation".to_string(), corr));
        }
        let pre: Vec<f64> = log.rows[..warmup.max(1)].iter().map(|r| r.residual).collect();
        let pre_mean = pre.iter().sum::<f64>() / pre.len() as f64;
        let quarter = log.rows.len() / 4;
        let tail: Vec<f64> = log.rows[log.rows.len() - quarter.max(1)..]
            .iter()
            .map(|r| r.residual)
            .collect();
        let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
        summary.push(("mpc".to_string(), "warmup_mean_residual".to_string(), pre_mean));
        summary.push((
            "mpc".to_string(),
            "final_quarter_mean_residual".to_string(),
            tail_mean,
        ));

        // Input/sensor overlay for the phase plot.
        let mut overlay = String::from("step,t,u,scaled_sensor\n");
        for r in &log.rows {
            overlay.push_str(&format!(
                "{},{},{},{}\n",
                r.step,
                r.t,
                r.u,
                -section.overlay_gain * r.sensor
            ));
        }
        let overlay_path = out_dir.join("input_sensor_overlay.csv");
        std::fs::write(&overlay_path, overlay).map_err(|e| e.to_string())?;
        manifest.record_output(&overlay_path);
    }
    for labeled in &section.extra_logs {
        let log = read_log(&labeled.path)?;
        for r in &log.rows {
            residual_out.push_str(&format!(
                "{},{},{},{},{}\n",
                labeled.label, r.step, r.t, r.residual, r.latent_cost
            ));
        }
        let mean = log.rows.iter().map(|r| r.residual).sum::<f64>() / log.rows.len().max(1) as f64;
        summary.push((labeled.label.clone(), "mean_residual".to_string(), mean));
        if let Some(last) = log.rows.last() {
            summary.push((labeled.label.clone(), "final_residual".to_string(), last.residual));
        }
        have_residuals = true;
    }
    if have_residuals {
        let path = out_dir.join("residual_vs_step.csv");
        std::fs::write(&path, residual_out).map_err(|e| e.to_string())?;
        manifest.record_output(&path);
    }

    let mut summary_out = String::from("label,key,value\n");
    for (label, key, value) in &summary {
        summary_out.push_str(&format!("{label},{key},{value}\n"));
    }
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary_out).map_err(|e| e.to_string())?;
    manifest.record_output(&summary_path);
    manifest.write(out_dir).map_err(|e| e.to_string())?;

    println!("report: {} summary rows", summary.len());
    Ok(())
}
