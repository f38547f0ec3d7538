use std::path::Path;

use koopman_core::envs::{
    generate_restart_rollouts, simulate, stagger, write_dataset, Dataset, Environment,
    RestartPlan,
};
use koopman_core::koopman::SnapshotSequence;
use koopman_core::rng::SplitMix64;

use crate::config::{DataSection, RunConfig};
use crate::manifest::ManifestBuilder;

/// Simulate the environment and slice the result into a staggered training
/// set plus longer held-out evaluation windows. With one restart this is a
/// single long rollout with a temporal train/test split; with several, the
/// split happens at segment granularity and held-out windows start at the
/// beginnings of held-out segments.
pub fn run(config: &RunConfig, config_bytes: &[u8], out_dir: &Path) -> Result<(), String> {
    let env = config.env.as_ref().ok_or("config needs an `env` section")?;
    let data = config.data.as_ref().ok_or("config needs a `data` section")?;
    let mut manifest = ManifestBuilder::start("gen-data", config.seed, config_bytes);

    if !(0.1..=0.95).contains(&data.train_fraction) {
        return Err("train_fraction must lie in [0.1, 0.95]".to_string());
    }
    let test_len = data.fit_window + data.test_horizon;

    let rollouts: Vec<SnapshotSequence> = if data.restarts <= 1 {
        let inputs = match &data.chirp {
            Some(chirp) => chirp
                .signal(env.dt(), data.total_snapshots.saturating_sub(1))
                .map_err(|e| e.to_string())?,
            None => vec![0.0; data.total_snapshots.saturating_sub(1)],
        };
        let x0 = data
            .initial_state
            .clone()
            .unwrap_or_else(|| env.default_initial_state());
        vec![simulate(env, &x0, &inputs).map_err(|e| e.to_string())?]
    } else {
        if data.total_snapshots % data.restarts != 0 {
            return Err(format!(
                "total_snapshots {} must divide evenly into {} restarts",
                data.total_snapshots, data.restarts
            ));
        }
        let plan = RestartPlan {
            restarts: data.restarts,
            snapshots_per_restart: data.total_snapshots / data.restarts,
            base_state: data
                .initial_state
                .clone()
                .unwrap_or_else(|| env.default_initial_state()),
            jitter: data
                .ic_jitter
                .clone()
                .unwrap_or_else(|| vec![0.0; env.state_dim()]),
            seed: config.seed,
        };
        generate_restart_rollouts(env, data.chirp.as_ref(), &plan).map_err(|e| e.to_string())?
    };

    let rollouts: Vec<SnapshotSequence> = match &data.observation_lift {
        Some(lift) => rollouts
            .iter()
            .map(|r| lift.apply_sequence(r))
            .collect::<koopman_core::Result<_>>()
            .map_err(|e| e.to_string())?,
        None => rollouts,
    };

    let (train_pool, test_windows) = if rollouts.len() == 1 {
        split_single_rollout(&rollouts[0], data, test_len)?
    } else {
        split_segments(&rollouts, data, test_len)?
    };

    if data.train_sequences > train_pool.len() {
        return Err(format!(
            "requested {} training sequences but only {} staggered windows exist",
            data.train_sequences,
            train_pool.len()
        ));
    }
    let mut idx: Vec<usize> = (0..train_pool.len()).collect();
    let mut rng = SplitMix64::new(config.seed).fork("train-subsample");
    rng.shuffle(&mut idx);
    let mut selected: Vec<usize> = idx.into_iter().take(data.train_sequences).collect();
    selected.sort_unstable();
    let train_sequences: Vec<SnapshotSequence> =
        selected.iter().map(|&i| train_pool[i].clone()).collect();

    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let train_path = out_dir.join("train.csv");
    let test_path = out_dir.join("test.csv");
    write_dataset(
        &Dataset::new(train_sequences).map_err(|e| e.to_string())?,
        &train_path,
    )
    .map_err(|e| e.to_string())?;
    write_dataset(
        &Dataset::new(test_windows).map_err(|e| e.to_string())?,
        &test_path,
    )
    .map_err(|e| e.to_string())?;

    // Output validation: both files must read back.
    for path in [&train_path, &test_path] {
        koopman_core::envs::read_dataset(path).map_err(|e| format!("validation failed: {e}"))?;
        manifest.record_output(path);
    }
    manifest.write(out_dir).map_err(|e| e.to_string())?;
    println!(
        "gen-data: wrote {} training and {} held-out sequences",
        data.train_sequences, data.test_sequences
    );
    Ok(())
}

/// Temporal holdout within one rollout: training windows from the leading
/// region, held-out windows spread across the tail.
fn split_single_rollout(
    rollout: &SnapshotSequence,
    data: &DataSection,
    test_len: usize,
) -> Result<(Vec<SnapshotSequence>, Vec<SnapshotSequence>), String> {
    let total = rollout.states.len();
    let train_region_end = ((total as f64) * data.train_fraction).floor() as usize;
    let train_starts = train_region_end.saturating_sub(data.sequence_length);
    if train_starts == 0 {
        return Err(format!(
            "training region of {train_region_end} snapshots cannot hold a window of {} states",
            data.sequence_length + 1
        ));
    }
    let pool: Vec<SnapshotSequence> = (0..train_starts)
        .map(|s| rollout.window(s, data.sequence_length))
        .collect();

    let first = train_region_end;
    let last = total
        .checked_sub(test_len + 1)
        .ok_or("rollout too short for the held-out window length")?;
    if last < first {
        return Err(format!(
            "tail region starting at {first} cannot hold windows of {} states",
            test_len + 1
        ));
    }
    let available = last - first + 1;
    if data.test_sequences == 0 || data.test_sequences > available {
        return Err(format!(
            "requested {} held-out sequences but the tail region offers {available}",
            data.test_sequences
        ));
    }
    let test: Vec<SnapshotSequence> = (0..data.test_sequences)
        .map(|i| {
            let offset = if data.test_sequences == 1 {
                0
            } else {
                i * (available - 1) / (data.test_sequences - 1)
            };
            rollout.window(first + offset, test_len)
        })
        .collect();
    Ok((pool, test))
}

/// Segment-level holdout across restarts: staggered training windows from
/// the leading segments, held-out windows from the starts of the remaining
/// segments (later offsets only when more are requested than segments).
fn split_segments(
    rollouts: &[SnapshotSequence],
    data: &DataSection,
    test_len: usize,
) -> Result<(Vec<SnapshotSequence>, Vec<SnapshotSequence>), String> {
    let segments = rollouts.len();
    let train_segments = (((segments as f64) * data.train_fraction).floor() as usize)
        .clamp(1, segments - 1);
    let mut pool = Vec::new();
    for r in &rollouts[..train_segments] {
        pool.extend(stagger(r, data.sequence_length));
    }
    if pool.is_empty() {
        return Err(format!(
            "segments of {} snapshots cannot hold windows of {} states",
            rollouts[0].states.len(),
            data.sequence_length + 1
        ));
    }

    let held_out = &rollouts[train_segments..];
    let per_segment_starts = rollouts[0]
        .states
        .len()
        .checked_sub(test_len + 1)
        .ok_or("segments too short for the held-out window length")?
        + 1;
    if data.test_sequences > held_out.len() * per_segment_starts {
        return Err(format!(
            "requested {} held-out sequences but only {} are available",
            data.test_sequences,
            held_out.len() * per_segment_starts
        ));
    }
    let mut test = Vec::with_capacity(data.test_sequences);
    'fill: for offset in 0..per_segment_starts {
        for segment in held_out {
            if test.len() == data.test_sequences {
                break 'fill;
            }
            test.push(segment.window(offset, test_len));
        }
    }
    Ok((pool, test))
}
