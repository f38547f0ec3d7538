// scratch: tune the oracle experiment (restart design, fast-dynamics scale)
use koopman_core::baselines::{dmd_fit, dmd_prediction_error_series};
use koopman_core::envs::{generate_restart_rollouts, stagger, OracleSystem, RestartPlan};
use koopman_core::koopman::*;
use koopman_core::rng::SplitMix64;

fn main() {
    let env = OracleSystem { mu: -0.05, lambda: -0.5, dt: 0.1 };
    let seq_len = 32usize;
    let fit_window = 16usize;
    let horizon = 128usize;
    let test_len = fit_window + horizon;

    let plan = RestartPlan {
        restarts: 40,
        snapshots_per_restart: 212,
        base_state: vec![1.2, 0.0],
        jitter: vec![0.4, 0.8],
        seed: 42,
    };
    let rollouts = generate_restart_rollouts(&env, None, &plan).unwrap();
    let (train_rollouts, test_rollouts) = rollouts.split_at(20);

    let mut pool: Vec<SnapshotSequence> = Vec::new();
    for r in train_rollouts {
        pool.extend(stagger(r, seq_len));
    }
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    let mut rng = SplitMix64::new(42).fork("subsample");
    rng.shuffle(&mut idx);
    let mut selected: Vec<usize> = idx.into_iter().take(400).collect();
    selected.sort_unstable();
    let train_set: Vec<SnapshotSequence> = selected.iter().map(|&i| pool[i].clone()).collect();

    // One held-out window per held-out segment, from its start.
    let test_set: Vec<SnapshotSequence> =
        test_rollouts.iter().map(|r| r.window(0, test_len)).collect();
    println!("train pool {} test windows {}", pool.len(), test_set.len());

    let dmd = dmd_fit(&train_set).unwrap();
    let dmd_series: Vec<Vec<f64>> = test_set
        .iter()
        .map(|s| dmd_prediction_error_series(&dmd, s, fit_window, horizon).unwrap())
        .collect();
    let dmd_overall: f64 = dmd_series.iter().flat_map(|s| s.iter()).sum::<f64>()
        / (dmd_series.len() * horizon) as f64;
    println!("dmd mean rel L1: {:.4e}", dmd_overall);

    for (lr, epochs, eps) in [
        (1e-3, 600usize, 1e-6),
        (2e-3, 1500, 1e-6),
        (2e-3, 2500, 1e-6),
    ] {
        let config = TrainingConfig {
            sequence_length: seq_len, fit_window, latent_dim: 3,
            hidden_layers: vec![32, 32], learning_rate: lr, l2_weight: 1e-7,
            epochs, batch_size: 16, tikhonov_eps: eps, refit_eps: 1e-9, seed: 42,
        };
        let t0 = std::time::Instant::now();
        let report = train_new(&train_set, &config, TrainObjective::Recursive).unwrap();
        let series = evaluate_sequences(&report.model, &test_set, horizon).unwrap();
        let overall: f64 = series.iter().flat_map(|s| s.iter()).sum::<f64>()
            / (series.len() * horizon) as f64;
        let worst = series
            .iter()
            .map(|s| s.iter().sum::<f64>() / s.len() as f64)
            .fold(0.0f64, f64::max);
        println!(
            "lr {lr} epochs {epochs} eps {eps:.0e}: loss {:.2e} -> {:.2e}, mean rel L1 {:.4e} (worst seq {:.2e}), ratio vs dmd {:.1}, elapsed {:?}",
            report.history[0], report.history.last().unwrap(), overall, worst, dmd_overall / overall, t0.elapsed()
        );
    }
}
