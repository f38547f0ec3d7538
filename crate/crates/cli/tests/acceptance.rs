//! Acceptance suite: one test per end-to-end claim, each printing a
//! PASS line with its measured numbers (run with `--nocapture` to see
//! them). Trained models are built once and shared across criteria.

use std::sync::OnceLock;
use std::time::Instant;

use koopman_core::baselines::{dmd_fit, dmd_prediction_error_series, train_single_step_variant};
use koopman_core::control::{
    condense_qp, correlation, moving_average, run_mpc_loop, run_pcontrol_loop, solve_box_qp,
    InputPenalty, MpcConfig, PControlConfig, QpProblem,
};
use koopman_core::envs::{
    exact_koopman_operator, generate_restart_rollouts, generate_training_data, lift_observables,
    simulate, stagger, ChirpSchedule, Environment, MeanFieldWake, OracleSystem, RestartPlan,
    Sensor,
};
use koopman_core::koopman::{
    evaluate_sequences, fit_a_forced, prediction_error_series, sequence_loss,
    sequence_loss_with_gradients, train_new, KoopmanModel, Normalization, SnapshotSequence,
    TrainObjective, TrainReport, TrainingConfig,
};
use koopman_core::numerics::{lstsq_min_norm, Matrix};
use koopman_core::rng::SplitMix64;

// ---------------------------------------------------------------- fixtures

/// Invariant-subspace experiment: 40 seeded restarts of the two-dimensional
/// system with observables (x0, x1, x0^2); 20 segments train the model, the
/// other 20 provide one held-out window each. The scale (dt 0.1, lambda
/// -0.5) keeps a 16-step fit window informative and a 128-step horizon
/// spanning several characteristic times.
struct OracleExperiment {
    env: OracleSystem,
    train_set: Vec<SnapshotSequence>,
    test_set: Vec<SnapshotSequence>,
    report: TrainReport,
    train_seconds: f64,
}

const ORACLE_FIT_WINDOW: usize = 16;
const ORACLE_HORIZON: usize = 128;

fn oracle_experiment() -> &'static OracleExperiment {
    static FIXTURE: OnceLock<OracleExperiment> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let env = OracleSystem {
            mu: -0.05,
            lambda: -0.5,
            dt: 0.1,
        };
        let plan = RestartPlan {
            restarts: 40,
            snapshots_per_restart: 212,
            base_state: vec![1.2, 0.0],
            jitter: vec![0.4, 0.8],
            seed: 42,
        };
        let rollouts = generate_restart_rollouts(&env, None, &plan).expect("rollouts");
        let (train_rollouts, test_rollouts) = rollouts.split_at(20);

        let mut pool: Vec<SnapshotSequence> = Vec::new();
        for r in train_rollouts {
            pool.extend(stagger(r, 32));
        }
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        let mut rng = SplitMix64::new(42).fork("subsample");
        rng.shuffle(&mut idx);
        let mut selected: Vec<usize> = idx.into_iter().take(400).collect();
        selected.sort_unstable();
        let train_set: Vec<SnapshotSequence> =
            selected.iter().map(|&i| pool[i].clone()).collect();
        let test_set: Vec<SnapshotSequence> = test_rollouts
            .iter()
            .map(|r| r.window(0, ORACLE_FIT_WINDOW + ORACLE_HORIZON))
            .collect();

        let config = TrainingConfig {
            sequence_length: 32,
            fit_window: ORACLE_FIT_WINDOW,
            latent_dim: 3,
            hidden_layers: vec![32, 32],
            learning_rate: 2e-3,
            l2_weight: 1e-7,
            epochs: 2500,
            batch_size: 16,
            tikhonov_eps: 1e-6,
            refit_eps: 1e-9,
            seed: 42,
        };
        let start = Instant::now();
        let report = train_new(&train_set, &config, TrainObjective::Recursive).expect("training");
        let train_seconds = start.elapsed().as_secs_f64();
        OracleExperiment {
            env,
            train_set,
            test_set,
            report,
            train_seconds,
        }
    })
}

/// Forced oscillator experiment: one long chirp-with-rests rollout, 320
/// staggered training windows from the leading region, 20 longer held-out
/// windows from the tail, and models trained with both objectives.
struct WakeExperiment {
    env: MeanFieldWake,
    test_set: Vec<SnapshotSequence>,
    recursive: TrainReport,
    single_step: TrainReport,
}

const WAKE_FIT_WINDOW: usize = 16;

fn wake_experiment() -> &'static WakeExperiment {
    static FIXTURE: OnceLock<WakeExperiment> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let env = MeanFieldWake::default();
        let schedule = ChirpSchedule {
            amplitude: 0.5,
            f0: 0.02,
            f1: 0.3,
            sweep_steps: 400,
            rest_steps: 400,
            repetitions: 6,
            seed: 5,
        };
        let total = 4238;
        let inputs = schedule.signal(env.dt(), total - 1).expect("chirp");
        let rollout = simulate(&env, &env.default_initial_state(), &inputs).expect("rollout");

        let all = stagger(&rollout, 32);
        let train_region = (all.len() as f64 * 0.75) as usize;
        let mut idx: Vec<usize> = (0..train_region).collect();
        let mut rng = SplitMix64::new(7).fork("subsample");
        rng.shuffle(&mut idx);
        let mut selected: Vec<usize> = idx.into_iter().take(320).collect();
        selected.sort_unstable();
        let train_set: Vec<SnapshotSequence> =
            selected.iter().map(|&i| all[i].clone()).collect();

        // Held-out windows long enough for the full-window variant's warmup
        // plus a 16-step prediction phase.
        let test_len = 32 + 16;
        let tail_start = (total as f64 * 0.78) as usize;
        let avail = total - test_len - 1 - tail_start;
        let test_set: Vec<SnapshotSequence> = (0..20)
            .map(|i| rollout.window(tail_start + i * avail / 19, test_len))
            .collect();

        let config = TrainingConfig {
            sequence_length: 32,
            fit_window: WAKE_FIT_WINDOW,
            latent_dim: 8,
            hidden_layers: vec![32, 32],
            learning_rate: 1e-3,
            l2_weight: 1e-7,
            epochs: 400,
            batch_size: 16,
            tikhonov_eps: 1e-6,
            refit_eps: 1e-9,
            seed: 7,
        };
        let recursive = train_new(&train_set, &config, TrainObjective::Recursive).expect("training");
        let single_step = train_single_step_variant(&train_set, &config).expect("variant");
        WakeExperiment {
            env,
            test_set,
            recursive,
            single_step,
        }
    })
}

fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

// ---------------------------------------------------------------- criteria

#[test]
fn criterion_01_gradient_integrity() {
    // Reverse-mode gradients of the training objective, through the
    // ridge-regularized fit, against central finite differences on a tiny
    // model; the whole check stays under ten seconds.
    let start = Instant::now();
    let env = OracleSystem::default();
    let rollout = simulate(&env, &[1.3, -0.4], &vec![0.0; 4]).expect("rollout");
    let seq = rollout.window(0, 4);

    // Seed chosen so no ReLU preactivation sits within the FD step of its
    // kink (central differences would disagree with the exact one-sided
    // derivative there).
    let config = TrainingConfig {
        sequence_length: 4,
        fit_window: 2,
        latent_dim: 2,
        hidden_layers: vec![3],
        seed: 16,
        tikhonov_eps: 1e-6,
        ..TrainingConfig::default()
    };
    let mut model = KoopmanModel::init(2, &config).expect("model");
    model.normalization = Normalization::fit(std::slice::from_ref(&seq));
    model.b = Matrix::from_vec(2, 1, vec![0.04, -0.02]);
    let l2 = 1e-3;

    let (_, grads) =
        sequence_loss_with_gradients(&model, &seq, l2, TrainObjective::Recursive).expect("grads");
    let flat = koopman_core::koopman::flat_params(&model);
    let h = 1e-6;
    let mut checked = 0usize;
    let mut max_rel = 0.0f64;
    for (tensor_idx, tensor) in flat.iter().enumerate() {
        for k in 0..tensor.data().len() {
            let mut bump = |delta: f64| -> f64 {
                let mut m = model.clone();
                let mut f = flat.clone();
                f[tensor_idx].data_mut()[k] += delta;
                koopman_core::koopman::write_flat_params(&mut m, &f);
                sequence_loss(&m, &seq, l2, TrainObjective::Recursive).expect("loss")
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            let ad = grads[tensor_idx].data()[k];
            let rel = (ad - fd).abs() / ad.abs().max(fd.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
            assert!(
                rel < 1e-4,
                "criterion 1 FAIL: tensor {tensor_idx} entry {k}: ad {ad} vs fd {fd} (rel {rel:.2e})"
            );
            checked += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "criterion 1 FAIL: took {elapsed:.1}s");
    println!(
        "criterion 1 (gradient integrity): PASS — {checked} components, max rel err {max_rel:.2e}, {elapsed:.2}s"
    );
}

#[test]
fn criterion_03_lifted_fit_equivalence() {
    // Hand-lifted observables of the default system: plain least squares
    // recovers the closed-form one-step operator to 1e-6.
    let env = OracleSystem::default();
    let k = exact_koopman_operator(&env);
    let seq = simulate(&env, &[1.3, -0.8], &vec![0.0; 64]).expect("rollout");
    let lifted: Vec<Vec<f64>> = seq.states.iter().map(|s| lift_observables(s)).collect();
    let x = Matrix::from_columns(&lifted[..64].to_vec());
    let y = Matrix::from_columns(&lifted[1..].to_vec());
    let fitted = lstsq_min_norm(&x, &y).expect("fit");
    let err = fitted.sub(&k).frobenius_norm();
    assert!(err < 1e-6, "criterion 3 FAIL: operator error {err:.2e}");
    println!("criterion 3 (lifted-fit equivalence): PASS — operator error {err:.2e}");
}

#[test]
fn criterion_06_qp_correctness() {
    // Box-QP solver vs refined grid search on 50 random 5-dimensional
    // problems, plus condensed-vs-rollout objective agreement.
    let mut rng = SplitMix64::new(600);
    let mut worst_gap = 0.0f64;
    for trial in 0..50 {
        let g = Matrix::from_fn(5, 5, |_, _| rng.uniform(-1.0, 1.0));
        let h = g.matmul(&g.transpose());
        let f: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let problem = QpProblem { h, f, u_max: 1.0 };
        let solution = solve_box_qp(&problem).expect("solve");

        // Convex objective: grid refinement around the coarse argmin
        // reaches the 1e-3 resolution brute force would use.
        let mut center = vec![0.0; 5];
        let mut span = 1.0;
        let mut best = (problem.objective(&center), center.clone());
        while span > 5e-4 {
            let offsets = [-span, -span / 2.0, 0.0, span / 2.0, span];
            let mut point = center.clone();
            grid_search(&problem, &offsets, &center.clone(), &mut point, 0, &mut best);
            center = best.1.clone();
            span /= 2.0;
        }
        let gap = solution.objective - best.0;
        worst_gap = worst_gap.max(gap);
        assert!(
            gap <= 1e-4,
            "criterion 6 FAIL: trial {trial} solver {} vs grid {}",
            solution.objective,
            best.0
        );
    }

    // Condensed quadratic equals the explicitly rolled-out cost.
    let mut worst_roll = 0.0f64;
    for _ in 0..20 {
        let raw = Matrix::from_fn(3, 3, |_, _| rng.uniform(-1.0, 1.0));
        let a = raw.scale(0.8 / raw.frobenius_norm());
        let b = Matrix::from_fn(3, 1, |_, _| rng.uniform(-1.0, 1.0));
        let c1: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let goal: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let (q, r) = (1.0, 0.4);
        let horizon = 8;
        let problem = condense_qp(&a, &b, &c1, &goal, horizon, q, r, 2.0).expect("condense");
        let rollout_cost = |u: &[f64]| -> f64 {
            let mut c = c1.clone();
            let dev = |c: &[f64]| -> f64 {
                c.iter().zip(&goal).map(|(x, g)| (x - g) * (x - g)).sum()
            };
            let mut cost = q * dev(&c);
            for &ut in u {
                let mut next = a.matvec(&c);
                for i in 0..3 {
                    next[i] += b[(i, 0)] * ut;
                }
                cost += q * dev(&next) + r * ut * ut;
                c = next;
            }
            cost
        };
        let constant = rollout_cost(&vec![0.0; horizon - 1]);
        for _ in 0..5 {
            let u: Vec<f64> = (0..horizon - 1).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let gap = (problem.objective(&u) + constant - rollout_cost(&u)).abs();
            worst_roll = worst_roll.max(gap);
            assert!(gap < 1e-10, "criterion 6 FAIL: condensed mismatch {gap:.2e}");
        }
    }
    println!(
        "criterion 6 (QP correctness): PASS — worst grid gap {worst_gap:.2e}, worst rollout mismatch {worst_roll:.2e}"
    );
}

fn grid_search(
    problem: &QpProblem,
    offsets: &[f64],
    center: &[f64],
    point: &mut Vec<f64>,
    axis: usize,
    best: &mut (f64, Vec<f64>),
) {
    if axis == point.len() {
        let value = problem.objective(point);
        if value < best.0 {
            *best = (value, point.clone());
        }
        return;
    }
    for &off in offsets {
        point[axis] = (center[axis] + off).clamp(-problem.u_max, problem.u_max);
        grid_search(problem, offsets, center, point, axis + 1, best);
    }
}

#[test]
fn criterion_09_pcontrol_sensitivity() {
    // Sensor placement decides everything: the phase-0 sensor with a gain
    // above the stability threshold 2 sigma / gamma kills the cycle, the
    // anti-phase sensor at the same gain cannot.
    let env = MeanFieldWake::default();
    let threshold = 2.0 * env.sigma / env.gamma;
    let gain = 0.25;
    assert!(gain > threshold, "test setup: gain must clear the threshold");

    let aligned = PControlConfig {
        gain,
        sensor: Sensor { phase: 0.0 },
    };
    let log = run_pcontrol_loop(&env, &aligned, &env.limit_cycle_state(), 8000).expect("run");
    let final_residual = log.rows.last().expect("rows").residual;
    assert!(
        final_residual < 1e-3,
        "criterion 9 FAIL: aligned sensor left residual {final_residual:.2e}"
    );

    let uncontrolled_mean = env.omega * env.sigma.sqrt();
    let anti = PControlConfig {
        gain,
        sensor: Sensor {
            phase: std::f64::consts::PI,
        },
    };
    let anti_log = run_pcontrol_loop(&env, &anti, &env.limit_cycle_state(), 8000).expect("run");
    let tail = &anti_log.residuals()[4000..];
    let anti_mean = mean(tail);
    assert!(
        anti_mean > 0.5 * uncontrolled_mean,
        "criterion 9 FAIL: anti-phase sensor suppressed to {anti_mean:.2e}"
    );
    println!(
        "criterion 9 (proportional-control sensitivity): PASS — aligned final {final_residual:.2e}, anti-phase mean {anti_mean:.3} vs uncontrolled {uncontrolled_mean:.3}"
    );
}

#[test]
fn criterion_05_forced_identification() {
    // Part one: exact recovery of a known dynamics matrix given the true
    // input matrix on synthetic linear latent data.
    let mut rng = SplitMix64::new(500);
    let raw = Matrix::from_fn(4, 4, |_, _| rng.uniform(-1.0, 1.0));
    let a0 = raw.scale(0.85 / raw.frobenius_norm());
    let b0 = Matrix::from_fn(4, 1, |_, _| rng.uniform(-0.6, 0.6));
    let mut state: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut us = Vec::new();
    for _ in 0..30 {
        let u = rng.uniform(-1.0, 1.0);
        xs.push(state.clone());
        let mut next = a0.matvec(&state);
        for i in 0..4 {
            next[i] += b0[(i, 0)] * u;
        }
        ys.push(next.clone());
        us.push(u);
        state = next;
    }
    let x = Matrix::from_columns(&xs);
    let y = Matrix::from_columns(&ys);
    let gamma = Matrix::from_fn(1, 30, |_, j| us[j]);
    let recovered = fit_a_forced(&x, &y, &gamma, &b0, 1e-10).expect("fit");
    let err = recovered.sub(&a0).frobenius_norm();
    assert!(err < 1e-6, "criterion 5 FAIL: recovery error {err:.2e}");

    // Part two: the trained global input matrix keeps one-step forced
    // prediction within 3x of the unforced error at matched magnitude.
    let experiment = wake_experiment();
    let model = &experiment.recursive.model;
    let env = &experiment.env;
    let w = WAKE_FIT_WINDOW;
    let mut forced_err = 0.0;
    let mut unforced_err = 0.0;
    for seq in &experiment.test_set {
        let warmup = seq.window(0, w);
        let pred = model
            .predict(&warmup, &seq.inputs[w..w + 1], 1)
            .expect("forced prediction");
        let truth = &seq.states[w + 1];
        forced_err += pred.states[0]
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();

        // Matched unforced trajectory from the same starting state.
        let unforced = simulate(env, &seq.states[0], &vec![0.0; w + 1]).expect("rollout");
        let uw = unforced.window(0, w);
        let upred = model.predict(&uw, &[0.0], 1).expect("unforced prediction");
        let utruth = &unforced.states[w + 1];
        unforced_err += upred.states[0]
            .iter()
            .zip(utruth)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>();
    }
    let ratio = forced_err / unforced_err;
    assert!(
        ratio < 3.0,
        "criterion 5 FAIL: forced/unforced one-step error ratio {ratio:.2}"
    );
    println!(
        "criterion 5 (forced identification): PASS — recovery {err:.2e}, forced/unforced ratio {ratio:.2}"
    );
}

#[test]
fn criterion_02_exact_oracle_recovery() {
    let experiment = oracle_experiment();
    assert!(
        experiment.train_seconds < 900.0,
        "criterion 2 FAIL: training took {:.0}s",
        experiment.train_seconds
    );
    let series = evaluate_sequences(
        &experiment.report.model,
        &experiment.test_set,
        ORACLE_HORIZON,
    )
    .expect("evaluation");
    let overall = mean(&series.iter().map(|s| mean(s)).collect::<Vec<_>>());
    assert!(
        overall < 1e-2,
        "criterion 2 FAIL: mean relative L1 {overall:.3e} over {} steps",
        ORACLE_HORIZON
    );
    println!(
        "criterion 2 (exact-oracle recovery): PASS — mean rel L1 {overall:.3e} across 20 sequences, training {:.0}s",
        experiment.train_seconds
    );
}

#[test]
fn criterion_04_baseline_separation() {
    let experiment = oracle_experiment();
    let koopman_series = evaluate_sequences(
        &experiment.report.model,
        &experiment.test_set,
        ORACLE_HORIZON,
    )
    .expect("evaluation");
    let koopman_err = mean(&koopman_series.iter().map(|s| mean(s)).collect::<Vec<_>>());

    let dmd = dmd_fit(&experiment.train_set).expect("dmd fit");
    let dmd_series: Vec<Vec<f64>> = experiment
        .test_set
        .iter()
        .map(|s| {
            dmd_prediction_error_series(&dmd, s, ORACLE_FIT_WINDOW, ORACLE_HORIZON).expect("dmd")
        })
        .collect();
    let dmd_err = mean(&dmd_series.iter().map(|s| mean(s)).collect::<Vec<_>>());
    let ratio = dmd_err / koopman_err;
    assert!(
        ratio >= 5.0,
        "criterion 4 FAIL: raw-state error {dmd_err:.3e} is only {ratio:.1}x the model's {koopman_err:.3e}"
    );

    // Single-step variant: early-horizon error larger on at least 70% of
    // the held-out sequences.
    let wake = wake_experiment();
    let mut worse = 0;
    for seq in &wake.test_set {
        let rec = prediction_error_series(&wake.recursive.model, seq, 16).expect("recursive");
        let single = prediction_error_series(&wake.single_step.model, seq, 16).expect("variant");
        if mean(&single) > mean(&rec) {
            worse += 1;
        }
    }
    assert!(
        worse >= 14,
        "criterion 4 FAIL: single-step variant worse on only {worse}/20 sequences"
    );
    println!(
        "criterion 4 (baseline separation): PASS — raw-state/model ratio {ratio:.1}, single-step worse on {worse}/20"
    );
}

#[test]
fn criterion_07_closed_loop_suppression() {
    let experiment = wake_experiment();
    let env = &experiment.env;
    let start = Instant::now();
    let config = MpcConfig {
        horizon: 16,
        state_weight: 1.0,
        input_penalty: InputPenalty::Relative { scale: 10.0 },
        u_max: 1.0,
        goal_state: vec![0.0, 0.0],
        warmup: WAKE_FIT_WINDOW,
    };
    let sensor = Sensor { phase: 0.0 };
    let run = run_mpc_loop(
        env,
        &experiment.recursive.model,
        &config,
        &sensor,
        &env.limit_cycle_state(),
        500,
    )
    .expect("mpc run");
    let elapsed = start.elapsed().as_secs_f64();

    let uncontrolled = env.omega * env.sigma.sqrt();
    let residuals = run.log.residuals();
    let final_residual = *residuals.last().expect("rows");
    assert!(
        final_residual < 0.05 * uncontrolled,
        "criterion 7 FAIL: residual {final_residual:.3e} vs 5% of uncontrolled {:.3e}",
        0.05 * uncontrolled
    );

    // Smoothed (one rotation period) residual series is non-increasing
    // after the warmup window.
    let period = (std::f64::consts::TAU / (env.omega * env.dt)).round() as usize;
    let smoothed = moving_average(&residuals[config.warmup..], period);
    for (i, w) in smoothed.windows(2).enumerate() {
        assert!(
            w[1] <= w[0] * 1.001 + 1e-9,
            "criterion 7 FAIL: smoothed residual rose at {i}: {} -> {}",
            w[0],
            w[1]
        );
    }
    assert!(elapsed < 300.0, "criterion 7 FAIL: run took {elapsed:.0}s");
    println!(
        "criterion 7 (closed-loop suppression): PASS — final residual {final_residual:.3e} ({:.2}% of uncontrolled), smoothed series non-increasing, {elapsed:.1}s",
        100.0 * final_residual / uncontrolled
    );
}

#[test]
fn criterion_08_interpretability() {
    // The controller's inputs line up with the proportional law read off
    // the phase-0 sensor: corr(u, -0.4 s) over the controlled window.
    let experiment = wake_experiment();
    let env = &experiment.env;
    let config = MpcConfig {
        horizon: 16,
        state_weight: 1.0,
        input_penalty: InputPenalty::Relative { scale: 10.0 },
        u_max: 1.0,
        goal_state: vec![0.0, 0.0],
        warmup: WAKE_FIT_WINDOW,
    };
    let sensor = Sensor { phase: 0.0 };
    let run = run_mpc_loop(
        env,
        &experiment.recursive.model,
        &config,
        &sensor,
        &env.limit_cycle_state(),
        500,
    )
    .expect("mpc run");
    let controlled = &run.log.rows[config.warmup..];
    let inputs: Vec<f64> = controlled.iter().map(|r| r.u).collect();
    let scaled_sensor: Vec<f64> = controlled.iter().map(|r| -0.4 * r.sensor).collect();
    let corr = correlation(&inputs, &scaled_sensor).expect("correlation");
    assert!(
        corr >= 0.8,
        "criterion 8 FAIL: input/scaled-sensor correlation {corr:.3}"
    );
    println!("criterion 8 (interpretability): PASS — correlation {corr:.3}");
}

#[test]
fn criterion_10_determinism() {
    // Every command re-run with identical config and seed produces
    // byte-identical data outputs (manifests differ only in wall-clock
    // fields).
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_koopman");
    let dir = std::env::temp_dir().join(format!("koopman-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).expect("temp dir");

    let run = |cmd: &str, config: &std::path::Path, out: &std::path::Path| {
        let output = Command::new(bin)
            .args([
                cmd,
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .output()
            .expect("binary runs");
        assert!(
            output.status.success(),
            "{cmd} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    };
    let assert_identical = |a: &std::path::Path, b: &std::path::Path, names: &[&str]| {
        for name in names {
            let left = std::fs::read(a.join(name)).expect(name);
            let right = std::fs::read(b.join(name)).expect(name);
            assert!(
                left == right,
                "criterion 10 FAIL: {name} differs between identical runs"
            );
        }
        // Manifests agree once the wall-clock fields are dropped.
        let strip = |p: &std::path::Path| -> serde_json::Value {
            let mut v: serde_json::Value = serde_json::from_str(
                &std::fs::read_to_string(p.join("manifest.json")).expect("manifest"),
            )
            .expect("json");
            v.as_object_mut().unwrap().remove("started_unix_ms");
            v.as_object_mut().unwrap().remove("finished_unix_ms");
            v
        };
        assert_eq!(strip(a), strip(b), "criterion 10 FAIL: manifest payload differs");
    };

    let gen_config = dir.join("gen.json");
    std::fs::write(
        &gen_config,
        r#"{
  "schema_version": 1, "seed": 21,
  "env": {"kind": "mean_field_wake"},
  "data": {"total_snapshots": 500, "sequence_length": 8, "train_sequences": 80,
            "test_sequences": 5, "test_horizon": 16, "fit_window": 4,
            "chirp": {"amplitude": 0.5, "f0": 0.02, "f1": 0.3, "sweep_steps": 100,
                       "rest_steps": 100, "repetitions": 3, "seed": 21}}
}"#,
    )
    .expect("config");
    let (gen_a, gen_b) = (dir.join("gen-a"), dir.join("gen-b"));
    run("gen-data", &gen_config, &gen_a);
    run("gen-data", &gen_config, &gen_b);
    assert_identical(&gen_a, &gen_b, &["train.csv", "test.csv"]);

    let train_config = dir.join("train.json");
    std::fs::write(
        &train_config,
        format!(
            r#"{{
  "schema_version": 1, "seed": 21,
  "training": {{"dataset": "{}",
    "config": {{"sequence_length": 8, "fit_window": 4, "latent_dim": 3,
                 "hidden_layers": [8], "learning_rate": 0.002, "epochs": 8,
                 "batch_size": 16, "tikhonov_eps": 0.0001}}}}
}}"#,
            gen_a.join("train.csv").display()
        ),
    )
    .expect("config");
    let (train_a, train_b) = (dir.join("train-a"), dir.join("train-b"));
    run("train", &train_config, &train_a);
    run("train", &train_config, &train_b);
    assert_identical(&train_a, &train_b, &["checkpoint.json", "loss_history.csv"]);

    let eval_config = dir.join("eval.json");
    std::fs::write(
        &eval_config,
        format!(
            r#"{{
  "schema_version": 1, "seed": 21,
  "eval": {{"source": {{"kind": "checkpoint", "path": "{}"}},
            "dataset": "{}", "horizons": [8, 16], "num_sequences": 5}}
}}"#,
            train_a.join("checkpoint.json").display(),
            gen_a.join("test.csv").display()
        ),
    )
    .expect("config");
    let (eval_a, eval_b) = (dir.join("eval-a"), dir.join("eval-b"));
    run("eval", &eval_config, &eval_a);
    run("eval", &eval_config, &eval_b);
    assert_identical(&eval_a, &eval_b, &["metrics_h008.csv", "metrics_h016.csv"]);

    let mpc_config = dir.join("mpc.json");
    std::fs::write(
        &mpc_config,
        format!(
            r#"{{
  "schema_version": 1, "seed": 21,
  "env": {{"kind": "mean_field_wake"}},
  "mpc": {{"checkpoint": "{}", "steps": 60,
           "config": {{"horizon": 8, "state_weight": 1.0,
                        "input_penalty": {{"relative": {{"scale": 10.0}}}},
                        "u_max": 1.0, "goal_state": [0.0, 0.0], "warmup": 4}}}}
}}"#,
            train_a.join("checkpoint.json").display()
        ),
    )
    .expect("config");
    let (mpc_a, mpc_b) = (dir.join("mpc-a"), dir.join("mpc-b"));
    run("mpc", &mpc_config, &mpc_a);
    run("mpc", &mpc_config, &mpc_b);
    assert_identical(&mpc_a, &mpc_b, &["mpc_log.csv", "run_info.json"]);

    let pctl_config = dir.join("pctl.json");
    std::fs::write(
        &pctl_config,
        r#"{
  "schema_version": 1, "seed": 21,
  "env": {"kind": "mean_field_wake"},
  "pctl": {"steps": 120, "config": {"gain": 0.3, "sensor": {"phase": 0.0}}}
}"#,
    )
    .expect("config");
    let (pctl_a, pctl_b) = (dir.join("pctl-a"), dir.join("pctl-b"));
    run("pctl", &pctl_config, &pctl_a);
    run("pctl", &pctl_config, &pctl_b);
    assert_identical(&pctl_a, &pctl_b, &["pctl_log.csv"]);

    let report_config = dir.join("report.json");
    std::fs::write(
        &report_config,
        format!(
            r#"{{
  "schema_version": 1, "seed": 21,
  "report": {{"error_metrics": [{{"label": "model", "path": "{}"}}],
              "mpc_log": "{}", "overlay_gain": 0.4,
              "extra_logs": [{{"label": "pctl", "path": "{}"}}]}}
}}"#,
            eval_a.join("metrics_h008.csv").display(),
            mpc_a.join("mpc_log.csv").display(),
            pctl_a.join("pctl_log.csv").display()
        ),
    )
    .expect("config");
    let (rep_a, rep_b) = (dir.join("rep-a"), dir.join("rep-b"));
    run("report", &report_config, &rep_a);
    run("report", &report_config, &rep_b);
    assert_identical(
        &rep_a,
        &rep_b,
        &[
            "summary.csv",
            "error_vs_step.csv",
            "residual_vs_step.csv",
            "input_sensor_overlay.csv",
        ],
    );

    println!("criterion 10 (determinism): PASS — all six commands byte-identical on rerun");
}
