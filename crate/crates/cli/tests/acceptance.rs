//! End-to-end acceptance run. Prints one `PASS`/`FAIL` line per criterion
//! and exits non-zero if any criterion fails.
//!
//! Criteria 8 to 10 train two policies at full length (seed 0, default
//! config), so a complete run takes several minutes. Set
//! `SAFERL_ACCEPTANCE_ONLY=1,2,...` to run a subset.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saferl_cli::commands::{self, MapArgs, RolloutArgs, TrainArgs, VerifyArgs};
use saferl_core::environment::PenaltyScope;
use saferl_core::interval::{propagate, IntervalBox};
use saferl_core::property::default_suite;
use saferl_core::trainer::ppo::normalize;
use saferl_core::trainer::{
    collect_rollout, compute_gae, grad_check, ppo_update, ActorCritic, Batch, Optimizers, Runner, SafetyMode,
    TrainConfig, UpdateSettings,
};
use saferl_core::verifier::{grid_oracle, verify, VerificationReport, VerifyConfig};
use saferl_core::{
    Activation, Condition, EnvConfig, EnvState, Environment, Layer, Matrix, Network, SafetyProperty,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Every report produced during the run, for counterexample replay.
static REPORTS: Mutex<Vec<(Network, SafetyProperty, VerificationReport)>> = Mutex::new(Vec::new());

fn record(network: &Network, property: &SafetyProperty, report: &VerificationReport) {
    REPORTS
        .lock()
        .unwrap()
        .push((network.clone(), property.clone(), report.clone()));
}

fn layer(rows: &[&[f64]], biases: &[f64], activation: Activation) -> Layer {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    Layer::new(Matrix::from_rows(&rows).unwrap(), biases.to_vec(), activation).unwrap()
}

fn linear(rows: &[&[f64]], biases: &[f64]) -> Network {
    Network::new(vec![layer(rows, biases, Activation::Identity)]).unwrap()
}

fn two_layer(hidden: (&[&[f64]], &[f64]), out: (&[&[f64]], &[f64])) -> Network {
    Network::new(vec![
        layer(hidden.0, hidden.1, Activation::Relu),
        layer(out.0, out.1, Activation::Identity),
    ])
    .unwrap()
}

fn random_network(rng: &mut impl Rng, sizes: &[usize]) -> Network {
    let n = sizes.len() - 1;
    let layers = (0..n)
        .map(|l| {
            let data = (0..sizes[l] * sizes[l + 1]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let biases = (0..sizes[l + 1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            let act = if l + 1 == n { Activation::Identity } else { Activation::Relu };
            Layer::new(Matrix::from_row_major(sizes[l + 1], sizes[l], data).unwrap(), biases, act).unwrap()
        })
        .collect();
    Network::new(layers).unwrap()
}

fn unit_property(dim: usize, unsafe_actions: &[usize]) -> SafetyProperty {
    SafetyProperty {
        name: format!("unit{dim}"),
        description: String::new(),
        input_box: IntervalBox::from_bounds(&vec![(0.0, 1.0); dim]).unwrap(),
        condition: Condition::ActionNotSelected {
            unsafe_actions: unsafe_actions.iter().copied().collect(),
        },
    }
}

fn config(min_width_fraction: f64, workers: usize) -> VerifyConfig {
    VerifyConfig {
        min_width_fraction,
        workers,
        ..VerifyConfig::default()
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut escapes = 0usize;
    let mut samples = 0usize;
    for _ in 0..100 {
        let layers = rng.random_range(2..=4);
        let mut sizes = vec![rng.random_range(1..=32)];
        for _ in 0..layers {
            sizes.push(rng.random_range(1..=32));
        }
        let net = random_network(&mut rng, &sizes);
        for _ in 0..100 {
            let bounds: Vec<(f64, f64)> = (0..sizes[0])
                .map(|_| {
                    let lo = rng.random_range(-2.0..2.0);
                    (lo, lo + rng.random_range(0.0..2.0))
                })
                .collect();
            let b = IntervalBox::from_bounds(&bounds).unwrap();
            let out = propagate(&net, &b).unwrap();
            let mut x = vec![0.0; bounds.len()];
            for _ in 0..10_000 {
                for (xi, &(lo, hi)) in x.iter_mut().zip(&bounds) {
                    *xi = (lo + (hi - lo) * rng.random::<f64>()).min(hi);
                }
                escapes += usize::from(!out.contains(&net.forward(&x).unwrap()));
                samples += 1;
            }
        }
    }
    outcome(escapes == 0, format!("{escapes} escapes in {samples} forward passes"))
}

/// Small networks on `[0, 1]^n` with the unsafe action set.
fn crafted_cases() -> Vec<(Network, SafetyProperty)> {
    let mut cases = vec![
        // Half-domain linear case: action 0 wins for x ≥ 0.5.
        (linear(&[&[1.0], &[0.0]], &[-0.5, 0.0]), unit_property(1, &[0])),
        (linear(&[&[1.0], &[0.0]], &[-0.25, 0.0]), unit_property(1, &[0])),
        (linear(&[&[-1.0], &[0.0]], &[0.3, 0.0]), unit_property(1, &[0])),
        // |x − 0.5| ≥ 0.2
        (
            two_layer((&[&[1.0], &[-1.0]], &[-0.5, 0.5]), (&[&[1.0, 1.0], &[0.0, 0.0]], &[-0.2, 0.0])),
            unit_property(1, &[0]),
        ),
        // |x − 0.5| ≤ 0.1
        (
            two_layer((&[&[1.0], &[-1.0]], &[-0.5, 0.5]), (&[&[-1.0, -1.0], &[0.0, 0.0]], &[0.1, 0.0])),
            unit_property(1, &[0]),
        ),
        (linear(&[&[1.0, -1.0], &[0.0, 0.0]], &[0.0, 0.0]), unit_property(2, &[0])),
        (linear(&[&[1.0, 1.0], &[0.0, 0.0]], &[-1.2, 0.0]), unit_property(2, &[0])),
        // L1 ball of radius 0.3 around the centre.
        (
            two_layer(
                (
                    &[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]],
                    &[-0.5, 0.5, -0.5, 0.5],
                ),
                (&[&[-1.0, -1.0, -1.0, -1.0], &[0.0; 4]], &[0.3, 0.0]),
            ),
            unit_property(2, &[0]),
        ),
        (
            linear(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]], &[0.0, 0.0, 0.5]),
            unit_property(2, &[0]),
        ),
        // max(x1, x2) ≥ 0.7
        (
            two_layer((&[&[1.0, -1.0], &[0.0, 1.0]], &[0.0, 0.0]), (&[&[1.0, 1.0], &[0.0, 0.0]], &[-0.7, 0.0])),
            unit_property(2, &[0]),
        ),
        (
            two_layer((&[&[1.0, 0.0]], &[-0.5]), (&[&[1.0], &[0.0]], &[-0.1, 0.0])),
            unit_property(2, &[0]),
        ),
        (linear(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0]), unit_property(2, &[1])),
        (linear(&[&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]], &[-1.5, 0.0]), unit_property(3, &[0])),
        (linear(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0]], &[-0.9, 0.0]), unit_property(3, &[0])),
        (
            linear(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]], &[0.0, 0.0, 0.0]),
            unit_property(3, &[0]),
        ),
        // Never violated: 0.4 cannot beat both x and 1 − x.
        (
            linear(&[&[1.0], &[-1.0], &[0.0]], &[0.0, 1.0, 0.4]),
            unit_property(1, &[2]),
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for inputs in [1, 2, 2, 3] {
        let net = random_network(&mut rng, &[inputs, 8, 3]);
        cases.push((net, unit_property(inputs, &[0])));
    }
    cases
}

fn criterion_2() -> Outcome {
    let cfg = config(2f64.powi(-10), 1);
    let mut failures = Vec::new();
    let mut worst_gap = 0.0f64;
    let mut least_gap = 0.0f64;
    let mut half = f64::NAN;
    let cases = crafted_cases();
    for (i, (net, prop)) in cases.iter().enumerate() {
        let report = verify(net, prop, &cfg).unwrap();
        record(net, prop, &report);
        let points = match prop.input_box.dim() {
            1 => 100_001,
            2 => 1001,
            _ => 101,
        };
        let oracle = grid_oracle(net, prop, points).unwrap();
        // An endpoint-inclusive grid over-counts boundary slabs by up to one
        // grid step per dimension.
        let tolerance = prop.input_box.dim() as f64 / points as f64;
        let gap = report.violation_rate - oracle;
        worst_gap = worst_gap.max(gap);
        least_gap = least_gap.min(gap);
        if gap < -tolerance || gap > 0.05 {
            failures.push(format!("case {i}: rate {} oracle {oracle}", report.violation_rate));
        }
        if i == 0 {
            half = report.violation_rate;
        }
    }
    if (half - 0.5).abs() > 0.01 {
        failures.push(format!("half-domain case rate {half}"));
    }
    outcome(
        failures.is_empty(),
        format!(
            "{} cases, largest rate - oracle {worst_gap:.4}, smallest {least_gap:.4}, half-domain {half:.4}{}",
            cases.len(),
            if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }
        ),
    )
}

fn criterion_3() -> Outcome {
    let reports = REPORTS.lock().unwrap();
    let mut total = 0usize;
    let mut bad = 0usize;
    for (net, prop, report) in reports.iter() {
        for c in &report.counterexamples {
            total += 1;
            let out = net.forward(&c.input).unwrap();
            let ok = prop.condition.violated_by(&out) && prop.input_box.contains(&c.input);
            bad += usize::from(!ok);
        }
    }
    outcome(
        bad == 0 && total > 0,
        format!("{bad} of {total} counterexamples from {} reports fail replay", reports.len()),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = Vec::new();
    for case in 0..10 {
        let inputs = if case < 3 { 1 } else { 2 };
        let net = random_network(&mut rng, &[inputs, 10, 10, 3]);
        let prop = unit_property(inputs, &[case % 3]);
        let rates: Vec<f64> = [6, 8, 10, 12]
            .iter()
            .map(|&k| {
                let r = verify(&net, &prop, &config(2f64.powi(-k), 1)).unwrap();
                record(&net, &prop, &r);
                r.violation_rate
            })
            .collect();
        if rates.windows(2).any(|w| w[1] > w[0]) {
            failures.push(format!("case {case}: {rates:?}"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() { "10 pairs non-increasing over k = 6, 8, 10, 12".into() } else { failures.join("; ") },
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = Vec::new();
    for case in 0..10 {
        let inputs = 1 + case % 3;
        let net = random_network(&mut rng, &[inputs, 12, 12, 4]);
        let prop = unit_property(inputs, &[0, 3]);
        let cfg = |workers| config(if inputs == 3 { 1.0 / 64.0 } else { 1.0 / 256.0 }, workers);
        let a = verify(&net, &prop, &cfg(1)).unwrap();
        let b = verify(&net, &prop, &cfg(4)).unwrap();
        record(&net, &prop, &a);
        let inputs_of =
            |r: &VerificationReport| r.counterexamples.iter().map(|c| c.input.clone()).collect::<Vec<_>>();
        let same = a.violation_rate == b.violation_rate
            && a.proved_rate == b.proved_rate
            && a.violated_rate == b.violated_rate
            && a.undecided_rate == b.undecided_rate
            && a.counterexample_count == b.counterexample_count
            && inputs_of(&a) == inputs_of(&b);
        if !same {
            failures.push(format!("case {case}"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "10 cases identical with 1 and 4 workers".into()
        } else {
            format!("differ: {}", failures.join(", "))
        },
    )
}

fn criterion_6() -> Outcome {
    let cfg = TrainConfig::default();
    let coefs = cfg.loss_coefficients();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ac = ActorCritic::new(8, &cfg.hidden_layers, 27, &mut rng);
    let env = Environment::new(EnvConfig::default(), PenaltyScope::all(), 0);
    let mut runner = Runner::new(env, &mut rng);
    let mut batch_of = |ac: &ActorCritic, rng: &mut ChaCha8Rng| {
        let (mut buf, _) = collect_rollout(&mut runner, ac, 512, rng);
        compute_gae(&mut buf, cfg.gamma, cfg.gae_lambda);
        normalize(&mut buf.advantages);
        buf
    };
    let buf = batch_of(&ac, &mut rng);
    let idx: Vec<usize> = (0..64).map(|i| i * 8).collect();
    let at_init = grad_check(&ac, &Batch::from_indices(&buf, &idx), &coefs, 400, 1);

    let mut opt = Optimizers::new(&ac, cfg.learning_rate);
    let settings = UpdateSettings {
        coefs,
        update_epochs: cfg.update_epochs,
        minibatch_size: cfg.minibatch_size,
        max_grad_norm: cfg.max_grad_norm,
    };
    let mut last = buf;
    for _ in 0..10 {
        last = batch_of(&ac, &mut rng);
        ppo_update(&mut ac, &mut opt, &last, &settings, &mut rng).unwrap();
    }
    // The last rollout's log-probabilities are stale now, so ratios differ from 1.
    let after = grad_check(&ac, &Batch::from_indices(&last, &idx), &coefs, 400, 2);
    let pass = at_init.max_relative_error < 1e-4 && after.max_relative_error < 1e-4;
    outcome(
        pass,
        format!(
            "max relative error {:.2e} at init, {:.2e} after 10 updates",
            at_init.max_relative_error, after.max_relative_error
        ),
    )
}

fn criterion_7() -> Outcome {
    let env = EnvConfig::default();
    let (lo, hi) = env.arena();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0usize;
    let mut bad = 0usize;
    let mut phases = [0usize; 2];
    while checked < 100_000 {
        let p = [0, 1, 2].map(|a| rng.random_range(lo[a]..=hi[a]));
        let gripper = rng.random_range(0..=1u8);
        let state = EnvState {
            gripper,
            position: p,
            steps_taken: rng.random_range(0..env.max_steps),
            grasp_point: (gripper == 1).then_some(p),
            done: false,
        };
        let action = saferl_core::Action::new(rng.random_range(0..27)).unwrap();
        let t = env.step(&state, action, &PenaltyScope::all()).unwrap();
        if t.info.any_collision() {
            continue;
        }
        checked += 1;
        phases[usize::from(t.state.gripper)] += 1;
        let (lo_r, hi_r) = if t.state.gripper == 0 { (-1.0, -0.5) } else { (-0.5, 0.0) };
        bad += usize::from(!(t.reward >= lo_r && t.reward <= hi_r));
    }
    outcome(
        bad == 0,
        format!(
            "{bad} of {checked} collision-free transitions out of range ({} open, {} grasped)",
            phases[0], phases[1]
        ),
    )
}

struct Trained {
    safe: PathBuf,
    safe_success: f64,
    unsafe_policy: PathBuf,
}

fn train_policy(dir: &Path, mode: SafetyMode) -> (PathBuf, f64) {
    let summaries = commands::cmd_train(&TrainArgs {
        config: None,
        seeds: vec![0],
        epochs: None,
        safety_mode: Some(mode),
        eval_episodes: 100,
        out: dir.to_path_buf(),
        progress: false,
    })
    .unwrap();
    let s = &summaries[0];
    (s.policy_path.clone(), s.eval.success_rate)
}

fn train_both(dir: &Path) -> Trained {
    let t = Instant::now();
    let (safe, safe_success) = train_policy(&dir.join("safe"), SafetyMode::AllPenalties);
    eprintln!("  trained Safe-PPO in {:.0}s", t.elapsed().as_secs_f64());
    let t = Instant::now();
    let (unsafe_policy, _) = train_policy(&dir.join("unsafe"), SafetyMode::None);
    eprintln!("  trained Unsafe-PPO in {:.0}s", t.elapsed().as_secs_f64());
    Trained {
        safe,
        safe_success,
        unsafe_policy,
    }
}

fn criterion_8(t: &Trained) -> Outcome {
    outcome(
        t.safe_success >= 0.9,
        format!("Safe-PPO greedy success {:.2} over 100 episodes", t.safe_success),
    )
}

/// Verification settings for the trained 8-input policies.
fn policy_verify_config() -> VerifyConfig {
    VerifyConfig {
        min_width_fraction: 1.0 / 64.0,
        max_subareas: 1 << 20,
        ..VerifyConfig::default()
    }
}

fn overall(dir: &Path, network: &Path) -> f64 {
    let (table, reports) = commands::cmd_verify(&VerifyArgs {
        network: network.to_path_buf(),
        suite: None,
        env_config: None,
        verify: policy_verify_config(),
        out: dir.to_path_buf(),
    })
    .unwrap();
    let net = commands::load_network(network).unwrap();
    let props = default_suite(&EnvConfig::default()).unwrap();
    let props = commands::resolve_suite(&props, &net).unwrap();
    for (p, r) in props.iter().zip(&reports) {
        record(&net, p, r);
    }
    table.overall()[0]
}

fn criterion_9(t: &Trained, dir: &Path) -> Outcome {
    let safe = overall(&dir.join("verify_safe"), &t.safe);
    let unsafe_rate = overall(&dir.join("verify_unsafe"), &t.unsafe_policy);
    outcome(
        safe < 0.5 * unsafe_rate,
        format!("overall violation rate Safe {:.2}% vs Unsafe {:.2}%", 100.0 * safe, 100.0 * unsafe_rate),
    )
}

fn criterion_10(t: &Trained, dir: &Path) -> Outcome {
    let states = commands::cmd_rollout_states(&RolloutArgs {
        network: t.safe.clone(),
        env_config: None,
        episodes: 1000,
        seed: 0,
        out: dir.join("states.csv"),
    })
    .unwrap();
    let env = EnvConfig::default();
    let net = commands::load_network(&t.safe).unwrap();
    let props = commands::resolve_suite(&default_suite(&env).unwrap(), &net).unwrap();
    let dims = (2, 7);
    let mut in_marked: BTreeSet<usize> = BTreeSet::new();
    let mut in_boxes: BTreeSet<usize> = BTreeSet::new();
    let mut marked_cells = 0usize;
    for p in &props {
        let map = commands::cmd_violation_map(&MapArgs {
            network: t.safe.clone(),
            suite: None,
            env_config: None,
            property: p.name.clone(),
            dims,
            fixed_samples: 4,
            grid: 16,
            seed: 0,
            verify: VerifyConfig {
                min_width_fraction: 1.0 / 16.0,
                ..VerifyConfig::default()
            },
            out: dir.join(format!("map_{}.csv", p.name)),
        })
        .unwrap();
        marked_cells += map.values.iter().flatten().filter(|v| **v > 0.0).count();
        for (i, s) in states.iter().enumerate() {
            if !p.input_box.contains(&s.observation) {
                continue;
            }
            in_boxes.insert(i);
            let (a, b) = map
                .locate(s.observation[dims.0], s.observation[dims.1])
                .expect("state inside the box lies inside the map");
            if map.is_marked(a, b) {
                in_marked.insert(i);
            }
        }
    }
    let fraction = in_marked.len() as f64 / states.len() as f64;
    outcome(
        fraction < 0.01,
        format!(
            "{} of {} states ({:.3}%) in marked cells; {} states inside any property box; {marked_cells} marked cells",
            in_marked.len(),
            states.len(),
            100.0 * fraction,
            in_boxes.len()
        ),
    )
}

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("SAFERL_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |c: usize| only.as_ref().is_none_or(|o| o.contains(&c));
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let mut run = |c: usize, f: &mut dyn FnMut() -> Outcome| {
        if wanted(c) {
            eprintln!("running criterion {c}");
            let t = Instant::now();
            let o = f();
            results.push((c, o, t.elapsed().as_secs_f64()));
        }
    };
    run(1, &mut criterion_1);
    run(2, &mut criterion_2);
    run(4, &mut criterion_4);
    run(5, &mut criterion_5);
    run(6, &mut criterion_6);
    run(7, &mut criterion_7);
    let trained = [8, 9, 10].iter().any(|&c| wanted(c)).then(|| train_both(dir.path()));
    if let Some(t) = &trained {
        run(8, &mut || criterion_8(t));
        run(9, &mut || criterion_9(t, dir.path()));
        run(10, &mut || criterion_10(t, dir.path()));
    }
    run(3, &mut criterion_3);

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (c, o, secs) in &results {
        println!(
            "criterion {c:>2}: {} ({secs:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
}
