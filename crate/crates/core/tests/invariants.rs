use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saferl_core::environment::{reward_fn, Action, EnvConfig, EnvState, PenaltyScope};
use saferl_core::interval::{propagate, IntervalBox};
use saferl_core::network::argmax;
use saferl_core::property::{default_suite, parse_suite};
use saferl_core::verifier::{grid_oracle, split, verify, VerifyConfig};
use saferl_core::{Activation, Condition, Layer, Matrix, Network, SafetyProperty};

fn random_network(rng: &mut impl Rng, sizes: &[usize]) -> Network {
    let n = sizes.len() - 1;
    let layers = (0..n)
        .map(|l| {
            let data = (0..sizes[l] * sizes[l + 1]).map(|_| rng.random_range(-1.5..1.5)).collect();
            let biases = (0..sizes[l + 1]).map(|_| rng.random_range(-0.5..0.5)).collect();
            let act = if l + 1 == n { Activation::Identity } else { Activation::Relu };
            Layer::new(Matrix::from_row_major(sizes[l + 1], sizes[l], data).unwrap(), biases, act).unwrap()
        })
        .collect();
    Network::new(layers).unwrap()
}

fn random_sizes(rng: &mut impl Rng, inputs: usize, outputs: usize) -> Vec<usize> {
    let mut sizes = vec![inputs];
    for _ in 0..rng.random_range(1..3) {
        sizes.push(rng.random_range(1..10));
    }
    sizes.push(outputs);
    sizes
}

fn random_box(rng: &mut impl Rng, dim: usize) -> IntervalBox {
    let b: Vec<(f64, f64)> = (0..dim)
        .map(|_| {
            let lo = rng.random_range(-2.0..2.0);
            (lo, lo + rng.random_range(0.0..1.5))
        })
        .collect();
    IntervalBox::from_bounds(&b).unwrap()
}

fn sample_in(rng: &mut impl Rng, b: &IntervalBox) -> Vec<f64> {
    b.dims().iter().map(|d| (d.lo() + d.width() * rng.random::<f64>()).min(d.hi())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagated_bounds_contain_concrete_outputs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = rng.random_range(1..5);
        let outputs = rng.random_range(1..5);
        let sizes = random_sizes(&mut rng, inputs, outputs);
        let net = random_network(&mut rng, &sizes);
        let b = random_box(&mut rng, inputs);
        let out = propagate(&net, &b).unwrap();
        for _ in 0..200 {
            let x = sample_in(&mut rng, &b);
            let y = net.forward(&x).unwrap();
            prop_assert!(out.contains(&y), "{y:?} escapes {out}");
        }
        for corner in [b.lower(), b.upper(), b.center()] {
            prop_assert!(out.contains(&net.forward(&corner).unwrap()));
        }
    }

    #[test]
    fn point_boxes_propagate_exactly(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = rng.random_range(1..5);
        let sizes = random_sizes(&mut rng, inputs, 3);
        let net = random_network(&mut rng, &sizes);
        let x: Vec<f64> = (0..inputs).map(|_| rng.random_range(-3.0..3.0)).collect();
        let out = propagate(&net, &IntervalBox::from_point(&x).unwrap()).unwrap();
        let y = net.forward(&x).unwrap();
        prop_assert_eq!(out.lower(), y.clone());
        prop_assert_eq!(out.upper(), y);
    }

    #[test]
    fn propagation_is_inclusion_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = rng.random_range(1..4);
        let sizes = random_sizes(&mut rng, inputs, 2);
        let net = random_network(&mut rng, &sizes);
        let outer = random_box(&mut rng, inputs);
        let inner: Vec<(f64, f64)> = outer.dims().iter().map(|d| {
            let a = d.lo() + d.width() * rng.random::<f64>();
            let b = d.lo() + d.width() * rng.random::<f64>();
            (a.min(b), a.max(b))
        }).collect();
        let inner = IntervalBox::from_bounds(&inner).unwrap();
        let po = propagate(&net, &outer).unwrap();
        let pi = propagate(&net, &inner).unwrap();
        prop_assert!(pi.is_subset_of(&po));
    }

    #[test]
    fn split_partitions_the_box(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = rng.random_range(1..5);
        let original = random_box(&mut rng, dim);
        prop_assume!(original.widths().iter().any(|&w| w > 0.0));
        let (l, r) = split(&original, &original, 1.0 / 1024.0).unwrap();
        prop_assert_eq!(l.hull(&r).unwrap(), original.clone());
        let differing: Vec<usize> = (0..dim).filter(|&d| l.get(d) != r.get(d)).collect();
        prop_assert_eq!(differing.len(), 1);
        let d = differing[0];
        prop_assert_eq!(l.get(d).hi(), r.get(d).lo());
        let rel = (l.volume() + r.volume() - original.volume()).abs() / original.volume().max(1e-300);
        prop_assert!(original.volume() == 0.0 || rel < 1e-12);
    }

    #[test]
    fn argmax_ignores_constant_shift(values in prop::collection::vec(-50i32..50, 1..30), shift in -100i32..100) {
        let v: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        let shifted: Vec<f64> = v.iter().map(|x| x + f64::from(shift)).collect();
        prop_assert_eq!(argmax(&v), argmax(&shifted));
        let best = argmax(&v);
        prop_assert!(v.iter().all(|&x| x <= v[best]));
        prop_assert!(v[..best].iter().all(|&x| x < v[best]));
    }

    #[test]
    fn network_json_round_trips_bit_exactly(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = random_sizes(&mut rng, 3, 4);
        let net = random_network(&mut rng, &sizes);
        let back = Network::from_json(&net.to_json()).unwrap();
        prop_assert_eq!(&back, &net);
        let x = [0.1, -0.2, 0.3];
        prop_assert_eq!(back.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn action_encoding_round_trips(ax in -1i8..=1, ay in -1i8..=1, az in -1i8..=1) {
        let a = Action::encode([ax, ay, az]);
        prop_assert_eq!(a.alpha(), [ax, ay, az]);
        prop_assert_eq!(Action::new(a.index()).unwrap(), a);
    }

    #[test]
    fn collision_free_rewards_stay_in_phase_ranges(seed in any::<u64>()) {
        let config = EnvConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut state, _) = config.reset(rng.random());
        for _ in 0..200 {
            let a = Action::new(rng.random_range(0..27)).unwrap();
            let t = config.step(&state, a, &PenaltyScope::all()).unwrap();
            if !t.info.penalized {
                let (lo, hi) = if t.state.gripper == 0 { (-1.0, -0.5) } else { (-0.5, 0.0) };
                prop_assert!(t.reward >= lo && t.reward <= hi, "{} outside [{lo}, {hi}]", t.reward);
            }
            if t.done { break; }
            state = t.state;
        }
    }
}

#[test]
fn reward_increases_as_distance_shrinks() {
    let config = EnvConfig::default();
    let goal = config.tumour_pos;
    let state_at = |dy: f64| EnvState {
        gripper: 0,
        position: [goal[0], goal[1] + dy, goal[2]],
        steps_taken: 0,
        grasp_point: None,
        done: false,
    };
    let mut prev = f64::NEG_INFINITY;
    for k in (0..30).rev() {
        let r = reward_fn(&state_at(k as f64), false, &config);
        assert!(r > prev || k == 0 && r >= prev);
        prev = r;
    }
}

#[test]
fn default_suite_round_trips() {
    let suite = default_suite(&EnvConfig::default()).unwrap();
    let back = parse_suite(&suite.to_json()).unwrap();
    assert_eq!(back, suite);
}

fn half_property(dim: usize) -> SafetyProperty {
    SafetyProperty {
        name: "half".into(),
        description: String::new(),
        input_box: IntervalBox::from_bounds(&vec![(0.0, 1.0); dim]).unwrap(),
        condition: Condition::ActionNotSelected {
            unsafe_actions: [0].into_iter().collect(),
        },
    }
}

#[test]
fn verifier_rates_bound_the_grid_oracle_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..15 {
        let dim = rng.random_range(1..3);
        let sizes = random_sizes(&mut rng, dim, 3);
        let net = random_network(&mut rng, &sizes);
        let p = half_property(dim);
        let cfg = VerifyConfig {
            min_width_fraction: 1.0 / 256.0,
            ..Default::default()
        };
        let r = verify(&net, &p, &cfg).unwrap();
        let sum = r.proved_rate + r.violated_rate + r.undecided_rate;
        assert!((sum - 1.0).abs() < 1e-9);
        assert_eq!(r.violation_rate, r.violated_rate + r.undecided_rate);
        let points = if dim == 1 { 2001 } else { 201 };
        let oracle = grid_oracle(&net, &p, points).unwrap();
        let tolerance = dim as f64 / points as f64;
        assert!(r.violation_rate + tolerance >= oracle, "{} < {oracle}", r.violation_rate);
        for c in &r.counterexamples {
            assert_eq!(argmax(&net.forward(&c.input).unwrap()), 0);
            assert!(c.subarea.contains(&c.input));
        }
    }
}

#[test]
fn worker_count_does_not_change_reports() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = random_network(&mut rng, &[3, 12, 12, 4]);
    let p = half_property(3);
    let run = |workers| {
        let cfg = VerifyConfig {
            min_width_fraction: 1.0 / 64.0,
            workers,
            ..Default::default()
        };
        verify(&net, &p, &cfg).unwrap()
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.violation_rate, b.violation_rate);
    assert_eq!(a.proved_rate, b.proved_rate);
    assert_eq!(a.subareas_examined, b.subareas_examined);
    assert_eq!(a.counterexample_count, b.counterexample_count);
    let inputs = |r: &saferl_core::VerificationReport| r.counterexamples.iter().map(|c| c.input.clone()).collect::<Vec<_>>();
    assert_eq!(inputs(&a), inputs(&b));
}
