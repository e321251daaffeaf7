use evoframe::ddpg::{ReplayBuffer, Transition};
use evoframe::efsm::{ActionBin, ClusterState, EfsmConfig, EvolvingModel, Flag, ProbDist, TransitionModel};
use evoframe::reviser::{exploration_variance, variant_threshold, ActionGrid, ActionReviser, Indicator, ReviserConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dist(n: usize, rng: &mut impl Rng) -> ProbDist {
    // Mix of sharp and flat distributions, occasionally one-hot.
    if rng.gen_bool(0.2) {
        return ProbDist::one_hot(n, rng.gen_range(0..n));
    }
    let sharpness = rng.gen_range(0.5..8.0);
    ProbDist::from_weights((0..n).map(|_| rng.gen::<f64>().powf(sharpness) + 1e-12).collect()).unwrap()
}

#[derive(Debug, Clone)]
enum Op {
    Expand,
    Identify { seed: u64, bin: usize },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        1 => Just(Op::Expand),
        19 => (any::<u64>(), 1..=4usize).prop_map(|(seed, bin)| Op::Identify { seed, bin }),
    ]
}

fn assert_row_stochastic(model: &TransitionModel) {
    for r in 1..=model.action_count() {
        for row in model.tpm(ActionBin::new(r)).unwrap() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-9, "row sums to {sum}");
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tpm_rows_stay_stochastic(ops in prop::collection::vec(op(), 1000), phi in 0.001..1.0f64) {
        let mut model = TransitionModel::new(4, phi, 1e-6);
        model.expand();
        for op in ops {
            match op {
                Op::Expand => model.expand(),
                Op::Identify { seed, bin } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let n = model.states();
                    let prev = random_dist(n, &mut rng);
                    let cur = random_dist(n, &mut rng);
                    model.identify(&prev, &cur, ActionBin::new(bin)).unwrap();
                }
            }
        }
        assert_row_stochastic(&model);
    }
}

fn random_states(n: usize, rng: &mut impl Rng) -> Vec<ClusterState> {
    (0..n)
        .map(|_| ClusterState {
            center: (0..3).map(|_| rng.gen_range(0.0..1.0)).collect(),
            variance: rng.gen_range(0.01..0.5),
            support_count: rng.gen_range(1..100),
            flag: Flag::None,
        })
        .collect()
}

fn model_with(states: Vec<ClusterState>, transitions: TransitionModel) -> EvolvingModel {
    let config = EfsmConfig {
        actions: transitions.action_count(),
        ..EfsmConfig::default()
    };
    EvolvingModel::from_parts(config, states, transitions).unwrap()
}

fn empty_transitions(n: usize, actions: usize) -> TransitionModel {
    let mut t = TransitionModel::new(actions, 0.1, 1e-6);
    (0..n).for_each(|_| t.expand());
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn state_probabilities_normalize(seed in any::<u64>(), n in 1..=50usize, far in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = model_with(random_states(n, &mut rng), empty_transitions(n, 1));
        let span = if far { -3.0..4.0 } else { 0.0..1.0 };
        let z: Vec<f64> = (0..3).map(|_| rng.gen_range(span.clone())).collect();
        let p = model.state_probabilities(&z).unwrap();
        let sum: f64 = p.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-9);
        prop_assert!(p.as_slice().iter().all(|x| x.is_finite() && *x >= 0.0));
    }
}

proptest! {
    #[test]
    fn clustering_keeps_variances_positive(points in prop::collection::vec(prop::array::uniform3(0.0..1.0f64), 1..300)) {
        let mut model = EvolvingModel::new(EfsmConfig::default()).unwrap();
        for z in &points {
            let before = model.state_count();
            let update = model.observe(z);
            prop_assert_eq!(update.is_new(), model.state_count() == before + 1);
            prop_assert!(model.states().iter().all(|s| s.variance >= 0.01));
        }
        prop_assert_eq!(model.transitions().states(), model.state_count());
    }

    #[test]
    fn grid_roundtrip_within_half_width(a in -2.0..=2.0f64) {
        let grid = ActionGrid::new(-2.0, 2.0, 0.2).unwrap();
        prop_assert!((grid.decode(grid.encode(a)) - a).abs() <= 0.1 + 1e-12);
    }

    #[test]
    fn threshold_ignores_order(w in prop::collection::vec(0.001..1.0f64, 1..30), seed in any::<u64>()) {
        let d = ProbDist::from_weights(w).unwrap();
        let base = variant_threshold(d.as_slice());
        let mut shuffled = d.as_slice().to_vec();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(variant_threshold(&shuffled), base);
        prop_assert!(d.as_slice().contains(&base));
    }

    #[test]
    fn exploration_variance_is_non_increasing(k in 1e-4..1.0f64, ep in 1..100_000u64) {
        let v = exploration_variance(2.0, k, ep);
        prop_assert!(exploration_variance(2.0, k, ep + 1) <= v);
        if (ep as f64) <= 1.0 / k {
            prop_assert_eq!(v, 2.0);
        }
    }

    #[test]
    fn replay_keeps_newest_within_capacity(capacity in 1..64usize, pushes in 0..200usize) {
        let mut buffer = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            buffer.push(Transition { obs: [i as f64; 4], action: 0.0, next_obs: [0.0; 4], reward: 0.0, done: false });
        }
        prop_assert_eq!(buffer.len(), pushes.min(capacity));
        let mut stored: Vec<usize> = buffer.iter().map(|t| t.obs[0] as usize).collect();
        stored.sort_unstable();
        let expected: Vec<usize> = (pushes.saturating_sub(capacity)..pushes).collect();
        prop_assert_eq!(stored, expected);
    }
}

fn random_reviser_model(seed: u64) -> (EvolvingModel, ProbDist) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..6);
    let flags = [Flag::None, Flag::UnfavorableSafety, Flag::UnfavorableSpeed];
    let mut states = random_states(n, &mut rng);
    for s in &mut states {
        s.flag = flags[rng.gen_range(0..3)];
    }
    let mats = (0..20)
        .map(|_| (0..n).map(|_| random_dist(n, &mut rng).as_slice().to_vec()).collect())
        .collect();
    let transitions = TransitionModel::from_matrices(mats, 0.1, 1e-6).unwrap();
    let dist = random_dist(n, &mut rng);
    (model_with(states, transitions), dist)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn revise_invariants(seed in any::<u64>(), a in -2.0..=2.0f64, episode in 1..3000u64) {
        let (model, dist) = random_reviser_model(seed);
        let reviser = ActionReviser::new(ReviserConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let noisy = reviser.revise(&dist, a, &model, episode, &mut rng).unwrap();
        prop_assert!((-2.0..=2.0).contains(&noisy.action));

        let quiet = reviser.revise_with_variance(&dist, a, &model, episode, 0.0, &mut rng).unwrap();
        let again = reviser.revise_with_variance(&dist, a, &model, episode, 0.0, &mut rng).unwrap();
        prop_assert_eq!(quiet, again);

        let original = reviser.grid().encode(a);
        match (quiet.indicator, quiet.revised_bin) {
            (Indicator::Collision, Some(bin)) => prop_assert!(bin <= original),
            (Indicator::LargeDistance, Some(bin)) => prop_assert!(bin >= original),
            _ => {
                prop_assert!(!quiet.intervened);
                prop_assert_eq!(quiet.action, a);
            }
        }
        if episode < 50 || !model.has_flagged() {
            prop_assert!(!noisy.intervened);
            prop_assert_eq!(noisy.action, a);
        }
    }

    #[test]
    fn unflagged_models_never_intervene(seed in any::<u64>(), a in -2.0..=2.0f64, episode in 1..3000u64) {
        let (model, dist) = random_reviser_model(seed);
        let states = model.states().iter().cloned().map(|s| ClusterState { flag: Flag::None, ..s }).collect();
        let clean = model_with(states, model.transitions().clone());
        let reviser = ActionReviser::new(ReviserConfig::default()).unwrap();
        let out = reviser.revise(&dist, a, &clean, episode, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(!out.intervened);
        prop_assert_eq!(out.action, a);
    }
}
