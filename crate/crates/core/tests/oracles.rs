mod common;

use common::*;
use evoframe::ddpg::OuNoise;
use evoframe::efsm::{EfsmConfig, EvolvingModel, StateUpdate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn recursion_matches_discounted_frequencies() {
    let chain = chain_fixture();
    for seed in 0..5 {
        let path = sample_path(&chain, 10_000, seed);
        let est = identified(&path, 3, 2, 0.01, 1e-6);
        let oracle = discounted_frequencies(&path, 3, 2, 0.01, 1e-6);
        assert!(max_abs_diff(&est, &oracle) < 1e-9);
        assert!(max_abs_diff(&est, &chain) < 0.05);
    }
}

#[test]
fn plain_counts_recover_a_diffuse_chain() {
    let chain = [
        vec![vec![0.9, 0.05, 0.05], vec![0.05, 0.9, 0.05], vec![0.05, 0.05, 0.9]],
        vec![vec![0.05, 0.9, 0.05], vec![0.05, 0.05, 0.9], vec![0.9, 0.05, 0.05]],
    ];
    let path = sample_path(&chain, 10_000, 11);
    assert!(max_abs_diff(&frequencies(&path, 3, 2), &chain) < 0.02);
    let est = identified(&path, 3, 2, 0.01, 1e-6);
    assert!(max_abs_diff(&est, &discounted_frequencies(&path, 3, 2, 0.01, 1e-6)) < 1e-9);
}

#[test]
fn full_forgetting_tracks_the_last_transition() {
    let chain = chain_fixture();
    let path = sample_path(&chain, 50, 3);
    let est = identified(&path, 3, 2, 1.0, 1e-6);
    for (a, tpm) in est.iter().enumerate() {
        let &(_, i, j) = path.iter().rev().find(|s| s.0 == a).unwrap();
        assert_eq!(tpm[i][j], 1.0);
    }
}

#[test]
fn ou_long_run_variance() {
    let mut noise = OuNoise::new(0.15, 0.4, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let xs: Vec<f64> = (0..n).map(|_| noise.step(&mut rng)).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let target = noise.stationary_variance();
    assert!((target - 0.16 / 0.3).abs() < 1e-12);
    assert!((var - target).abs() / target < 0.1, "variance {var} vs {target}");
}

#[test]
fn gradients_match_central_differences() {
    for seed in 0..10 {
        let (critic, actor) = gradient_errors(seed);
        assert!(critic < 1e-4, "critic relative error {critic} at point {seed}");
        assert!(actor < 1e-4, "actor relative error {actor} at point {seed}");
    }
}

#[test]
fn distant_sample_founds_a_state() {
    // exp(-3 / 0.05) is far below 0.3.
    let mut model = EvolvingModel::new(EfsmConfig::default()).unwrap();
    assert_eq!(model.observe(&[0.0, 0.0, 0.0]), StateUpdate::New(0));
    assert_eq!(model.observe(&[1.0, 1.0, 1.0]), StateUpdate::New(1));
    // exp(-0.0003 / 0.05) = 0.994 joins state 0.
    assert_eq!(model.observe(&[0.01, 0.01, 0.01]), StateUpdate::Existing(0));
    assert_eq!(model.state_count(), 2);
}

#[test]
fn equidistant_states_split_evenly() {
    let mut model = EvolvingModel::new(EfsmConfig::default()).unwrap();
    model.observe(&[0.0, 0.5, 0.5]);
    model.observe(&[1.0, 0.5, 0.5]);
    let p = model.state_probabilities(&[0.5, 0.5, 0.5]).unwrap();
    assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
}
