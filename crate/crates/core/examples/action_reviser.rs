//! The action reviser on a hand-built three-state model: cruising, too
//! close (flagged after a collision) and too far (flagged after losing the
//! lead).

use evoframe::efsm::{ClusterState, EfsmConfig, EvolvingModel, Flag, ProbDist, TransitionModel};
use evoframe::reviser::{exploration_variance, inspect, variant_threshold, ActionReviser, ReviserConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(center: [f64; 3], flag: Flag) -> ClusterState {
    ClusterState {
        center: center.to_vec(),
        variance: 0.05,
        support_count: 10,
        flag,
    }
}

fn main() -> evoframe::Result<()> {
    // Strong acceleration (bins 16+) closes in, hard braking (bins 1-4)
    // falls behind, anything else keeps cruising.
    let mats = (1..=20)
        .map(|r| {
            let row = match r {
                16.. => vec![0.2, 0.8, 0.0],
                ..=4 => vec![0.3, 0.0, 0.7],
                _ => vec![1.0, 0.0, 0.0],
            };
            vec![row.clone(), row.clone(), row]
        })
        .collect();
    let model = EvolvingModel::from_parts(
        EfsmConfig::default(),
        vec![
            state([0.5, 0.1, 0.5], Flag::None),
            state([0.6, 0.0, 0.4], Flag::UnfavorableSafety),
            state([0.3, 0.9, 0.6], Flag::UnfavorableSpeed),
        ],
        TransitionModel::from_matrices(mats, 0.1, 1e-6)?,
    )?;
    let reviser = ActionReviser::new(ReviserConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let cruising = ProbDist::one_hot(3, 0);

    let pred = model.predict_next(&cruising, reviser.grid().encode(1.8))?;
    println!(
        "prediction after +1.8: {:?}, threshold {:.2}, verdict {:?}",
        pred.as_slice(),
        variant_threshold(pred.as_slice()),
        inspect(&pred, &model.flags(), reviser.config().scan_order)
    );

    for a in [1.8, 0.4, -1.7] {
        let quiet = reviser.revise_with_variance(&cruising, a, &model, 100, 0.0, &mut rng)?;
        println!(
            "a = {a:+.1}: {:?}, revised to {:+.2} (bin {:?} -> {:?})",
            quiet.indicator,
            quiet.action,
            quiet.original_bin.map(|b| b.get()),
            quiet.revised_bin.map(|b| b.get())
        );
    }

    let early = reviser.revise(&cruising, 1.8, &model, 10, &mut rng)?;
    println!("episode 10 is before activation: intervened = {}", early.intervened);
    for episode in [100, 2_000, 20_000] {
        let v = exploration_variance(2.0, reviser.config().decay, episode);
        let out = reviser.revise(&cruising, 1.8, &model, episode, &mut rng)?;
        println!("episode {episode:>6}: noise variance {v:.3}, revised action {:+.3}", out.action);
    }
    Ok(())
}
