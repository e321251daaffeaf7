//! Builds an evolving state machine from simulated driving: observations
//! found cluster states, transitions are identified per action bin, and the
//! model then predicts where each action leads.

use evoframe::efsm::{normalize_observation, EfsmConfig, EvolvingModel, Flag};
use evoframe::env::{CarFollowing, EnvConfig, Termination};
use evoframe::reviser::ActionGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> evoframe::Result<()> {
    let grid = ActionGrid::new(-2.0, 2.0, 0.2)?;
    let mut model = EvolvingModel::new(EfsmConfig::default())?;
    let mut env = CarFollowing::new(EnvConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    for episode in 1..=30 {
        env.reset(&mut rng);
        let z = normalize_observation([env.ego().velocity, env.headway(), env.lead().velocity]);
        model.observe(&z);
        let mut dist = model.state_probabilities(&z)?;
        // A random, slowly varying throttle.
        let mut a: f64 = rng.gen_range(-1.0..1.0);
        loop {
            a = (a + rng.gen_range(-0.3..0.3)).clamp(-2.0, 2.0);
            let out = env.step(a);
            let z = normalize_observation([out.ego.velocity, out.headway, out.lead.velocity]);
            model.observe(&z);
            dist.extend_to(model.state_count());
            let current = model.state_probabilities(&z)?;
            model.identify_transition(&dist, &current, grid.encode(out.ego.acceleration))?;
            match out.termination {
                Some(Termination::Collision) => {
                    model.flag_current_state(&current, Flag::UnfavorableSafety)?;
                }
                Some(Termination::LargeDistance) => {
                    model.flag_current_state(&current, Flag::UnfavorableSpeed)?;
                }
                _ => {}
            }
            dist = current;
            if out.termination.is_some() {
                break;
            }
        }
        if episode % 10 == 0 {
            let flagged = model.flags().iter().filter(|f| f.is_unfavorable()).count();
            println!("after {episode} episodes: {} states, {flagged} flagged", model.state_count());
        }
    }

    let busiest = (0..model.state_count())
        .max_by_key(|&i| model.states()[i].support_count)
        .expect("states exist");
    let s = &model.states()[busiest];
    println!(
        "busiest state {busiest}: center {:?}, variance {:.4}, {} samples",
        s.center.iter().map(|c| (c * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
        s.variance,
        s.support_count
    );
    let here = evoframe::efsm::ProbDist::one_hot(model.state_count(), busiest);
    for bin in [1, 10, 20] {
        let bin = evoframe::efsm::ActionBin::new(bin);
        let next = model.predict_next(&here, bin)?;
        let likely = next.argmax();
        println!(
            "bin {bin} ({:+.1} m/s^2): most likely next state {likely} with p = {:.3}",
            grid.decode(bin),
            next[likely]
        );
    }
    let ahead = model.predict_k(&here, evoframe::efsm::ActionBin::new(10), 8)?;
    println!("8 steps ahead under the marginal chain: state {} with p = {:.3}", ahead.argmax(), ahead[ahead.argmax()]);
    Ok(())
}
