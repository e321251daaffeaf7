//! Compares hand-written backpropagation with central finite differences
//! for the critic loss and the actor objective.

use evoframe::ddpg::{Batch, DdpgAgent, DdpgConfig, Transition};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn central_difference(params: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let h = 1e-6;
    let mut p = params.to_vec();
    (0..p.len())
        .map(|k| {
            let x = p[k];
            p[k] = x + h;
            let up = f(&p);
            p[k] = x - h;
            let down = f(&p);
            p[k] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    diff / norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()))
}

fn main() -> evoframe::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let config = DdpgConfig {
        hidden: vec![32, 32],
        ..DdpgConfig::default()
    };
    let agent = DdpgAgent::new(config, &mut rng)?;
    let transitions: Vec<Transition> = (0..16)
        .map(|_| Transition {
            obs: [rng.gen(), rng.gen(), rng.gen(), rng.gen_range(-1.0..1.0)],
            action: rng.gen_range(-2.0..2.0),
            next_obs: [rng.gen(), rng.gen(), rng.gen(), rng.gen_range(-1.0..1.0)],
            reward: rng.gen_range(-3.0..0.0),
            done: rng.gen_bool(0.1),
        })
        .collect();
    let batch = Batch::from_transitions(&transitions);
    let targets = agent.targets(&batch);

    let (loss, grads) = agent.critic_gradients(&batch, &targets);
    let mut probe = agent.clone();
    let numeric = central_difference(&agent.critic().flat_params(), |p| {
        probe.critic_mut().set_flat_params(p);
        probe.critic_loss(&batch, &targets)
    });
    println!(
        "critic: loss {loss:.5}, {} parameters, relative error {:.2e}",
        numeric.len(),
        relative_error(&grads.flatten(), &numeric)
    );

    let (objective, grads) = agent.actor_gradients(&batch.obs);
    let mut probe = agent.clone();
    let numeric = central_difference(&agent.actor().flat_params(), |p| {
        probe.actor_mut().set_flat_params(p);
        probe.actor_objective(&batch.obs)
    });
    println!(
        "actor: objective {objective:.5}, {} parameters, relative error {:.2e}",
        numeric.len(),
        relative_error(&grads.flatten(), &numeric)
    );
    Ok(())
}
