//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use evoframe::ddpg::{Batch, DdpgAgent, DdpgConfig, Transition};
use evoframe::efsm::{ActionBin, ProbDist, TransitionModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Matrix = Vec<Vec<f64>>;

/// Near-deterministic 3-state chain: action 1 mostly stays, action 2 mostly
/// rotates forward.
pub fn chain_fixture() -> [Matrix; 2] {
    [
        vec![vec![0.99, 0.01, 0.0], vec![0.0, 0.99, 0.01], vec![0.01, 0.0, 0.99]],
        vec![vec![0.0, 0.995, 0.005], vec![0.005, 0.0, 0.995], vec![0.995, 0.005, 0.0]],
    ]
}

fn draw(row: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    row.len() - 1
}

/// A simulated state path under alternating actions: `(action, from, to)`.
pub fn sample_path(chain: &[Matrix], steps_per_action: usize, seed: u64) -> Vec<(usize, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = 0;
    (0..steps_per_action * chain.len())
        .map(|t| {
            let a = t % chain.len();
            let next = draw(&chain[a][s], &mut rng);
            let step = (a, s, next);
            s = next;
            step
        })
        .collect()
}

/// Transition matrices identified by the crate from one-hot pairs.
pub fn identified(path: &[(usize, usize, usize)], states: usize, actions: usize, phi: f64, init_mass: f64) -> Vec<Matrix> {
    let mut model = TransitionModel::new(actions, phi, init_mass);
    for _ in 0..states {
        model.expand();
    }
    for &(a, i, j) in path {
        let tau = ProbDist::one_hot(states, i);
        let gamma = ProbDist::one_hot(states, j);
        model.identify(&tau, &gamma, ActionBin::new(a + 1)).unwrap();
    }
    (1..=actions).map(|r| model.tpm(ActionBin::new(r)).unwrap().to_vec()).collect()
}

fn normalize_rows(counts: Matrix) -> Matrix {
    counts
        .into_iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.into_iter().map(|c| c / s).collect()
        })
        .collect()
}

/// Transition frequencies weighting the k-th of T visits to an action by
/// `phi (1 - phi)^(T - k)`, on top of the decayed initial mass.
pub fn discounted_frequencies(
    path: &[(usize, usize, usize)],
    states: usize,
    actions: usize,
    phi: f64,
    init_mass: f64,
) -> Vec<Matrix> {
    (0..actions)
        .map(|a| {
            let visits: Vec<_> = path.iter().filter(|s| s.0 == a).collect();
            let total = visits.len() as i32;
            let mut counts = vec![vec![init_mass * (1.0 - phi).powi(total); states]; states];
            for (k, &&(_, i, j)) in visits.iter().enumerate() {
                counts[i][j] += phi * (1.0 - phi).powi(total - 1 - k as i32);
            }
            normalize_rows(counts)
        })
        .collect()
}

/// Plain transition frequency counts.
pub fn frequencies(path: &[(usize, usize, usize)], states: usize, actions: usize) -> Vec<Matrix> {
    (0..actions)
        .map(|a| {
            let mut counts = vec![vec![0.0; states]; states];
            for &(_, i, j) in path.iter().filter(|s| s.0 == a) {
                counts[i][j] += 1.0;
            }
            normalize_rows(counts)
        })
        .collect()
}

pub fn max_abs_diff(a: &[Matrix], b: &[Matrix]) -> f64 {
    a.iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn central_difference(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
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

/// `|g - fd|_2 / max(|g|_2, |fd|_2)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    norm(&diff) / norm(analytic).max(norm(numeric)).max(1e-300)
}

/// Agent at a random parameter point plus a random batch and critic targets.
pub fn gradient_point(seed: u64) -> (DdpgAgent, Batch, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = DdpgAgent::new(DdpgConfig::default(), &mut rng).unwrap();
    let mut jitter = |net: &mut evoframe::ddpg::Mlp| {
        let p: Vec<f64> = net.flat_params().iter().map(|w| w + 0.2 * rng.sample::<f64, _>(StandardNormal)).collect();
        net.set_flat_params(&p);
    };
    jitter(agent.actor_mut());
    jitter(agent.critic_mut());

    let mut obs = || -> [f64; 4] { std::array::from_fn(|k| if k == 3 { rng.gen_range(-1.0..1.0) } else { rng.gen_range(0.0..1.0) }) };
    let batch: Vec<Transition> = (0..8)
        .map(|i| Transition {
            obs: obs(),
            action: 0.0,
            next_obs: obs(),
            reward: 0.0,
            done: i % 3 == 0,
        })
        .collect();
    let mut batch = Batch::from_transitions(&batch);
    batch.actions.mapv_inplace(|_| rng.gen_range(-2.0..2.0));
    let targets = (0..batch.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
    (agent, batch, targets)
}

/// Relative errors of the critic-loss and actor-objective gradients.
pub fn gradient_errors(seed: u64) -> (f64, f64) {
    const H: f64 = 1e-6;
    let (agent, batch, targets) = gradient_point(seed);

    let (_, grads) = agent.critic_gradients(&batch, &targets);
    let mut probe = agent.clone();
    let numeric = central_difference(&agent.critic().flat_params(), H, |p| {
        probe.critic_mut().set_flat_params(p);
        probe.critic_loss(&batch, &targets)
    });
    let critic = relative_error(&grads.flatten(), &numeric);

    let (_, grads) = agent.actor_gradients(&batch.obs);
    let mut probe = agent.clone();
    let numeric = central_difference(&agent.actor().flat_params(), H, |p| {
        probe.actor_mut().set_flat_params(p);
        probe.actor_objective(&batch.obs)
    });
    let actor = relative_error(&grads.flatten(), &numeric);
    (critic, actor)
}
