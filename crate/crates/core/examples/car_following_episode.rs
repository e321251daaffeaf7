//! Drives the simulator with a hand-written gap controller and reports how
//! episodes end. Also saves the last lead profile as a CSV that `[env]
//! profile = { kind = "csv", path = ... }` can replay.

use std::collections::BTreeMap;

use evoframe::env::{CarFollowing, EnvConfig, Termination};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Full brake when the closing speed would eat the gap, otherwise a
/// proportional pull toward a 20 m + 1 s gap.
fn gap_controller(ego_v: f64, lead_v: f64, headway: f64) -> f64 {
    let closing = ego_v - lead_v;
    let stopping = if closing > 0.0 { closing * closing / 4.0 } else { 0.0 };
    if stopping > headway - 3.0 {
        -2.0
    } else {
        (0.2 * (headway - 20.0 - ego_v) - 0.8 * closing).clamp(-2.0, 2.0)
    }
}

fn main() -> evoframe::Result<()> {
    let mut env = CarFollowing::new(EnvConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    env.reset(&mut rng);
    println!(
        "start: ego {:.1} m/s, lead {:.1} m/s, headway {:.1} m",
        env.ego().velocity,
        env.lead().velocity,
        env.headway()
    );
    let mut min_gap = f64::INFINITY;
    let end = loop {
        let a = gap_controller(env.ego().velocity, env.lead().velocity, env.headway());
        let out = env.step(a);
        min_gap = min_gap.min(out.headway);
        if out.step % 160 == 0 {
            println!(
                "step {:3}: ego {:5.2} m/s  lead {:5.2} m/s  headway {:6.2} m",
                out.step, out.ego.velocity, out.lead.velocity, out.headway
            );
        }
        if let Some(t) = out.termination {
            break (t, out.step);
        }
    };
    println!("ended by {:?} at step {}, closest gap {min_gap:.2} m", end.0, end.1);

    let mut outcomes: BTreeMap<String, usize> = BTreeMap::new();
    for _ in 0..500 {
        env.reset(&mut rng);
        let t = loop {
            let a = gap_controller(env.ego().velocity, env.lead().velocity, env.headway());
            if let Some(t) = env.step(a).termination {
                break t;
            }
        };
        *outcomes.entry(format!("{t:?}")).or_default() += 1;
    }
    println!("500 episodes: {outcomes:?}");
    let survived = outcomes.get(&format!("{:?}", Termination::MaxSteps)).copied().unwrap_or(0);
    println!("survival rate {:.1}%", 100.0 * survived as f64 / 500.0);

    let path = std::env::temp_dir().join("lead_profile.csv");
    env.profile().write_csv(&path)?;
    println!("lead profile written to {}", path.display());
    Ok(())
}
