//! Trains the DDPG controller alone for a short battery and prints the
//! learning curve in blocks of 50 episodes.

use evoframe::harness::{ExperimentConfig, Run};

fn main() -> evoframe::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.framework = false;
    cfg.experiment.episodes = 300;
    let mut run = Run::new(&cfg, 0)?;

    let mut block = Vec::new();
    for _ in 0..cfg.experiment.episodes {
        let r = run.run_episode(None)?;
        block.push(r);
        if block.len() == 50 {
            let steps = block.iter().map(|r| r.steps as f64).sum::<f64>() / 50.0;
            let reward = block.iter().map(|r| r.cumulative_reward).sum::<f64>() / 50.0;
            let survived = block.iter().filter(|r| !r.outcome.is_failure()).count();
            println!(
                "episodes {:3}-{:3}: mean steps {steps:6.1}, mean return {reward:8.2}, {survived} survived",
                r.episode - 49,
                r.episode
            );
            block.clear();
        }
    }
    println!("replay buffer holds {} transitions", run.buffer().len());

    let ckpt = run.agent().checkpoint(0, run.episodes_done());
    let path = std::env::temp_dir().join(evoframe::ddpg::Checkpoint::file_name(0, run.episodes_done()));
    ckpt.save(&path)?;
    let restored = evoframe::ddpg::DdpgAgent::from_checkpoint(evoframe::ddpg::Checkpoint::load(&path)?)?;
    println!("checkpoint {} restores identically: {}", path.display(), restored.actor() == run.agent().actor());
    Ok(())
}
