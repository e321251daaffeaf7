use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evoframe::harness::{self, ExperimentConfig, SUMMARY_FILE};

#[derive(Parser)]
#[command(version, about = "Car-following DDPG with an evolving finite state machine shield")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Train a battery of runs and write episodes.csv and summary.json.
    Run {
        /// TOML or JSON experiment configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        framework: Option<Switch>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// 10 runs of 1500 episodes; explicit --runs/--episodes still win.
        #[arg(long)]
        full: bool,
        /// Write a per-step CSV for every episode.
        #[arg(long)]
        trace: bool,
    },
    /// Recompute summary.json from a battery's episodes.csv.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Draw moving-average charts for a battery or a directory of batteries.
    Plot {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(command: Command) -> evoframe::Result<()> {
    match command {
        Command::Run {
            config,
            framework,
            runs,
            episodes,
            seed,
            out,
            full,
            trace,
        } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => ExperimentConfig::default(),
            };
            if full {
                cfg.apply_full_preset();
            }
            let exp = &mut cfg.experiment;
            if let Some(f) = framework {
                exp.framework = matches!(f, Switch::On);
            }
            exp.runs = runs.unwrap_or(exp.runs);
            exp.episodes = episodes.unwrap_or(exp.episodes);
            exp.seed = seed.unwrap_or(exp.seed);
            exp.out_dir = out.unwrap_or(exp.out_dir.clone());
            exp.trace |= trace;

            let total = exp.episodes;
            let progress = move |r: &harness::EpisodeRecord| {
                if r.episode.is_multiple_of(50) || r.episode == total {
                    eprintln!("run {} episode {}/{total}: {:?} after {} steps", r.run, r.episode, r.outcome, r.steps);
                }
            };
            let records = harness::run_experiment_with(&cfg, &progress)?;
            let summary = harness::summarize(&records, cfg.experiment.moving_average_window, Some(cfg.experiment.framework))?;
            print_summary(&summary);
            println!("results in {}", cfg.experiment.out_dir.display());
        }
        Command::Summarize { input } => {
            let summary = harness::summarize_dir(&input)?;
            summary.save(&input.join(SUMMARY_FILE))?;
            print_summary(&summary);
        }
        Command::Plot { input, out } => {
            let summaries = harness::collect_summaries(&input)?;
            for path in harness::emit_plots(&summaries, &out)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn print_summary(s: &harness::Summary) {
    let arm = match s.framework {
        Some(true) => "with framework",
        Some(false) => "without framework",
        None => "unknown arm",
    };
    println!("{arm}: {} runs, {} episodes in total", s.runs, s.episodes);
    println!(
        "success {} ({})  large-distance {}  collision {}",
        s.success,
        s.success_label(),
        s.large_distance,
        s.collision
    );
    println!("mean interventions per episode {:.3}", s.mean_interventions);
    if let (Some(m), Some(v)) = (s.vel_diff_mean, s.vel_diff_var) {
        println!("velocity difference over successes: mean {m:.4}, variance {v:.4}");
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
