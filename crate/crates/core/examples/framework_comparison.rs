//! Runs both arms of the comparison at a small scale, writes each battery to
//! disk and draws the moving-average charts.
//!
//! `cargo run --release --example framework_comparison -- 3 300` runs the
//! desk-scale battery; the defaults are quicker.

use evoframe::harness::{collect_summaries, emit_plots, run_experiment, summarize_dir, ExperimentConfig};

fn main() -> evoframe::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("numeric argument"));
    let runs = args.next().unwrap_or(2) as usize;
    let episodes = args.next().unwrap_or(120);
    let root = std::env::temp_dir().join("evoframe_comparison");

    for framework in [false, true] {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.runs = runs;
        cfg.experiment.episodes = episodes;
        cfg.experiment.framework = framework;
        cfg.experiment.out_dir = root.join(if framework { "with" } else { "without" });
        run_experiment(&cfg)?;
        let s = summarize_dir(&cfg.experiment.out_dir)?;
        println!(
            "framework {:5}: success {} ({}), large-distance {}, collision {}, interventions/episode {:.2}",
            framework,
            s.success,
            s.success_label(),
            s.large_distance,
            s.collision,
            s.mean_interventions
        );
    }

    for chart in emit_plots(&collect_summaries(&root)?, &root.join("charts"))? {
        println!("wrote {}", chart.display());
    }
    Ok(())
}
