//! Multi-run batteries, their persisted outputs and post-processing.
//!
//! A battery directory holds:
//!
//! - `config.json`: the resolved [`ExperimentConfig`]
//! - `episodes.csv`: one [`EpisodeRecord`] per line, ordered by run then episode
//! - `interventions.csv`: one [`InterventionRecord`] per revised action
//! - `summary.json`: the [`Summary`] of `episodes.csv`
//! - `efsm_run{r}.json`: final e-FSM snapshot of run `r` (framework only)
//! - `checkpoints/run{rrr}_ep{eeeee}.json`: controller checkpoints
//! - `traces/run{r}_ep{e}.csv`: per-step traces when tracing is enabled
//!
//! While a battery runs, each run appends to `episodes.run{r}.csv` and
//! `interventions.run{r}.csv`, flushing after every episode; the parts are
//! merged once all runs finish.

mod config;
mod plot;
mod record;
mod runner;
mod summary;

use std::path::{Path, PathBuf};
use std::sync::Arc;

pub use config::{BufferAction, ExperimentConfig, ExperimentSettings};
pub use plot::{emit_plots, line_chart, Series};
pub use record::{read_records, write_records, EpisodeRecord, Outcome, RecordWriter};
pub use runner::{stream_rng, InterventionRecord, Run, Stream, TraceRow};
pub use summary::{moving_average, summarize, window_mean, Summary};

use crate::ddpg::Checkpoint;
use crate::env::{LeadProfile, ProfileSource};
use crate::error::{Error, Result};

pub const CONFIG_FILE: &str = "config.json";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const INTERVENTIONS_FILE: &str = "interventions.csv";

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn part_file(out: &Path, stem: &str, run: usize) -> PathBuf {
    out.join(format!("{stem}.run{run}.csv"))
}

fn write_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Concatenates per-run CSV parts under one header and removes them.
fn merge_parts(out: &Path, stem: &str, runs: usize) -> Result<()> {
    let target = out.join(format!("{stem}.csv"));
    let mut merged = String::new();
    for run in 0..runs {
        let part = part_file(out, stem, run);
        let text = std::fs::read_to_string(&part).map_err(|e| Error::io(&part, e))?;
        let mut lines = text.split_inclusive('\n');
        let header = lines.next().unwrap_or_default();
        if merged.is_empty() {
            merged.push_str(header);
        }
        lines.for_each(|l| merged.push_str(l));
        std::fs::remove_file(&part).map_err(|e| Error::io(&part, e))?;
    }
    std::fs::write(&target, merged).map_err(|e| Error::io(&target, e))
}

/// Appends serialized rows to a CSV part, flushing after each batch.
struct PartWriter {
    writer: csv::Writer<std::fs::File>,
}

impl PartWriter {
    fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        writer.write_record(header)?;
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(PartWriter { writer })
    }

    fn append<T: serde::Serialize>(&mut self, rows: &[T]) -> Result<()> {
        for row in rows {
            self.writer.serialize(row)?;
        }
        self.writer.flush().map_err(|e| Error::Csv(e.into()))
    }
}

const EPISODE_HEADER: [&str; 8] = [
    "run",
    "episode",
    "steps",
    "outcome",
    "interventions",
    "vel_diff_mean",
    "vel_diff_var",
    "cumulative_reward",
];
const INTERVENTION_HEADER: [&str; 8] = [
    "run",
    "episode",
    "step",
    "original_action",
    "revised_action",
    "indicator",
    "original_bin",
    "revised_bin",
];

fn run_one(
    cfg: &ExperimentConfig,
    index: usize,
    library: Option<Arc<LeadProfile>>,
    on_episode: &(dyn Fn(&EpisodeRecord) + Sync),
) -> Result<Vec<EpisodeRecord>> {
    let out = &cfg.experiment.out_dir;
    let mut run = Run::with_library(cfg, index, library)?;
    let mut episodes = PartWriter::create(&part_file(out, "episodes", index), &EPISODE_HEADER)?;
    let mut interventions = PartWriter::create(&part_file(out, "interventions", index), &INTERVENTION_HEADER)?;
    let checkpoints = out.join("checkpoints");
    let traces = out.join("traces");
    let every = cfg.experiment.checkpoint_every;
    let mut records = Vec::with_capacity(cfg.experiment.episodes as usize);
    let mut rows = Vec::new();
    for _ in 0..cfg.experiment.episodes {
        rows.clear();
        let record = run.run_episode(cfg.experiment.trace.then_some(&mut rows))?;
        episodes.append(&[record])?;
        interventions.append(run.last_interventions())?;
        if cfg.experiment.trace {
            write_rows(&traces.join(format!("run{index}_ep{}.csv", record.episode)), &rows)?;
        }
        let last = record.episode == cfg.experiment.episodes;
        if last || (every > 0 && record.episode % every == 0) {
            let path = checkpoints.join(Checkpoint::file_name(index, record.episode));
            run.agent().checkpoint(index, record.episode).save(&path)?;
        }
        on_episode(&record);
        records.push(record);
    }
    if let Some(model) = run.model() {
        model.save_snapshot(&out.join(format!("efsm_run{index}.json")))?;
    }
    Ok(records)
}

/// Runs a battery into `config.experiment.out_dir` and returns its records.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<EpisodeRecord>> {
    run_experiment_with(cfg, &|_| {})
}

/// Like [`run_experiment`], calling `on_episode` after every finished
/// episode from the worker that produced it.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    on_episode: &(dyn Fn(&EpisodeRecord) + Sync),
) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    let out = &cfg.experiment.out_dir;
    create_dir(out)?;
    create_dir(&out.join("checkpoints"))?;
    if cfg.experiment.trace {
        create_dir(&out.join("traces"))?;
    }
    let config_path = out.join(CONFIG_FILE);
    std::fs::write(&config_path, serde_json::to_string_pretty(cfg)? + "\n").map_err(|e| Error::io(&config_path, e))?;

    let library = match &cfg.env.profile {
        ProfileSource::Synthetic => None,
        ProfileSource::Csv { path } => Some(Arc::new(LeadProfile::from_csv(
            path,
            cfg.env.dt,
            cfg.env.speed_max,
            cfg.env.accel_max,
        )?)),
    };

    let per_run: Vec<Result<Vec<EpisodeRecord>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.experiment.runs)
            .map(|index| {
                let library = library.clone();
                scope.spawn(move || run_one(cfg, index, library, on_episode))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run worker panicked"))
            .collect()
    });

    let mut records = Vec::new();
    for run in per_run {
        records.extend(run?);
    }
    merge_parts(out, "episodes", cfg.experiment.runs)?;
    merge_parts(out, "interventions", cfg.experiment.runs)?;
    let summary = summarize(&records, cfg.experiment.moving_average_window, Some(cfg.experiment.framework))?;
    summary.save(&out.join(SUMMARY_FILE))?;
    Ok(records)
}

/// Recomputes the summary of a battery directory from `episodes.csv`,
/// taking the window and arm from `config.json` when present.
pub fn summarize_dir(dir: &Path) -> Result<Summary> {
    let records = read_records(&dir.join(EPISODES_FILE))?;
    let config_path = dir.join(CONFIG_FILE);
    let (window, framework) = if config_path.exists() {
        let cfg = ExperimentConfig::load(&config_path)?;
        (cfg.experiment.moving_average_window, Some(cfg.experiment.framework))
    } else {
        (ExperimentSettings::default().moving_average_window, None)
    };
    summarize(&records, window, framework)
}

/// Summaries of `dir` itself and of its immediate subdirectories that hold
/// an `episodes.csv`, sorted by directory name.
pub fn collect_summaries(dir: &Path) -> Result<Vec<(String, Summary)>> {
    let name_of = |p: &Path| p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned());
    let mut found = Vec::new();
    if dir.join(EPISODES_FILE).exists() {
        found.push((name_of(dir), summarize_dir(dir)?));
    }
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join(EPISODES_FILE).exists())
        .collect();
    subdirs.sort();
    for sub in subdirs {
        found.push((name_of(&sub), summarize_dir(&sub)?));
    }
    if found.is_empty() {
        return Err(Error::EmptyRecords);
    }
    Ok(found)
}
