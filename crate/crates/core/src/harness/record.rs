use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::Termination;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    LargeDistance,
    Collision,
}

impl Outcome {
    pub fn is_failure(self) -> bool {
        self != Outcome::Success
    }
}

impl From<Termination> for Outcome {
    fn from(t: Termination) -> Self {
        match t {
            Termination::MaxSteps => Outcome::Success,
            Termination::LargeDistance => Outcome::LargeDistance,
            Termination::Collision => Outcome::Collision,
        }
    }
}

/// One line of `episodes.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// 0-based.
    pub run: usize,
    /// 1-based.
    pub episode: u64,
    /// Steps completed without failure; equals the step limit on success.
    pub steps: usize,
    pub outcome: Outcome,
    pub interventions: u64,
    /// Mean of `|ego_v - lead_v|` over the episode, m/s.
    pub vel_diff_mean: f64,
    /// Population variance of the same quantity.
    pub vel_diff_var: f64,
    /// Sum of the per-step reward, without the failure penalty.
    pub cumulative_reward: f64,
}

/// Appends records to a CSV file, flushing after each one.
pub struct RecordWriter {
    writer: csv::Writer<File>,
}

impl RecordWriter {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(RecordWriter {
            writer: csv::Writer::from_path(path)?,
        })
    }

    pub fn append(&mut self, record: &EpisodeRecord) -> Result<()> {
        self.writer.serialize(record)?;
        self.writer.flush().map_err(|e| Error::Csv(e.into()))
    }
}

pub fn write_records(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut w = RecordWriter::create(path)?;
    for r in records {
        w.append(r)?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}
