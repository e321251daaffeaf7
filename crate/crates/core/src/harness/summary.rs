use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::{EpisodeRecord, Outcome};
use crate::error::{Error, Result};

/// Aggregate metrics of a battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// `Some(true)` with the framework, `Some(false)` without, `None` when
    /// unknown.
    pub framework: Option<bool>,
    pub runs: usize,
    /// Episodes over all runs.
    pub episodes: usize,
    pub success: usize,
    pub large_distance: usize,
    pub collision: usize,
    pub success_pct: f64,
    pub mean_interventions: f64,
    pub window: usize,
    /// Per-episode mean over runs, then a trailing moving average.
    pub steps_curve: Vec<f64>,
    pub interventions_curve: Vec<f64>,
    /// Pooled over every step of the succeeded episodes; `None` without
    /// successes.
    pub vel_diff_mean: Option<f64>,
    pub vel_diff_var: Option<f64>,
}

impl Summary {
    pub fn failures(&self) -> usize {
        self.large_distance + self.collision
    }

    /// Success percentage truncated to one decimal, e.g. `81.6%`.
    pub fn success_label(&self) -> String {
        format!("{:.1}%", (self.success_pct * 10.0).floor() / 10.0)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Trailing mean over at most `window` values ending at each index.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Value per episode index averaged over the runs that reached it.
fn per_episode_mean(records: &[EpisodeRecord], value: impl Fn(&EpisodeRecord) -> f64) -> Vec<f64> {
    let mut by_episode: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = by_episode.entry(r.episode).or_default();
        e.0 += value(r);
        e.1 += 1;
    }
    by_episode.values().map(|(s, n)| s / *n as f64).collect()
}

pub fn summarize(records: &[EpisodeRecord], window: usize, framework: Option<bool>) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
    let success = count(Outcome::Success);
    let runs = records.iter().map(|r| r.run).collect::<std::collections::BTreeSet<_>>().len();

    // Law of total variance over the per-episode moments, weighted by steps.
    let mut weight = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for r in records.iter().filter(|r| r.outcome == Outcome::Success) {
        let w = r.steps as f64;
        weight += w;
        first += w * r.vel_diff_mean;
        second += w * (r.vel_diff_var + r.vel_diff_mean * r.vel_diff_mean);
    }
    let (vel_diff_mean, vel_diff_var) = if weight > 0.0 {
        let mean = first / weight;
        (Some(mean), Some((second / weight - mean * mean).max(0.0)))
    } else {
        (None, None)
    };

    Ok(Summary {
        framework,
        runs,
        episodes: records.len(),
        success,
        large_distance: count(Outcome::LargeDistance),
        collision: count(Outcome::Collision),
        success_pct: 100.0 * success as f64 / records.len() as f64,
        mean_interventions: records.iter().map(|r| r.interventions as f64).sum::<f64>() / records.len() as f64,
        window,
        steps_curve: moving_average(&per_episode_mean(records, |r| r.steps as f64), window),
        interventions_curve: moving_average(&per_episode_mean(records, |r| r.interventions as f64), window),
        vel_diff_mean,
        vel_diff_var,
    })
}

/// Mean of `value` over records whose episode lies in `first..=last`.
pub fn window_mean(records: &[EpisodeRecord], first: u64, last: u64, value: impl Fn(&EpisodeRecord) -> f64) -> Option<f64> {
    let selected: Vec<f64> = records
        .iter()
        .filter(|r| (first..=last).contains(&r.episode))
        .map(value)
        .collect();
    (!selected.is_empty()).then(|| selected.iter().sum::<f64>() / selected.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn record(run: usize, episode: u64, outcome: Outcome) -> EpisodeRecord {
        EpisodeRecord {
            run,
            episode,
            steps: if outcome == Outcome::Success { 800 } else { 100 },
            outcome,
            interventions: episode,
            vel_diff_mean: 1.0,
            vel_diff_var: 0.5,
            cumulative_reward: -1.0,
        }
    }

    #[test]
    fn all_success() {
        let records: Vec<_> = (1..=5).map(|e| record(0, e, Outcome::Success)).collect();
        let s = summarize(&records, 20, None).unwrap();
        assert_eq!(s.success_pct, 100.0);
        assert_eq!(s.failures(), 0);
        assert_eq!(s.vel_diff_mean, Some(1.0));
        assert_abs_diff_eq!(s.vel_diff_var.unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn paper_table_counts() {
        let mut records = Vec::new();
        for i in 0..15000u64 {
            let outcome = match i {
                0..=12248 => Outcome::Success,
                12249..=13499 => Outcome::LargeDistance,
                _ => Outcome::Collision,
            };
            records.push(record((i / 1500) as usize, i % 1500 + 1, outcome));
        }
        let s = summarize(&records, 20, Some(false)).unwrap();
        assert_eq!((s.success, s.large_distance, s.collision), (12249, 1251, 1500));
        assert_eq!(s.success + s.failures(), s.episodes);
        assert_eq!(s.success_label(), "81.6%");
        assert_eq!(s.runs, 10);
        assert_eq!(s.steps_curve.len(), 1500);

        let mut with = records.clone();
        for r in with.iter_mut().take(14719) {
            r.outcome = Outcome::Success;
        }
        assert_eq!(summarize(&with, 20, Some(true)).unwrap().success_label(), "98.1%");
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(summarize(&[], 20, None), Err(Error::EmptyRecords)));
    }

    #[test]
    fn pooled_velocity_statistics() {
        // Two successes with samples {0,..} mean 1 var 0 and mean 3 var 0:
        // the pooled variance is 1.
        let mut a = record(0, 1, Outcome::Success);
        a.vel_diff_var = 0.0;
        let mut b = a;
        b.vel_diff_mean = 3.0;
        b.episode = 2;
        let fail = record(0, 3, Outcome::Collision);
        let s = summarize(&[a, b, fail], 2, None).unwrap();
        assert_eq!(s.vel_diff_mean, Some(2.0));
        assert_abs_diff_eq!(s.vel_diff_var.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn moving_average_windows() {
        assert_eq!(moving_average(&[2.0, 4.0, 6.0, 8.0], 2), vec![2.0, 3.0, 5.0, 7.0]);
        assert_eq!(moving_average(&[5.0], 20), vec![5.0]);
    }

    #[test]
    fn curves_average_over_runs() {
        let records = vec![record(0, 1, Outcome::Success), record(1, 1, Outcome::Collision)];
        let s = summarize(&records, 20, None).unwrap();
        assert_eq!(s.steps_curve, vec![450.0]);
        assert_eq!(window_mean(&records, 1, 1, |r| r.steps as f64), Some(450.0));
        assert_eq!(window_mean(&records, 2, 9, |r| r.steps as f64), None);
    }
}
