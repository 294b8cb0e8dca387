//! Means with normal-approximation 95% confidence intervals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::records::TrialRecord;

pub const CSV_HEADER: &str = "metric,trial_index,mean,ci95_half_width,n";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub ci95_half_width: f64,
    pub n: usize,
}

impl Stat {
    /// Mean and `1.96 * stderr` with the sample (n - 1) variance.
    pub fn of(samples: &[f64]) -> Option<Self> {
        let n = samples.len();
        if n == 0 {
            return None;
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let half = if n > 1 {
            let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            1.96 * (var / n as f64).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            ci95_half_width: half,
            n,
        })
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.ci95_half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95_half_width
    }

    pub fn overlaps(&self, other: &Stat) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    /// `None` for the pooled row.
    pub trial_index: Option<usize>,
    pub stat: Stat,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

pub const METRICS: [&str; 5] = [
    "discounted_reward",
    "undiscounted_reward",
    "steps",
    "asks",
    "expected_type",
];

fn metric(r: &TrialRecord, name: &str) -> Option<f64> {
    match name {
        "discounted_reward" => Some(r.discounted_reward),
        "undiscounted_reward" => Some(r.undiscounted_reward),
        "steps" => Some(r.steps as f64),
        "asks" => Some(r.asks as f64),
        "expected_type" => r.expected_type,
        _ => None,
    }
}

/// Pooled and per-trial-index statistics for every metric present.
pub fn summarize(records: &[TrialRecord]) -> Result<Summary> {
    if records.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let trials = records.iter().map(|r| r.trial).max().unwrap_or(0) + 1;
    let mut rows = Vec::new();
    for name in METRICS {
        let all: Vec<f64> = records.iter().filter_map(|r| metric(r, name)).collect();
        let Some(pooled) = Stat::of(&all) else {
            continue;
        };
        rows.push(SummaryRow {
            metric: name.into(),
            trial_index: None,
            stat: pooled,
        });
        let mut by_trial = vec![Vec::new(); trials];
        for r in records {
            if let Some(v) = metric(r, name) {
                by_trial[r.trial].push(v);
            }
        }
        for (t, samples) in by_trial.iter().enumerate() {
            if let Some(stat) = Stat::of(samples) {
                rows.push(SummaryRow {
                    metric: name.into(),
                    trial_index: Some(t),
                    stat,
                });
            }
        }
    }
    Ok(Summary { rows })
}

impl Summary {
    pub fn get(&self, metric: &str, trial_index: Option<usize>) -> Option<&Stat> {
        self.rows
            .iter()
            .find(|r| r.metric == metric && r.trial_index == trial_index)
            .map(|r| &r.stat)
    }

    pub fn overall(&self, metric: &str) -> Option<&Stat> {
        self.get(metric, None)
    }

    /// Per-trial series of one metric, ordered by trial index.
    pub fn series(&self, metric: &str) -> Vec<Stat> {
        self.rows
            .iter()
            .filter(|r| r.metric == metric && r.trial_index.is_some())
            .map(|r| r.stat)
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let idx = r
                .trial_index
                .map_or_else(|| "all".to_string(), |t| t.to_string());
            writeln!(
                out,
                "{},{},{},{},{}",
                r.metric, idx, r.stat.mean, r.stat.ci95_half_width, r.stat.n
            )
            .expect("string write");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn record(trial: usize, reward: f64) -> TrialRecord {
        TrialRecord {
            simulation: 0,
            trial,
            discounted_reward: reward,
            undiscounted_reward: reward,
            steps: 3,
            asks: 0,
            expected_type: None,
            type_marginal: None,
            lambda_star: None,
            seed: 1,
            truncated: false,
        }
    }

    #[test]
    fn equal_values_have_zero_width() {
        let s = summarize(&[record(0, 4.0), record(0, 4.0), record(1, 4.0)]).unwrap();
        assert_eq!(s.overall("discounted_reward").unwrap().ci95_half_width, 0.0);
    }

    #[test]
    fn two_records_closed_form() {
        let s = Stat::of(&[0.0, 2.0]).unwrap();
        assert_eq!(s.mean, 1.0);
        assert!((s.ci95_half_width - 1.96).abs() < 1e-12);
    }

    #[test]
    fn normal_samples_half_width() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let s = Stat::of(&v).unwrap();
        assert!(
            (s.ci95_half_width - 0.0196).abs() < 0.00196,
            "{}",
            s.ci95_half_width
        );
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(summarize(&[]), Err(HarnessError::EmptyInput)));
    }

    #[test]
    fn csv_layout() {
        let s = summarize(&[record(0, 1.0), record(1, 3.0)]).unwrap();
        let csv = s.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(csv.contains("discounted_reward,all,2,"));
        assert!(csv.contains("steps,1,3,0,1"));
        assert!(!csv.contains("expected_type"));
        // metrics x (pooled + two trials)
        assert_eq!(csv.lines().count(), 1 + 4 * 3);
        assert_eq!(s.series("asks").len(), 2);
    }
}
