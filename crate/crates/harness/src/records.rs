//! Per-trial records and their JSON-lines encoding.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub simulation: usize,
    pub trial: usize,
    pub discounted_reward: f64,
    pub undiscounted_reward: f64,
    pub steps: usize,
    pub asks: usize,
    /// Expected suggester type at the end of the trial; typed agents only.
    pub expected_type: Option<f64>,
    /// Type marginal at the end of the trial; typed agents only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_marginal: Option<Vec<f64>>,
    /// True coefficient active during the trial; noisy-rational suggesters only.
    pub lambda_star: Option<f64>,
    pub seed: u64,
    /// The trial hit the step limit before a terminal state.
    pub truncated: bool,
}

pub fn write_jsonl(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).expect("record serializes");
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<TrialRecord>> {
    let io = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| HarnessError::Config {
                path: format!("{}:{}", path.display(), i + 1),
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}

/// One line per record, as written by [`write_jsonl`].
pub fn to_jsonl_string(records: &[TrialRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record() -> impl Strategy<Value = TrialRecord> {
        (
            (
                0usize..1000,
                0usize..100,
                -1e6f64..1e6,
                -1e6f64..1e6,
                0usize..500,
                0usize..50,
            ),
            proptest::option::of(0f64..10.0),
            proptest::option::of(proptest::collection::vec(0f64..1.0, 1..6)),
            proptest::option::of(0f64..10.0),
            any::<u64>(),
            any::<bool>(),
        )
            .prop_map(
                |(
                    (simulation, trial, d, u, steps, asks),
                    expected_type,
                    type_marginal,
                    lambda_star,
                    seed,
                    truncated,
                )| {
                    TrialRecord {
                        simulation,
                        trial,
                        discounted_reward: d,
                        undiscounted_reward: u,
                        steps,
                        asks,
                        expected_type,
                        type_marginal,
                        lambda_star,
                        seed,
                        truncated,
                    }
                },
            )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn jsonl_round_trips_exactly(records in proptest::collection::vec(record(), 0..8)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("r.jsonl");
            write_jsonl(&path, &records).unwrap();
            prop_assert_eq!(std::fs::read_to_string(&path).unwrap(), to_jsonl_string(&records));
            prop_assert_eq!(read_jsonl(&path).unwrap(), records);
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        std::fs::write(&path, "\n{\"simulation\":0,\"bogus\":1}\n").unwrap();
        let err = read_jsonl(&path).unwrap_err().to_string();
        assert!(err.contains("r.jsonl:2"), "{err}");
    }
}
