//! Parallel batch runs over independent simulations.

use std::path::Path;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::policies::Policies;
use crate::records::{write_jsonl, TrialRecord};
use crate::sim::{BatchProvider, BatchSuggester, Simulation, SuggestionProvider};
use crate::summary::{summarize, Summary};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Runs simulation `index` with an arbitrary suggestion source.
pub fn run_simulation(
    cfg: &ExperimentConfig,
    pol: &Policies,
    index: usize,
    provider: &mut dyn SuggestionProvider,
) -> Result<Vec<TrialRecord>> {
    Simulation::new(cfg, pol, index)?.run(provider)
}

/// Runs simulation `index` with the configured batch suggester.
pub fn run_batch_simulation(
    cfg: &ExperimentConfig,
    pol: &Policies,
    index: usize,
) -> Result<Vec<TrialRecord>> {
    let mut provider = BatchProvider {
        suggester: BatchSuggester::new(cfg, index),
        policies: pol,
    };
    run_simulation(cfg, pol, index, &mut provider)
}

/// Worker count: `ADVISOR_THREADS` if set, else rayon's default.
pub fn thread_count() -> usize {
    std::env::var("ADVISOR_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// All simulations, records ordered by (simulation, trial). Results do not
/// depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig, pol: &Policies) -> Result<Vec<TrialRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| HarnessError::Suggester(format!("thread pool: {e}")))?;
    let per_sim: Vec<Result<Vec<TrialRecord>>> = pool.install(|| {
        (0..cfg.n_simulations)
            .into_par_iter()
            .map(|i| run_batch_simulation(cfg, pol, i))
            .collect()
    });
    let mut out = Vec::with_capacity(cfg.n_simulations * cfg.trials_per_simulation);
    for r in per_sim {
        out.extend(r?);
    }
    Ok(out)
}

/// Runs the experiment and writes `records.jsonl` and `summary.csv` to `out_dir`.
pub fn run_and_write(
    cfg: &ExperimentConfig,
    pol: &Policies,
    out_dir: &Path,
) -> Result<(Vec<TrialRecord>, Summary)> {
    let records = run_experiment(cfg, pol)?;
    std::fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    write_jsonl(&out_dir.join(RECORDS_FILE), &records)?;
    let summary = summarize(&records)?;
    let path = out_dir.join(SUMMARY_FILE);
    std::fs::write(&path, summary.to_csv()).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok((records, summary))
}
