//! Batch experiment runner for `mfgmaster-core`.
//!
//! A config names a model and one or more experiments; [`run_config`]
//! executes them (concurrently when `jobs > 1`) and [`write_reports`] stores
//! `results.csv`, `diagnostics.json` and `fit.json`.

pub mod config;
pub mod experiments;
pub mod measures;
pub mod report;

pub use config::{ConfigError, Experiment, ExperimentConfig, ExperimentKind, ExperimentParams};
pub use experiments::run_experiment;
pub use report::{emit_csv, read_csv, write_reports, Bound, Check, Outcome, Record};

use rayon::prelude::*;

/// Exit status of a run: all checks passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status of a run: some assertion failed or an experiment aborted.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for usage errors: bad arguments, unreadable or invalid config, unknown kind.
pub const EXIT_USAGE: i32 = 2;

/// Runs every experiment of `config` on a pool of `jobs` threads. Outcomes
/// keep the config order.
pub fn run_config(config: &ExperimentConfig, jobs: usize) -> anyhow::Result<Vec<Outcome>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    Ok(pool.install(|| {
        config
            .experiments
            .par_iter()
            .map(|e| run_experiment(&config.model, config.seed, e))
            .collect()
    }))
}

pub fn exit_code(outcomes: &[Outcome]) -> i32 {
    if outcomes.iter().all(Outcome::passed) {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
