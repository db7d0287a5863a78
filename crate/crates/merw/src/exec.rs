//! Parallel ensemble execution.
//!
//! Replicas run on a dedicated rayon pool and are collected in index order,
//! so the summary is the one the serial runner produces.

use merw_core::harness::{self, Ensemble, EnsembleConfig, EnsemblePlan, HarnessError};
use rayon::prelude::*;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "MERW_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Cap from `MERW_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n: &usize| n > 0)
}

/// Available cores, capped by `MERW_THREADS`.
pub fn default_parallelism() -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    thread_cap().map_or(cores, |cap| cap.min(cores))
}

/// Workers actually used for a requested count.
pub fn effective_parallelism(requested: usize) -> usize {
    let requested = requested.max(1);
    thread_cap().map_or(requested, |cap| cap.min(requested))
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<Ensemble, ExecError> {
    let workers = effective_parallelism(cfg.parallelism);
    if workers == 1 {
        return Ok(harness::run_ensemble(cfg)?);
    }
    let plan = EnsemblePlan::new(cfg.clone())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?;
    let records = pool.install(|| {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|i| plan.run_replica(i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(Ensemble::from_records(cfg, records)?)
}
