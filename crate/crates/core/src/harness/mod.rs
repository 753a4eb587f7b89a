//! Scenario orchestration, reporting and the analysis utilities the scenarios use.

mod analysis;
mod config;
mod report;
mod scenario;

pub use analysis::{
    closed_loop_freq_response, default_omega_grid, dominant_frequency, freq_response, log_grid, marginal_histogram,
    FreqResponse, Histogram,
};
pub use config::{
    AngleUnit, ControllerKind, GsOffsets, IcBox, Sampler, ScenarioConfig, ScenarioKind, TrimCondition, XPert,
};
pub use report::{
    read_snapshots, run_disturbance_scenario, run_ic_scenario, run_param_scenario, run_scenario, run_scenario_with,
    snapshot_distance, write_snapshots, write_w_csv, Difference, ExtremeTrajectories, RunReport, Series,
    SnapshotHistograms,
};
pub use scenario::{
    initial_cloud, mc_compare, mc_compare_with, propagate_options, run_case, McBundle, Setup, DEG_SCALE,
};

use crate::error::{Error, Result};

/// Environment variable capping the worker count.
pub const WORKERS_ENV: &str = "OTROBUST_WORKERS";

/// Run `f` on a pool sized by `OTROBUST_WORKERS` (rayon's default when unset).
pub fn with_workers<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    let workers = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
