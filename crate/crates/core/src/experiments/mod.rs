//! Monte Carlo orchestration over scenario suites, aggregation and CSV output.

pub mod aggregate;
pub mod output;
pub mod suites;

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::microsim::{run_seed, run_with_policy, stream_rng, GatePolicy, RunMetrics, Stream};

pub use aggregate::{aggregate_risk, RiskSummary, RunSummary};
pub use output::{read_summary, render_report, write_suite};
pub use suites::{ScenarioDef, Suite, BUILTIN};

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    /// In run order.
    pub runs: Vec<RunMetrics>,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub suite: Suite,
    pub master_seed: u64,
    pub scenarios: Vec<ScenarioResult>,
}

impl SuiteResult {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioResult> {
        self.scenarios.iter().find(|s| s.name == name)
    }
}

/// Picks `n` of the vehicles that reached the gate in `source`, uniformly.
pub fn thinning_set(source: &RunMetrics, seed: u64) -> BTreeSet<crate::domain::VehicleId> {
    let mut rng = stream_rng(seed, Stream::Thinning);
    let n = source.admitted as usize;
    sample(&mut rng, source.gate.len(), n)
        .into_iter()
        .map(|i| source.gate[i].vehicle)
        .collect()
}

/// Runs every scenario of `suite` for `suite.runs` runs. Run `r` of every
/// scenario uses the same seed, derived from `master_seed`, so scenarios see
/// identical arrivals. `parallelism = None` uses all cores.
pub fn run_suite(suite: &Suite, master_seed: u64, parallelism: Option<usize>) -> Result<SuiteResult> {
    suite.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(p) = parallelism {
        builder = builder.num_threads(p.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let seeds: Vec<u64> = (0..suite.runs).map(|r| run_seed(master_seed, r)).collect();

    let mut scenarios: Vec<ScenarioResult> = Vec::with_capacity(suite.scenarios.len());
    for def in &suite.scenarios {
        let base = suite.effective_config(def);
        let source = def
            .match_admitted_of
            .as_ref()
            .map(|src| scenarios.iter().find(|s| &s.name == src).expect("validated"));
        let runs = pool.install(|| {
            seeds
                .par_iter()
                .enumerate()
                .map(|(r, &seed)| {
                    let mut cfg = base.clone();
                    cfg.seed = seed;
                    let policy = match source {
                        Some(src) => GatePolicy::Fixed(thinning_set(&src.runs[r], seed)),
                        None if cfg.access.enabled => GatePolicy::Controlled,
                        None => GatePolicy::Open,
                    };
                    run_with_policy(cfg, policy)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        scenarios.push(ScenarioResult {
            name: def.name.clone(),
            runs,
        });
    }
    Ok(SuiteResult {
        suite: suite.clone(),
        master_seed,
        scenarios,
    })
}
