//! Seed and scenario sweeps. Each item is an independent deterministic run,
//! so items are spread over [`crate::par`] and results come back in input
//! order.

use crate::alpha::AlphaConfig;
use crate::fault::{BurstProfile, FaultError, TransientProfile};
use crate::pattern::{self, DagSnapshot, ExecutionOptions, PatternSummary, Reconfigurator};
use crate::par;
use crate::redundancy::{self, ExperimentSummary, RedundancyError, RedundancyPolicy};
use crate::sim::{self, Outputs, Scenario, SimError};

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Redundancy(#[from] RedundancyError),
}

fn redundancy_one(profile: &BurstProfile, policy: &RedundancyPolicy, seed: u64) -> Result<ExperimentSummary, SweepError> {
    let schedule = profile.generate(seed)?;
    Ok(redundancy::run_experiment_with(&schedule, policy, profile.length, |_| {})?)
}

/// One redundancy experiment per seed.
pub fn redundancy_seeds(
    profile: &BurstProfile,
    policy: &RedundancyPolicy,
    seeds: &[u64],
) -> Result<Vec<ExperimentSummary>, SweepError> {
    par::map(seeds, |&seed| redundancy_one(profile, policy, seed)).into_iter().collect()
}

/// Same as [`redundancy_seeds`] but always on the calling thread.
pub fn redundancy_seeds_seq(
    profile: &BurstProfile,
    policy: &RedundancyPolicy,
    seeds: &[u64],
) -> Result<Vec<ExperimentSummary>, SweepError> {
    par::map_seq(seeds, |&seed| redundancy_one(profile, policy, seed)).into_iter().collect()
}

/// One pattern experiment per seed on the default redoing pipeline, faults
/// drawn from `profile`. No per-attempt trace is kept.
pub fn pattern_seeds(
    profile: &TransientProfile,
    config: &AlphaConfig,
    max_retries: u32,
    seeds: &[u64],
) -> Result<Vec<PatternSummary>, SweepError> {
    par::map(seeds, |&seed| {
        let schedule = profile.generate(seed)?;
        let mut rc = Reconfigurator::new(
            DagSnapshot::redoing_pipeline(max_retries),
            *config,
            ExecutionOptions::default(),
        )
        .without_trace();
        Ok(pattern::run_pattern_experiment(&mut rc, &schedule, profile.length))
    })
    .into_iter()
    .collect()
}

/// Runs every scenario; failures are reported per scenario.
pub fn run_scenarios(scenarios: &[Scenario]) -> Vec<Result<Outputs, SimError>> {
    par::map(scenarios, sim::run)
}
