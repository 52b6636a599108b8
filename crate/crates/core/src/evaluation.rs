//! Batch evaluation of a policy against the reference driver over a database.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::HarnessConfig;
use crate::nieon::{evaluate_nieon, stringency_variants, NieonError, NieonEvaluation};
use crate::policies::{PolicyContext, PolicyFactory};
use crate::scenario::{ConcreteScenario, RoadUserGroup, SafetyGroupRegistry};
use crate::scoring::{
    acceptance_check, aggregate_groups, collision_metric_counts, discriminability_from_counts,
    repeatability, AcceptanceReport, AdsOutcome, GroupDiscriminability, Party, RepeatabilityReport,
    ScenarioResult, Scores, StatsError,
};
use crate::severity::{assess_contact, SeverityOutcome};
use crate::sim::{run_scenario, SimError, SimTrace};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("scenario {scenario}: {source}")]
    Nieon {
        scenario: String,
        source: NieonError,
    },
    #[error("scenario {scenario}: {source}")]
    Sim { scenario: String, source: SimError },
    #[error("scenario {scenario} names unregistered safety group `{group}`")]
    UnknownGroup { scenario: String, group: String },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub policy: String,
    pub seed: u64,
    pub database_hash: String,
    pub scenario_count: usize,
    pub config: HarnessConfig,
    /// Sorted by scenario id.
    pub results: Vec<ScenarioResult>,
    pub scores: Scores,
    pub acceptance: AcceptanceReport,
}

/// Run-dependent facts kept out of the deterministic report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
    pub scenario_count: usize,
    pub threads: usize,
}

/// Seed for one scenario, independent of scheduling order.
pub fn scenario_seed(base: u64, scenario_id: &str) -> u64 {
    let digest = Sha256::digest(scenario_id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    base ^ u64::from_le_bytes(bytes)
}

fn road_user_group(
    scenario: &ConcreteScenario,
    registry: &SafetyGroupRegistry,
) -> Result<RoadUserGroup, EvaluationError> {
    registry
        .get(&scenario.safety_group)
        .map(|g| g.road_user_group)
        .ok_or_else(|| EvaluationError::UnknownGroup {
            scenario: scenario.id.clone(),
            group: scenario.safety_group.clone(),
        })
}

fn nieon_for(
    scenario: &ConcreteScenario,
    group: RoadUserGroup,
    config: &HarnessConfig,
    intercept_shift: f64,
) -> Result<NieonEvaluation, EvaluationError> {
    let model = stringency_variants(config.nieon.model_for(group), &[intercept_shift]).map_err(
        |source| EvaluationError::Nieon {
            scenario: scenario.id.clone(),
            source,
        },
    )?[0];
    evaluate_nieon(
        scenario,
        &model,
        &config.nieon.maneuver,
        &config.sim_config(),
        &config.severity,
    )
    .map_err(|source| EvaluationError::Nieon {
        scenario: scenario.id.clone(),
        source,
    })
}

/// Simulates the policy on one scenario; also returns the reference evaluation the
/// policy was built with.
pub fn policy_trace(
    scenario: &ConcreteScenario,
    factory: &dyn PolicyFactory,
    config: &HarnessConfig,
    registry: &SafetyGroupRegistry,
) -> Result<(SimTrace, NieonEvaluation, RoadUserGroup), EvaluationError> {
    let group = road_user_group(scenario, registry)?;
    let nieon = nieon_for(scenario, group, config, 0.0)?;
    let mut policy = factory.build(&PolicyContext {
        scenario,
        latency: &config.latency,
        nieon: &nieon,
    });
    let seed = scenario_seed(config.run.seed, &scenario.id);
    let trace = run_scenario(
        scenario,
        policy.as_mut(),
        &config.latency,
        &config.sim_config(),
        seed,
    )
    .map_err(|source| EvaluationError::Sim {
        scenario: scenario.id.clone(),
        source,
    })?;
    Ok((trace, nieon, group))
}

/// Simulates the policy and the reference driver on one scenario.
pub fn evaluate_scenario(
    scenario: &ConcreteScenario,
    factory: &dyn PolicyFactory,
    config: &HarnessConfig,
    registry: &SafetyGroupRegistry,
) -> Result<ScenarioResult, EvaluationError> {
    let (trace, nieon, group) = policy_trace(scenario, factory, config, registry)?;
    let n_actors = scenario.actor_trajectories.len();
    let severity = match (&trace.fault, &trace.contact) {
        (None, Some(c)) => assess_contact(c, n_actors, &config.severity),
        _ => SeverityOutcome::none(n_actors),
    };
    let ads = AdsOutcome {
        collided: trace.fault.is_none() && trace.contact.is_some(),
        contact: if trace.fault.is_none() {
            trace.contact
        } else {
            None
        },
        severity: severity.per_actor,
        serious_injury: severity.serious_injury,
    };
    Ok(ScenarioResult {
        scenario_id: scenario.id.clone(),
        safety_group: scenario.safety_group.clone(),
        road_user_group: group,
        ads,
        nieon: nieon.outcome,
        inconclusive: trace.fault,
    })
}

/// Runs `f` on a pool of `parallelism` threads (0 = one per core), honouring
/// rayon's usual defaults otherwise.
pub fn with_pool<T: Send>(
    parallelism: usize,
    f: impl FnOnce() -> T + Send,
) -> Result<(T, usize), EvaluationError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| EvaluationError::Pool(e.to_string()))?;
    let threads = pool.current_num_threads();
    Ok((pool.install(f), threads))
}

pub fn run_evaluation(
    config: &HarnessConfig,
    scenarios: &[ConcreteScenario],
    database_hash: &str,
    registry: &SafetyGroupRegistry,
    factory: &dyn PolicyFactory,
) -> Result<(EvaluationReport, Timing), EvaluationError> {
    let start = Instant::now();
    let (results, threads) = with_pool(config.run.parallelism, || {
        scenarios
            .par_iter()
            .map(|s| evaluate_scenario(s, factory, config, registry))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut results = results?;
    results.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    let scores = aggregate_groups(&results);
    let inconclusive = results
        .iter()
        .filter(|r| r.inconclusive.is_some())
        .map(|r| r.scenario_id.clone())
        .collect();
    let mut acceptance = acceptance_check(&scores, config.acceptance.slack, inconclusive);
    acceptance.config = Some(config.clone());
    let report = EvaluationReport {
        policy: factory.name().to_string(),
        seed: config.run.seed,
        database_hash: database_hash.to_string(),
        scenario_count: results.len(),
        config: config.clone(),
        results,
        scores,
        acceptance,
    };
    let timing = Timing {
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        scenario_count: scenarios.len(),
        threads,
    };
    Ok((report, timing))
}

/// Reference-driver failures (collision-metric contacts) per safety group at each
/// stringency delta, compared between the extreme deltas.
pub fn run_ztest(
    config: &HarnessConfig,
    scenarios: &[ConcreteScenario],
    registry: &SafetyGroupRegistry,
) -> Result<Vec<GroupDiscriminability>, EvaluationError> {
    let deltas = &config.ztest.deltas;
    if deltas.len() < 2 {
        return Err(StatsError::TooFewLevels.into());
    }
    let (rows, _) = with_pool(config.run.parallelism, || {
        scenarios
            .par_iter()
            .map(|s| {
                let group = road_user_group(s, registry)?;
                let fails = deltas
                    .iter()
                    .map(|&d| {
                        let eval = nieon_for(s, group, config, d)?;
                        let probe = ScenarioResult {
                            scenario_id: s.id.clone(),
                            safety_group: s.safety_group.clone(),
                            road_user_group: group,
                            ads: AdsOutcome {
                                collided: false,
                                contact: None,
                                severity: vec![],
                                serious_injury: false,
                            },
                            nieon: eval.outcome,
                            inconclusive: None,
                        };
                        Ok(collision_metric_counts(&probe, Party::Nieon))
                    })
                    .collect::<Result<Vec<bool>, EvaluationError>>()?;
                Ok((s.safety_group.clone(), fails))
            })
            .collect::<Result<Vec<_>, EvaluationError>>()
    })?;
    let mut by_group: std::collections::BTreeMap<String, (usize, Vec<usize>)> =
        std::collections::BTreeMap::new();
    for (group, fails) in rows? {
        let entry = by_group
            .entry(group)
            .or_insert_with(|| (0, vec![0; deltas.len()]));
        entry.0 += 1;
        for (count, failed) in entry.1.iter_mut().zip(fails) {
            *count += failed as usize;
        }
    }
    by_group
        .iter()
        .map(|(group, (n, counts))| {
            let levels: Vec<(f64, usize)> =
                deltas.iter().copied().zip(counts.iter().copied()).collect();
            Ok(discriminability_from_counts(
                group,
                *n,
                &levels,
                config.ztest.alpha,
            )?)
        })
        .collect()
}

/// Repeats the evaluation `runs` times with jitter on and a fresh seed each time.
pub fn run_repeatability(
    config: &HarnessConfig,
    scenarios: &[ConcreteScenario],
    database_hash: &str,
    registry: &SafetyGroupRegistry,
    factory: &dyn PolicyFactory,
    runs: usize,
    jitter_steps: u32,
) -> Result<RepeatabilityReport, EvaluationError> {
    if runs < 2 {
        return Err(StatsError::TooFewRuns.into());
    }
    let mut all = Vec::with_capacity(runs);
    for i in 0..runs {
        let mut cfg = config.clone();
        cfg.sim.jitter_steps = jitter_steps;
        cfg.run.seed = config.run.seed.wrapping_add(i as u64);
        let (report, _) = run_evaluation(&cfg, scenarios, database_hash, registry, factory)?;
        all.push(report.scores);
    }
    Ok(repeatability(&all)?)
}
