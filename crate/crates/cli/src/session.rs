//! Config-driven session runner: replays users through the chosen solver,
//! applies the tolerance schedule and horizon resets, and collects a trace.

use std::time::Instant;

use fairbundle_core::fairness::{
    adapt_lambda, delta_history, fairness_so_far, tolerance_at, SessionState,
};
use fairbundle_core::model::{Catalog, RelevanceView, UserId};
use fairbundle_core::relevance::{top_m, MfModel, NormalizationBounds, SkewSpec, SyntheticRelevance};
use fairbundle_core::seed;
use fairbundle_core::solver::{
    solve_exact, solve_f3r, solve_fairwg, solve_random, SolveOutcome, SolveRequest, SolveStatus,
};
use fairbundle_core::synth::{synthetic_catalog, SyntheticCatalogSpec};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::archive;
use crate::config::{
    ArrivalConfig, DatasetConfig, ExperimentConfig, FallbackPolicy, Method, SyntheticDataset,
};
use crate::error::AppError;

/// Loaded (or generated) data a session runs against.
pub struct SessionContext {
    pub catalog: Catalog,
    pub type_names: Vec<String>,
    relevance: RelevanceSource,
    user_pool: Vec<u64>,
}

enum RelevanceSource {
    Synthetic { skew: SkewSpec, seed: u64 },
    Model { model: MfModel, bounds: NormalizationBounds },
}

impl SessionContext {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self, AppError> {
        match &config.dataset {
            DatasetConfig::Synthetic(spec) => Self::synthetic(spec),
            DatasetConfig::Files(files) => {
                let (catalog, type_names) =
                    archive::load_catalog(&files.catalog).map_err(AppError::data)?;
                let (model, bounds) = archive::load_model(&files.model).map_err(AppError::data)?;
                let user_pool = model.users().iter().map(|u| u.0).collect();
                Ok(Self {
                    catalog,
                    type_names,
                    relevance: RelevanceSource::Model { model, bounds },
                    user_pool,
                })
            }
        }
    }

    fn synthetic(spec: &SyntheticDataset) -> Result<Self, AppError> {
        let catalog = synthetic_catalog(&SyntheticCatalogSpec {
            group_sizes: spec.group_sizes.clone(),
            type_count: spec.type_count,
            types_per_item: spec.types_per_item,
            seed: spec.catalog_seed,
        })
        .map_err(AppError::config)?;
        let skew = SkewSpec::new(
            spec.relevance_bias.clone(),
            spec.relevance_base[0],
            spec.relevance_base[1],
        )
        .map_err(AppError::config)?;
        Ok(Self {
            catalog,
            type_names: Vec::new(),
            relevance: RelevanceSource::Synthetic { skew, seed: spec.relevance_seed },
            user_pool: (0..spec.users).collect(),
        })
    }

    fn view(&self, user: u64, m: usize) -> Result<RelevanceView, AppError> {
        match &self.relevance {
            RelevanceSource::Synthetic { skew, seed } => {
                SyntheticRelevance::new(&self.catalog, skew.clone(), *seed)
                    .and_then(|generator| generator.view(user, m))
                    .map_err(AppError::data)
            }
            RelevanceSource::Model { model, bounds } => {
                top_m(model, UserId(user), m, bounds).map_err(AppError::data)
            }
        }
    }
}

/// One per-user line of the trace. Everything here is deterministic under
/// the run seed; wall times live in the latency sidecar.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct StepRecord {
    pub step: u32,
    pub user: u64,
    pub status: String,
    pub items: Vec<u64>,
    pub relevance: Option<f64>,
    pub compatibility: Option<f64>,
    pub quality: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub relative_quality: Option<f64>,
    pub fairness_so_far: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    pub relaxed: bool,
}

/// Session-level aggregates over the trace records.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SessionSummary {
    pub served_steps: u32,
    pub infeasible_steps: u32,
    pub relaxed_steps: u32,
    pub mean_quality: Option<f64>,
    pub final_fairness: f64,
    pub mean_relative_quality: Option<f64>,
    pub latency_mean_us: Option<f64>,
    pub latency_p50_us: Option<u64>,
    pub latency_p95_us: Option<u64>,
}

/// Everything one seeded run produced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionTrace {
    pub config_hash: String,
    pub family_hash: String,
    pub method: String,
    pub horizon: u32,
    pub total_users: u32,
    pub seed: u64,
    pub records: Vec<StepRecord>,
    /// Per-step solver wall time in microseconds, aligned with `records`.
    pub latencies_us: Vec<u64>,
    pub summary: SessionSummary,
}

/// Runs one seeded session. `run_seed` overrides the config seed so repeated
/// replications share a config.
pub fn run_session(config: &ExperimentConfig, run_seed: u64) -> Result<SessionTrace, AppError> {
    let context = SessionContext::prepare(config)?;
    run_session_with(config, run_seed, &context)
}

/// [`run_session`] against an already-prepared context (lets callers amortize
/// data loading across replications).
pub fn run_session_with(
    config: &ExperimentConfig,
    run_seed: u64,
    context: &SessionContext,
) -> Result<SessionTrace, AppError> {
    let bundle_spec = config.bundle_spec()?;
    let fairness_spec = config.fairness_spec()?;
    let horizon = config.session.horizon;
    let total_users = config.total_users();
    let arrival = arrival_order(config, run_seed, &context.user_pool)?;

    let mut state = SessionState::new(horizon, fairness_spec.group_count())
        .map_err(AppError::config)?;
    let mut weight = config.adaptive_weight()?;
    let method = config.solver.method;
    let explore = config.explore();

    let mut records = Vec::with_capacity(total_users as usize);
    let mut latencies = Vec::with_capacity(total_users as usize);

    for t in 1..=total_users {
        let position = (t - 1) % horizon + 1;
        if t > 1 && position == 1 {
            state.reset();
        }
        let user = arrival[(t - 1) as usize];
        let rel = context.view(user, config.solver.top_m)?;

        let eps_t = match method {
            Method::ExactNofair => 1.0,
            _ => tolerance_at(position, &fairness_spec, horizon).map_err(AppError::config)?,
        };
        let lambda = match method {
            Method::Adafairwg => weight.lambda,
            _ => config.solver.lambda,
        };

        let mut request = SolveRequest::new(&rel, &context.catalog, &bundle_spec, &fairness_spec);
        request.eps_t = eps_t;
        request.history_deltas = delta_history(&state, &fairness_spec, eps_t);
        request.history_exposure = exposure_or_zero(&state);
        request.lambda = lambda;
        request.explore = explore;
        request.node_budget = config.solver.node_budget;

        let step_seed = seed::derive(run_seed, u64::from(t));
        let started = Instant::now();
        let mut outcome = dispatch(method, &request, step_seed)?;
        let elapsed = started.elapsed();
        latencies.push(elapsed.as_micros() as u64);

        let mut relaxed = false;
        if outcome.status == SolveStatus::Infeasible
            && config.session.fallback == FallbackPolicy::Relax
        {
            let mut relaxed_request = request.clone();
            relaxed_request.eps_t = 1.0;
            relaxed_request.history_deltas = delta_history(&state, &fairness_spec, 1.0);
            let retry = dispatch(method, &relaxed_request, step_seed)?;
            if retry.status != SolveStatus::Infeasible {
                outcome = retry;
                relaxed = true;
            }
        }

        let relative_quality = if config.session.compute_baseline {
            baseline_ratio(&request, &outcome)?
        } else {
            None
        };

        let (status, items, scores) = match (&outcome.status, &outcome.bundle) {
            (SolveStatus::Infeasible, _) | (_, None) => {
                state.skip().map_err(AppError::data)?;
                (SolveStatus::Infeasible, Vec::new(), None)
            }
            (status, Some(bundle)) => {
                state.record(bundle, &context.catalog).map_err(AppError::data)?;
                (*status, bundle.ids().iter().map(|id| id.0).collect(), outcome.scores)
            }
        };

        let f_now = fairness_so_far(&state, &fairness_spec).map_err(AppError::data)?;
        if method == Method::Adafairwg {
            weight = adapt_lambda(weight, f_now, &fairness_spec);
        }

        records.push(StepRecord {
            step: t,
            user,
            status: status.to_string(),
            items,
            relevance: scores.map(|s| s.relevance),
            compatibility: scores.map(|s| s.compatibility),
            quality: scores.map(|s| s.quality),
            relative_quality,
            fairness_so_far: f_now,
            tolerance: eps_t,
            lambda: (method == Method::Adafairwg).then_some(lambda),
            relaxed,
        });
    }

    let final_fairness = fairness_so_far(&state, &fairness_spec).map_err(AppError::data)?;
    let summary = summarize(&records, &latencies, final_fairness, config.session.record_latency);
    if !config.session.record_latency {
        latencies.clear();
    }

    Ok(SessionTrace {
        config_hash: config.hash(),
        family_hash: config.family_hash(),
        method: method.to_string(),
        horizon,
        total_users,
        seed: run_seed,
        records,
        latencies_us: latencies,
        summary,
    })
}

fn dispatch(
    method: Method,
    request: &SolveRequest<'_>,
    step_seed: u64,
) -> Result<SolveOutcome, AppError> {
    let outcome = match method {
        Method::Exact | Method::ExactNofair => solve_exact(request),
        Method::F3r => solve_f3r(request, step_seed),
        Method::Fairwg | Method::Adafairwg => solve_fairwg(request),
        Method::Random => solve_random(request, step_seed),
    };
    outcome.map_err(AppError::config)
}

/// Quality ratio against the exposure-free optimum over the same candidates.
/// Undefined (None) when the step served nothing or the baseline quality is
/// not positive.
fn baseline_ratio(
    request: &SolveRequest<'_>,
    outcome: &SolveOutcome,
) -> Result<Option<f64>, AppError> {
    let Some(quality) = outcome.quality() else { return Ok(None) };
    let mut free = request.clone();
    free.eps_t = 1.0;
    free.history_deltas = vec![0.0; free.fairness.group_count()];
    let best = solve_exact(&free).map_err(AppError::config)?;
    Ok(best.quality().filter(|&q| q > 0.0).map(|q| quality / q))
}

fn exposure_or_zero(state: &SessionState) -> Vec<f64> {
    state.exposure().unwrap_or_else(|_| vec![0.0; state.group_count()])
}

fn arrival_order(
    config: &ExperimentConfig,
    run_seed: u64,
    pool: &[u64],
) -> Result<Vec<u64>, AppError> {
    if pool.is_empty() {
        return Err(AppError::Config("user pool is empty".into()));
    }
    let total = config.total_users() as usize;
    match &config.session.arrival {
        ArrivalConfig::Sequential => {
            Ok((0..total).map(|i| pool[i % pool.len()]).collect())
        }
        ArrivalConfig::Explicit(list) => {
            if list.is_empty() {
                return Err(AppError::Config("explicit arrival list is empty".into()));
            }
            Ok((0..total).map(|i| list[i % list.len()]).collect())
        }
        ArrivalConfig::Shuffle => {
            // Block-wise seeded shuffles: each block is a permutation of the
            // pool, so long sessions revisit users across blocks.
            let mut order = Vec::with_capacity(total);
            let mut block = 0u64;
            while order.len() < total {
                // High-bit tag keeps arrival streams disjoint from step seeds.
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed::derive(
                    run_seed,
                    (1u64 << 63) | block,
                ));
                let mut chunk: Vec<u64> = pool.to_vec();
                for i in (1..chunk.len()).rev() {
                    let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                    chunk.swap(i, j);
                }
                order.extend(chunk);
                block += 1;
            }
            order.truncate(total);
            Ok(order)
        }
    }
}

fn summarize(
    records: &[StepRecord],
    latencies: &[u64],
    final_fairness: f64,
    with_latency: bool,
) -> SessionSummary {
    let served: Vec<&StepRecord> = records.iter().filter(|r| r.quality.is_some()).collect();
    let infeasible = records.len() - served.len();
    let mean_quality = if served.is_empty() {
        None
    } else {
        Some(served.iter().filter_map(|r| r.quality).sum::<f64>() / served.len() as f64)
    };
    let ratios: Vec<f64> = records.iter().filter_map(|r| r.relative_quality).collect();
    let mean_relative_quality = if ratios.is_empty() {
        None
    } else {
        Some(ratios.iter().sum::<f64>() / ratios.len() as f64)
    };

    let (latency_mean_us, latency_p50_us, latency_p95_us) = if with_latency && !latencies.is_empty()
    {
        let mut sorted = latencies.to_vec();
        sorted.sort_unstable();
        let mean = sorted.iter().sum::<u64>() as f64 / sorted.len() as f64;
        let p50 = sorted[(sorted.len() - 1) / 2];
        let p95 = sorted[((sorted.len() - 1) * 95) / 100];
        (Some(mean), Some(p50), Some(p95))
    } else {
        (None, None, None)
    };

    SessionSummary {
        served_steps: served.len() as u32,
        infeasible_steps: infeasible as u32,
        relaxed_steps: records.iter().filter(|r| r.relaxed).count() as u32,
        mean_quality,
        final_fairness,
        mean_relative_quality,
        latency_mean_us,
        latency_p50_us,
        latency_p95_us,
    }
}

/// Per-user quality ratios of a trace against a baseline trace over the same
/// users. `None` marks steps where either side served nothing or the
/// baseline quality is not positive.
pub fn relative_quality(
    trace: &SessionTrace,
    baseline: &SessionTrace,
) -> Result<Vec<Option<f64>>, AppError> {
    if trace.records.len() != baseline.records.len() {
        return Err(AppError::Config(format!(
            "trace lengths differ: {} vs {}",
            trace.records.len(),
            baseline.records.len()
        )));
    }
    trace
        .records
        .iter()
        .zip(&baseline.records)
        .map(|(a, b)| {
            if a.user != b.user {
                return Err(AppError::Config(format!(
                    "traces diverge at step {}: users {} vs {}",
                    a.step, a.user, b.user
                )));
            }
            Ok(match (a.quality, b.quality) {
                (Some(q), Some(q_star)) if q_star > 0.0 => Some(q / q_star),
                _ => None,
            })
        })
        .collect()
}

/// Mean and population standard deviation of a metric across runs.
#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct MetricStats {
    pub mean: f64,
    pub std_dev: f64,
}

fn stats_of(values: &[f64]) -> MetricStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MetricStats { mean, std_dev: var.sqrt() }
}

/// Cross-run aggregate for a family of seeded replications.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunAggregate {
    pub family_hash: String,
    pub runs: usize,
    pub mean_quality: MetricStats,
    pub final_fairness: MetricStats,
    pub infeasible_steps: MetricStats,
    pub mean_relative_quality: Option<MetricStats>,
    pub latency_mean_us: Option<MetricStats>,
}

/// Aggregates traces from identically-configured runs (same family hash).
pub fn aggregate_runs(traces: &[SessionTrace]) -> Result<RunAggregate, AppError> {
    let first = traces.first().ok_or_else(|| AppError::Config("no traces to aggregate".into()))?;
    for t in traces {
        if t.family_hash != first.family_hash {
            return Err(AppError::Config(format!(
                "traces come from different configs: {} vs {}",
                first.family_hash, t.family_hash
            )));
        }
    }
    let qualities: Vec<f64> =
        traces.iter().map(|t| t.summary.mean_quality.unwrap_or(0.0)).collect();
    let fairness: Vec<f64> = traces.iter().map(|t| t.summary.final_fairness).collect();
    let infeasible: Vec<f64> =
        traces.iter().map(|t| f64::from(t.summary.infeasible_steps)).collect();
    let ratios: Vec<f64> =
        traces.iter().filter_map(|t| t.summary.mean_relative_quality).collect();
    let latency: Vec<f64> = traces.iter().filter_map(|t| t.summary.latency_mean_us).collect();

    Ok(RunAggregate {
        family_hash: first.family_hash.clone(),
        runs: traces.len(),
        mean_quality: stats_of(&qualities),
        final_fairness: stats_of(&fairness),
        infeasible_steps: stats_of(&infeasible),
        mean_relative_quality: (ratios.len() == traces.len()).then(|| stats_of(&ratios)),
        latency_mean_us: (latency.len() == traces.len()).then(|| stats_of(&latency)),
    })
}
