//! Session runner tests: trace consistency, byte-level determinism, horizon
//! wraparound, relative quality, aggregation, and config validation.

use fairbundle::config::ExperimentConfig;
use fairbundle::session::{aggregate_runs, relative_quality, run_session, SessionTrace};
use fairbundle::trace::{read_trace, write_trace};
use fairbundle_core::fairness::{fairness_so_far, FairnessSpec, SessionState, ToleranceSchedule};
use fairbundle_core::model::{Bundle, ItemId};
use fairbundle_core::synth::{synthetic_catalog, SyntheticCatalogSpec};

fn base_config(method: &str) -> ExperimentConfig {
    let text = format!(
        r#"
[dataset.synthetic]
group_sizes = [40, 40]
users = 60
relevance_bias = [0.2, 0.0]
catalog_seed = 5
relevance_seed = 6

[bundle]
size = 4
gamma = 0.3333333333333333

[fairness]
rho = [0.5, 0.5]
epsilon = 0.2
alpha = 2.0

[solver]
method = "{method}"
top_m = 40
lambda = 1.0

[session]
horizon = 25
seed = 11
repeats = 2

[output]
directory = "unused"
prefix = "unused"
"#
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

/// Recompute the final fairness metric from the recorded bundles; it must
/// match the trace's value exactly (well inside 1e-9).
fn recompute_final_fairness(config: &ExperimentConfig, trace: &SessionTrace) -> f64 {
    let catalog = match &config.dataset {
        fairbundle::config::DatasetConfig::Synthetic(s) => {
            synthetic_catalog(&SyntheticCatalogSpec {
                group_sizes: s.group_sizes.clone(),
                type_count: s.type_count,
                types_per_item: s.types_per_item,
                seed: s.catalog_seed,
            })
            .unwrap()
        }
        _ => unreachable!("tests use synthetic data"),
    };
    let spec = FairnessSpec::new(
        config.fairness.rho.clone(),
        config.fairness.epsilon,
        ToleranceSchedule::Fixed,
    )
    .unwrap();
    let mut state = SessionState::new(config.session.horizon, spec.group_count()).unwrap();
    for record in &trace.records {
        if record.step > 1 && (record.step - 1) % config.session.horizon == 0 {
            state.reset();
        }
        if record.items.is_empty() {
            state.skip().unwrap();
        } else {
            let bundle = Bundle::from_ids(record.items.iter().map(|&i| ItemId(i))).unwrap();
            state.record(&bundle, &catalog).unwrap();
        }
    }
    fairness_so_far(&state, &spec).unwrap()
}

#[test]
fn trace_fairness_is_recomputable_from_the_records() {
    for method in ["fairwg", "f3r", "exact", "random", "adafairwg", "exact-nofair"] {
        let config = base_config(method);
        let trace = run_session(&config, 3).unwrap();
        assert_eq!(trace.records.len(), 25, "{method}");
        let recomputed = recompute_final_fairness(&config, &trace);
        assert!(
            (recomputed - trace.summary.final_fairness).abs() < 1e-9,
            "{method}: trace says {}, records say {recomputed}",
            trace.summary.final_fairness
        );
    }
}

#[test]
fn identical_configs_produce_byte_identical_trace_files() {
    let config = base_config("f3r");
    let trace_a = run_session(&config, 42).unwrap();
    let trace_b = run_session(&config, 42).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let files_a = write_trace(dir.path(), "a", &trace_a).unwrap();
    let files_b = write_trace(dir.path(), "b", &trace_b).unwrap();

    let bytes_a = std::fs::read(&files_a.trace).unwrap();
    let bytes_b = std::fs::read(&files_b.trace).unwrap();
    assert_eq!(bytes_a, bytes_b);
    assert!(!bytes_a.is_empty());
}

#[test]
fn traces_round_trip_through_files() {
    let config = base_config("fairwg");
    let trace = run_session(&config, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = write_trace(dir.path(), "t", &trace).unwrap();

    let loaded = read_trace(&files.trace).unwrap();
    assert_eq!(loaded.records, trace.records);
    assert_eq!(loaded.config_hash, trace.config_hash);
    assert_eq!(loaded.summary.served_steps, trace.summary.served_steps);
    assert_eq!(loaded.summary.final_fairness, trace.summary.final_fairness);
    assert_eq!(loaded.latencies_us.len(), trace.latencies_us.len());
}

#[test]
fn doubled_horizon_session_equals_two_independent_sessions() {
    // A 2T-user session with horizon T resets after T users, so its second
    // half starts from zeroed counters: constraint-wise it is two sessions.
    let mut config = base_config("exact");
    config.session.total_users = Some(50);
    let long = run_session(&config, 8).unwrap();

    let mut single = base_config("exact");
    single.session.total_users = Some(25);
    let first = run_session(&single, 8).unwrap();

    // Same arrival stream prefix, same bundles over the first horizon.
    for (a, b) in long.records.iter().take(25).zip(&first.records) {
        assert_eq!(a.items, b.items);
        assert_eq!(a.fairness_so_far, b.fairness_so_far);
    }
    assert_eq!(long.records.len(), 50);

    // After the reset the metric restarts from scratch: step 26's fairness
    // must equal the metric of that step's bundle counted alone.
    let reset_record = &long.records[25];
    let catalog = synthetic_catalog(&SyntheticCatalogSpec {
        group_sizes: vec![40, 40],
        type_count: 0,
        types_per_item: 0,
        seed: 5,
    })
    .unwrap();
    let spec = FairnessSpec::new(vec![0.5, 0.5], 0.2, ToleranceSchedule::Fixed).unwrap();
    let mut fresh = SessionState::new(25, 2).unwrap();
    let bundle = Bundle::from_ids(reset_record.items.iter().map(|&i| ItemId(i))).unwrap();
    fresh.record(&bundle, &catalog).unwrap();
    assert_eq!(reset_record.fairness_so_far, fairness_so_far(&fresh, &spec).unwrap());
}

#[test]
fn relative_quality_of_a_trace_against_itself_is_one() {
    let config = base_config("fairwg");
    let trace = run_session(&config, 4).unwrap();
    let ratios = relative_quality(&trace, &trace).unwrap();
    for r in ratios.into_iter().flatten() {
        assert!((r - 1.0).abs() < 1e-12);
    }
}

#[test]
fn fair_solver_never_beats_the_unconstrained_baseline() {
    let mut fair = base_config("exact");
    fair.session.compute_baseline = true;
    let trace = run_session(&fair, 5).unwrap();
    let mut seen = 0;
    for record in &trace.records {
        if let Some(ratio) = record.relative_quality {
            assert!(ratio <= 1.0 + 1e-9, "step {}: ratio {ratio}", record.step);
            assert!(ratio > 0.0);
            seen += 1;
        }
    }
    assert!(seen > 0, "baseline was requested but never recorded");
}

#[test]
fn mismatched_traces_are_rejected() {
    let config = base_config("fairwg");
    let trace = run_session(&config, 4).unwrap();

    let mut shorter = base_config("fairwg");
    shorter.session.total_users = Some(10);
    let other = run_session(&shorter, 4).unwrap();
    assert!(relative_quality(&trace, &other).is_err());
}

#[test]
fn aggregation_matches_hand_statistics() {
    let config = base_config("f3r");
    let a = run_session(&config, 1).unwrap();
    let b = run_session(&config, 2).unwrap();

    let single = aggregate_runs(std::slice::from_ref(&a)).unwrap();
    assert_eq!(single.final_fairness.std_dev, 0.0);

    let both = aggregate_runs(&[a.clone(), b.clone()]).unwrap();
    let fa = a.summary.final_fairness;
    let fb = b.summary.final_fairness;
    let mean = (fa + fb) / 2.0;
    let sd = ((fa - mean).powi(2) + (fb - mean).powi(2)) / 2.0;
    assert!((both.final_fairness.mean - mean).abs() < 1e-12);
    assert!((both.final_fairness.std_dev - sd.sqrt()).abs() < 1e-12);

    // Identical traces: zero deviation everywhere.
    let twice = aggregate_runs(&[a.clone(), a.clone()]).unwrap();
    assert_eq!(twice.mean_quality.std_dev, 0.0);
    assert_eq!(twice.final_fairness.std_dev, 0.0);
}

#[test]
fn aggregation_rejects_different_configs() {
    let a = run_session(&base_config("f3r"), 1).unwrap();
    let b = run_session(&base_config("fairwg"), 1).unwrap();
    assert!(aggregate_runs(&[a, b]).is_err());
}

#[test]
fn unknown_config_keys_are_errors() {
    let mut text = String::from(
        r#"
[dataset.synthetic]
group_sizes = [10, 10]
users = 10
relevance_bias = [0.0, 0.0]

[bundle]
size = 2
gamma = 0.5

[fairness]
rho = [0.5, 0.5]
epsilon = 0.1

[solver]
method = "fairwg"
top_m = 4

[session]
horizon = 5
seed = 1
"#,
    );
    assert!(ExperimentConfig::from_toml(&text).is_ok());
    text.push_str("\n[session2]\nbogus = 1\n");
    assert!(ExperimentConfig::from_toml(&text).is_err());

    let with_typo = text.replace("[session2]\nbogus = 1", "").replace("seed = 1", "sed = 1");
    assert!(ExperimentConfig::from_toml(&with_typo).is_err());
}

#[test]
fn out_of_domain_config_values_are_errors() {
    let good = base_config("fairwg");

    let mut bad = good.clone();
    bad.bundle.gamma = 1.5;
    assert!(bad.validate().is_err());

    let mut bad = good.clone();
    bad.fairness.rho = vec![0.5, 0.6];
    assert!(bad.validate().is_err());

    let mut bad = good.clone();
    bad.fairness.rho = vec![0.0, 1.0];
    assert!(bad.validate().is_err());

    let mut bad = good.clone();
    bad.solver.top_m = 2; // smaller than bundle size 4
    assert!(bad.validate().is_err());

    let mut bad = good.clone();
    bad.solver.explore = Some(1.5);
    assert!(bad.validate().is_err());

    let mut bad = good;
    bad.fairness.epsilon = -0.1;
    assert!(bad.validate().is_err());
}

#[test]
fn alpha_accepts_fixed_or_a_positive_power() {
    let mut config = base_config("exact");
    config.fairness.alpha = fairbundle::config::AlphaConfig::Keyword("fixed".into());
    assert!(config.validate().is_ok());
    config.fairness.alpha = fairbundle::config::AlphaConfig::Keyword("linear".into());
    assert!(config.validate().is_err());
    config.fairness.alpha = fairbundle::config::AlphaConfig::Power(-1.0);
    assert!(config.validate().is_err());
    config.fairness.alpha = fairbundle::config::AlphaConfig::Power(2.0);
    assert!(config.validate().is_ok());
}

#[test]
fn relax_fallback_serves_flagged_steps() {
    // Candidate pools are all drawn from one group's best items, so the
    // fairness-constrained exact solve starves the other group quickly; with
    // the relax policy those steps still serve (flagged), with report they
    // skip.
    let text = r#"
[dataset.synthetic]
group_sizes = [40, 4]
users = 30
relevance_bias = [0.3, 0.0]
catalog_seed = 2
relevance_seed = 3

[bundle]
size = 4
gamma = 0.2

[fairness]
rho = [0.5, 0.5]
epsilon = 0.0

[solver]
method = "exact"
top_m = 8

[session]
horizon = 30
seed = 1
repeats = 1
fallback = "relax"
"#;
    let relax = ExperimentConfig::from_toml(text).unwrap();
    let trace = run_session(&relax, 2).unwrap();
    let relaxed = trace.records.iter().filter(|r| r.relaxed).count();
    assert!(relaxed > 0, "expected at least one relaxed step");
    assert_eq!(trace.summary.relaxed_steps as usize, relaxed);

    let report = ExperimentConfig::from_toml(&text.replace("\"relax\"", "\"report\"")).unwrap();
    let trace = run_session(&report, 2).unwrap();
    assert!(trace.summary.infeasible_steps > 0);
    assert!(trace.records.iter().all(|r| !r.relaxed));
}
