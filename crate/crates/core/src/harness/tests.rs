use serde_json::json;

use super::*;
use crate::optimizer::RunStatus;

fn gaussian_config() -> serde_json::Value {
    json!({
        "family": "gaussian_full",
        "model": {"model": "gaussian", "dim": 3, "kappa": 10},
        "estimator": "bonnet_price",
        "schedule": {"step": {"type": "constant", "eta": 0.2}, "batch": {"type": "constant", "n": 5}},
        "iterations": 20,
        "runs": 4,
        "base_seed": 7,
        "metrics": {"bregman": true, "elbo": {"n_samples": 10}}
    })
}

fn config(v: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_value(v).unwrap()
}

fn paths(errors: &[ValidationError]) -> Vec<&str> {
    errors.iter().map(|e| e.path.as_str()).collect()
}

#[test]
fn valid_config_round_trips() {
    let cfg = config(gaussian_config());
    assert!(validate(&cfg).is_empty());
    assert_eq!(cfg.constraint().unwrap(), ConstraintSet::Unconstrained);
    let again = ExperimentConfig::from_value(cfg.to_value()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn step_size_above_one_is_rejected() {
    let mut v = gaussian_config();
    v["schedule"]["step"]["eta"] = json!(1.5);
    let errors = validate(&config(v));
    assert_eq!(paths(&errors), vec!["schedule.step.eta"]);
    assert!(errors[0].message.contains("step.eta must lie in (0,1]"));
}

#[test]
fn subsampling_a_synthetic_gaussian_is_a_cross_reference_error() {
    let mut v = gaussian_config();
    v["estimator"] = json!("subsample");
    assert_eq!(paths(&validate(&config(v))), vec!["estimator"]);
}

#[test]
fn all_violations_are_listed() {
    let v = json!({
        "family": "gaussian_full",
        "model": {"model": "logistic", "synthetic": {"m": 10, "d": 2}},
        "estimator": "exact",
        "projection": "nonneg_mean",
        "schedule": {"step": {"type": "constant", "eta": 0.0}, "batch": {"type": "constant", "n": 0}},
        "iterations": 0,
        "runs": 0,
        "metrics": {"bregman": true, "metric_stride": 0},
        "init": {"mu": [1, 2, 3], "sigma": [1, 1, 1]}
    });
    let errors = validate(&config(v));
    let p = paths(&errors);
    for expected in ["runs", "iterations", "schedule.step.eta", "schedule.batch.n", "estimator", "projection",
        "metrics.metric_stride", "metrics.bregman", "init"]
    {
        assert!(p.contains(&expected), "{expected} missing from {p:?}");
    }
}

#[test]
fn projection_keys() {
    let mut v = gaussian_config();
    v["projection"] = json!("eigen_clip");
    v["alpha"] = json!(0.5);
    assert_eq!(paths(&validate(&config(v.clone()))), vec!["projection"]);
    v["beta"] = json!(2.0);
    let cfg = config(v);
    assert!(validate(&cfg).is_empty());
    assert_eq!(cfg.constraint().unwrap(), ConstraintSet::EigenClip { alpha: 0.5, beta: 2.0 });
    assert_eq!(ProjectionSpec::from_constraint(cfg.constraint().unwrap()), cfg.projection);
}

#[test]
fn bregman_needs_a_closed_form_or_an_override() {
    let v = json!({
        "family": "gaussian_diag",
        "model": {"model": "student", "dof": 3, "synthetic": {"m": 10, "d": 2}},
        "estimator": "bonnet_price",
        "schedule": {"step": {"type": "decreasing"}, "batch": {"type": "constant", "n": 1}},
        "iterations": 1,
        "metrics": {"bregman": true}
    });
    assert_eq!(paths(&validate(&config(v.clone()))), vec!["metrics.bregman"]);
    let mut v = v;
    v["optimum"] = json!({"mu": [0, 0], "sigma": [1, 1]});
    assert!(validate(&config(v)).is_empty());
}

#[test]
fn malformed_documents_are_parse_errors() {
    assert!(matches!(validate_str("{\"family\": "), Err(NgviError::Parse { .. })));
    assert!(matches!(validate_str("{\"family\": \"gaussian_full\"}"), Err(NgviError::Parse { .. })));
}

#[test]
fn runs_use_consecutive_seeds_and_share_the_schedule() {
    let out = run_experiment(&config(gaussian_config()), &RunOptions::default()).unwrap();
    assert_eq!(out.manifest.seeds, vec![7, 8, 9, 10]);
    assert_eq!(out.traces.len(), 4);
    assert_eq!(out.manifest.failures, 0);
    for t in &out.traces {
        let budgets: Vec<u64> = t.points.iter().map(|p| p.budget).collect();
        assert_eq!(budgets, out.traces[0].points.iter().map(|p| p.budget).collect::<Vec<_>>());
    }
    assert_ne!(out.traces[0].points, out.traces[1].points);
}

#[test]
fn results_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(gaussian_config());
    for name in ["a", "b"] {
        cfg.output = Some(dir.path().join(name));
        run_experiment(&cfg, &RunOptions { jobs: Some(2), base_dir: None }).unwrap();
    }
    let a = std::fs::read(dir.path().join("a/results.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/results.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("run,iter,eta,batch,budget,metric,value"));
    assert_eq!(lines.next().unwrap().split(',').take(6).collect::<Vec<_>>(), vec!["0", "0", "", "", "0", "bregman"]);
    // 4 runs x 21 points x 2 metrics
    assert_eq!(text.lines().count(), 1 + 4 * 21 * 2);

    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.seeds, vec![7, 8, 9, 10]);
    assert_eq!(manifest.config["iterations"], json!(20));
}

#[test]
fn failing_runs_are_counted_and_do_not_disturb_the_others() {
    // Heavy-tailed toy regression, unit step, one Monte Carlo sample: the
    // Hessian estimate regularly points the wrong way.
    let v = json!({
        "family": "gaussian_full",
        "model": {"model": "student", "dof": 1, "synthetic": {"m": 30, "d": 2, "seed": 3},
                  "prior_scale": 100, "noise_var": 0.01},
        "estimator": "bonnet_price",
        "schedule": {"step": {"type": "constant", "eta": 1.0}, "batch": {"type": "constant", "n": 1}},
        "iterations": 500,
        "runs": 12,
        "metrics": {"elbo": {"n_samples": 5}},
        "init": {"mu": [3, 3], "sigma": [50, 50]}
    });
    let cfg = config(v);
    let out = run_experiment(&cfg, &RunOptions::default()).unwrap();
    let failed: Vec<usize> = (0..12).filter(|&r| out.traces[r].status != RunStatus::Completed).collect();
    assert!(!failed.is_empty());
    assert_eq!(out.manifest.failures, failed.len());

    // Each run equals the same seed run alone.
    for r in [0usize, 11] {
        let mut solo = cfg.clone();
        solo.runs = 1;
        solo.base_seed = r as u64;
        let one = run_experiment(&solo, &RunOptions::default()).unwrap();
        assert_eq!(one.traces[0].points, out.traces[r].points);
    }
}
