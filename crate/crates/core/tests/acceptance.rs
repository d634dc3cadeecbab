//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line
//! with the measured quantities, then asserts.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use ngvi::estimators::{bonnet_price, exact_gradient, subsample_with_indices, variance_proxy, EstimatorKind};
use ngvi::expfam::{bregman_dual, exp_to_nat, kl_gaussian_oracle, log_partition, nat_to_exp, negative_entropy, Block,
    Coords, ExpParam, Family};
use ngvi::harness::{aggregate, run_experiment, Abscissa, ExperimentConfig, MetricTrace, RunOptions, Statistic};
use ngvi::harness::{fit_log_linear_slope, fit_loglog_slope};
use ngvi::models::data::{synthetic_linear, synthetic_logistic, synthetic_student};
use ngvi::models::{synthetic_gaussian, GaussianPrior, TargetModel};
use ngvi::optimizer::{bregman_to_optimum, default_init, ngvi_step, RunStatus, RunTrace};
use ngvi::projections::oracle::project_oracle;
use ngvi::projections::{project, ConstraintSet};
use ngvi::testing::{random_exp, random_spd, ALL_KINDS};

/// Writes to the real stdout so the line shows even when output is captured.
fn report(n: usize, pass: bool, detail: &str) {
    let line = format!("criterion {n}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn experiment(v: Value) -> Vec<RunTrace> {
    let cfg = ExperimentConfig::from_value(v).expect("config parses");
    run_experiment(&cfg, &RunOptions::default()).expect("experiment runs").traces
}

/// Mean of `metric` over runs against the iteration index.
fn mean_curve(traces: &[RunTrace], metric: &str) -> (Vec<f64>, Vec<f64>) {
    let ts = MetricTrace::from_runs(traces, metric).unwrap();
    let s = aggregate(&ts, Abscissa::Iteration, Statistic::Mean).unwrap();
    (s.xs(), s.centers())
}

/// Points with `x` in `[lo, hi]`.
fn window(xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    xs.iter().zip(ys).filter(|(x, _)| **x >= lo && **x <= hi).map(|(x, y)| (*x, *y)).unzip()
}

fn gaussian_bregman_config(step: Value, batch: Value, iterations: usize, stride: usize) -> Value {
    json!({
        "family": "gaussian_full",
        "model": {"model": "gaussian", "dim": 5, "kappa": 10, "seed": 0},
        "estimator": "bonnet_price",
        "schedule": {"step": step, "batch": batch},
        "iterations": iterations,
        "runs": 50,
        "metrics": {"bregman": true, "metric_stride": stride}
    })
}

/// Least-squares slope of log mean divergence against log t over the last
/// decade `[T/10, T]`.
fn final_decade_slope(traces: &[RunTrace], iterations: usize) -> f64 {
    let (xs, ys) = mean_curve(traces, "bregman");
    let (wx, wy) = window(&xs, &ys, iterations as f64 / 10.0, iterations as f64);
    fit_loglog_slope(&wx, &wy).unwrap()
}

#[test]
fn criterion_01_duality_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut round_trip, mut fenchel, mut kl) = (0.0f64, 0.0f64, 0.0f64);
    for kind in ALL_KINDS {
        for i in 0..200 {
            let family = Family::new(kind, 1 + i % 5).unwrap();
            let a = random_exp(family, &mut rng);
            let b = random_exp(family, &mut rng);
            let theta = exp_to_nat(&a).unwrap();
            let back = nat_to_exp(&theta).unwrap();
            round_trip = round_trip.max(back.coords().rel_diff(a.coords()));
            let theta_again = exp_to_nat(&back).unwrap();
            round_trip = round_trip.max(theta_again.coords().rel_diff(theta.coords()));

            let pairing = theta.coords().dot(a.coords());
            fenchel = fenchel.max(rel(log_partition(&theta) + negative_entropy(&a), pairing));

            let d = bregman_dual(&a, &b).unwrap();
            let oracle = kl_gaussian_oracle(&a.moments(), &b.moments()).unwrap();
            kl = kl.max((d - oracle).abs() / oracle.abs().max(1e-300));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = round_trip < 1e-8 && fenchel < 1e-8 && kl < 1e-8 && secs < 5.0;
    report(
        1,
        pass,
        &format!("max rel errors: round trip {round_trip:.2e}, Fenchel-Young {fenchel:.2e}, bregman vs KL {kl:.2e}; {secs:.2}s"),
    );
    assert!(pass);
}

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(rand_distr::StandardNormal));
    a.qr().q()
}

/// Feasible point for an eigen-clip set with an unrelated mean.
fn feasible_clip(family: Family, alpha: f64, beta: f64, rng: &mut ChaCha8Rng) -> ExpParam {
    let d = family.dim;
    let mean = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    let eig = DVector::from_fn(d, |_, _| rng.random_range(alpha..beta));
    let q = random_orthogonal(d, rng);
    let cov = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    ExpParam::from_mean_cov(family, mean, Block::Full(cov)).unwrap()
}

fn feasible_nonneg(family: Family, rng: &mut ChaCha8Rng) -> ExpParam {
    let d = family.dim;
    let mean = DVector::from_fn(d, |_, _| rng.random_range(0.0..2.0));
    let var = DVector::from_fn(d, |_, _| rng.random_range(0.2..3.0));
    ExpParam::from_mean_cov(family, mean, Block::Diag(var)).unwrap()
}

#[test]
fn criterion_02_projection_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_gap = 0.0f64;
    let mut idempotent = true;
    let (mut contraction_checks, mut contraction_failures) = (0usize, 0usize);
    let mut worst_violation = 0.0f64;

    let mut check = |omega: &ExpParam, c: &ConstraintSet, feasible: &[ExpParam]| {
        let p = project(omega, c).unwrap();
        let o = project_oracle(omega, c, 1e-7).unwrap();
        let dp = bregman_dual(&p, omega).unwrap();
        let dor = bregman_dual(&o, omega).unwrap();
        worst_gap = worst_gap.max((dp - dor).abs());
        let pp = project(&p, c).unwrap();
        idempotent &= c.contains(&p) && pp.coords() == p.coords();
        for f in feasible {
            assert!(c.contains(f));
            let before = bregman_dual(f, omega).unwrap();
            let after = bregman_dual(f, &p).unwrap();
            contraction_checks += 1;
            if after > before + 1e-10 {
                contraction_failures += 1;
                worst_violation = worst_violation.max(after - before);
            }
        }
    };

    let full = Family::full(3);
    for _ in 0..20 {
        let omega = random_exp(full, &mut rng);
        let eig = nalgebra::SymmetricEigen::new(omega.covariance().to_matrix()).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        // Bounds strictly inside the spectrum so that both clip.
        let alpha = lo + (hi - lo) * rng.random_range(0.1..0.4);
        let beta = lo + (hi - lo) * rng.random_range(0.6..0.9);
        let c = ConstraintSet::EigenClip { alpha, beta };
        let feasible: Vec<ExpParam> = (0..5).map(|_| feasible_clip(full, alpha, beta, &mut rng)).collect();
        check(&omega, &c, &feasible);
    }
    let diag = Family::diag(2);
    for _ in 0..20 {
        let mut omega = random_exp(diag, &mut rng);
        if omega.mean().iter().all(|&m| m >= 0.0) {
            let mean = -omega.mean().abs();
            omega = ExpParam::from_mean_cov(diag, mean, omega.covariance()).unwrap();
        }
        let feasible: Vec<ExpParam> = (0..5).map(|_| feasible_nonneg(diag, &mut rng)).collect();
        check(&omega, &ConstraintSet::NonNegativeMean, &feasible);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_gap <= 1e-6 && idempotent && contraction_failures == 0 && secs < 60.0;
    report(
        2,
        pass,
        &format!(
            "max |d(project) - d(oracle)| = {worst_gap:.2e}; idempotent+feasible: {idempotent}; contraction violated in \
             {contraction_failures}/{contraction_checks} (point, feasible point) pairs, worst excess {worst_violation:.3e}; {secs:.1}s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_estimator_unbiasedness() {
    let start = Instant::now();
    // Subsampling: the average over all M single-index estimates is exact.
    let model = TargetModel::blr(synthetic_linear(30, 3, 3), DMatrix::identity(3, 3) * 5.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut enum_err = 0.0f64;
    for _ in 0..5 {
        let omega = random_exp(Family::full(3), &mut rng);
        let exact = exact_gradient(&model, &omega).unwrap().value;
        let mut sum = Coords::zeros(Family::full(3));
        for m in 0..30 {
            sum = sum.add(&subsample_with_indices(&model, &omega, &[m]).unwrap().value);
        }
        enum_err = enum_err.max(sum.scale(1.0 / 30.0).rel_diff(&exact));
    }

    // Bonnet-Price on a Gaussian target: second block exact, first block
    // within a 4-sigma Monte Carlo band.
    let target = synthetic_gaussian(3, 10.0, 0).unwrap();
    let theta_pi = target.posterior_nat().unwrap();
    let omega = random_exp(Family::full(3), &mut rng);
    let (draws, n) = (20_000usize, 5usize);
    let mut second_err = 0.0f64;
    let mut firsts = Vec::with_capacity(draws);
    for _ in 0..draws {
        let g = bonnet_price(&target, &omega, n, &mut rng).unwrap().value;
        let s = g.second.lin_comb(1.0, &theta_pi.coords().second, -1.0).norm() / theta_pi.coords().second.norm();
        second_err = second_err.max(s);
        firsts.push(g.first.unwrap());
    }
    let truth = theta_pi.coords().first.clone().unwrap();
    let k = draws as f64;
    let mean = firsts.iter().fold(DVector::zeros(3), |a, f| a + f) / k;
    let var = firsts.iter().fold(DVector::zeros(3), |a, f| a + (f - &mean).map(|x| x * x)) / (k - 1.0);
    let z = (0..3).map(|i| (mean[i] - truth[i]).abs() / (var[i] / k).sqrt()).fold(0.0f64, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = enum_err <= 1e-12 && second_err <= 1e-12 && z <= 4.0 && secs < 30.0;
    report(
        3,
        pass,
        &format!("enumeration rel err {enum_err:.2e}; BP second block rel err {second_err:.2e}; BP first block max |z| {z:.2}; {secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_variance_law() {
    let start = Instant::now();
    let model = synthetic_gaussian(5, 10.0, 0).unwrap();
    let family = Family::full(5);
    let star = model.optimum(family, &ConstraintSet::Unconstrained).unwrap().unwrap();
    let omega0 = default_init(&model, family, 0).unwrap();
    let mix = |w: f64| {
        let c = omega0.coords().lin_comb(w, star.coords(), 1.0 - w);
        ExpParam::new(c).unwrap()
    };
    let probes = [("omega0", omega0.clone()), ("midpoint", mix(0.5)), ("near optimum", mix(0.01))];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (eta, n, trials) = (0.05, 10, 10_000);
    let mut ratios = Vec::new();
    for (_, omega) in &probes {
        let v1 = variance_proxy(&model, omega, EstimatorKind::BonnetPrice, eta, n, trials, &mut rng).unwrap();
        let v4 = variance_proxy(&model, omega, EstimatorKind::BonnetPrice, eta, 4 * n, trials, &mut rng).unwrap();
        ratios.push(v1 / v4);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = ratios.iter().all(|r| (2.8..=5.7).contains(r)) && secs < 120.0;
    let detail: Vec<String> = probes.iter().zip(&ratios).map(|((name, _), r)| format!("{name} {r:.3}")).collect();
    report(4, pass, &format!("ratio sigma^2(N)/sigma^2(4N), N={n}: {}; {secs:.1}s", detail.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_05_geometric_phase_and_plateau() {
    let start = Instant::now();
    let eta: f64 = 0.05;
    let (t, stride) = (2000, 1);
    let step = json!({"type": "constant", "eta": eta});
    let run_n = |n: usize| experiment(gaussian_bregman_config(step.clone(), json!({"type": "constant", "n": n}), t, stride));
    let traces = run_n(100);
    let (xs, ys) = mean_curve(&traces, "bregman");
    // Plateau: average of the mean curve over the last quarter.
    let plateau = |ys: &[f64]| {
        let tail = &ys[ys.len() * 3 / 4..];
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    let p100 = plateau(&ys);
    // Pre-plateau window: from t = 0 until the mean first falls below ten
    // times the plateau level.
    let end = ys.iter().position(|&y| y < 10.0 * p100).unwrap_or(ys.len());
    let slope = fit_log_linear_slope(&xs[..end], &ys[..end]).unwrap();
    let expected = (1.0 - eta).ln();
    let slope_ok = (slope - expected).abs() <= 0.2 * expected.abs();

    let p400 = plateau(&mean_curve(&run_n(400), "bregman").1);
    let ratio = p400 / p100;
    let secs = start.elapsed().as_secs_f64();
    let pass = slope_ok && ratio <= 0.5;
    report(
        5,
        pass,
        &format!(
            "pre-plateau window t in [0, {}]: slope {slope:.5} vs log(1-eta) = {expected:.5} (+-20%: {slope_ok}; \
             ratio to log(1-eta) {:.3}); plateau N=100 {p100:.3e}, N=400 {p400:.3e}, ratio {ratio:.3}; {secs:.0}s",
            xs[end.saturating_sub(1)],
            slope / expected
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_decreasing_step_constant_batch() {
    let start = Instant::now();
    let t = 5000;
    let traces = experiment(gaussian_bregman_config(
        json!({"type": "decreasing", "m": 1}),
        json!({"type": "constant", "n": 100}),
        t,
        10,
    ));
    let slope = final_decade_slope(&traces, t);
    let pass = (slope + 1.0).abs() <= 0.25;
    report(6, pass, &format!("final-decade log-log slope {slope:.3} (target -1 +- 0.25); {:.0}s", start.elapsed().as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_07_decreasing_step_increasing_batch() {
    let start = Instant::now();
    let t = 2000;
    let traces = experiment(gaussian_bregman_config(
        json!({"type": "decreasing", "m": 1}),
        json!({"type": "poly", "gamma": 1}),
        t,
        10,
    ));
    let slope = final_decade_slope(&traces, t);
    let pass = (slope + 2.0).abs() <= 0.35;
    report(7, pass, &format!("final-decade log-log slope {slope:.3} (target -2 +- 0.35); {:.0}s", start.elapsed().as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_08_constant_step_polynomial_batch() {
    let start = Instant::now();
    let t = 5000;
    let traces = experiment(gaussian_bregman_config(
        json!({"type": "constant", "eta": 0.05}),
        json!({"type": "poly", "gamma": 0.5}),
        t,
        10,
    ));
    let slope = final_decade_slope(&traces, t);
    let pass = (slope + 0.5).abs() <= 0.2;
    report(8, pass, &format!("final-decade log-log slope {slope:.3} (target -0.5 +- 0.2); {:.0}s", start.elapsed().as_secs_f64()));
    assert!(pass);
}

#[test]
fn criterion_09_conjugate_regression() {
    let start = Instant::now();
    let model = TargetModel::blr(synthetic_linear(500, 5, 0), DMatrix::identity(5, 5) * 5.0, 1.0).unwrap();
    let family = Family::full(5);
    let star = model.optimum(family, &ConstraintSet::Unconstrained).unwrap().unwrap();
    let omega0 = default_init(&model, family, 0).unwrap();
    let g = exact_gradient(&model, &omega0).unwrap();
    let omega1 = ngvi_step(&omega0, 1.0, &g, &ConstraintSet::Unconstrained).unwrap();
    let one_step = bregman_to_optimum(&omega1, &star).unwrap();

    let t = 5000;
    let traces = experiment(json!({
        "family": "gaussian_full",
        "model": {"model": "blr", "synthetic": {"m": 500, "d": 5, "seed": 0}, "prior_scale": 5, "noise_var": 1},
        "estimator": "subsample",
        "schedule": {"step": {"type": "decreasing", "m": 1}, "batch": {"type": "constant", "n": 10}},
        "iterations": t,
        "runs": 50,
        "metrics": {"bregman": true, "metric_stride": 10}
    }));
    let failures = traces.iter().filter(|r| r.failed()).count();
    let slope = final_decade_slope(&traces, t);
    let pass = one_step < 1e-10 && (slope + 1.0).abs() <= 0.25 && failures == 0;
    report(
        9,
        pass,
        &format!(
            "exact unit step divergence {one_step:.2e}; subsampling final-decade slope {slope:.3} (target -1 +- 0.25), \
             {failures} failed runs; {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

fn logistic_config(projected: bool) -> Value {
    let mut v = json!({
        "family": "gaussian_diag",
        "model": {"model": "logistic", "synthetic": {"m": 100, "d": 5, "seed": 0, "x_star": 5}, "prior_scale": 5},
        "estimator": "bonnet_price",
        "schedule": {"step": {"type": "constant", "eta": 0.01}, "batch": {"type": "constant", "n": 100}},
        "iterations": 2000,
        "runs": 50,
        "metrics": {"elbo": {"n_samples": 100}, "metric_stride": 10}
    });
    if projected {
        v["projection"] = json!("nonneg_mean");
    }
    v
}

/// Mean and 95% normal half-width over runs at a given iteration.
fn band_at(traces: &[RunTrace], iter: usize) -> (f64, f64) {
    let vals: Vec<f64> =
        traces.iter().filter_map(|t| t.points.iter().find(|p| p.iter == iter).and_then(|p| p.elbo)).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[test]
fn criterion_10_logistic_regression() {
    let start = Instant::now();
    let t = 2000;
    let plain = experiment(logistic_config(false));
    let projected = experiment(logistic_config(true));
    let (m0, h0) = band_at(&plain, 0);
    let (mt, ht) = band_at(&plain, t);
    let separated = mt - ht > m0 + h0;
    let violations = plain
        .iter()
        .chain(&projected)
        .filter(|r| matches!(r.status, RunStatus::WellPosednessViolated { .. }))
        .count();

    let (xs, plain_curve) = mean_curve(&plain, "elbo");
    let (pxs, proj_curve) = mean_curve(&projected, "elbo");
    assert_eq!(xs, pxs);
    let target = *plain_curve.last().unwrap();
    let first_reach = |curve: &[f64]| curve.iter().position(|&v| v >= target).map(|i| xs[i]);
    let reach_plain = first_reach(&plain_curve);
    let reach_proj = first_reach(&proj_curve);
    let no_slower = matches!((reach_plain, reach_proj), (Some(a), Some(b)) if b <= a);

    let pass = separated && violations == 0 && no_slower;
    report(
        10,
        pass,
        &format!(
            "mean ELBO t=0 {m0:.2} +- {h0:.2}, t={t} {mt:.2} +- {ht:.2} (separated: {separated}); {violations} \
             well-posedness failures; iterations to reach final unprojected mean ELBO {target:.3}: plain {reach_plain:?}, \
             projected {reach_proj:?}; {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

fn student_config(projected: bool) -> Value {
    let mut v = json!({
        "family": "gaussian_full",
        "model": {"model": "student", "dof": 3, "synthetic": {"m": 200, "d": 5, "seed": 0},
                  "prior_scale": 5, "noise_var": 1},
        "estimator": "bonnet_price",
        "schedule": {"step": {"type": "constant", "eta": 0.005}, "batch": {"type": "constant", "n": 250}},
        "iterations": 2000,
        "runs": 50,
        "metrics": {"elbo": {"n_samples": 100}, "metric_stride": 100}
    });
    if projected {
        v["projection"] = json!("eigen_clip");
        v["alpha"] = json!(1e-4);
        v["beta"] = json!(1e4);
    }
    v
}

/// Median ELBO over completed runs at the first and last recorded points.
fn median_first_last(traces: &[RunTrace]) -> (f64, f64) {
    let done: Vec<RunTrace> = traces.iter().filter(|t| !t.failed()).cloned().collect();
    if done.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let ts = MetricTrace::from_runs(&done, "elbo").unwrap();
    let s = aggregate(&ts, Abscissa::Iteration, Statistic::MedianIqr).unwrap();
    (s.rows[0].center, s.rows.last().unwrap().center)
}

#[test]
fn criterion_11_student_regression_projection_contrast() {
    let start = Instant::now();
    let plain = experiment(student_config(false));
    let projected = experiment(student_config(true));
    let plain_failed = plain.iter().filter(|t| t.failed()).count();
    let proj_failed = projected.iter().filter(|t| t.failed()).count();
    let (p0, pt) = median_first_last(&plain);
    let (q0, qt) = median_first_last(&projected);
    let plain_breaks = plain_failed >= 1 || pt <= p0 || pt.is_nan();
    let projected_works = proj_failed == 0 && qt > q0;
    let pass = plain_breaks && projected_works;
    report(
        11,
        pass,
        &format!(
            "without projection: {plain_failed}/50 failed, median ELBO {p0:.2} -> {pt:.2} (breakdown shown: {plain_breaks}); \
             with projection: {proj_failed}/50 failed, median ELBO {q0:.2} -> {qt:.2} (improves: {projected_works}); {:.0}s",
            start.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

/// Largest relative error of the analytic gradient and Hessian against
/// central differences of the log-density and of the gradient.
fn finite_difference_error(model: &TargetModel, seed: u64) -> f64 {
    let d = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5));
        let (_, grad, hess) = model.log_density_grad_hess(&x).unwrap();
        let mut fd_grad = DVector::zeros(d);
        let mut fd_hess = DMatrix::zeros(d, d);
        for i in 0..d {
            let h = 1e-5 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            fd_grad[i] = (model.log_density(&xp).unwrap() - model.log_density(&xm).unwrap()) / (2.0 * h);
            let gp = model.log_density_grad_hess(&xp).unwrap().1;
            let gm = model.log_density_grad_hess(&xm).unwrap().1;
            fd_hess.set_column(i, &((gp - gm) / (2.0 * h)));
        }
        worst = worst.max((&fd_grad - &grad).norm() / grad.norm().max(1.0));
        worst = worst.max((&fd_hess - &hess).norm() / hess.norm().max(1.0));
    }
    worst
}

#[test]
fn criterion_12_finite_difference_suite() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let prior = random_spd(3, &mut rng) * 3.0;
    let models = [
        ("gaussian", synthetic_gaussian(3, 10.0, 12).unwrap()),
        ("blr", TargetModel::blr(synthetic_linear(40, 3, 12), prior.clone(), 0.7).unwrap()),
        ("logistic", TargetModel::logistic(synthetic_logistic(40, 3, 1.0, 12), prior.clone()).unwrap()),
        (
            "student",
            TargetModel::student(
                synthetic_student(40, 3, 3.0, 12),
                GaussianPrior::new(DVector::from_column_slice(&[0.5, -0.2, 0.1]), prior).unwrap(),
                1.0,
                3.0,
            )
            .unwrap(),
        ),
    ];
    let errors: Vec<(&str, f64)> = models.iter().map(|(name, m)| (*name, finite_difference_error(m, 12))).collect();
    let secs = start.elapsed().as_secs_f64();
    let pass = errors.iter().all(|(_, e)| *e <= 1e-5) && secs < 10.0;
    let detail: Vec<String> = errors.iter().map(|(n, e)| format!("{n} {e:.2e}")).collect();
    report(12, pass, &format!("max rel error: {}; {secs:.2}s", detail.join(", ")));
    assert!(pass);
}
