//! End-to-end learner checks on synthetic datasets with known generating
//! models: coefficient recovery, threshold bracketing, analytic pruning,
//! border-biased sampling, cross-validated precision, and refinement
//! bookkeeping on a real searched system.

use safewcet::learn::{
    best_size_point, distance_sample, fit_rsm_logit, kfold_precision, prune_by_intercepts,
    refine, threshold_no_false_negative, threshold_no_false_positive, FeatureSet, RefineConfig,
    RsmModel, Term,
};
use safewcet::model::{parse_system, SystemSpec, TaskId};
use safewcet::search::{nsga2_search, LabeledDataset, LabeledRow, SearchParams};
use safewcet::seeds::rng_from_seed;
use safewcet::sim::Label;
use safewcet::synth::{generate_system, GenConfig};
use safewcet::time::TimeValue;

use rand::Rng;

fn sigmoid(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Test harness system: `dim` wide-range tasks at 0.01 ms resolution. Never
/// simulated; it only anchors scales, names, and range bounds.
fn harness_spec_from(dim: usize, lo: &str) -> SystemSpec {
    let tasks: Vec<serde_json::Value> = (0..dim)
        .map(|i| {
            serde_json::json!({
                "id": format!("f{i}"),
                "kind": "periodic",
                "offset": "0",
                "period": "50",
                "wcet": [lo, "10"],
                "deadline": "50",
                "priority": (dim - i) as i64,
                "constraint": [0, 5],
                "partition": "main",
            })
        })
        .collect();
    let doc = serde_json::json!({
        "scheduler": { "resolution": "0.01" },
        "cores": 1,
        "context_switch": { "startup": ["0", "0"], "exit": ["0", "0"], "ipi": ["0", "0"] },
        "partitions": [{ "id": "main", "budget_percent": 100 }],
        "tasks": tasks,
        "target_tasks": (0..dim).map(|i| format!("f{i}")).collect::<Vec<_>>(),
        "sim_horizon": "100",
    });
    parse_system(&doc.to_string()).unwrap()
}

fn harness_spec(dim: usize) -> SystemSpec {
    harness_spec_from(dim, "1")
}

/// Bernoulli labels from a known logit over uniformly drawn coordinates.
fn synthetic_dataset(
    spec: &SystemSpec,
    n: usize,
    seed: u64,
    eta: impl Fn(&[f64]) -> f64,
) -> LabeledDataset {
    let mut rng = rng_from_seed(seed);
    let mut ds = LabeledDataset::new(spec);
    for i in 0..n {
        let units: Vec<TimeValue> = ds
            .range_tasks
            .iter()
            .map(|&t| {
                let task = spec.task(t);
                TimeValue::from_units(
                    rng.random_range(task.wcet_min.units()..=task.wcet_max.units()),
                )
            })
            .collect();
        let ms: Vec<f64> = units.iter().map(|&u| spec.scale.to_ms_f64(u)).collect();
        let label = if rng.random::<f64>() < sigmoid(eta(&ms)) {
            Label::Unsafe
        } else {
            Label::Safe
        };
        ds.rows.push(LabeledRow {
            wcet: units,
            label,
            case_id: i as u64,
            wcet_seed: 0,
        });
    }
    ds
}

fn coefficient(model: &RsmModel, term: Term) -> f64 {
    model
        .terms
        .iter()
        .zip(&model.coefficients)
        .find(|(t, _)| **t == term)
        .map(|(_, &c)| c)
        .unwrap_or(0.0)
}

#[test]
fn one_dimensional_coefficients_recover_within_tolerance() {
    let spec = harness_spec(1);
    let truth = [-4.4, 0.8];
    let ds = synthetic_dataset(&spec, 10_000, 31, |x| truth[0] + truth[1] * x[0]);
    let features = FeatureSet {
        tasks: spec.range_tasks(),
    };
    let model = fit_rsm_logit(&spec, &ds, &features).unwrap();
    assert!(!model.ridge_fallback, "noisy data must not separate");
    assert!((coefficient(&model, Term::Intercept) - truth[0]).abs() <= 0.2);
    assert!((coefficient(&model, Term::Linear(0)) - truth[1]).abs() <= 0.2);
    assert!(coefficient(&model, Term::Quadratic(0)).abs() <= 0.2);
    assert!(
        model.aic_trace.windows(2).all(|w| w[1] < w[0]),
        "AIC must descend strictly: {:?}",
        model.aic_trace
    );
}

#[test]
fn two_dimensional_coefficients_recover_within_tolerance() {
    // Ranges starting near zero keep the intercept inside the data's
    // support, so its raw-unit standard error stays small.
    let spec = harness_spec_from(2, "0.01");
    let expect = [
        (Term::Intercept, -2.0),
        (Term::Linear(0), 0.55),
        (Term::Linear(1), -0.5),
        (Term::Quadratic(0), -0.06),
        (Term::Quadratic(1), 0.09),
        (Term::Interaction(0, 1), 0.05),
    ];
    let eta = |x: &[f64]| -> f64 { expect.iter().map(|(t, c)| c * t.eval(x)).sum() };
    let ds = synthetic_dataset(&spec, 10_000, 1, eta);
    let features = FeatureSet {
        tasks: spec.range_tasks(),
    };
    let model = fit_rsm_logit(&spec, &ds, &features).unwrap();
    for (term, truth) in expect {
        let got = coefficient(&model, term);
        assert!(
            (got - truth).abs() <= 0.2,
            "{term:?}: fitted {got} vs true {truth}"
        );
    }
    assert!(model.aic_trace.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn thresholds_bracket_every_training_instance() {
    let spec = harness_spec(1);
    let ds = synthetic_dataset(&spec, 4_000, 33, |x| 1.1 * (x[0] - 5.0));
    let features = FeatureSet {
        tasks: spec.range_tasks(),
    };
    let model = fit_rsm_logit(&spec, &ds, &features).unwrap();
    let (p_u, degenerate) = threshold_no_false_negative(&spec, &ds, &model).unwrap();
    let p_s = threshold_no_false_positive(&spec, &ds, &model).unwrap();
    assert!(!degenerate);
    let (scores, flags) = safewcet::learn::predictions(&spec, &ds, &model).unwrap();
    for (&p, &unsafe_flag) in scores.iter().zip(&flags) {
        if unsafe_flag {
            assert!(p >= p_s, "unsafe instance below p_s");
        } else {
            assert!(p < p_u, "safe instance at or above p_u");
        }
    }
}

#[test]
fn pruning_reproduces_the_analytic_axis_intercepts() {
    let spec = harness_spec(2);
    // eta = -10 + x + 0.5 y: the x axis (y anchored at 1) crosses p = 0.5
    // at x = 9.5; the y axis never crosses inside [1, 10].
    let model = RsmModel {
        tasks: spec.range_tasks(),
        terms: vec![Term::Intercept, Term::Linear(0), Term::Linear(1)],
        coefficients: vec![-10.0, 1.0, 0.5],
        ridge_fallback: false,
        aic: 0.0,
        aic_trace: Vec::new(),
    };
    let mut ds = LabeledDataset::new(&spec);
    let unit = |ms: f64| spec.scale.quantize_ms(ms);
    for (i, (x, y)) in [(9.4, 2.0), (9.6, 2.0), (2.0, 9.9), (9.5, 9.9)].iter().enumerate() {
        ds.rows.push(LabeledRow {
            wcet: vec![unit(*x), unit(*y)],
            label: Label::Safe,
            case_id: i as u64,
            wcet_seed: 0,
        });
    }
    let (reduced, pruned) = prune_by_intercepts(&spec, &ds, &model, 0.5).unwrap();
    assert!((reduced[0].0 - 1.0).abs() < 1e-9);
    assert!((reduced[0].1 - 9.5).abs() < 1e-6, "axis crossing {}", reduced[0].1);
    assert_eq!(reduced[1], (1.0, 10.0), "no crossing keeps the full range");
    // Rows beyond any reduced bound are dropped; the boundary row stays.
    let kept: Vec<u64> = pruned.rows.iter().map(|r| r.case_id).collect();
    assert_eq!(kept, vec![0, 2, 3]);
}

#[test]
fn distance_sampling_concentrates_near_the_border() {
    let model = RsmModel {
        tasks: vec![TaskId(0)],
        terms: vec![Term::Intercept, Term::Linear(0)],
        coefficients: vec![-5.5, 1.0],
        ridge_fallback: false,
        aic: 0.0,
        aic_trace: Vec::new(),
    };
    let reduced = vec![(1.0, 10.0)];
    let mut rng = rng_from_seed(8);
    let points = distance_sample(&model, 0.5, &reduced, 200, &mut rng);
    assert_eq!(points.len(), 200);
    assert!(points.iter().all(|p| (1.0..=10.0).contains(&p[0])));
    let mean_dev: f64 =
        points.iter().map(|p| (p[0] - 5.5).abs()).sum::<f64>() / points.len() as f64;
    // Uniform sampling over [1, 10] would average about 2.25 from 5.5.
    assert!(
        mean_dev < 1.4,
        "border bias too weak: mean deviation {mean_dev}"
    );
}

#[test]
fn cross_validated_precision_is_high_on_separable_data() {
    let spec = harness_spec(1);
    // Deterministic boundary at 6 ms: steep but noiseless.
    let ds = synthetic_dataset(&spec, 3_000, 34, |x| if x[0] > 6.0 { 40.0 } else { -40.0 });
    let features = FeatureSet {
        tasks: spec.range_tasks(),
    };
    let model = fit_rsm_logit(&spec, &ds, &features).unwrap();
    let precision = kfold_precision(&spec, &ds, &model, 5, 77).unwrap();
    assert!(
        precision >= 0.98,
        "separable data should cross-validate cleanly, got {precision}"
    );
}

/// A small simulated subject whose random WCET draws straddle the overload
/// boundary, so searches harvest both labels.
fn searched_subject() -> (SystemSpec, safewcet::search::SearchOutput) {
    let cfg = GenConfig {
        tasks: 5,
        utilization: 0.9,
        period_min_ms: 10.0,
        period_max_ms: 50.0,
        granularity_ms: 10.0,
        max_offset_ms: 0.0,
        aperiodic_ratio: 0.4,
        wcet_ranges: 2,
        wcet_factor: Some(0.9),
        constraint: (0, 5),
        weakly_hard: 5,
        sim_time_ms: 200.0,
        seed: 3,
        ..GenConfig::default()
    };
    let spec = generate_system(&cfg).unwrap();
    let params = SearchParams {
        np: 4,
        ns: 5,
        iterations: 6,
        seed: 11,
        ..SearchParams::default()
    };
    let out = nsga2_search(&spec, &params);
    (spec, out)
}

#[test]
fn refinement_bookkeeping_and_final_guarantees() {
    let (spec, out) = searched_subject();
    let n_unsafe = out
        .dataset
        .rows
        .iter()
        .filter(|r| r.label == Label::Unsafe)
        .count();
    assert!(
        n_unsafe > 0 && n_unsafe < out.dataset.rows.len(),
        "subject must yield mixed labels, got {n_unsafe}/{} unsafe",
        out.dataset.rows.len()
    );

    let features = FeatureSet {
        tasks: spec.range_tasks(),
    };
    let model = fit_rsm_logit(&spec, &out.dataset, &features).unwrap();
    let (p_u, _) = threshold_no_false_negative(&spec, &out.dataset, &model).unwrap();
    let (reduced, pruned) = prune_by_intercepts(&spec, &out.dataset, &model, p_u).unwrap();

    // Zero updates: the border is just the fit on the pruned data.
    let cfg0 = RefineConfig {
        max_updates: 0,
        seed: 5,
        ..RefineConfig::default()
    };
    let (border0, data0) = refine(
        &spec,
        &out.archive,
        pruned.clone(),
        &features,
        reduced.clone(),
        &cfg0,
    )
    .unwrap();
    assert_eq!(data0.rows.len(), pruned.rows.len(), "no samples added");
    let direct = fit_rsm_logit(&spec, &pruned, &features).unwrap();
    assert_eq!(border0.model.terms, direct.terms);
    assert_eq!(border0.model.coefficients, direct.coefficients);
    assert!(border0.verify_training_invariants(&spec, &data0).unwrap());

    // Forced updates: rows grow by samples x labeling-cases per update.
    let cfg2 = RefineConfig {
        max_updates: 2,
        samples: 10,
        cases_per_point: 3,
        target_precision: 1.1,
        seed: 5,
        ..RefineConfig::default()
    };
    let (border2, data2) = refine(
        &spec,
        &out.archive,
        pruned.clone(),
        &features,
        reduced.clone(),
        &cfg2,
    )
    .unwrap();
    let per_update = 10 * out.archive.len().min(3);
    assert_eq!(data2.rows.len(), pruned.rows.len() + 2 * per_update);
    assert!(border2.verify_training_invariants(&spec, &data2).unwrap());

    // Both halves of the training guarantee, from the final model.
    let (scores, flags) =
        safewcet::learn::predictions(&spec, &data2, &border2.model).unwrap();
    for (&p, &unsafe_flag) in scores.iter().zip(&flags) {
        if unsafe_flag {
            assert!(p >= border2.p_s);
        } else {
            assert!(p < border2.p_u);
        }
    }
    assert!(border2.p_s <= border2.p_u);
}

#[test]
fn best_size_point_matches_a_dense_grid_sweep() {
    // Curved border inside [1, 10]^2 with the safe region near the origin.
    let model = RsmModel {
        tasks: vec![TaskId(0), TaskId(1)],
        terms: vec![
            Term::Intercept,
            Term::Linear(0),
            Term::Linear(1),
            Term::Quadratic(0),
            Term::Interaction(0, 1),
        ],
        coefficients: vec![-12.0, 1.0, 0.9, 0.04, 0.02],
        ridge_fallback: false,
        aic: 0.0,
        aic_trace: Vec::new(),
    };
    let p_s = 0.5;
    let reduced = vec![(1.0, 10.0), (1.0, 10.0)];
    let (point, unconstrained) = best_size_point(&model, p_s, &reduced, 4);
    assert!(!unconstrained);
    assert!((model.predict(&point) - p_s).abs() <= 1e-6);

    // Dense sweep: for each x, solve the border in y where it crosses.
    let target = (p_s / (1.0 - p_s)).ln();
    let mut grid_best = 0.0f64;
    let steps = 4_000;
    for i in 0..=steps {
        let x = 1.0 + 9.0 * i as f64 / steps as f64;
        let eta = |y: f64| model.predict_logit(&[x, y]);
        if (eta(1.0) - target).signum() == (eta(10.0) - target).signum() {
            continue;
        }
        let (mut lo, mut hi) = (1.0f64, 10.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if ((eta(mid) - target) < 0.0) == ((eta(lo) - target) < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let y = 0.5 * (lo + hi);
        grid_best = grid_best.max((x - 1.0) * (y - 1.0));
    }
    let volume = (point[0] - 1.0) * (point[1] - 1.0);
    assert!(
        volume >= 0.99 * grid_best,
        "ascent volume {volume} vs grid {grid_best}"
    );
}
