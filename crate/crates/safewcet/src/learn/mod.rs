//! Learns the probabilistic safe-WCET border from a labeled dataset:
//! random-forest feature reduction, second-order logistic regression with
//! stepwise AIC, imbalance pruning, distance-guided refinement, and
//! extraction of the best-size point on the safe border.

pub mod forest;
pub mod logit;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{SystemSpec, TaskId};
use crate::search::{EvaluatedCase, LabeledDataset};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::sim::{label as sim_label, simulate, Label, WcetAssignment};
use crate::time::TimeValue;

use self::forest::{train_forest, ForestConfig};
use self::logit::{backward_aic, build_design, fit_logistic, full_terms, logit, sigmoid};

pub use self::logit::Term;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("degenerate labels: the dataset needs both safe and unsafe instances")]
    DegenerateLabels,
    #[error("empty feature set")]
    EmptyFeatures,
    #[error("unknown feature task `{0}`")]
    UnknownFeature(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("simulation failed: {0}")]
    Sim(#[from] crate::sim::SimError),
}

/// Ordered list of the tasks whose WCETs act as model variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    pub tasks: Vec<TaskId>,
}

impl FeatureSet {
    /// Column index of every feature within the dataset's range-task order.
    fn positions(&self, dataset: &LabeledDataset) -> Result<Vec<usize>, LearnError> {
        self.tasks
            .iter()
            .map(|t| {
                dataset
                    .range_tasks
                    .iter()
                    .position(|r| r == t)
                    .ok_or_else(|| LearnError::UnknownFeature(format!("task index {}", t.0)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReduceConfig {
    pub trees: usize,
    /// Tree depth; defaults to ceil(sqrt(feature count)).
    pub depth: Option<usize>,
    /// Importance cutoff; defaults to the mean importance.
    pub threshold: Option<f64>,
    pub seed: u64,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        ReduceConfig {
            trees: 100,
            depth: None,
            threshold: None,
            seed: 0,
        }
    }
}

/// Ranks WCET columns by random-forest Gini importance and keeps those above
/// the cutoff; at least the top-ranked feature is always kept.
pub fn reduce_features(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    cfg: &ReduceConfig,
) -> Result<FeatureSet, LearnError> {
    let (rows, labels) = dataset.as_features(spec);
    ensure_both_labels(&labels)?;
    if rows[0].is_empty() {
        return Err(LearnError::EmptyFeatures);
    }
    let dim = rows[0].len();
    let forest_cfg = ForestConfig {
        trees: cfg.trees,
        max_depth: cfg
            .depth
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize),
        seed: cfg.seed,
    };
    let forest = train_forest(&rows, &labels, forest_cfg);
    let imp = &forest.importances;
    let cutoff = cfg
        .threshold
        .unwrap_or_else(|| imp.iter().sum::<f64>() / dim as f64);
    let mut keep: Vec<usize> = (0..dim).filter(|&j| imp[j] > cutoff).collect();
    if keep.is_empty() {
        let top = imp.iter().cloned().fold(f64::MIN, f64::max);
        keep = (0..dim).filter(|&j| imp[j] == top).collect();
    }
    Ok(FeatureSet {
        tasks: keep.into_iter().map(|j| dataset.range_tasks[j]).collect(),
    })
}

fn ensure_both_labels(unsafe_flags: &[bool]) -> Result<(), LearnError> {
    let unsafe_n = unsafe_flags.iter().filter(|&&u| u).count();
    if unsafe_n == 0 || unsafe_n == unsafe_flags.len() {
        return Err(LearnError::DegenerateLabels);
    }
    Ok(())
}

/// Second-order logistic response surface over a feature set, with
/// coefficients in raw milliseconds.
#[derive(Debug, Clone)]
pub struct RsmModel {
    pub tasks: Vec<TaskId>,
    pub terms: Vec<Term>,
    pub coefficients: Vec<f64>,
    pub ridge_fallback: bool,
    pub aic: f64,
    /// AIC after the initial full fit, then after each accepted removal.
    pub aic_trace: Vec<f64>,
}

impl RsmModel {
    /// The polynomial itself; `x` follows `self.tasks` order, in ms.
    pub fn predict_logit(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| c * t.eval(x))
            .sum()
    }

    /// Violation probability, strictly inside (0, 1).
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.predict_logit(x))
    }

    pub fn gradient_logit(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|axis| {
                self.terms
                    .iter()
                    .zip(&self.coefficients)
                    .map(|(t, c)| c * t.derivative(x, axis))
                    .sum()
            })
            .collect()
    }
}

/// Projects dataset rows onto the feature set, in milliseconds.
fn project_rows(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    v: &FeatureSet,
) -> Result<(Vec<Vec<f64>>, Vec<bool>), LearnError> {
    let positions = v.positions(dataset)?;
    let rows = dataset
        .rows
        .iter()
        .map(|r| {
            positions
                .iter()
                .map(|&p| spec.scale.to_ms_f64(r.wcet[p]))
                .collect()
        })
        .collect();
    let labels = dataset
        .rows
        .iter()
        .map(|r| r.label == Label::Unsafe)
        .collect();
    Ok((rows, labels))
}

fn targets(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&u| if u { 1.0 } else { 0.0 }).collect()
}

/// Fits the full second-order model over `v` and applies backward stepwise
/// AIC elimination (the intercept always stays).
pub fn fit_rsm_logit(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    v: &FeatureSet,
) -> Result<RsmModel, LearnError> {
    if v.tasks.is_empty() {
        return Err(LearnError::EmptyFeatures);
    }
    let (rows, labels) = project_rows(spec, dataset, v)?;
    ensure_both_labels(&labels)?;
    let y = targets(&labels);
    let (terms, fit, aic_trace) = backward_aic(&rows, &y, full_terms(v.tasks.len()))?;
    Ok(RsmModel {
        tasks: v.tasks.clone(),
        terms,
        coefficients: fit.coefficients,
        ridge_fallback: fit.ridge_fallback,
        aic: fit.aic,
        aic_trace,
    })
}

/// Per-row violation probabilities under a fitted model.
pub fn predictions(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    model: &RsmModel,
) -> Result<(Vec<f64>, Vec<bool>), LearnError> {
    let v = FeatureSet {
        tasks: model.tasks.clone(),
    };
    let (rows, labels) = project_rows(spec, dataset, &v)?;
    Ok((rows.iter().map(|r| model.predict(r)).collect(), labels))
}

fn next_up(x: f64) -> f64 {
    x.next_up()
}

const PROBABILITY_CAP: f64 = 0.9999;

/// Smallest probability threshold that puts every safe training instance
/// below it. Returns `(p_u, degenerate)`; degenerate means the threshold had
/// to be capped or excludes every unsafe instance.
pub fn pu_from_scores(scores: &[f64], unsafe_flags: &[bool]) -> (f64, bool) {
    let max_safe = scores
        .iter()
        .zip(unsafe_flags)
        .filter(|&(_, &u)| !u)
        .map(|(&p, _)| p)
        .fold(0.0_f64, f64::max);
    let candidate = next_up(max_safe);
    let covers_unsafe = scores
        .iter()
        .zip(unsafe_flags)
        .any(|(&p, &u)| u && p >= candidate);
    if !covers_unsafe || candidate > PROBABILITY_CAP {
        (PROBABILITY_CAP, true)
    } else {
        (candidate, false)
    }
}

/// Largest threshold whose open sublevel set {p < p_s} holds no unsafe
/// training instance: the minimum probability among unsafe instances.
pub fn ps_from_scores(scores: &[f64], unsafe_flags: &[bool]) -> f64 {
    scores
        .iter()
        .zip(unsafe_flags)
        .filter(|&(_, &u)| u)
        .map(|(&p, _)| p)
        .fold(PROBABILITY_CAP, f64::min)
}

pub fn threshold_no_false_negative(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    model: &RsmModel,
) -> Result<(f64, bool), LearnError> {
    let (scores, labels) = predictions(spec, dataset, model)?;
    Ok(pu_from_scores(&scores, &labels))
}

pub fn threshold_no_false_positive(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    model: &RsmModel,
) -> Result<f64, LearnError> {
    let (scores, labels) = predictions(spec, dataset, model)?;
    Ok(ps_from_scores(&scores, &labels))
}

/// Root of `f(t) = target` on [lo, hi] by bisection; the caller guarantees a
/// sign change. Converges to ~1e-12 of the interval width.
fn bisect(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, target: f64) -> f64 {
    let mut a = lo;
    let mut b = hi;
    let low_sign = (f(a) - target) < 0.0;
    for _ in 0..200 {
        if (b - a) <= 1e-12 * (hi - lo).max(1.0) {
            break;
        }
        let mid = 0.5 * (a + b);
        if ((f(mid) - target) < 0.0) == low_sign {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// For each feature, the reduced upper bound C' where the border crosses the
/// feature's axis (all other features anchored at their minimums); the full
/// C^max when there is no crossing. Also drops every dataset row that
/// exceeds any reduced bound.
pub fn prune_by_intercepts(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    model: &RsmModel,
    p_u: f64,
) -> Result<(Vec<(f64, f64)>, LabeledDataset), LearnError> {
    let v = FeatureSet {
        tasks: model.tasks.clone(),
    };
    let positions = v.positions(dataset)?;
    let anchor: Vec<f64> = model
        .tasks
        .iter()
        .map(|&t| spec.scale.to_ms_f64(spec.task(t).wcet_min))
        .collect();
    let mut reduced = Vec::with_capacity(model.tasks.len());
    for (fi, &t) in model.tasks.iter().enumerate() {
        let lo = spec.scale.to_ms_f64(spec.task(t).wcet_min);
        let hi = spec.scale.to_ms_f64(spec.task(t).wcet_max);
        let mut x = anchor.clone();
        let mut g = |val: f64| {
            x[fi] = val;
            model.predict(&x)
        };
        let crosses = (g(lo) - p_u).signum() != (g(hi) - p_u).signum();
        let upper = if crosses { bisect(g, lo, hi, p_u) } else { hi };
        reduced.push((lo, upper));
    }

    let rows = dataset
        .rows
        .iter()
        .filter(|r| {
            positions.iter().zip(&reduced).all(|(&p, &(_, hi))| {
                spec.scale.to_ms_f64(r.wcet[p]) <= hi
            })
        })
        .cloned()
        .collect();
    Ok((
        reduced,
        LabeledDataset {
            range_tasks: dataset.range_tasks.clone(),
            rows,
        },
    ))
}

/// Importance weight of a candidate: 1 on the border, decaying
/// exponentially with logit distance from it.
pub fn border_weight(model: &RsmModel, p_s: f64, x: &[f64]) -> f64 {
    (-(model.predict_logit(x) - logit(p_s)).abs()).exp()
}

/// Draws `count` points concentrated near the p_s border: a 10x uniform
/// candidate pool, then weighted sampling without replacement
/// (Efraimidis-Spirakis keys).
pub fn distance_sample(
    model: &RsmModel,
    p_s: f64,
    reduced: &[(f64, f64)],
    count: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let pool: Vec<Vec<f64>> = (0..10 * count)
        .map(|_| {
            reduced
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..=hi))
                .collect()
        })
        .collect();
    let mut keyed: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let w = border_weight(model, p_s, x);
            let u: f64 = rng.random();
            let key = if w > 0.0 { u.powf(1.0 / w) } else { 0.0 };
            (key, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.truncate(count);
    keyed.sort_by_key(|&(_, i)| i);
    keyed.into_iter().map(|(_, i)| pool[i].clone()).collect()
}

/// Stratified k-fold precision of the safe region {p < p_s}: among held-out
/// rows predicted safe (threshold taken from the training folds), the
/// fraction that are truly safe. 0 when nothing is predicted safe.
pub fn kfold_precision(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    model: &RsmModel,
    k: usize,
    seed: u64,
) -> Result<f64, LearnError> {
    let v = FeatureSet {
        tasks: model.tasks.clone(),
    };
    let (rows, labels) = project_rows(spec, dataset, &v)?;
    let mut folds = vec![0usize; rows.len()];
    let mut rng = rng_from_seed(seed);
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == class).collect();
        // Fisher-Yates, then deal round-robin so folds stay stratified.
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        for (pos, &i) in idx.iter().enumerate() {
            folds[i] = pos % k;
        }
    }

    let mut predicted_safe = 0usize;
    let mut truly_safe = 0usize;
    for fold in 0..k {
        let train: Vec<usize> = (0..rows.len()).filter(|&i| folds[i] != fold).collect();
        let test: Vec<usize> = (0..rows.len()).filter(|&i| folds[i] == fold).collect();
        let unsafe_train = train.iter().filter(|&&i| labels[i]).count();
        if test.is_empty() || unsafe_train == 0 || unsafe_train == train.len() {
            continue;
        }
        let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| rows[i].clone()).collect();
        let train_y: Vec<f64> = train.iter().map(|&i| f64::from(labels[i] as u8)).collect();
        // Same term set as the outer model; only coefficients are refitted.
        let Ok(fit) = fit_logistic(&build_design(&train_rows, &model.terms), &train_y) else {
            continue;
        };
        let fold_model = RsmModel {
            tasks: model.tasks.clone(),
            terms: model.terms.clone(),
            coefficients: fit.coefficients,
            ridge_fallback: fit.ridge_fallback,
            aic: fit.aic,
            aic_trace: vec![fit.aic],
        };
        let p_s_train = train
            .iter()
            .filter(|&&i| labels[i])
            .map(|&i| fold_model.predict(&rows[i]))
            .fold(PROBABILITY_CAP, f64::min);
        for &i in &test {
            if fold_model.predict(&rows[i]) < p_s_train {
                predicted_safe += 1;
                if !labels[i] {
                    truly_safe += 1;
                }
            }
        }
    }
    if predicted_safe == 0 {
        return Ok(0.0);
    }
    Ok(truly_safe as f64 / predicted_safe as f64)
}

const BORDER_TOLERANCE: f64 = 1e-6;

/// Multi-start projected log-volume ascent on the border {p = p_s} inside
/// the reduced box. Returns the coordinates (ms, feature order) and whether
/// the border was absent inside the box.
pub fn best_size_point(
    model: &RsmModel,
    p_s: f64,
    reduced: &[(f64, f64)],
    seed: u64,
) -> (Vec<f64>, bool) {
    let dim = reduced.len();
    let los: Vec<f64> = reduced.iter().map(|r| r.0).collect();
    let his: Vec<f64> = reduced.iter().map(|r| r.1).collect();
    let corner = his.clone();
    if model.predict(&corner) < p_s {
        // Whole box sits on the safe side; take it all.
        return (corner, true);
    }
    let target = logit(p_s);
    let widths: Vec<f64> = reduced.iter().map(|r| (r.1 - r.0).max(0.0)).collect();
    let min_width = widths.iter().cloned().fold(f64::INFINITY, f64::min);

    let log_volume = |x: &[f64]| -> f64 {
        x.iter()
            .zip(&los)
            .map(|(&xi, &lo)| (xi - lo).max(1e-300).ln())
            .sum()
    };

    // Bisection along one axis to land back on the border.
    let project_axis = |x: &[f64], axis: usize| -> Option<f64> {
        let mut probe = x.to_vec();
        let mut g = |t: f64| {
            probe[axis] = t;
            model.predict_logit(&probe)
        };
        let (lo, hi) = (los[axis], his[axis]);
        if ((g(lo) - target).signum()) == ((g(hi) - target).signum()) {
            return None;
        }
        Some(bisect(g, lo, hi, target))
    };
    let project = |x: &[f64]| -> Option<Vec<f64>> {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for axis in 0..dim {
            if let Some(t) = project_axis(x, axis) {
                let mut y = x.to_vec();
                y[axis] = t;
                let lv = log_volume(&y);
                if best.as_ref().is_none_or(|(b, _)| lv > *b) {
                    best = Some((lv, y));
                }
            }
        }
        best.map(|(_, y)| y)
    };

    let ascend = |start: Vec<f64>| -> Vec<f64> {
        let mut x = start;
        let mut stale = 0;
        for _ in 0..300 {
            let lv = log_volume(&x);
            let grad = model.gradient_logit(&x);
            let gg: f64 = grad.iter().map(|g| g * g).sum();
            if gg < 1e-30 {
                break;
            }
            let v: Vec<f64> = x
                .iter()
                .zip(&los)
                .zip(&widths)
                .map(|((&xi, &lo), &w)| 1.0 / (xi - lo).max(1e-9 * w.max(1e-9)))
                .collect();
            let vg: f64 = v.iter().zip(&grad).map(|(a, b)| a * b).sum();
            let d: Vec<f64> = v
                .iter()
                .zip(&grad)
                .map(|(vi, gi)| vi - (vg / gg) * gi)
                .collect();
            let dn = d.iter().map(|a| a * a).sum::<f64>().sqrt();
            if dn < 1e-14 {
                break;
            }
            // Project along the steepest constraint coordinate after moving.
            let steep = (0..dim)
                .max_by(|&a, &b| grad[a].abs().total_cmp(&grad[b].abs()))
                .unwrap();
            let mut step = 0.1 * min_width;
            let mut improved = false;
            while step > 1e-9 * min_width.max(1e-9) {
                let trial: Vec<f64> = x
                    .iter()
                    .zip(&d)
                    .enumerate()
                    .map(|(i, (&xi, &di))| {
                        (xi + step * di / dn).clamp(los[i] + 1e-12 * widths[i], his[i])
                    })
                    .collect();
                let back = project_axis(&trial, steep).map(|t| {
                    let mut y = trial.clone();
                    y[steep] = t;
                    y
                });
                if let Some(y) = back {
                    let lv_new = log_volume(&y);
                    if lv_new > lv + 1e-15 {
                        let gain = lv_new - lv;
                        x = y;
                        improved = true;
                        stale = if gain < 1e-6 * lv.abs().max(1.0) {
                            stale + 1
                        } else {
                            0
                        };
                        break;
                    }
                }
                step *= 0.5;
            }
            if !improved || stale >= 2 {
                break;
            }
        }
        x
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| {
        if (model.predict(&x) - p_s).abs() <= BORDER_TOLERANCE {
            let lv = log_volume(&x);
            if best.as_ref().is_none_or(|(b, _)| lv > *b) {
                best = Some((lv, x));
            }
        }
    };

    // Deterministic diagonal start plus 20 random interior starts.
    let diag = |t: f64| -> Vec<f64> {
        los.iter()
            .zip(&his)
            .map(|(&lo, &hi)| lo + t * (hi - lo))
            .collect()
    };
    let eta_at = |t: f64| model.predict_logit(&diag(t));
    if ((eta_at(0.0) - target).signum()) != ((eta_at(1.0) - target).signum()) {
        let t = bisect(eta_at, 0.0, 1.0, target);
        let x = diag(t);
        consider(ascend(x.clone()));
        consider(x);
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..20 {
        let x: Vec<f64> = (0..dim)
            .map(|i| rng.random_range(los[i] + 1e-6 * widths[i].max(1e-9)..=his[i]))
            .collect();
        if let Some(p) = project(&x) {
            consider(ascend(p.clone()));
            consider(p);
        }
    }

    match best {
        Some((_, x)) => (x, false),
        // No border crossing found anywhere: nothing safe to claim.
        None => (los, false),
    }
}

/// Final learner output: the tuned model plus both thresholds, the reduced
/// ranges, and the extracted best-size point.
#[derive(Debug, Clone)]
pub struct SafeBorderModel {
    pub model: RsmModel,
    pub p_u: f64,
    pub p_u_degenerate: bool,
    pub p_s: f64,
    /// Per feature (model task order), in ms.
    pub reduced: Vec<(f64, f64)>,
    pub best_point_ms: Vec<f64>,
    pub unconstrained: bool,
    pub precision: f64,
    pub safe_count: usize,
    pub unsafe_count: usize,
}

impl SafeBorderModel {
    /// Safe hyperbox over every range task: the solved coordinate for model
    /// features, the full range for the rest.
    pub fn best_box(&self, spec: &SystemSpec) -> Vec<(TaskId, TimeValue, TimeValue)> {
        spec.range_tasks()
            .iter()
            .map(|&t| {
                let task = spec.task(t);
                let hi = match self.model.tasks.iter().position(|&m| m == t) {
                    Some(fi) => {
                        let units = spec.scale.quantize_ms(self.best_point_ms[fi]);
                        TimeValue::from_units(
                            units.units().clamp(task.wcet_min.units(), task.wcet_max.units()),
                        )
                    }
                    None => task.wcet_max,
                };
                (t, task.wcet_min, hi)
            })
            .collect()
    }

    /// Volume of the best box over all range tasks, in ms^d.
    pub fn volume_ms(&self, spec: &SystemSpec) -> f64 {
        self.best_box(spec)
            .iter()
            .map(|&(_, lo, hi)| spec.scale.delta_ms_f64(hi.units() - lo.units()))
            .product()
    }

    /// Training-data guarantee: no unsafe instance may sit strictly below
    /// p_s under the final model.
    pub fn verify_training_invariants(
        &self,
        spec: &SystemSpec,
        dataset: &LabeledDataset,
    ) -> Result<bool, LearnError> {
        let (scores, labels) = predictions(spec, dataset, &self.model)?;
        Ok(scores
            .iter()
            .zip(&labels)
            .all(|(&p, &u)| !u || p >= self.p_s))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RefineConfig {
    pub max_updates: usize,
    pub samples: usize,
    pub kfold: usize,
    pub target_precision: f64,
    /// Archive test cases used to label each refinement sample.
    pub cases_per_point: usize,
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_updates: 100,
            samples: 100,
            kfold: 5,
            target_precision: 0.99,
            cases_per_point: 10,
            seed: 0,
        }
    }
}

/// Iterative border refinement: fit, sample near the border, label the
/// samples by simulation against the worst archive cases, merge, refit.
/// Stops on the update budget or on reaching the precision target.
pub fn refine(
    spec: &SystemSpec,
    archive: &[EvaluatedCase],
    pruned: LabeledDataset,
    features: &FeatureSet,
    reduced: Vec<(f64, f64)>,
    cfg: &RefineConfig,
) -> Result<(SafeBorderModel, LabeledDataset), LearnError> {
    let mut data = pruned;
    let mut model = fit_rsm_logit(spec, &data, features)?;
    let mut p_s = threshold_no_false_positive(spec, &data, &model)?;
    let mut precision = kfold_precision(spec, &data, &model, cfg.kfold, derive_seed(cfg.seed, "cv", &[0]))?;

    // The labeling test cases: highest fd first, ties by id.
    let mut ranked: Vec<&EvaluatedCase> = archive.iter().collect();
    ranked.sort_by(|a, b| {
        b.fitness
            .fd
            .total_cmp(&a.fitness.fd)
            .then(a.case_id.cmp(&b.case_id))
    });
    ranked.truncate(cfg.cases_per_point.max(1));

    let positions = features.positions(&data)?;
    for update in 0..cfg.max_updates {
        if precision >= cfg.target_precision {
            break;
        }
        let mut rng = rng_from_seed(derive_seed(cfg.seed, "sample", &[update as u64]));
        let points = distance_sample(&model, p_s, &reduced, cfg.samples, &mut rng);

        let jobs: Vec<(usize, usize)> = (0..points.len())
            .flat_map(|pi| (0..ranked.len()).map(move |ci| (pi, ci)))
            .collect();
        let labeled: Vec<(WcetAssignment, Label, u64, u64)> = jobs
            .par_iter()
            .map(|&(pi, ci)| {
                let fill_seed =
                    derive_seed(cfg.seed, "fill", &[update as u64, pi as u64, ci as u64]);
                let mut fill_rng = rng_from_seed(fill_seed);
                let mut w = WcetAssignment::sample(spec, &mut fill_rng);
                for (fi, &col) in positions.iter().enumerate() {
                    let t = data.range_tasks[col];
                    let task = spec.task(t);
                    let units = spec.scale.quantize_ms(points[pi][fi]).units();
                    w.0[t.0] = TimeValue::from_units(
                        units.clamp(task.wcet_min.units(), task.wcet_max.units()),
                    );
                }
                let scenario =
                    simulate(spec, &ranked[ci].case, &w).expect("archive case is valid");
                let verdict = sim_label(spec, &scenario, &spec.target_tasks)
                    .expect("targets validated with the spec");
                (w, verdict, ranked[ci].case_id, fill_seed)
            })
            .collect();
        for (w, verdict, case_id, fill_seed) in labeled {
            data.push_assignment(&w, verdict, case_id, fill_seed);
        }

        model = fit_rsm_logit(spec, &data, features)?;
        p_s = threshold_no_false_positive(spec, &data, &model)?;
        precision = kfold_precision(
            spec,
            &data,
            &model,
            cfg.kfold,
            derive_seed(cfg.seed, "cv", &[update as u64 + 1]),
        )?;
    }

    let (best_point_ms, unconstrained) =
        best_size_point(&model, p_s, &reduced, derive_seed(cfg.seed, "best", &[]));
    // The threshold pair must describe the final model on the final data,
    // or the no-safe-instance-above-p_u guarantee breaks after refits.
    let (scores, flags) = predictions(spec, &data, &model)?;
    let (p_u_final, p_u_degenerate) = pu_from_scores(&scores, &flags);
    let unsafe_count = data.rows.iter().filter(|r| r.label == Label::Unsafe).count();
    let border = SafeBorderModel {
        model,
        // Keep the threshold pair ordered even when refinement pushed p_s up.
        p_u: p_u_final.max(p_s),
        p_u_degenerate,
        p_s,
        reduced,
        best_point_ms,
        unconstrained,
        precision,
        safe_count: data.rows.len() - unsafe_count,
        unsafe_count,
    };
    debug_assert!(border.verify_training_invariants(spec, &data).unwrap_or(false));
    Ok((border, data))
}

// ---------------------------------------------------------------------------
// Serialized form.

/// On-disk border description; also carries the evaluation hyperbox over all
/// range tasks so downstream tools need no model evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BorderFile {
    pub units_per_ms: i64,
    pub feature_tasks: Vec<String>,
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub ridge_fallback: bool,
    pub p_u: f64,
    pub p_u_degenerate: bool,
    pub p_s: f64,
    pub reduced_ranges_ms: Vec<(String, f64, f64)>,
    pub best_point_ms: Vec<(String, f64)>,
    pub unconstrained: bool,
    pub precision: f64,
    pub safe_count: usize,
    pub unsafe_count: usize,
    pub box_ms: BTreeMap<String, (f64, f64)>,
}

impl BorderFile {
    pub fn from_border(spec: &SystemSpec, border: &SafeBorderModel) -> BorderFile {
        let name = |t: &TaskId| spec.task(*t).name.clone();
        BorderFile {
            units_per_ms: spec.scale.units_per_ms(),
            feature_tasks: border.model.tasks.iter().map(|t| name(t)).collect(),
            terms: border.model.terms.iter().map(|t| t.to_string()).collect(),
            coefficients: border.model.coefficients.clone(),
            ridge_fallback: border.model.ridge_fallback,
            p_u: border.p_u,
            p_u_degenerate: border.p_u_degenerate,
            p_s: border.p_s,
            reduced_ranges_ms: border
                .model
                .tasks
                .iter()
                .zip(&border.reduced)
                .map(|(t, &(lo, hi))| (name(t), lo, hi))
                .collect(),
            best_point_ms: border
                .model
                .tasks
                .iter()
                .zip(&border.best_point_ms)
                .map(|(t, &p)| (name(t), p))
                .collect(),
            unconstrained: border.unconstrained,
            precision: border.precision,
            safe_count: border.safe_count,
            unsafe_count: border.unsafe_count,
            box_ms: border
                .best_box(spec)
                .iter()
                .map(|&(t, lo, hi)| {
                    (
                        name(&t),
                        (spec.scale.to_ms_f64(lo), spec.scale.to_ms_f64(hi)),
                    )
                })
                .collect(),
        }
    }

    pub fn model(&self, spec: &SystemSpec) -> Result<RsmModel, LearnError> {
        let tasks = self
            .feature_tasks
            .iter()
            .map(|n| {
                spec.task_by_name(n)
                    .ok_or_else(|| LearnError::UnknownFeature(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let terms = self
            .terms
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Term>, _>>()?;
        Ok(RsmModel {
            tasks,
            terms,
            coefficients: self.coefficients.clone(),
            ridge_fallback: self.ridge_fallback,
            aic: f64::NAN,
            aic_trace: Vec::new(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LearnError> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| LearnError::Numeric(format!("serialize border: {e}")))?;
        std::fs::write(path.as_ref(), text + "\n")
            .map_err(|e| LearnError::Numeric(format!("write border: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BorderFile, LearnError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| LearnError::Numeric(format!("read border: {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| LearnError::Numeric(format!("parse border: {e}")))
    }
}

/// Plot-ready border contour: p over a 2-D grid of two features, the rest
/// anchored at their range minimums.
pub fn report_grid(
    spec: &SystemSpec,
    border: &BorderFile,
    feature_a: &str,
    feature_b: &str,
    steps: usize,
) -> Result<Vec<(f64, f64, f64)>, LearnError> {
    let model = border.model(spec)?;
    let fa = border
        .feature_tasks
        .iter()
        .position(|n| n == feature_a)
        .ok_or_else(|| LearnError::UnknownFeature(feature_a.into()))?;
    let fb = border
        .feature_tasks
        .iter()
        .position(|n| n == feature_b)
        .ok_or_else(|| LearnError::UnknownFeature(feature_b.into()))?;
    if fa == fb {
        return Err(LearnError::UnknownFeature(
            "feature pair must name two distinct features".into(),
        ));
    }
    let mut anchor: Vec<f64> = border.reduced_ranges_ms.iter().map(|r| r.1).collect();
    let (alo, ahi) = (border.reduced_ranges_ms[fa].1, border.reduced_ranges_ms[fa].2);
    let (blo, bhi) = (border.reduced_ranges_ms[fb].1, border.reduced_ranges_ms[fb].2);
    let mut out = Vec::with_capacity(steps * steps);
    for i in 0..steps {
        let va = alo + (ahi - alo) * i as f64 / (steps - 1).max(1) as f64;
        for j in 0..steps {
            let vb = blo + (bhi - blo) * j as f64 / (steps - 1).max(1) as f64;
            anchor[fa] = va;
            anchor[fb] = vb;
            out.push((va, vb, model.predict(&anchor)));
        }
    }
    Ok(out)
}
