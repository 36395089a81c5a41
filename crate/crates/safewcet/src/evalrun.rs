//! Empirical safety measurement: run many randomized simulations with WCETs
//! drawn uniformly inside a candidate hyperbox and count constraint
//! violations. Reads the box from either a learned border file or a baseline
//! best-box file (both carry a `box_ms` table).

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{SystemSpec, TaskId};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::sim::{simulate, SimError, TestCase, Verdict, WcetAssignment};
use crate::time::TimeValue;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("box references unknown task `{0}`")]
    UnknownTask(String),
    #[error("box for task `{task}` is invalid: {reason}")]
    BadRange { task: String, reason: String },
    #[error("file has no usable `box_ms` table")]
    MissingBox,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Closed per-task WCET ranges in units; tasks absent from the list keep
/// their full declared range when sampling.
pub type WcetBox = Vec<(TaskId, TimeValue, TimeValue)>;

/// Extracts the hyperbox from a border or best-box JSON file.
pub fn read_box(spec: &SystemSpec, path: impl AsRef<Path>) -> Result<WcetBox, EvalError> {
    #[derive(Deserialize)]
    struct BoxCarrier {
        box_ms: BTreeMap<String, (f64, f64)>,
    }
    let carrier: BoxCarrier =
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|_| EvalError::MissingBox)?;
    box_from_ms(spec, &carrier.box_ms)
}

pub fn box_from_ms(
    spec: &SystemSpec,
    box_ms: &BTreeMap<String, (f64, f64)>,
) -> Result<WcetBox, EvalError> {
    let mut out = Vec::with_capacity(box_ms.len());
    for (name, &(lo_ms, hi_ms)) in box_ms {
        let task_id = spec
            .task_by_name(name)
            .ok_or_else(|| EvalError::UnknownTask(name.clone()))?;
        let task = spec.task(task_id);
        let lo = spec.scale.quantize_ms(lo_ms);
        let hi = spec.scale.quantize_ms(hi_ms);
        if lo > hi {
            return Err(EvalError::BadRange {
                task: name.clone(),
                reason: "inverted range".into(),
            });
        }
        if lo < task.wcet_min || hi > task.wcet_max {
            return Err(EvalError::BadRange {
                task: name.clone(),
                reason: format!(
                    "[{}, {}] exceeds the declared WCET range [{}, {}]",
                    spec.scale.format(lo),
                    spec.scale.format(hi),
                    spec.scale.format(task.wcet_min),
                    spec.scale.format(task.wcet_max)
                ),
            });
        }
        out.push((task_id, lo, hi));
    }
    Ok(out)
}

/// WCET draw for one run: every task uniform over its declared range, then
/// boxed tasks overridden by a uniform draw inside the box.
fn sample_in_box(spec: &SystemSpec, bx: &WcetBox, rng: &mut impl Rng) -> WcetAssignment {
    let mut w = WcetAssignment::sample(spec, rng);
    for &(t, lo, hi) in bx {
        let units = rng.random_range(lo.units()..=hi.units());
        w.0[t.0] = TimeValue::from_units(units);
    }
    w
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub runs: usize,
    pub violations: usize,
    pub probability: f64,
    /// Per-run violation flags, in run order.
    pub verdicts: Vec<bool>,
}

/// Violation probability of the box over `runs` independent simulations,
/// each with a fresh random test case. Deterministic in `seed` and invariant
/// to scheduling of the parallel runs.
pub fn empirical_probability(
    spec: &SystemSpec,
    bx: &WcetBox,
    runs: usize,
    seed: u64,
) -> Result<EvalOutcome, EvalError> {
    let verdicts: Vec<bool> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(seed, "eval-run", &[r as u64]));
            let tc = TestCase::sample(spec, &mut rng);
            let w = sample_in_box(spec, bx, &mut rng);
            let scenario = simulate(spec, &tc, &w)?;
            let verdict = crate::sim::check_schedulability(spec, &scenario, &spec.target_tasks)?;
            Ok(matches!(verdict, Verdict::Violated { .. }))
        })
        .collect::<Result<_, SimError>>()?;
    let violations = verdicts.iter().filter(|&&v| v).count();
    Ok(EvalOutcome {
        runs,
        violations,
        probability: if runs == 0 {
            0.0
        } else {
            violations as f64 / runs as f64
        },
        verdicts,
    })
}

/// Box volume in ms^d over the range tasks: each factor is the box upper
/// corner minus the task's WCET minimum; range tasks outside the box
/// contribute their full width.
pub fn hyperbox_volume(spec: &SystemSpec, bx: &WcetBox) -> f64 {
    spec.range_tasks()
        .iter()
        .map(|&t| {
            let task = spec.task(t);
            let hi = bx
                .iter()
                .find(|&&(b, _, _)| b == t)
                .map(|&(_, _, hi)| hi)
                .unwrap_or(task.wcet_max);
            spec.scale.delta_ms_f64(hi.units() - task.wcet_min.units())
        })
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::TimeScale;

    fn idle_spec() -> SystemSpec {
        let json = r#"{
            "scheduler": {"resolution": "0.1"},
            "cores": 1,
            "context_switch": {"startup": ["0", "0"], "exit": ["0", "0"], "ipi": ["0", "0"]},
            "partitions": [{"id": "p1", "budget_percent": 100.0}],
            "tasks": [
                {"id": "a", "kind": "periodic", "offset": "0", "period": "10",
                 "wcet": ["0.1", "2"], "deadline": "10", "priority": 1,
                 "constraint": [0, 5], "partition": "p1"}
            ],
            "target_tasks": ["a"],
            "sim_horizon": "50"
        }"#;
        crate::model::parse_system(json).unwrap()
    }

    #[test]
    fn underloaded_box_never_violates() {
        let spec = idle_spec();
        let bx = read_box_from_map(&spec, &[("a", (0.1, 2.0))]);
        let out = empirical_probability(&spec, &bx, 50, 9).unwrap();
        assert_eq!(out.violations, 0);
        assert_eq!(out.probability, 0.0);
        assert_eq!(out.verdicts.len(), 50);
    }

    #[test]
    fn single_run_probability_is_zero_or_one() {
        let spec = idle_spec();
        let bx = read_box_from_map(&spec, &[("a", (0.1, 2.0))]);
        let out = empirical_probability(&spec, &bx, 1, 3).unwrap();
        assert!(out.probability == 0.0 || out.probability == 1.0);
    }

    #[test]
    fn runs_are_seed_deterministic() {
        let spec = idle_spec();
        let bx = read_box_from_map(&spec, &[("a", (0.1, 2.0))]);
        let a = empirical_probability(&spec, &bx, 20, 7).unwrap();
        let b = empirical_probability(&spec, &bx, 20, 7).unwrap();
        assert_eq!(a.verdicts, b.verdicts);
    }

    #[test]
    fn volume_uses_range_anchors() {
        let spec = idle_spec();
        // Upper corner 1.1 ms, anchor 0.1 ms: width 1 ms.
        let bx = read_box_from_map(&spec, &[("a", (0.1, 1.1))]);
        assert!((hyperbox_volume(&spec, &bx) - 1.0).abs() < 1e-12);
        // Degenerate box: zero volume.
        let degenerate = read_box_from_map(&spec, &[("a", (0.1, 0.1))]);
        assert_eq!(hyperbox_volume(&spec, &degenerate), 0.0);
    }

    #[test]
    fn minimum_volume_at_tenth_ms_resolution() {
        // 25 independent factors of one 0.1 ms step each.
        let scale = TimeScale::from_resolution_ms("0.1").unwrap();
        let width = scale.delta_ms_f64(1);
        let volume: f64 = (0..25).map(|_| width).product();
        assert!((volume - 1e-25).abs() < 1e-37);
    }

    #[test]
    fn out_of_range_box_is_rejected() {
        let spec = idle_spec();
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), (0.1, 3.0));
        assert!(matches!(
            box_from_ms(&spec, &m),
            Err(EvalError::BadRange { .. })
        ));
        let mut unknown = BTreeMap::new();
        unknown.insert("zz".to_string(), (0.1, 1.0));
        assert!(matches!(
            box_from_ms(&spec, &unknown),
            Err(EvalError::UnknownTask(_))
        ));
    }

    fn read_box_from_map(spec: &SystemSpec, entries: &[(&str, (f64, f64))]) -> WcetBox {
        let m: BTreeMap<String, (f64, f64)> = entries
            .iter()
            .map(|&(n, r)| (n.to_string(), r))
            .collect();
        box_from_ms(spec, &m).unwrap()
    }
}
