//! Random-search baseline: the comparison harness samples fresh test cases
//! every iteration with no evolutionary operators, labels them exactly like
//! the guided search, and extracts the largest safe hyperbox straight from
//! the labeled tuples.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{SpecError, SystemSpec};
use crate::search::{evaluate_case, LabeledDataset, LabeledRow};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::sim::{Label, TestCase, WcetAssignment};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("no safe hyperbox")]
    NoSafeHyperbox,
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub np: usize,
    pub ns: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            np: 10,
            ns: 20,
            iterations: 1500,
            seed: 0,
        }
    }
}

/// Pure random search: `iterations` generations of `np` fresh test cases,
/// each labeled over `ns` WCET draws. Dataset size is exactly
/// `np * ns * iterations`.
pub fn random_search(spec: &SystemSpec, params: &BaselineParams) -> LabeledDataset {
    let mut dataset = LabeledDataset::new(spec);
    let mut case_id: u64 = 0;
    for iter in 0..params.iterations {
        let cells: Vec<(u64, TestCase)> = (0..params.np)
            .map(|j| {
                let seed = derive_seed(params.seed, "bl-case", &[iter as u64, j as u64]);
                let tc = TestCase::sample(spec, &mut rng_from_seed(seed));
                let id = case_id + j as u64;
                (id, tc)
            })
            .collect();
        case_id += params.np as u64;
        let evaluated: Vec<(u64, Vec<(WcetAssignment, Label, u64)>)> = cells
            .par_iter()
            .enumerate()
            .map(|(j, (id, tc))| {
                let seed = derive_seed(params.seed, "bl-eval", &[iter as u64, j as u64]);
                let (_, rows) = evaluate_case(spec, tc, params.ns, seed);
                (*id, rows)
            })
            .collect();
        for (id, rows) in evaluated {
            for (w, lbl, wcet_seed) in rows {
                dataset.push_assignment(&w, lbl, id, wcet_seed);
            }
        }
    }
    dataset
}

fn volume_of(spec: &SystemSpec, mins: &[i64], coords: &[crate::time::TimeValue]) -> f64 {
    coords
        .iter()
        .zip(mins)
        .map(|(c, &lo)| spec.scale.delta_ms_f64(c.units() - lo))
        .product()
}

/// Largest safe hyperbox anchored at the range minimums: among safe tuples,
/// the one maximizing the product of widths such that no tuple lying inside
/// it (every coordinate at or below) is labeled unsafe.
pub fn max_safe_hyperbox(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
) -> Result<WcetAssignment, BaselineError> {
    let mins: Vec<i64> = dataset
        .range_tasks
        .iter()
        .map(|&t| spec.task(t).wcet_min.units())
        .collect();

    // The minimal antichain of unsafe tuples is enough for containment tests:
    // an unsafe tuple inside a candidate implies a minimal one inside too.
    let dominates = |a: &LabeledRow, b: &LabeledRow| {
        a.wcet.iter().zip(&b.wcet).all(|(x, y)| x <= y)
            && a.wcet.iter().zip(&b.wcet).any(|(x, y)| x < y)
    };
    let unsafe_rows: Vec<&LabeledRow> = dataset
        .rows
        .iter()
        .filter(|r| r.label == Label::Unsafe)
        .collect();
    let mut minimal: Vec<&LabeledRow> = Vec::new();
    'outer: for u in &unsafe_rows {
        if unsafe_rows.iter().any(|o| dominates(o, u)) {
            continue;
        }
        for m in &minimal {
            if m.wcet == u.wcet {
                continue 'outer;
            }
        }
        minimal.push(u);
    }

    // Scan safe tuples in descending volume; the first uncontaminated one is
    // optimal because every later candidate has no larger volume.
    let mut safe: Vec<(f64, usize)> = dataset
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.label == Label::Safe)
        .map(|(i, r)| (volume_of(spec, &mins, &r.wcet), i))
        .collect();
    safe.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));

    for (_, idx) in safe {
        let cand = &dataset.rows[idx];
        let clean = !minimal
            .iter()
            .any(|u| u.wcet.iter().zip(&cand.wcet).all(|(x, y)| x <= y));
        if clean {
            return Ok(assignment_from_row(spec, dataset, cand));
        }
    }
    Err(BaselineError::NoSafeHyperbox)
}

fn assignment_from_row(
    spec: &SystemSpec,
    dataset: &LabeledDataset,
    row: &LabeledRow,
) -> WcetAssignment {
    let mut w: Vec<crate::time::TimeValue> = spec.tasks.iter().map(|t| t.wcet_min).collect();
    for (t, c) in dataset.range_tasks.iter().zip(&row.wcet) {
        w[t.0] = *c;
    }
    WcetAssignment(w)
}

/// On-disk form of the winning hyperbox; `box_ms` maps each range task to
/// (range minimum, safe upper corner) in milliseconds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BestBoxFile {
    pub units_per_ms: i64,
    pub volume_ms: f64,
    pub box_ms: BTreeMap<String, (f64, f64)>,
    pub safe_point_ms: BTreeMap<String, f64>,
}

impl BestBoxFile {
    pub fn from_assignment(spec: &SystemSpec, w: &WcetAssignment) -> BestBoxFile {
        let mut box_ms = BTreeMap::new();
        let mut safe_point_ms = BTreeMap::new();
        let mut volume = 1.0;
        for &t in &spec.range_tasks() {
            let task = spec.task(t);
            let hi = w.0[t.0];
            let lo = task.wcet_min;
            volume *= spec.scale.delta_ms_f64(hi.units() - lo.units());
            box_ms.insert(
                task.name.clone(),
                (spec.scale.to_ms_f64(lo), spec.scale.to_ms_f64(hi)),
            );
            safe_point_ms.insert(task.name.clone(), spec.scale.to_ms_f64(hi));
        }
        BestBoxFile {
            units_per_ms: spec.scale.units_per_ms(),
            volume_ms: volume,
            box_ms,
            safe_point_ms,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BaselineError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<BestBoxFile, BaselineError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Label;
    use crate::time::TimeValue;

    fn two_range_spec() -> SystemSpec {
        let json = r#"{
            "scheduler": {"resolution": "1"},
            "cores": 1,
            "context_switch": {"startup": ["0", "0"], "exit": ["0", "0"], "ipi": ["0", "0"]},
            "partitions": [{"id": "p1", "budget_percent": 100.0}],
            "tasks": [
                {"id": "a", "kind": "periodic", "offset": "0", "period": "100",
                 "wcet": ["1", "10"], "deadline": "100", "priority": 2, "partition": "p1"},
                {"id": "b", "kind": "periodic", "offset": "0", "period": "100",
                 "wcet": ["1", "10"], "deadline": "100", "priority": 1, "partition": "p1"}
            ],
            "target_tasks": ["a", "b"],
            "sim_horizon": "100"
        }"#;
        crate::model::parse_system(json).unwrap()
    }

    fn push(ds: &mut LabeledDataset, a: i64, b: i64, label: Label) {
        let w = WcetAssignment(vec![TimeValue::from_units(a), TimeValue::from_units(b)]);
        let id = ds.rows.len() as u64;
        ds.push_assignment(&w, label, id, id);
    }

    #[test]
    fn containment_disqualifies_larger_volume() {
        let spec = two_range_spec();
        let mut ds = LabeledDataset::new(&spec);
        push(&mut ds, 4, 4, Label::Safe); // volume 9, but poisoned
        push(&mut ds, 3, 3, Label::Unsafe);
        push(&mut ds, 5, 2, Label::Safe); // volume 4, clean
        let w = max_safe_hyperbox(&spec, &ds).unwrap();
        assert_eq!((w.0[0].units(), w.0[1].units()), (5, 2));
    }

    #[test]
    fn larger_clean_volume_wins() {
        let spec = two_range_spec();
        let mut ds = LabeledDataset::new(&spec);
        push(&mut ds, 3, 4, Label::Safe); // 6
        push(&mut ds, 3, 5, Label::Safe); // 8
        let w = max_safe_hyperbox(&spec, &ds).unwrap();
        assert_eq!((w.0[0].units(), w.0[1].units()), (3, 5));
    }

    #[test]
    fn single_safe_tuple_is_returned() {
        let spec = two_range_spec();
        let mut ds = LabeledDataset::new(&spec);
        push(&mut ds, 5, 6, Label::Safe);
        let w = max_safe_hyperbox(&spec, &ds).unwrap();
        assert_eq!((w.0[0].units(), w.0[1].units()), (5, 6));
    }

    #[test]
    fn all_unsafe_is_an_error() {
        let spec = two_range_spec();
        let mut ds = LabeledDataset::new(&spec);
        push(&mut ds, 5, 6, Label::Unsafe);
        assert!(matches!(
            max_safe_hyperbox(&spec, &ds),
            Err(BaselineError::NoSafeHyperbox)
        ));
    }
}
