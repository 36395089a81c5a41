//! The baseline extractor against an exhaustive oracle, plus dataset-shape
//! and persistence checks on a simulated subject.

use safewcet::baseline::{max_safe_hyperbox, random_search, BaselineParams, BestBoxFile};
use safewcet::model::parse_system;
use safewcet::search::{LabeledDataset, LabeledRow};
use safewcet::seeds::rng_from_seed;
use safewcet::sim::Label;
use safewcet::synth::{generate_system, GenConfig};
use safewcet::time::TimeValue;

use rand::Rng;

fn two_range_spec() -> safewcet::model::SystemSpec {
    let doc = serde_json::json!({
        "scheduler": { "resolution": "1" },
        "cores": 1,
        "context_switch": { "startup": ["0", "0"], "exit": ["0", "0"], "ipi": ["0", "0"] },
        "partitions": [{ "id": "main", "budget_percent": 100 }],
        "tasks": [
            { "id": "a", "kind": "periodic", "offset": "0", "period": "40",
              "wcet": ["1", "10"], "deadline": "40", "priority": 2,
              "constraint": [0, 4], "partition": "main" },
            { "id": "b", "kind": "periodic", "offset": "0", "period": "40",
              "wcet": ["1", "10"], "deadline": "40", "priority": 1,
              "constraint": [0, 4], "partition": "main" },
        ],
        "target_tasks": ["a", "b"],
        "sim_horizon": "100",
    });
    parse_system(&doc.to_string()).unwrap()
}

/// Straight from the definition: a safe row's box is valid when no unsafe
/// row fits inside it coordinate-wise; the winner maximizes volume, ties
/// broken by earliest row.
fn oracle_best_box(ds: &LabeledDataset) -> Option<Vec<i64>> {
    let unsafe_rows: Vec<&LabeledRow> =
        ds.rows.iter().filter(|r| r.label == Label::Unsafe).collect();
    let mut best: Option<(f64, usize, Vec<i64>)> = None;
    for (i, row) in ds.rows.iter().enumerate() {
        if row.label != Label::Safe {
            continue;
        }
        let coords: Vec<i64> = row.wcet.iter().map(|w| w.units()).collect();
        let poisoned = unsafe_rows
            .iter()
            .any(|u| u.wcet.iter().zip(&coords).all(|(w, &c)| w.units() <= c));
        if poisoned {
            continue;
        }
        // Volume from a unit lower bound of 1, as in the two-task fixture.
        let volume: f64 = coords.iter().map(|&c| (c - 1) as f64).product();
        if best.as_ref().is_none_or(|(bv, _, _)| volume > *bv) {
            best = Some((volume, i, coords));
        }
    }
    best.map(|(_, _, coords)| coords)
}

#[test]
fn extractor_agrees_with_the_exhaustive_oracle() {
    let spec = two_range_spec();
    let mut rng = rng_from_seed(40);
    let mut rounds_with_answer = 0;
    for _ in 0..300 {
        let mut ds = LabeledDataset::new(&spec);
        let n = rng.random_range(1..40usize);
        for i in 0..n {
            let wcet: Vec<TimeValue> = (0..2)
                .map(|_| TimeValue::from_units(rng.random_range(1..=10)))
                .collect();
            let label = if rng.random_bool(0.4) {
                Label::Unsafe
            } else {
                Label::Safe
            };
            ds.rows.push(LabeledRow {
                wcet,
                label,
                case_id: i as u64,
                wcet_seed: 0,
            });
        }
        match (max_safe_hyperbox(&spec, &ds), oracle_best_box(&ds)) {
            (Err(_), None) => {}
            (Ok(w), Some(coords)) => {
                rounds_with_answer += 1;
                let got: Vec<i64> = spec.range_tasks().iter().map(|&t| w.get(t).units()).collect();
                assert_eq!(got, coords);
            }
            (got, want) => panic!("oracle {want:?} but extractor said {:?}", got.map(|w| w.0)),
        }
    }
    assert!(rounds_with_answer > 150, "too few decidable rounds");
}

#[test]
fn random_search_shape_and_determinism() {
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
    let params = BaselineParams {
        np: 3,
        ns: 4,
        iterations: 5,
        seed: 2,
    };
    let a = random_search(&spec, &params);
    assert_eq!(a.rows.len(), 3 * 4 * 5);
    let b = random_search(&spec, &params);
    assert_eq!(a, b);
    // Case ids cover one fresh case per cell.
    let max_id = a.rows.iter().map(|r| r.case_id).max().unwrap();
    assert_eq!(max_id, (3 * 5 - 1) as u64);
}

#[test]
fn best_box_file_round_trips() {
    let spec = two_range_spec();
    let mut ds = LabeledDataset::new(&spec);
    ds.rows.push(LabeledRow {
        wcet: vec![TimeValue::from_units(7), TimeValue::from_units(4)],
        label: Label::Safe,
        case_id: 0,
        wcet_seed: 0,
    });
    let w = max_safe_hyperbox(&spec, &ds).unwrap();
    let file = BestBoxFile::from_assignment(&spec, &w);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bestbox.json");
    file.save(&path).unwrap();
    let back = BestBoxFile::load(&path).unwrap();
    assert_eq!(back.box_ms, file.box_ms);
    assert_eq!(back.volume_ms, (7.0 - 1.0) * (4.0 - 1.0));
    assert_eq!(back.box_ms["a"], (1.0, 7.0));
    assert_eq!(back.box_ms["b"], (1.0, 4.0));
}
