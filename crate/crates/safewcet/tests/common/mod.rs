//! Shared oracles for the integration suites: a naive unit-step scheduler
//! for restricted single-core systems and a windowed scanner for the
//! weakly hard check. Both are written for obviousness, not speed.

#![allow(dead_code)]

use rand::Rng;
use safewcet::model::{parse_system, SystemSpec, TaskId};
use safewcet::sim::{TestCase, WcetAssignment};

/// Unit-step scheduler for systems with integer-unit times, one core, zero
/// context switching, fixed WCETs, distinct priorities, and the preemptive
/// policy. Each time unit the highest-priority ready job runs; jobs of one
/// task run strictly in arrival order. Runs until every arrival completes,
/// even past the horizon. Returns (task, arrival, end) in engine order:
/// grouped by task, by arrival within a task.
pub fn reference_schedule(
    spec: &SystemSpec,
    tc: &TestCase,
    w: &WcetAssignment,
) -> Vec<(TaskId, i64, i64)> {
    struct Job {
        arrival: i64,
        remaining: i64,
    }
    let mut queues: Vec<std::collections::VecDeque<Job>> = spec
        .task_ids()
        .map(|id| {
            tc.arrivals_for(spec, id)
                .into_iter()
                .map(|a| Job {
                    arrival: a.units(),
                    remaining: w.get(id).units(),
                })
                .collect()
        })
        .collect();

    let mut done: Vec<(TaskId, i64, i64)> = Vec::new();
    let mut t = 0i64;
    loop {
        let mut best: Option<(i64, usize)> = None;
        let mut next_arrival = i64::MAX;
        for (i, q) in queues.iter().enumerate() {
            if let Some(job) = q.front() {
                if job.arrival <= t {
                    let priority = spec.tasks[i].priority;
                    if best.is_none_or(|(p, _)| priority > p) {
                        best = Some((priority, i));
                    }
                } else {
                    next_arrival = next_arrival.min(job.arrival);
                }
            }
        }
        match best {
            Some((_, i)) => {
                let job = queues[i].front_mut().unwrap();
                job.remaining -= 1;
                if job.remaining == 0 {
                    done.push((TaskId(i), job.arrival, t + 1));
                    queues[i].pop_front();
                }
                t += 1;
            }
            None if next_arrival == i64::MAX => break,
            None => t = next_arrival,
        }
    }
    done.sort_by_key(|&(task, arrival, _)| (task.0, arrival));
    done
}

/// Windowed weakly hard check, straight from the definition: scan every
/// window of min(K, len) consecutive arrivals and flag the first one whose
/// longest miss run exceeds m. Returns the index of the first miss of the
/// offending run.
pub fn window_scan_violation(pattern: &[bool], m: u32, k: u32) -> Option<usize> {
    let w = (k as usize).min(pattern.len());
    if w == 0 {
        return None;
    }
    for start in 0..=(pattern.len() - w) {
        let window = &pattern[start..start + w];
        let mut run = 0usize;
        for (i, &miss) in window.iter().enumerate() {
            if miss {
                run += 1;
                if run > m as usize {
                    return Some(start + i + 1 - run);
                }
            } else {
                run = 0;
            }
        }
    }
    None
}

/// Random system in the restricted domain of `reference_schedule`:
/// one core, millisecond resolution with unit times, zero context switch,
/// fixed WCETs, distinct priorities, up to three tasks mixing periodic and
/// aperiodic arrivals. Horizon 30..=90 ms.
pub fn random_restricted_system(rng: &mut impl Rng) -> SystemSpec {
    let n = rng.random_range(1..=3usize);
    let horizon = rng.random_range(30..=90i64);
    let mut priorities: Vec<i64> = (1..=n as i64).collect();
    // Fisher-Yates so priority is independent of declaration order.
    for i in (1..priorities.len()).rev() {
        priorities.swap(i, rng.random_range(0..=i));
    }
    let mut tasks = Vec::new();
    for (i, &priority) in priorities.iter().enumerate() {
        let wcet = rng.random_range(1..=4i64);
        let deadline = rng.random_range(wcet + 1..=wcet + 12);
        let (m, k) = (rng.random_range(0..3u32), rng.random_range(3..6u32));
        let mut task = serde_json::json!({
            "id": format!("t{}", i + 1),
            "wcet": wcet.to_string(),
            "deadline": deadline.to_string(),
            "priority": priority,
            "constraint": [m, k],
            "partition": "main",
        });
        if rng.random_bool(0.5) {
            let period = rng.random_range(wcet + 1..=wcet + 15);
            task["kind"] = "periodic".into();
            task["offset"] = rng.random_range(0..=6i64).to_string().into();
            task["period"] = period.to_string().into();
        } else {
            let lo = rng.random_range(wcet + 1..=wcet + 8);
            let hi = lo + rng.random_range(0..=8i64);
            task["kind"] = "aperiodic".into();
            task["inter_arrival"] = serde_json::json!([lo.to_string(), hi.to_string()]);
        }
        tasks.push(task);
    }
    let doc = serde_json::json!({
        "scheduler": { "resolution": "1" },
        "cores": 1,
        "context_switch": {
            "startup": ["0", "0"],
            "exit": ["0", "0"],
            "ipi": ["0", "0"],
        },
        "partitions": [{ "id": "main", "budget_percent": 100 }],
        "tasks": tasks,
        "target_tasks": (1..=n).map(|i| format!("t{i}")).collect::<Vec<_>>(),
        "sim_horizon": horizon.to_string(),
    });
    parse_system(&doc.to_string()).expect("restricted system must validate")
}
