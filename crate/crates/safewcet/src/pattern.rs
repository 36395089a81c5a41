//! Deadline-miss patterns and the scores derived from them.
//!
//! A μ-pattern marks, per arrival of a task, whether the deadline was
//! missed. The miss distance drives the magnitude objective; the
//! consecutiveness score 10^(1/interval) rewards closely spaced misses.

use std::collections::BTreeMap;

use crate::model::{SystemSpec, TaskId};
use crate::sim::{miss_pattern, ScheduleScenario};
use crate::time::TimeValue;

/// Per-target-task miss patterns of one scenario (true = miss).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MuPattern {
    pub patterns: BTreeMap<TaskId, Vec<bool>>,
}

impl MuPattern {
    pub fn from_scenario(
        spec: &SystemSpec,
        scenario: &ScheduleScenario,
        targets: &[TaskId],
    ) -> MuPattern {
        MuPattern {
            patterns: targets
                .iter()
                .map(|&t| (t, miss_pattern(spec, scenario, t)))
                .collect(),
        }
    }
}

/// Distance to the next miss from arrival `k` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissInterval {
    /// Arrival `k` itself hit its deadline.
    Hit,
    /// Next miss is `gap` arrivals later (1 = immediately next).
    Next(usize),
    /// Arrival `k` missed and no later miss exists.
    Unbounded,
}

/// Signed slack of arrival `k` (1-based): end − (arrival + deadline), in
/// time units. Positive iff the arrival missed its deadline.
pub fn dist(
    spec: &SystemSpec,
    scenario: &ScheduleScenario,
    task: TaskId,
    k: usize,
) -> Option<i64> {
    let tuple = scenario.tuples_for(task).nth(k.checked_sub(1)?)?;
    let deadline: TimeValue = spec.task(task).deadline;
    Some(tuple.end.signed_diff(tuple.arrival + deadline))
}

/// Arrival distance from miss `k` (1-based) to the next miss: 0 when `k`
/// hit, unbounded when `k` is the last miss.
pub fn mu_interval(pattern: &[bool], k: usize) -> MissInterval {
    if k == 0 || k > pattern.len() || !pattern[k - 1] {
        return MissInterval::Hit;
    }
    match pattern[k..].iter().position(|&m| m) {
        Some(offset) => MissInterval::Next(offset + 1),
        None => MissInterval::Unbounded,
    }
}

/// Consecutiveness score of arrival `k`: 10^(1/interval) for misses (1 for
/// an unbounded interval), 0 for hits.
pub fn consec(pattern: &[bool], k: usize) -> f64 {
    match mu_interval(pattern, k) {
        MissInterval::Hit => 0.0,
        MissInterval::Next(gap) => 10f64.powf(1.0 / gap as f64),
        MissInterval::Unbounded => 1.0,
    }
}

/// Sum of consecutiveness scores over one task's pattern.
pub fn consec_sum(pattern: &[bool]) -> f64 {
    (1..=pattern.len()).map(|k| consec(pattern, k)).sum()
}

/// Worst (maximum) miss distance over the target tasks of one scenario, in
/// time units. `None` when no target has any arrival.
pub fn max_dist(
    spec: &SystemSpec,
    scenario: &ScheduleScenario,
    targets: &[TaskId],
) -> Option<i64> {
    targets
        .iter()
        .flat_map(|&task| {
            let deadline = spec.task(task).deadline;
            scenario
                .tuples_for(task)
                .map(move |t| t.end.signed_diff(t.arrival + deadline))
        })
        .max()
}

/// Worst consecutiveness sum over the target tasks of one scenario.
pub fn max_consec_sum(spec: &SystemSpec, scenario: &ScheduleScenario, targets: &[TaskId]) -> f64 {
    targets
        .iter()
        .map(|&task| consec_sum(&miss_pattern(spec, scenario, task)))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PATTERN: [bool; 6] = [true, true, false, false, true, false];

    #[test]
    fn interval_matches_worked_values() {
        assert_eq!(mu_interval(&PATTERN, 1), MissInterval::Next(1));
        assert_eq!(mu_interval(&PATTERN, 2), MissInterval::Next(3));
        assert_eq!(mu_interval(&PATTERN, 3), MissInterval::Hit);
        assert_eq!(mu_interval(&PATTERN, 5), MissInterval::Unbounded);
    }

    #[test]
    fn consec_matches_worked_values() {
        assert!((consec(&PATTERN, 1) - 10.0).abs() < 1e-9);
        assert!((consec(&PATTERN, 2) - 10f64.powf(1.0 / 3.0)).abs() < 1e-9);
        assert_eq!(consec(&PATTERN, 3), 0.0);
        assert!((consec(&PATTERN, 5) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn consec_sum_is_the_fixture_value() {
        let expected = 11.0 + 10f64.powf(1.0 / 3.0);
        assert!((consec_sum(&PATTERN) - expected).abs() < 1e-9);
    }

    #[test]
    fn consec_decreases_with_interval() {
        let mut last = f64::INFINITY;
        for gap in 1..=50usize {
            let v = 10f64.powf(1.0 / gap as f64);
            assert!(v < last);
            last = v;
        }
        assert!(last > 1.0);
    }
}
