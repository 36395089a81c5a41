//! Worst-case test generation: the two fitness objectives, the structure
//! aware crossover/mutation operators, and the archive-based NSGA-II loop.
//!
//! Each candidate is evaluated with `ns` simulations under independently
//! sampled WCET assignments; every simulation contributes one labeled
//! (WCET, label) tuple to the dataset that later feeds the learner.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{SpecError, SystemSpec, TaskId, TaskKind};
use crate::pattern::{max_consec_sum, max_dist};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::sim::{label, simulate, Label, TestCase, WcetAssignment};
use crate::time::TimeValue;

/// The two objectives, both maximized: `fd` is the mean worst miss distance
/// in milliseconds, `fc` the mean worst consecutiveness sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessPair {
    pub fd: f64,
    pub fc: f64,
}

impl FitnessPair {
    /// Pareto dominance under maximization of both objectives.
    pub fn dominates(&self, other: &FitnessPair) -> bool {
        self.fd >= other.fd && self.fc >= other.fc && (self.fd > other.fd || self.fc > other.fc)
    }
}

/// One labeled simulation outcome. `case_id` and `wcet_seed` identify the
/// evaluated test case and the RNG that drew the WCET assignment, so the
/// label can be reproduced.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub wcet: Vec<TimeValue>,
    pub label: Label,
    pub case_id: u64,
    pub wcet_seed: u64,
}

/// Labeled dataset over the tasks with genuine WCET ranges (task order).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub range_tasks: Vec<TaskId>,
    pub rows: Vec<LabeledRow>,
}

impl LabeledDataset {
    pub fn new(spec: &SystemSpec) -> LabeledDataset {
        LabeledDataset {
            range_tasks: spec.range_tasks(),
            rows: Vec::new(),
        }
    }

    pub fn push_assignment(&mut self, w: &WcetAssignment, label: Label, case_id: u64, seed: u64) {
        self.rows.push(LabeledRow {
            wcet: self.range_tasks.iter().map(|&t| w.get(t)).collect(),
            label,
            case_id,
            wcet_seed: seed,
        });
    }

    pub fn write_csv(&self, spec: &SystemSpec, path: impl AsRef<Path>) -> Result<(), SpecError> {
        let path = path.as_ref();
        let mut wtr = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
        let mut header: Vec<String> = self
            .range_tasks
            .iter()
            .map(|&t| format!("wcet_{}", spec.task(t).name))
            .collect();
        header.extend(["label".into(), "case_id".into(), "wcet_seed".into()]);
        wtr.write_record(&header).map_err(|e| io_err(path, e))?;
        for row in &self.rows {
            let mut record: Vec<String> = row
                .wcet
                .iter()
                .map(|&c| spec.scale.format(c))
                .collect();
            record.push(
                match row.label {
                    Label::Safe => "safe",
                    Label::Unsafe => "unsafe",
                }
                .into(),
            );
            record.push(row.case_id.to_string());
            record.push(row.wcet_seed.to_string());
            wtr.write_record(&record).map_err(|e| io_err(path, e))?;
        }
        wtr.flush().map_err(|e| io_err(path, std::io::Error::other(e)))?;
        Ok(())
    }

    pub fn read_csv(spec: &SystemSpec, path: impl AsRef<Path>) -> Result<LabeledDataset, SpecError> {
        let path = path.as_ref();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
        let headers = rdr.headers().map_err(|e| io_err(path, e))?.clone();
        let mut range_tasks = Vec::new();
        // Task columns run up to `label`; the metadata columns after it
        // include `wcet_seed`, which must not be mistaken for a task.
        for field in headers.iter() {
            if field == "label" {
                break;
            }
            let name = field.strip_prefix("wcet_").ok_or_else(|| {
                SpecError::Validation(format!("unexpected dataset column `{field}`"))
            })?;
            let id = spec
                .task_by_name(name)
                .ok_or_else(|| SpecError::Validation(format!("dataset column for unknown task `{name}`")))?;
            range_tasks.push(id);
        }
        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| io_err(path, e))?;
            let mut wcet = Vec::with_capacity(range_tasks.len());
            for i in 0..range_tasks.len() {
                wcet.push(spec.scale.parse_ms(&record[i])?);
            }
            let label = match &record[range_tasks.len()] {
                "safe" => Label::Safe,
                "unsafe" => Label::Unsafe,
                other => {
                    return Err(SpecError::Validation(format!("unknown label `{other}`")));
                }
            };
            let case_id = record[range_tasks.len() + 1]
                .parse()
                .map_err(|_| SpecError::Validation("bad case_id".into()))?;
            let wcet_seed = record[range_tasks.len() + 2]
                .parse()
                .map_err(|_| SpecError::Validation("bad wcet_seed".into()))?;
            rows.push(LabeledRow { wcet, label, case_id, wcet_seed });
        }
        Ok(LabeledDataset { range_tasks, rows })
    }

    /// Feature matrix in milliseconds plus per-row unsafe flags.
    pub fn as_features(&self, spec: &SystemSpec) -> (Vec<Vec<f64>>, Vec<bool>) {
        let rows = self
            .rows
            .iter()
            .map(|r| r.wcet.iter().map(|&c| spec.scale.to_ms_f64(c)).collect())
            .collect();
        let labels = self.rows.iter().map(|r| r.label == Label::Unsafe).collect();
        (rows, labels)
    }
}

fn io_err(path: &Path, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> SpecError {
    SpecError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    }
}

// ---------------------------------------------------------------------------
// Fitness evaluation.

/// Evaluates both objectives over `ns` simulations and collects the labeled
/// tuples. WCET draws derive from `seed` alone, so evaluation order cannot
/// change results.
pub fn evaluate_case(
    spec: &SystemSpec,
    tc: &TestCase,
    ns: usize,
    seed: u64,
) -> (FitnessPair, Vec<(WcetAssignment, Label, u64)>) {
    let mut fd_sum = 0.0;
    let mut fc_sum = 0.0;
    let mut rows = Vec::with_capacity(ns);
    for h in 0..ns {
        let wcet_seed = derive_seed(seed, "wcet", &[h as u64]);
        let mut rng = rng_from_seed(wcet_seed);
        let w = WcetAssignment::sample(spec, &mut rng);
        let scenario = simulate(spec, tc, &w).expect("evaluated case is valid");
        fd_sum += max_dist(spec, &scenario, &spec.target_tasks)
            .map(|d| spec.scale.delta_ms_f64(d))
            .unwrap_or(0.0);
        fc_sum += max_consec_sum(spec, &scenario, &spec.target_tasks);
        let verdict = label(spec, &scenario, &spec.target_tasks).expect("targets are valid");
        rows.push((w, verdict, wcet_seed));
    }
    (
        FitnessPair {
            fd: fd_sum / ns as f64,
            fc: fc_sum / ns as f64,
        },
        rows,
    )
}

/// Mean worst miss distance (ms) over `ns` randomized simulations.
pub fn fitness_fd(spec: &SystemSpec, tc: &TestCase, ns: usize, seed: u64) -> f64 {
    evaluate_case(spec, tc, ns, seed).0.fd
}

/// Mean worst consecutiveness sum over `ns` randomized simulations.
pub fn fitness_fc(spec: &SystemSpec, tc: &TestCase, ns: usize, seed: u64) -> f64 {
    evaluate_case(spec, tc, ns, seed).0.fc
}

// ---------------------------------------------------------------------------
// Genetic operators.

/// Crossover slots: the three context scalars followed by the aperiodic
/// tasks in task order. Swapping a task slot exchanges that task's entire
/// arrival sequence; everything at and before the chosen slot is swapped.
pub fn sweak_crossover(
    spec: &SystemSpec,
    p: &TestCase,
    q: &TestCase,
    rng: &mut impl Rng,
) -> (TestCase, TestCase) {
    let aperiodic = spec.aperiodic_tasks();
    let slots = 3 + aperiodic.len();
    let point = rng.random_range(0..slots);
    let mut a = p.clone();
    let mut b = q.clone();
    std::mem::swap(&mut a.startup, &mut b.startup);
    if point >= 1 {
        std::mem::swap(&mut a.exit, &mut b.exit);
    }
    if point >= 2 {
        std::mem::swap(&mut a.ipi, &mut b.ipi);
    }
    for (j, id) in aperiodic.iter().enumerate() {
        if point >= 3 + j {
            let sa = a.arrivals.get_mut(id).expect("aperiodic sequence present");
            let sb = b.arrivals.get_mut(id).expect("aperiodic sequence present");
            std::mem::swap(sa, sb);
        }
    }
    debug_assert!(a.validate(spec).is_ok() && b.validate(spec).is_ok());
    (a, b)
}

/// Mutates each gene (context scalar or aperiodic arrival) independently
/// with probability `pm`. An arrival resamples its gap to the predecessor;
/// when the successor becomes invalid the tail shifts by the same delta,
/// arrivals past the horizon drop, and new maximal arrivals are appended.
pub fn sweak_mutate(spec: &SystemSpec, tc: &TestCase, pm: f64, rng: &mut impl Rng) -> TestCase {
    let mut out = tc.clone();
    let horizon = spec.sim_horizon.units();
    if rng.random_bool(pm) {
        out.startup = draw(rng, spec.ctx.startup.min.units(), spec.ctx.startup.max.units());
    }
    if rng.random_bool(pm) {
        out.exit = draw(rng, spec.ctx.exit.min.units(), spec.ctx.exit.max.units());
    }
    if rng.random_bool(pm) {
        out.ipi = draw(rng, spec.ctx.ipi.min.units(), spec.ctx.ipi.max.units());
    }
    for id in spec.aperiodic_tasks() {
        let TaskKind::Aperiodic { min_gap, max_gap } = spec.task(id).kind else {
            unreachable!()
        };
        let (lo, hi) = (min_gap.units(), max_gap.units());
        let seq = out.arrivals.get_mut(&id).expect("aperiodic sequence present");
        let mut k = 0usize;
        while k < seq.len() {
            if rng.random_bool(pm) {
                let pred = if k == 0 { 0 } else { seq[k - 1].units() };
                let new = draw(rng, pred + lo, (pred + hi).min(horizon - 1)).units();
                let old = seq[k].units();
                let succ_ok = match seq.get(k + 1) {
                    Some(next) => {
                        let gap = next.units() - new;
                        gap >= lo && gap <= hi
                    }
                    None => new + lo >= horizon,
                };
                seq[k] = TimeValue::from_units(new);
                if !succ_ok {
                    let shift = new - old;
                    for a in seq.iter_mut().skip(k + 1) {
                        *a = TimeValue::from_units(a.units() + shift);
                    }
                    seq.retain(|a| a.units() < horizon);
                    let mut last = seq.last().map(|a| a.units()).unwrap_or(0);
                    // Unreachable when the mutated arrival itself survived,
                    // but keeps the sequence well formed regardless.
                    while last + lo < horizon {
                        last = draw(rng, last + lo, (last + hi).min(horizon - 1)).units();
                        seq.push(TimeValue::from_units(last));
                    }
                }
            }
            k += 1;
        }
    }
    debug_assert!(out.validate(spec).is_ok());
    out
}

fn draw(rng: &mut impl Rng, lo: i64, hi: i64) -> TimeValue {
    TimeValue::from_units(rng.random_range(lo..=hi.max(lo)))
}

// ---------------------------------------------------------------------------
// NSGA-II machinery.

/// Fronts of mutually non-dominating indices, best first.
pub fn non_dominated_fronts(points: &[FitnessPair]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && points[i].dominates(&points[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Standard crowding distance over the two objectives within one front.
pub fn crowding_distances(points: &[FitnessPair], front: &[usize]) -> Vec<f64> {
    let mut crowd = vec![0.0f64; front.len()];
    if front.len() <= 2 {
        return vec![f64::INFINITY; front.len()];
    }
    for objective in 0..2 {
        let value = |i: usize| -> f64 {
            let p = points[front[i]];
            if objective == 0 {
                p.fd
            } else {
                p.fc
            }
        };
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)));
        let span = value(order[front.len() - 1]) - value(order[0]);
        crowd[order[0]] = f64::INFINITY;
        crowd[order[front.len() - 1]] = f64::INFINITY;
        if span > 0.0 {
            for w in 1..front.len() - 1 {
                crowd[order[w]] += (value(order[w + 1]) - value(order[w - 1])) / span;
            }
        }
    }
    crowd
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluatedCase {
    pub case_id: u64,
    pub case: TestCase,
    pub fitness: FitnessPair,
}

#[derive(Debug, Clone, Copy)]
struct RankInfo {
    rank: usize,
    crowd: f64,
}

/// Keeps all rank-0 individuals up to `np`, then fills by rank and sparsity.
fn select_archive(pool: Vec<EvaluatedCase>, np: usize) -> Vec<(EvaluatedCase, RankInfo)> {
    let points: Vec<FitnessPair> = pool.iter().map(|e| e.fitness).collect();
    let fronts = non_dominated_fronts(&points);
    let mut selected = Vec::with_capacity(np);
    for (rank, front) in fronts.iter().enumerate() {
        let crowd = crowding_distances(&points, front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        // Sparser individuals first; ties broken by case id for determinism.
        order.sort_by(|&a, &b| {
            crowd[b]
                .total_cmp(&crowd[a])
                .then_with(|| pool[front[a]].case_id.cmp(&pool[front[b]].case_id))
        });
        for &w in &order {
            if selected.len() == np {
                return selected;
            }
            selected.push((
                pool[front[w]].clone(),
                RankInfo { rank, crowd: crowd[w] },
            ));
        }
    }
    selected
}

fn tournament<'a>(
    archive: &'a [(EvaluatedCase, RankInfo)],
    rng: &mut impl Rng,
) -> &'a EvaluatedCase {
    let a = rng.random_range(0..archive.len());
    let b = rng.random_range(0..archive.len());
    // Rank first, then sparsity, then id.
    let better = |x: usize, y: usize| -> usize {
        let (ex, ix) = (&archive[x].0, archive[x].1);
        let (ey, iy) = (&archive[y].0, archive[y].1);
        if ix.rank != iy.rank {
            return if ix.rank < iy.rank { x } else { y };
        }
        match ix.crowd.total_cmp(&iy.crowd) {
            std::cmp::Ordering::Greater => x,
            std::cmp::Ordering::Less => y,
            std::cmp::Ordering::Equal => {
                if ex.case_id <= ey.case_id {
                    x
                } else {
                    y
                }
            }
        }
    };
    &archive[better(a, b)].0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchParams {
    pub np: usize,
    pub ns: usize,
    pub iterations: usize,
    pub pc: f64,
    pub pm: f64,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            np: 10,
            ns: 20,
            iterations: 1000,
            pc: 0.7,
            pm: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutput {
    pub archive: Vec<EvaluatedCase>,
    pub dataset: LabeledDataset,
    /// Every evaluated test case by id; provenance for re-checking labels.
    pub cases: BTreeMap<u64, TestCase>,
}

/// Archive-based NSGA-II over test cases, maximizing (fd, fc).
pub fn nsga2_search(spec: &SystemSpec, params: &SearchParams) -> SearchOutput {
    assert!(params.np >= 2 && params.ns >= 1 && params.iterations >= 1);
    let mut dataset = LabeledDataset::new(spec);
    let mut cases = BTreeMap::new();
    let mut next_id: u64 = 0;
    let mut population: Vec<(u64, TestCase)> = (0..params.np)
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(params.seed, "init", &[i as u64]));
            let id = next_id + i as u64;
            (id, TestCase::sample(spec, &mut rng))
        })
        .collect();
    next_id += params.np as u64;
    let mut archive: Vec<(EvaluatedCase, RankInfo)> = Vec::new();

    for generation in 0..params.iterations {
        let evaluated: Vec<(EvaluatedCase, Vec<(WcetAssignment, Label, u64)>)> = population
            .par_iter()
            .map(|(case_id, case)| {
                let seed = derive_seed(params.seed, "eval", &[generation as u64, *case_id]);
                let (fitness, rows) = evaluate_case(spec, case, params.ns, seed);
                (
                    EvaluatedCase {
                        case_id: *case_id,
                        case: case.clone(),
                        fitness,
                    },
                    rows,
                )
            })
            .collect();
        let mut pool: Vec<EvaluatedCase> = archive.iter().map(|(e, _)| e.clone()).collect();
        for (e, rows) in evaluated {
            for (w, verdict, wcet_seed) in rows {
                dataset.push_assignment(&w, verdict, e.case_id, wcet_seed);
            }
            cases.insert(e.case_id, e.case.clone());
            pool.push(e);
        }
        archive = select_archive(pool, params.np);

        if generation + 1 == params.iterations {
            break;
        }
        let mut rng = rng_from_seed(derive_seed(params.seed, "breed", &[generation as u64]));
        let mut offspring = Vec::with_capacity(params.np);
        while offspring.len() < params.np {
            let p = tournament(&archive, &mut rng);
            let q = tournament(&archive, &mut rng);
            let (c1, c2) = if rng.random_bool(params.pc) {
                sweak_crossover(spec, &p.case, &q.case, &mut rng)
            } else {
                (p.case.clone(), q.case.clone())
            };
            for child in [c1, c2] {
                if offspring.len() < params.np {
                    offspring.push(sweak_mutate(spec, &child, params.pm, &mut rng));
                }
            }
        }
        population = offspring
            .into_iter()
            .map(|c| {
                let id = next_id;
                next_id += 1;
                (id, c)
            })
            .collect();
    }

    SearchOutput {
        archive: archive.into_iter().map(|(e, _)| e).collect(),
        dataset,
        cases,
    }
}

// ---------------------------------------------------------------------------
// Archive persistence.

#[derive(Debug, Serialize, Deserialize)]
struct ArchiveFile {
    units_per_ms: i64,
    cases: Vec<EvaluatedCase>,
}

pub fn write_archive(
    spec: &SystemSpec,
    archive: &[EvaluatedCase],
    path: impl AsRef<Path>,
) -> Result<(), SpecError> {
    let path = path.as_ref();
    let file = ArchiveFile {
        units_per_ms: spec.scale.units_per_ms(),
        cases: archive.to_vec(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_archive(
    spec: &SystemSpec,
    path: impl AsRef<Path>,
) -> Result<Vec<EvaluatedCase>, SpecError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: ArchiveFile = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    if file.units_per_ms != spec.scale.units_per_ms() {
        return Err(SpecError::Validation(format!(
            "archive resolution {} units/ms does not match the system's {}",
            file.units_per_ms,
            spec.scale.units_per_ms()
        )));
    }
    for entry in &file.cases {
        entry.case.validate(spec).map_err(|e| {
            SpecError::Validation(format!("archive case {}: {e}", entry.case_id))
        })?;
    }
    Ok(file.cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fronts_and_truncation_on_constructed_points() {
        let points = vec![
            FitnessPair { fd: 1.0, fc: 3.0 },
            FitnessPair { fd: 2.0, fc: 2.0 },
            FitnessPair { fd: 0.0, fc: 0.0 },
        ];
        let fronts = non_dominated_fronts(&points);
        assert_eq!(fronts, vec![vec![0, 1], vec![2]]);
    }

    #[test]
    fn crowding_marks_boundaries_infinite() {
        let points = vec![
            FitnessPair { fd: 0.0, fc: 4.0 },
            FitnessPair { fd: 1.0, fc: 3.0 },
            FitnessPair { fd: 2.0, fc: 2.0 },
            FitnessPair { fd: 4.0, fc: 0.0 },
        ];
        let front: Vec<usize> = (0..4).collect();
        let crowd = crowding_distances(&points, &front);
        assert!(crowd[0].is_infinite() && crowd[3].is_infinite());
        assert!(crowd[1].is_finite() && crowd[2].is_finite());
        assert!(crowd[1] > 0.0 && crowd[2] > 0.0);
    }
}
