//! Synthetic system generation: UUniFast-Discard utilizations, log-uniform
//! periods on a granularity grid, rate-monotonic priorities, and the
//! conversions that add weak deadlines, aperiodic arrivals, WCET ranges, and
//! partitions. Also the parameter-sweep suites used for scaling studies.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Constraint, ContextSwitchRanges, CtxRange, PartitionId, PartitionSpec, Policy, SchedConfig,
    SpecError, SystemSpec, Task, TaskId, TaskKind,
};
use crate::seeds::{derive_seed, rng_from_seed};
use crate::time::{TimeError, TimeScale, TimeValue};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("target utilization {0} is infeasible for {1} tasks")]
    Infeasible(f64, usize),
    #[error("generation failed: {0}")]
    Retries(String),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Time(#[from] TimeError),
}

/// Generator inputs. Times are in milliseconds; `utilization` is the total
/// target across all cores.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub tasks: usize,
    pub utilization: f64,
    pub period_min_ms: f64,
    pub period_max_ms: f64,
    pub granularity_ms: f64,
    pub max_offset_ms: f64,
    pub aperiodic_ratio: f64,
    pub arrival_factor: f64,
    pub wcet_ranges: usize,
    /// WCET range factor; per-task log-uniform draws when absent.
    pub wcet_factor: Option<f64>,
    pub partitions: usize,
    /// (m, K) applied to the weakly hard tasks.
    pub constraint: (u32, u32),
    /// How many of the lowest-priority tasks become weakly hard.
    pub weakly_hard: usize,
    pub cores: usize,
    pub sim_time_ms: f64,
    pub resolution_ms: String,
    pub ctx_range_ms: (f64, f64),
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            tasks: 25,
            utilization: 0.9,
            period_min_ms: 10.0,
            period_max_ms: 1000.0,
            granularity_ms: 10.0,
            max_offset_ms: 0.0,
            aperiodic_ratio: 0.5,
            arrival_factor: 0.25,
            wcet_ranges: 25,
            wcet_factor: None,
            partitions: 1,
            constraint: (0, 10),
            weakly_hard: 10,
            cores: 1,
            sim_time_ms: 5000.0,
            resolution_ms: "0.001".into(),
            ctx_range_ms: (0.012, 0.022),
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Config(m));
        if self.tasks == 0 {
            return fail("need at least one task".into());
        }
        if !(self.utilization > 0.0 && self.utilization <= self.cores as f64) {
            return fail(format!(
                "utilization {} must be in (0, cores={}]",
                self.utilization, self.cores
            ));
        }
        if !(self.period_min_ms > 0.0 && self.period_min_ms <= self.period_max_ms) {
            return fail("period range must satisfy 0 < min <= max".into());
        }
        if self.granularity_ms <= 0.0 {
            return fail("granularity must be positive".into());
        }
        if self.max_offset_ms < 0.0 {
            return fail("max offset must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.aperiodic_ratio) {
            return fail("aperiodic ratio must be in [0, 1]".into());
        }
        if !(self.arrival_factor > 0.0 && self.arrival_factor < 1.0) {
            return fail("arrival factor must be in (0, 1)".into());
        }
        if self.wcet_ranges > self.tasks {
            return fail("more WCET ranges than tasks".into());
        }
        if let Some(l) = self.wcet_factor {
            if !(l > 0.0 && l < 1.0) {
                return fail("WCET factor must be in (0, 1)".into());
            }
        }
        if self.partitions == 0 || self.partitions > self.tasks {
            return fail("partition count must be in [1, tasks]".into());
        }
        if self.constraint.0 >= self.constraint.1 {
            return fail("constraint needs m < K".into());
        }
        if self.weakly_hard > self.tasks {
            return fail("more weakly hard tasks than tasks".into());
        }
        if self.cores == 0 {
            return fail("need at least one core".into());
        }
        if self.sim_time_ms <= 0.0 {
            return fail("simulation time must be positive".into());
        }
        if !(self.ctx_range_ms.0 >= 0.0 && self.ctx_range_ms.0 <= self.ctx_range_ms.1) {
            return fail("context-switch range must satisfy 0 <= min <= max".into());
        }
        Ok(())
    }
}

/// UUniFast with discarding: `n` utilizations summing to `target`, each
/// strictly inside (0, 1). Fails when `target >= n`.
pub fn uunifast_discard(
    n: usize,
    target: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>, SynthError> {
    if n == 0 || target <= 0.0 || target >= n as f64 {
        return Err(SynthError::Infeasible(target, n));
    }
    'attempt: for _ in 0..10_000 {
        let mut out = Vec::with_capacity(n);
        let mut sum = target;
        for i in 1..n {
            let next = sum * rng.random::<f64>().powf(1.0 / (n - i) as f64);
            out.push(sum - next);
            sum = next;
        }
        out.push(sum);
        for &u in &out {
            if !(u > 0.0 && u < 1.0) {
                continue 'attempt;
            }
        }
        return Ok(out);
    }
    Err(SynthError::Retries(format!(
        "no utilization vector with every share below 1 after 10000 draws \
         (n={n}, target={target})"
    )))
}

fn exact_units(scale: &TimeScale, ms: f64, what: &str) -> Result<TimeValue, SynthError> {
    let raw = ms * scale.units_per_ms() as f64;
    let rounded = raw.round();
    if (raw - rounded).abs() > 1e-6 || rounded < 0.0 {
        return Err(SynthError::Config(format!(
            "{what} = {ms} ms is not representable at resolution {}",
            scale.resolution_ms_string()
        )));
    }
    Ok(TimeValue::from_units(rounded as i64))
}

/// Builds one synthetic system. All randomness comes from `cfg.seed`, in a
/// fixed draw order, so equal configs give byte-equal systems.
pub fn generate_system(cfg: &GenConfig) -> Result<SystemSpec, SynthError> {
    cfg.validate()?;
    let scale = TimeScale::from_resolution_ms(&cfg.resolution_ms)
        .map_err(|e| SynthError::Config(format!("resolution: {e}")))?;
    let mut rng = rng_from_seed(cfg.seed);
    let n = cfg.tasks;

    let us = uunifast_discard(n, cfg.utilization, &mut rng)?;

    // Log-uniform periods snapped onto the granularity grid.
    let g_units = exact_units(&scale, cfg.granularity_ms, "granularity")?.units();
    let k_min = (cfg.period_min_ms / cfg.granularity_ms).ceil() as i64;
    let k_max = (cfg.period_max_ms / cfg.granularity_ms).floor() as i64;
    if k_min > k_max {
        return Err(SynthError::Config(
            "period range holds no granularity multiple".into(),
        ));
    }
    let (ln_lo, ln_hi) = (cfg.period_min_ms.ln(), cfg.period_max_ms.ln());
    let periods: Vec<i64> = (0..n)
        .map(|_| {
            let t_ms = rng.random_range(ln_lo..=ln_hi).exp();
            let k = ((t_ms / cfg.granularity_ms).round() as i64).clamp(k_min, k_max);
            k * g_units
        })
        .collect();

    // WCETs from the utilization shares of the snapped periods.
    let wcets: Vec<i64> = us
        .iter()
        .zip(&periods)
        .map(|(&u, &t)| ((u * t as f64).round() as i64).max(1))
        .collect();

    // Offsets on the same grid.
    let offsets: Vec<i64> = (0..n)
        .map(|_| {
            if cfg.max_offset_ms == 0.0 {
                return 0;
            }
            let o_ms: f64 = rng.random_range(0.0..=cfg.max_offset_ms);
            let k = ((o_ms / cfg.granularity_ms).round() as i64)
                .clamp(0, (cfg.max_offset_ms / cfg.granularity_ms).floor() as i64);
            k * g_units
        })
        .collect();

    // Rate-monotonic: shorter period, higher priority; ties by task id.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (periods[i], i));
    let mut priority = vec![0i64; n];
    for (rank, &i) in order.iter().enumerate() {
        priority[i] = (n - rank) as i64;
    }

    let width = n.to_string().len();
    let mut tasks: Vec<Task> = (0..n)
        .map(|i| Task {
            name: format!("t{:0width$}", i + 1),
            kind: TaskKind::Periodic {
                offset: TimeValue::from_units(offsets[i]),
                period: TimeValue::from_units(periods[i]),
            },
            wcet_min: TimeValue::from_units(wcets[i]),
            wcet_max: TimeValue::from_units(wcets[i]),
            deadline: TimeValue::from_units(periods[i]),
            priority: priority[i],
            policy: Policy::Preemptive,
            constraint: Constraint { m: 0, k: 1 },
            partition: PartitionId(0),
            core_affinity: None,
        })
        .collect();

    // The weakly hard tasks: lowest priorities first.
    let mut by_prio: Vec<usize> = (0..n).collect();
    by_prio.sort_by_key(|&i| priority[i]);
    let weak: Vec<usize> = by_prio.iter().copied().take(cfg.weakly_hard).collect();
    for &i in &weak {
        tasks[i].constraint = Constraint {
            m: cfg.constraint.0,
            k: cfg.constraint.1,
        };
    }

    // Aperiodic conversion; inter-arrival range centers on the old period.
    let ap_count = (cfg.aperiodic_ratio * n as f64).floor() as usize;
    let ap_pick = rand::seq::index::sample(&mut rng, n, ap_count);
    for i in ap_pick {
        let t = periods[i] as f64;
        let min_gap = ((t * (1.0 - cfg.arrival_factor)).round() as i64).max(1);
        let max_gap = ((t * (1.0 + cfg.arrival_factor)).round() as i64).max(min_gap);
        tasks[i].kind = TaskKind::Aperiodic {
            min_gap: TimeValue::from_units(min_gap),
            max_gap: TimeValue::from_units(max_gap),
        };
    }

    // WCET ranges. A draw is valid when the minimum stays positive, the
    // maximum stays below the deadline, and the range is non-degenerate.
    // Deadlines equal the snapped periods, so the bound reads `periods`.
    let range_of = |i: usize, lambda: f64| -> Option<(i64, i64)> {
        let c = wcets[i] as f64;
        let lo = (c * (1.0 - lambda)).round() as i64;
        let hi = (c * (1.0 + lambda)).round() as i64;
        (lo >= 1 && hi < periods[i] && lo < hi).then_some((lo, hi))
    };
    match cfg.wcet_factor {
        Some(lambda) => {
            let feasible: Vec<usize> = (0..n).filter(|&i| range_of(i, lambda).is_some()).collect();
            if feasible.len() < cfg.wcet_ranges {
                return Err(SynthError::Retries(format!(
                    "only {} of {} tasks admit a WCET range with factor {lambda}",
                    feasible.len(),
                    n
                )));
            }
            for j in rand::seq::index::sample(&mut rng, feasible.len(), cfg.wcet_ranges) {
                let i = feasible[j];
                let (lo, hi) = range_of(i, lambda).expect("checked feasible");
                tasks[i].wcet_min = TimeValue::from_units(lo);
                tasks[i].wcet_max = TimeValue::from_units(hi);
            }
        }
        None => {
            // Per-task factor, log-uniform; invalid draws are re-drawn.
            let picks = rand::seq::index::sample(&mut rng, n, cfg.wcet_ranges);
            for i in picks {
                let mut done = false;
                for _ in 0..1_000 {
                    let lambda = rng.random_range(0.01f64.ln()..=0.99f64.ln()).exp();
                    if let Some((lo, hi)) = range_of(i, lambda) {
                        tasks[i].wcet_min = TimeValue::from_units(lo);
                        tasks[i].wcet_max = TimeValue::from_units(hi);
                        done = true;
                        break;
                    }
                }
                if !done {
                    return Err(SynthError::Retries(format!(
                        "no valid WCET range for task {} after 1000 draws",
                        tasks[i].name
                    )));
                }
            }
        }
    }

    // Partitions: an even percent split, remainder to the front, then random
    // assignment with every partition seeded by one task.
    let rho = cfg.partitions;
    let base_pct = (100 / rho) as u32;
    let rem = (100 % rho) as u32;
    let partitions: Vec<PartitionSpec> = (0..rho)
        .map(|p| PartitionSpec {
            name: format!("p{}", p + 1),
            budget_bp: (base_pct + u32::from((p as u32) < rem)) * 100,
        })
        .collect();
    let shuffled = rand::seq::index::sample(&mut rng, n, n);
    for (pos, i) in shuffled.iter().enumerate() {
        let p = if pos < rho {
            pos
        } else {
            rng.random_range(0..rho)
        };
        tasks[i].partition = PartitionId(p);
    }

    let ctx = {
        let lo = exact_units(&scale, cfg.ctx_range_ms.0, "context-switch minimum")?;
        let hi = exact_units(&scale, cfg.ctx_range_ms.1, "context-switch maximum")?;
        let r = CtxRange { min: lo, max: hi };
        ContextSwitchRanges {
            startup: r,
            exit: r,
            ipi: r,
        }
    };

    let target_tasks: Vec<TaskId> = {
        let mut w = weak.clone();
        w.sort_unstable();
        if w.is_empty() {
            (0..n).map(TaskId).collect()
        } else {
            w.into_iter().map(TaskId).collect()
        }
    };

    let spec = SystemSpec {
        scale,
        tasks,
        partitions,
        num_cores: cfg.cores,
        ctx,
        sched: SchedConfig {
            partition_window: exact_units(&scale, 100.0, "partition window")?,
            rr_timeslice: exact_units(&scale, 4.0, "timeslice")?,
            tick: exact_units(&scale, 1.0, "tick")?,
        },
        sim_horizon: exact_units(&scale, cfg.sim_time_ms, "simulation time")?,
        explicit_horizon: true,
        target_tasks,
    };
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Named subjects built from the base recipe.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Base,
    Partition,
    Policy,
    Multicore,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Preset> {
        match s {
            "base" => Some(Preset::Base),
            "partition" => Some(Preset::Partition),
            "policy" => Some(Preset::Policy),
            "multicore" => Some(Preset::Multicore),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Base => "base",
            Preset::Partition => "partition",
            Preset::Policy => "policy",
            Preset::Multicore => "multicore",
        }
    }
}

/// The four documented subjects: a 25-task base system and three variants
/// exercising partitions, same-priority policies, and a second core.
pub fn generate_preset(preset: Preset, seed: u64) -> Result<SystemSpec, SynthError> {
    let cfg = GenConfig {
        seed,
        ..GenConfig::default()
    };
    let mut spec = generate_system(&cfg)?;
    match preset {
        Preset::Base => {}
        Preset::Partition => {
            // 60/40 split: the 19 highest-priority tasks in front.
            spec.partitions = vec![
                PartitionSpec {
                    name: "p1".into(),
                    budget_bp: 6000,
                },
                PartitionSpec {
                    name: "p2".into(),
                    budget_bp: 4000,
                },
            ];
            let mut by_prio: Vec<usize> = (0..spec.tasks.len()).collect();
            by_prio.sort_by_key(|&i| std::cmp::Reverse(spec.tasks[i].priority));
            for (rank, &i) in by_prio.iter().enumerate() {
                spec.tasks[i].partition = PartitionId(usize::from(rank >= 19));
            }
        }
        Preset::Policy => {
            // Two same-priority pairs, one FIFO and one round-robin.
            let mut rng = rng_from_seed(derive_seed(seed, "policy-pairs", &[]));
            let picks = rand::seq::index::sample(&mut rng, spec.tasks.len(), 4);
            let ids: Vec<usize> = picks.iter().collect();
            for (pair, policy) in [(0usize, Policy::Fifo), (2usize, Policy::RoundRobin)] {
                let (a, b) = (ids[pair], ids[pair + 1]);
                let shared = spec.tasks[a].priority;
                spec.tasks[b].priority = shared;
                spec.tasks[a].policy = policy;
                spec.tasks[b].policy = policy;
            }
        }
        Preset::Multicore => {
            spec.num_cores = 2;
            for t in &mut spec.tasks {
                t.wcet_min = t.wcet_min.scale_by(2)?;
                t.wcet_max = t.wcet_max.scale_by(2)?;
            }
            let mut rng = rng_from_seed(derive_seed(seed, "affinity", &[]));
            let perm = rand::seq::index::sample(&mut rng, spec.tasks.len(), spec.tasks.len());
            for (pos, i) in perm.iter().enumerate() {
                spec.tasks[i].core_affinity = match pos {
                    0..=7 => Some(0),
                    8..=15 => Some(1),
                    _ => None,
                };
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Parameter sweeps.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Tasks,
    AperiodicRatio,
    WcetRanges,
    Cores,
    Partitions,
    SimTime,
}

impl SweepParam {
    pub fn parse(s: &str) -> Option<SweepParam> {
        match s {
            "n" | "tasks" => Some(SweepParam::Tasks),
            "gamma" | "aperiodic" => Some(SweepParam::AperiodicRatio),
            "omega" | "ranges" => Some(SweepParam::WcetRanges),
            "epsilon" | "cores" => Some(SweepParam::Cores),
            "rho" | "partitions" => Some(SweepParam::Partitions),
            "t" | "simtime" => Some(SweepParam::SimTime),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Tasks => "n",
            SweepParam::AperiodicRatio => "gamma",
            SweepParam::WcetRanges => "omega",
            SweepParam::Cores => "epsilon",
            SweepParam::Partitions => "rho",
            SweepParam::SimTime => "t",
        }
    }

    /// The documented default value grids for scaling studies.
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            SweepParam::Tasks => (1..=10).map(|i| (5 * i) as f64).collect(),
            SweepParam::AperiodicRatio => (1..=10).map(|i| 0.05 * i as f64).collect(),
            SweepParam::WcetRanges | SweepParam::Cores | SweepParam::Partitions => {
                (1..=10).map(|i| i as f64).collect()
            }
            SweepParam::SimTime => (1..=10).map(|i| (5000 * i) as f64).collect(),
        }
    }
}

fn apply_sweep(base: &GenConfig, param: SweepParam, value: f64) -> GenConfig {
    let mut cfg = base.clone();
    match param {
        SweepParam::Tasks => {
            cfg.tasks = value as usize;
            cfg.weakly_hard = cfg.weakly_hard.min(cfg.tasks);
            cfg.wcet_ranges = cfg.wcet_ranges.min(cfg.tasks);
            cfg.partitions = cfg.partitions.min(cfg.tasks);
        }
        SweepParam::AperiodicRatio => cfg.aperiodic_ratio = value,
        SweepParam::WcetRanges => cfg.wcet_ranges = (value as usize).min(cfg.tasks),
        SweepParam::Cores => {
            // Keep per-core utilization fixed while scaling the platform.
            let per_core = base.utilization / base.cores as f64;
            cfg.cores = value as usize;
            cfg.utilization = per_core * cfg.cores as f64;
        }
        SweepParam::Partitions => cfg.partitions = (value as usize).min(cfg.tasks),
        SweepParam::SimTime => cfg.sim_time_ms = value,
    }
    cfg
}

/// One system per (sweep value, replicate), each from an independently
/// derived seed; no sweep yields just the base system.
pub fn generate_experiment_suite(
    base: &GenConfig,
    sweep: Option<(SweepParam, Vec<f64>)>,
    replicates: usize,
) -> Result<Vec<(String, SystemSpec)>, SynthError> {
    let Some((param, values)) = sweep else {
        return Ok(vec![("base".into(), generate_system(base)?)]);
    };
    if values.is_empty() {
        return Ok(vec![("base".into(), generate_system(base)?)]);
    }
    let mut out = Vec::with_capacity(values.len() * replicates.max(1));
    for (vi, &value) in values.iter().enumerate() {
        for rep in 0..replicates.max(1) {
            let mut cfg = apply_sweep(base, param, value);
            cfg.seed = derive_seed(base.seed, param.name(), &[vi as u64, rep as u64]);
            let label = format!("{}{}_r{}", param.name(), trim_value(value), rep);
            out.push((label, generate_system(&cfg)?));
        }
    }
    Ok(out)
}

fn trim_value(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uunifast_forces_single_task_value() {
        let mut rng = rng_from_seed(1);
        let us = uunifast_discard(1, 0.9, &mut rng).unwrap();
        assert_eq!(us, vec![0.9]);
    }

    #[test]
    fn uunifast_sums_exactly_and_stays_open() {
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            let us = uunifast_discard(25, 0.9, &mut rng).unwrap();
            let sum: f64 = us.iter().sum();
            assert!((sum - 0.9).abs() < 1e-9 * 0.9);
            assert!(us.iter().all(|&u| u > 0.0 && u < 1.0));
        }
    }

    #[test]
    fn uunifast_two_tasks_high_target_pins_both_shares() {
        let mut rng = rng_from_seed(3);
        for _ in 0..100 {
            let us = uunifast_discard(2, 1.8, &mut rng).unwrap();
            assert!(us.iter().all(|&u| u > 0.8 && u < 1.0), "{us:?}");
        }
    }

    #[test]
    fn uunifast_rejects_infeasible_targets() {
        let mut rng = rng_from_seed(4);
        assert!(matches!(
            uunifast_discard(3, 3.0, &mut rng),
            Err(SynthError::Infeasible(_, _))
        ));
        assert!(matches!(
            uunifast_discard(2, 2.4, &mut rng),
            Err(SynthError::Infeasible(_, _))
        ));
    }

    #[test]
    fn budgets_split_evenly_with_front_remainder() {
        for (rho, expect) in [
            (2usize, vec![5000u32, 5000]),
            (3, vec![3400, 3300, 3300]),
            (4, vec![2500, 2500, 2500, 2500]),
        ] {
            let cfg = GenConfig {
                tasks: 8,
                partitions: rho,
                wcet_ranges: 2,
                weakly_hard: 2,
                seed: 7,
                ..GenConfig::default()
            };
            let spec = generate_system(&cfg).unwrap();
            let got: Vec<u32> = spec.partitions.iter().map(|p| p.budget_bp).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn arrival_factor_example_is_exact() {
        // mu = 0.45 on a 50 ms period gives [27.5, 72.5] ms.
        let scale = TimeScale::from_resolution_ms("0.001").unwrap();
        let t = 50.0 * scale.units_per_ms() as f64;
        let lo = (t * (1.0 - 0.45)).round() as i64;
        let hi = (t * (1.0 + 0.45)).round() as i64;
        assert_eq!(scale.format(TimeValue::from_units(lo)), "27.5");
        assert_eq!(scale.format(TimeValue::from_units(hi)), "72.5");
    }

    #[test]
    fn wcet_factor_example_is_exact() {
        // lambda = 0.25 on a 10 ms WCET gives [7.5, 12.5] ms.
        let cfg = GenConfig {
            tasks: 1,
            utilization: 0.1,
            period_min_ms: 100.0,
            period_max_ms: 100.0,
            granularity_ms: 100.0,
            aperiodic_ratio: 0.0,
            wcet_ranges: 1,
            wcet_factor: Some(0.25),
            weakly_hard: 1,
            constraint: (0, 10),
            seed: 5,
            ..GenConfig::default()
        };
        let spec = generate_system(&cfg).unwrap();
        let t = &spec.tasks[0];
        assert_eq!(spec.scale.format(t.wcet_min), "7.5");
        assert_eq!(spec.scale.format(t.wcet_max), "12.5");
    }

    #[test]
    fn sweep_scales_total_utilization_with_cores() {
        let base = GenConfig::default();
        let two = apply_sweep(&base, SweepParam::Cores, 2.0);
        assert_eq!(two.cores, 2);
        assert!((two.utilization - 1.8).abs() < 1e-12);
    }
}
