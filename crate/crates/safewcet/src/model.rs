//! Task, partition, and system definitions plus their on-disk JSON format.
//!
//! A system file is a single JSON document with top-level keys `tasks`,
//! `partitions`, `cores`, `context_switch`, `scheduler`, `target_tasks`,
//! and optional `sim_horizon`. Every time field is a decimal millisecond
//! string so values stay exact at the configured resolution.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{TimeError, TimeScale, TimeValue, ZERO};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed system file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Time(#[from] TimeError),
    #[error("task `{task}`: {reason}")]
    Task { task: String, reason: String },
    #[error("{0}")]
    Validation(String),
}

fn invalid(msg: impl Into<String>) -> SpecError {
    SpecError::Validation(msg.into())
}

fn task_err(task: &str, reason: impl Into<String>) -> SpecError {
    SpecError::Task {
        task: task.to_string(),
        reason: reason.into(),
    }
}

/// Index of a task within `SystemSpec::tasks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId(pub usize);

/// Index of a partition within `SystemSpec::partitions`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartitionId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Preemptive,
    Fifo,
    RoundRobin,
}

impl Policy {
    fn as_str(&self) -> &'static str {
        match self {
            Policy::Preemptive => "preemptive",
            Policy::Fifo => "fifo",
            Policy::RoundRobin => "rr",
        }
    }

    fn parse(s: &str) -> Option<Policy> {
        match s {
            "preemptive" => Some(Policy::Preemptive),
            "fifo" => Some(Policy::Fifo),
            "rr" => Some(Policy::RoundRobin),
            _ => None,
        }
    }
}

/// Weakly hard deadline constraint: within any `k` consecutive arrivals at
/// most `m` consecutive misses are tolerated. `m = 0` is a hard deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constraint {
    pub m: u32,
    pub k: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskKind {
    Periodic {
        offset: TimeValue,
        period: TimeValue,
    },
    Aperiodic {
        min_gap: TimeValue,
        max_gap: TimeValue,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub name: String,
    pub kind: TaskKind,
    pub wcet_min: TimeValue,
    pub wcet_max: TimeValue,
    pub deadline: TimeValue,
    pub priority: i64,
    pub policy: Policy,
    pub constraint: Constraint,
    pub partition: PartitionId,
    pub core_affinity: Option<usize>,
}

impl Task {
    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, TaskKind::Periodic { .. })
    }

    /// True when the WCET is a genuine range; only these feed the learner.
    pub fn has_wcet_range(&self) -> bool {
        self.wcet_min < self.wcet_max
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    pub name: String,
    /// Budget share in basis points; all partitions sum to 10_000.
    pub budget_bp: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CtxRange {
    pub min: TimeValue,
    pub max: TimeValue,
}

impl CtxRange {
    pub fn contains(&self, t: TimeValue) -> bool {
        self.min <= t && t <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextSwitchRanges {
    pub startup: CtxRange,
    pub exit: CtxRange,
    pub ipi: CtxRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedConfig {
    pub partition_window: TimeValue,
    pub rr_timeslice: TimeValue,
    pub tick: TimeValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub scale: TimeScale,
    pub tasks: Vec<Task>,
    pub partitions: Vec<PartitionSpec>,
    pub num_cores: usize,
    pub ctx: ContextSwitchRanges,
    pub sched: SchedConfig,
    /// Simulation horizon `[0, t)`; explicit in the file or derived.
    pub sim_horizon: TimeValue,
    pub explicit_horizon: bool,
    pub target_tasks: Vec<TaskId>,
}

impl SystemSpec {
    pub fn task(&self, id: TaskId) -> &Task {
        &self.tasks[id.0]
    }

    pub fn task_ids(&self) -> impl Iterator<Item = TaskId> {
        (0..self.tasks.len()).map(TaskId)
    }

    pub fn task_by_name(&self, name: &str) -> Option<TaskId> {
        self.tasks.iter().position(|t| t.name == name).map(TaskId)
    }

    /// Tasks whose WCET is a genuine range, in task order.
    pub fn range_tasks(&self) -> Vec<TaskId> {
        self.task_ids()
            .filter(|id| self.task(*id).has_wcet_range())
            .collect()
    }

    /// Aperiodic tasks in task order; fixes gene ordering for the search.
    pub fn aperiodic_tasks(&self) -> Vec<TaskId> {
        self.task_ids()
            .filter(|id| !self.task(*id).is_periodic())
            .collect()
    }

    /// Derived horizon: LCM of periodic periods, extended to the largest
    /// aperiodic maximum inter-arrival when one exists.
    pub fn compute_sim_horizon(&self) -> Result<TimeValue, TimeError> {
        compute_sim_horizon_over(&self.tasks)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        validate(self)
    }
}

fn compute_sim_horizon_over(tasks: &[Task]) -> Result<TimeValue, TimeError> {
    let mut lcm = ZERO;
    let mut ap_max = ZERO;
    for task in tasks {
        match &task.kind {
            TaskKind::Periodic { period, .. } => lcm = lcm.lcm_with(*period)?,
            TaskKind::Aperiodic { max_gap, .. } => ap_max = ap_max.max(*max_gap),
        }
    }
    Ok(lcm.max(ap_max))
}

fn validate(spec: &SystemSpec) -> Result<(), SpecError> {
    if spec.tasks.is_empty() {
        return Err(invalid("system has no tasks"));
    }
    if spec.num_cores == 0 {
        return Err(invalid("cores must be >= 1"));
    }
    if spec.partitions.is_empty() {
        return Err(invalid("system has no partitions"));
    }
    let mut names = BTreeMap::new();
    for (i, t) in spec.tasks.iter().enumerate() {
        if names.insert(t.name.clone(), i).is_some() {
            return Err(invalid(format!("duplicate task id `{}`", t.name)));
        }
    }
    let mut part_names = BTreeMap::new();
    for (i, p) in spec.partitions.iter().enumerate() {
        if part_names.insert(p.name.clone(), i).is_some() {
            return Err(invalid(format!("duplicate partition id `{}`", p.name)));
        }
        if p.budget_bp == 0 {
            return Err(invalid(format!("partition `{}` budget must be > 0", p.name)));
        }
    }
    let total_bp: u64 = spec.partitions.iter().map(|p| p.budget_bp as u64).sum();
    if total_bp != 10_000 {
        return Err(invalid(format!(
            "partition budgets sum to {}%, expected 100%",
            total_bp as f64 / 100.0
        )));
    }

    for t in &spec.tasks {
        if t.wcet_min.is_zero() {
            return Err(task_err(&t.name, "minimum WCET must be > 0"));
        }
        if t.wcet_min > t.wcet_max {
            return Err(task_err(&t.name, "WCET range is inverted"));
        }
        if t.deadline < t.wcet_max {
            return Err(task_err(&t.name, "deadline < max WCET"));
        }
        match &t.kind {
            TaskKind::Periodic { period, .. } => {
                if period.is_zero() {
                    return Err(task_err(&t.name, "period must be > 0"));
                }
            }
            TaskKind::Aperiodic { min_gap, max_gap } => {
                if min_gap.is_zero() || min_gap > max_gap {
                    return Err(task_err(&t.name, "inter-arrival range must satisfy 0 < min <= max"));
                }
            }
        }
        if t.constraint.m >= t.constraint.k {
            return Err(task_err(&t.name, "constraint requires m < K"));
        }
        if t.partition.0 >= spec.partitions.len() {
            return Err(task_err(&t.name, "unknown partition"));
        }
        if let Some(core) = t.core_affinity {
            if core >= spec.num_cores {
                return Err(task_err(&t.name, format!("core affinity {core} out of range")));
            }
        }
    }

    for (i, p) in spec.partitions.iter().enumerate() {
        if !spec.tasks.iter().any(|t| t.partition.0 == i) {
            return Err(invalid(format!("partition `{}` has no tasks", p.name)));
        }
    }

    // Shared priorities are only allowed within a same-policy FIFO/RR group.
    let mut by_prio: BTreeMap<i64, Vec<&Task>> = BTreeMap::new();
    for t in &spec.tasks {
        by_prio.entry(t.priority).or_default().push(t);
    }
    for (prio, group) in &by_prio {
        if group.len() > 1 {
            let policy = group[0].policy;
            if policy == Policy::Preemptive || group.iter().any(|t| t.policy != policy) {
                return Err(invalid(format!(
                    "priority {prio} is shared by tasks without a common FIFO/RR policy"
                )));
            }
        }
    }

    let ctx = &spec.ctx;
    for (label, r) in [("startup", ctx.startup), ("exit", ctx.exit), ("ipi", ctx.ipi)] {
        if r.min > r.max {
            return Err(invalid(format!("context switch `{label}` range is inverted")));
        }
    }

    if spec.sched.tick.is_zero() || spec.sched.rr_timeslice.is_zero() {
        return Err(invalid("scheduler tick and rr_timeslice must be > 0"));
    }
    if spec.sched.partition_window.is_zero()
        || spec.sched.partition_window.units() % spec.sched.tick.units() != 0
    {
        return Err(invalid("partition window must be a positive multiple of the tick"));
    }

    if spec.sim_horizon.is_zero() {
        return Err(invalid("simulation horizon must be > 0"));
    }
    if spec.target_tasks.is_empty() {
        return Err(invalid("target_tasks must name at least one task"));
    }
    for id in &spec.target_tasks {
        if id.0 >= spec.tasks.len() {
            return Err(invalid("target_tasks references an unknown task"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// On-disk representation.

#[derive(Debug, Serialize, Deserialize)]
struct RawSystem {
    #[serde(default)]
    scheduler: RawScheduler,
    cores: usize,
    context_switch: RawContextSwitch,
    partitions: Vec<RawPartition>,
    tasks: Vec<RawTask>,
    target_tasks: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sim_horizon: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawScheduler {
    #[serde(default = "default_resolution")]
    resolution: String,
    #[serde(default = "default_window")]
    partition_window: String,
    #[serde(default = "default_timeslice")]
    rr_timeslice: String,
    #[serde(default = "default_tick")]
    tick: String,
}

fn default_resolution() -> String {
    "0.001".to_string()
}
fn default_window() -> String {
    "100".to_string()
}
fn default_timeslice() -> String {
    "4".to_string()
}
fn default_tick() -> String {
    "1".to_string()
}

impl Default for RawScheduler {
    fn default() -> Self {
        RawScheduler {
            resolution: default_resolution(),
            partition_window: default_window(),
            rr_timeslice: default_timeslice(),
            tick: default_tick(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawContextSwitch {
    startup: [String; 2],
    exit: [String; 2],
    ipi: [String; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPartition {
    id: String,
    budget_percent: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTask {
    id: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    offset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    period: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    inter_arrival: Option<[String; 2]>,
    wcet: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    deadline: Option<String>,
    priority: i64,
    #[serde(default = "default_policy")]
    policy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    constraint: Option<[u32; 2]>,
    partition: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    core_affinity: Option<usize>,
}

fn default_policy() -> String {
    "preemptive".to_string()
}

fn parse_ctx_range(scale: &TimeScale, pair: &[String; 2], label: &str) -> Result<CtxRange, SpecError> {
    let min = scale.parse_ms(&pair[0])?;
    let max = scale.parse_ms(&pair[1])?;
    if min > max {
        return Err(invalid(format!("context switch `{label}` range is inverted")));
    }
    Ok(CtxRange { min, max })
}

fn parse_wcet(scale: &TimeScale, raw: &serde_json::Value, task: &str) -> Result<(TimeValue, TimeValue), SpecError> {
    match raw {
        serde_json::Value::String(s) => {
            let c = scale.parse_ms(s)?;
            Ok((c, c))
        }
        serde_json::Value::Array(items) if items.len() == 2 => {
            let lo = items[0]
                .as_str()
                .ok_or_else(|| task_err(task, "wcet entries must be strings"))?;
            let hi = items[1]
                .as_str()
                .ok_or_else(|| task_err(task, "wcet entries must be strings"))?;
            Ok((scale.parse_ms(lo)?, scale.parse_ms(hi)?))
        }
        _ => Err(task_err(task, "wcet must be a string or a [min, max] pair")),
    }
}

/// Converts the raw document into a validated spec.
fn from_raw(raw: RawSystem) -> Result<SystemSpec, SpecError> {
    let scale = TimeScale::from_resolution_ms(&raw.scheduler.resolution)?;
    let sched = SchedConfig {
        partition_window: scale.parse_ms(&raw.scheduler.partition_window)?,
        rr_timeslice: scale.parse_ms(&raw.scheduler.rr_timeslice)?,
        tick: scale.parse_ms(&raw.scheduler.tick)?,
    };
    let ctx = ContextSwitchRanges {
        startup: parse_ctx_range(&scale, &raw.context_switch.startup, "startup")?,
        exit: parse_ctx_range(&scale, &raw.context_switch.exit, "exit")?,
        ipi: parse_ctx_range(&scale, &raw.context_switch.ipi, "ipi")?,
    };

    let mut partitions = Vec::with_capacity(raw.partitions.len());
    for p in &raw.partitions {
        let bp = (p.budget_percent * 100.0).round();
        if !(p.budget_percent > 0.0) || (bp / 100.0 - p.budget_percent).abs() > 1e-9 {
            return Err(invalid(format!(
                "partition `{}` budget {} is not a multiple of 0.01%",
                p.id, p.budget_percent
            )));
        }
        partitions.push(PartitionSpec {
            name: p.id.clone(),
            budget_bp: bp as u32,
        });
    }

    let part_index: BTreeMap<&str, usize> = partitions
        .iter()
        .enumerate()
        .map(|(i, p)| (p.name.as_str(), i))
        .collect();

    let mut tasks = Vec::with_capacity(raw.tasks.len());
    for rt in &raw.tasks {
        let kind = match rt.kind.as_str() {
            "periodic" => {
                let period = rt
                    .period
                    .as_deref()
                    .ok_or_else(|| task_err(&rt.id, "periodic task requires `period`"))?;
                if rt.inter_arrival.is_some() {
                    return Err(task_err(&rt.id, "periodic task cannot set `inter_arrival`"));
                }
                TaskKind::Periodic {
                    offset: match rt.offset.as_deref() {
                        Some(o) => scale.parse_ms(o)?,
                        None => ZERO,
                    },
                    period: scale.parse_ms(period)?,
                }
            }
            "aperiodic" => {
                let gaps = rt
                    .inter_arrival
                    .as_ref()
                    .ok_or_else(|| task_err(&rt.id, "aperiodic task requires `inter_arrival`"))?;
                if rt.offset.is_some() || rt.period.is_some() {
                    return Err(task_err(&rt.id, "aperiodic task cannot set `offset` or `period`"));
                }
                TaskKind::Aperiodic {
                    min_gap: scale.parse_ms(&gaps[0])?,
                    max_gap: scale.parse_ms(&gaps[1])?,
                }
            }
            other => return Err(task_err(&rt.id, format!("unknown kind `{other}`"))),
        };
        let (wcet_min, wcet_max) = parse_wcet(&scale, &rt.wcet, &rt.id)?;
        // Deadline defaults to the period (periodic) or the minimum
        // inter-arrival (aperiodic) when omitted.
        let deadline = match rt.deadline.as_deref() {
            Some(d) => scale.parse_ms(d)?,
            None => match &kind {
                TaskKind::Periodic { period, .. } => *period,
                TaskKind::Aperiodic { min_gap, .. } => *min_gap,
            },
        };
        let policy = Policy::parse(&rt.policy)
            .ok_or_else(|| task_err(&rt.id, format!("unknown policy `{}`", rt.policy)))?;
        let constraint = match rt.constraint {
            Some([m, k]) => Constraint { m, k },
            None => Constraint { m: 0, k: 1 },
        };
        let partition = PartitionId(
            *part_index
                .get(rt.partition.as_str())
                .ok_or_else(|| task_err(&rt.id, format!("unknown partition `{}`", rt.partition)))?,
        );
        tasks.push(Task {
            name: rt.id.clone(),
            kind,
            wcet_min,
            wcet_max,
            deadline,
            priority: rt.priority,
            policy,
            constraint,
            partition,
            core_affinity: rt.core_affinity,
        });
    }

    let mut target_tasks = Vec::with_capacity(raw.target_tasks.len());
    for name in &raw.target_tasks {
        let idx = tasks
            .iter()
            .position(|t| &t.name == name)
            .ok_or_else(|| invalid(format!("target task `{name}` does not exist")))?;
        target_tasks.push(TaskId(idx));
    }

    let (sim_horizon, explicit_horizon) = match raw.sim_horizon.as_deref() {
        Some(h) => (scale.parse_ms(h)?, true),
        None => (compute_sim_horizon_over(&tasks)?, false),
    };

    let spec = SystemSpec {
        scale,
        tasks,
        partitions,
        num_cores: raw.cores,
        ctx,
        sched,
        sim_horizon,
        explicit_horizon,
        target_tasks,
    };
    spec.validate()?;
    Ok(spec)
}

fn to_raw(spec: &SystemSpec) -> RawSystem {
    let scale = &spec.scale;
    let fmt = |t: TimeValue| scale.format(t);
    RawSystem {
        scheduler: RawScheduler {
            resolution: scale.resolution_ms_string(),
            partition_window: fmt(spec.sched.partition_window),
            rr_timeslice: fmt(spec.sched.rr_timeslice),
            tick: fmt(spec.sched.tick),
        },
        cores: spec.num_cores,
        context_switch: RawContextSwitch {
            startup: [fmt(spec.ctx.startup.min), fmt(spec.ctx.startup.max)],
            exit: [fmt(spec.ctx.exit.min), fmt(spec.ctx.exit.max)],
            ipi: [fmt(spec.ctx.ipi.min), fmt(spec.ctx.ipi.max)],
        },
        partitions: spec
            .partitions
            .iter()
            .map(|p| RawPartition {
                id: p.name.clone(),
                budget_percent: p.budget_bp as f64 / 100.0,
            })
            .collect(),
        tasks: spec
            .tasks
            .iter()
            .map(|t| {
                let (kind, offset, period, inter_arrival) = match &t.kind {
                    TaskKind::Periodic { offset, period } => (
                        "periodic".to_string(),
                        Some(fmt(*offset)),
                        Some(fmt(*period)),
                        None,
                    ),
                    TaskKind::Aperiodic { min_gap, max_gap } => (
                        "aperiodic".to_string(),
                        None,
                        None,
                        Some([fmt(*min_gap), fmt(*max_gap)]),
                    ),
                };
                RawTask {
                    id: t.name.clone(),
                    kind,
                    offset,
                    period,
                    inter_arrival,
                    wcet: if t.wcet_min == t.wcet_max {
                        serde_json::Value::String(fmt(t.wcet_min))
                    } else {
                        serde_json::json!([fmt(t.wcet_min), fmt(t.wcet_max)])
                    },
                    deadline: Some(fmt(t.deadline)),
                    priority: t.priority,
                    policy: t.policy.as_str().to_string(),
                    constraint: Some([t.constraint.m, t.constraint.k]),
                    partition: spec.partitions[t.partition.0].name.clone(),
                    core_affinity: t.core_affinity,
                }
            })
            .collect(),
        target_tasks: spec
            .target_tasks
            .iter()
            .map(|id| spec.task(*id).name.clone())
            .collect(),
        sim_horizon: spec
            .explicit_horizon
            .then(|| fmt(spec.sim_horizon)),
    }
}

pub fn load_system(path: impl AsRef<Path>) -> Result<SystemSpec, SpecError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_system(&text)
}

pub fn parse_system(text: &str) -> Result<SystemSpec, SpecError> {
    let raw: RawSystem = serde_json::from_str(text)?;
    from_raw(raw)
}

pub fn system_to_json(spec: &SystemSpec) -> String {
    let mut out = serde_json::to_string_pretty(&to_raw(spec)).expect("system serializes");
    out.push('\n');
    out
}

pub fn save_system(spec: &SystemSpec, path: impl AsRef<Path>) -> Result<(), SpecError> {
    let path = path.as_ref();
    std::fs::write(path, system_to_json(spec)).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })
}
