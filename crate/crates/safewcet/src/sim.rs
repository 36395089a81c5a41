//! Discrete-event simulator for an adaptive-partitioning, priority-driven
//! preemptive scheduler on a multi-core platform.
//!
//! The engine is a pure function of (system, test case, WCET assignment).
//! Scheduling decisions happen at event instants (arrivals, phase
//! completions, timeslice expiries, tick boundaries); the tick only
//! quantizes partition budget ledgers.
//!
//! Frozen semantics, verified against the golden trace fixture:
//! - dispatch charges startup time, and additionally the IPI overhead when
//!   the same job resumes on a different core than it last executed on;
//! - every transition out of execution (completion, preemption, timeslice
//!   rotation) charges exit time on the vacated core;
//! - startup and exit phases are non-preemptible;
//! - the preemption victim is the running job with the worst
//!   (budget class, priority) pair, considering only cores the preemptor
//!   may occupy;
//! - dispatch prefers the job's previous core when free, else the lowest
//!   free core index; at equal instants exits are processed before
//!   arrivals, and arrivals in task order.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Policy, SystemSpec, TaskId, TaskKind};
use crate::time::TimeValue;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("invalid test case: {0}")]
    InvalidTestCase(String),
    #[error("invalid WCET assignment: {0}")]
    InvalidWcet(String),
}

/// One execution-time value per task, within the declared WCET range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WcetAssignment(pub Vec<TimeValue>);

impl WcetAssignment {
    pub fn get(&self, id: TaskId) -> TimeValue {
        self.0[id.0]
    }

    pub fn validate(&self, spec: &SystemSpec) -> Result<(), SimError> {
        if self.0.len() != spec.tasks.len() {
            return Err(SimError::InvalidWcet(format!(
                "expected {} entries, got {}",
                spec.tasks.len(),
                self.0.len()
            )));
        }
        for (i, (c, t)) in self.0.iter().zip(&spec.tasks).enumerate() {
            if *c < t.wcet_min || *c > t.wcet_max {
                return Err(SimError::InvalidWcet(format!(
                    "task `{}` (index {i}) WCET outside its range",
                    t.name
                )));
            }
        }
        Ok(())
    }

    /// Uniform draw inside every task's WCET range.
    pub fn sample(spec: &SystemSpec, rng: &mut impl Rng) -> WcetAssignment {
        WcetAssignment(
            spec.tasks
                .iter()
                .map(|t| {
                    TimeValue::from_units(rng.random_range(t.wcet_min.units()..=t.wcet_max.units()))
                })
                .collect(),
        )
    }
}

/// One search solution: the three context-switch scalars plus the aperiodic
/// arrival sequences. Periodic arrivals are fully determined by the system
/// (offset + multiples of the period below the horizon) and are derived.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub startup: TimeValue,
    pub exit: TimeValue,
    pub ipi: TimeValue,
    pub arrivals: BTreeMap<TaskId, Vec<TimeValue>>,
}

impl TestCase {
    /// All arrivals of a task below the horizon, in order.
    pub fn arrivals_for(&self, spec: &SystemSpec, id: TaskId) -> Vec<TimeValue> {
        match &spec.task(id).kind {
            TaskKind::Periodic { offset, period } => {
                let mut out = Vec::new();
                let mut a = offset.units();
                while a < spec.sim_horizon.units() {
                    out.push(TimeValue::from_units(a));
                    a += period.units();
                }
                out
            }
            TaskKind::Aperiodic { .. } => self.arrivals.get(&id).cloned().unwrap_or_default(),
        }
    }

    pub fn validate(&self, spec: &SystemSpec) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidTestCase(msg));
        if !spec.ctx.startup.contains(self.startup)
            || !spec.ctx.exit.contains(self.exit)
            || !spec.ctx.ipi.contains(self.ipi)
        {
            return bad("context-switch time outside its range".into());
        }
        let horizon = spec.sim_horizon.units();
        for id in spec.task_ids() {
            let task = spec.task(id);
            let TaskKind::Aperiodic { min_gap, max_gap } = &task.kind else {
                if self.arrivals.contains_key(&id) {
                    return bad(format!("task `{}` is periodic but has stored arrivals", task.name));
                }
                continue;
            };
            let Some(seq) = self.arrivals.get(&id) else {
                return bad(format!("missing arrival sequence for `{}`", task.name));
            };
            let (lo, hi) = (min_gap.units(), max_gap.units());
            let mut prev = 0i64;
            for (k, a) in seq.iter().enumerate() {
                let gap = a.units() - prev;
                if gap < lo || gap > hi {
                    return bad(format!(
                        "task `{}` arrival {} breaks the inter-arrival range",
                        task.name,
                        k + 1
                    ));
                }
                if a.units() >= horizon {
                    return bad(format!("task `{}` arrival beyond the horizon", task.name));
                }
                prev = a.units();
            }
            // Maximality: no further valid arrival fits before the horizon.
            if prev + lo < horizon {
                return bad(format!("task `{}` arrival sequence is not maximal", task.name));
            }
        }
        Ok(())
    }

    /// Random valid test case: uniform context scalars, gap-by-gap uniform
    /// aperiodic sequences. Gap draws clamp to the horizon so the sequence
    /// stays maximal.
    pub fn sample(spec: &SystemSpec, rng: &mut impl Rng) -> TestCase {
        let startup = draw_ctx(rng, spec.ctx.startup);
        let exit = draw_ctx(rng, spec.ctx.exit);
        let ipi = draw_ctx(rng, spec.ctx.ipi);
        let mut arrivals = BTreeMap::new();
        for id in spec.aperiodic_tasks() {
            let TaskKind::Aperiodic { min_gap, max_gap } = spec.task(id).kind else {
                unreachable!()
            };
            arrivals.insert(
                id,
                sample_arrival_sequence(min_gap.units(), max_gap.units(), spec.sim_horizon.units(), rng),
            );
        }
        TestCase { startup, exit, ipi, arrivals }
    }
}

fn draw_ctx(rng: &mut impl Rng, r: crate::model::CtxRange) -> TimeValue {
    TimeValue::from_units(rng.random_range(r.min.units()..=r.max.units()))
}

/// Gap-by-gap uniform arrival sequence on `[0, horizon)`, maximal.
pub fn sample_arrival_sequence(
    min_gap: i64,
    max_gap: i64,
    horizon: i64,
    rng: &mut impl Rng,
) -> Vec<TimeValue> {
    let mut seq = Vec::new();
    let mut prev = 0i64;
    loop {
        let lo = prev + min_gap;
        if lo >= horizon {
            break;
        }
        let hi = (prev + max_gap).min(horizon - 1);
        let a = rng.random_range(lo..=hi);
        seq.push(TimeValue::from_units(a));
        prev = a;
    }
    seq
}

/// One completed arrival: the task, its arrival instant, and the instant the
/// job fully left the processor (including its exit overhead).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioTuple {
    pub task: TaskId,
    pub arrival: TimeValue,
    pub end: TimeValue,
}

/// Completed schedule: one tuple per arrival, grouped by task in task order
/// and ordered by arrival index within a task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleScenario {
    pub tuples: Vec<ScenarioTuple>,
}

impl ScheduleScenario {
    pub fn tuples_for(&self, task: TaskId) -> impl Iterator<Item = &ScenarioTuple> {
        self.tuples.iter().filter(move |t| t.task == task)
    }
}

/// Per-core execution intervals, for trace-level property checks.
#[derive(Debug, Clone, Default)]
pub struct ExecTrace {
    /// Closed-open busy intervals per core (any occupancy phase).
    pub core_busy: Vec<Vec<(i64, i64)>>,
    /// Intervals a job spent ready but not dispatched: (task, from, to).
    pub ready_waits: Vec<(TaskId, i64, i64)>,
}

pub fn simulate(
    spec: &SystemSpec,
    tc: &TestCase,
    w: &WcetAssignment,
) -> Result<ScheduleScenario, SimError> {
    simulate_with_trace(spec, tc, w).map(|(s, _)| s)
}

pub fn simulate_with_trace(
    spec: &SystemSpec,
    tc: &TestCase,
    w: &WcetAssignment,
) -> Result<(ScheduleScenario, ExecTrace), SimError> {
    tc.validate(spec)?;
    w.validate(spec)?;
    Ok(Engine::new(spec, tc, w).run())
}

// ---------------------------------------------------------------------------
// Engine internals.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExitOutcome {
    Done,
    Requeue { new_seq: Option<u64> },
}

#[derive(Debug, Clone, Copy)]
enum Occupant {
    Startup { job: usize, end: i64 },
    Exec { job: usize, exec_end: i64, slice_end: Option<i64>, started_at: i64 },
    Exit { job: usize, end: i64, outcome: ExitOutcome },
}

impl Occupant {
    fn job(&self) -> usize {
        match self {
            Occupant::Startup { job, .. } | Occupant::Exec { job, .. } | Occupant::Exit { job, .. } => {
                *job
            }
        }
    }

    fn next_end(&self) -> i64 {
        match self {
            Occupant::Startup { end, .. } | Occupant::Exit { end, .. } => *end,
            Occupant::Exec { exec_end, slice_end, .. } => match slice_end {
                Some(s) => (*s).min(*exec_end),
                None => *exec_end,
            },
        }
    }
}

struct Job {
    task: usize,
    arrival: i64,
    remaining: i64,
    prev_core: Option<usize>,
    started: bool,
    queue_seq: u64,
    ready_since: i64,
}

struct TaskRt {
    arrivals: Vec<i64>,
    next_idx: usize,
    active: Option<usize>,
    pending: VecDeque<i64>,
    results: Vec<(i64, i64)>,
}

struct Ledger {
    window_ticks: usize,
    tick: i64,
    budget_units: Vec<i64>,
    ring: Vec<Vec<i64>>,
    window_sum: Vec<i64>,
    bucket: Vec<i64>,
    closed_ticks: i64,
    exhausted: Vec<bool>,
}

impl Ledger {
    fn new(spec: &SystemSpec) -> Option<Ledger> {
        if spec.partitions.len() <= 1 {
            return None;
        }
        let tick = spec.sched.tick.units();
        let window = spec.sched.partition_window.units();
        let window_ticks = (window / tick) as usize;
        let budget_units = spec
            .partitions
            .iter()
            .map(|p| {
                ((p.budget_bp as i128 * window as i128 * spec.num_cores as i128) / 10_000) as i64
            })
            .collect();
        let n = spec.partitions.len();
        Some(Ledger {
            window_ticks,
            tick,
            budget_units,
            ring: vec![vec![0; window_ticks]; n],
            window_sum: vec![0; n],
            bucket: vec![0; n],
            closed_ticks: 0,
            exhausted: vec![false; n],
        })
    }

    fn charge(&mut self, partition: usize, amount: i64) {
        self.bucket[partition] += amount;
    }

    /// Closes every tick boundary at or before `now`.
    fn advance_to(&mut self, now: i64) {
        while (self.closed_ticks + 1) * self.tick <= now {
            let slot = (self.closed_ticks as usize) % self.window_ticks;
            for p in 0..self.bucket.len() {
                self.window_sum[p] += self.bucket[p] - self.ring[p][slot];
                self.ring[p][slot] = self.bucket[p];
                self.bucket[p] = 0;
                self.exhausted[p] = self.window_sum[p] >= self.budget_units[p];
            }
            self.closed_ticks += 1;
        }
    }
}

struct Engine<'a> {
    spec: &'a SystemSpec,
    wcets: Vec<i64>,
    lambda_s: i64,
    lambda_x: i64,
    lambda_p: i64,
    timeslice: i64,
    now: i64,
    jobs: Vec<Job>,
    tasks: Vec<TaskRt>,
    cores: Vec<Option<Occupant>>,
    ready: Vec<usize>,
    seq: u64,
    ledger: Option<Ledger>,
    last_accrual: i64,
    trace: ExecTrace,
    core_busy_since: Vec<Option<i64>>,
}

impl<'a> Engine<'a> {
    fn new(spec: &'a SystemSpec, tc: &TestCase, w: &WcetAssignment) -> Engine<'a> {
        let tasks = spec
            .task_ids()
            .map(|id| TaskRt {
                arrivals: tc.arrivals_for(spec, id).iter().map(|t| t.units()).collect(),
                next_idx: 0,
                active: None,
                pending: VecDeque::new(),
                results: Vec::new(),
            })
            .collect();
        Engine {
            spec,
            wcets: w.0.iter().map(|c| c.units()).collect(),
            lambda_s: tc.startup.units(),
            lambda_x: tc.exit.units(),
            lambda_p: tc.ipi.units(),
            timeslice: spec.sched.rr_timeslice.units(),
            now: 0,
            jobs: Vec::new(),
            tasks,
            cores: vec![None; spec.num_cores],
            ready: Vec::new(),
            seq: 0,
            ledger: Ledger::new(spec),
            last_accrual: 0,
            trace: ExecTrace {
                core_busy: vec![Vec::new(); spec.num_cores],
                ready_waits: Vec::new(),
            },
            core_busy_since: vec![None; spec.num_cores],
        }
    }

    fn run(mut self) -> (ScheduleScenario, ExecTrace) {
        self.process_instant();
        while let Some(t) = self.next_time() {
            debug_assert!(t > self.now);
            self.now = t;
            self.process_instant();
        }
        let mut tuples = Vec::new();
        for (i, rt) in self.tasks.iter().enumerate() {
            debug_assert_eq!(rt.results.len(), rt.arrivals.len());
            for &(a, e) in &rt.results {
                tuples.push(ScenarioTuple {
                    task: TaskId(i),
                    arrival: TimeValue::from_units(a),
                    end: TimeValue::from_units(e),
                });
            }
        }
        (ScheduleScenario { tuples }, self.trace)
    }

    fn next_time(&self) -> Option<i64> {
        let mut next: Option<i64> = None;
        let mut fold = |t: i64| {
            next = Some(match next {
                Some(n) => n.min(t),
                None => t,
            })
        };
        let mut any_busy = false;
        for occ in self.cores.iter().flatten() {
            any_busy = true;
            fold(occ.next_end());
        }
        for rt in &self.tasks {
            if rt.next_idx < rt.arrivals.len() {
                fold(rt.arrivals[rt.next_idx]);
            }
        }
        if any_busy {
            if let Some(ledger) = &self.ledger {
                fold((self.now / ledger.tick + 1) * ledger.tick);
            }
        }
        next
    }

    fn process_instant(&mut self) {
        self.accrue();
        self.process_phase_ends();
        self.process_arrivals();
        self.decide();
    }

    /// Charges core occupancy since the last accrual to the budget ledger
    /// and closes any passed tick boundaries.
    fn accrue(&mut self) {
        let span = self.now - self.last_accrual;
        if let Some(ledger) = &mut self.ledger {
            if span > 0 {
                for occ in self.cores.iter().flatten() {
                    let partition = self.spec.tasks[self.jobs[occ.job()].task].partition.0;
                    ledger.charge(partition, span);
                }
            }
            ledger.advance_to(self.now);
        }
        self.last_accrual = self.now;
    }

    fn exhausted(&self, partition: usize) -> bool {
        self.ledger
            .as_ref()
            .map(|l| l.exhausted[partition])
            .unwrap_or(false)
    }

    fn class_of_job(&self, job: usize) -> u8 {
        self.exhausted(self.spec.tasks[self.jobs[job].task].partition.0) as u8
    }

    fn process_phase_ends(&mut self) {
        loop {
            let mut changed = false;
            for core in 0..self.cores.len() {
                let Some(occ) = self.cores[core] else { continue };
                match occ {
                    Occupant::Startup { job, end } if end == self.now => {
                        let remaining = self.jobs[job].remaining;
                        let slice_end = (self.spec.tasks[self.jobs[job].task].policy
                            == Policy::RoundRobin)
                            .then(|| self.now + self.timeslice);
                        self.jobs[job].started = true;
                        self.jobs[job].prev_core = Some(core);
                        self.cores[core] = Some(Occupant::Exec {
                            job,
                            exec_end: self.now + remaining,
                            slice_end,
                            started_at: self.now,
                        });
                        changed = true;
                    }
                    Occupant::Exec { job, exec_end, slice_end, started_at } => {
                        if exec_end == self.now {
                            self.jobs[job].remaining = 0;
                            self.cores[core] = Some(Occupant::Exit {
                                job,
                                end: self.now + self.lambda_x,
                                outcome: ExitOutcome::Done,
                            });
                            changed = true;
                        } else if slice_end == Some(self.now) {
                            if self.should_rotate(job, core) {
                                self.jobs[job].remaining = exec_end - self.now;
                                debug_assert!(self.jobs[job].remaining > 0);
                                self.cores[core] = Some(Occupant::Exit {
                                    job,
                                    end: self.now + self.lambda_x,
                                    outcome: ExitOutcome::Requeue { new_seq: Some(self.next_seq()) },
                                });
                            } else {
                                self.cores[core] = Some(Occupant::Exec {
                                    job,
                                    exec_end,
                                    slice_end: Some(self.now + self.timeslice),
                                    started_at,
                                });
                            }
                            changed = true;
                        }
                    }
                    Occupant::Exit { job, end, outcome } if end == self.now => {
                        self.free_core(core);
                        match outcome {
                            ExitOutcome::Done => self.complete_job(job),
                            ExitOutcome::Requeue { new_seq } => {
                                if let Some(seq) = new_seq {
                                    self.jobs[job].queue_seq = seq;
                                }
                                self.jobs[job].ready_since = self.now;
                                self.ready.push(job);
                            }
                        }
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn should_rotate(&self, job: usize, core: usize) -> bool {
        let runner = &self.jobs[job];
        let prio = self.spec.tasks[runner.task].priority;
        let runner_class = self.class_of_job(job);
        self.ready.iter().any(|&j| {
            let t = &self.spec.tasks[self.jobs[j].task];
            t.priority == prio
                && t.policy == Policy::RoundRobin
                && t.core_affinity.map(|c| c == core).unwrap_or(true)
                && self.class_of_job(j) <= runner_class
        })
    }

    fn complete_job(&mut self, job: usize) {
        let task = self.jobs[job].task;
        self.tasks[task]
            .results
            .push((self.jobs[job].arrival, self.now));
        self.tasks[task].active = None;
        if let Some(&arrival) = self.tasks[task].pending.front() {
            debug_assert!(arrival <= self.now);
            self.tasks[task].pending.pop_front();
            self.activate(task, arrival);
        }
    }

    fn process_arrivals(&mut self) {
        for task in 0..self.tasks.len() {
            while self.tasks[task].next_idx < self.tasks[task].arrivals.len()
                && self.tasks[task].arrivals[self.tasks[task].next_idx] == self.now
            {
                self.tasks[task].next_idx += 1;
                if self.tasks[task].active.is_none() {
                    self.activate(task, self.now);
                } else {
                    self.tasks[task].pending.push_back(self.now);
                }
            }
        }
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn activate(&mut self, task: usize, arrival: i64) {
        let seq = self.next_seq();
        let job = self.jobs.len();
        self.jobs.push(Job {
            task,
            arrival,
            remaining: self.wcets[task],
            prev_core: None,
            started: false,
            queue_seq: seq,
            ready_since: self.now,
        });
        self.tasks[task].active = Some(job);
        self.ready.push(job);
    }

    /// Ordering key: budget class, then priority (higher first), then FIFO
    /// queue position, then task index.
    fn ready_key(&self, job: usize) -> (u8, i64, u64, usize) {
        let j = &self.jobs[job];
        (
            self.class_of_job(job),
            -self.spec.tasks[j.task].priority,
            j.queue_seq,
            j.task,
        )
    }

    fn allowed(&self, job: usize, core: usize) -> bool {
        self.spec.tasks[self.jobs[job].task]
            .core_affinity
            .map(|c| c == core)
            .unwrap_or(true)
    }

    fn decide(&mut self) {
        if self.ready.is_empty() {
            return;
        }
        let mut order: Vec<usize> = self.ready.clone();
        order.sort_by_key(|&j| self.ready_key(j));
        let mut budgeted_waiting = false;
        for job in order {
            let class = self.class_of_job(job);
            // Free-time rule: exhausted partitions run only when no task
            // from a budgeted partition is left waiting.
            if class == 1 && budgeted_waiting {
                continue;
            }
            if let Some(core) = self.pick_free_core(job) {
                self.dispatch(job, core);
                continue;
            }
            if let Some(core) = self.pick_victim(job, class) {
                let Some(Occupant::Exec { job: victim, exec_end, .. }) = self.cores[core] else {
                    unreachable!()
                };
                self.jobs[victim].remaining = exec_end - self.now;
                debug_assert!(self.jobs[victim].remaining > 0);
                self.cores[core] = Some(Occupant::Exit {
                    job: victim,
                    end: self.now + self.lambda_x,
                    outcome: ExitOutcome::Requeue { new_seq: None },
                });
                if self.lambda_x == 0 {
                    // Zero exit overhead frees the core at this very instant.
                    self.free_core(core);
                    self.jobs[victim].ready_since = self.now;
                    self.ready.push(victim);
                    self.dispatch(job, core);
                    continue;
                }
            }
            if class == 0 {
                budgeted_waiting = true;
            }
        }
    }

    fn pick_free_core(&self, job: usize) -> Option<usize> {
        let prev = self.jobs[job].prev_core;
        if let Some(core) = prev {
            if self.cores[core].is_none() && self.allowed(job, core) {
                return Some(core);
            }
        }
        (0..self.cores.len()).find(|&c| self.cores[c].is_none() && self.allowed(job, c))
    }

    /// Chooses the worst strictly-worse running victim on an allowed core.
    fn pick_victim(&self, job: usize, class: u8) -> Option<usize> {
        let prio = self.spec.tasks[self.jobs[job].task].priority;
        let mut worst: Option<(u8, i64, usize)> = None;
        for core in 0..self.cores.len() {
            if !self.allowed(job, core) {
                continue;
            }
            let Some(Occupant::Exec { job: victim, .. }) = self.cores[core] else {
                continue;
            };
            let vclass = self.class_of_job(victim);
            let vprio = self.spec.tasks[self.jobs[victim].task].priority;
            let strictly_worse = vclass > class || (vclass == class && vprio < prio);
            if !strictly_worse {
                continue;
            }
            // Worst victim: highest class first, then lowest priority,
            // then lowest core index.
            let key = (vclass, -vprio, core);
            let better = match worst {
                Some((wc, wp, _)) => (key.0, key.1) > (wc, wp),
                None => true,
            };
            if better {
                worst = Some((key.0, key.1, core));
            }
        }
        worst.map(|(_, _, core)| core)
    }

    fn dispatch(&mut self, job: usize, core: usize) {
        self.ready.retain(|&j| j != job);
        let (task, ready_since, started, prev_core, remaining) = {
            let j = &self.jobs[job];
            (j.task, j.ready_since, j.started, j.prev_core, j.remaining)
        };
        if ready_since < self.now {
            self.trace.ready_waits.push((TaskId(task), ready_since, self.now));
        }
        let migration = started && prev_core != Some(core);
        let overhead = self.lambda_s + if migration { self.lambda_p } else { 0 };
        self.occupy_core(core);
        if overhead == 0 {
            let slice_end = (self.spec.tasks[task].policy == Policy::RoundRobin)
                .then(|| self.now + self.timeslice);
            self.jobs[job].started = true;
            self.jobs[job].prev_core = Some(core);
            self.cores[core] = Some(Occupant::Exec {
                job,
                exec_end: self.now + remaining,
                slice_end,
                started_at: self.now,
            });
        } else {
            self.cores[core] = Some(Occupant::Startup { job, end: self.now + overhead });
        }
    }

    fn occupy_core(&mut self, core: usize) {
        debug_assert!(self.cores[core].is_none());
        self.core_busy_since[core] = Some(self.now);
    }

    fn free_core(&mut self, core: usize) {
        if let Some(since) = self.core_busy_since[core].take() {
            if since < self.now {
                self.trace.core_busy[core].push((since, self.now));
            }
        }
        self.cores[core] = None;
    }
}

// ---------------------------------------------------------------------------
// Schedulability checking.

/// Outcome of the weakly hard constraint check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Schedulable,
    /// First offending task and the arrival index opening the violating
    /// window (the first miss of the too-long run).
    Violated { task: TaskId, window_start: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Safe,
    Unsafe,
}

/// Miss pattern of one task over a scenario: true = deadline miss.
pub fn miss_pattern(spec: &SystemSpec, scenario: &ScheduleScenario, task: TaskId) -> Vec<bool> {
    let deadline = spec.task(task).deadline;
    scenario
        .tuples_for(task)
        .map(|t| t.end.signed_diff(t.arrival + deadline) > 0)
        .collect()
}

/// A pattern violates (m, K) iff some window of min(K, len) consecutive
/// arrivals contains a run of more than m consecutive misses; equivalently,
/// iff the longest miss run exceeds m (m < K makes the forms coincide).
pub fn pattern_violates(pattern: &[bool], m: u32) -> Option<usize> {
    let mut run = 0usize;
    for (i, &miss) in pattern.iter().enumerate() {
        if miss {
            run += 1;
            if run == m as usize + 1 {
                return Some(i - m as usize);
            }
        } else {
            run = 0;
        }
    }
    None
}

pub fn check_schedulability(
    spec: &SystemSpec,
    scenario: &ScheduleScenario,
    targets: &[TaskId],
) -> Result<Verdict, SimError> {
    for &task in targets {
        if task.0 >= spec.tasks.len() {
            return Err(SimError::UnknownTask(format!("index {}", task.0)));
        }
        let pattern = miss_pattern(spec, scenario, task);
        if let Some(window_start) = pattern_violates(&pattern, spec.task(task).constraint.m) {
            return Ok(Verdict::Violated { task, window_start });
        }
    }
    Ok(Verdict::Schedulable)
}

pub fn label(
    spec: &SystemSpec,
    scenario: &ScheduleScenario,
    targets: &[TaskId],
) -> Result<Label, SimError> {
    Ok(match check_schedulability(spec, scenario, targets)? {
        Verdict::Schedulable => Label::Safe,
        Verdict::Violated { .. } => Label::Unsafe,
    })
}
