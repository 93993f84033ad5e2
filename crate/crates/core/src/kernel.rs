//! Event-driven simulation core: virtual cycle clock, ordered event queue,
//! seeded randomness for contention noise, and the trace stream.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::HartId;

/// Nominal core clock used to convert cycles into seconds in reports.
pub const NOMINAL_CLOCK_HZ: u64 = 100_000_000;

/// CPU cycles since simulation start.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const NEVER: SimTime = SimTime(u64::MAX);

    pub fn cycles(self) -> u64 {
        self.0
    }

    pub fn plus(self, cycles: u64) -> SimTime {
        SimTime(self.0.saturating_add(cycles))
    }

    pub fn since(self, earlier: SimTime) -> u64 {
        self.0.saturating_sub(earlier.0)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NOMINAL_CLOCK_HZ as f64
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// What an event does when it is dispatched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    /// Try to take pending interrupts on a hart.
    Deliver { hart: HartId },
    /// A CLINT comparator may have expired.
    TimerDeadline { hart: HartId },
    /// A wired interrupt source raises its line.
    WireAssert { source: u32 },
    /// Periodic memory traffic from the load generator.
    LoadTick { hart: HartId },
    /// Workload continuation.
    Wake { hart: HartId, token: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub due: SimTime,
    pub sequence: u64,
    pub action: Action,
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.due, self.sequence).cmp(&(other.due, other.sequence))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("past event: due {due} is before current time {now}")]
    PastEvent { due: SimTime, now: SimTime },
    #[error("contention level {0} outside [0, 1]")]
    BadLevel(f64),
    #[error("invalid contention model: {0}")]
    BadModel(&'static str),
}

/// Priority queue ordered by `(due, sequence)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    now: SimTime,
    next_sequence: u64,
    heap: BinaryHeap<Reverse<Event>>,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn try_schedule(&mut self, due: SimTime, action: Action) -> Result<u64, KernelError> {
        if due < self.now {
            return Err(KernelError::PastEvent { due, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Reverse(Event {
            due,
            sequence,
            action,
        }));
        Ok(sequence)
    }

    /// Enqueue an action. Scheduling before the current time is a bug in
    /// the caller and aborts the run.
    pub fn schedule(&mut self, due: SimTime, action: Action) -> u64 {
        match self.try_schedule(due, action) {
            Ok(seq) => seq,
            Err(e) => panic!("{e}"),
        }
    }

    /// Pops the earliest event and moves the clock to it. `None` marks the
    /// end of the simulation.
    pub fn advance(&mut self) -> Option<Event> {
        let Reverse(ev) = self.heap.pop()?;
        debug_assert!(ev.due >= self.now);
        self.now = ev.due;
        Some(ev)
    }
}

/// Bounded heavy-tailed contention distribution: with probability `p_hit`
/// a uniform draw from `[min_tail, max_tail]`, otherwise a uniform draw from
/// `[0, small_bound]`. The draw is scaled by the contention level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContentionModel {
    pub p_hit: f64,
    pub small_bound: u64,
    pub min_tail: u64,
    pub max_tail: u64,
}

impl Default for ContentionModel {
    fn default() -> Self {
        // Two tail hits on one emulated PLIC access (hypervisor handler plus
        // the device access itself) land near 16k cycles in total.
        Self {
            p_hit: 0.05,
            small_bound: 40,
            min_tail: 2_000,
            max_tail: 8_000,
        }
    }
}

impl ContentionModel {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(0.0..=1.0).contains(&self.p_hit) {
            return Err(KernelError::BadModel("p_hit must be in [0, 1]"));
        }
        if self.min_tail > self.max_tail {
            return Err(KernelError::BadModel("min_tail exceeds max_tail"));
        }
        if self.small_bound > self.max_tail {
            return Err(KernelError::BadModel("small_bound exceeds max_tail"));
        }
        Ok(())
    }
}

/// Seeded generator. Cloning snapshots the stream position.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn uniform_u64(&mut self, lo: u64, hi_inclusive: u64) -> u64 {
        self.rng.gen_range(lo..=hi_inclusive)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        self.rng.gen_bool(p)
    }
}

/// Extra cycles caused by load on shared components. Level 0 draws nothing
/// and returns 0, so an unloaded run consumes no randomness here.
pub fn sample_contention(
    level: f64,
    model: &ContentionModel,
    rng: &mut RngState,
) -> Result<u64, KernelError> {
    if !(0.0..=1.0).contains(&level) || level.is_nan() {
        return Err(KernelError::BadLevel(level));
    }
    if level == 0.0 {
        return Ok(0);
    }
    let raw = if rng.bernoulli(model.p_hit) {
        rng.uniform_u64(model.min_tail, model.max_tail)
    } else {
        rng.uniform_u64(0, model.small_bound)
    };
    Ok((raw as f64 * level).round() as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceKind {
    TrapEntry,
    TrapExit,
    IrqAssert,
    Mmio,
    SbiCall,
    Injection,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::TrapEntry => "trap-entry",
            TraceKind::TrapExit => "trap-exit",
            TraceKind::IrqAssert => "irq-assert",
            TraceKind::Mmio => "mmio",
            TraceKind::SbiCall => "sbi-call",
            TraceKind::Injection => "injection",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: SimTime,
    pub hart: HartId,
    pub kind: TraceKind,
    pub detail: String,
}

/// Trace sink. Harts run ahead of the global clock inside synchronous
/// handler paths, so records are kept in emission order and stably sorted
/// by time when read out.
#[derive(Debug, Default)]
pub struct Trace {
    enabled: bool,
    records: Vec<TraceRecord>,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            records: Vec::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn record(&mut self, time: SimTime, hart: HartId, kind: TraceKind, detail: impl FnOnce() -> String) {
        if self.enabled {
            self.records.push(TraceRecord {
                time,
                hart,
                kind,
                detail: detail(),
            });
        }
    }

    pub fn into_sorted(mut self) -> Vec<TraceRecord> {
        self.records.sort_by_key(|r| r.time);
        self.records
    }

    pub fn sorted(&self) -> Vec<TraceRecord> {
        let mut v = self.records.clone();
        v.sort_by_key(|r| r.time);
        v
    }
}

/// Writes `time,hart,kind,detail` rows.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "hart", "kind", "detail"])?;
    for r in records {
        w.write_record([
            r.time.0.to_string(),
            r.hart.to_string(),
            r.kind.as_str().to_string(),
            r.detail.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Everything time-related owned by one simulation instance.
#[derive(Debug)]
pub struct Kernel {
    pub queue: EventQueue,
    pub rng: RngState,
    pub trace: Trace,
    pub contention: ContentionModel,
    level: f64,
}

impl Kernel {
    pub fn new(seed: u64, contention: ContentionModel, trace: bool) -> Self {
        Self {
            queue: EventQueue::new(),
            rng: RngState::new(seed),
            trace: Trace::new(trace),
            contention,
            level: 0.0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn set_level(&mut self, level: f64) -> Result<(), KernelError> {
        if !(0.0..=1.0).contains(&level) || level.is_nan() {
            return Err(KernelError::BadLevel(level));
        }
        self.level = level;
        Ok(())
    }

    /// Contention penalty at the current global level.
    pub fn contention(&mut self) -> u64 {
        sample_contention(self.level, &self.contention, &mut self.rng)
            .expect("level validated on set")
    }

    /// Schedules at `at`, clamped to the current time.
    pub fn schedule_at_or_now(&mut self, at: SimTime, action: Action) {
        let due = at.max(self.now());
        self.queue.schedule(due, action);
    }
}
