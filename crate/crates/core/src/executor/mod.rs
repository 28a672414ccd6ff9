//! Deterministic simulator of the hierarchical plan / execute / monitor /
//! replan loop.
//!
//! The simulator drives four injectable ports (planner, controller, monitor,
//! observer) on a logical clock: one monitor poll per tick, with the tick
//! period carried as metadata (200 ms per tick models a 5 Hz verification
//! cadence). Controller execution and monitor polling are logically
//! concurrent; the single-threaded event order start, poll, ..., stop keeps
//! traces reproducible while preserving that contract. Real integrations
//! must allow `verify` to run while the controller acts and must honor
//! `stop()` promptly.

mod scripted;
mod sim;

pub use scripted::{
    PortCall, Scenario, ScenarioError, ScriptedHarness, ScriptedState, VerdictSchedule,
};
pub use sim::{monitored_execute, run_task};

use crate::grammar::{Plan, PlanStep};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque observation reference captured by the observer port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObsRef(pub String);

/// A failure inside a port implementation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("port fault: {0}")]
pub struct PortError(pub String);

pub trait PlannerPort {
    fn plan(&mut self, instruction: &str, o_init: &ObsRef) -> Result<Plan, PortError>;

    /// Regenerate the plan after sub-task `k` failed at observation `o_fail`.
    /// The returned plan must repeat the already-completed first `k - 1`
    /// steps so the unchanged task pointer indexes the next step to run.
    fn replan(
        &mut self,
        instruction: &str,
        current: &Plan,
        k: usize,
        o_fail: &ObsRef,
    ) -> Result<Plan, PortError>;
}

pub trait ControllerPort {
    fn start(&mut self, step: &PlanStep) -> Result<(), PortError>;
    fn stop(&mut self) -> Result<(), PortError>;
}

pub trait MonitorPort {
    fn verify(&mut self, step: &PlanStep, o_start: &ObsRef, o_now: &ObsRef)
        -> Result<bool, PortError>;
}

pub trait ObserverPort {
    fn capture(&mut self) -> Result<ObsRef, PortError>;
}

/// The four injectable ports. The simulator never bypasses them.
pub struct Ports {
    pub planner: Box<dyn PlannerPort>,
    pub controller: Box<dyn ControllerPort>,
    pub monitor: Box<dyn MonitorPort>,
    pub observer: Box<dyn ObserverPort>,
}

/// Execution loop settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecConfig {
    /// Logical tick period in milliseconds (metadata only).
    #[serde(default = "default_tick_ms")]
    pub tick_ms: u64,
    /// Monitor polls allowed per sub-task attempt.
    #[serde(default = "default_timeout_ticks")]
    pub timeout_ticks: u64,
    /// Replans allowed before the task fails.
    #[serde(default = "default_max_replans")]
    pub max_replans: u64,
}

fn default_tick_ms() -> u64 {
    200
}
fn default_timeout_ticks() -> u64 {
    10
}
fn default_max_replans() -> u64 {
    3
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            tick_ms: default_tick_ms(),
            timeout_ticks: default_timeout_ticks(),
            max_replans: default_max_replans(),
        }
    }
}

impl ExecConfig {
    pub fn validate(&self) -> Result<(), ExecError> {
        if self.tick_ms == 0 || self.timeout_ticks == 0 {
            return Err(ExecError::BadConfig);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("tick_ms and timeout_ticks must be positive")]
    BadConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Success,
    Failure,
}

/// Trace event payloads. Sub-task indices `k` are 1-based, matching the task
/// pointer of the execution loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    PlanIssued { steps: Vec<String> },
    SubtaskStarted { k: usize },
    VerifyPolled { k: usize, verdict: bool },
    SubtaskDone { k: usize },
    TimeoutFired { k: usize },
    ReplanIssued { k: usize, steps: Vec<String> },
    PortFault { message: String },
    Success,
    Failure,
}

/// One trace event stamped with the logical tick at which it occurred.
/// Only monitor polls advance the clock.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub tick: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// The tick-by-tick audit record of one task execution.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub events: Vec<Event>,
}

impl ExecutionTrace {
    pub fn status(&self) -> Option<TaskStatus> {
        self.events.last().and_then(|e| match e.kind {
            EventKind::Success => Some(TaskStatus::Success),
            EventKind::Failure => Some(TaskStatus::Failure),
            _ => None,
        })
    }

    /// Total elapsed logical time in ticks (equals the number of polls).
    pub fn total_ticks(&self) -> u64 {
        self.events.last().map_or(0, |e| e.tick)
    }

    pub fn poll_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::VerifyPolled { .. }))
            .count()
    }

    pub fn replan_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::ReplanIssued { .. }))
            .count()
    }

    pub fn subtask_failures(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::TimeoutFired { .. }))
            .count()
    }
}
