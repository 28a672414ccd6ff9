//! The execution loop.

use super::{
    Event, EventKind, ExecConfig, ExecutionTrace, ObsRef, Ports, TaskStatus,
};
use crate::grammar::{Plan, PlanStep, SkillGrammar};

struct TraceBuilder {
    events: Vec<Event>,
    tick: u64,
}

impl TraceBuilder {
    fn new() -> Self {
        TraceBuilder {
            events: Vec::new(),
            tick: 0,
        }
    }

    fn emit(&mut self, kind: EventKind) {
        self.events.push(Event {
            tick: self.tick,
            kind,
        });
    }

    fn finish(self, status: TaskStatus) -> (TaskStatus, ExecutionTrace) {
        let mut events = self.events;
        events.push(Event {
            tick: events.last().map_or(0, |e| e.tick),
            kind: match status {
                TaskStatus::Success => EventKind::Success,
                TaskStatus::Failure => EventKind::Failure,
            },
        });
        (status, ExecutionTrace { events })
    }
}

fn rendered(plan: &Plan, grammar: &SkillGrammar) -> Vec<String> {
    plan.steps.iter().map(|s| s.render(grammar)).collect()
}

/// Run one task through the full plan / execute / monitor / replan loop.
///
/// The initial plan comes from the planner port; an empty initial plan fails
/// immediately. Sub-tasks run under [`monitored_execute`]; on success the
/// pointer advances and a fresh observation baselines the next sub-task, on
/// failure the planner replans against the failure observation with the
/// pointer unchanged. Exhausting `max_replans` fails the task. Any port
/// error is recorded as a `PortFault` event and fails the task.
pub fn run_task(
    instruction: &str,
    ports: &mut Ports,
    cfg: &ExecConfig,
    grammar: &SkillGrammar,
) -> (TaskStatus, ExecutionTrace) {
    debug_assert!(cfg.validate().is_ok());
    let mut trace = TraceBuilder::new();

    macro_rules! try_port {
        ($expr:expr) => {
            match $expr {
                Ok(v) => v,
                Err(e) => {
                    trace.emit(EventKind::PortFault {
                        message: e.0.clone(),
                    });
                    return trace.finish(TaskStatus::Failure);
                }
            }
        };
    }

    let o_init = try_port!(ports.observer.capture());
    let mut plan = try_port!(ports.planner.plan(instruction, &o_init));
    trace.emit(EventKind::PlanIssued {
        steps: rendered(&plan, grammar),
    });
    if plan.is_empty() {
        return trace.finish(TaskStatus::Failure);
    }

    let mut o_prev = o_init;
    let mut k: usize = 1;
    let mut replans: u64 = 0;

    while k <= plan.len() {
        let step = plan.steps[k - 1].clone();
        trace.emit(EventKind::SubtaskStarted { k });
        let done = try_port!(execute_once(&step, &o_prev, ports, cfg, k, &mut trace));

        if done {
            trace.emit(EventKind::SubtaskDone { k });
            k += 1;
            o_prev = try_port!(ports.observer.capture());
        } else {
            if replans == cfg.max_replans {
                return trace.finish(TaskStatus::Failure);
            }
            let o_fail = try_port!(ports.observer.capture());
            let new_plan = try_port!(ports.planner.replan(instruction, &plan, k, &o_fail));
            if new_plan.len() < k - 1 || new_plan.steps[..k - 1] != plan.steps[..k - 1] {
                trace.emit(EventKind::PortFault {
                    message: format!(
                        "replan violated the completed-prefix contract at k={k}"
                    ),
                });
                return trace.finish(TaskStatus::Failure);
            }
            replans += 1;
            trace.emit(EventKind::ReplanIssued {
                k,
                steps: rendered(&new_plan, grammar),
            });
            plan = new_plan;
            o_prev = o_fail;
        }
    }

    trace.finish(TaskStatus::Success)
}

/// Start the controller, poll the monitor once per tick until it reports
/// completion or `timeout_ticks` polls elapse, and stop the controller on
/// every exit path. Returns the final verdict.
fn execute_once(
    step: &PlanStep,
    o_start: &ObsRef,
    ports: &mut Ports,
    cfg: &ExecConfig,
    k: usize,
    trace: &mut TraceBuilder,
) -> Result<bool, super::PortError> {
    ports.controller.start(step)?;

    for _poll in 0..cfg.timeout_ticks {
        let polled = (|| {
            let o_now = ports.observer.capture()?;
            ports.monitor.verify(step, o_start, &o_now)
        })();
        let verdict = match polled {
            Ok(v) => v,
            Err(e) => {
                // the controller must not keep running after a fault
                let _ = ports.controller.stop();
                return Err(e);
            }
        };
        trace.tick += 1;
        trace.emit(EventKind::VerifyPolled { k, verdict });
        if verdict {
            ports.controller.stop()?;
            return Ok(true);
        }
    }

    ports.controller.stop()?;
    trace.emit(EventKind::TimeoutFired { k });
    Ok(false)
}

/// Standalone monitored execution of a single sub-task; returns the verdict
/// and the events it produced (polls and a possible timeout), tick-stamped
/// from zero.
pub fn monitored_execute(
    step: &PlanStep,
    o_start: &ObsRef,
    ports: &mut Ports,
    cfg: &ExecConfig,
) -> Result<(bool, Vec<Event>), super::PortError> {
    let mut trace = TraceBuilder::new();
    let done = execute_once(step, o_start, ports, cfg, 1, &mut trace)?;
    Ok((done, trace.events))
}
