//! Scripted ports for scenario files and tests.
//!
//! A scenario fixes the initial plan, one verdict schedule per sub-task
//! attempt (in execution order), and the payload returned by each successive
//! replan call. The scripted ports log every call they receive so tests can
//! check invariants such as balanced controller start/stop.

use super::{
    ControllerPort, ExecConfig, MonitorPort, ObsRef, ObserverPort, PlannerPort, PortError, Ports,
};
use crate::grammar::{parse_plan, Plan, PlanStep, SkillGrammar};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::VecDeque;
use std::path::Path;
use std::rc::Rc;
use thiserror::Error;

/// Verdict schedule for one sub-task attempt: the 1-based poll at which the
/// monitor reports completion, or never.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictSchedule {
    pub true_at_poll: Option<u64>,
}

/// On-disk scenario format for the `simulate` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub instruction: String,
    #[serde(default)]
    pub config: ExecConfig,
    /// Step texts of the initial plan; may be empty.
    pub initial_plan: Vec<String>,
    /// One schedule per monitored-execution attempt, consumed in order.
    /// Attempts beyond the list never complete.
    #[serde(default)]
    pub verdicts: Vec<VerdictSchedule>,
    /// Full plans returned by successive replan calls (step texts, including
    /// the already-completed prefix).
    #[serde(default)]
    pub replans: Vec<Vec<String>>,
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("scenario does not parse: {message}")]
    Parse { message: String },
    #[error("scenario plan step does not parse: {message}")]
    BadStep { message: String },
}

fn parse_step_list(texts: &[String], grammar: &SkillGrammar) -> Result<Plan, ScenarioError> {
    let numbered = texts
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}. {}", i + 1, t))
        .collect::<Vec<_>>()
        .join("\n");
    parse_plan(&numbered, grammar).map_err(|e| ScenarioError::BadStep {
        message: e.to_string(),
    })
}

/// One logged port call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PortCall {
    Plan,
    Replan { k: usize },
    Start { step: String },
    Stop,
    Verify { verdict: bool },
    Capture,
}

/// Shared mutable state of one scripted port set.
#[derive(Debug, Default)]
pub struct ScriptedState {
    pub calls: Vec<PortCall>,
    pub captures: u64,
    /// 1-based index of the current monitored-execution attempt.
    pub attempt: usize,
    pub polls_this_attempt: u64,
    pub controller_running: bool,
}

type Shared = Rc<RefCell<ScriptedState>>;

struct ScriptedPlanner {
    initial: Plan,
    replans: VecDeque<Plan>,
    state: Shared,
}

impl PlannerPort for ScriptedPlanner {
    fn plan(&mut self, _instruction: &str, _o_init: &ObsRef) -> Result<Plan, PortError> {
        self.state.borrow_mut().calls.push(PortCall::Plan);
        Ok(self.initial.clone())
    }

    fn replan(
        &mut self,
        _instruction: &str,
        _current: &Plan,
        k: usize,
        _o_fail: &ObsRef,
    ) -> Result<Plan, PortError> {
        self.state.borrow_mut().calls.push(PortCall::Replan { k });
        self.replans
            .pop_front()
            .ok_or_else(|| PortError("scripted replan queue exhausted".to_string()))
    }
}

struct ScriptedController {
    grammar: SkillGrammar,
    state: Shared,
}

impl ControllerPort for ScriptedController {
    fn start(&mut self, step: &PlanStep) -> Result<(), PortError> {
        let mut s = self.state.borrow_mut();
        if s.controller_running {
            return Err(PortError("controller started while running".to_string()));
        }
        s.controller_running = true;
        s.attempt += 1;
        s.polls_this_attempt = 0;
        s.calls.push(PortCall::Start {
            step: step.render(&self.grammar),
        });
        Ok(())
    }

    fn stop(&mut self) -> Result<(), PortError> {
        let mut s = self.state.borrow_mut();
        if !s.controller_running {
            return Err(PortError("controller stopped while idle".to_string()));
        }
        s.controller_running = false;
        s.calls.push(PortCall::Stop);
        Ok(())
    }
}

struct ScriptedMonitor {
    schedules: Vec<VerdictSchedule>,
    state: Shared,
}

impl MonitorPort for ScriptedMonitor {
    fn verify(
        &mut self,
        _step: &PlanStep,
        _o_start: &ObsRef,
        _o_now: &ObsRef,
    ) -> Result<bool, PortError> {
        let mut s = self.state.borrow_mut();
        s.polls_this_attempt += 1;
        let schedule = self
            .schedules
            .get(s.attempt.saturating_sub(1))
            .copied()
            .unwrap_or(VerdictSchedule { true_at_poll: None });
        let verdict = schedule.true_at_poll == Some(s.polls_this_attempt);
        s.calls.push(PortCall::Verify { verdict });
        Ok(verdict)
    }
}

struct ScriptedObserver {
    state: Shared,
}

impl ObserverPort for ScriptedObserver {
    fn capture(&mut self) -> Result<ObsRef, PortError> {
        let mut s = self.state.borrow_mut();
        let n = s.captures;
        s.captures += 1;
        s.calls.push(PortCall::Capture);
        Ok(ObsRef(format!("obs-{n}")))
    }
}

/// A scripted port set plus a handle onto its call log.
pub struct ScriptedHarness {
    pub ports: Ports,
    pub config: ExecConfig,
    pub instruction: String,
    pub state: Shared,
}

impl ScriptedHarness {
    pub fn from_scenario(
        scenario: &Scenario,
        grammar: &SkillGrammar,
    ) -> Result<ScriptedHarness, ScenarioError> {
        let initial = parse_step_list(&scenario.initial_plan, grammar)?;
        let replans = scenario
            .replans
            .iter()
            .map(|steps| parse_step_list(steps, grammar))
            .collect::<Result<VecDeque<_>, _>>()?;

        let state: Shared = Rc::new(RefCell::new(ScriptedState::default()));
        let planner = ScriptedPlanner {
            initial,
            replans,
            state: Rc::clone(&state),
        };
        let controller = ScriptedController {
            grammar: grammar.clone(),
            state: Rc::clone(&state),
        };
        let monitor = ScriptedMonitor {
            schedules: scenario.verdicts.clone(),
            state: Rc::clone(&state),
        };
        let observer = ScriptedObserver {
            state: Rc::clone(&state),
        };

        Ok(ScriptedHarness {
            ports: Ports {
                planner: Box::new(planner),
                controller: Box::new(controller),
                monitor: Box::new(monitor),
                observer: Box::new(observer),
            },
            config: scenario.config,
            instruction: scenario.instruction.clone(),
            state,
        })
    }
}
