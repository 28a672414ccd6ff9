//! Compositional task synthesis and triplet assembly.
//!
//! Tasks are ordered sequences of skill demonstrations drawn from a library
//! under a gripper-state compatibility table. Each task yields one planning
//! triplet plus, per sub-task, a positive completion triplet pairing the
//! initial and final keyframes and a negative one pairing the initial and
//! mid-execution keyframes. Observations are opaque resource references; no
//! image data is touched anywhere.

mod compose;
mod dataset;
mod triplets;

pub use compose::{
    compose_task, ComposeError, ConstraintRule, ConstraintTable, GripperEffect, GripperRequire,
    InstructionPool,
};
pub use dataset::{
    fnv64, read_dataset, split_by_task, synthesize_dataset, write_dataset, DatasetError,
    SynthesisConfig,
};
pub use triplets::{make_triplets, make_triplets_n};

use crate::grammar::{parse_plan, PlanStep, SkillGrammar};
use crate::reward::TaskType;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Keyframe references of one demonstration: before, mid-execution, after.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyframes {
    pub init_ref: String,
    pub mid_ref: String,
    pub final_ref: String,
}

impl Keyframes {
    pub fn validate(&self) -> Result<(), DemoError> {
        let refs = [&self.init_ref, &self.mid_ref, &self.final_ref];
        if refs.iter().any(|r| r.trim().is_empty()) {
            return Err(DemoError::MissingKeyframe);
        }
        if refs[0] == refs[1] || refs[0] == refs[2] || refs[1] == refs[2] {
            return Err(DemoError::DuplicateKeyframe);
        }
        Ok(())
    }
}

/// One demonstrated skill with its keyframes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillDemo {
    pub demo_id: String,
    pub step: PlanStep,
    pub keyframes: Keyframes,
}

/// A synthesized long-horizon task: an instruction over K demonstrations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub task_id: String,
    pub instruction: String,
    pub sequence: Vec<SkillDemo>,
}

impl TaskSpec {
    pub fn k(&self) -> usize {
        self.sequence.len()
    }
}

/// One training datum: prompt, observation references, and the plan text or
/// completion label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub task_id: String,
    pub task_type: TaskType,
    pub q: String,
    pub observations: Vec<String>,
    pub y: String,
    pub grammar_ref: String,
}

impl Triplet {
    pub fn validate(&self) -> Result<(), DemoError> {
        let expected_obs = match self.task_type {
            TaskType::Plan => 1,
            TaskType::Completion => 2,
        };
        if self.observations.len() != expected_obs {
            return Err(DemoError::BadObservationCount {
                task_type: self.task_type,
                got: self.observations.len(),
            });
        }
        if self.task_type == TaskType::Completion && self.y != "True" && self.y != "False" {
            return Err(DemoError::BadLabel { got: self.y.clone() });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("demo keyframe reference missing")]
    MissingKeyframe,
    #[error("demo keyframe references must be distinct")]
    DuplicateKeyframe,
    #[error("{task_type:?} triplet has {got} observations")]
    BadObservationCount { task_type: TaskType, got: usize },
    #[error("completion label must be True or False, got {got:?}")]
    BadLabel { got: String },
    #[error("demo {id}: step does not parse: {reason}")]
    BadStep { id: String, reason: String },
}

/// Serialized form of a demo in the library file: the step is stored as its
/// rendered text and parsed under the grammar at load time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DemoRecord {
    pub demo_id: String,
    pub step: String,
    pub init_ref: String,
    pub mid_ref: String,
    pub final_ref: String,
}

impl DemoRecord {
    pub fn into_demo(self, grammar: &SkillGrammar) -> Result<SkillDemo, DemoError> {
        let numbered = format!("1. {}", self.step);
        let plan = parse_plan(&numbered, grammar).map_err(|e| DemoError::BadStep {
            id: self.demo_id.clone(),
            reason: e.to_string(),
        })?;
        let step = plan
            .steps
            .into_iter()
            .next()
            .ok_or_else(|| DemoError::BadStep {
                id: self.demo_id.clone(),
                reason: "empty step text".to_string(),
            })?;
        let demo = SkillDemo {
            demo_id: self.demo_id,
            step,
            keyframes: Keyframes {
                init_ref: self.init_ref,
                mid_ref: self.mid_ref,
                final_ref: self.final_ref,
            },
        };
        demo.keyframes.validate()?;
        Ok(demo)
    }

    pub fn from_demo(demo: &SkillDemo, grammar: &SkillGrammar) -> DemoRecord {
        DemoRecord {
            demo_id: demo.demo_id.clone(),
            step: demo.step.render(grammar),
            init_ref: demo.keyframes.init_ref.clone(),
            mid_ref: demo.keyframes.mid_ref.clone(),
            final_ref: demo.keyframes.final_ref.clone(),
        }
    }
}

/// Build one demo per template instantiation over the pools. Handy for tests
/// and for seeding a starter library file.
pub fn demo_library(
    grammar: &SkillGrammar,
    objects: &[String],
    locations: &[String],
) -> Vec<SkillDemo> {
    let vocab = crate::grpo::StepVocab::build(grammar, objects, locations);
    vocab
        .candidates
        .into_iter()
        .enumerate()
        .map(|(i, candidate)| {
            let demo_id = format!("demo-{i:04}");
            SkillDemo {
                keyframes: Keyframes {
                    init_ref: format!("{demo_id}/init.png"),
                    mid_ref: format!("{demo_id}/mid.png"),
                    final_ref: format!("{demo_id}/final.png"),
                },
                demo_id,
                step: candidate.step,
            }
        })
        .collect()
}
