//! Task composition under a gripper-state compatibility table.

use super::{SkillDemo, TaskSpec};
use crate::grammar::{SkillGrammar, SlotName};
use crate::rng::Rng;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Gripper state a step requires before it can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GripperRequire {
    Empty,
    Held,
    Any,
}

/// Effect of a step on the gripper state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GripperEffect {
    None,
    Acquire,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintRule {
    pub require: GripperRequire,
    pub effect: GripperEffect,
}

const PERMISSIVE: ConstraintRule = ConstraintRule {
    require: GripperRequire::Any,
    effect: GripperEffect::None,
};

/// Which steps may follow which, phrased as gripper-state preconditions and
/// effects keyed by surface pattern. Steps whose template is not listed get
/// the permissive rule (no precondition, no effect).
#[derive(Debug, Clone, Default)]
pub struct ConstraintTable {
    rules: BTreeMap<String, ConstraintRule>,
}

impl ConstraintTable {
    /// Default rules for the desk grammar: self-contained pick-and-place
    /// steps need an empty gripper, `Pick up` acquires, `Place` releases,
    /// and `Pour into` acts on whatever is held.
    pub fn default_desk() -> Self {
        let mut rules = BTreeMap::new();
        let mut add = |pattern: &str, require, effect| {
            rules.insert(pattern.to_string(), ConstraintRule { require, effect });
        };
        add(
            "Put [object] on [location].",
            GripperRequire::Empty,
            GripperEffect::None,
        );
        add(
            "Put [object] into [location].",
            GripperRequire::Empty,
            GripperEffect::None,
        );
        add(
            "Pick up [object] and pour into [location].",
            GripperRequire::Empty,
            GripperEffect::Acquire,
        );
        add(
            "Pick up [object].",
            GripperRequire::Empty,
            GripperEffect::Acquire,
        );
        add("Open [object].", GripperRequire::Empty, GripperEffect::None);
        add("Push [object].", GripperRequire::Empty, GripperEffect::None);
        add(
            "Pour into [location].",
            GripperRequire::Held,
            GripperEffect::None,
        );
        add(
            "Place on [location].",
            GripperRequire::Held,
            GripperEffect::Release,
        );
        add(
            "Place into [location].",
            GripperRequire::Held,
            GripperEffect::Release,
        );
        ConstraintTable { rules }
    }

    /// Parse the plain-text table format: `pattern | requires | effect` per
    /// line with requires in `empty|held|any` and effect in
    /// `none|acquire|release`; `#` comments.
    pub fn parse_str(text: &str) -> Result<Self, ComposeError> {
        let mut rules = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split('|').map(str::trim).collect();
            let [pattern, require, effect] = parts[..] else {
                return Err(ComposeError::BadTableLine { line: idx + 1 });
            };
            let require = match require {
                "empty" => GripperRequire::Empty,
                "held" => GripperRequire::Held,
                "any" => GripperRequire::Any,
                _ => return Err(ComposeError::BadTableLine { line: idx + 1 }),
            };
            let effect = match effect {
                "none" => GripperEffect::None,
                "acquire" => GripperEffect::Acquire,
                "release" => GripperEffect::Release,
                _ => return Err(ComposeError::BadTableLine { line: idx + 1 }),
            };
            rules.insert(pattern.to_string(), ConstraintRule { require, effect });
        }
        Ok(ConstraintTable { rules })
    }

    pub fn from_file(path: &Path) -> Result<Self, ComposeError> {
        let text = std::fs::read_to_string(path).map_err(|e| ComposeError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_str(&text)
    }

    pub fn rule_for(&self, grammar: &SkillGrammar, demo: &SkillDemo) -> ConstraintRule {
        let pattern = &grammar.template(demo.step.template).surface_pattern;
        self.rules.get(pattern).copied().unwrap_or(PERMISSIVE)
    }
}

/// Abstract instruction templates; one is drawn per task and its
/// placeholders (`{objects}`, `{locations}`, `{k}`) are filled from the step
/// sequence. A stand-in for human instruction writing.
#[derive(Debug, Clone)]
pub struct InstructionPool {
    templates: Vec<String>,
}

impl InstructionPool {
    pub fn new(templates: Vec<String>) -> Result<Self, ComposeError> {
        if templates.is_empty() {
            return Err(ComposeError::EmptyInstructionPool);
        }
        Ok(InstructionPool { templates })
    }

    pub fn default_desk() -> Self {
        InstructionPool {
            templates: vec![
                "Tidy up the small items on the desktop".to_string(),
                "Put {objects} where they belong".to_string(),
                "Organize the desk in {k} steps".to_string(),
                "Sort {objects} using {locations}".to_string(),
                "Clear the workspace".to_string(),
            ],
        }
    }

    /// One template per non-comment line.
    pub fn parse_str(text: &str) -> Result<Self, ComposeError> {
        let templates: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        InstructionPool::new(templates)
    }

    pub fn from_file(path: &Path) -> Result<Self, ComposeError> {
        let text = std::fs::read_to_string(path).map_err(|e| ComposeError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_str(&text)
    }

    fn instantiate(&self, sequence: &[SkillDemo], rng: &mut Rng) -> String {
        let template = rng.choose(&self.templates);
        let mut objects = Vec::new();
        let mut locations = Vec::new();
        for demo in sequence {
            for (slot, value) in &demo.step.args {
                let bucket = match slot {
                    SlotName::Object => &mut objects,
                    SlotName::Location => &mut locations,
                };
                if !bucket.contains(value) {
                    bucket.push(value.clone());
                }
            }
        }
        let join = |xs: &[String], fallback: &str| {
            if xs.is_empty() {
                fallback.to_string()
            } else {
                xs.join(", ")
            }
        };
        template
            .replace("{objects}", &join(&objects, "the items"))
            .replace("{locations}", &join(&locations, "their places"))
            .replace("{k}", &sequence.len().to_string())
    }
}

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("no {k}-step sequence satisfies the constraint table")]
    InfeasibleComposition { k: usize },
    #[error("k must be at least 1")]
    ZeroLength,
    #[error("instruction pool is empty")]
    EmptyInstructionPool,
    #[error("constraint table line {line}: expected `pattern | requires | effect`")]
    BadTableLine { line: usize },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Draw an ordered sequence of `k` distinct demos satisfying the constraint
/// table, starting from an empty gripper, and pair it with an instruction.
///
/// The search is a depth-first walk over demos in seeded-shuffled order, so a
/// fixed seed reproduces the task exactly and exhausting the walk proves
/// infeasibility.
pub fn compose_task(
    library: &[SkillDemo],
    k: usize,
    pool: &InstructionPool,
    table: &ConstraintTable,
    grammar: &SkillGrammar,
    task_id: &str,
    rng: &mut Rng,
) -> Result<TaskSpec, ComposeError> {
    if k == 0 {
        return Err(ComposeError::ZeroLength);
    }

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        library: &[SkillDemo],
        table: &ConstraintTable,
        grammar: &SkillGrammar,
        k: usize,
        held: bool,
        used: &mut Vec<bool>,
        out: &mut Vec<usize>,
        rng: &mut Rng,
    ) -> bool {
        if out.len() == k {
            return true;
        }
        let mut order: Vec<usize> = (0..library.len())
            .filter(|&i| {
                if used[i] {
                    return false;
                }
                match table.rule_for(grammar, &library[i]).require {
                    GripperRequire::Empty => !held,
                    GripperRequire::Held => held,
                    GripperRequire::Any => true,
                }
            })
            .collect();
        rng.shuffle(&mut order);
        for i in order {
            let next_held = match table.rule_for(grammar, &library[i]).effect {
                GripperEffect::None => held,
                GripperEffect::Acquire => true,
                GripperEffect::Release => false,
            };
            used[i] = true;
            out.push(i);
            if dfs(library, table, grammar, k, next_held, used, out, rng) {
                return true;
            }
            out.pop();
            used[i] = false;
        }
        false
    }

    let mut used = vec![false; library.len()];
    let mut picked = Vec::with_capacity(k);
    if !dfs(
        library, table, grammar, k, false, &mut used, &mut picked, rng,
    ) {
        return Err(ComposeError::InfeasibleComposition { k });
    }

    let sequence: Vec<SkillDemo> = picked.into_iter().map(|i| library[i].clone()).collect();
    let instruction = pool.instantiate(&sequence, rng);
    Ok(TaskSpec {
        task_id: task_id.to_string(),
        instruction,
        sequence,
    })
}
