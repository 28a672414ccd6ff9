//! Triplet assembly: one planning triplet plus completion pairs per task.

use super::{TaskSpec, Triplet};
use crate::grammar::{render_prompt, Plan, PromptKind, SkillGrammar};
use crate::reward::TaskType;

/// Emit the task's triplets: one planning triplet whose label is the numbered
/// rendering of the full step sequence, then per sub-task one positive
/// completion triplet over `(init, final)` and one negative over
/// `(init, mid)`. Total `1 + 2K`.
pub fn make_triplets(task: &TaskSpec, grammar: &SkillGrammar, grammar_ref: &str) -> Vec<Triplet> {
    make_triplets_n(task, grammar, grammar_ref, 1)
}

/// [`make_triplets`] with a configurable number of negatives per sub-task.
/// Every negative reuses the demo's single mid-execution keyframe, standing
/// in for multiple uncompleted frames.
pub fn make_triplets_n(
    task: &TaskSpec,
    grammar: &SkillGrammar,
    grammar_ref: &str,
    negatives_per_subtask: usize,
) -> Vec<Triplet> {
    let mut out = Vec::with_capacity(1 + (1 + negatives_per_subtask) * task.k());

    let plan = Plan::new(task.sequence.iter().map(|d| d.step.clone()).collect());
    out.push(Triplet {
        task_id: task.task_id.clone(),
        task_type: TaskType::Plan,
        q: render_prompt(PromptKind::Planning, grammar, &task.instruction),
        observations: vec![task.sequence[0].keyframes.init_ref.clone()],
        y: plan.render(grammar),
        grammar_ref: grammar_ref.to_string(),
    });

    for demo in &task.sequence {
        let step_text = demo.step.render(grammar);
        let q = render_prompt(PromptKind::Completion, grammar, &step_text);
        out.push(Triplet {
            task_id: task.task_id.clone(),
            task_type: TaskType::Completion,
            q: q.clone(),
            observations: vec![
                demo.keyframes.init_ref.clone(),
                demo.keyframes.final_ref.clone(),
            ],
            y: "True".to_string(),
            grammar_ref: grammar_ref.to_string(),
        });
        for _ in 0..negatives_per_subtask {
            out.push(Triplet {
                task_id: task.task_id.clone(),
                task_type: TaskType::Completion,
                q: q.clone(),
                observations: vec![
                    demo.keyframes.init_ref.clone(),
                    demo.keyframes.mid_ref.clone(),
                ],
                y: "False".to_string(),
                grammar_ref: grammar_ref.to_string(),
            });
        }
    }
    out
}
