//! Prompt rendering.
//!
//! The two prompt templates are fixed text; only the skill list and the
//! instruction (or the action under verification) are substituted. Golden
//! tests pin the rendered bytes, so edit with care.

use super::SkillGrammar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Planning,
    Completion,
}

/// Render the planning or completion prompt for an instruction.
///
/// The planning prompt enumerates the grammar's templates as a dash list; the
/// completion prompt wraps the action in `# ... #`. Total over non-empty
/// instructions.
pub fn render_prompt(kind: PromptKind, grammar: &SkillGrammar, instruction: &str) -> String {
    assert!(
        !instruction.trim().is_empty(),
        "render_prompt requires a non-empty instruction"
    );
    match kind {
        PromptKind::Planning => {
            let skills = grammar
                .templates()
                .iter()
                .map(|t| format!("- {}\n", t.surface_pattern))
                .collect::<String>();
            format!(
                "<image> You are a helpful and meticulous robot assistant. Your goal is to help users with real-world tasks using your gripper.\n\
                 \n\
                 Your available skills are:\n\
                 {skills}\
                 \n\
                 The user request is: {instruction}\n\
                 \n\
                 Based on the image, describe what you see and generate a step-by-step plan to fulfill the users request. You must ONLY use the available skills listed above. Each step in your plan must exactly match one of the skill formats.\n\
                 \n\
                 The plan should be numbered like this:\n\
                 1. [Skill with object and location]\n\
                 2. [Skill with object and location]\n\
                 ...\n\
                 \n\
                 Avoid empty, duplicate, or irrelevant steps.\n"
            )
        }
        PromptKind::Completion => {
            format!(
                "<image><image>You are a precise robot assistant tasked with verifying if an action has been successfully completed.\n\
                 \n\
                 The first image shows the initial state of the environment before the action. The second image shows the final state after the action was attempted.\n\
                 \n\
                 Based on your observation of both images, determine if the following action was completed:\n\
                 \n\
                 # {instruction} #\n\
                 \n\
                 Output ONLY True if the second image clearly shows the object is in the target location as described in the action. Otherwise, output ONLY False.\n"
            )
        }
    }
}

/// Wrap think and answer sections in the required tag template.
pub fn render_response(think: &str, answer: &str) -> String {
    format!("<think>{think}</think>\n<answer>{answer}</answer>")
}
