//! Response and plan parsing.

use super::{Plan, PlanStep, ResponseParts, SkillGrammar, TemplateId};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagKind {
    ThinkOpen,
    ThinkClose,
    AnswerOpen,
    AnswerClose,
}

impl TagKind {
    pub fn literal(self) -> &'static str {
        match self {
            TagKind::ThinkOpen => "<think>",
            TagKind::ThinkClose => "</think>",
            TagKind::AnswerOpen => "<answer>",
            TagKind::AnswerClose => "</answer>",
        }
    }
}

impl fmt::Display for TagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.literal())
    }
}

/// Why a response failed the tag template.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("missing {0} tag")]
    MissingTag(TagKind),
    #[error("duplicate {0} tag")]
    DuplicateTag(TagKind),
    #[error("tags out of order: expected <think>...</think> then <answer>...</answer>")]
    TagOrderViolation,
    #[error("content outside the think/answer blocks")]
    TrailingContent,
}

fn positions(haystack: &str, needle: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(i) = haystack[from..].find(needle) {
        out.push(from + i);
        from += i + needle.len();
    }
    out
}

/// Split a raw model response into its think and answer sections.
///
/// Succeeds iff the text is exactly one `<think>...</think>` block followed by
/// one `<answer>...</answer>` block with only whitespace outside the blocks.
/// Error precedence when several defects are present: missing tags, then
/// duplicates, then ordering, then trailing content.
pub fn parse_response(text: &str) -> Result<ResponseParts, FormatError> {
    const TAGS: [TagKind; 4] = [
        TagKind::ThinkOpen,
        TagKind::ThinkClose,
        TagKind::AnswerOpen,
        TagKind::AnswerClose,
    ];
    let mut found: [Vec<usize>; 4] = Default::default();
    for (slot, tag) in found.iter_mut().zip(TAGS) {
        *slot = positions(text, tag.literal());
    }
    for (occurrences, tag) in found.iter().zip(TAGS) {
        if occurrences.is_empty() {
            return Err(FormatError::MissingTag(tag));
        }
    }
    for (occurrences, tag) in found.iter().zip(TAGS) {
        if occurrences.len() > 1 {
            return Err(FormatError::DuplicateTag(tag));
        }
    }
    let [think_open, think_close, answer_open, answer_close] =
        [found[0][0], found[1][0], found[2][0], found[3][0]];
    if !(think_open < think_close && think_close < answer_open && answer_open < answer_close) {
        return Err(FormatError::TagOrderViolation);
    }

    let before = &text[..think_open];
    let between = &text[think_close + TagKind::ThinkClose.literal().len()..answer_open];
    let after = &text[answer_close + TagKind::AnswerClose.literal().len()..];
    if [before, between, after]
        .iter()
        .any(|s| !s.trim().is_empty())
    {
        return Err(FormatError::TrailingContent);
    }

    let think = &text[think_open + TagKind::ThinkOpen.literal().len()..think_close];
    let answer = &text[answer_open + TagKind::AnswerOpen.literal().len()..answer_close];
    Ok(ResponseParts {
        think: think.to_string(),
        answer: answer.to_string(),
    })
}

/// A defect in one plan line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepParseError {
    #[error("line {line}: not a numbered step: {text:?}")]
    UnnumberedLine { line: usize, text: String },
    #[error("line {line}: expected step number {expected}, found {found}")]
    NonconsecutiveNumbering {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: no skill template matches {text:?}")]
    NoTemplateMatch { line: usize, text: String },
    #[error("line {line}: {text:?} matches more than one template: {patterns:?}")]
    AmbiguousTemplateMatch {
        line: usize,
        text: String,
        patterns: Vec<String>,
    },
    #[error("line {line}: empty [{slot}] slot")]
    EmptySlot { line: usize, slot: super::SlotName },
}

/// All defects found while parsing an answer into a plan.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct PlanParseError {
    pub errors: Vec<StepParseError>,
}

impl fmt::Display for PlanParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.errors.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", lines.join("; "))
    }
}

/// Parse an answer section into a validated plan.
///
/// The answer is split into numbered lines (`1.`, `2.`, ...); numbering must
/// be consecutive from 1 and every line body must match exactly one template
/// with all slots filled. Blank lines are skipped. A whitespace-only answer
/// parses to the empty plan so that degenerate rollouts stay scoreable.
pub fn parse_plan(answer: &str, grammar: &SkillGrammar) -> Result<Plan, PlanParseError> {
    let mut errors = Vec::new();
    let mut steps = Vec::new();
    let mut expected = 1usize;

    for (idx, raw) in answer.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let Some((number, body)) = split_numbering(line) else {
            errors.push(StepParseError::UnnumberedLine {
                line: line_no,
                text: line.to_string(),
            });
            continue;
        };
        if number != expected {
            errors.push(StepParseError::NonconsecutiveNumbering {
                line: line_no,
                expected,
                found: number,
            });
            // resynchronize so one bad number does not cascade
            expected = number + 1;
        } else {
            expected += 1;
        }
        match match_step(body, grammar) {
            Ok(step) => steps.push(step),
            Err(e) => errors.push(e.at_line(line_no)),
        }
    }

    if errors.is_empty() {
        Ok(Plan::new(steps))
    } else {
        Err(PlanParseError { errors })
    }
}

/// Split `"3. Put apple on tray."` into `(3, "Put apple on tray.")`.
fn split_numbering(line: &str) -> Option<(usize, &str)> {
    let dot = line.find('.')?;
    let prefix = &line[..dot];
    if prefix.is_empty() || !prefix.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let number: usize = prefix.parse().ok()?;
    Some((number, line[dot + 1..].trim()))
}

enum StepError {
    NoMatch(String),
    Ambiguous(String, Vec<String>),
    EmptySlot(super::SlotName),
}

impl StepError {
    fn at_line(self, line: usize) -> StepParseError {
        match self {
            StepError::NoMatch(text) => StepParseError::NoTemplateMatch { line, text },
            StepError::Ambiguous(text, patterns) => StepParseError::AmbiguousTemplateMatch {
                line,
                text,
                patterns,
            },
            StepError::EmptySlot(slot) => StepParseError::EmptySlot { line, slot },
        }
    }
}

fn match_step(body: &str, grammar: &SkillGrammar) -> Result<PlanStep, StepError> {
    let mut matches = Vec::new();
    for (i, template) in grammar.templates().iter().enumerate() {
        let words = step_words(body, template.trailing_period);
        if let Some(captures) = template.match_words(&words, false) {
            matches.push((TemplateId(i), captures));
        }
    }
    // Templates with fewer fixed words subsume more specific ones (any
    // "Pick up X and pour into Y." line also fits "Pick up [object]." with
    // the tail swallowed by the greedy slot). Resolve to the most specific
    // match: the one with the most fixed words. Only ties stay ambiguous.
    if matches.len() > 1 {
        let specificity =
            |id: &TemplateId| grammar.template(*id).fixed_word_count();
        let best = matches.iter().map(|(id, _)| specificity(id)).max().unwrap_or(0);
        matches.retain(|(id, _)| specificity(id) == best);
    }
    match matches.len() {
        1 => {
            let (template, captures) = matches.pop().expect("one match");
            Ok(PlanStep {
                template,
                args: captures.into_iter().collect(),
            })
        }
        0 => {
            // Retry allowing empty captures purely for a better diagnostic.
            for template in grammar.templates() {
                let words = step_words(body, template.trailing_period);
                if let Some(captures) = template.match_words(&words, true) {
                    if let Some((slot, _)) =
                        captures.iter().find(|(_, text)| text.trim().is_empty())
                    {
                        return Err(StepError::EmptySlot(*slot));
                    }
                }
            }
            Err(StepError::NoMatch(body.to_string()))
        }
        _ => Err(StepError::Ambiguous(
            body.to_string(),
            matches
                .iter()
                .map(|(id, _)| grammar.template(*id).surface_pattern.clone())
                .collect(),
        )),
    }
}

/// Whitespace-normalize a step body and strip the optional trailing period
/// when the template's pattern carries one.
fn step_words(body: &str, template_has_period: bool) -> Vec<&str> {
    let mut words: Vec<&str> = body.split_whitespace().collect();
    if template_has_period {
        if let Some(last) = words.last_mut() {
            if let Some(stripped) = last.strip_suffix('.') {
                if stripped.is_empty() {
                    words.pop();
                } else {
                    *last = stripped;
                }
            }
        }
    }
    words
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::SlotName;

    #[test]
    fn parse_response_minimal_wellformed() {
        let parts = parse_response("<think>reason</think><answer>1. Pick up apple.</answer>")
            .expect("well-formed");
        assert_eq!(parts.think, "reason");
        assert_eq!(parts.answer, "1. Pick up apple.");
    }

    #[test]
    fn parse_response_allows_surrounding_whitespace() {
        let parts =
            parse_response("  <think>a\nb</think>\n\n<answer>c</answer>\n").expect("well-formed");
        assert_eq!(parts.think, "a\nb");
        assert_eq!(parts.answer, "c");
    }

    #[test]
    fn parse_response_order_violation() {
        assert_eq!(
            parse_response("<answer>x</answer><think>y</think>"),
            Err(FormatError::TagOrderViolation)
        );
    }

    #[test]
    fn parse_response_duplicate_answer_block() {
        assert_eq!(
            parse_response("<think>a</think><answer>b</answer><answer>c</answer>"),
            Err(FormatError::DuplicateTag(TagKind::AnswerOpen))
        );
    }

    #[test]
    fn parse_response_missing_and_trailing() {
        assert_eq!(
            parse_response("<think>t</think>"),
            Err(FormatError::MissingTag(TagKind::AnswerOpen))
        );
        assert_eq!(
            parse_response("x <think>t</think><answer>a</answer>"),
            Err(FormatError::TrailingContent)
        );
        assert_eq!(
            parse_response("<think>t</think> noise <answer>a</answer>"),
            Err(FormatError::TrailingContent)
        );
        assert_eq!(
            parse_response("<think>t</think><answer>a</answer> tail"),
            Err(FormatError::TrailingContent)
        );
    }

    #[test]
    fn parse_response_nested_think_is_duplicate() {
        assert_eq!(
            parse_response("<think>a<think>b</think></think><answer>c</answer>"),
            Err(FormatError::DuplicateTag(TagKind::ThinkOpen))
        );
    }

    fn grammar() -> SkillGrammar {
        SkillGrammar::default_desk()
    }

    #[test]
    fn parse_plan_direct_instantiation() {
        let plan = parse_plan("1. Put apple into basket.", &grammar()).expect("parses");
        assert_eq!(plan.len(), 1);
        let step = &plan.steps[0];
        assert_eq!(
            grammar().template(step.template).surface_pattern,
            "Put [object] into [location]."
        );
        assert_eq!(step.args[&SlotName::Object], "apple");
        assert_eq!(step.args[&SlotName::Location], "basket");
    }

    #[test]
    fn parse_plan_unknown_verb() {
        let err = parse_plan("1. Throw apple away.", &grammar()).unwrap_err();
        assert!(matches!(
            err.errors[..],
            [StepParseError::NoTemplateMatch { line: 1, .. }]
        ));
    }

    #[test]
    fn parse_plan_nonconsecutive_numbering() {
        let err = parse_plan("1. Put apple into basket.\n3. Pick up pen.", &grammar())
            .unwrap_err();
        assert!(matches!(
            err.errors[..],
            [StepParseError::NonconsecutiveNumbering {
                line: 2,
                expected: 2,
                found: 3,
            }]
        ));
    }

    #[test]
    fn parse_plan_must_start_at_one() {
        let err = parse_plan("2. Pick up pen.", &grammar()).unwrap_err();
        assert!(matches!(
            err.errors[..],
            [StepParseError::NonconsecutiveNumbering {
                line: 1,
                expected: 1,
                found: 2,
            }]
        ));
    }

    #[test]
    fn parse_plan_unnumbered_line() {
        let err = parse_plan("Put apple into basket.", &grammar()).unwrap_err();
        assert!(matches!(
            err.errors[..],
            [StepParseError::UnnumberedLine { line: 1, .. }]
        ));
    }

    #[test]
    fn parse_plan_empty_answer_is_empty_plan() {
        assert!(parse_plan("", &grammar()).expect("empty plan").is_empty());
        assert!(parse_plan("  \n \n", &grammar()).expect("empty plan").is_empty());
    }

    #[test]
    fn parse_plan_skips_blank_lines_between_steps() {
        let plan = parse_plan("1. Open box.\n\n2. Push box.", &grammar()).expect("parses");
        assert_eq!(plan.len(), 2);
    }

    #[test]
    fn parse_plan_period_optional_on_read() {
        let plan = parse_plan("1. Pick up pen", &grammar()).expect("parses");
        assert_eq!(plan.steps[0].args[&SlotName::Object], "pen");
    }

    #[test]
    fn parse_plan_empty_slot_diagnostic() {
        let err = parse_plan("1. Put on table.", &grammar()).unwrap_err();
        assert!(matches!(
            err.errors[..],
            [StepParseError::EmptySlot {
                line: 1,
                slot: SlotName::Object,
            }]
        ));
    }

    #[test]
    fn parse_plan_ambiguous_when_args_contain_prepositions() {
        // matches both "Put _ on _" and "Put _ into _" once args swallow words
        let err = parse_plan("1. Put a on b into c.", &grammar()).unwrap_err();
        assert!(matches!(
            err.errors[..],
            [StepParseError::AmbiguousTemplateMatch { line: 1, .. }]
        ));
    }

    #[test]
    fn parse_plan_whitespace_normalized() {
        let plan = parse_plan("1.   Put   red  apple   into    basket.", &grammar())
            .expect("parses");
        assert_eq!(plan.steps[0].args[&SlotName::Object], "red apple");
    }

    #[test]
    fn parse_plan_collects_multiple_errors() {
        let err = parse_plan("1. Wiggle it.\nnope\n3. Open box.", &grammar()).unwrap_err();
        assert_eq!(err.errors.len(), 3);
    }

    #[test]
    fn greedy_capture_takes_longest_object() {
        // "Pick up [object] and pour into [location].": object capture is
        // greedy, so the extra "and pour into" words bind to the object.
        let plan = parse_plan(
            "1. Pick up teapot and pour into cup and pour into bowl.",
            &grammar(),
        )
        .expect("parses");
        let step = &plan.steps[0];
        assert_eq!(step.args[&SlotName::Object], "teapot and pour into cup");
        assert_eq!(step.args[&SlotName::Location], "bowl");
    }
}
