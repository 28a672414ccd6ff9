//! Reward terms and the weighted total.

use super::assignment::{max_weight_matching, Matching};
use super::similarity::similarity_matrix;
use super::RewardWeights;
use crate::grammar::{parse_plan, parse_response, Ontology, Plan, SkillGrammar};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("ground-truth plan is empty")]
    EmptyGroundTruth,
}

/// 1 iff the text matches the `<think>...</think><answer>...</answer>`
/// template exactly, 0 otherwise.
pub fn format_reward(text: &str) -> f64 {
    if parse_response(text).is_ok() {
        1.0
    } else {
        0.0
    }
}

/// Bipartite match score: maximum matching weight over the step-similarity
/// matrix, normalized by the longer plan's length. An empty generated plan
/// scores 0 with an empty matching.
pub fn bipartite_match_score(
    generated: &Plan,
    ground_truth: &Plan,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Result<(f64, Matching), RewardError> {
    if ground_truth.is_empty() {
        return Err(RewardError::EmptyGroundTruth);
    }
    if generated.is_empty() {
        return Ok((0.0, Matching::default()));
    }
    let sim = similarity_matrix(generated, ground_truth, grammar, ontology, weights);
    let matching = max_weight_matching(&sim);
    let denom = generated.len().max(ground_truth.len()) as f64;
    Ok((matching.total_weight / denom, matching))
}

/// Content reward: match score minus the length penalty `w_l * |M - N|`.
/// Deliberately not clamped; badly over- or under-length plans go negative.
pub fn content_reward(
    generated: &Plan,
    ground_truth: &Plan,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Result<f64, RewardError> {
    let (bm, _) = bipartite_match_score(generated, ground_truth, grammar, ontology, weights)?;
    let diff = generated.len().abs_diff(ground_truth.len()) as f64;
    Ok(bm - weights.w_l * diff)
}

/// Completion reward: 1 iff the prediction, trimmed, is exactly `True` or
/// `False` and equals the label's canonical spelling.
pub fn completion_reward(prediction: &str, label: bool) -> f64 {
    let expected = if label { "True" } else { "False" };
    if prediction.trim() == expected {
        1.0
    } else {
        0.0
    }
}

/// Target of a scored rollout.
#[derive(Debug, Clone)]
pub enum ScoreTarget<'a> {
    Plan(&'a Plan),
    Completion(bool),
}

/// Full audit record of one scored response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// Format term, 0 or 1.
    pub format: f64,
    /// Normalized bipartite match score (planning targets only, else 0).
    pub bm: f64,
    /// `w_l * |M - N|` (planning targets only, else 0).
    pub length_penalty: f64,
    /// Content term: `bm - length_penalty` for plans, exact match for labels.
    pub content: f64,
    /// `w_f * format + w_c * content`.
    pub total: f64,
    /// The matching behind `bm`; empty for completion targets.
    pub matching: Matching,
    /// Present when the content term was folded to 0 by a parse failure.
    pub diagnostic: Option<String>,
}

/// Extract the text to score as the answer. Prefers the answer section of a
/// well-formed response; falls back to the first `<answer>...</answer>` block
/// and then to the whole text, so malformed rollouts still earn a content
/// score and stay usable for group-relative training.
fn answer_text(text: &str) -> String {
    if let Ok(parts) = parse_response(text) {
        return parts.answer;
    }
    if let Some(open) = text.find("<answer>") {
        let rest = &text[open + "<answer>".len()..];
        if let Some(close) = rest.find("</answer>") {
            return rest[..close].to_string();
        }
    }
    text.to_string()
}

/// Score a raw response against its target.
///
/// Never fails: a plan that does not parse folds to content 0 with the parse
/// diagnostics recorded in the breakdown.
pub fn total_reward(
    text: &str,
    target: &ScoreTarget<'_>,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Result<RewardBreakdown, RewardError> {
    let format = format_reward(text);
    let answer = answer_text(text);

    let mut breakdown = RewardBreakdown {
        format,
        bm: 0.0,
        length_penalty: 0.0,
        content: 0.0,
        total: 0.0,
        matching: Matching::default(),
        diagnostic: None,
    };

    match target {
        ScoreTarget::Plan(ground_truth) => {
            if ground_truth.is_empty() {
                return Err(RewardError::EmptyGroundTruth);
            }
            match parse_plan(&answer, grammar) {
                Ok(generated) => {
                    let (bm, matching) =
                        bipartite_match_score(&generated, ground_truth, grammar, ontology, weights)?;
                    let diff = generated.len().abs_diff(ground_truth.len()) as f64;
                    breakdown.bm = bm;
                    breakdown.length_penalty = weights.w_l * diff;
                    breakdown.content = bm - weights.w_l * diff;
                    breakdown.matching = matching;
                }
                Err(e) => {
                    breakdown.diagnostic = Some(e.to_string());
                }
            }
        }
        ScoreTarget::Completion(label) => {
            breakdown.content = completion_reward(&answer, *label);
        }
    }

    breakdown.total = weights.w_f * breakdown.format + weights.w_c * breakdown.content;
    Ok(breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::render_response;

    fn grammar() -> SkillGrammar {
        SkillGrammar::default_desk()
    }

    fn plan(text: &str) -> Plan {
        parse_plan(text, &grammar()).expect("test plan parses")
    }

    fn w() -> RewardWeights {
        RewardWeights::default()
    }

    #[test]
    fn format_reward_matches_template() {
        assert_eq!(format_reward("<think>t</think><answer>a</answer>"), 1.0);
        assert_eq!(format_reward("answer only, no tags"), 0.0);
        assert_eq!(format_reward("<think>t</think>"), 0.0);
    }

    #[test]
    fn bm_identity_is_one() {
        let p = plan("1. Put apple into basket.\n2. Pick up pen.\n3. Open box.");
        let (bm, matching) =
            bipartite_match_score(&p, &p, &grammar(), &Ontology::empty(), &w()).unwrap();
        assert_eq!(bm, 1.0);
        let ids: Vec<(usize, usize)> = matching
            .pairs
            .iter()
            .map(|pr| (pr.generated, pr.ground_truth))
            .collect();
        assert_eq!(ids, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn bm_ignores_step_order() {
        let gt = plan("1. Put apple into basket.\n2. Pick up pen.\n3. Open box.");
        let rev = plan("1. Open box.\n2. Pick up pen.\n3. Put apple into basket.");
        let (bm, _) =
            bipartite_match_score(&rev, &gt, &grammar(), &Ontology::empty(), &w()).unwrap();
        assert_eq!(bm, 1.0);
    }

    #[test]
    fn bm_short_plan_is_half() {
        let g = plan("1. Pick up apple.");
        let gt = plan("1. Pick up apple.\n2. Put apple into basket.");
        let (bm, matching) =
            bipartite_match_score(&g, &gt, &grammar(), &Ontology::empty(), &w()).unwrap();
        assert!((bm - 0.5).abs() < 1e-15, "got {bm}");
        assert_eq!(matching.pairs.len(), 1);
    }

    #[test]
    fn bm_empty_generated_scores_zero() {
        let gt = plan("1. Pick up apple.");
        let (bm, matching) =
            bipartite_match_score(&Plan::default(), &gt, &grammar(), &Ontology::empty(), &w())
                .unwrap();
        assert_eq!(bm, 0.0);
        assert!(matching.pairs.is_empty());
    }

    #[test]
    fn bm_rejects_empty_ground_truth() {
        let g = plan("1. Pick up apple.");
        assert!(matches!(
            bipartite_match_score(&g, &Plan::default(), &grammar(), &Ontology::empty(), &w()),
            Err(RewardError::EmptyGroundTruth)
        ));
    }

    #[test]
    fn content_exact_match_is_one() {
        let p = plan("1. Put apple into basket.\n2. Open box.");
        let c = content_reward(&p, &p, &grammar(), &Ontology::empty(), &w()).unwrap();
        assert_eq!(c, 1.0);
    }

    #[test]
    fn content_applies_length_penalty() {
        let g = plan("1. Pick up apple.");
        let gt = plan("1. Pick up apple.\n2. Put apple into basket.");
        let c = content_reward(&g, &gt, &grammar(), &Ontology::empty(), &w()).unwrap();
        assert!((c - 0.4).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn content_can_go_negative() {
        // five steps sharing nothing with a two-step ground truth
        let g = plan(
            "1. Open box.\n2. Open box.\n3. Open box.\n4. Open box.\n5. Open box.",
        );
        let gt = plan("1. Pick up apple.\n2. Pour into cup.");
        let c = content_reward(&g, &gt, &grammar(), &Ontology::empty(), &w()).unwrap();
        assert!((c - (-0.3)).abs() < 1e-12, "got {c}");
    }

    #[test]
    fn completion_reward_is_exact_match() {
        assert_eq!(completion_reward("True", true), 1.0);
        assert_eq!(completion_reward(" True\n", true), 1.0);
        assert_eq!(completion_reward("true", true), 0.0);
        assert_eq!(completion_reward("The task is done", true), 0.0);
        assert_eq!(completion_reward("False", false), 1.0);
        assert_eq!(completion_reward("False", true), 0.0);
    }

    #[test]
    fn total_reward_exact_plan() {
        let gt = plan("1. Put apple into basket.");
        let text = render_response("t", "1. Put apple into basket.");
        let b = total_reward(
            &text,
            &ScoreTarget::Plan(&gt),
            &grammar(),
            &Ontology::empty(),
            &w(),
        )
        .unwrap();
        assert_eq!(b.format, 1.0);
        assert_eq!(b.content, 1.0);
        assert!((b.total - (0.1 + 0.9)).abs() < 1e-15);
    }

    #[test]
    fn total_reward_bad_format_good_answer() {
        let gt = plan("1. Put apple into basket.");
        let text = "<answer>1. Put apple into basket.</answer>";
        let b = total_reward(
            text,
            &ScoreTarget::Plan(&gt),
            &grammar(),
            &Ontology::empty(),
            &w(),
        )
        .unwrap();
        assert_eq!(b.format, 0.0);
        assert_eq!(b.content, 1.0);
        assert!((b.total - 0.9).abs() < 1e-15);
    }

    #[test]
    fn total_reward_unparseable_plan_folds_to_zero_content() {
        let gt = plan("1. Put apple into basket.");
        let text = render_response("t", "1. Wiggle the apple.");
        let b = total_reward(
            &text,
            &ScoreTarget::Plan(&gt),
            &grammar(),
            &Ontology::empty(),
            &w(),
        )
        .unwrap();
        assert_eq!(b.format, 1.0);
        assert_eq!(b.content, 0.0);
        assert!(b.diagnostic.is_some());
        assert!((b.total - 0.1).abs() < 1e-15);
    }

    #[test]
    fn total_reward_completion_mode() {
        let text = render_response("check", "True");
        let b = total_reward(
            &text,
            &ScoreTarget::Completion(true),
            &grammar(),
            &Ontology::empty(),
            &w(),
        )
        .unwrap();
        assert_eq!(b.content, 1.0);
        assert!(b.matching.pairs.is_empty());
        let b2 = total_reward(
            &render_response("check", "False"),
            &ScoreTarget::Completion(true),
            &grammar(),
            &Ontology::empty(),
            &w(),
        )
        .unwrap();
        assert_eq!(b2.content, 0.0);
    }

    #[test]
    fn untagged_completion_answer_still_scores_content() {
        let b = total_reward(
            "True",
            &ScoreTarget::Completion(true),
            &grammar(),
            &Ontology::empty(),
            &w(),
        )
        .unwrap();
        assert_eq!(b.format, 0.0);
        assert_eq!(b.content, 1.0);
    }
}
