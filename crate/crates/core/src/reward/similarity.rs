//! Step similarity.

use super::RewardWeights;
use crate::grammar::{Ontology, Plan, PlanStep, SkillGrammar};

/// Similarity of two slot arguments: exact match after trim and casefold,
/// substring in either direction, or joint membership in an ontology set.
/// The substring rule requires both sides non-empty; the empty string is a
/// substring of everything and arguments are non-empty by invariant anyway.
fn args_similar(a: &str, b: &str, ontology: &Ontology) -> bool {
    let a_norm = a.trim().to_lowercase();
    let b_norm = b.trim().to_lowercase();
    a_norm == b_norm
        || (!a_norm.is_empty()
            && !b_norm.is_empty()
            && (a_norm.contains(&b_norm) || b_norm.contains(&a_norm)))
        || ontology.same_set(&a_norm, &b_norm)
}

/// Weighted step similarity in `[0, 1]`.
///
/// The action term is 1 iff the verb lexemes of the two templates are equal.
/// The object term aligns slot arguments positionally (object first, then
/// location) and averages per-position similarity over `max(a, b)` positions,
/// where `a` and `b` are the slot counts; a position where either argument is
/// missing scores 0. Two zero-slot steps have object similarity 1.
pub fn step_similarity(
    p: &PlanStep,
    q: &PlanStep,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> f64 {
    let tp = grammar.template(p.template);
    let tq = grammar.template(q.template);
    let sim_act = if tp.verb == tq.verb { 1.0 } else { 0.0 };

    let pa = p.positional_args();
    let qa = q.positional_args();
    let positions = pa.len().max(qa.len());
    let sim_obj = if positions == 0 {
        1.0
    } else {
        let mut hits = 0usize;
        for i in 0..positions {
            if let (Some(a), Some(b)) = (pa.get(i), qa.get(i)) {
                if args_similar(a, b, ontology) {
                    hits += 1;
                }
            }
        }
        hits as f64 / positions as f64
    };

    weights.w_a * sim_act + weights.w_o * sim_obj
}

/// The full `M x N` similarity matrix between two plans, row-major with
/// generated steps as rows.
pub fn similarity_matrix(
    generated: &Plan,
    ground_truth: &Plan,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Vec<Vec<f64>> {
    generated
        .steps
        .iter()
        .map(|p| {
            ground_truth
                .steps
                .iter()
                .map(|q| step_similarity(p, q, grammar, ontology, weights))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::SlotName;

    fn step(grammar: &SkillGrammar, pattern: &str, args: &[(SlotName, &str)]) -> PlanStep {
        let id = grammar.find_pattern(pattern).expect("pattern");
        crate::grammar::PlanStep::new(
            grammar,
            id,
            args.iter().map(|(k, v)| (*k, v.to_string())).collect(),
        )
        .expect("valid step")
    }

    fn weights() -> RewardWeights {
        RewardWeights::default()
    }

    #[test]
    fn identical_steps_score_one() {
        let g = SkillGrammar::default_desk();
        let s = step(
            &g,
            "Put [object] into [location].",
            &[(SlotName::Object, "apple"), (SlotName::Location, "basket")],
        );
        let sim = step_similarity(&s, &s, &g, &Ontology::empty(), &weights());
        assert_eq!(sim, 1.0);
    }

    #[test]
    fn object_mismatch_scores_065() {
        let g = SkillGrammar::default_desk();
        let a = step(
            &g,
            "Put [object] into [location].",
            &[(SlotName::Object, "apple"), (SlotName::Location, "basket")],
        );
        let b = step(
            &g,
            "Put [object] into [location].",
            &[(SlotName::Object, "pen"), (SlotName::Location, "basket")],
        );
        let sim = step_similarity(&a, &b, &g, &Ontology::empty(), &weights());
        assert!((sim - 0.65).abs() < 1e-12, "got {sim}");
    }

    #[test]
    fn substring_rule_matches_teacup_cup() {
        let g = SkillGrammar::default_desk();
        let a = step(&g, "Pick up [object].", &[(SlotName::Object, "teacup")]);
        let b = step(&g, "Pick up [object].", &[(SlotName::Object, "cup")]);
        let sim = step_similarity(&a, &b, &g, &Ontology::empty(), &weights());
        assert!((sim - 1.0).abs() < 1e-12, "got {sim}");
    }

    #[test]
    fn disjoint_steps_score_zero() {
        let g = SkillGrammar::default_desk();
        let a = step(
            &g,
            "Put [object] on [location].",
            &[(SlotName::Object, "apple"), (SlotName::Location, "tray")],
        );
        let b = step(&g, "Open [object].", &[(SlotName::Object, "box")]);
        let sim = step_similarity(&a, &b, &g, &Ontology::empty(), &weights());
        assert_eq!(sim, 0.0);
    }

    #[test]
    fn ontology_set_counts_as_similar() {
        let g = SkillGrammar::default_desk();
        let o = Ontology::parse_str("fruits: apple, banana").unwrap();
        let a = step(&g, "Pick up [object].", &[(SlotName::Object, "Apple")]);
        let b = step(&g, "Pick up [object].", &[(SlotName::Object, "banana")]);
        assert_eq!(step_similarity(&a, &b, &g, &o, &weights()), 1.0);
        assert_eq!(
            step_similarity(&a, &b, &g, &Ontology::empty(), &weights()),
            0.3
        );
    }

    #[test]
    fn one_slot_vs_two_slot_aligns_positionally() {
        let g = SkillGrammar::default_desk();
        let pick = step(&g, "Pick up [object].", &[(SlotName::Object, "apple")]);
        let put = step(
            &g,
            "Put [object] into [location].",
            &[(SlotName::Object, "apple"), (SlotName::Location, "basket")],
        );
        // verbs differ; object slot aligns, missing location scores 0
        let sim = step_similarity(&pick, &put, &g, &Ontology::empty(), &weights());
        assert!((sim - 0.35).abs() < 1e-12, "got {sim}");
    }

    #[test]
    fn location_only_template_aligns_at_position_zero() {
        let g = SkillGrammar::default_desk();
        let pour = step(&g, "Pour into [location].", &[(SlotName::Location, "cup")]);
        let place = step(&g, "Place on [location].", &[(SlotName::Location, "cup")]);
        // different verbs, single aligned argument matches exactly
        let sim = step_similarity(&pour, &place, &g, &Ontology::empty(), &weights());
        assert!((sim - 0.7).abs() < 1e-12, "got {sim}");
    }

    #[test]
    fn similarity_is_symmetric() {
        let g = SkillGrammar::default_desk();
        let o = Ontology::parse_str("containers: basket, box").unwrap();
        let a = step(
            &g,
            "Put [object] into [location].",
            &[(SlotName::Object, "teacup"), (SlotName::Location, "basket")],
        );
        let b = step(&g, "Pick up [object].", &[(SlotName::Object, "cup")]);
        let ab = step_similarity(&a, &b, &g, &o, &weights());
        let ba = step_similarity(&b, &a, &g, &o, &weights());
        assert_eq!(ab, ba);
    }
}
