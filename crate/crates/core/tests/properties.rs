//! Property tests for the crate's contract invariants: reward symmetry and
//! range, permutation invariance, grammar round-trips, format/parse
//! agreement, and advantage standardization.

use planrl_core::grammar::{
    parse_plan, parse_response, Ontology, Plan, PlanStep, SkillGrammar, SlotName,
};
use planrl_core::grpo::group_advantages;
use planrl_core::reward::{
    bipartite_match_score, content_reward, format_reward, similarity_matrix, step_similarity,
    RewardWeights,
};
use proptest::prelude::*;

fn grammar() -> SkillGrammar {
    SkillGrammar::default_desk()
}

fn ontology() -> Ontology {
    Ontology::parse_str("fruits: apple, banana\ncontainers: basket, box").unwrap()
}

const OBJECTS: &[&str] = &["apple", "banana", "pen", "teacup", "cup", "tea pot"];
const LOCATIONS: &[&str] = &["basket", "box", "tray", "mouse pad"];

fn arb_step() -> impl Strategy<Value = PlanStep> {
    (0usize..9, 0usize..OBJECTS.len(), 0usize..LOCATIONS.len()).prop_map(|(t, o, l)| {
        let g = grammar();
        let template = planrl_core::grammar::TemplateId(t);
        let mut args = std::collections::BTreeMap::new();
        for slot in &g.template(template).slots {
            match slot {
                SlotName::Object => {
                    args.insert(SlotName::Object, OBJECTS[o].to_string());
                }
                SlotName::Location => {
                    args.insert(SlotName::Location, LOCATIONS[l].to_string());
                }
            }
        }
        PlanStep::new(&g, template, args).expect("pool step is valid")
    })
}

fn arb_plan(max_len: usize) -> impl Strategy<Value = Plan> {
    proptest::collection::vec(arb_step(), 0..=max_len).prop_map(Plan::new)
}

fn arb_nonempty_plan(max_len: usize) -> impl Strategy<Value = Plan> {
    proptest::collection::vec(arb_step(), 1..=max_len).prop_map(Plan::new)
}

proptest! {
    #[test]
    fn plans_roundtrip_through_rendering(plan in arb_plan(6)) {
        let g = grammar();
        let rendered = plan.render(&g);
        let parsed = parse_plan(&rendered, &g).expect("rendered plans parse");
        prop_assert_eq!(parsed, plan);
    }

    #[test]
    fn generated_step_text_matches_exactly_one_template(step in arb_step()) {
        let g = grammar();
        let line = format!("1. {}", step.render(&g));
        // a parse failure here would be NoTemplateMatch or Ambiguous
        let parsed = parse_plan(&line, &g).expect("unambiguous");
        prop_assert_eq!(&parsed.steps[0], &step);
    }

    #[test]
    fn step_similarity_is_symmetric_and_bounded(a in arb_step(), b in arb_step()) {
        let g = grammar();
        let o = ontology();
        let w = RewardWeights::default();
        let ab = step_similarity(&a, &b, &g, &o, &w);
        let ba = step_similarity(&b, &a, &g, &o, &w);
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(step_similarity(&a, &a, &g, &o, &w), 1.0);
    }

    #[test]
    fn match_score_is_symmetric_bounded_and_one_on_identity(
        a in arb_plan(5),
        b in arb_nonempty_plan(5),
    ) {
        let g = grammar();
        let o = ontology();
        let w = RewardWeights::default();
        let (bm_ab, matching) = bipartite_match_score(&a, &b, &g, &o, &w).unwrap();
        prop_assert!((0.0..=1.0).contains(&bm_ab));
        prop_assert!(matching.total_weight <= a.len().min(b.len()) as f64 + 1e-12);
        if !a.is_empty() {
            let (bm_ba, _) = bipartite_match_score(&b, &a, &g, &o, &w).unwrap();
            // the canonical summation order keys on the generated side, so
            // symmetry holds up to fold association
            prop_assert!((bm_ab - bm_ba).abs() <= 1e-12);
        }
        prop_assert_eq!(content_reward(&b, &b, &g, &o, &w).unwrap(), 1.0);
    }

    #[test]
    fn match_score_is_permutation_invariant(
        a in arb_nonempty_plan(5),
        b in arb_nonempty_plan(5),
        seed in any::<u64>(),
    ) {
        let g = grammar();
        let o = ontology();
        let w = RewardWeights::default();
        let mut rng = planrl_core::Rng::seed_from(seed);
        let mut shuffled = a.steps.clone();
        rng.shuffle(&mut shuffled);
        let shuffled = Plan::new(shuffled);
        let (bm, _) = bipartite_match_score(&a, &b, &g, &o, &w).unwrap();
        let (bm_shuffled, _) = bipartite_match_score(&shuffled, &b, &g, &o, &w).unwrap();
        prop_assert!((bm - bm_shuffled).abs() <= 1e-12);
    }

    #[test]
    fn duplicating_a_step_in_a_covering_plan_never_increases_bm(
        b in arb_nonempty_plan(4),
        extras in proptest::collection::vec(arb_step(), 0..3),
        seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
    ) {
        // Once the generated plan already attains every ground-truth step's
        // best similarity (here: it contains the ground truth outright), a
        // duplicate can only match a dummy or displace weight, while the
        // denominator may grow. Unconditionally the claim is false: against
        // ground truth [A, A], a generated [A] scores 0.5 but [A, A] scores
        // 1.0, the duplicate pairing with a real second partner.
        let g = grammar();
        let o = ontology();
        let w = RewardWeights::default();
        let mut steps = b.steps.clone();
        steps.extend(extras);
        let mut rng = planrl_core::Rng::seed_from(seed);
        rng.shuffle(&mut steps);
        let a = Plan::new(steps);
        let (bm, _) = bipartite_match_score(&a, &b, &g, &o, &w).unwrap();
        let mut duplicated = a.steps.clone();
        duplicated.push(a.steps[pick.index(a.len())].clone());
        let duplicated = Plan::new(duplicated);
        let (bm_dup, _) = bipartite_match_score(&duplicated, &b, &g, &o, &w).unwrap();
        prop_assert!(bm_dup <= bm + 1e-12, "bm {bm} grew to {bm_dup}");
    }

    #[test]
    fn padding_a_perfect_plan_with_duplicates_dilutes_it(
        b in arb_nonempty_plan(4),
        extra in 1usize..3,
    ) {
        let g = grammar();
        let o = ontology();
        let w = RewardWeights::default();
        let mut padded = b.steps.clone();
        for _ in 0..extra {
            padded.push(b.steps[0].clone());
        }
        let padded = Plan::new(padded);
        let (bm, _) = bipartite_match_score(&padded, &b, &g, &o, &w).unwrap();
        let expected = b.len() as f64 / (b.len() + extra) as f64;
        prop_assert!((bm - expected).abs() <= 1e-12);
    }

    #[test]
    fn similarity_matrix_entries_are_bounded(
        a in arb_nonempty_plan(4),
        b in arb_nonempty_plan(4),
    ) {
        let g = grammar();
        let o = ontology();
        let w = RewardWeights::default();
        let matrix = similarity_matrix(&a, &b, &g, &o, &w);
        for row in &matrix {
            for &entry in row {
                prop_assert!((0.0..=1.0).contains(&entry));
            }
        }
    }

    #[test]
    fn advantages_are_affine_invariant(
        rewards in proptest::collection::vec(0.0f64..1.0, 2..16),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let transformed: Vec<f64> = rewards.iter().map(|r| scale * r + shift).collect();
        let base = group_advantages(&rewards).unwrap();
        let moved = group_advantages(&transformed).unwrap();
        for (x, y) in base.iter().zip(&moved) {
            prop_assert!((x - y).abs() <= 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn format_reward_agrees_with_parse_response(
        think in "[a-zA-Z0-9 .\\n]{0,40}",
        answer in "[a-zA-Z0-9 .\\n]{0,40}",
        prefix in "[ \\t\\n]{0,4}",
        corrupt in proptest::option::of(0usize..5),
    ) {
        let mut text = format!("{prefix}<think>{think}</think><answer>{answer}</answer>");
        if let Some(mode) = corrupt {
            text = match mode {
                0 => text.replacen("<think>", "", 1),
                1 => text.replacen("</answer>", "", 1),
                2 => format!("{text}<answer>again</answer>"),
                3 => format!("{text} trailing"),
                _ => format!("<answer>early</answer>{text}"),
            };
        }
        let reward = format_reward(&text);
        let parsed = parse_response(&text).is_ok();
        prop_assert_eq!(reward == 1.0, parsed);
        if corrupt.is_none() {
            // think/answer drawn from tag-free alphabets, so the template holds
            prop_assert!(parsed);
        }
    }
}
