//! Hyper-parameter sweep for the toy trainer. Ignored by default; run with
//! `cargo test --test calibrate -- --ignored --nocapture` when retuning.

use planrl_core::datagen::{compose_task, ConstraintTable, InstructionPool};
use planrl_core::grammar::{Ontology, Plan, SkillGrammar};
use planrl_core::grpo::{train_toy, GrpoConfig, StepVocab, ToyTask};
use planrl_core::reward::RewardWeights;
use planrl_core::Rng;

fn tasks_and_vocab(grammar: &SkillGrammar, seed: u64) -> (Vec<ToyTask>, StepVocab) {
    // each verb manipulates its own distinct items, so distinct candidate
    // steps are at most verb-similar (0.3) to one another
    let per_template: &[(&str, &[&str], &[&str])] = &[
        ("Put [object] into [location].", &["apple"], &["basket"]),
        ("Put [object] into [location].", &["banana"], &["crate"]),
        ("Put [object] into [location].", &["pen"], &["tray"]),
        ("Pick up [object].", &["cup", "lid", "spoon"], &[]),
        ("Open [object].", &["drawer", "jar", "case"], &[]),
        ("Push [object].", &["stapler", "mouse", "chair"], &[]),
        ("Pour into [location].", &[], &["mug", "bowl", "sink"]),
        ("Place into [location].", &[], &["bin", "shelf", "pocket"]),
    ];
    let mut candidates = Vec::new();
    for (pattern, objects, locations) in per_template {
        let id = grammar.find_pattern(pattern).unwrap();
        let objects: Vec<String> = objects.iter().map(|s| s.to_string()).collect();
        let locations: Vec<String> = locations.iter().map(|s| s.to_string()).collect();
        let sub = StepVocab::build_for(grammar, &[id], &objects, &locations);
        candidates.extend(sub.candidates);
    }
    let vocab = StepVocab { candidates };
    let library: Vec<_> = vocab
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let demo_id = format!("cal-demo-{i:03}");
            planrl_core::datagen::SkillDemo {
                keyframes: planrl_core::datagen::Keyframes {
                    init_ref: format!("{demo_id}/init"),
                    mid_ref: format!("{demo_id}/mid"),
                    final_ref: format!("{demo_id}/final"),
                },
                demo_id,
                step: c.step.clone(),
            }
        })
        .collect();
    let pool = InstructionPool::default_desk();
    let table = ConstraintTable::default_desk();
    let mut rng = Rng::seed_from(seed);
    let tasks = (0..20)
        .map(|i| {
            let k = rng.range_inclusive(2, 4);
            let spec = compose_task(
                &library,
                k,
                &pool,
                &table,
                grammar,
                &format!("cal-{i:02}"),
                &mut rng,
            )
            .unwrap();
            ToyTask {
                id: spec.task_id.clone(),
                instruction: spec.instruction.clone(),
                ground_truth: Plan::new(spec.sequence.iter().map(|d| d.step.clone()).collect()),
            }
        })
        .collect();
    (tasks, vocab)
}

#[test]
#[ignore]
fn inspect_stuck_tasks() {
    let grammar = SkillGrammar::default_desk();
    let weights = RewardWeights::default();
    let (tasks, vocab) = tasks_and_vocab(&grammar, 0xAC3);
    let cfg = GrpoConfig {
        group_size: 8,
        clip: 0.2,
        kl_weight: 0.04,
        learning_rate: 0.9,
        steps: 2000,
        seed: 3,
        ref_refresh: Some(500),
    };
    let report = train_toy(&tasks, &vocab, 5, &cfg, &grammar, &Ontology::empty(), &weights).unwrap();
    for (task, outcome) in tasks.iter().zip(&report.outcomes) {
        if !outcome.greedy_reward_perfect {
            println!(
                "STUCK {}\n  truth:  {:?}\n  greedy: {:?}",
                task.id,
                task.ground_truth.render(&grammar),
                outcome.greedy_plan
            );
        }
    }
}

#[test]
#[ignore]
fn sweep_learning_rate_and_ref_refresh() {
    let grammar = SkillGrammar::default_desk();
    let weights = RewardWeights::default();
    let (tasks, vocab) = tasks_and_vocab(&grammar, 0xAC3);

    for lr in [0.6, 0.9, 1.1] {
        for refresh in [None, Some(500), Some(1200)] {
            let mut rewards = Vec::new();
            let mut perfects = Vec::new();
            for seed in [1u64, 2, 3, 4, 5] {
                let cfg = GrpoConfig {
                    group_size: 8,
                    clip: 0.2,
                    kl_weight: 0.04,
                    learning_rate: lr,
                    steps: 2000,
                    seed,
                    ref_refresh: refresh,
                };
                let report =
                    train_toy(&tasks, &vocab, 5, &cfg, &grammar, &Ontology::empty(), &weights)
                        .unwrap();
                rewards.push(report.final_mean_reward);
                perfects.push(
                    report
                        .outcomes
                        .iter()
                        .filter(|o| o.greedy_reward_perfect)
                        .count(),
                );
            }
            println!(
                "lr {lr:>4} refresh {refresh:?}: rewards {:?} perfect {:?}",
                rewards
                    .iter()
                    .map(|r| (r * 1000.0).round() / 1000.0)
                    .collect::<Vec<_>>(),
                perfects
            );
        }
    }
}
