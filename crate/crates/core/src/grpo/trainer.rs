//! The desk-scale trainer: one tabular plan policy per task, updated
//! round-robin under the verifiable reward.

use super::objective::{group_advantages, grpo_objective, objective_gradient};
use super::policy::{SampledResponse, StepVocab, ToyPlanPolicy};
use super::{GrpoConfig, GrpoError, GrpoGroup};
use crate::grammar::{parse_plan, parse_response, Ontology, Plan, SkillGrammar};
use crate::reward::{total_reward, RewardWeights, ScoreTarget};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

/// One training task: an instruction with its ground-truth plan.
#[derive(Debug, Clone)]
pub struct ToyTask {
    pub id: String,
    pub instruction: String,
    pub ground_truth: Plan,
}

/// Per-step training telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainStepRecord {
    pub step: usize,
    pub task_index: usize,
    pub mean_reward: f64,
    pub mean_abs_advantage: f64,
    pub kl_estimate: f64,
    pub clip_fraction: f64,
    pub loss: f64,
}

/// Final per-task result of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub greedy_plan: String,
    /// Greedy decode equals the ground-truth step sequence exactly.
    pub greedy_matches_truth: bool,
    /// Greedy decode is reward-perfect: content reward 1, i.e. a perfect
    /// bipartite match at equal length. The reward scores reordered but
    /// semantically correct plans as perfect, so this is the criterion the
    /// optimizer can actually be held to; `greedy_matches_truth` addition-
    /// ally pins the order.
    pub greedy_reward_perfect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub steps: Vec<TrainStepRecord>,
    pub outcomes: Vec<TaskOutcome>,
    /// Mean of `mean_reward` over the last full round-robin cycle, so every
    /// task contributes one group.
    pub final_mean_reward: f64,
}

/// Run GRPO over the tasks with one position-factorized policy per task.
///
/// Each step picks a task round-robin, samples a group of `group_size`
/// responses from that task's policy, scores them with the verifiable reward
/// (parse failures fold to zero content, never abort), standardizes the
/// rewards into advantages, and applies one analytic gradient-ascent update
/// of the clipped surrogate objective. The reference policies stay at
/// initialization unless `ref_refresh` is set.
///
/// A frozen uniform reference has a failure mode on long runs: once the
/// policy is sharply concentrated, sampling a deeply suppressed action makes
/// the KL estimator's gradient coefficient `beta * (exp(d) - 1)` explode
/// (`d` is the reference-to-current log-ratio), which can knock a converged
/// position over in one update. Setting `ref_refresh` bounds that log-ratio
/// by letting the reference track the policy.
pub fn train_toy(
    tasks: &[ToyTask],
    vocab: &StepVocab,
    k_max: usize,
    cfg: &GrpoConfig,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Result<TrainReport, GrpoError> {
    train_toy_with_policies(tasks, vocab, k_max, cfg, grammar, ontology, weights)
        .map(|(report, _)| report)
}

/// [`train_toy`] variant that also returns the trained per-task policies,
/// for tests that inspect the final distributions.
pub fn train_toy_with_policies(
    tasks: &[ToyTask],
    vocab: &StepVocab,
    k_max: usize,
    cfg: &GrpoConfig,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Result<(TrainReport, Vec<ToyPlanPolicy>), GrpoError> {
    if tasks.is_empty() {
        return Err(GrpoError::NoTasks);
    }
    cfg.validate()?;

    let mut policies: Vec<ToyPlanPolicy> = tasks
        .iter()
        .map(|_| ToyPlanPolicy::new(vocab.clone(), k_max))
        .collect();
    let mut rng = Rng::seed_from(cfg.seed);
    let mut records = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        // reference snapshots advance for every policy, not just the one
        // being updated, so round-robin task order cannot starve any of them
        if let Some(every) = cfg.ref_refresh {
            if every > 0 && step > 0 && step % every == 0 {
                for policy in &mut policies {
                    policy.refresh_reference();
                }
            }
        }

        let task_index = step % tasks.len();
        let task = &tasks[task_index];
        let policy = &mut policies[task_index];

        let mut group = GrpoGroup::default();
        for _ in 0..cfg.group_size {
            let (actions, logp) = policy.sample_actions(&mut rng);
            let text = policy.response_for(&actions);
            let breakdown = total_reward(
                &text,
                &ScoreTarget::Plan(&task.ground_truth),
                grammar,
                ontology,
                weights,
            )
            .expect("toy tasks have non-empty ground truth");
            group.rewards.push(breakdown.total);
            group.logp_old.push(logp);
            group.logp_new.push(policy.logp(&actions));
            group.logp_ref.push(policy.logp_ref(&actions));
            group.responses.push(SampledResponse {
                actions,
                text,
                logp,
            });
        }
        group.advantages = group_advantages(&group.rewards)?;

        let (loss, diagnostics) = grpo_objective(&group, cfg)?;
        let gradient = objective_gradient(policy, &group, cfg);
        policy.ascend(&gradient, cfg.learning_rate);

        let b = group.rewards.len() as f64;
        records.push(TrainStepRecord {
            step,
            task_index,
            mean_reward: group.rewards.iter().sum::<f64>() / b,
            mean_abs_advantage: group.advantages.iter().map(|a| a.abs()).sum::<f64>() / b,
            kl_estimate: diagnostics.mean_kl,
            clip_fraction: diagnostics.clip_fraction,
            loss,
        });
    }

    let outcomes: Vec<TaskOutcome> = tasks
        .iter()
        .zip(&policies)
        .map(|(task, policy)| {
            let actions = policy.greedy_actions();
            let text = policy.response_for(&actions);
            let answer = parse_response(&text).expect("rendered response is well-formed").answer;
            let greedy = parse_plan(&answer, grammar).unwrap_or_default();
            let content =
                crate::reward::content_reward(&greedy, &task.ground_truth, grammar, ontology, weights)
                    .expect("toy tasks have non-empty ground truth");
            TaskOutcome {
                task_id: task.id.clone(),
                greedy_plan: answer,
                greedy_matches_truth: greedy == task.ground_truth,
                greedy_reward_perfect: (content - 1.0).abs() < 1e-9,
            }
        })
        .collect();

    let window = records.len().min(tasks.len()).max(1);
    let final_mean_reward = if records.is_empty() {
        0.0
    } else {
        records[records.len() - window..]
            .iter()
            .map(|r| r.mean_reward)
            .sum::<f64>()
            / window as f64
    };

    Ok((
        TrainReport {
            steps: records,
            outcomes,
            final_mean_reward,
        },
        policies,
    ))
}
