//! Advantages and the clipped surrogate objective.

use super::{GrpoConfig, GrpoError, GrpoGroup};

/// Standard deviations at or below this are treated as a degenerate group:
/// all advantages fold to zero instead of amplifying rounding noise.
const ZERO_STD: f64 = 1e-9;

/// Standardize rewards within a group using the population standard
/// deviation. Zero-variance groups yield all-zero advantages.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, GrpoError> {
    let n = rewards.len();
    if n < 2 {
        return Err(GrpoError::GroupTooSmall { size: n });
    }
    let mean = rewards.iter().sum::<f64>() / n as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    if std <= ZERO_STD {
        return Ok(vec![0.0; n]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Per-group diagnostics of one objective evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ObjectiveDiagnostics {
    /// Fraction of samples whose ratio fell outside `[1-eps, 1+eps]`.
    pub clip_fraction: f64,
    /// Mean of the nonnegative KL estimator `exp(d) - d - 1`.
    pub mean_kl: f64,
    /// Mean probability ratio `exp(logp_new - logp_old)`.
    pub mean_ratio: f64,
}

/// Evaluate the clipped surrogate objective with KL penalty and return the
/// loss (its negation) plus diagnostics.
///
/// Per sample: `s1 = exp(logp_new - logp_old)`, `s2 = clip(s1, 1-eps, 1+eps)`,
/// term `min(s1*A, s2*A) - beta * k3` with
/// `k3 = exp(logp_ref - logp_new) - (logp_ref - logp_new) - 1 >= 0`.
/// The objective is the mean term over the group.
pub fn grpo_objective(
    group: &GrpoGroup,
    cfg: &GrpoConfig,
) -> Result<(f64, ObjectiveDiagnostics), GrpoError> {
    let n = group.advantages.len();
    if group.logp_old.len() != n || group.logp_new.len() != n || group.logp_ref.len() != n {
        return Err(GrpoError::LengthMismatch);
    }
    if n == 0 {
        return Err(GrpoError::GroupTooSmall { size: 0 });
    }
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    if !finite(&group.logp_old) || !finite(&group.logp_new) || !finite(&group.logp_ref) {
        return Err(GrpoError::NonFiniteLogProb);
    }

    let mut objective = 0.0;
    let mut clipped = 0usize;
    let mut kl_sum = 0.0;
    let mut ratio_sum = 0.0;
    for i in 0..n {
        let adv = group.advantages[i];
        let s1 = (group.logp_new[i] - group.logp_old[i]).exp();
        let s2 = s1.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        if s1 != s2 {
            clipped += 1;
        }
        let delta = group.logp_ref[i] - group.logp_new[i];
        let k3 = delta.exp() - delta - 1.0;
        objective += (s1 * adv).min(s2 * adv) - cfg.kl_weight * k3;
        kl_sum += k3;
        ratio_sum += s1;
    }
    objective /= n as f64;

    Ok((
        -objective,
        ObjectiveDiagnostics {
            clip_fraction: clipped as f64 / n as f64,
            mean_kl: kl_sum / n as f64,
            mean_ratio: ratio_sum / n as f64,
        },
    ))
}

/// Analytic gradient of the objective (not the loss) with respect to the
/// policy's logits, for the responses recorded in the group.
///
/// The per-sample coefficient on `d logp_new` is `A * s1` on the unclipped
/// branch of the min, zero on the clipped branch, minus
/// `beta * (1 - exp(logp_ref - logp_new))` from the KL term. The logit
/// gradient then follows from the softmax Jacobian
/// `d logp / d logit[t][v] = 1{action_t = v} - p_t[v]` over the positions the
/// response consumed.
pub fn objective_gradient(
    policy: &super::ToyPlanPolicy,
    group: &GrpoGroup,
    cfg: &GrpoConfig,
) -> Vec<Vec<f64>> {
    let n = group.advantages.len();
    let mut grad = vec![vec![0.0; policy.categories()]; policy.k_max()];
    let probs: Vec<Vec<f64>> = (0..policy.k_max()).map(|t| policy.probs(t)).collect();

    for i in 0..n {
        let adv = group.advantages[i];
        let s1 = (group.logp_new[i] - group.logp_old[i]).exp();
        let s2 = s1.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let surrogate = if s1 * adv <= s2 * adv { adv * s1 } else { 0.0 };
        let delta = group.logp_ref[i] - group.logp_new[i];
        let kl = -cfg.kl_weight * (1.0 - delta.exp());
        let coef = (surrogate + kl) / n as f64;

        for (t, &action) in group.responses[i].actions.iter().enumerate() {
            let row = &mut grad[t];
            let p = &probs[t];
            for (v, g) in row.iter_mut().enumerate() {
                let indicator = if v == action { 1.0 } else { 0.0 };
                *g += coef * (indicator - p[v]);
            }
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grpo::SampledResponse;

    fn group_from(
        advantages: Vec<f64>,
        logp_old: Vec<f64>,
        logp_new: Vec<f64>,
        logp_ref: Vec<f64>,
    ) -> GrpoGroup {
        GrpoGroup {
            responses: advantages
                .iter()
                .map(|_| SampledResponse::default())
                .collect(),
            rewards: advantages.clone(),
            advantages,
            logp_old,
            logp_new,
            logp_ref,
        }
    }

    #[test]
    fn advantages_two_point_group() {
        let a = group_advantages(&[0.0, 1.0]).unwrap();
        assert_eq!(a, vec![-1.0, 1.0]);
    }

    #[test]
    fn advantages_constant_group_is_zero() {
        let a = group_advantages(&[0.7, 0.7, 0.7, 0.7]).unwrap();
        assert_eq!(a, vec![0.0; 4]);
    }

    #[test]
    fn advantages_one_hot_group() {
        let a = group_advantages(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let expected_hi = 3.0_f64.sqrt();
        let expected_lo = -1.0 / 3.0_f64.sqrt();
        assert!((a[0] - expected_hi).abs() < 1e-12, "got {}", a[0]);
        for v in &a[1..] {
            assert!((v - expected_lo).abs() < 1e-12, "got {v}");
        }
    }

    #[test]
    fn advantages_need_two_samples() {
        assert!(matches!(
            group_advantages(&[1.0]),
            Err(GrpoError::GroupTooSmall { size: 1 })
        ));
    }

    #[test]
    fn objective_is_zero_at_identical_policies() {
        let adv = group_advantages(&[0.0, 0.5, 1.0, 0.5]).unwrap();
        let lp = vec![-1.0, -2.0, -0.5, -3.0];
        let g = group_from(adv, lp.clone(), lp.clone(), lp);
        let (loss, diag) = grpo_objective(&g, &GrpoConfig::default()).unwrap();
        assert!(loss.abs() < 1e-12, "got {loss}");
        assert_eq!(diag.clip_fraction, 0.0);
        assert_eq!(diag.mean_kl, 0.0);
    }

    #[test]
    fn positive_advantage_ratio_clips_high() {
        // A = 1, s1 = 1.5, eps = 0.2, beta = 0: term = min(1.5, 1.2) = 1.2
        let cfg = GrpoConfig {
            kl_weight: 0.0,
            ..GrpoConfig::default()
        };
        let g = group_from(vec![1.0], vec![-1.0], vec![-1.0 + 1.5f64.ln()], vec![-1.0]);
        let (loss, diag) = grpo_objective(&g, &cfg).unwrap();
        assert!((loss + 1.2).abs() < 1e-12, "got {loss}");
        assert_eq!(diag.clip_fraction, 1.0);
    }

    #[test]
    fn negative_advantage_ratio_clips_low() {
        // A = -1, s1 = 0.5: term = min(-0.5, -0.8) = -0.8
        let cfg = GrpoConfig {
            kl_weight: 0.0,
            ..GrpoConfig::default()
        };
        let g = group_from(vec![-1.0], vec![-1.0], vec![-1.0 + 0.5f64.ln()], vec![-1.0]);
        let (loss, _) = grpo_objective(&g, &cfg).unwrap();
        assert!((loss - 0.8).abs() < 1e-12, "got {loss}");
    }

    #[test]
    fn kl_estimator_nonnegative_and_zero_at_equality() {
        let cfg = GrpoConfig::default();
        for delta in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            let g = group_from(vec![0.0], vec![-1.0], vec![-1.0], vec![-1.0 + delta]);
            let (_, diag) = grpo_objective(&g, &cfg).unwrap();
            assert!(diag.mean_kl >= 0.0);
            if delta == 0.0 {
                assert_eq!(diag.mean_kl, 0.0);
            }
        }
    }

    #[test]
    fn non_finite_logp_rejected() {
        let g = group_from(vec![0.0], vec![f64::NAN], vec![-1.0], vec![-1.0]);
        assert!(matches!(
            grpo_objective(&g, &GrpoConfig::default()),
            Err(GrpoError::NonFiniteLogProb)
        ));
    }

    #[test]
    fn on_policy_gradient_reduces_to_reinforce() {
        // with logp_new = logp_old and beta = 0 the objective gradient is
        // exactly mean(A_i * grad logp_i)
        let grammar = crate::grammar::SkillGrammar::default_desk();
        let vocab = crate::grpo::StepVocab::build(
            &grammar,
            &["apple".to_string()],
            &["basket".to_string()],
        );
        let mut policy = crate::grpo::ToyPlanPolicy::new(vocab, 3);
        let mut rng = crate::rng::Rng::seed_from(21);
        for row in policy.logits_mut() {
            for l in row.iter_mut() {
                *l = rng.next_f64() - 0.5;
            }
        }
        let mut group = GrpoGroup::default();
        for _ in 0..4 {
            let (actions, logp) = policy.sample_actions(&mut rng);
            group.logp_old.push(logp);
            group.logp_new.push(logp);
            group.logp_ref.push(logp);
            group.rewards.push(rng.next_f64());
            group.responses.push(SampledResponse {
                actions,
                text: String::new(),
                logp,
            });
        }
        group.advantages = group_advantages(&group.rewards).unwrap();

        let cfg = GrpoConfig {
            kl_weight: 0.0,
            ..GrpoConfig::default()
        };
        let grad = objective_gradient(&policy, &group, &cfg);

        let mut reinforce = vec![vec![0.0; policy.categories()]; policy.k_max()];
        for (i, response) in group.responses.iter().enumerate() {
            for (t, &action) in response.actions.iter().enumerate() {
                let p = policy.probs(t);
                for (v, g) in reinforce[t].iter_mut().enumerate() {
                    let ind = if v == action { 1.0 } else { 0.0 };
                    *g += group.advantages[i] * (ind - p[v]) / 4.0;
                }
            }
        }
        for (a, b) in grad.iter().flatten().zip(reinforce.iter().flatten()) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn surrogate_term_never_exceeds_unclipped() {
        let cfg = GrpoConfig {
            kl_weight: 0.0,
            ..GrpoConfig::default()
        };
        let mut rng = crate::rng::Rng::seed_from(11);
        for _ in 0..500 {
            let adv = rng.next_f64() * 4.0 - 2.0;
            let lp_old = -rng.next_f64() * 3.0;
            let lp_new = -rng.next_f64() * 3.0;
            let g = group_from(vec![adv, adv], vec![lp_old; 2], vec![lp_new; 2], vec![lp_new; 2]);
            let (loss, _) = grpo_objective(&g, &cfg).unwrap();
            let s1 = (lp_new - lp_old).exp();
            assert!(-loss <= s1 * adv + 1e-12);
        }
    }
}
