//! The toy plan policy: independent per-position categorical distributions
//! over a finite candidate-step vocabulary plus STOP.
//!
//! Deliberately simplistic. Every gradient is closed-form, which makes the
//! policy a test vehicle for the objective rather than a language model.

use super::objective::objective_gradient;
use super::{GrpoConfig, GrpoGroup};
use crate::grammar::{render_response, Plan, PlanStep, SkillGrammar, SlotName};
use crate::rng::Rng;

/// One vocabulary entry: a concrete plan step and its rendered text.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateStep {
    pub step: PlanStep,
    pub text: String,
}

/// Finite candidate-step vocabulary derived from a grammar and small
/// object/location pools.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepVocab {
    pub candidates: Vec<CandidateStep>,
}

impl StepVocab {
    /// Enumerate every template instantiation over the pools, in grammar
    /// order then object order then location order.
    pub fn build(grammar: &SkillGrammar, objects: &[String], locations: &[String]) -> StepVocab {
        let all: Vec<crate::grammar::TemplateId> = (0..grammar.len())
            .map(crate::grammar::TemplateId)
            .collect();
        Self::build_for(grammar, &all, objects, locations)
    }

    /// Like [`StepVocab::build`] but restricted to the given templates.
    ///
    /// Useful when the training vocabulary must avoid reward-equivalent
    /// twins: templates sharing a verb lexeme (`Put ... on` / `Put ... into`)
    /// produce steps the similarity cannot tell apart, so exact-match
    /// convergence targets should draw from at most one template per verb.
    pub fn build_for(
        grammar: &SkillGrammar,
        templates: &[crate::grammar::TemplateId],
        objects: &[String],
        locations: &[String],
    ) -> StepVocab {
        let mut candidates = Vec::new();
        for &id in templates {
            let template = grammar.template(id);
            let needs_object = template.slots.contains(&SlotName::Object);
            let needs_location = template.slots.contains(&SlotName::Location);
            let object_choices: Vec<Option<&String>> = if needs_object {
                objects.iter().map(Some).collect()
            } else {
                vec![None]
            };
            let location_choices: Vec<Option<&String>> = if needs_location {
                locations.iter().map(Some).collect()
            } else {
                vec![None]
            };
            for obj in &object_choices {
                for loc in &location_choices {
                    let mut args = std::collections::BTreeMap::new();
                    if let Some(o) = obj {
                        args.insert(SlotName::Object, (*o).clone());
                    }
                    if let Some(l) = loc {
                        args.insert(SlotName::Location, (*l).clone());
                    }
                    let step = PlanStep { template: id, args };
                    let text = step.render(grammar);
                    candidates.push(CandidateStep { step, text });
                }
            }
        }
        StepVocab { candidates }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Index of a step in the vocabulary, if present.
    pub fn index_of(&self, step: &PlanStep) -> Option<usize> {
        self.candidates.iter().position(|c| &c.step == step)
    }
}

/// One sampled rollout: the category chosen at each consumed position
/// (including the STOP position when the plan ended early), the rendered
/// response, and its sequence log-probability.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampledResponse {
    pub actions: Vec<usize>,
    pub text: String,
    pub logp: f64,
}

const THINK_PLACEHOLDER: &str = "Deciding which skills fulfill the request.";

/// Position-factorized categorical plan policy with a frozen reference
/// snapshot of its logits.
#[derive(Debug, Clone)]
pub struct ToyPlanPolicy {
    vocab: StepVocab,
    k_max: usize,
    /// `k_max` rows of `vocab.len() + 1` logits; the last category is STOP.
    logits: Vec<Vec<f64>>,
    ref_logits: Vec<Vec<f64>>,
}

impl ToyPlanPolicy {
    /// Uniform policy over the vocabulary and STOP at every position.
    pub fn new(vocab: StepVocab, k_max: usize) -> ToyPlanPolicy {
        assert!(k_max >= 1, "policy horizon must be at least 1");
        assert!(!vocab.is_empty(), "vocabulary must be non-empty");
        let row = vec![0.0; vocab.len() + 1];
        ToyPlanPolicy {
            vocab,
            k_max,
            logits: vec![row.clone(); k_max],
            ref_logits: vec![row; k_max],
        }
    }

    pub fn vocab(&self) -> &StepVocab {
        &self.vocab
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of categories per position (vocabulary plus STOP).
    pub fn categories(&self) -> usize {
        self.vocab.len() + 1
    }

    pub fn stop_index(&self) -> usize {
        self.vocab.len()
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    /// Mutable logits. `NEG_INFINITY` entries are allowed to exclude
    /// categories, but every position must keep at least one finite logit.
    pub fn logits_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.logits
    }

    /// Snapshot the current logits as the reference policy.
    pub fn refresh_reference(&mut self) {
        self.ref_logits = self.logits.clone();
    }

    pub fn probs(&self, position: usize) -> Vec<f64> {
        softmax(&self.logits[position])
    }

    pub fn reference_probs(&self, position: usize) -> Vec<f64> {
        softmax(&self.ref_logits[position])
    }

    /// Sample one rollout; returns the consumed actions and the exact
    /// sequence log-probability (summed up to and including STOP).
    pub fn sample_actions(&self, rng: &mut Rng) -> (Vec<usize>, f64) {
        let mut actions = Vec::new();
        let mut logp = 0.0;
        for t in 0..self.k_max {
            let lp = log_softmax(&self.logits[t]);
            let action = sample_categorical(&lp, rng);
            actions.push(action);
            logp += lp[action];
            if action == self.stop_index() {
                break;
            }
        }
        (actions, logp)
    }

    /// Log-probability of an action sequence under the current logits.
    pub fn logp(&self, actions: &[usize]) -> f64 {
        logp_given(&self.logits, actions)
    }

    /// Log-probability of an action sequence under the reference logits.
    pub fn logp_ref(&self, actions: &[usize]) -> f64 {
        logp_given(&self.ref_logits, actions)
    }

    /// Argmax decode, smallest index on ties.
    pub fn greedy_actions(&self) -> Vec<usize> {
        let mut actions = Vec::new();
        for t in 0..self.k_max {
            let row = &self.logits[t];
            let mut best = 0;
            for (v, &l) in row.iter().enumerate() {
                if l > row[best] {
                    best = v;
                }
            }
            actions.push(best);
            if best == self.stop_index() {
                break;
            }
        }
        actions
    }

    /// The plan encoded by an action sequence.
    pub fn plan_for(&self, actions: &[usize]) -> Plan {
        Plan::new(
            actions
                .iter()
                .filter(|&&a| a != self.stop_index())
                .map(|&a| self.vocab.candidates[a].step.clone())
                .collect(),
        )
    }

    /// Render an action sequence as a tagged response with a numbered plan.
    pub fn response_for(&self, actions: &[usize]) -> String {
        let answer = actions
            .iter()
            .filter(|&&a| a != self.stop_index())
            .enumerate()
            .map(|(i, &a)| format!("{}. {}", i + 1, self.vocab.candidates[a].text))
            .collect::<Vec<_>>()
            .join("\n");
        render_response(THINK_PLACEHOLDER, &answer)
    }

    /// Gradient-ascent step on the logits.
    pub fn ascend(&mut self, gradient: &[Vec<f64>], learning_rate: f64) {
        for (row, grow) in self.logits.iter_mut().zip(gradient) {
            for (l, g) in row.iter_mut().zip(grow) {
                *l += learning_rate * g;
            }
        }
    }
}

/// Sample a rollout and render it as a tagged response.
pub fn policy_sample(policy: &ToyPlanPolicy, rng: &mut Rng) -> (String, f64) {
    let (actions, logp) = policy.sample_actions(rng);
    (policy.response_for(&actions), logp)
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let log_z = max + sum.ln();
    logits.iter().map(|l| l - log_z).collect()
}

fn logp_given(logits: &[Vec<f64>], actions: &[usize]) -> f64 {
    actions
        .iter()
        .enumerate()
        .map(|(t, &a)| log_softmax(&logits[t])[a])
        .sum()
}

fn sample_categorical(log_probs: &[f64], rng: &mut Rng) -> usize {
    let u = rng.next_f64();
    let mut acc = 0.0;
    for (i, lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    log_probs.len() - 1
}

/// Compare the analytic objective gradient against central finite differences
/// of the loss on every logit and return the maximum relative error.
///
/// Differences use `h = 1e-5`; the error metric is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 0.01)` so coordinates
/// with near-zero gradient do not inflate the ratio with rounding noise.
/// Meaningful only away from the clip kinks.
pub fn gradient_check(policy: &ToyPlanPolicy, group: &GrpoGroup, cfg: &GrpoConfig) -> f64 {
    const H: f64 = 1e-5;

    let loss_for = |logits: &[Vec<f64>]| -> f64 {
        let n = group.advantages.len() as f64;
        let mut objective = 0.0;
        for i in 0..group.advantages.len() {
            let adv = group.advantages[i];
            let logp_new = logp_given(logits, &group.responses[i].actions);
            let s1 = (logp_new - group.logp_old[i]).exp();
            let s2 = s1.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
            let delta = group.logp_ref[i] - logp_new;
            let k3 = delta.exp() - delta - 1.0;
            objective += (s1 * adv).min(s2 * adv) - cfg.kl_weight * k3;
        }
        -(objective / n)
    };

    let analytic = objective_gradient(policy, group, cfg);
    let mut worst = 0.0f64;
    let mut logits = policy.logits().to_vec();
    for t in 0..logits.len() {
        for v in 0..logits[t].len() {
            let orig = logits[t][v];
            logits[t][v] = orig + H;
            let hi = loss_for(&logits);
            logits[t][v] = orig - H;
            let lo = loss_for(&logits);
            logits[t][v] = orig;
            let numeric = (hi - lo) / (2.0 * H);
            let a = -analytic[t][v];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(0.01);
            worst = worst.max(err);
        }
    }
    worst
}
