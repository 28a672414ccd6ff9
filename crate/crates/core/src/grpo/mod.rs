//! Group-relative policy optimization at desk scale.
//!
//! The math follows the standard critic-free recipe: rewards are standardized
//! within a sampled group to form advantages, and the policy maximizes a
//! clipped probability-ratio surrogate minus a KL penalty toward a frozen
//! reference. Probability ratios are sequence-level. The trainer drives a
//! small position-factorized plan policy whose gradients are closed-form, so
//! the objective implementation can be checked against finite differences.

mod objective;
mod policy;
mod trainer;

pub use objective::{group_advantages, grpo_objective, objective_gradient, ObjectiveDiagnostics};
pub use policy::{
    gradient_check, policy_sample, CandidateStep, SampledResponse, StepVocab, ToyPlanPolicy,
};
pub use trainer::{
    train_toy, train_toy_with_policies, TaskOutcome, ToyTask, TrainReport, TrainStepRecord,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hyper-parameters of the group-relative update.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrpoConfig {
    /// Responses sampled per prompt (B).
    pub group_size: usize,
    /// Ratio clip half-width (epsilon).
    pub clip: f64,
    /// KL penalty coefficient (beta).
    pub kl_weight: f64,
    pub learning_rate: f64,
    /// Optimization steps for the trainer.
    pub steps: usize,
    pub seed: u64,
    /// Refresh the reference policy every this many steps; `None` keeps the
    /// reference frozen at initialization.
    #[serde(default)]
    pub ref_refresh: Option<usize>,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 8,
            clip: 0.2,
            kl_weight: 0.04,
            learning_rate: 1.0,
            steps: 500,
            seed: 0,
            ref_refresh: None,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.group_size < 2 {
            return Err(GrpoError::GroupTooSmall {
                size: self.group_size,
            });
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(GrpoError::BadConfig {
                what: format!("clip must be in (0, 1), got {}", self.clip),
            });
        }
        let nonnegative = |x: f64| x.is_finite() && x >= 0.0;
        if !nonnegative(self.kl_weight) || !nonnegative(self.learning_rate) {
            return Err(GrpoError::BadConfig {
                what: "kl_weight and learning_rate must be finite and nonnegative".to_string(),
            });
        }
        Ok(())
    }
}

/// One sampled group: responses with rewards, advantages, and the three
/// per-response sequence log-probabilities the objective consumes.
#[derive(Debug, Clone, Default)]
pub struct GrpoGroup {
    pub responses: Vec<SampledResponse>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub logp_new: Vec<f64>,
    pub logp_ref: Vec<f64>,
}

impl GrpoGroup {
    pub fn len(&self) -> usize {
        self.advantages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.advantages.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum GrpoError {
    #[error("group needs at least 2 samples, got {size}")]
    GroupTooSmall { size: usize },
    #[error("non-finite log-probability in group")]
    NonFiniteLogProb,
    #[error("group vectors have mismatched lengths")]
    LengthMismatch,
    #[error("bad config: {what}")]
    BadConfig { what: String },
    #[error("trainer needs at least one task")]
    NoTasks,
}
