//! Verifiable plan rewards.
//!
//! The reward inspects a response along two axes: format conformance to the
//! `<think>...</think><answer>...</answer>` template, and content overlap
//! with the ground truth. For planning targets the content score is a
//! maximum-weight bipartite match between the generated and ground-truth
//! steps, normalized by the longer plan's length, minus a length penalty.
//! For completion targets it is an exact-match check against `True`/`False`.

mod assignment;
mod batch;
mod score;
mod similarity;

pub use assignment::{max_weight_matching, Matching, MatchingPair};
pub use batch::{score_record, BreakdownRecord, MatchPairRecord, ScoreRecord, TaskType};
pub use score::{
    bipartite_match_score, completion_reward, content_reward, format_reward, total_reward,
    RewardBreakdown, RewardError, ScoreTarget,
};
pub use similarity::{similarity_matrix, step_similarity};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Weights of the reward terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    /// Format-term weight in the total reward.
    pub w_f: f64,
    /// Content-term weight in the total reward.
    pub w_c: f64,
    /// Action-similarity weight inside step similarity.
    pub w_a: f64,
    /// Object-similarity weight inside step similarity.
    pub w_o: f64,
    /// Length-penalty weight.
    pub w_l: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_f: 0.1,
            w_c: 0.9,
            w_a: 0.3,
            w_o: 0.7,
            w_l: 0.1,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), WeightsError> {
        let all = [self.w_f, self.w_c, self.w_a, self.w_o, self.w_l];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(WeightsError::Negative);
        }
        if (self.w_a + self.w_o - 1.0).abs() > 1e-12 {
            return Err(WeightsError::SimilarityWeightsSum {
                sum: self.w_a + self.w_o,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("reward weights must be finite and nonnegative")]
    Negative,
    #[error("w_a + w_o must equal 1, got {sum}")]
    SimilarityWeightsSum { sum: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_weights_validate() {
        RewardWeights::default().validate().expect("valid");
    }

    #[test]
    fn bad_weights_rejected() {
        let unbalanced = RewardWeights {
            w_a: 0.5,
            ..RewardWeights::default()
        };
        assert!(unbalanced.validate().is_err());
        let negative = RewardWeights {
            w_l: -0.1,
            ..RewardWeights::default()
        };
        assert!(negative.validate().is_err());
    }
}
