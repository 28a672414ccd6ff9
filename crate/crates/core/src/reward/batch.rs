//! Line-delimited batch-scoring records.

use super::score::{total_reward, RewardError, ScoreTarget};
use super::RewardWeights;
use crate::grammar::{parse_plan, Ontology, SkillGrammar};
use crate::numfmt::sig9;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskType {
    Plan,
    Completion,
}

/// One record of the batch-scoring input format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub task_type: TaskType,
    pub response_text: String,
    /// Rendered plan text for planning records, `True`/`False` for
    /// completion records.
    pub ground_truth: String,
    #[serde(default)]
    pub grammar_ref: String,
    #[serde(default)]
    pub ontology_ref: String,
}

/// One matched pair in the audit output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchPairRecord {
    pub g: usize,
    pub t: usize,
    pub weight: f64,
}

/// One record of the batch-scoring output format. Floats are rounded to nine
/// significant digits at construction so output files are byte-stable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BreakdownRecord {
    pub id: String,
    pub task_type: TaskType,
    pub format: f64,
    pub bm: f64,
    pub length_penalty: f64,
    pub content: f64,
    pub total: f64,
    pub matching: Vec<MatchPairRecord>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("record {id}: ground truth is not a parseable plan: {reason}")]
    BadGroundTruth { id: String, reason: String },
    #[error("record {id}: ground truth plan is empty")]
    EmptyGroundTruth { id: String },
    #[error("record {id}: completion ground truth must be `True` or `False`, got {got:?}")]
    BadLabel { id: String, got: String },
}

/// Score one record against its embedded ground truth.
pub fn score_record(
    record: &ScoreRecord,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Result<BreakdownRecord, BatchError> {
    let breakdown = match record.task_type {
        TaskType::Plan => {
            let gt = parse_plan(&record.ground_truth, grammar).map_err(|e| {
                BatchError::BadGroundTruth {
                    id: record.id.clone(),
                    reason: e.to_string(),
                }
            })?;
            total_reward(
                &record.response_text,
                &ScoreTarget::Plan(&gt),
                grammar,
                ontology,
                weights,
            )
            .map_err(|e| match e {
                RewardError::EmptyGroundTruth => BatchError::EmptyGroundTruth {
                    id: record.id.clone(),
                },
            })?
        }
        TaskType::Completion => {
            let label = match record.ground_truth.trim() {
                "True" => true,
                "False" => false,
                other => {
                    return Err(BatchError::BadLabel {
                        id: record.id.clone(),
                        got: other.to_string(),
                    })
                }
            };
            total_reward(
                &record.response_text,
                &ScoreTarget::Completion(label),
                grammar,
                ontology,
                weights,
            )
            .expect("completion scoring is total")
        }
    };

    Ok(BreakdownRecord {
        id: record.id.clone(),
        task_type: record.task_type,
        format: breakdown.format,
        bm: sig9(breakdown.bm),
        length_penalty: sig9(breakdown.length_penalty),
        content: sig9(breakdown.content),
        total: sig9(breakdown.total),
        matching: breakdown
            .matching
            .pairs
            .iter()
            .map(|p| MatchPairRecord {
                g: p.generated,
                t: p.ground_truth,
                weight: sig9(p.weight),
            })
            .collect(),
        diagnostic: breakdown.diagnostic,
    })
}
