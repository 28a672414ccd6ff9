//! The eval command: join predictions to dataset ground truth, score each
//! planning record, and aggregate the mean match score per dataset tag.

use anyhow::{bail, Context, Result};
use planrl_core::datagen::read_dataset;
use planrl_core::grammar::{Ontology, SkillGrammar};
use planrl_core::numfmt::sig9;
use planrl_core::reward::{score_record, BreakdownRecord, ScoreRecord, TaskType};
use planrl_core::RewardWeights;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;

#[derive(Debug, Deserialize)]
struct Prediction {
    id: String,
    response_text: String,
}

/// Aggregates over one tag (or overall). The planning score reported per tag
/// is `mean_bm`: the mean bipartite match score over the tag's test records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupStats {
    pub records: usize,
    pub mean_bm: f64,
    pub mean_content: f64,
    pub mean_total: f64,
    pub format_pass_rate: f64,
}

fn stats_of(records: &[&EvalRecord]) -> GroupStats {
    let n = records.len().max(1) as f64;
    GroupStats {
        records: records.len(),
        mean_bm: sig9(records.iter().map(|r| r.breakdown.bm).sum::<f64>() / n),
        mean_content: sig9(records.iter().map(|r| r.breakdown.content).sum::<f64>() / n),
        mean_total: sig9(records.iter().map(|r| r.breakdown.total).sum::<f64>() / n),
        format_pass_rate: sig9(records.iter().map(|r| r.breakdown.format).sum::<f64>() / n),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub tag: String,
    #[serde(flatten)]
    pub breakdown: BreakdownRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_record: Vec<EvalRecord>,
    pub groups: BTreeMap<String, GroupStats>,
    pub overall: GroupStats,
}

pub fn cmd_eval(
    predictions_path: &Path,
    dataset_paths: &[std::path::PathBuf],
    out: Option<&Path>,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Result<ExitCode> {
    let predictions_text = std::fs::read_to_string(predictions_path)
        .with_context(|| format!("reading {}", predictions_path.display()))?;
    let mut predictions: BTreeMap<String, String> = BTreeMap::new();
    for (idx, line) in predictions_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(line).with_context(|| {
            format!(
                "{}: malformed record at line {}",
                predictions_path.display(),
                idx + 1
            )
        })?;
        predictions.insert(p.id, p.response_text);
    }

    // tag -> ordered (task_id, ground truth plan text)
    let mut ground_truth: Vec<(String, String, String)> = Vec::new();
    let mut known_ids = std::collections::HashSet::new();
    for path in dataset_paths {
        let tag = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let triplets = read_dataset(path)?;
        for t in triplets {
            if t.task_type == TaskType::Plan {
                known_ids.insert(t.task_id.clone());
                ground_truth.push((tag.clone(), t.task_id, t.y));
            }
        }
    }

    for id in predictions.keys() {
        if !known_ids.contains(id) {
            bail!("prediction id {id:?} does not appear in any dataset");
        }
    }

    let mut per_record = Vec::with_capacity(ground_truth.len());
    for (tag, task_id, y) in &ground_truth {
        let Some(response_text) = predictions.get(task_id) else {
            bail!("missing prediction for task {task_id:?}");
        };
        let record = ScoreRecord {
            id: task_id.clone(),
            task_type: TaskType::Plan,
            response_text: response_text.clone(),
            ground_truth: y.clone(),
            grammar_ref: String::new(),
            ontology_ref: String::new(),
        };
        let breakdown = score_record(&record, grammar, ontology, weights)
            .with_context(|| format!("scoring task {task_id:?}"))?;
        per_record.push(EvalRecord {
            tag: tag.clone(),
            breakdown,
        });
    }

    let mut groups = BTreeMap::new();
    for tag in per_record.iter().map(|r| r.tag.clone()).collect::<std::collections::BTreeSet<_>>() {
        let members: Vec<&EvalRecord> = per_record.iter().filter(|r| r.tag == tag).collect();
        groups.insert(tag, stats_of(&members));
    }
    let overall = stats_of(&per_record.iter().collect::<Vec<_>>());

    let report = EvalReport {
        per_record,
        groups,
        overall,
    };
    let text = serde_json::to_string_pretty(&report)?;
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
