//! Dataset I/O: line-delimited triplet records, the deterministic 9:1 split,
//! and the end-to-end synthesis pipeline.

use super::compose::{compose_task, ComposeError, ConstraintTable, InstructionPool};
use super::triplets::make_triplets_n;
use super::{SkillDemo, TaskSpec, Triplet};
use crate::grammar::SkillGrammar;
use crate::rng::Rng;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: invalid triplet: {reason}")]
    InvalidTriplet { line: usize, reason: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

fn io_err(path: &Path, e: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Write triplets as one JSON record per line, fields in declaration order.
pub fn write_dataset(triplets: &[Triplet], path: &Path) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for t in triplets {
        let line = serde_json::to_string(t).expect("triplet serializes");
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Read a line-delimited triplet file back, validating each record.
pub fn read_dataset(path: &Path) -> Result<Vec<Triplet>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let triplet: Triplet =
            serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        triplet
            .validate()
            .map_err(|e| DatasetError::InvalidTriplet {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        out.push(triplet);
    }
    Ok(out)
}

/// FNV-1a, the stable hash behind the split so it never shifts across
/// releases or platforms.
pub fn fnv64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Split triplets into train and test sets, disjoint and exhaustive by
/// `task_id`. Task ids are ordered by `(fnv64(id), id)` and the first
/// `numerator/denominator` of tasks (rounded down) become the train set, so
/// a 9:1 split of 12,000 tasks yields exactly 10,800 and 1,200.
pub fn split_by_task(
    triplets: &[Triplet],
    numerator: usize,
    denominator: usize,
) -> (Vec<Triplet>, Vec<Triplet>) {
    assert!(denominator > 0 && numerator <= denominator);
    let mut ids: Vec<&str> = Vec::new();
    for t in triplets {
        if !ids.contains(&t.task_id.as_str()) {
            ids.push(&t.task_id);
        }
    }
    let mut keyed: Vec<(u64, &str)> = ids.iter().map(|id| (fnv64(id), *id)).collect();
    keyed.sort();
    let cut = keyed.len() * numerator / denominator;
    let train_ids: std::collections::HashSet<&str> =
        keyed[..cut].iter().map(|(_, id)| *id).collect();

    let mut train = Vec::new();
    let mut test = Vec::new();
    for t in triplets {
        if train_ids.contains(t.task_id.as_str()) {
            train.push(t.clone());
        } else {
            test.push(t.clone());
        }
    }
    (train, test)
}

/// Synthesis pipeline settings.
#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    pub count: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub negatives_per_subtask: usize,
    pub grammar_ref: String,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            count: 100,
            k_min: 1,
            k_max: 4,
            seed: 0,
            negatives_per_subtask: 1,
            grammar_ref: "desk".to_string(),
        }
    }
}

/// Compose `count` tasks and assemble their triplets. Fully deterministic
/// under the config seed.
pub fn synthesize_dataset(
    library: &[SkillDemo],
    pool: &InstructionPool,
    table: &ConstraintTable,
    grammar: &SkillGrammar,
    cfg: &SynthesisConfig,
) -> Result<(Vec<TaskSpec>, Vec<Triplet>), DatasetError> {
    assert!(cfg.k_min >= 1 && cfg.k_min <= cfg.k_max);
    let mut rng = Rng::seed_from(cfg.seed);
    let mut tasks = Vec::with_capacity(cfg.count);
    let mut triplets = Vec::new();
    for i in 0..cfg.count {
        let k = rng.range_inclusive(cfg.k_min, cfg.k_max);
        let task_id = format!("task-{i:06}");
        let task = compose_task(library, k, pool, table, grammar, &task_id, &mut rng)?;
        triplets.extend(make_triplets_n(
            &task,
            grammar,
            &cfg.grammar_ref,
            cfg.negatives_per_subtask,
        ));
        tasks.push(task);
    }
    Ok((tasks, triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::demo_library;
    use crate::reward::TaskType;

    fn small_dataset(count: usize, seed: u64) -> (Vec<TaskSpec>, Vec<Triplet>) {
        let grammar = SkillGrammar::default_desk();
        let library = demo_library(
            &grammar,
            &["apple".to_string(), "pen".to_string(), "cup".to_string()],
            &["basket".to_string(), "tray".to_string()],
        );
        synthesize_dataset(
            &library,
            &InstructionPool::default_desk(),
            &ConstraintTable::default_desk(),
            &grammar,
            &SynthesisConfig {
                count,
                k_min: 1,
                k_max: 3,
                seed,
                ..SynthesisConfig::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn write_read_roundtrip() {
        let (_, triplets) = small_dataset(10, 1);
        let dir = std::env::temp_dir().join("planrl-dataset-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.jsonl");
        write_dataset(&triplets, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back, triplets);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn malformed_record_reports_line_number() {
        let dir = std::env::temp_dir().join("planrl-dataset-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("malformed.jsonl");
        let (_, triplets) = small_dataset(1, 2);
        let mut lines: Vec<String> = triplets
            .iter()
            .map(|t| serde_json::to_string(t).unwrap())
            .collect();
        lines.insert(1, r#"{"task_id":"x","task_type":"plan"}"#.to_string());
        std::fs::write(&path, lines.join("\n")).unwrap();
        let err = read_dataset(&path).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedRecord { line: 2, .. }), "{err}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn split_is_disjoint_exhaustive_and_exact() {
        // split arithmetic checked on synthetic ids at full scale
        let ids: Vec<Triplet> = (0..12_000)
            .map(|i| Triplet {
                task_id: format!("task-{i:06}"),
                task_type: TaskType::Plan,
                q: String::new(),
                observations: vec!["o".to_string()],
                y: "1. Open box.".to_string(),
                grammar_ref: "g".to_string(),
            })
            .collect();
        let (train, test) = split_by_task(&ids, 9, 10);
        assert_eq!(train.len(), 10_800);
        assert_eq!(test.len(), 1_200);
        let train_ids: std::collections::HashSet<_> =
            train.iter().map(|t| t.task_id.clone()).collect();
        assert!(test.iter().all(|t| !train_ids.contains(&t.task_id)));
    }

    #[test]
    fn split_keeps_task_triplets_together() {
        let (_, triplets) = small_dataset(20, 3);
        let (train, test) = split_by_task(&triplets, 9, 10);
        assert_eq!(train.len() + test.len(), triplets.len());
        let train_ids: std::collections::HashSet<_> =
            train.iter().map(|t| t.task_id.clone()).collect();
        let test_ids: std::collections::HashSet<_> =
            test.iter().map(|t| t.task_id.clone()).collect();
        assert!(train_ids.is_disjoint(&test_ids));
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = small_dataset(15, 42);
        let b = small_dataset(15, 42);
        assert_eq!(a, b);
        let c = small_dataset(15, 43);
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn triplet_counts_match_task_lengths() {
        let (tasks, triplets) = small_dataset(25, 7);
        let expected: usize = tasks.iter().map(|t| 1 + 2 * t.k()).sum();
        assert_eq!(triplets.len(), expected);
    }
}
