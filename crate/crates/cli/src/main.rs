//! planrl: batch front-end for plan scoring, evaluation, dataset synthesis,
//! toy GRPO training, execution simulation, and self-verification.
//!
//! Exit codes: 0 success, 1 validation or format failure, 2 internal check
//! failure. All commands are deterministic given their inputs, seed, and
//! configuration; repeated runs produce byte-identical outputs.

mod eval;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use planrl_core::datagen::{
    split_by_task, synthesize_dataset, write_dataset, ConstraintTable, DemoRecord,
    InstructionPool, SkillDemo, SynthesisConfig,
};
use planrl_core::executor::{run_task, Scenario, ScriptedHarness};
use planrl_core::grammar::{parse_plan, Ontology, SkillGrammar};
use planrl_core::grpo::{train_toy, GrpoConfig, StepVocab, ToyTask};
use planrl_core::numfmt::{sig9, sig9_json};
use planrl_core::reward::{score_record, ScoreRecord};
use planrl_core::RewardWeights;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "planrl", version, about)]
struct Cli {
    /// Grammar file (defaults to the built-in desk grammar).
    #[arg(long, global = true)]
    grammar: Option<PathBuf>,

    /// Ontology file (defaults to no semantic sets).
    #[arg(long, global = true)]
    ontology: Option<PathBuf>,

    /// Reward weights JSON file (defaults to built-in weights).
    #[arg(long, global = true)]
    weights: Option<PathBuf>,

    /// Seed for seeded commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output file or directory, command-dependent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a batch of responses against embedded ground truth.
    Score(ScoreArgs),
    /// Join predictions to a dataset and aggregate planning scores.
    Eval(EvalArgs),
    /// Synthesize tasks and triplets from a demo library.
    Synthesize(SynthesizeArgs),
    /// Train the toy plan policy with group-relative updates.
    TrainToy(TrainToyArgs),
    /// Run a scripted execution scenario.
    Simulate(SimulateArgs),
    /// Run the built-in oracle suites.
    Selfcheck,
}

#[derive(Args)]
struct ScoreArgs {
    /// Line-delimited scoring records.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Line-delimited records of {id, response_text}.
    #[arg(long)]
    predictions: PathBuf,
    /// One or more triplet dataset files; each file is an aggregation tag.
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Demo library, line-delimited records.
    #[arg(long)]
    library: PathBuf,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    kmin: usize,
    #[arg(long, default_value_t = 4)]
    kmax: usize,
    /// Instruction pool file (defaults to built-in templates).
    #[arg(long)]
    instructions: Option<PathBuf>,
    /// Constraint table file (defaults to the desk rules).
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// Negative completion triplets per sub-task.
    #[arg(long, default_value_t = 1)]
    negatives: usize,
    /// Also write a 9:1 train/test split keyed by task id hash.
    #[arg(long)]
    split: bool,
}

#[derive(Args)]
struct TrainToyArgs {
    /// Trainer configuration JSON.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let grammar = match &cli.grammar {
        Some(path) => SkillGrammar::from_file(path)
            .with_context(|| format!("loading grammar {}", path.display()))?,
        None => SkillGrammar::default_desk(),
    };
    let ontology = match &cli.ontology {
        Some(path) => Ontology::from_file(path)
            .with_context(|| format!("loading ontology {}", path.display()))?,
        None => Ontology::empty(),
    };
    let weights: RewardWeights = match &cli.weights {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading weights {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing weights {}", path.display()))?
        }
        None => RewardWeights::default(),
    };
    weights.validate().context("invalid reward weights")?;

    match &cli.command {
        Command::Score(args) => cmd_score(args, &cli, &grammar, &ontology, &weights),
        Command::Eval(args) => eval::cmd_eval(
            &args.predictions,
            &args.dataset,
            cli.out.as_deref(),
            &grammar,
            &ontology,
            &weights,
        ),
        Command::Synthesize(args) => cmd_synthesize(args, &cli, &grammar),
        Command::TrainToy(args) => cmd_train_toy(args, &cli, &grammar, &ontology, &weights),
        Command::Simulate(args) => cmd_simulate(args, &cli, &grammar),
        Command::Selfcheck => cmd_selfcheck(cli.seed),
    }
}

/// Read one JSON record per line, reporting 1-based line numbers on failure.
fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(line).with_context(|| {
            format!("{}: malformed record at line {}", path.display(), idx + 1)
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}

fn write_lines(out: Option<&Path>, lines: &[String]) -> Result<()> {
    match out {
        Some(path) => {
            let mut body = lines.join("\n");
            if !body.is_empty() {
                body.push('\n');
            }
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut handle = stdout.lock();
            for line in lines {
                writeln!(handle, "{line}")?;
            }
            Ok(())
        }
    }
}

fn cmd_score(
    args: &ScoreArgs,
    cli: &Cli,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Result<ExitCode> {
    let records: Vec<(usize, ScoreRecord)> = read_jsonl(&args.input)?;
    let mut lines = Vec::with_capacity(records.len());
    for (line_no, record) in &records {
        let breakdown = score_record(record, grammar, ontology, weights)
            .with_context(|| format!("{}: line {}", args.input.display(), line_no))?;
        lines.push(serde_json::to_string(&breakdown)?);
    }
    write_lines(cli.out.as_deref(), &lines)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_synthesize(args: &SynthesizeArgs, cli: &Cli, grammar: &SkillGrammar) -> Result<ExitCode> {
    if args.kmin < 1 || args.kmin > args.kmax {
        bail!("kmin must satisfy 1 <= kmin <= kmax");
    }
    let library: Vec<SkillDemo> = read_jsonl::<DemoRecord>(&args.library)?
        .into_iter()
        .map(|(line_no, record)| {
            record
                .into_demo(grammar)
                .with_context(|| format!("{}: line {}", args.library.display(), line_no))
        })
        .collect::<Result<_>>()?;
    let pool = match &args.instructions {
        Some(path) => InstructionPool::from_file(path)?,
        None => InstructionPool::default_desk(),
    };
    let table = match &args.constraints {
        Some(path) => ConstraintTable::from_file(path)?,
        None => ConstraintTable::default_desk(),
    };
    let grammar_ref = cli
        .grammar
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "builtin:desk".to_string());

    let (tasks, triplets) = synthesize_dataset(
        &library,
        &pool,
        &table,
        grammar,
        &SynthesisConfig {
            count: args.count,
            k_min: args.kmin,
            k_max: args.kmax,
            seed: cli.seed,
            negatives_per_subtask: args.negatives,
            grammar_ref,
        },
    )?;

    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    write_dataset(&triplets, &out_dir.join("dataset.jsonl"))?;
    let mut summary = serde_json::json!({
        "tasks": tasks.len(),
        "triplets": triplets.len(),
        "dataset": "dataset.jsonl",
    });
    if args.split {
        let (train, test) = split_by_task(&triplets, 9, 10);
        write_dataset(&train, &out_dir.join("train.jsonl"))?;
        write_dataset(&test, &out_dir.join("test.jsonl"))?;
        summary["train_triplets"] = serde_json::json!(train.len());
        summary["test_triplets"] = serde_json::json!(test.len());
    }
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}

/// Trainer configuration file: the optimizer settings plus the task set and
/// the candidate-step pools the policy vocabulary is built from.
#[derive(Debug, Deserialize)]
struct TrainToyFileConfig {
    #[serde(flatten)]
    grpo: GrpoConfig,
    k_max: usize,
    objects: Vec<String>,
    locations: Vec<String>,
    /// Path to the task file, relative to this config file.
    tasks: PathBuf,
    #[serde(default)]
    weights: Option<RewardWeights>,
}

#[derive(Debug, Deserialize)]
struct TaskRecord {
    id: String,
    instruction: String,
    plan: String,
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    final_mean_reward: f64,
    greedy_exact_matches: usize,
    greedy_reward_perfect: usize,
    tasks: usize,
    outcomes: Vec<planrl_core::grpo::TaskOutcome>,
}

fn cmd_train_toy(
    args: &TrainToyArgs,
    cli: &Cli,
    grammar: &SkillGrammar,
    ontology: &Ontology,
    weights: &RewardWeights,
) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let file_cfg: TrainToyFileConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    let weights = file_cfg.weights.unwrap_or(*weights);
    weights.validate().context("invalid reward weights")?;

    let tasks_path = match args.config.parent() {
        Some(dir) if !file_cfg.tasks.is_absolute() => dir.join(&file_cfg.tasks),
        _ => file_cfg.tasks.clone(),
    };
    let tasks: Vec<ToyTask> = read_jsonl::<TaskRecord>(&tasks_path)?
        .into_iter()
        .map(|(line_no, record)| {
            let ground_truth = parse_plan(&record.plan, grammar).map_err(|e| {
                anyhow::anyhow!("{}: line {}: {}", tasks_path.display(), line_no, e)
            })?;
            if ground_truth.is_empty() {
                bail!("{}: line {}: empty plan", tasks_path.display(), line_no);
            }
            Ok(ToyTask {
                id: record.id,
                instruction: record.instruction,
                ground_truth,
            })
        })
        .collect::<Result<_>>()?;

    if file_cfg
        .objects
        .iter()
        .chain(&file_cfg.locations)
        .any(|s| s.trim().is_empty())
    {
        bail!("object/location pools must not contain blank entries");
    }
    let vocab = StepVocab::build(grammar, &file_cfg.objects, &file_cfg.locations);
    if vocab.is_empty() {
        bail!("object/location pools produce no candidate steps under this grammar");
    }
    if file_cfg.k_max == 0 {
        bail!("k_max must be at least 1");
    }
    let report = train_toy(
        &tasks,
        &vocab,
        file_cfg.k_max,
        &file_cfg.grpo,
        grammar,
        ontology,
        &weights,
    )?;

    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let step_lines: Vec<String> = report
        .steps
        .iter()
        .map(|record| {
            let mut value = serde_json::to_value(record).expect("step record serializes");
            sig9_json(&mut value);
            value.to_string()
        })
        .collect();
    write_lines(Some(&out_dir.join("steps.jsonl")), &step_lines)?;

    let summary = TrainSummary {
        final_mean_reward: sig9(report.final_mean_reward),
        greedy_exact_matches: report
            .outcomes
            .iter()
            .filter(|o| o.greedy_matches_truth)
            .count(),
        greedy_reward_perfect: report
            .outcomes
            .iter()
            .filter(|o| o.greedy_reward_perfect)
            .count(),
        tasks: tasks.len(),
        outcomes: report.outcomes.clone(),
    };
    let summary_text = serde_json::to_string_pretty(&summary)?;
    std::fs::write(out_dir.join("summary.json"), format!("{summary_text}\n"))?;
    println!(
        "{}",
        serde_json::json!({
            "final_mean_reward": sig9(report.final_mean_reward),
            "greedy_exact_matches": summary.greedy_exact_matches,
            "greedy_reward_perfect": summary.greedy_reward_perfect,
            "tasks": summary.tasks,
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(args: &SimulateArgs, cli: &Cli, grammar: &SkillGrammar) -> Result<ExitCode> {
    let scenario = Scenario::from_file(&args.scenario)?;
    scenario.config.validate()?;
    let mut harness = ScriptedHarness::from_scenario(&scenario, grammar)?;
    let instruction = harness.instruction.clone();
    let (status, trace) = run_task(&instruction, &mut harness.ports, &harness.config, grammar);

    if let Some(path) = cli.out.as_deref() {
        let lines: Vec<String> = trace
            .events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serializes"))
            .collect();
        write_lines(Some(path), &lines)?;
    }
    println!(
        "{}",
        serde_json::json!({
            "status": status,
            "ticks": trace.total_ticks(),
            "tick_ms": harness.config.tick_ms,
            "replans": trace.replan_count(),
            "events": trace.events.len(),
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_selfcheck(seed: u64) -> Result<ExitCode> {
    let sections = planrl_core::selfcheck::run_all(seed);
    let mut all_passed = true;
    for section in &sections {
        let status = if section.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", section.name, section.detail);
        all_passed &= section.passed;
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
