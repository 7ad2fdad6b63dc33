//! `procure`: generate, validate and evaluate concept-oriented
//! counterfactual programs.
//!
//! Progress goes to stderr as one JSON object per line; results go to the
//! output directory or stdout.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use procure::dataset::{
    build_combined, plan_batches, read_records, read_tasks, split_by_task, write_records, OriginalEntry,
};
use procure::llm::BackendConfig;
use procure::metrics::{
    attribute_completions, cost_stats, evaluate, read_attribution, read_completions, success_stats, SuccessCells,
};
use procure::pipeline::{cmd_gen, cmd_perturb, revalidate, PairResult, RunConfig, RunOutput};
use procure::{Concept, Manifest, PromptVariant};

#[derive(Parser)]
#[command(name = "procure", version, about = "Concept-oriented counterfactual program generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate counterfactuals with the rule engine.
    Perturb(RunArgs),
    /// Generate counterfactuals with an LLM backend.
    Gen(GenArgs),
    /// Re-validate a dataset against its tasks.
    Validate(ValidateArgs),
    /// Group originals with their counterfactuals and plan training batches.
    BuildDataset(BuildArgs),
    /// Compute pass@k and concept consistency from attribution results.
    Eval(EvalArgs),
    /// Success rates and generation cost from manifests.
    Stats(StatsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark tasks (JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated concepts; all by default.
    #[arg(long, value_delimiter = ',')]
    concepts: Vec<Concept>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Test execution timeout in seconds.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    /// Exit with status 2 when any eligible pair failed.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Backend config (JSON).
    #[arg(long)]
    backend_config: PathBuf,
    /// Prompt variant: full, vanilla, no-one-shot, no-cot, no-static-info.
    #[arg(long, default_value = "full")]
    variant: PromptVariant,
    /// Maximum generation attempts per pair.
    #[arg(long, default_value_t = 5)]
    n_retries: u32,
}

#[derive(Args)]
struct ValidateArgs {
    /// Benchmark tasks (JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Dataset records to check (JSONL).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct BuildArgs {
    /// Benchmark tasks (JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Dataset records (JSONL).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a seeded 50/50 split by task.
    #[arg(long)]
    split: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Attribution table (JSONL).
    #[arg(long, conflicts_with = "completions", required_unless_present = "completions")]
    input: Option<PathBuf>,
    /// Completions to attribute first (JSONL); needs --tasks.
    #[arg(long, requires = "tasks")]
    completions: Option<PathBuf>,
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    /// Also write the report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// One manifest per dataset.
    #[arg(long, required = true, num_args = 1..)]
    input: Vec<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn event(kind: &str, fields: Value) {
    let mut obj = json!({ "event": kind });
    if let (Some(o), Value::Object(f)) = (obj.as_object_mut(), fields) {
        o.extend(f);
    }
    eprintln!("{obj}");
}

fn seconds(s: f64) -> Result<Duration> {
    if !(s > 0.0 && s.is_finite()) {
        bail!("timeout must be a positive number of seconds");
    }
    Ok(Duration::from_secs_f64(s))
}

fn run_config(args: &RunArgs) -> Result<RunConfig> {
    Ok(RunConfig {
        concepts: if args.concepts.is_empty() { Concept::ALL.to_vec() } else { args.concepts.clone() },
        seed: args.seed,
        workers: args.workers,
        timeout: seconds(args.timeout)?,
        ..RunConfig::new(&args.input, &args.out)
    })
}

fn report_pair(p: &PairResult) {
    event(
        "pair",
        json!({
            "task_id": p.task_id,
            "concept": p.concept,
            "eligible": p.eligible,
            "verdict": p.verdict,
            "attempts": p.attempts,
            "tokens": p.tokens,
        }),
    );
}

fn finish_run(out: &RunOutput, strict: bool) -> ExitCode {
    let failed = out.pairs.iter().filter(|p| p.eligible && !p.verdict.is_accepted()).count();
    event(
        "done",
        json!({
            "records": out.records.len(),
            "pairs": out.pairs.len(),
            "eligible": out.manifest.total_eligible(),
            "success": out.manifest.total_success(),
            "failed": failed,
        }),
    );
    if strict && failed > 0 {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn perturb(args: RunArgs) -> Result<ExitCode> {
    let cfg = run_config(&args)?;
    event("start", json!({ "command": "perturb", "input": args.input, "seed": cfg.seed }));
    let out = cmd_perturb(&cfg, Some(&report_pair))?;
    Ok(finish_run(&out, args.strict))
}

fn gen(args: GenArgs) -> Result<ExitCode> {
    let mut backend = BackendConfig::from_file(&args.backend_config)?;
    backend.max_retries = args.n_retries;
    let cfg = RunConfig { backend: Some(backend), variant: args.variant, ..run_config(&args.run)? };
    event("start", json!({ "command": "gen", "input": args.run.input, "variant": args.variant.as_str() }));
    let out = cmd_gen(&cfg, Some(&report_pair))?;
    Ok(finish_run(&out, args.run.strict))
}

fn validate(args: ValidateArgs) -> Result<ExitCode> {
    let tasks = read_tasks(&args.input)?;
    let records = read_records(&args.dataset)?;
    let outcomes = revalidate(&records, &tasks, seconds(args.timeout)?, args.workers)?;
    let mut failed = 0;
    for (r, o) in records.iter().zip(&outcomes) {
        match o {
            Some(o) => {
                failed += usize::from(!o.verdict.is_accepted());
                event(
                    "record",
                    json!({ "task_id": r.task_id, "concept": r.concept, "verdict": o.verdict, "detail": o.detail }),
                );
            }
            None => {
                failed += 1;
                event(
                    "record",
                    json!({ "task_id": r.task_id, "concept": r.concept, "error": "unknown or unparsable task" }),
                );
            }
        }
    }
    event("done", json!({ "records": records.len(), "failed": failed }));
    Ok(if args.strict && failed > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn write_json(path: &Path, value: Value) -> Result<()> {
    let text = serde_json::to_string_pretty(&value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn build_dataset(args: BuildArgs) -> Result<ExitCode> {
    let tasks = read_tasks(&args.input)?;
    let records = read_records(&args.dataset)?;
    let originals: Vec<OriginalEntry> = tasks.iter().map(OriginalEntry::from).collect();
    let groups = build_combined(&originals, &records)?;
    let plan = plan_batches(&groups, args.batch_size, args.seed)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut lines = String::new();
    for g in &groups {
        lines.push_str(&serde_json::to_string(g)?);
        lines.push('\n');
    }
    let combined = args.out.join("combined.jsonl");
    std::fs::write(&combined, lines).with_context(|| format!("writing {}", combined.display()))?;
    write_json(&args.out.join("batches.json"), serde_json::to_value(&plan)?)?;
    if args.split {
        let (train, test) = split_by_task(&records, args.seed);
        write_records(&train, &args.out.join("train.jsonl"))?;
        write_records(&test, &args.out.join("test.jsonl"))?;
    }
    event("done", json!({ "groups": groups.len(), "batches": plan.batches.len(), "records": records.len() }));
    Ok(ExitCode::SUCCESS)
}

fn eval(args: EvalArgs) -> Result<ExitCode> {
    let rows = match (&args.input, &args.completions, &args.tasks) {
        (Some(path), _, _) => read_attribution(path)?,
        (None, Some(completions), Some(tasks)) => {
            let tasks = read_tasks(tasks)?;
            let rows = read_completions(completions)?;
            attribute_completions(&rows, &tasks, seconds(args.timeout)?)?
        }
        _ => bail!("pass --input, or --completions with --tasks"),
    };
    let report = evaluate(&rows)?;
    let text = serde_json::to_string_pretty(&report)?;
    println!("{text}");
    if let Some(out) = &args.out {
        write_json(out, serde_json::to_value(&report)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn pct(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{:.2}%", v * 100.0))
}

fn num(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.2}"))
}

fn stats(args: StatsArgs) -> Result<ExitCode> {
    let manifests = args.input.iter().map(|p| Manifest::read(p)).collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<SuccessCells> = manifests.iter().map(SuccessCells::from).collect();
    let success = success_stats(&cells)?;
    let cost = cost_stats(&manifests);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&json!({ "success": success, "cost": cost }))?);
        return Ok(ExitCode::SUCCESS);
    }
    println!("{:<16} {:>14} {:>9} {:>10} {:>10}", "dataset", "success", "rate", "attempts", "tokens");
    for (s, c) in success.datasets.iter().zip(&cost.datasets) {
        println!(
            "{:<16} {:>14} {:>9} {:>10} {:>10}",
            s.dataset,
            format!("{}/{}", s.success, s.eligible),
            pct(s.rate),
            num(c.avg_attempts),
            num(c.avg_tokens)
        );
    }
    println!(
        "{:<16} {:>14} {:>9} {:>10} {:>10}",
        "macro",
        success.total_success,
        pct(success.macro_rate),
        num(cost.macro_attempts),
        num(cost.macro_tokens)
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    let result = match cli.command {
        Command::Perturb(a) => perturb(a),
        Command::Gen(a) => gen(a),
        Command::Validate(a) => validate(a),
        Command::BuildDataset(a) => build_dataset(a),
        Command::Eval(a) => eval(a),
        Command::Stats(a) => stats(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            event("error", json!({ "message": format!("{e:#}") }));
            ExitCode::from(1)
        }
    }
}
