//! Command-line interface: ingest, synth, discover, report and the three
//! evaluation protocols. Configuration comes from an optional JSON file
//! with flag overrides (flags win); the resolved configuration is archived
//! in the run directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::buffer::{BufferConfig, ScoreMode, Strategy};
use crate::error::{EvoPathError, Result};
use crate::eval::{
    evaluate_inductive, evaluate_kbc, evaluate_lp, save_kbc_split, save_lp_dataset, CandidateSet,
    KbcOptions, LpRatios, LpScoreMode, TieBreak,
};
use crate::evolution::{Evolution, RunConfig, StopReason};
use crate::generator::ProviderConfig;
use crate::hin::{load_hin, FactSet, Hin};
use crate::synth::{generate_planted, PlantedSpec};

#[derive(Parser)]
#[command(
    name = "evopath",
    version,
    about = "Evolutionary meta-path discovery over heterogeneous information networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset, validate it and print its statistics.
    Ingest(IngestArgs),
    /// Generate a synthetic dataset with a planted meta-path.
    Synth(SynthArgs),
    /// Run the evolutionary discovery loop for one target relation.
    Discover(DiscoverArgs),
    /// Print the top meta-paths of a run directory.
    Report(ReportArgs),
    /// Knowledge base completion evaluation (Hits@k, MRR).
    EvaluateKbc(EvaluateKbcArgs),
    /// Link prediction evaluation (ROC-AUC, AP).
    EvaluateLp(EvaluateLpArgs),
    /// Inductive link prediction with node removal.
    EvaluateInductive(EvaluateInductiveArgs),
}

#[derive(Args, Clone)]
struct DatasetArgs {
    /// Facts file: head<TAB>relation<TAB>tail per line.
    #[arg(long)]
    facts: Option<PathBuf>,
    /// Types file: entity<TAB>type per line.
    #[arg(long)]
    types: Option<PathBuf>,
    /// Optional taxonomy file: child_type<TAB>parent_type per line.
    #[arg(long)]
    dag: Option<PathBuf>,
    /// Skip inverse-relation materialization.
    #[arg(long)]
    no_augment: bool,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON configuration file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target relation to explain.
    #[arg(long)]
    relation: Option<String>,
    /// Top-level random seed; all sub-streams derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum meta-path length in type slots.
    #[arg(long)]
    max_length: Option<usize>,
    /// Anchor facts sampled per walk batch.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Walks started from each anchor fact.
    #[arg(long)]
    walks_per_fact: Option<usize>,
    /// Similarity expansions per extracted atom.
    #[arg(long)]
    expand_top_k: Option<usize>,
    /// Similarity threshold for expansion and synonym repair.
    #[arg(long)]
    min_similarity: Option<f64>,
    /// Few-shot sampling strategy.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    /// Score used for prioritization.
    #[arg(long, value_enum)]
    score_mode: Option<ScoreModeArg>,
    /// Few-shot examples per prompt.
    #[arg(long)]
    few_shot_n: Option<usize>,
    #[arg(long)]
    max_rounds: Option<u32>,
    /// Stop after this many rounds without new meta-paths.
    #[arg(long)]
    stagnation_rounds: Option<u32>,
    /// Generation backend.
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    /// Chat-completions endpoint base URL (http provider).
    #[arg(long)]
    endpoint: Option<String>,
    /// Model name (http provider).
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key (http provider).
    #[arg(long)]
    api_key_env: Option<String>,
    /// Sampling temperature (http provider).
    #[arg(long)]
    temperature: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Direct,
    Rank,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScoreModeArg {
    Confidence,
    Coverage,
    Sum,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Mutation,
    Http,
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Average,
    Optimistic,
    Pessimistic,
}

#[derive(Clone, Copy, ValueEnum)]
enum CandidatesArg {
    Typed,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    MaxConf,
    WeightedSum,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for facts.tsv, types.tsv and ground_truth.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.9)]
    confidence: f64,
    #[arg(long, default_value_t = 0.8)]
    coverage: f64,
    /// Planted chain instances.
    #[arg(long, default_value_t = 100)]
    base_pairs: usize,
    #[arg(long, default_value_t = 2)]
    decoy_relations: usize,
    #[arg(long, default_value_t = 60)]
    noise_entities: usize,
    #[arg(long, default_value_t = 200)]
    noise_facts: usize,
    #[arg(long, default_value_t = 4)]
    noise_relations: usize,
    /// Planted meta-path length in type slots.
    #[arg(long, default_value_t = 3)]
    length: usize,
    #[arg(long, default_value = "targetRel")]
    relation: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DiscoverArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Run directory (buffer, rounds, prompts, resolved config).
    #[arg(long)]
    out: PathBuf,
    /// Continue from the run directory's persisted buffer.
    #[arg(long)]
    resume: bool,
    /// Optional TSV of facts to mask from every scoring call.
    #[arg(long)]
    exclude_facts: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory holding buffer.jsonl.
    #[arg(long)]
    run: PathBuf,
    /// Rows to print.
    #[arg(long, default_value_t = 20)]
    top: usize,
}

#[derive(Args)]
struct EvaluateKbcArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Train:test ratio over the target relation's facts.
    #[arg(long, default_value = "9:1")]
    ratio: String,
    /// Rank against the raw candidate list (no known-tail filtering).
    #[arg(long)]
    raw: bool,
    /// Tie handling for the true tail's rank.
    #[arg(long, value_enum, default_value_t = TieArg::Average)]
    tie: TieArg,
    /// Candidate tail policy.
    #[arg(long, value_enum, default_value_t = CandidatesArg::Typed)]
    candidates: CandidatesArg,
    /// Output directory for the report, split and run state.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateLpArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Train:test ratio over eligible positive pairs.
    #[arg(long, default_value = "8:2")]
    ratio: String,
    /// Positive:negative ratio.
    #[arg(long, default_value = "2:1")]
    neg_ratio: String,
    /// Pair scoring mode.
    #[arg(long, value_enum, default_value_t = ModeArg::MaxConf)]
    mode: ModeArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateInductiveArgs {
    #[command(flatten)]
    lp: EvaluateLpArgs,
    /// Percentage of selected test-pair nodes removed from the discovery
    /// graph (0, 20, 50 or 100 in the standard protocol).
    #[arg(long, default_value_t = 50)]
    removal_pct: u32,
}

/// Per-file configuration; every section is optional.
#[derive(Debug, Default, Serialize, Deserialize)]
struct FileConfig {
    #[serde(default)]
    dataset: DatasetConfig,
    #[serde(default)]
    run: Option<RunConfig>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct DatasetConfig {
    facts: Option<PathBuf>,
    types: Option<PathBuf>,
    dag: Option<PathBuf>,
    #[serde(default = "default_augment")]
    augment_inverses: bool,
}

fn default_augment() -> bool {
    true
}

/// Entry point used by the binary and by tests. Returns the process exit
/// code: 0 success, 1 usage or configuration error, 2 runtime error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version through the error path with success.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Discover(args) => cmd_discover(args),
        Command::Report(args) => cmd_report(args),
        Command::EvaluateKbc(args) => cmd_evaluate_kbc(args),
        Command::EvaluateLp(args) => cmd_evaluate_lp(args),
        Command::EvaluateInductive(args) => cmd_evaluate_inductive(args),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &EvoPathError) -> i32 {
    match err {
        EvoPathError::Config(_)
        | EvoPathError::Parse { .. }
        | EvoPathError::TaxonomyCycle { .. }
        | EvoPathError::UnknownAtom { .. }
        | EvoPathError::TemplatePlaceholder(_) => 1,
        _ => 2,
    }
}

struct Resolved {
    hin: Hin,
    run: RunConfig,
    output_dir: Option<PathBuf>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

fn resolve(dataset: &DatasetArgs, run: &RunArgs) -> Result<Resolved> {
    let file = load_file_config(run.config.as_deref())?;

    let facts = dataset
        .facts
        .clone()
        .or(file.dataset.facts)
        .ok_or_else(|| EvoPathError::Config("--facts (or dataset.facts in --config) is required".into()))?;
    let types = dataset
        .types
        .clone()
        .or(file.dataset.types)
        .ok_or_else(|| EvoPathError::Config("--types (or dataset.types in --config) is required".into()))?;
    let dag = dataset.dag.clone().or(file.dataset.dag);

    let mut hin = load_hin(&facts, &types, dag.as_deref())?;
    let augment = !dataset.no_augment && file.dataset.augment_inverses;
    if augment {
        hin = hin.augment_inverses()?;
    }

    let mut cfg = file
        .run
        .unwrap_or_else(|| RunConfig::new(""));
    if let Some(relation) = &run.relation {
        cfg.target_relation = relation.clone();
    }
    if let Some(seed) = run.seed {
        cfg.rng_seed = seed;
        cfg.walk.rng_seed = 0; // re-derive from the new top-level seed
    }
    if let Some(v) = run.max_length {
        cfg.walk.max_length = v;
    }
    if let Some(v) = run.batch_size {
        cfg.walk.fact_batch_size = v;
    }
    if let Some(v) = run.walks_per_fact {
        cfg.walk.walks_per_fact = v;
    }
    if let Some(v) = run.expand_top_k {
        cfg.expand_top_k = v;
    }
    if let Some(v) = run.min_similarity {
        cfg.min_similarity = v;
    }
    if let Some(v) = run.strategy {
        cfg.buffer.strategy = match v {
            StrategyArg::Direct => Strategy::Direct,
            StrategyArg::Rank => Strategy::Rank,
            StrategyArg::Random => Strategy::Random,
        };
    }
    if let Some(v) = run.score_mode {
        cfg.buffer.score_mode = match v {
            ScoreModeArg::Confidence => ScoreMode::Confidence,
            ScoreModeArg::Coverage => ScoreMode::Coverage,
            ScoreModeArg::Sum => ScoreMode::Sum,
        };
    }
    if let Some(v) = run.few_shot_n {
        cfg.buffer.few_shot_n = v;
    }
    if let Some(v) = run.max_rounds {
        cfg.max_rounds = v;
    }
    if let Some(v) = run.stagnation_rounds {
        cfg.stagnation_rounds = v;
    }
    match run.provider {
        Some(ProviderArg::Mutation) => cfg.provider = ProviderConfig::default(),
        Some(ProviderArg::Http) => {
            let endpoint = run
                .endpoint
                .clone()
                .ok_or_else(|| EvoPathError::Config("--endpoint is required with --provider http".into()))?;
            let model = run
                .model
                .clone()
                .ok_or_else(|| EvoPathError::Config("--model is required with --provider http".into()))?;
            cfg.provider = ProviderConfig::HttpChat {
                endpoint,
                model,
                api_key_env: run.api_key_env.clone(),
                temperature: run.temperature.unwrap_or(0.7),
                max_tokens: 512,
                timeout_secs: 30,
                retries: 2,
            };
        }
        None => {
            // Flag-level tweaks of an http provider from the config file.
            if let ProviderConfig::HttpChat {
                endpoint,
                model,
                api_key_env,
                temperature,
                ..
            } = &mut cfg.provider
            {
                if let Some(v) = &run.endpoint {
                    *endpoint = v.clone();
                }
                if let Some(v) = &run.model {
                    *model = v.clone();
                }
                if let Some(v) = &run.api_key_env {
                    *api_key_env = Some(v.clone());
                }
                if let Some(v) = run.temperature {
                    *temperature = v;
                }
            }
        }
    }
    cfg.resolve_seeds();

    Ok(Resolved {
        hin,
        run: cfg,
        output_dir: file.output_dir,
    })
}

fn parse_ratio(text: &str) -> Result<(u32, u32)> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 2 {
        return Err(EvoPathError::Config(format!("bad ratio '{text}', expected A:B")));
    }
    let a = parts[0]
        .parse::<u32>()
        .map_err(|_| EvoPathError::Config(format!("bad ratio '{text}'")))?;
    let b = parts[1]
        .parse::<u32>()
        .map_err(|_| EvoPathError::Config(format!("bad ratio '{text}'")))?;
    if a == 0 || b == 0 {
        return Err(EvoPathError::Config(format!("ratio parts must be positive: '{text}'")));
    }
    Ok((a, b))
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let facts = args
        .dataset
        .facts
        .ok_or_else(|| EvoPathError::Config("--facts is required".into()))?;
    let types = args
        .dataset
        .types
        .ok_or_else(|| EvoPathError::Config("--types is required".into()))?;
    let hin = load_hin(&facts, &types, args.dataset.dag.as_deref())?;
    let rows: BTreeMap<&str, usize> = BTreeMap::from([
        ("entities", hin.entity_count()),
        ("entity_types", hin.type_count()),
        ("relations", hin.relation_count()),
        ("facts", hin.fact_count()),
    ]);
    for (name, value) in rows {
        println!("{name:<13} {value}");
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    if args.length < 2 {
        return Err(EvoPathError::Config("--length must be >= 2".into()));
    }
    let spec = PlantedSpec {
        target_relation: args.relation,
        metapath_types: (0..args.length).map(|i| format!("T{i}")).collect(),
        metapath_relations: (0..args.length - 1).map(|i| format!("p{i}")).collect(),
        confidence: args.confidence,
        coverage: args.coverage,
        base_pairs: args.base_pairs,
        decoy_relations: args.decoy_relations,
        noise_entities: args.noise_entities,
        noise_facts: args.noise_facts,
        noise_relations: args.noise_relations,
        seed: args.seed,
    };
    let data = generate_planted(&spec)?;
    data.write(&args.out)?;
    println!(
        "planted '{}' at confidence {:.4}, coverage {:.4}; {} facts, {} typed entities -> {}",
        data.truth.metapath_relations.join(" / "),
        data.truth.confidence,
        data.truth.coverage,
        data.facts.len(),
        data.types.len(),
        args.out.display()
    );
    Ok(())
}

fn load_fact_set(hin: &Hin, path: &Path) -> Result<FactSet> {
    let facts = crate::eval::load_kbc_test_facts(hin, path)?;
    Ok(FactSet::closed_from(hin, facts))
}

fn cmd_discover(args: DiscoverArgs) -> Result<()> {
    let resolved = resolve(&args.dataset, &args.run)?;
    let out = args.out;
    if out.join("buffer.jsonl").exists() && !args.resume {
        return Err(EvoPathError::Config(format!(
            "{} already holds a run; pass --resume to continue it",
            out.display()
        )));
    }
    let mut evolution = Evolution::new(&resolved.hin, resolved.run)?.with_run_dir(&out)?;
    if let Some(path) = &args.exclude_facts {
        evolution = evolution.with_excluded_facts(load_fact_set(&resolved.hin, path)?);
    }
    let outcome = evolution.run()?;
    let stop = match outcome.stop {
        StopReason::MaxRounds => "max rounds".to_owned(),
        StopReason::Stagnation { at_round } => format!("stagnation at round {at_round}"),
        StopReason::ProviderFailures { at_round } => {
            format!("provider failures at round {at_round}")
        }
    };
    println!(
        "{} meta-paths in buffer after {} rounds ({}) -> {}",
        outcome.buffer.len(),
        outcome.rounds.iter().map(|r| r.round).max().unwrap_or(0),
        stop,
        out.display()
    );
    if let StopReason::ProviderFailures { .. } = outcome.stop {
        return Err(EvoPathError::Provider {
            status: None,
            message: "run aborted after consecutive provider failures; partial results persisted"
                .into(),
        });
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let path = args.run.join("buffer.jsonl");
    if !path.exists() {
        println!("(empty buffer)");
        return Ok(());
    }
    #[derive(Deserialize)]
    struct Row {
        types: Vec<String>,
        relations: Vec<String>,
        coverage: f64,
        confidence: f64,
        round: u32,
    }
    let text = std::fs::read_to_string(&path)?;
    let mut rows: Vec<Row> = Vec::new();
    for line in text.lines() {
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(line)?);
        }
    }
    rows.sort_by(|a, b| {
        (b.coverage + b.confidence)
            .partial_cmp(&(a.coverage + a.confidence))
            .unwrap()
    });
    println!("{:<60} {:>10} {:>10} {:>6}", "meta-path", "conf", "cov", "round");
    for row in rows.iter().take(args.top) {
        let mut rendered = row.types[0].clone();
        for (i, r) in row.relations.iter().enumerate() {
            rendered.push_str(&format!(" -[{}]-> {}", r, row.types[i + 1]));
        }
        println!(
            "{:<60} {:>10.4} {:>10.4} {:>6}",
            rendered, row.confidence, row.coverage, row.round
        );
    }
    Ok(())
}

fn cmd_evaluate_kbc(args: EvaluateKbcArgs) -> Result<()> {
    let resolved = resolve(&args.dataset, &args.run)?;
    let ratio = parse_ratio(&args.ratio)?;
    let opts = KbcOptions {
        filtered: !args.raw,
        tie: match args.tie {
            TieArg::Average => TieBreak::Average,
            TieArg::Optimistic => TieBreak::Optimistic,
            TieArg::Pessimistic => TieBreak::Pessimistic,
        },
        candidates: match args.candidates {
            CandidatesArg::Typed => CandidateSet::TypedTails,
            CandidatesArg::All => CandidateSet::AllEntities,
        },
    };
    let out = args.out.or(resolved.output_dir);
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    let run_dir = out.as_ref().map(|d| d.join("run"));
    let (report, split, _) = evaluate_kbc(
        &resolved.hin,
        &resolved.run,
        ratio,
        opts,
        run_dir.as_deref(),
    )?;
    print!("{}", report.table());
    if let Some(dir) = &out {
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        save_kbc_split(&resolved.hin, &split, &dir.join("kbc_test.tsv"))?;
    }
    Ok(())
}

fn cmd_evaluate_lp(args: EvaluateLpArgs) -> Result<()> {
    let resolved = resolve(&args.dataset, &args.run)?;
    let (ratios, mode, out) = lp_settings(&args, resolved.output_dir.clone())?;
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    let run_dir = out.as_ref().map(|d| d.join("run"));
    let (report, lp, _) = evaluate_lp(
        &resolved.hin,
        &resolved.run,
        ratios,
        mode,
        run_dir.as_deref(),
    )?;
    print!("{}", report.table());
    if let Some(dir) = &out {
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        save_lp_dataset(&resolved.hin, &lp, &dir.join("lp_pairs.tsv"))?;
    }
    Ok(())
}

fn lp_settings(
    args: &EvaluateLpArgs,
    fallback_out: Option<PathBuf>,
) -> Result<(LpRatios, LpScoreMode, Option<PathBuf>)> {
    let split = parse_ratio(&args.ratio)?;
    let neg = parse_ratio(&args.neg_ratio)?;
    if neg.1 != 1 {
        return Err(EvoPathError::Config(format!(
            "--neg-ratio must be N:1, got '{}'",
            args.neg_ratio
        )));
    }
    let ratios = LpRatios {
        train: split.0,
        test: split.1,
        pos_per_neg: neg.0,
    };
    let mode = match args.mode {
        ModeArg::MaxConf => LpScoreMode::MaxConf,
        ModeArg::WeightedSum => LpScoreMode::WeightedSum,
    };
    Ok((ratios, mode, args.out.clone().or(fallback_out)))
}

fn cmd_evaluate_inductive(args: EvaluateInductiveArgs) -> Result<()> {
    let resolved = resolve(&args.lp.dataset, &args.lp.run)?;
    let (ratios, mode, out) = lp_settings(&args.lp, resolved.output_dir.clone())?;
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)?;
    }
    let run_dir = out.as_ref().map(|d| d.join("run"));
    let (report, lp, mask) = evaluate_inductive(
        &resolved.hin,
        &resolved.run,
        ratios,
        mode,
        args.removal_pct,
        run_dir.as_deref(),
    )?;
    print!("{}", report.table());
    println!(
        "removed {} nodes; {} of {} selected pairs affected",
        mask.removed_nodes.len(),
        mask.affected_pairs.len(),
        mask.selected_pairs.len()
    );
    if let Some(dir) = &out {
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        save_lp_dataset(&resolved.hin, &lp, &dir.join("lp_pairs.tsv"))?;
    }
    Ok(())
}
