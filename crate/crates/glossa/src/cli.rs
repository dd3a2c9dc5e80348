//! Command line front end.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use glossa_core::eval::{confusion_matrix, evaluate, fit_to_gold, ConfusionMatrix, EvalReport};
use glossa_core::index::IndexOptions;
use glossa_core::instructions::{
    contrastive_instances, mine_confusable_pairs, InstructionStore, DEFAULT_MAX_INSTANCES,
    DEFAULT_PAIR_THRESHOLD,
};
use glossa_core::prompt::{build_gloss_prompt, select_instructions, PromptConfig};
use glossa_core::run::{GlossRun, RunMode};
use glossa_core::{CorpusIndex, IgtEntry, MorphemeDenominator};
use serde_json::json;

use crate::corpus::{language_from_path, load_corpus};
use crate::feedback_log::FeedbackLog;
use crate::gateway::{echo_distribution, Gateway, GatewayConfig, MockBackend, OpenAiBackend};
use crate::pipeline::{gloss_corpus, RunOptions};
use crate::service::{serve, AppBuilder, ServiceConfig};
use crate::snapshot::load_or_build;
use crate::store::{generate_instructions, InstructionDir};

#[derive(Debug, Parser)]
#[command(
    name = "glossa",
    version,
    about = "Retrieval-assisted interlinear glossing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build (and cache) the retrieval snapshot for a training file.
    Index(IndexArgs),
    /// Gloss a corpus and write a run artifact.
    Gloss(GlossArgs),
    /// Score a run's first choices against gold.
    Evaluate(EvalArgs),
    /// Score a run's first choices and its Jaccard oracle choices.
    Oracle(ScoreArgs),
    /// Tag-signature confusion table.
    Confusions(ConfusionArgs),
    /// Pairs confused more often than a threshold.
    MinePairs(MineArgs),
    /// Mine pairs, extract contrastive instances and generate guidelines.
    GenInstructions(GenArgs),
    /// Run the HTTP annotation service.
    Serve(ServeArgs),
    /// Prompt inspection.
    Prompt {
        #[command(subcommand)]
        command: PromptCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum PromptCommand {
    /// Print the exact prompt for one token.
    Dump(DumpArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training corpus in shared-task format.
    #[arg(long)]
    pub train: PathBuf,
    /// Language code; defaults to the file name prefix.
    #[arg(long)]
    pub lang: Option<String>,
    /// Sampler seed for example selection.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for cached snapshots.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

impl TrainArgs {
    fn language(&self) -> String {
        self.lang
            .clone()
            .unwrap_or_else(|| language_from_path(&self.train))
    }

    fn load(&self) -> Result<(Vec<IgtEntry>, CorpusIndex)> {
        let parsed = load_corpus(&self.train, Some(&self.language()))?;
        let (index, cached) = load_or_build(
            self.cache_dir.as_deref(),
            &parsed.entries,
            &IndexOptions { seed: self.seed },
        )
        .context("snapshot cache")?;
        tracing::info!(
            "snapshot {} ({} entries{})",
            &index.corpus_id[..12],
            index.entries.len(),
            if cached { ", cached" } else { "" }
        );
        Ok((parsed.entries, index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Openai,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MockDefault {
    /// Answer `?` for unscripted prompts.
    Unknown,
    /// Answer with the distribution head shown in the prompt.
    Distribution,
}

#[derive(Debug, Clone, Args)]
pub struct GatewayArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Openai)]
    pub backend: BackendKind,
    /// TOML gateway configuration (endpoint, model, retries, caps).
    #[arg(long)]
    pub gateway_config: Option<PathBuf>,
    /// JSON object of prompt hash to response, for the mock backend.
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MockDefault::Unknown)]
    pub mock_default: MockDefault,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub cost_cap: Option<u64>,
    /// Response cache directory.
    #[arg(long)]
    pub response_cache: Option<PathBuf>,
    /// JSON-lines audit log of every attempt.
    #[arg(long)]
    pub audit_log: Option<PathBuf>,
}

impl GatewayArgs {
    pub fn build(&self) -> Result<Gateway> {
        let mut config = match &self.gateway_config {
            Some(p) => GatewayConfig::load(p)?,
            None => GatewayConfig::default(),
        };
        if let Some(n) = self.max_in_flight {
            config.max_in_flight = n;
        }
        if self.cost_cap.is_some() {
            config.cost_cap = self.cost_cap;
        }
        if self.response_cache.is_some() {
            config.cache_dir = self.response_cache.clone();
        }
        if self.audit_log.is_some() {
            config.audit_log = self.audit_log.clone();
        }
        let gateway = match self.backend {
            BackendKind::Openai => {
                let backend = OpenAiBackend::new(&config).map_err(|e| anyhow::anyhow!("{e}"))?;
                Gateway::new(config, Arc::new(backend))?
            }
            BackendKind::Mock => {
                let mut mock = MockBackend::new();
                if let Some(p) = &self.mock_script {
                    let text = std::fs::read_to_string(p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    mock = mock.with_script_json(&text)?;
                }
                if self.mock_default == MockDefault::Distribution {
                    mock = mock.responder(echo_distribution);
                }
                config.model = "mock".into();
                Gateway::new(config, Arc::new(mock))?
            }
        };
        Ok(gateway)
    }
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Also write the full snapshot as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Retrieval,
    Llm,
    #[value(name = "llm+instructions")]
    LlmInstructions,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Retrieval => RunMode::Retrieval,
            ModeArg::Llm => RunMode::Llm,
            ModeArg::LlmInstructions => RunMode::LlmInstructions,
        }
    }
}

#[derive(Debug, Args)]
pub struct GlossArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Corpus to gloss (glosses, if present, are ignored).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Retrieval)]
    pub mode: ModeArg,
    /// Gloss only the first N entries.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Run artifact (JSON lines); also the resume checkpoint.
    #[arg(long)]
    pub out: PathBuf,
    /// Instruction store root, for llm+instructions.
    #[arg(long)]
    pub instructions: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub concurrency: usize,
    #[command(flatten)]
    pub gateway: GatewayArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Word,
    Morpheme,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DenominatorArg {
    Max,
    Gold,
}

impl From<DenominatorArg> for MorphemeDenominator {
    fn from(d: DenominatorArg) -> Self {
        match d {
            DenominatorArg::Max => MorphemeDenominator::MaxLength,
            DenominatorArg::Gold => MorphemeDenominator::GoldLength,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// Run artifact from `gloss`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Gold corpus.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_enum, default_value_t = DenominatorArg::Max)]
    pub denominator: DenominatorArg,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    #[arg(long, value_enum, default_value_t = Metric::Both)]
    pub metric: Metric,
    /// Also write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfusionArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[command(flatten)]
    pub score: ScoreArgs,
    #[arg(long, default_value_t = DEFAULT_PAIR_THRESHOLD)]
    pub threshold: usize,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    /// Baseline dev run used for mining.
    #[arg(long)]
    pub pred: PathBuf,
    /// Dev gold corpus.
    #[arg(long)]
    pub gold: PathBuf,
    /// Instruction store root.
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PAIR_THRESHOLD)]
    pub threshold: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_INSTANCES)]
    pub max_instances: usize,
    #[command(flatten)]
    pub gateway: GatewayArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory for the feedback logs; without it feedback is not durable.
    #[arg(long)]
    pub feedback_dir: Option<PathBuf>,
    /// Instruction store root.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Run and gold files whose confusions `/api/confusions` reports.
    #[arg(long, requires = "confusions_gold")]
    pub confusions_pred: Option<PathBuf>,
    #[arg(long, requires = "confusions_pred")]
    pub confusions_gold: Option<PathBuf>,
    /// Serve retrieval suggestions only, without a model.
    #[arg(long)]
    pub no_gateway: bool,
    #[command(flatten)]
    pub gateway: GatewayArgs,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Entry number in the input corpus (0-based).
    #[arg(long)]
    pub entry: usize,
    /// Token position (0-based).
    #[arg(long)]
    pub pos: usize,
    /// Instruction store root; injects guidelines when one applies.
    #[arg(long)]
    pub instructions: Option<PathBuf>,
}

fn instruction_store(root: Option<&Path>, language: &str) -> Result<Option<InstructionStore>> {
    root.map(|r| InstructionDir::new(r, language).load_store())
        .transpose()
        .map_err(Into::into)
}

/// Run plus the gold entries it covers, with predictions fitted to gold.
struct Scored {
    run: GlossRun,
    gold: Vec<IgtEntry>,
    one_best: Vec<Vec<String>>,
}

fn load_scored(args: &ScoreArgs) -> Result<Scored> {
    let text = std::fs::read_to_string(&args.pred)
        .with_context(|| format!("reading {}", args.pred.display()))?;
    let run = GlossRun::from_jsonl(&text).with_context(|| args.pred.display().to_string())?;
    let mut gold = load_corpus(&args.gold, None)?.entries;
    if run.header.entry_count > gold.len() {
        bail!(
            "run covers {} entries but gold has {}",
            run.header.entry_count,
            gold.len()
        );
    }
    gold.truncate(run.header.entry_count);
    let (one_best, adjusted) = fit_to_gold(run.one_best(&gold), &gold);
    if adjusted > 0 {
        tracing::warn!("{adjusted} gold entries have gloss lines of a different length than their transcription");
    }
    Ok(Scored {
        run,
        gold,
        one_best,
    })
}

fn print_report(label: &str, report: &EvalReport, metric: Metric) {
    if metric != Metric::Morpheme {
        println!(
            "{label} word accuracy:     {:6.2}  ({}/{})",
            report.word_accuracy, report.correct_tokens, report.token_count
        );
    }
    if metric != Metric::Word {
        println!(
            "{label} morpheme accuracy: {:6.2}  ({}/{})",
            report.morpheme_accuracy, report.correct_morphemes, report.morpheme_count
        );
    }
}

fn report_json(report: &EvalReport) -> serde_json::Value {
    json!({
        "wordAccuracy": report.word_accuracy,
        "morphemeAccuracy": report.morpheme_accuracy,
        "tokenCount": report.token_count,
        "correctTokens": report.correct_tokens,
        "morphemeCount": report.morpheme_count,
        "correctMorphemes": report.correct_morphemes,
        "denominator": report.denominator,
    })
}

fn confusion_table(matrix: &ConfusionMatrix, top: usize) {
    let rows = matrix.top(top);
    let width = rows
        .iter()
        .map(|(p, _)| p.to_string().chars().count())
        .max()
        .unwrap_or(0)
        .max("Tags".len());
    println!("{:<width$}  Count", "Tags");
    for (pair, count) in rows {
        println!("{:<width$}  {count:>5}", pair.to_string());
    }
    println!(
        "{:<width$}  {:>5}",
        "CVB / any",
        matrix.element_aggregate("CVB")
    );
    println!("token errors: {}", matrix.token_errors);
}

fn cmd_index(args: IndexArgs) -> Result<()> {
    let (_, index) = args.train.load()?;
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_vec(&index)?)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "corpusId": index.corpus_id,
            "entries": index.entries.len(),
            "skippedMisaligned": index.skipped_misaligned,
            "vocabulary": index.vocabulary.len(),
            "reverseKeys": index.reverse.len(),
        }))?
    );
    Ok(())
}

async fn cmd_gloss(args: GlossArgs) -> Result<()> {
    let (_, index) = args.train.load()?;
    let language = args.train.language();
    let input = load_corpus(&args.input, Some(&language))?.entries;
    let mode = RunMode::from(args.mode);
    let gateway = match mode {
        RunMode::Retrieval => None,
        _ => Some(args.gateway.build()?),
    };
    let store = if mode == RunMode::LlmInstructions {
        let store = instruction_store(args.instructions.as_deref(), &language)?;
        if store.as_ref().is_none_or(|s| s.is_empty()) {
            tracing::warn!("llm+instructions without any stored instructions");
        }
        store
    } else {
        None
    };
    let corpus_ref = args
        .input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut options = RunOptions::new(mode, corpus_ref);
    options.limit = args.limit;
    options.concurrency = args.concurrency;
    options.checkpoint = Some(args.out.clone());
    let result = gloss_corpus(&index, gateway.as_ref(), &input, store.as_ref(), &options).await;
    if let Some(g) = &gateway {
        let s = g.stats();
        tracing::info!(
            "gateway: {} requests, {} sent, {} cache hits, {} attempts",
            s.requests,
            s.backend_requests,
            s.cache_hits,
            s.attempts
        );
    }
    let run = match result {
        Ok(run) => run,
        Err(e) => {
            eprintln!(
                "run stopped: {e}; {} holds a partial checkpoint, rerun to resume",
                args.out.display()
            );
            return Err(e.into());
        }
    };
    println!(
        "{} entries, {} tokens glossed, {} fallbacks -> {}",
        run.header.entry_count,
        run.per_word.len(),
        run.failures.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvalArgs) -> Result<()> {
    let s = load_scored(&args.score)?;
    let report = evaluate(&s.one_best, &s.gold, args.score.denominator.into())?;
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_vec_pretty(&report_json(&report))?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if args.score.json {
        println!("{}", serde_json::to_string_pretty(&report_json(&report))?);
    } else {
        print_report("1-best", &report, args.metric);
    }
    Ok(())
}

fn cmd_oracle(args: ScoreArgs) -> Result<()> {
    let s = load_scored(&args)?;
    let denom = args.denominator.into();
    let best = evaluate(&s.one_best, &s.gold, denom)?;
    let (oracle, _) = fit_to_gold(s.run.oracle(&s.gold), &s.gold);
    let oracle = evaluate(&oracle, &s.gold, denom)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "oneBest": report_json(&best),
                "oracle": report_json(&oracle),
            }))?
        );
    } else {
        print_report("1-best", &best, Metric::Both);
        print_report("oracle", &oracle, Metric::Both);
    }
    Ok(())
}

fn cmd_confusions(args: ConfusionArgs) -> Result<()> {
    let s = load_scored(&args.score)?;
    let matrix = confusion_matrix(&s.one_best, &s.gold)?;
    if args.score.json {
        let rows: Vec<_> = matrix
            .top(args.top)
            .into_iter()
            .map(|(p, c)| json!({"a": p.a, "b": p.b, "count": c}))
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&json!({
                "pairs": rows,
                "cvbAny": matrix.element_aggregate("CVB"),
                "tokenErrors": matrix.token_errors,
            }))?
        );
    } else {
        confusion_table(&matrix, args.top);
    }
    Ok(())
}

fn cmd_mine(args: MineArgs) -> Result<()> {
    let s = load_scored(&args.score)?;
    let matrix = confusion_matrix(&s.one_best, &s.gold)?;
    let pairs = mine_confusable_pairs(&matrix, args.threshold);
    if args.score.json {
        println!("{}", serde_json::to_string_pretty(&pairs)?);
    } else {
        for p in pairs {
            println!("{} / {}\t{}", p.a, p.b, p.dev_confusion_count);
        }
    }
    Ok(())
}

async fn cmd_gen(args: GenArgs) -> Result<()> {
    let (_, index) = args.train.load()?;
    let language = args.train.language();
    let scored = load_scored(&ScoreArgs {
        pred: args.pred.clone(),
        gold: args.gold.clone(),
        denominator: DenominatorArg::Max,
        json: false,
    })?;
    let matrix = confusion_matrix(&scored.one_best, &scored.gold)?;
    let pairs = mine_confusable_pairs(&matrix, args.threshold);
    if pairs.is_empty() {
        println!("no pair confused more than {} times", args.threshold);
        return Ok(());
    }
    let gateway = args.gateway.build()?;
    let dir = InstructionDir::new(&args.store, &language);
    for pair in &pairs {
        if contrastive_instances(&index, pair, args.max_instances).is_empty() {
            println!("{} / {}: no contrastive instances, skipped", pair.a, pair.b);
            continue;
        }
        // one pair at a time keeps the audit trail in order
        let set =
            generate_instructions(&gateway, &index, pair, args.max_instances, &language).await?;
        dir.save(&set)?;
        println!(
            "{} / {}: {} instances -> {}",
            pair.a,
            pair.b,
            set.instance_count,
            dir.path().join(format!("{}.txt", pair.slug())).display()
        );
    }
    Ok(())
}

async fn cmd_serve(args: ServeArgs) -> Result<()> {
    let (entries, _) = args.train.load()?;
    let language = args.train.language();
    let base: Vec<IgtEntry> = entries;
    let mut config = ServiceConfig::new(&language);
    config.seed = args.train.seed;
    let mut builder = AppBuilder::new(config, base);
    if let Some(dir) = &args.feedback_dir {
        builder = builder.feedback_log(FeedbackLog::open(dir)?);
    }
    if let Some(root) = &args.store {
        builder = builder.instruction_dir(InstructionDir::new(root, &language));
    }
    if let (Some(pred), Some(gold)) = (&args.confusions_pred, &args.confusions_gold) {
        let s = load_scored(&ScoreArgs {
            pred: pred.clone(),
            gold: gold.clone(),
            denominator: DenominatorArg::Max,
            json: false,
        })?;
        builder = builder.confusions(confusion_matrix(&s.one_best, &s.gold)?);
    }
    if !args.no_gateway {
        builder = builder.gateway(Arc::new(args.gateway.build()?));
    }
    let state = builder.build()?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .context("listen address")?;
    serve(state, addr).await?;
    Ok(())
}

fn cmd_dump(args: DumpArgs) -> Result<()> {
    let (_, index) = args.train.load()?;
    let language = args.train.language();
    let input = load_corpus(&args.input, Some(&language))?.entries;
    let entry = input.get(args.entry).with_context(|| {
        format!(
            "entry {} not in input ({} entries)",
            args.entry,
            input.len()
        )
    })?;
    let store = instruction_store(args.instructions.as_deref(), &language)?;
    let word = entry
        .transcription
        .get(args.pos)
        .with_context(|| format!("position {} not in entry", args.pos))?;
    let injected = store
        .as_ref()
        .and_then(|s| select_instructions(&index, s, word));
    let bundle = build_gloss_prompt(
        &index,
        entry,
        args.pos,
        injected.as_ref(),
        &PromptConfig::default(),
    )?;
    print!("{}", bundle.text);
    Ok(())
}

pub async fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Gloss(a) => cmd_gloss(a).await,
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Confusions(a) => cmd_confusions(a),
        Command::MinePairs(a) => cmd_mine(a),
        Command::GenInstructions(a) => cmd_gen(a).await,
        Command::Serve(a) => cmd_serve(a).await,
        Command::Prompt {
            command: PromptCommand::Dump(a),
        } => cmd_dump(a),
    }
}
