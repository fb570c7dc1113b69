//! Command-line surface shared by the `geo` binary and the integration tests.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::answer::{parse_cited_answer, render_cited_answer};
use crate::archive::Archive;
use crate::coevolution::{Coevolution, RegretOracle};
use crate::config::{load_config, RunConfig};
use crate::critic::{
    build_offline_labels, ndcg_at_k, order_by_score, train_offline, CriticModel, OfflineData,
    TrainingSet, CONTRASTIVE_BAND,
};
use crate::engine::dataset::{load_instances, synthetic_dataset};
use crate::engine::{
    BackendKind, ChatClient, Engine, EngineBackend, Evaluator, RemoteEngine, SimulatedEngine,
};
use crate::error::{Error, Result};
use crate::genotype::{apply_operator, seed_genotypes, Strategy, CATALOG};
use crate::impressions::{compute_impressions, sensitivity_profile};
use crate::planner::{optimize, render_trace_table};
use crate::types::{Context, Document, Instance, Query};
use crate::util::derived_rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "geo", about = "Generative-engine visibility optimization", version)]
pub struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// simulated or remote.
    #[arg(long, global = true)]
    pub backend: Option<BackendKind>,
    /// Directory for every artifact the command writes.
    #[arg(long, global = true, default_value = "geo-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Impression scores of a cited answer, or seed sensitivity over a dataset.
    Eval(EvalArgs),
    /// Offline critic alignment on engine labels.
    TrainCritic(TrainCriticArgs),
    /// Strategy and critic co-evolution.
    Evolve(EvolveArgs),
    /// Critic-guided multi-step rewriting of one document.
    Optimize(OptimizeArgs),
    /// Simulated-engine answers for a dataset.
    Simulate(DatasetArg),
    /// Ranking quality of a critic on labeled contexts.
    Ndcg(NdcgArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArg {
    /// JSONL instances; a synthetic dataset is generated when omitted.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Raw cited answer text.
    #[arg(long, requires_all = ["target", "n"])]
    pub answer: Option<PathBuf>,
    /// 1-based citation index of the document to score.
    #[arg(long)]
    pub target: Option<usize>,
    /// Number of candidate documents.
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub data: DatasetArg,
}

#[derive(Debug, Args)]
pub struct TrainCriticArgs {
    /// Previously generated labels (JSON); generated through the backend when omitted.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Random one-step variants of the seeds added to the labeled pool.
    #[arg(long, default_value_t = 18)]
    pub mutants: usize,
    #[command(flatten)]
    pub data: DatasetArg,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    /// Continue the run saved under --out.
    #[arg(long)]
    pub resume: bool,
    /// Track regret against the best lever profile (simulated backend only).
    #[arg(long)]
    pub regret: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// File holding the query text.
    #[arg(long)]
    pub query: PathBuf,
    /// File holding the document text.
    #[arg(long)]
    pub doc: PathBuf,
    #[arg(long)]
    pub archive: PathBuf,
    /// Critic weights; defaults to critic.json next to the archive.
    #[arg(long)]
    pub critic: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NdcgArgs {
    #[arg(long)]
    pub critic: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Backend(_) => EXIT_BACKEND,
        _ => EXIT_VALIDATION,
    }
}

/// Parses `args` (program name first) and runs the command, writing
/// human-readable output to `stdout`. Returns the process exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(b) = cli.backend {
        cfg.backend = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn build_engine(cfg: &RunConfig) -> Result<EngineBackend> {
    Ok(match cfg.backend {
        BackendKind::Simulated => EngineBackend::Simulated(SimulatedEngine::new(cfg.simulation_params())?),
        BackendKind::Remote => EngineBackend::Remote(RemoteEngine::new(ChatClient::new(cfg.remote_params()))),
    })
}

fn dataset(cfg: &RunConfig, arg: &DatasetArg) -> Result<Vec<Instance>> {
    match &arg.dataset {
        Some(p) => load_instances(p),
        None => Ok(synthetic_dataset(&cfg.dataset_spec())),
    }
}

fn read_text(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::io(p, e))
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    if let Some(dir) = p.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(p, text).map_err(|e| Error::io(p, e))
}

fn write_jsonl<T: Serialize>(p: &Path, rows: &[T]) -> Result<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    write_text(p, &text)
}

fn out_err(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = resolve_config(cli)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    match &cli.command {
        Command::Eval(a) => cmd_eval(&cfg, cli, a, out),
        Command::TrainCritic(a) => cmd_train_critic(&cfg, cli, a, out),
        Command::Evolve(a) => cmd_evolve(&cfg, cli, a, out),
        Command::Optimize(a) => cmd_optimize(&cfg, cli, a, out),
        Command::Simulate(a) => cmd_simulate(&cfg, cli, a, out),
        Command::Ndcg(a) => cmd_ndcg(cli, a, out),
    }
}

#[derive(Serialize)]
struct SensitivityRow {
    context_id: String,
    max_gain: f64,
    sensitivity: f64,
    overall: Vec<(String, f64)>,
}

fn cmd_eval(cfg: &RunConfig, cli: &Cli, a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(path) = &a.answer {
        let (target, n) = (a.target.expect("clap requires"), a.n.expect("clap requires"));
        if target == 0 || target > n {
            return Err(Error::Validation(format!("target {target} is outside 1..={n}")));
        }
        let answer = parse_cited_answer(&read_text(path)?, n);
        let s = compute_impressions(&answer, target);
        writeln!(out, "word {}\npos {}\noverall {}", s.word, s.pos, s.overall).map_err(out_err)?;
        return Ok(());
    }
    let engine = build_engine(cfg)?;
    let seeds = seed_genotypes();
    let mut rows = Vec::new();
    for inst in dataset(cfg, &a.data)? {
        let ctx = inst.context();
        let mut overall = Vec::new();
        for s in &seeds {
            let doc = engine.rewrite(&ctx.document, s, &ctx.query)?;
            let answer = engine.synthesize_answer(&ctx.query, &inst.candidates.with_target_text(&doc.text))?;
            overall.push((s.id.clone(), compute_impressions(&answer, inst.candidates.target_citation()).overall));
        }
        let values: Vec<f64> = overall.iter().map(|(_, v)| *v).collect();
        let p = sensitivity_profile(&values)?;
        writeln!(out, "{} max_gain {:.4} sensitivity {:.4}", ctx.id(), p.max_gain, p.sensitivity)
            .map_err(out_err)?;
        rows.push(SensitivityRow {
            context_id: ctx.id(),
            max_gain: p.max_gain,
            sensitivity: p.sensitivity,
            overall,
        });
    }
    write_jsonl(&cli.out.join("sensitivity.jsonl"), &rows)
}

/// The nine seeds plus `mutants` distinct one-step mutations of them.
pub fn labeling_pool(seed: u64, mutants: usize) -> Result<Vec<Strategy>> {
    let seeds = seed_genotypes();
    let mut rng = derived_rng(seed, &["labeling-pool"]);
    let mut pool = seeds.clone();
    let mut k = 0;
    while pool.len() < seeds.len() + mutants && k < mutants * 20 {
        use rand::seq::SliceRandom;
        let parent = seeds.choose(&mut rng).expect("nine seeds");
        let ops: Vec<_> = CATALOG
            .iter()
            .filter(|o| !o.is_crossover() && o.is_applicable(&parent.genotype))
            .collect();
        let op = **ops.choose(&mut rng).expect("some mutation applies");
        let g = apply_operator(op, &parent.genotype, None, &mut rng)?;
        let child = Strategy::child(format!("variant-{k:03}"), g, parent, None, op);
        if !pool.iter().any(|s| s.summary == child.summary) {
            pool.push(child);
        }
        k += 1;
    }
    Ok(pool)
}

fn cmd_train_critic(cfg: &RunConfig, cli: &Cli, a: &TrainCriticArgs, out: &mut dyn Write) -> Result<()> {
    let data: OfflineData = match &a.labels {
        Some(p) => serde_json::from_str(&read_text(p)?)?,
        None => {
            let evaluator = Evaluator::new(build_engine(cfg)?);
            let instances = dataset(cfg, &a.data)?;
            let pool = labeling_pool(cfg.seed, a.mutants)?;
            let mut rng = derived_rng(cfg.seed, &["labels"]);
            let d = build_offline_labels(&evaluator, &instances, &pool, CONTRASTIVE_BAND, &mut rng)?;
            write_text(&cli.out.join("labels.json"), &serde_json::to_string(&d)?)?;
            d
        }
    };
    let mut critic = CriticModel::new(cfg.critic_config())?;
    let set = TrainingSet::from_offline(&data, &critic)?;
    let report = train_offline(&mut critic, &set, &cfg.train_config())?;
    critic.save(&cli.out.join("critic.json"))?;
    report.write_jsonl(&cli.out.join("train_report.jsonl"))?;
    writeln!(
        out,
        "labels {} pairs {} loss {:.6} -> {:.6}",
        data.labels.len(),
        data.pairs.len(),
        report.initial_loss.total,
        report.final_loss().total
    )
    .map_err(out_err)?;
    Ok(())
}

fn cmd_evolve(cfg: &RunConfig, cli: &Cli, a: &EvolveArgs, out: &mut dyn Write) -> Result<()> {
    let instances = dataset(cfg, &a.data)?;
    let engine = build_engine(cfg)?;
    let proposer = (cfg.proposer == crate::config::ProposerKind::Remote)
        .then(|| ChatClient::new(cfg.remote_params()));
    let mut run = if a.resume {
        Coevolution::resume(&cli.out, Evaluator::new(engine), instances)?
    } else {
        let mut run = Coevolution::new(cfg.clone(), Evaluator::new(engine), instances)?;
        if a.regret {
            if cfg.backend != BackendKind::Simulated {
                return Err(Error::Validation("regret tracking needs the simulated backend".into()));
            }
            let oracle_engine = Evaluator::new(SimulatedEngine::new(cfg.simulation_params())?);
            run.enable_regret(RegretOracle::build(&oracle_engine, &run.instances)?);
        }
        run
    };
    if let Some(client) = proposer {
        run = run.with_remote_proposer(client);
    }
    let summary = run.run(Some(&cli.out))?;
    let text = serde_json::to_string_pretty(&summary)?;
    write_text(&cli.out.join("summary.json"), &text)?;
    writeln!(out, "{text}").map_err(out_err)?;
    Ok(())
}

fn cmd_optimize(cfg: &RunConfig, cli: &Cli, a: &OptimizeArgs, out: &mut dyn Write) -> Result<()> {
    let query = Query::new("query", read_text(&a.query)?.trim())?;
    let doc = Document::new("doc", read_text(&a.doc)?.trim());
    let archive = Archive::load(&a.archive)?;
    let critic_path = a.critic.clone().unwrap_or_else(|| {
        a.archive
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("critic.json")
    });
    let critic = if critic_path.exists() {
        CriticModel::load(&critic_path)?
    } else {
        log::warn!("no critic at {}; using an untrained one", critic_path.display());
        CriticModel::new(cfg.critic_config())?
    };
    let engine = build_engine(cfg)?;
    let (final_doc, trace) = optimize(
        &query,
        &doc,
        &archive,
        &critic,
        &engine,
        cfg.planner_top_k,
        cfg.planner_max_steps,
    )?;
    write_text(&cli.out.join("trace.json"), &serde_json::to_string_pretty(&trace)?)?;
    write_text(&cli.out.join("final_document.txt"), &final_doc.text)?;
    write!(out, "{}\n{}\n", render_trace_table(&trace), final_doc.text).map_err(out_err)?;
    Ok(())
}

#[derive(Serialize)]
struct SimulatedAnswer {
    context_id: String,
    answer: String,
    word: f64,
    pos: f64,
    overall: f64,
}

fn cmd_simulate(cfg: &RunConfig, cli: &Cli, a: &DatasetArg, out: &mut dyn Write) -> Result<()> {
    let engine = SimulatedEngine::new(cfg.simulation_params())?;
    let mut rows = Vec::new();
    for inst in dataset(cfg, a)? {
        let answer = engine.synthesize_answer(&inst.query, &inst.candidates)?;
        let s = compute_impressions(&answer, inst.candidates.target_citation());
        let text = render_cited_answer(&answer);
        writeln!(out, "## {}\n{}\n", inst.context().id(), text).map_err(out_err)?;
        rows.push(SimulatedAnswer {
            context_id: inst.context().id(),
            answer: text,
            word: s.word,
            pos: s.pos,
            overall: s.overall,
        });
    }
    write_jsonl(&cli.out.join("answers.jsonl"), &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NdcgReport {
    pub contexts: usize,
    pub ndcg_at_1: f64,
    pub ndcg_at_3: f64,
    pub ndcg_at_5: f64,
}

/// Mean NDCG@{1,3,5} of `critic` over the labeled contexts of `data`.
pub fn ndcg_report(critic: &CriticModel, data: &OfflineData) -> Result<NdcgReport> {
    let set = TrainingSet::from_offline(data, critic)?;
    let mut sums = [0.0; 3];
    let mut n = 0usize;
    for g in &set.groups {
        if g.gains.is_empty() {
            continue;
        }
        // Linear gains need a non-negative scale; shift by the context minimum.
        let min = g.gains.iter().copied().fold(f64::INFINITY, f64::min);
        let gains: Vec<f64> = g.gains.iter().map(|x| x - min).collect();
        let scores: Vec<f64> = g.features.iter().map(|x| critic.score_features(x)).collect();
        let order = order_by_score(&scores);
        for (slot, k) in [1, 3, 5].iter().enumerate() {
            sums[slot] += ndcg_at_k(&order, &gains, *k);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Validation("no labeled contexts".into()));
    }
    Ok(NdcgReport {
        contexts: n,
        ndcg_at_1: sums[0] / n as f64,
        ndcg_at_3: sums[1] / n as f64,
        ndcg_at_5: sums[2] / n as f64,
    })
}

fn cmd_ndcg(cli: &Cli, a: &NdcgArgs, out: &mut dyn Write) -> Result<()> {
    let critic = CriticModel::load(&a.critic)?;
    let data: OfflineData = serde_json::from_str(&read_text(&a.labels)?)?;
    let report = ndcg_report(&critic, &data)?;
    let text = serde_json::to_string_pretty(&report)?;
    write_text(&cli.out.join("ndcg.json"), &text)?;
    writeln!(out, "{text}").map_err(out_err)?;
    Ok(())
}

/// Context built from raw query and document text, as `optimize` does.
pub fn context_from_text(query: &str, doc: &str) -> Result<Context> {
    Ok(Context::new(Query::new("query", query.trim())?, Document::new("doc", doc.trim())))
}
